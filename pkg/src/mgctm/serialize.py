"""Versioned JSON persistence for models, fit reports, and sampler output.

Every file is a self-describing JSON object with "format" and "version"
fields so a reader can refuse files it does not understand. Floats are
written with full repr precision and arrays as nested lists, which makes
outputs byte-identical across runs with the same seed. Writes go through
a temp file in the target directory followed by os.replace, so a crash
never leaves a half-written file behind.
"""

import json

import numpy as np

from .corpus import atomic_write_text
from .errors import CorpusFormatError
from .model import FitReport, HiddenAssignments, ModelParams

MODEL_FORMAT = "mgctm-model"
LDA_FORMAT = "lda-model"
REPORT_FORMAT = "fit-report"
HIDDEN_FORMAT = "mgctm-hidden"
FORMAT_VERSION = 1


class _FullPrecision(json.JSONEncoder):
    def default(self, o):
        if isinstance(o, np.integer):
            return int(o)
        if isinstance(o, np.floating):
            return float(o)
        if isinstance(o, np.ndarray):
            return o.tolist()
        return super().default(o)


def _dump(payload, path):
    atomic_write_text(path, json.dumps(payload, cls=_FullPrecision, indent=1) + "\n")


def _load(path, expect_format):
    with open(path) as handle:
        try:
            payload = json.load(handle)
        except json.JSONDecodeError as exc:
            raise CorpusFormatError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(payload, dict):
        raise CorpusFormatError(f"{path}: expected a JSON object")
    got = payload.get("format")
    if got != expect_format:
        raise CorpusFormatError(
            f"{path}: format {got!r} where {expect_format!r} expected"
        )
    version = payload.get("version")
    if version != FORMAT_VERSION:
        raise CorpusFormatError(f"{path}: unsupported version {version!r}")
    return payload


def save_model(params, path, report=None):
    """Write ModelParams (and optionally a FitReport) to one JSON file."""
    payload = {
        "format": MODEL_FORMAT,
        "version": FORMAT_VERSION,
        "num_clusters": params.num_clusters,
        "local_topics_per_cluster": params.local_topics_per_cluster,
        "num_global_topics": params.num_global_topics,
        "vocab_size": params.vocab_size,
        "pi": params.pi,
        "gamma": params.gamma,
        "local_priors": params.local_priors,
        "global_prior": params.global_prior,
        "local_topics": params.local_topics,
        "global_topics": params.global_topics,
    }
    if report is not None:
        payload["report"] = report_payload(report)
    _dump(payload, path)


def load_model(path):
    """Read a model file; returns (ModelParams, FitReport or None)."""
    payload = _load(path, MODEL_FORMAT)
    try:
        params = ModelParams(
            pi=np.array(payload["pi"], dtype=float),
            gamma=np.array(payload["gamma"], dtype=float),
            local_priors=np.array(payload["local_priors"], dtype=float),
            global_prior=np.array(payload["global_prior"], dtype=float),
            local_topics=np.array(payload["local_topics"], dtype=float),
            global_topics=np.array(payload["global_topics"], dtype=float),
        )
    except KeyError as exc:
        raise CorpusFormatError(f"{path}: missing field {exc}") from exc
    params.validate()
    for name in ("num_clusters", "local_topics_per_cluster", "num_global_topics", "vocab_size"):
        if payload.get(name) != getattr(params, name):
            raise CorpusFormatError(f"{path}: declared {name} disagrees with arrays")
    report = None
    if "report" in payload:
        report = report_from_payload(payload["report"])
    return params, report


def report_payload(report):
    # wall_time is intentionally not persisted: files produced by two runs
    # of the same seeded command must be byte-identical.
    return {
        "format": REPORT_FORMAT,
        "version": FORMAT_VERSION,
        "elbo_trace": list(report.elbo_trace),
        "iterations_run": report.iterations_run,
        "converged": report.converged,
    }


def report_from_payload(payload):
    if payload.get("format") != REPORT_FORMAT:
        raise CorpusFormatError("embedded report has wrong format tag")
    return FitReport(
        elbo_trace=[float(x) for x in payload["elbo_trace"]],
        iterations_run=int(payload["iterations_run"]),
        converged=bool(payload["converged"]),
    )


def save_hidden(hidden, path):
    """Write sampler ground truth; unused topic slots stay -1."""
    payload = {
        "format": HIDDEN_FORMAT,
        "version": FORMAT_VERSION,
        "cluster": hidden.cluster,
        "omega": hidden.omega,
        "indicator": [a.tolist() for a in hidden.indicator],
        "local_z": [a.tolist() for a in hidden.local_z],
        "global_z": [a.tolist() for a in hidden.global_z],
    }
    _dump(payload, path)


def load_hidden(path):
    payload = _load(path, HIDDEN_FORMAT)
    return HiddenAssignments(
        cluster=np.array(payload["cluster"], dtype=np.int64),
        omega=np.array(payload["omega"], dtype=float),
        indicator=[np.array(a, dtype=np.int64) for a in payload["indicator"]],
        local_z=[np.array(a, dtype=np.int64) for a in payload["local_z"]],
        global_z=[np.array(a, dtype=np.int64) for a in payload["global_z"]],
    )


def save_lda(model, path, report=None):
    """Write an LDA baseline model (topics + per-document proportions)."""
    payload = {
        "format": LDA_FORMAT,
        "version": FORMAT_VERSION,
        "num_topics": model.topics.shape[0],
        "vocab_size": model.topics.shape[1],
        "alpha": model.alpha,
        "topics": model.topics,
        "doc_theta": model.doc_theta,
    }
    if report is not None:
        payload["report"] = report_payload(report)
    _dump(payload, path)


def load_lda(path):
    from .baselines import LdaModel

    payload = _load(path, LDA_FORMAT)
    model = LdaModel(
        topics=np.array(payload["topics"], dtype=float),
        doc_theta=np.array(payload["doc_theta"], dtype=float),
        alpha=float(payload["alpha"]),
    )
    if payload.get("num_topics") != model.topics.shape[0] or payload.get(
        "vocab_size"
    ) != model.topics.shape[1]:
        raise CorpusFormatError(f"{path}: declared shape disagrees with arrays")
    report = None
    if "report" in payload:
        report = report_from_payload(payload["report"])
    return model, report
