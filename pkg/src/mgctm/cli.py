"""Command-line entry point.

Subcommands: train (fit a model and persist it with its fit report),
eval (score a clustering method against ground-truth labels), topics
(print each topic's most probable words), synth (sample a corpus from
known parameters), and bench (run several methods over several seeds
and write a delimited comparison table).

Flag values can also come from a JSON config file ({"format":
"run-config", "version": 1, ...}) passed via --config; flags given on
the command line win over the file. Validation problems exit with
status 2 before any output file is touched; numerical failures during
fitting exit with status 1. All file writes are atomic.
"""

import argparse
import json
import sys

import numpy as np

from . import baselines, corpus as corpus_mod, serialize
from .errors import (
    ConfigError,
    CorpusFormatError,
    DegenerateInputError,
    DimensionError,
    EstimationError,
    NumericalError,
)
from .evaluation import clustering_accuracy, nmi
from .inference import fit, infer_doc_states
from .model import HyperConfig, predict_cluster, random_model_params, top_words

VALIDATION_EXIT = 2
FAILURE_EXIT = 1

_METHODS = ("mgctm", "lda-naive", "lda-kmeans", "kmeans")


def _err(msg):
    print(f"error: {msg}", file=sys.stderr)


class CliError(Exception):
    pass


def _add_shared(parser):
    parser.add_argument("--corpus", help="bag-of-words file")
    parser.add_argument("--vocab", help="vocabulary file, one token per line")
    parser.add_argument("--labels", help="labels file, one integer per line")
    parser.add_argument("--model", help="model file")
    parser.add_argument("--seed", type=int, help="random seed (default 0)")
    parser.add_argument("--threads", type=int, help="E-step worker threads")
    parser.add_argument("--config", help="JSON run-config file with defaults")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mgctm",
        description="Document clustering with cluster-local and shared global topics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="fit a model on a corpus")
    _add_shared(p_train)
    p_train.add_argument("--clusters", type=int, help="number of clusters J")
    p_train.add_argument("--local-topics", type=int, help="local topics per cluster K")
    p_train.add_argument("--global-topics", type=int, help="shared global topics R")
    p_train.add_argument("--max-em-iters", type=int, help="EM iteration cap (default 100)")
    p_train.add_argument("--e-step-iters", type=int, help="coordinate sweeps per document (default 20)")
    p_train.add_argument("--tol", type=float, help="relative bound tolerance (default 1e-5; 0 disables)")
    p_train.add_argument("--init", choices=["random", "lda-naive"], help="initialization (default random)")
    p_train.add_argument("--prior-update", choices=["every-iter", "fixed"], help="prior re-estimation (default every-iter)")

    p_eval = sub.add_parser("eval", help="score a clustering against true labels")
    _add_shared(p_eval)
    p_eval.add_argument("--method", choices=_METHODS, help="clustering method")
    p_eval.add_argument("--clusters", type=int, help="cluster count (default: distinct true labels)")
    p_eval.add_argument("--lda-topics", type=int, help="LDA topic count for lda-kmeans (default 60)")

    p_topics = sub.add_parser("topics", help="print each topic's top words")
    _add_shared(p_topics)
    p_topics.add_argument("--top-n", type=int, help="words per topic (default 10)")
    p_topics.add_argument("--scope", choices=["all", "local", "global"], help="which topics (default all)")
    p_topics.add_argument("--cluster", type=int, help="restrict local topics to one cluster")

    p_synth = sub.add_parser("synth", help="sample a corpus from known parameters")
    _add_shared(p_synth)
    p_synth.add_argument("--params", help="model file with generating parameters")
    p_synth.add_argument("--clusters", type=int, help="clusters for generated parameters")
    p_synth.add_argument("--local-topics", type=int, help="local topics per cluster")
    p_synth.add_argument("--global-topics", type=int, help="global topics")
    p_synth.add_argument("--vocab-size", type=int, help="vocabulary size")
    p_synth.add_argument("--docs", type=int, help="number of documents")
    p_synth.add_argument("--doc-length", type=int, help="tokens per document")
    p_synth.add_argument("--hidden", help="output file for true latent assignments")

    p_bench = sub.add_parser("bench", help="compare methods over seeds")
    _add_shared(p_bench)
    p_bench.add_argument("--methods", help="comma-separated method list")
    p_bench.add_argument("--seeds", help="comma-separated seed list (default: the shared seed)")
    p_bench.add_argument("--out", help="output TSV report path")
    p_bench.add_argument("--clusters", type=int, help="cluster count (default: distinct true labels)")
    p_bench.add_argument("--local-topics", type=int, help="local topics per cluster (default 1)")
    p_bench.add_argument("--global-topics", type=int, help="global topics (default 1)")
    p_bench.add_argument("--lda-topics", type=int, help="LDA topic count for lda-kmeans (default 60)")
    p_bench.add_argument("--max-em-iters", type=int, help="EM iteration cap (default 100)")
    p_bench.add_argument("--tol", type=float, help="relative bound tolerance (default 1e-5)")
    p_bench.add_argument("--init", choices=["random", "lda-naive"], help="model initialization (default random)")
    return parser


_DEFAULTS = {
    "seed": 0,
    "threads": None,
    "max_em_iters": 100,
    "e_step_iters": 20,
    "tol": 1e-5,
    "init": "random",
    "prior_update": "every-iter",
    "top_n": 10,
    "scope": "all",
    "lda_topics": 60,
}


def _apply_config(ns):
    """Fill unset flags from the --config file, then from defaults."""
    values = {}
    if ns.config is not None:
        with open(ns.config, encoding="utf-8") as fh:
            try:
                payload = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{ns.config}: not valid JSON ({exc})") from exc
        if not isinstance(payload, dict) or payload.get("format") != "run-config":
            raise ConfigError(f"{ns.config}: expected a run-config JSON object")
        if payload.get("version") != 1:
            raise ConfigError(f"{ns.config}: unsupported version")
        values = {k: v for k, v in payload.items() if k not in ("format", "version")}
        unknown = [k for k in values if not hasattr(ns, k)]
        if unknown:
            raise ConfigError(f"{ns.config}: unknown keys {unknown}")
    for key, value in values.items():
        if getattr(ns, key) is None:
            setattr(ns, key, value)
    for key, value in _DEFAULTS.items():
        if hasattr(ns, key) and getattr(ns, key) is None:
            setattr(ns, key, value)


def _require(ns, *names):
    for name in names:
        if getattr(ns, name) is None:
            raise CliError(f"--{name.replace('_', '-')} is required")


def _load_corpus(ns, need_labels=False):
    _require(ns, "corpus")
    if need_labels:
        _require(ns, "labels")
    return corpus_mod.load_bow(ns.corpus, vocab_path=ns.vocab, labels_path=ns.labels)


def _load_truth(ns, corpus):
    truth = np.asarray(corpus_mod.load_labels(ns.labels), dtype=np.int64)
    if corpus is not None and truth.shape[0] != corpus.num_docs:
        raise DimensionError(
            f"{truth.shape[0]} labels for {corpus.num_docs} documents"
        )
    return truth


def cmd_train(ns):
    _require(ns, "corpus", "model", "clusters", "local_topics", "global_topics")
    corpus = _load_corpus(ns)
    config = HyperConfig(
        num_clusters=ns.clusters,
        local_topics_per_cluster=ns.local_topics,
        num_global_topics=ns.global_topics,
        max_em_iters=ns.max_em_iters,
        e_step_iters=ns.e_step_iters,
        elbo_rel_tol=ns.tol,
        seed=ns.seed,
        init_scheme="from_labels" if ns.init == "lda-naive" else "random",
        prior_update=ns.prior_update.replace("-", "_"),
    )
    init_labels = None
    if ns.init == "lda-naive":
        lda, _ = baselines.fit_lda(corpus, ns.clusters, seed=ns.seed)
        init_labels = baselines.lda_naive_cluster(lda)
    params, _, report = fit(
        config, corpus, init_labels=init_labels, threads=ns.threads
    )
    for i, value in enumerate(report.elbo_trace):
        print(f"iter={i} elbo={value:.6f}")
    print(f"converged={str(report.converged).lower()} iterations={report.iterations_run}")
    serialize.save_model(params, ns.model, report=report)
    return 0


def _eval_predictions(ns, truth_classes):
    """Run the requested method and return its predicted labels."""
    k = ns.clusters if ns.clusters is not None else truth_classes
    if k < 1:
        raise CliError("--clusters must be >= 1")
    if ns.method == "mgctm":
        _require(ns, "model")
        corpus = _load_corpus(ns)
        params, _ = serialize.load_model(ns.model)
        if params.vocab_size != corpus.vocab_size:
            raise DimensionError("model and corpus vocabulary sizes differ")
        states = infer_doc_states(params, corpus, threads=ns.threads)
        return np.array([predict_cluster(s) for s in states], dtype=np.int64)
    if ns.method == "kmeans":
        corpus = _load_corpus(ns)
        vectors = corpus_mod.tfidf_vectors(corpus)
        labels, _, _ = baselines.kmeans(vectors, k, seed=ns.seed)
        return labels
    # the two LDA routes accept a fitted model file or fit on the fly
    if ns.model is not None:
        lda, _ = serialize.load_lda(ns.model)
    elif ns.method == "lda-naive":
        lda, _ = baselines.fit_lda(_load_corpus(ns), k, seed=ns.seed)
    else:
        lda, _ = baselines.fit_lda(_load_corpus(ns), ns.lda_topics, seed=ns.seed)
    if ns.method == "lda-naive":
        return baselines.lda_naive_cluster(lda)
    return baselines.theta_kmeans(lda, k, seed=ns.seed)


def cmd_eval(ns):
    _require(ns, "method", "labels")
    truth = np.asarray(corpus_mod.load_labels(ns.labels), dtype=np.int64)
    if truth.size == 0:
        raise DimensionError("labels file is empty")
    pred = _eval_predictions(ns, len(np.unique(truth)))
    if pred.shape[0] != truth.shape[0]:
        raise DimensionError(
            f"{pred.shape[0]} predictions for {truth.shape[0]} labels"
        )
    print(f"ac={100.0 * clustering_accuracy(pred, truth):.2f}")
    print(f"nmi={100.0 * nmi(pred, truth):.2f}")
    return 0


def cmd_topics(ns):
    _require(ns, "model", "vocab")
    params, _ = serialize.load_model(ns.model)
    vocab = corpus_mod.load_vocab(ns.vocab)
    if len(vocab) != params.vocab_size:
        raise DimensionError(
            f"vocabulary has {len(vocab)} tokens, model expects {params.vocab_size}"
        )
    if ns.cluster is not None and not 0 <= ns.cluster < params.num_clusters:
        raise CliError(f"--cluster {ns.cluster} out of range")

    def words(scope, topic, cluster=None):
        ids = top_words(params, scope, topic, cluster=cluster, n=ns.top_n)
        return " ".join(vocab.tokens[i] for i in ids)

    if ns.scope in ("all", "global"):
        print("# global topics")
        for t in range(params.num_global_topics):
            print(f"topic {t}: {words('global', t)}")
    if ns.scope in ("all", "local"):
        clusters = (
            [ns.cluster]
            if ns.cluster is not None
            else range(params.num_clusters)
        )
        for j in clusters:
            print(f"# cluster {j} local topics")
            for t in range(params.local_topics_per_cluster):
                print(f"topic {t}: {words('local', t, cluster=j)}")
    return 0


def cmd_synth(ns):
    from .model import sample_corpus

    _require(ns, "corpus", "vocab", "labels", "docs", "doc_length")
    if ns.params is not None:
        params, _ = serialize.load_model(ns.params)
    else:
        _require(ns, "clusters", "local_topics", "global_topics", "vocab_size")
        params = random_model_params(
            ns.clusters,
            ns.local_topics,
            ns.global_topics,
            ns.vocab_size,
            seed=ns.seed,
        )
    corpus, hidden = sample_corpus(params, ns.docs, ns.doc_length, seed=ns.seed)
    corpus_mod.save_bow(corpus, ns.corpus)
    corpus_mod.save_vocab([f"w{i}" for i in range(corpus.vocab_size)], ns.vocab)
    corpus_mod.save_labels([doc.label for doc in corpus.docs], ns.labels)
    if ns.hidden is not None:
        serialize.save_hidden(hidden, ns.hidden)
    print(f"documents={corpus.num_docs} vocab={corpus.vocab_size}")
    return 0


def _bench_predictions(method, corpus, k, seed, ns):
    if method == "mgctm":
        config = HyperConfig(
            num_clusters=k,
            local_topics_per_cluster=ns.local_topics,
            num_global_topics=ns.global_topics,
            max_em_iters=ns.max_em_iters,
            elbo_rel_tol=ns.tol,
            seed=seed,
            init_scheme="from_labels" if ns.init == "lda-naive" else "random",
        )
        init_labels = None
        if ns.init == "lda-naive":
            lda, _ = baselines.fit_lda(corpus, k, seed=seed)
            init_labels = baselines.lda_naive_cluster(lda)
        _, states, _ = fit(config, corpus, init_labels=init_labels, threads=ns.threads)
        return np.array([predict_cluster(s) for s in states], dtype=np.int64)
    if method == "lda-naive":
        lda, _ = baselines.fit_lda(
            corpus, k, seed=seed, max_em_iters=ns.max_em_iters, elbo_rel_tol=ns.tol
        )
        return baselines.lda_naive_cluster(lda)
    if method == "lda-kmeans":
        return baselines.lda_kmeans(
            corpus,
            k,
            num_topics=ns.lda_topics,
            seed=seed,
            max_em_iters=ns.max_em_iters,
            elbo_rel_tol=ns.tol,
        )
    vectors = corpus_mod.tfidf_vectors(corpus)
    labels, _, _ = baselines.kmeans(vectors, k, seed=seed)
    return labels


def cmd_bench(ns):
    _require(ns, "corpus", "labels", "methods", "out")
    corpus = _load_corpus(ns)
    truth = _load_truth(ns, corpus)
    if ns.local_topics is None:
        ns.local_topics = 1
    if ns.global_topics is None:
        ns.global_topics = 1

    methods = []
    for name in ns.methods.split(","):
        name = name.strip()
        if not name:
            continue
        if name not in _METHODS:
            raise CliError(f"unknown method {name!r} (choose from {', '.join(_METHODS)})")
        if name in methods:
            print(f"warning: duplicate method {name!r} ignored", file=sys.stderr)
            continue
        methods.append(name)
    if not methods:
        raise CliError("--methods selected nothing")
    seeds = [ns.seed]
    if ns.seeds is not None:
        try:
            seeds = [int(s) for s in ns.seeds.split(",") if s.strip()]
        except ValueError as exc:
            raise CliError(f"--seeds must be integers: {exc}") from exc
        if not seeds:
            raise CliError("--seeds selected nothing")
    k = ns.clusters if ns.clusters is not None else len(np.unique(truth))

    lines = ["method\tseed\tac\tnmi\tstatus"]
    any_failed = False
    summary = []
    for method in methods:
        scores = []
        for seed in seeds:
            try:
                pred = _bench_predictions(method, corpus, k, seed, ns)
                ac = 100.0 * clustering_accuracy(pred, truth)
                mi = 100.0 * nmi(pred, truth)
                scores.append((ac, mi))
                lines.append(f"{method}\t{seed}\t{ac:.2f}\t{mi:.2f}\tok")
            except (NumericalError, EstimationError, DegenerateInputError) as exc:
                any_failed = True
                _err(f"{method} seed={seed} failed: {exc}")
                lines.append(f"{method}\t{seed}\t-\t-\tfailed")
        if scores:
            mean_ac = sum(s[0] for s in scores) / len(scores)
            mean_mi = sum(s[1] for s in scores) / len(scores)
            lines.append(f"{method}\tmean\t{mean_ac:.2f}\t{mean_mi:.2f}\tok")
            summary.append((method, mean_ac, mean_mi))
        else:
            lines.append(f"{method}\tmean\t-\t-\tfailed")
    corpus_mod.atomic_write_text(ns.out, "\n".join(lines) + "\n")
    for method, mean_ac, mean_mi in summary:
        print(f"{method}.ac={mean_ac:.2f}")
        print(f"{method}.nmi={mean_mi:.2f}")
    return FAILURE_EXIT if any_failed else 0


_COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "topics": cmd_topics,
    "synth": cmd_synth,
    "bench": cmd_bench,
}


def main(argv=None):
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code
    try:
        _apply_config(ns)
        return _COMMANDS[ns.command](ns)
    except (
        CliError,
        ConfigError,
        CorpusFormatError,
        DegenerateInputError,
        DimensionError,
        FileNotFoundError,
        IsADirectoryError,
        PermissionError,
    ) as exc:
        _err(str(exc))
        return VALIDATION_EXIT
    except (NumericalError, EstimationError) as exc:
        _err(str(exc))
        return FAILURE_EXIT


if __name__ == "__main__":
    sys.exit(main())
