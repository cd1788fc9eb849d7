"""Reference baselines: flat LDA and k-means clustering.

The LDA here is the plain single-grain topic model fitted by the same
kind of variational EM as the main model, with one twist: topic rows get
a fixed pseudocount in the M-step, and the reported objective includes
the matching log-prior term so the trace stays monotone. Clustering
baselines derive labels from it two ways (argmax of the document's topic
proportions, or k-means on the proportion vectors) and k-means can also
run directly on tf-idf vectors.
"""

import logging
import time
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, psi, xlogy

from .errors import ConfigError, DegenerateInputError, NumericalError
from .inference import DECREASE_SLACK, DOC_SWEEP_REL_TOL, _dir_ep, _safe_log
from .model import FitReport, perturbed_uniform_rows
from .numerics import log_normalize

logger = logging.getLogger(__name__)


@dataclass
class LdaModel:
    """Fitted LDA baseline.

    topics: (T, V) word distributions.
    doc_theta: (D, T) variational Dirichlet parameters over each
        document's topic proportions.
    alpha: symmetric document prior (held fixed during fitting).
    """

    topics: np.ndarray
    doc_theta: np.ndarray
    alpha: float


def _lda_doc_bound(alpha, num_topics, c, lb, gamma_d, phi):
    # lb: (M, T) log word probabilities for this doc's distinct terms
    elog = psi(gamma_d) - psi(gamma_d.sum())
    t_prior = (
        gammaln(num_topics * alpha)
        - num_topics * gammaln(alpha)
        + (alpha - 1.0) * elog.sum()
    )
    x = elog[None, :] + lb
    t_words = (c[:, None] * phi * np.where(phi > 0, x, 0.0)).sum()
    t_entropy = -_dir_ep(gamma_d, elog) - (c[:, None] * xlogy(phi, phi)).sum()
    return t_prior + t_words + t_entropy


def fit_lda(
    corpus,
    num_topics,
    seed=0,
    alpha=0.1,
    eta=0.01,
    max_em_iters=100,
    e_step_iters=20,
    elbo_rel_tol=1e-5,
):
    """Fit LDA by variational EM.

    The trace records, per iteration, the sum of the per-document bounds
    plus eta * sum(log topics); the M-step's pseudocount eta is the exact
    maximizer of that term, so the trace never decreases beyond float
    slack. elbo_rel_tol = 0 disables early stopping.

    Returns (LdaModel, FitReport).
    """
    if num_topics < 1:
        raise ConfigError("num_topics must be >= 1")
    if corpus.num_docs < 1:
        raise DegenerateInputError("cannot fit an empty corpus")
    if alpha <= 0 or eta <= 0:
        raise ConfigError("alpha and eta must be > 0")

    start = time.perf_counter()
    num_docs, v_dim = corpus.num_docs, corpus.vocab_size
    rng = np.random.default_rng(seed)
    topics = perturbed_uniform_rows((num_topics, v_dim), rng)
    counts = [doc.counts.astype(float) for doc in corpus.docs]
    gammas = np.full((num_docs, num_topics), alpha)
    gammas += np.array([c.sum() for c in counts])[:, None] / num_topics
    phis = [np.full((c.size, num_topics), 1.0 / num_topics) for c in counts]

    def objective(log_topics):
        total = eta * log_topics.sum()
        for d, doc in enumerate(corpus.docs):
            lb = log_topics[:, doc.word_ids].T
            total += _lda_doc_bound(
                alpha, num_topics, counts[d], lb, gammas[d], phis[d]
            )
        return total

    log_topics = _safe_log(topics)
    trace = [objective(log_topics)]
    converged = False
    iterations = 0
    for _ in range(max_em_iters):
        weights = np.zeros((num_topics, v_dim))
        for d, doc in enumerate(corpus.docs):
            c = counts[d]
            lb = log_topics[:, doc.word_ids].T
            gamma_d = gammas[d]
            phi = phis[d]
            prev_bound = _lda_doc_bound(alpha, num_topics, c, lb, gamma_d, phi)
            for _ in range(e_step_iters):
                elog = psi(gamma_d) - psi(gamma_d.sum())
                phi = log_normalize(elog[None, :] + lb, axis=-1)
                gamma_d = alpha + c @ phi
                bound = _lda_doc_bound(alpha, num_topics, c, lb, gamma_d, phi)
                if bound - prev_bound < DOC_SWEEP_REL_TOL * max(1.0, abs(prev_bound)):
                    break
                prev_bound = bound
            gammas[d] = gamma_d
            phis[d] = phi
            weights[:, doc.word_ids] += (c[:, None] * phi).T

        topics = weights + eta
        topics /= topics.sum(axis=-1, keepdims=True)
        log_topics = _safe_log(topics)
        iterations += 1

        value = objective(log_topics)
        prev = trace[-1]
        trace.append(value)
        if value < prev - DECREASE_SLACK * max(1.0, abs(prev)):
            raise NumericalError(
                f"objective decreased from {prev:.10g} to {value:.10g} "
                f"at iteration {iterations}",
                details={"previous": prev, "current": value, "trace": list(trace)},
            )
        if elbo_rel_tol > 0 and value - prev < elbo_rel_tol * max(1.0, abs(prev)):
            converged = True
            break

    report = FitReport(
        elbo_trace=trace,
        iterations_run=iterations,
        converged=converged,
        wall_time=time.perf_counter() - start,
    )
    return LdaModel(topics=topics, doc_theta=gammas, alpha=alpha), report


def lda_naive_cluster(model):
    """Cluster by each document's highest-proportion topic (ties: lowest id)."""
    return np.argmax(model.doc_theta, axis=1).astype(np.int64)


def _squared_distances(points, centers):
    d2 = (
        (points * points).sum(axis=1)[:, None]
        + (centers * centers).sum(axis=1)[None, :]
        - 2.0 * points @ centers.T
    )
    return np.maximum(d2, 0.0)


def _kmeans_pp_seed(points, k, rng):
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    d2 = _squared_distances(points, centers[:1])[:, 0]
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers[j] = points[idx]
        d2 = np.minimum(d2, _squared_distances(points, centers[j : j + 1])[:, 0])
    return centers


def _lloyd(points, k, rng, max_iters, cost_trace=None):
    n = points.shape[0]
    centers = _kmeans_pp_seed(points, k, rng)
    labels = None
    for _ in range(max_iters):
        d2 = _squared_distances(points, centers)
        new_labels = d2.argmin(axis=1)
        assigned = d2[np.arange(n), new_labels]
        for j in range(k):
            if not np.any(new_labels == j):
                # revive an empty cluster from the worst-placed point
                idx = int(assigned.argmax())
                new_labels[idx] = j
                assigned[idx] = -1.0
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(k):
            centers[j] = points[labels == j].mean(axis=0)
        if cost_trace is not None:
            d2 = _squared_distances(points, centers)
            cost_trace.append(float(d2[np.arange(n), labels].sum()))
    d2 = _squared_distances(points, centers)
    wcss = float(d2[np.arange(n), labels].sum())
    return labels.astype(np.int64), centers, wcss


def kmeans(points, num_clusters, seed=0, restarts=10, max_iters=100):
    """Plain k-means with greedy seeding and restarts.

    Centers are seeded by sampling points proportionally to squared
    distance from those already chosen; the best of ``restarts``
    independent runs by within-cluster sum of squares wins. Each restart
    seeds its own generator from (seed, restart index), so results are
    reproducible and restarts are independent.

    Returns (labels, centers, wcss).
    """
    points = np.asarray(points, dtype=float)
    if points.ndim != 2:
        raise ConfigError("points must be a 2-d array")
    if num_clusters < 1:
        raise ConfigError("num_clusters must be >= 1")
    if points.shape[0] < num_clusters:
        raise DegenerateInputError("fewer points than clusters")
    if restarts < 1 or max_iters < 1:
        raise ConfigError("restarts and max_iters must be >= 1")

    best = None
    for r in range(restarts):
        rng = np.random.default_rng([seed, r])
        labels, centers, wcss = _lloyd(points, num_clusters, rng, max_iters)
        if best is None or wcss < best[2]:
            best = (labels, centers, wcss)
    return best


def theta_kmeans(model, num_clusters, seed=0, restarts=10, max_iters=100):
    """Cluster a fitted LDA model's documents by k-means on their
    normalized topic proportions."""
    theta = model.doc_theta / model.doc_theta.sum(axis=1, keepdims=True)
    labels, _, _ = kmeans(
        theta, num_clusters, seed=seed, restarts=restarts, max_iters=max_iters
    )
    return labels


def lda_kmeans(corpus, num_clusters, num_topics=60, seed=0, restarts=10, **lda_opts):
    """Fit LDA, then k-means on the normalized topic proportions.

    num_topics defaults to 60 and is independent of the cluster count.
    Extra keyword arguments go to fit_lda.
    """
    model, _ = fit_lda(corpus, num_topics, seed=seed, **lda_opts)
    return theta_kmeans(model, num_clusters, seed=seed, restarts=restarts)
