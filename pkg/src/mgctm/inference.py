"""Variational EM for the multi-grain clustering topic model.

The posterior over per-document latents (cluster indicator, the two
topic-proportion vectors, the pathway coin, and per-word pathway and
topic assignments) is approximated by a fully factorized family. The
E-step cycles closed-form coordinate updates per document; the M-step
re-estimates mixture weights, topic rows, and (optionally) the Dirichlet
and Beta priors from the expected sufficient statistics. Every update
maximizes the evidence lower bound in its own coordinate, so the bound
is non-decreasing over iterations; a decrease beyond float slack is
reported as an error rather than papered over.

Bookkeeping conventions that make the bound exact: clusters a document
did not select keep a flat Dirichlet reference over their unused local
proportions, and word slots routed to one pathway carry a uniform
reference over the other pathway's topic choice. The constants those
references contribute (log-gamma of the local topic count, log of the
topic counts) appear in the bound and the updates below.

Documents are processed in fixed-size batches padded to the corpus-wide
maximum distinct-term count; zero padded counts contribute exactly
nothing to any update or bound term, and the fixed layout makes results
bitwise independent of the thread count.
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy.special import expit, gammaln, psi, xlogy

from .errors import DegenerateInputError, NumericalError
from .model import (
    TOPIC_SMOOTHING,
    DocVariational,
    FitReport,
    ModelParams,
)
from .numerics import DirichletStats, dirichlet_mle, log_normalize

logger = logging.getLogger(__name__)

# An EM step may lower the bound by at most this much (relative) before
# the run is aborted; covers float noise and the tiny topic smoothing.
DECREASE_SLACK = 1e-6
# Per-document coordinate sweeps stop once the bound gain drops below this.
DOC_SWEEP_REL_TOL = 1e-8
# A cluster with less total responsibility than this is left untouched
# by the M-step so its topics do not collapse to the smoothing uniform.
EMPTY_CLUSTER_EPS = 1e-6
# Documents per E-step batch; constant so that batch boundaries (and
# therefore float results) never depend on the worker count.
BATCH_DOCS = 256

ELBO_TERM_NAMES = (
    "cluster_choice",
    "coin_prior",
    "local_proportions_prior",
    "global_proportions_prior",
    "pathway_choice",
    "local_topic_choice",
    "global_topic_choice",
    "word_emission",
    "entropy",
)

# Coordinate blocks in sweep order: word-level assignments first, then
# the document-level proportions, the coin posterior, and the cluster
# responsibilities against the refreshed proportions.
E_STEP_BLOCKS = (
    "phi_local",
    "phi_global",
    "tau",
    "mu_local",
    "mu_global",
    "lam",
    "zeta",
)


def _elog_dir(alpha):
    """Expected log components of a Dirichlet, rows along the last axis."""
    return psi(alpha) - psi(alpha.sum(axis=-1, keepdims=True))


def _scale0(c, x):
    # c * x under the convention 0 * (-inf) = 0; c must be >= 0
    return c * np.where(c > 0, x, 0.0)


def _gdot(p, x, axis=None):
    # sum(p * x) with p == 0 entries contributing nothing even at x = -inf
    return np.sum(p * np.where(p > 0, x, 0.0), axis=axis)


def _dir_ep(alpha, elog):
    """E[log Dir(theta; alpha)] given E[log theta], along the last axis."""
    alpha = np.asarray(alpha)
    return (
        gammaln(alpha.sum(axis=-1))
        - gammaln(alpha).sum(axis=-1)
        + ((alpha - 1.0) * elog).sum(axis=-1)
    )


def _safe_log(p):
    with np.errstate(divide="ignore"):
        return np.log(p)


def doc_log_beta(params, doc):
    """Per-term log emission probabilities for one document.

    Returns (local, global) arrays of shape (M, J, K) and (M, R) where M
    is the document's distinct term count.
    """
    lb_l = _safe_log(params.local_topics[:, :, doc.word_ids])
    lb_g = _safe_log(params.global_topics[:, doc.word_ids])
    return lb_l.transpose(2, 0, 1).copy(), lb_g.T.copy()


class _Batch:
    """Padded arrays for a block of documents.

    Every per-document quantity gains a leading batch axis; padded term
    slots carry zero counts (and finite dummy log probabilities), which
    makes them exact no-ops in every update and bound term.
    """

    def __init__(self, params, docs, states, m_max, log_beta_local, log_beta_global):
        n = len(docs)
        j_dim = params.num_clusters
        k_dim = params.local_topics_per_cluster
        r_dim = params.num_global_topics
        self.params = params
        self.docs = docs
        self.log_k = np.log(k_dim)
        self.log_r = np.log(r_dim)

        self.counts = np.zeros((n, m_max))
        self.lb_l = np.zeros((n, m_max, j_dim, k_dim))
        self.lb_g = np.zeros((n, m_max, r_dim))
        self.zeta = np.empty((n, j_dim))
        self.lam = np.empty((n, 2))
        self.mu_l = np.empty((n, j_dim, k_dim))
        self.mu_g = np.empty((n, r_dim))
        self.tau = np.full((n, m_max), 0.5)
        self.phi_l = np.full((n, m_max, j_dim, k_dim), 1.0 / k_dim)
        self.phi_g = np.full((n, m_max, r_dim), 1.0 / r_dim)
        for i, (doc, state) in enumerate(zip(docs, states)):
            m = doc.word_ids.size
            self.counts[i, :m] = doc.counts
            self.lb_l[i, :m] = log_beta_local[:, :, doc.word_ids].transpose(2, 0, 1)
            self.lb_g[i, :m] = log_beta_global[:, doc.word_ids].T
            self.zeta[i] = state.zeta
            self.lam[i] = state.lam
            self.mu_l[i] = state.mu_local
            self.mu_g[i] = state.mu_global
            self.tau[i, :m] = state.tau
            self.phi_l[i, :m] = state.phi_local
            self.phi_g[i, :m] = state.phi_global

    def _update_phi_local(self, act):
        x_l = _elog_dir(self.mu_l[act])[:, None] + self.lb_l[act]
        scale = (self.tau[act][:, :, None] * self.zeta[act][:, None, :])[..., None]
        self.phi_l[act] = log_normalize(_scale0(scale, x_l), axis=-1)

    def _update_phi_global(self, act):
        x_g = _elog_dir(self.mu_g[act])[:, None] + self.lb_g[act]
        scale = (1.0 - self.tau[act])[:, :, None]
        self.phi_g[act] = log_normalize(_scale0(scale, x_g), axis=-1)

    def _update_tau(self, act):
        x_l = _elog_dir(self.mu_l[act])[:, None] + self.lb_l[act]
        x_g = _elog_dir(self.mu_g[act])[:, None] + self.lb_g[act]
        local_score = _gdot(self.phi_l[act], x_l, axis=-1)
        global_score = _gdot(self.phi_g[act], x_g, axis=-1)
        lam = self.lam[act]
        logit = (
            (psi(lam[:, 0]) - psi(lam[:, 1]))[:, None]
            + _gdot(self.zeta[act][:, None, :], local_score, axis=-1)
            + self.log_k
            - global_score
            - self.log_r
        )
        self.tau[act] = expit(logit)

    def _update_mu_local(self, act):
        zeta = self.zeta[act]
        ct = self.counts[act] * self.tau[act]
        self.mu_l[act] = (
            zeta[:, :, None] * self.params.local_priors[None]
            + zeta[:, :, None] * (ct[:, :, None, None] * self.phi_l[act]).sum(axis=1)
            + (1.0 - zeta)[:, :, None]
        )

    def _update_mu_global(self, act):
        cg = self.counts[act] * (1.0 - self.tau[act])
        self.mu_g[act] = self.params.global_prior[None] + (
            cg[:, :, None] * self.phi_g[act]
        ).sum(axis=1)

    def _update_lam(self, act):
        ct = self.counts[act] * self.tau[act]
        cg = self.counts[act] * (1.0 - self.tau[act])
        self.lam[act] = self.params.gamma[None] + np.stack(
            [ct.sum(axis=1), cg.sum(axis=1)], axis=1
        )

    def _update_zeta(self, act):
        elog_l = _elog_dir(self.mu_l[act])
        local_score = _gdot(self.phi_l[act], elog_l[:, None] + self.lb_l[act], axis=-1)
        ct = self.counts[act] * self.tau[act]
        cluster_logit = (
            _safe_log(self.params.pi)[None]
            + _dir_ep(self.params.local_priors[None], elog_l)
            + (ct[:, :, None] * local_score).sum(axis=1)
        )
        self.zeta[act] = log_normalize(cluster_logit, axis=-1)

    def update(self, block, act):
        """Apply one named closed-form block update to the ``act`` rows."""
        if block not in E_STEP_BLOCKS:
            raise ValueError(f"unknown coordinate block {block!r}")
        getattr(self, "_update_" + block)(act)

    def sweep(self, act):
        """One coordinate pass over the documents indexed by ``act``."""
        for block in E_STEP_BLOCKS:
            getattr(self, "_update_" + block)(act)

    def bound_terms(self, act):
        """Per-document bound split into the nine term groups, (n, 9)."""
        params = self.params
        c = self.counts[act]
        zeta = self.zeta[act]
        tau = self.tau[act]
        lam = self.lam[act]
        mu_l = self.mu_l[act]
        mu_g = self.mu_g[act]
        phi_l = self.phi_l[act]
        phi_g = self.phi_g[act]
        k_dim = params.local_topics_per_cluster

        elog_l = _elog_dir(mu_l)
        elog_g = _elog_dir(mu_g)
        elog_w = _elog_dir(lam)

        t_cluster = _gdot(zeta, _safe_log(params.pi)[None], axis=-1)
        t_coin = _dir_ep(params.gamma[None], elog_w)
        t_local_prop = (zeta * _dir_ep(params.local_priors[None], elog_l)).sum(
            axis=-1
        ) + (1.0 - zeta).sum(axis=-1) * gammaln(k_dim)
        t_global_prop = _dir_ep(params.global_prior[None], elog_g)
        t_pathway = (
            c * (tau * elog_w[:, :1] + (1.0 - tau) * elog_w[:, 1:])
        ).sum(axis=-1)

        scale = zeta[:, None, :] * tau[:, :, None]
        phi_elog = (phi_l * elog_l[:, None]).sum(axis=-1)
        t_local_z = (
            c[:, :, None] * (scale * phi_elog - (1.0 - scale) * self.log_k)
        ).sum(axis=(1, 2))
        t_global_z = (
            c
            * (
                (1.0 - tau) * (phi_g * elog_g[:, None]).sum(axis=-1)
                - tau * self.log_r
            )
        ).sum(axis=-1)

        em_l = _gdot(phi_l, self.lb_l[act], axis=-1)
        em_l = _scale0(tau, _gdot(zeta[:, None, :], em_l, axis=-1))
        em_g = _scale0(1.0 - tau, _gdot(phi_g, self.lb_g[act], axis=-1))
        t_emission = (c * (em_l + em_g)).sum(axis=-1)

        t_entropy = (
            -xlogy(zeta, zeta).sum(axis=-1)
            - _dir_ep(lam, elog_w)
            - _dir_ep(mu_l, elog_l).sum(axis=-1)
            - _dir_ep(mu_g, elog_g)
            - (c * (xlogy(tau, tau) + xlogy(1.0 - tau, 1.0 - tau))).sum(axis=-1)
            - (c[:, :, None, None] * xlogy(phi_l, phi_l)).sum(axis=(1, 2, 3))
            - (c[:, :, None] * xlogy(phi_g, phi_g)).sum(axis=(1, 2))
        )
        return np.stack(
            [
                t_cluster,
                t_coin,
                t_local_prop,
                t_global_prop,
                t_pathway,
                t_local_z,
                t_global_z,
                t_emission,
                t_entropy,
            ],
            axis=1,
        )

    def bound(self, act):
        return self.bound_terms(act).sum(axis=1)

    def run(self, sweeps, rel_tol=DOC_SWEEP_REL_TOL):
        """Coordinate sweeps with per-document early exit.

        A document stops once a sweep improves its bound by less than
        ``rel_tol`` relative. Returns per-document sweep counts.
        """
        n = self.counts.shape[0]
        act = np.arange(n)
        prev = self.bound(act)
        ran = np.zeros(n, dtype=np.int64)
        for _ in range(sweeps):
            self.sweep(act)
            ran[act] += 1
            val = self.bound(act)
            keep = val - prev[act] >= rel_tol * np.maximum(1.0, np.abs(prev[act]))
            prev[act] = val
            act = act[keep]
            if act.size == 0:
                break
        return ran

    def writeback(self, states):
        for i, (doc, state) in enumerate(zip(self.docs, states)):
            m = doc.word_ids.size
            state.zeta = self.zeta[i].copy()
            state.lam = self.lam[i].copy()
            state.mu_local = self.mu_l[i].copy()
            state.mu_global = self.mu_g[i].copy()
            state.tau = self.tau[i, :m].copy()
            state.phi_local = self.phi_l[i, :m].copy()
            state.phi_global = self.phi_g[i, :m].copy()
            state.validate()


def _max_terms(corpus):
    return max(doc.word_ids.size for doc in corpus.docs)


def _doc_elbo_terms(params, doc, state):
    batch = _make_doc_batch(params, doc, state)
    return batch.bound_terms(np.array([0]))[0]


def _make_doc_batch(params, doc, state):
    lb_l_all = _safe_log(params.local_topics)
    lb_g_all = _safe_log(params.global_topics)
    return _Batch(params, [doc], [state], doc.word_ids.size, lb_l_all, lb_g_all)


def doc_elbo(params, doc, state):
    """Evidence lower bound contribution of one document."""
    return float(_doc_elbo_terms(params, doc, state).sum())


def _iter_batches(corpus):
    m_max = _max_terms(corpus)
    for lo in range(0, corpus.num_docs, BATCH_DOCS):
        hi = min(lo + BATCH_DOCS, corpus.num_docs)
        yield lo, hi, m_max


def elbo(params, states, corpus):
    """Evidence lower bound of the whole corpus under the current states."""
    lb_l_all = _safe_log(params.local_topics)
    lb_g_all = _safe_log(params.global_topics)
    total = 0.0
    for lo, hi, m_max in _iter_batches(corpus):
        batch = _Batch(
            params, corpus.docs[lo:hi], states[lo:hi], m_max, lb_l_all, lb_g_all
        )
        total += float(batch.bound(np.arange(hi - lo)).sum())
    return total


def elbo_breakdown(params, states, corpus):
    """Corpus bound split by term group; keys name what each group scores."""
    lb_l_all = _safe_log(params.local_topics)
    lb_g_all = _safe_log(params.global_topics)
    acc = np.zeros(len(ELBO_TERM_NAMES))
    for lo, hi, m_max in _iter_batches(corpus):
        batch = _Batch(
            params, corpus.docs[lo:hi], states[lo:hi], m_max, lb_l_all, lb_g_all
        )
        acc += batch.bound_terms(np.arange(hi - lo)).sum(axis=0)
    return dict(zip(ELBO_TERM_NAMES, acc.tolist()))


def e_step_doc(params, doc, state, sweeps, rel_tol=DOC_SWEEP_REL_TOL):
    """Run up to ``sweeps`` coordinate passes on one document, in place.

    Stops early once a pass improves the document's bound by less than
    ``rel_tol`` relative. Returns the number of passes run.
    """
    batch = _make_doc_batch(params, doc, state)
    ran = batch.run(sweeps, rel_tol=rel_tol)
    batch.writeback([state])
    return int(ran[0])


def update_block(params, doc, state, block):
    """Apply a single named coordinate update to one document, in place.

    ``block`` is one of E_STEP_BLOCKS. A full sweep applies all blocks in
    that order; this entry point exists so each closed-form update can be
    exercised (and checked for per-block bound improvement) in isolation.
    """
    batch = _make_doc_batch(params, doc, state)
    batch.update(block, np.arange(1))
    batch.writeback([state])
    return state


def _run_e_step(params, states, corpus, sweeps, threads):
    lb_l_all = _safe_log(params.local_topics)
    lb_g_all = _safe_log(params.global_topics)
    blocks = list(_iter_batches(corpus))

    def work(block):
        lo, hi, m_max = block
        batch = _Batch(
            params, corpus.docs[lo:hi], states[lo:hi], m_max, lb_l_all, lb_g_all
        )
        batch.run(sweeps)
        batch.writeback(states[lo:hi])

    if threads is not None and threads > 1:
        # Batch boundaries are fixed and every batch touches a disjoint
        # slice of states, so results are worker-count independent.
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, blocks))
    else:
        for block in blocks:
            work(block)


def infer_doc_states(params, corpus, sweeps=50, threads=None):
    """Posterior inference for new documents under fixed parameters.

    Starts every document from the symmetric state (uniform cluster
    responsibilities included, so the result is deterministic) and runs
    coordinate sweeps until the per-document bound stalls.

    Returns a list of DocVariational, one per document.
    """
    j_dim = params.num_clusters
    k_dim = params.local_topics_per_cluster
    r_dim = params.num_global_topics
    states = []
    for doc in corpus.docs:
        m = doc.word_ids.size
        states.append(
            DocVariational(
                zeta=np.full(j_dim, 1.0 / j_dim),
                lam=np.ones(2),
                mu_local=np.ones((j_dim, k_dim)),
                mu_global=np.ones(r_dim),
                tau=np.full(m, 0.5),
                phi_local=np.full((m, j_dim, k_dim), 1.0 / k_dim),
                phi_global=np.full((m, r_dim), 1.0 / r_dim),
            )
        )
    _run_e_step(params, states, corpus, sweeps, threads)
    return states


def m_step(params, states, corpus, config):
    """Re-estimate global parameters from the per-document expectations."""
    j_dim = params.num_clusters
    k_dim = params.local_topics_per_cluster
    r_dim = params.num_global_topics
    v_dim = params.vocab_size
    num_docs = corpus.num_docs

    zeta_mat = np.stack([s.zeta for s in states])
    occupancy = zeta_mat.sum(axis=0)
    pi = occupancy / num_docs

    beta_l = np.zeros((j_dim, k_dim, v_dim))
    beta_g = np.zeros((r_dim, v_dim))
    for doc, state in zip(corpus.docs, states):
        c = doc.counts.astype(float)
        ct = c * state.tau
        local_w = (ct[:, None, None] * state.phi_local).transpose(1, 2, 0)
        beta_l[:, :, doc.word_ids] += state.zeta[:, None, None] * local_w
        beta_g[:, doc.word_ids] += ((c * (1.0 - state.tau))[:, None] * state.phi_global).T

    beta_l += TOPIC_SMOOTHING
    beta_l /= beta_l.sum(axis=-1, keepdims=True)
    beta_g += TOPIC_SMOOTHING
    beta_g /= beta_g.sum(axis=-1, keepdims=True)

    empty = occupancy < EMPTY_CLUSTER_EPS
    if np.any(empty):
        logger.warning(
            "clusters %s have near-zero responsibility; freezing their topics",
            np.flatnonzero(empty).tolist(),
        )
        beta_l[empty] = params.local_topics[empty]

    local_priors = params.local_priors.copy()
    global_prior = params.global_prior.copy()
    gamma = params.gamma.copy()
    if config.prior_update == "every_iter":
        elog_l_docs = _elog_dir(np.stack([s.mu_local for s in states]))
        elog_g_docs = _elog_dir(np.stack([s.mu_global for s in states]))
        elog_w_docs = _elog_dir(np.stack([s.lam for s in states]))
        for j in range(j_dim):
            if empty[j]:
                continue
            weights = zeta_mat[:, j]
            mean_log = (weights[:, None] * elog_l_docs[:, j, :]).sum(
                axis=0
            ) / occupancy[j]
            stats = DirichletStats(mean_log=mean_log, num_obs=float(occupancy[j]))
            local_priors[j] = dirichlet_mle(stats, init=params.local_priors[j])
        global_prior = dirichlet_mle(
            DirichletStats(mean_log=elog_g_docs.mean(axis=0), num_obs=float(num_docs)),
            init=params.global_prior,
        )
        gamma = dirichlet_mle(
            DirichletStats(mean_log=elog_w_docs.mean(axis=0), num_obs=float(num_docs)),
            init=params.gamma,
        )

    return ModelParams(
        pi=pi,
        gamma=gamma,
        local_priors=local_priors,
        global_prior=global_prior,
        local_topics=beta_l,
        global_topics=beta_g,
    )


def _copy_params(params):
    return ModelParams(
        pi=params.pi.copy(),
        gamma=params.gamma.copy(),
        local_priors=params.local_priors.copy(),
        global_prior=params.global_prior.copy(),
        local_topics=params.local_topics.copy(),
        global_topics=params.global_topics.copy(),
    )


def _check_initial(params, states, corpus, config):
    params.validate()
    if params.num_clusters != config.num_clusters:
        raise DegenerateInputError("initial params disagree with config shape")
    if params.vocab_size != corpus.vocab_size:
        raise DegenerateInputError("initial params disagree with corpus vocabulary")
    if len(states) != corpus.num_docs:
        raise DegenerateInputError("need one variational state per document")
    for doc, state in zip(corpus.docs, states):
        if state.tau.shape[0] != doc.word_ids.size:
            raise DegenerateInputError("variational state does not match document")
        state.validate()


def fit(config, corpus, init_labels=None, initial=None, threads=None):
    """Fit the model by variational EM.

    Args:
        config: HyperConfig with shapes and schedule.
        corpus: training Corpus.
        init_labels: cluster labels consumed when config.init_scheme is
            "from_labels" (array or ClusterLabels).
        initial: optional (ModelParams, list[DocVariational]) starting
            point; copied, the caller's objects are not mutated.
        threads: worker threads for the per-document E-step; results are
            identical for any value.

    Returns:
        (ModelParams, list[DocVariational], FitReport). The report's
        elbo_trace holds the initial bound followed by one value per EM
        iteration; a bound decrease beyond float slack raises
        NumericalError with a per-term breakdown attached.
    """
    from .model import init_model

    start = time.perf_counter()
    if corpus.num_docs < 1:
        raise DegenerateInputError("cannot fit an empty corpus")
    if initial is not None:
        params, states = initial
        params = _copy_params(params)
        states = [s.copy() for s in states]
        _check_initial(params, states, corpus, config)
    else:
        params, states = init_model(config, corpus, init_labels)

    trace = [elbo(params, states, corpus)]
    converged = False
    iterations = 0
    for _ in range(config.max_em_iters):
        _run_e_step(params, states, corpus, config.e_step_iters, threads)
        params = m_step(params, states, corpus, config)
        params.validate()
        iterations += 1
        value = elbo(params, states, corpus)
        prev = trace[-1]
        trace.append(value)
        slack = DECREASE_SLACK * max(1.0, abs(prev))
        if value < prev - slack:
            raise NumericalError(
                f"bound decreased from {prev:.10g} to {value:.10g} "
                f"at iteration {iterations}",
                details={
                    "iteration": iterations,
                    "previous": prev,
                    "current": value,
                    "breakdown": elbo_breakdown(params, states, corpus),
                    "trace": list(trace),
                },
            )
        if config.elbo_rel_tol > 0 and value - prev < config.elbo_rel_tol * max(
            1.0, abs(prev)
        ):
            converged = True
            break

    report = FitReport(
        elbo_trace=trace,
        iterations_run=iterations,
        converged=converged,
        wall_time=time.perf_counter() - start,
    )
    return params, states, report
