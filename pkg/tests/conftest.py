import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from mgctm.model import HyperConfig, ModelParams, sample_corpus

settings.register_profile(
    "mgctm",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("mgctm")


def block_structured_params(leak=0.03):
    """Well-separated three-cluster model over fifty words.

    Each cluster owns three local topics concentrated on disjoint
    four-word bands; two shared topics sit on the remaining words and
    partially overlap the last band. ``leak`` spreads a little mass
    everywhere so every word stays reachable from every topic.
    """
    num_v = 50
    local = np.zeros((3, 3, num_v))
    profile = np.array([0.4, 0.3, 0.2, 0.1])
    for j in range(3):
        for k in range(3):
            lo = (j * 3 + k) * 4
            row = np.full(num_v, leak / num_v)
            row[lo:lo + 4] += (1 - leak) * profile
            local[j, k] = row
    shared = np.zeros((2, num_v))
    for r in range(2):
        lo = 36 + r * 7
        row = np.full(num_v, leak / num_v)
        row[lo:lo + 7] += (1 - leak) / 7
        shared[r] = row
    return ModelParams(
        pi=np.full(3, 1.0 / 3.0),
        gamma=np.array([6.0, 2.0]),
        local_priors=np.full((3, 3), 8.0),
        global_prior=np.full(2, 0.5),
        local_topics=local,
        global_topics=shared,
    )


RECOVERY_CONFIG = HyperConfig(
    num_clusters=3,
    local_topics_per_cluster=3,
    num_global_topics=2,
    max_em_iters=100,
    e_step_iters=1,
    elbo_rel_tol=1e-5,
    seed=0,
    prior_update="fixed",
)


@pytest.fixture(scope="session")
def recovery_params():
    return block_structured_params()


@pytest.fixture(scope="session")
def recovery_corpus(recovery_params):
    """300 hundred-word documents sampled from the separated model."""
    corpus, _ = sample_corpus(recovery_params, num_docs=300, doc_length=100, seed=7)
    return corpus
