import numpy as np
import pytest
import scipy.sparse as sp

from mrgrank.graph import (AffinityBlocks, HeterogeneousGraph, Item,
                           PriorVector, SolverConfig, assemble, default_alpha)


def toy_graph(affinity, priors, cfg=None, alpha_pp=1.0) -> HeterogeneousGraph:
    """Single-kind graph: every item is a post, affinity goes in the
    post-post block with mixing weight alpha_pp."""
    affinity = np.asarray(affinity, dtype=float)
    n = affinity.shape[0]
    priors = np.asarray(priors, dtype=float)
    priors = priors / priors.sum()
    items = [Item(id="n%d" % i, kind="post", label="n%d" % i, payload={})
             for i in range(n)]
    slices = {"post": slice(0, n), "user": slice(n, n), "hashtag": slice(n, n)}
    alpha = default_alpha()
    alpha[("post", "post")] = alpha_pp
    blocks = AffinityBlocks(
        blocks={("post", "post"): sp.csr_matrix(affinity)}, alpha=alpha)
    pv = PriorVector(w=priors, kind_slices=slices)
    return assemble(blocks, pv, cfg or SolverConfig(), items)


@pytest.fixture(scope="session")
def small_corpus():
    from mrgrank.synth import generate_corpus
    posts, users, planted = generate_corpus(
        n_posts=60, n_users=15, n_hashtags=12, n_planted=3, seed=3)
    return posts, users, planted


@pytest.fixture(scope="session")
def small_session(small_corpus):
    from mrgrank.session import Session
    posts, users, _ = small_corpus
    s = Session(posts, users, SolverConfig(walks_per_node=300, rng_seed=11))
    s.solve("mc")
    return s
