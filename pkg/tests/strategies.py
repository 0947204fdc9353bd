"""Shared hypothesis strategies."""

import numpy as np
from hypothesis import strategies as st

from coherence_proj import generators as G


def positive_vectors(d, lo=0.05, hi=2.0):
    return st.lists(st.floats(lo, hi), min_size=d, max_size=d).map(np.array)


@st.composite
def simplex_points(draw, d, floor=0.02):
    raw = np.array(draw(st.lists(st.floats(0.01, 1.0), min_size=d, max_size=d)))
    p = raw / raw.sum()
    return (1 - floor * d) * p + floor


@st.composite
def spd_matrices(draw, d, cond=20.0):
    seed = draw(st.integers(0, 2 ** 32 - 1))
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.normal(size=(d, d)))
    eig = np.exp(rng.uniform(0.0, np.log(cond), d))
    return (q * eig) @ q.T


@st.composite
def generators(draw, d, kinds=G.KINDS):
    kind = draw(st.sampled_from(kinds))
    if kind == G.SQUARED_EUCLIDEAN:
        return G.squared_euclidean()
    if kind == G.NEGATIVE_ENTROPY:
        return G.negative_entropy()
    if kind == G.NEGATIVE_LOG:
        return G.negative_log()
    if kind == G.DIAGONAL_QUADRATIC:
        return G.diagonal_quadratic(draw(positive_vectors(d, 0.5, 3.0)))
    if kind == G.MAHALANOBIS:
        return G.mahalanobis(draw(spd_matrices(d)))
    return G.quadratic_coupled(draw(spd_matrices(d)))


seeds = st.integers(0, 2 ** 31 - 1)
