import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from coherence_proj import generators as G
from coherence_proj.bregman import (centroid, centroid_decomposition, divergence, duality_residual,
                                    expected_divergence, fenchel_bregman_gap, three_point_residual)
from coherence_proj.convex_sets import ConvexModelSet
from coherence_proj.errors import DomainError

from strategies import generators, positive_vectors, simplex_points


def test_kl_on_simplex_matches_hand_value():
    # 0.5 ln 2 + 0.5 ln(2/3) = 0.5 ln(4/3)
    got = divergence(G.negative_entropy(), [0.5, 0.5], [0.25, 0.75])
    assert got == pytest.approx(0.5 * math.log(4 / 3), abs=1e-15)


def test_itakura_saito_hand_value():
    assert divergence(G.negative_log(), [2.0], [1.0]) == pytest.approx(1 - math.log(2), abs=1e-15)


def test_mahalanobis_hand_value():
    A = np.array([[2.0, 1.0], [1.0, 3.0]])
    # d = (1, -1): 0.5 * (2 - 2 + 3) = 1.5
    assert divergence(G.mahalanobis(A), [1.0, 0.0], [0.0, 1.0]) == pytest.approx(1.5)


def test_entropy_zero_support_rules():
    assert divergence(G.negative_entropy(), [0.0, 1.0], [0.0, 1.0]) == 0.0
    assert divergence(G.negative_entropy(), [0.5, 0.5], [0.0, 1.0]) == math.inf
    with pytest.raises(DomainError):
        divergence(G.negative_entropy(), [-0.1, 1.1], [0.5, 0.5])


def test_expected_divergence_weights_rows():
    gen = G.squared_euclidean()
    a = np.array([[1.0, 0.0], [0.0, 1.0]])
    b = np.array([[0.0, 1.0], [0.0, 1.0]])
    assert expected_divergence(gen, [0.25, 0.75], a, b) == pytest.approx(0.25)


def test_entropy_centroid_is_geometric_mean():
    out = centroid(G.negative_entropy(), [0.5, 0.5], [[0.2, 0.8], [0.8, 0.2]])
    assert np.allclose(out, [0.4, 0.4], atol=1e-15)


def test_negative_log_centroid_is_harmonic_mean():
    out = centroid(G.negative_log(), [0.5, 0.5], [[0.1], [0.8]])
    assert out[0] == pytest.approx(8 / 45, abs=1e-15)


@given(gen=generators(3), p=positive_vectors(3, 0.1, 1.0), q=positive_vectors(3, 0.1, 1.0))
def test_divergence_nonnegative_and_zero_on_diagonal(gen, p, q):
    assert divergence(gen, p, q) >= -1e-14
    assert abs(divergence(gen, p, p)) <= 1e-14


@given(gen=generators(3), p=positive_vectors(3, 0.1, 1.0), q=positive_vectors(3, 0.1, 1.0))
def test_divergence_matches_definition(gen, p, q):
    raw = G.value(gen, p) - G.value(gen, q) - float(G.gradient(gen, q) @ (p - q))
    assert divergence(gen, p, q) == pytest.approx(raw, abs=1e-10)


@given(gen=generators(3), p=positive_vectors(3, 0.1, 1.0), r=positive_vectors(3, 0.1, 1.0),
       q=positive_vectors(3, 0.1, 1.0))
def test_three_point_identity(gen, p, r, q):
    assert abs(three_point_residual(gen, p, r, q)) <= 1e-10


@given(gen=generators(3), p=positive_vectors(3, 0.1, 1.0), q=positive_vectors(3, 0.1, 1.0))
def test_duality(gen, p, q):
    assert duality_residual(gen, p, q) <= 1e-10


@given(gen=generators(3), u=positive_vectors(3, 0.1, 1.0), v=positive_vectors(3, 0.1, 1.0),
       w=positive_vectors(3, 0.1, 1.0))
def test_fenchel_bregman_gap_nonnegative(gen, u, v, w):
    alpha = G.gradient(gen, w)
    assert fenchel_bregman_gap(gen, u, v, alpha) >= -1e-10


@given(gen=generators(2), pts=st.lists(positive_vectors(2, 0.1, 1.0), min_size=2, max_size=4),
       data=st.data())
def test_centroid_minimises_weighted_divergence(gen, pts, data):
    raw = np.array(data.draw(st.lists(st.floats(0.05, 1.0), min_size=len(pts), max_size=len(pts))))
    lam = raw / raw.sum()
    lam[-1] = 1.0 - lam[:-1].sum()
    pts = np.array(pts)
    c = centroid(gen, lam, pts)

    def obj(p):
        return sum(lam[i] * divergence(gen, p, pts[i]) for i in range(len(pts)))

    base = obj(c)
    for step in (1e-3, -1e-3):
        for e in np.eye(2):
            probe = c + step * e
            if G.in_domain(gen, probe, interior=True):
                assert obj(probe) >= base - 1e-12


@given(pts=st.lists(simplex_points(3), min_size=2, max_size=3))
def test_centroid_decomposition_on_simplex(pts):
    lam = np.full(len(pts), 1.0 / len(pts))
    s = ConvexModelSet(1, 3)
    c, projected, value = centroid_decomposition(G.negative_entropy(), lam, np.array(pts), s)
    assert abs(projected.sum() - 1.0) <= 1e-9
    # KL projection of a positive vector onto the simplex is its normalisation
    assert np.allclose(projected, c / c.sum(), atol=1e-8)
    assert value >= 0
