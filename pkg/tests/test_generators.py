import numpy as np
import pytest
from hypothesis import given, strategies as st

from coherence_proj import generators as G
from coherence_proj.errors import DomainError, SingularMatrix

from strategies import generators, positive_vectors


def test_canonical_kind_accepts_aliases():
    assert G.canonical_kind("Negative-Entropy") == G.NEGATIVE_ENTROPY
    assert G.canonical_kind("squared_euclidean") == G.SQUARED_EUCLIDEAN
    with pytest.raises(ValueError):
        G.canonical_kind("banana")


def test_values_at_known_points():
    p = np.array([0.25, 0.75])
    assert G.value(G.squared_euclidean(), p) == pytest.approx(0.3125, abs=1e-15)
    assert G.value(G.negative_entropy(), p) == pytest.approx(
        0.25 * np.log(0.25) + 0.75 * np.log(0.75), abs=1e-15)
    assert G.value(G.negative_log(), p) == pytest.approx(-np.log(0.25) - np.log(0.75), abs=1e-15)
    A = np.array([[2.0, 1.0], [1.0, 3.0]])
    # 0.5 * (2/16 + 2*3/16 + 27/16) = 35/32
    assert G.value(G.mahalanobis(A), p) == pytest.approx(35 / 32, abs=1e-15)


def test_entropy_value_allows_boundary():
    assert G.value(G.negative_entropy(), [0.0, 1.0]) == 0.0
    with pytest.raises(DomainError):
        G.gradient(G.negative_entropy(), [0.0, 1.0])
    with pytest.raises(DomainError):
        G.value(G.negative_log(), [0.0, 1.0])


def test_mahalanobis_rejects_indefinite():
    with pytest.raises((ValueError, SingularMatrix)):
        G.mahalanobis(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_psd_coupled_is_not_legendre():
    gen = G.quadratic_coupled(np.array([[1.0, 1.0], [1.0, 1.0]]))
    assert not G.is_legendre(gen)
    with pytest.raises(SingularMatrix):
        G.dual_map_inverse(gen, np.zeros(2))


def test_spec_round_trip():
    for gen in (G.negative_entropy(), G.mahalanobis(np.diag([1.0, 2.0])),
                G.diagonal_quadratic([1.0, 4.0]), G.quadratic_coupled(np.eye(2), [0.5, 0.0])):
        back = G.GeneratorSpec.from_dict(gen.to_dict())
        assert back.to_dict() == gen.to_dict()


def test_declared_constants():
    assert G.negative_entropy().mu == 1.0 and G.negative_entropy().norm_tag == "L1"
    assert G.squared_euclidean().mu == 1.0
    lo, hi = G.eigen_range(G.mahalanobis(np.diag([0.5, 4.0])))
    assert (lo, hi) == pytest.approx((0.5, 4.0))


@given(gen=generators(3), p=positive_vectors(3, 0.1, 1.0))
def test_gradient_matches_finite_differences(gen, p):
    h = 1e-6
    fd = np.array([(G.value(gen, p + h * e) - G.value(gen, p - h * e)) / (2 * h) for e in np.eye(3)])
    g = G.gradient(gen, p)
    assert np.max(np.abs(fd - g)) <= 1e-5 * max(1.0, np.max(np.abs(g)))


@given(gen=generators(3), p=positive_vectors(3, 0.1, 1.0))
def test_dual_map_inverts_gradient(gen, p):
    assert np.allclose(G.dual_map_inverse(gen, G.gradient(gen, p)), p, rtol=1e-10, atol=1e-12)


@given(gen=generators(3), p=positive_vectors(3, 0.1, 1.0))
def test_fenchel_young_equality(gen, p):
    u = G.gradient(gen, p)
    lhs = G.value(gen, p) + G.conjugate_value(gen, u)
    assert lhs == pytest.approx(float(p @ u), abs=1e-10 * max(1.0, abs(lhs)))
    assert G.conjugate_at_primal(gen, p) == pytest.approx(G.conjugate_value(gen, u), abs=1e-10,
                                                          rel=1e-10)


@given(gen=generators(3), p=positive_vectors(3, 0.1, 1.0), q=positive_vectors(3, 0.1, 1.0),
       t=st.floats(0.0, 1.0))
def test_convexity_along_segments(gen, p, q, t):
    mid = G.value(gen, t * p + (1 - t) * q)
    assert mid <= t * G.value(gen, p) + (1 - t) * G.value(gen, q) + 1e-12


@given(p=positive_vectors(4, 0.1, 1.0))
def test_separable_hessian_diagonal(p):
    for gen in (G.negative_entropy(), G.negative_log(), G.squared_euclidean()):
        assert np.allclose(np.diag(G.hessian(gen, p)), G.hessian_diag(gen, p))
