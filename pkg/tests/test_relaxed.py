import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from coherence_proj import generators as G
from coherence_proj.coherence import InvarianceMap, delta_coh
from coherence_proj.errors import ConfigError
from coherence_proj.instances import random_dist, random_involution, random_rows, rng_for
from coherence_proj.projection import improvement
from coherence_proj.relaxed import (SoftDivergenceSpec, expected_soft_divergence, penalized_project,
                                    relaxed_improvement_floor, relaxed_objective, relaxed_project,
                                    soft_divergence)

from strategies import seeds, simplex_points

E1, E2 = np.array([1.0, 0.0]), np.array([0.0, 1.0])


@pytest.mark.parametrize("kind, expected", [
    ("hellinger", 1.0),
    ("squared_euclidean", 1.0),
    ("tv", 1.0),
    ("js", math.log(2)),
])
def test_soft_divergence_at_disjoint_points(kind, expected):
    assert soft_divergence(SoftDivergenceSpec(kind), E1, E2) == pytest.approx(expected, abs=1e-15)


def test_symmetrised_kl_hand_value():
    p, q = np.array([0.5, 0.5]), np.array([0.25, 0.75])
    expected = 0.25 * math.log(2) - 0.25 * math.log(2 / 3)
    assert soft_divergence(SoftDivergenceSpec("kl_sym"), p, q) == pytest.approx(expected, abs=1e-15)


def test_declared_constants():
    assert SoftDivergenceSpec("hellinger").mu_D == 0.25
    assert SoftDivergenceSpec("kl_sym").norm_tag == "L1"
    assert SoftDivergenceSpec("squared_euclidean").norm_tag == "L2"
    with pytest.raises(ValueError):
        SoftDivergenceSpec("wasserstein")


@given(p=simplex_points(3), q=simplex_points(3),
       kind=st.sampled_from(["kl_sym", "js", "hellinger", "squared_euclidean", "tv"]))
def test_strong_convexity_lower_bound(p, q, kind):
    spec = SoftDivergenceSpec(kind)
    diff = p - q
    norm_sq = np.abs(diff).sum() ** 2 if spec.norm_tag == "L1" else float(diff @ diff)
    assert soft_divergence(spec, p, q) >= 0.5 * spec.mu_D * norm_sq - 1e-12
    assert soft_divergence(spec, p, q) == pytest.approx(soft_divergence(spec, q, p), abs=1e-14)


def test_improvement_floor_hand_value():
    # (1/2) * (sqrt(0.09) - sqrt(0.02 / (2 * 0.25)))^2 = (1/2) * (0.3 - 0.2)^2
    assert relaxed_improvement_floor(1.0, 0.25, 0.02, 0.09) == pytest.approx(0.005, abs=1e-15)
    assert relaxed_improvement_floor(1.0, 0.25, 1.0, 0.09) == 0.0


def test_norm_mismatch_is_a_config_error():
    phi = InvarianceMap((1, 0))
    t = np.array([[0.6, 0.4], [0.3, 0.7]])
    with pytest.raises(ConfigError) as info:
        relaxed_project(G.squared_euclidean(), SoftDivergenceSpec("hellinger"), 0.01, [0.5, 0.5], phi, t)
    assert info.value.path == "$.soft"


def pairwise_closed_form(w, phi, t, lam):
    """Squared-Euclidean generator and soft divergence: one 2x2 solve per pair and coordinate."""
    out = t.copy()
    for a in range(phi.n):
        b = phi.perm[a]
        if a < b:
            W = w[a] + w[b]
            M = np.array([[w[a] + lam * W, -lam * W], [-lam * W, w[b] + lam * W]])
            sol = np.linalg.solve(M, np.vstack([w[a] * t[a], w[b] * t[b]]))
            out[a], out[b] = sol
    return out


@given(seed=seeds, n=st.integers(2, 6), d=st.integers(2, 4), lam=st.floats(0.01, 50.0))
def test_penalized_matches_closed_form(seed, n, d, lam):
    rng = rng_for(seed, 30)
    phi = random_involution(rng, n)
    w = random_dist(rng, n)
    t = random_rows(rng, n, d)
    spec = SoftDivergenceSpec("squared_euclidean")
    got, _ = penalized_project(G.squared_euclidean(), spec, lam, w, phi, t)
    assert np.max(np.abs(got - pairwise_closed_form(w, phi, t, lam))) <= 1e-8


@given(seed=seeds, lams=st.lists(st.floats(0.01, 20.0), min_size=2, max_size=2, unique=True))
def test_soft_incoherence_decreases_with_penalty(seed, lams):
    rng = rng_for(seed, 31)
    n, d = 4, 3
    phi = InvarianceMap((1, 0, 3, 2))
    w = random_dist(rng, n)
    t = random_rows(rng, n, d)
    spec = SoftDivergenceSpec("hellinger")
    lo, hi = sorted(lams)
    a, _ = penalized_project(G.negative_entropy(), spec, lo, w, phi, t)
    b, _ = penalized_project(G.negative_entropy(), spec, hi, w, phi, t)
    assert expected_soft_divergence(spec, w, phi, b) <= expected_soft_divergence(spec, w, phi, a) + 1e-10
    assert relaxed_objective(G.negative_entropy(), w, b, t) >= relaxed_objective(G.negative_entropy(), w, a, t) - 1e-10


@given(seed=seeds, frac=st.floats(0.05, 0.9))
def test_constrained_form_meets_cap_and_floor(seed, frac):
    rng = rng_for(seed, 32)
    n, d = 4, 3
    phi = InvarianceMap((1, 0, 3, 2))
    w = random_dist(rng, n, invariant_under=phi)
    t = random_rows(rng, n, d)
    spec = SoftDivergenceSpec("squared_euclidean")
    gen = G.squared_euclidean()
    cap = frac * expected_soft_divergence(spec, w, phi, t)
    pi, lam, _ = relaxed_project(gen, spec, cap, w, phi, t)
    assert lam > 0
    assert expected_soft_divergence(spec, w, phi, pi) <= cap + 1e-9
    assert expected_soft_divergence(spec, w, phi, pi) == pytest.approx(cap, rel=1e-6)
    # every coherent row-stochastic pi* improves by at least the floor
    floor = relaxed_improvement_floor(gen.mu, spec.mu_D, cap, delta_coh(w, t, phi))
    star = random_rows(rng, n, d)
    star[1], star[3] = star[0], star[2]
    assert improvement(gen, w, star, t, pi) >= floor - 1e-9


def test_loose_cap_returns_baseline():
    phi = InvarianceMap((1, 0))
    t = np.array([[0.6, 0.4], [0.3, 0.7]])
    pi, lam, rep = relaxed_project(G.negative_entropy(), SoftDivergenceSpec("hellinger"), 10.0,
                                   [0.5, 0.5], phi, t)
    assert lam == 0.0 and np.array_equal(pi, t)
