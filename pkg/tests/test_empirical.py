import numpy as np
import pytest
from hypothesis import given, strategies as st

from coherence_proj import generators as G
from coherence_proj.bregman import expected_divergence
from coherence_proj.coherence import InvarianceMap
from coherence_proj.convex_sets import ConvexModelSet
from coherence_proj.empirical import (PromptSample, empirical_bound_report, empirical_projection,
                                      epsilon_m, epsilon_m_grid, epsilon_m_upper, panel_members,
                                      sample_prompts, unsampled_prompts)
from coherence_proj.projection import bregman_project

from strategies import seeds

DIST = np.array([0.4, 0.3, 0.2, 0.1])
PHI = InvarianceMap((1, 0, 3, 2))
PI0 = np.array([[0.6, 0.3, 0.1], [0.2, 0.5, 0.3], [0.3, 0.3, 0.4], [0.5, 0.25, 0.25]])
SET = ConvexModelSet(4, 3, caps=((2, 2, 0.3),))


def test_sampling_is_deterministic():
    a = sample_prompts(DIST, 50, 7)
    b = sample_prompts(DIST, 50, 7)
    assert a.indices == b.indices
    assert sample_prompts(DIST, 50, 8).indices != a.indices
    assert np.allclose(a.weights, np.bincount(a.indices, minlength=4) / 50)


def test_sample_size_must_be_positive():
    with pytest.raises(ValueError):
        sample_prompts(DIST, 0, 1)


def test_exact_frequencies_reproduce_population_projection():
    sample = PromptSample.from_counts([4, 3, 2, 1])
    pop, _ = bregman_project(G.squared_euclidean(), DIST, SET.with_coherence(PHI), PI0)
    emp, _ = empirical_projection(G.squared_euclidean(), sample, PHI, SET, PI0, dist=DIST)
    assert np.max(np.abs(pop - emp)) <= 1e-9
    assert epsilon_m_upper(G.squared_euclidean(), DIST, sample, SET, PHI, PI0) == pytest.approx(0, abs=1e-15)


def test_unsampled_orbit_gets_population_rows():
    # no affine rows, so the population projection separates over orbits
    sample = PromptSample.from_counts([3, 1, 0, 0])
    assert unsampled_prompts(sample, SET, PHI).tolist() == [False, False, True, True]
    pop, _ = bregman_project(G.negative_entropy(), DIST, SET.with_coherence(PHI), PI0)
    emp, _ = empirical_projection(G.negative_entropy(), sample, PHI, SET, PI0, dist=DIST)
    assert np.max(np.abs(emp[2:] - pop[2:])) <= 1e-8


@given(seed=seeds, m=st.integers(5, 200))
def test_optimality_invariants(seed, m):
    gen = G.squared_euclidean()
    sample = sample_prompts(DIST, m, seed)
    coh = SET.with_coherence(PHI)
    pop, _ = bregman_project(gen, DIST, coh, PI0)
    emp, _ = empirical_projection(gen, sample, PHI, SET, PI0, dist=DIST)
    w_hat = sample.weights
    for member in panel_members(SET, PHI, 6, seed):
        assert expected_divergence(gen, DIST, pop, PI0) <= expected_divergence(gen, DIST, member, PI0) + 1e-9
        assert expected_divergence(gen, w_hat, emp, PI0) <= expected_divergence(gen, w_hat, member, PI0) + 1e-9


@given(seed=seeds, m=st.integers(5, 100))
def test_epsilon_estimates_are_ordered(seed, m):
    gen = G.squared_euclidean()
    sample = sample_prompts(DIST, m, seed)
    lo = epsilon_m(gen, DIST, sample, SET, PHI, PI0, panel_size=8, seed=seed)
    exact = epsilon_m_upper(gen, DIST, sample, SET, PHI, PI0)
    grid = epsilon_m_grid(gen, DIST, sample, SET, PHI, PI0, step=0.05)
    assert lo <= exact + 1e-12
    assert exact <= grid + 1e-12


@given(seed=seeds, m=st.integers(5, 200))
def test_bounds_never_violated_with_exact_epsilon(seed, m):
    gen = G.squared_euclidean()
    star = np.array([[0.4, 0.4, 0.2], [0.4, 0.4, 0.2], [0.4, 0.3, 0.3], [0.4, 0.3, 0.3]])
    sample = sample_prompts(DIST, m, seed)
    rep = empirical_bound_report(gen, DIST, sample, SET, PHI, PI0, star, panel_size=4, seed=seed)
    assert rep.eps_upper is not None
    assert rep.violations == []
    for ineq in rep.inequalities:
        assert rep.verdict_upper(ineq) == "holds"


def test_steep_generators_have_unbounded_upper_estimate():
    sample = sample_prompts(DIST, 20, 3)
    rep = empirical_bound_report(G.negative_entropy(), DIST, sample, SET, PHI, PI0,
                                 np.full((4, 3), 1 / 3), panel_size=4)
    assert rep.eps_upper is None or rep.eps_upper == np.inf
