import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from coherence_proj import generators as G
from coherence_proj.bregman import divergence
from coherence_proj.errors import UnknownSuite
from coherence_proj.harness import (SUITES, SuiteConfig, four_point_residual, minimax_counterexample,
                                    orbit_average_universal_check, orbit_infeasibility_witness,
                                    project_to_quarter_circle, reversed_jensen_witness, run_suite,
                                    suite_names)
from coherence_proj.harness.rigidity import toy_closed_forms
from coherence_proj.harness.witnesses import infeasibility_instance
from coherence_proj.instances import random_instance

SMALL = SuiteConfig(hygiene_points=20, direct_instances=6, equivalence_instances=6,
                    two_step_instances=6, pythagorean_instances=4, maximin_instances=2,
                    maximin_step=0.05, relaxed_instances=4, empirical_seeds=3, empirical_m=30,
                    consistency_m=2000, consistency_seeds=3, orbit_instances=6, jensen_trials=2000,
                    characterization_instances=3)


def test_registry_names():
    assert set(SUITES) == {"bregman-identities", "direct-improvement", "two-step", "equivalence",
                           "relaxed", "empirical", "minimax", "orbit-average", "impossibility",
                           "characterization", "rigidity", "kernel"}
    assert suite_names("all") == list(SUITES)
    with pytest.raises(UnknownSuite):
        suite_names("everything")
    with pytest.raises(UnknownSuite):
        run_suite("everything")


def test_suite_config_rejects_unknown_keys():
    with pytest.raises(KeyError):
        SuiteConfig.from_dict({"direct_instance": 3})
    assert SuiteConfig.from_dict({"minimax_sweep": [10]}).minimax_sweep == (10.0,)


@pytest.mark.parametrize("name", sorted(SUITES))
def test_every_suite_passes_at_small_size(name):
    rep = run_suite(name, seed=3, cfg=SMALL)
    assert rep.checks
    assert rep.ok, rep.summary()


def test_suites_are_deterministic():
    a = run_suite("relaxed", seed=5, cfg=SMALL).to_dict()
    b = run_suite("relaxed", seed=5, cfg=SMALL).to_dict()
    assert a == b


@given(M=st.floats(1.5, 200.0))
def test_minimax_gap_formula(M):
    w = minimax_counterexample(M)
    assert w.detail["solve_error"] <= 1e-9
    assert w.margin == pytest.approx((M - 5) / 8, abs=1e-12)
    assert w.found == (w.margin > 0)


def test_minimax_rejects_small_M():
    with pytest.raises(ValueError):
        minimax_counterexample(1.0)


def test_toy_closed_forms_frozen():
    cf = toy_closed_forms()
    assert cf["squared_euclidean"][0] == pytest.approx(0.45, abs=1e-15)
    assert cf["negative_entropy"][0] == pytest.approx(0.28284271247461906, abs=1e-15)
    assert cf["negative_log"][0] == pytest.approx(0.17777777777777778, abs=1e-15)


def test_quarter_circle_euclidean_is_normalisation():
    p = project_to_quarter_circle((1.0, 1.0), (1.0, 0.5))
    assert np.allclose(p, np.array([2.0, 1.0]) / math.sqrt(5), atol=1e-10)


def test_quarter_circle_weighted_matches_dense_scan():
    w = np.array([1.0, 10.0])
    t = np.linspace(0, math.pi / 2, 2_000_001)
    pts = np.stack([np.cos(t), np.sin(t)], axis=1)
    vals = 0.5 * ((pts - [1.0, 0.5]) ** 2 * w).sum(axis=1)
    best = pts[np.argmin(vals)]
    got = project_to_quarter_circle(w, (1.0, 0.5))
    assert np.max(np.abs(got - best)) <= 2e-6
    assert 0.5 * float(((got - [1.0, 0.5]) ** 2 * w).sum()) <= vals.min() + 1e-12


def test_reversed_jensen_witness_for_negative_log():
    wit = reversed_jensen_witness(G.negative_log(), 4000, seed=0)
    assert wit is not None
    assert wit.gap > 0 and wit.recheck_gap > 0
    # independent re-evaluation of the Jensen gap
    mix = wit.lam * wit.q1 + (1 - wit.lam) * wit.q2
    lhs = divergence(G.negative_log(), wit.p_star, mix)
    rhs = wit.lam * divergence(G.negative_log(), wit.p_star, wit.q1) + \
        (1 - wit.lam) * divergence(G.negative_log(), wit.p_star, wit.q2)
    assert lhs - rhs == pytest.approx(wit.gap, rel=1e-6)


def test_no_jensen_witness_for_jointly_convex_generator():
    assert reversed_jensen_witness(G.negative_entropy(), 2000, seed=0) is None


def test_orbit_average_never_hurts_jointly_convex_family():
    family = [G.squared_euclidean(), G.negative_entropy(), G.mahalanobis(np.diag([1.0, 2.0, 3.0]))]
    rep = orbit_average_universal_check(family, 10, seed=4)
    assert rep.ok


def test_orbit_infeasibility_margin_positive():
    set_pi, dist, phi, pi0 = infeasibility_instance()
    w = orbit_infeasibility_witness(set_pi, dist, phi, pi0)
    assert w.found and w.margin > 0


def test_four_point_residual_vanishes_on_affine_sets():
    inst = random_instance(11, 40, caps=0, affine=1, n_range=(2, 4), d_range=(2, 3))
    r = four_point_residual(G.squared_euclidean(), G.diagonal_quadratic(np.linspace(1, 2, inst.pi0.shape[1])),
                            inst.dist, inst.set_pi, inst.pi0)
    assert abs(r) <= 1e-8
