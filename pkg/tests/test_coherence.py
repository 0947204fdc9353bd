import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from coherence_proj import generators as G
from coherence_proj.coherence import (BlockPartition, InvarianceMap, arithmetic_orbit_average, c_phi,
                                      delta_coh, delta_coh_bounds, incoherence_gamma0, is_coherent,
                                      lambda_weights, level_set_partition, orbit_average,
                                      orbit_partition)
from coherence_proj.errors import NotInvolution
from coherence_proj.instances import random_dist, random_involution, random_rows, rng_for

from strategies import seeds


def test_invariance_map_validation():
    with pytest.raises(ValueError):
        InvarianceMap((0, 0, 1))
    with pytest.raises(NotInvolution):
        InvarianceMap((1, 2, 0), involution_flag=True)
    assert InvarianceMap.from_pairs(4, [(0, 1)]).perm == (1, 0, 2, 3)
    assert InvarianceMap.identity(3).involution_flag


def test_orbits_of_a_three_cycle():
    assert orbit_partition(InvarianceMap((1, 2, 0, 3))).orbits == ((0, 1, 2), (3,))


def test_partition_join():
    a = BlockPartition(((0, 1), (2,), (3,)))
    b = BlockPartition(((0,), (1, 2), (3,)))
    assert a.join(b).blocks == ((0, 1, 2), (3,))


def test_level_sets():
    t = np.array([[0.2], [0.5], [0.2], [0.5 + 1e-12]])
    assert level_set_partition(t).blocks == ((0, 2), (1, 3))


def test_lambda_weights_hand_values():
    phi = InvarianceMap((1, 0, 2))
    lam = lambda_weights([0.6, 0.2, 0.2], phi)
    # a fixed point has weight P(x) / (P(x) + P(x))
    assert np.allclose(lam, [0.75, 0.25, 0.5])


def test_c_phi_hand_value():
    # P(phi^{-1}(x)) / P(x): 0.3/0.1 is the largest ratio
    assert c_phi([0.1, 0.3, 0.6], InvarianceMap((1, 0, 2))) == pytest.approx(math.sqrt(3))


def test_incoherence_hand_value():
    phi = InvarianceMap((1, 0))
    t = np.array([[1.0, 0.0], [0.0, 1.0]])
    assert incoherence_gamma0([0.5, 0.5], t, phi) == pytest.approx(2.0)
    assert incoherence_gamma0([0.5, 0.5], t, phi, "L1") == pytest.approx(4.0)
    # nearest coherent model is the mean row (0.5, 0.5)
    assert delta_coh([0.5, 0.5], t, phi) == pytest.approx(0.5)


def test_euclidean_orbit_average_is_weighted_mean():
    phi = InvarianceMap((1, 0))
    t = np.array([[0.2, 0.8], [0.6, 0.4]])
    out = orbit_average(G.squared_euclidean(), [0.25, 0.75], phi, t)
    assert np.allclose(out, [[0.5, 0.5]] * 2, atol=1e-15)


@given(seed=seeds, n=st.integers(2, 7), d=st.integers(2, 4),
       kind=st.sampled_from([G.SQUARED_EUCLIDEAN, G.NEGATIVE_ENTROPY, G.NEGATIVE_LOG]))
def test_orbit_average_is_coherent(seed, n, d, kind):
    rng = rng_for(seed, 0)
    phi = random_involution(rng, n)
    dist = random_dist(rng, n)
    t = random_rows(rng, n, d)
    gen = G.GeneratorSpec.from_dict({"kind": kind})
    out = orbit_average(gen, dist, phi, t)
    assert is_coherent(out, phi, 1e-12)
    assert np.all(out > 0)


@given(seed=seeds, n=st.integers(2, 7), d=st.integers(2, 4))
def test_delta_coh_sandwich(seed, n, d):
    rng = rng_for(seed, 1)
    phi = random_involution(rng, n)
    dist = random_dist(rng, n)
    t = random_rows(rng, n, d)
    g0 = incoherence_gamma0(dist, t, phi)
    lo, hi = delta_coh_bounds(g0, c_phi(dist, phi))
    dc = delta_coh(dist, t, phi)
    assert lo - 1e-12 <= dc <= hi + 1e-12


@given(seed=seeds, n=st.integers(2, 6), d=st.integers(2, 4))
def test_invariant_distribution_gives_quarter_gamma(seed, n, d):
    rng = rng_for(seed, 2)
    phi = random_involution(rng, n)
    dist = random_dist(rng, n, invariant_under=phi)
    t = random_rows(rng, n, d)
    assert c_phi(dist, phi) == pytest.approx(1.0)
    assert delta_coh(dist, t, phi) == pytest.approx(incoherence_gamma0(dist, t, phi) / 4, abs=1e-14)


@given(seed=seeds, n=st.integers(2, 5), d=st.integers(2, 3))
def test_l1_delta_coh_is_at_most_l2_bound_in_l1(seed, n, d):
    rng = rng_for(seed, 3)
    phi = random_involution(rng, n)
    dist = random_dist(rng, n)
    t = random_rows(rng, n, d)
    dc1 = delta_coh(dist, t, phi, "L1")
    avg = arithmetic_orbit_average(dist, phi, t)
    # the weighted mean is feasible for the L1 program, so it bounds the minimum
    feasible = float(np.sum(np.asarray(dist) * np.abs(t - avg).sum(axis=1) ** 2))
    assert -1e-12 <= dc1 <= feasible + 1e-9
