import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from coherence_proj import generators as G
from coherence_proj.bregman import expected_divergence
from coherence_proj.coherence import BlockPartition, InvarianceMap, is_coherent
from coherence_proj.convex_sets import ConvexModelSet
from coherence_proj.errors import DomainError
from coherence_proj.instances import random_coherent_members, random_instance, rng_for
from coherence_proj.projection import (bregman_project, direct_projection, hellinger_improvement_floor,
                                       improvement, pythagorean_residual, strong_convexity_floor,
                                       two_step_delta, two_step_projection)

from strategies import seeds

TOY_SET = ConvexModelSet(3, 1, "cube", blocks=BlockPartition(((0, 1), (2,))))
TOY_PI0 = np.array([[0.10], [0.80], [0.40]])
UNIFORM3 = np.full(3, 1 / 3)


@pytest.mark.parametrize("gen, expected", [
    (G.squared_euclidean(), 0.45),
    (G.negative_entropy(), math.sqrt(0.08)),
    (G.negative_log(), 8 / 45),
])
def test_toy_block_values(gen, expected):
    got, rep = bregman_project(gen, UNIFORM3, TOY_SET, TOY_PI0)
    assert got[0, 0] == pytest.approx(expected, abs=1e-9)
    assert got[1, 0] == pytest.approx(expected, abs=1e-9)
    assert got[2, 0] == pytest.approx(0.40, abs=1e-9)
    assert rep.status == "optimal"


def test_toy_coupled_generator_hits_the_boundary():
    A = np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 0.0], [1.0, 0.0, 1.0]])
    gen = G.quadratic_coupled(A, scope="model")
    got, _ = bregman_project(gen, UNIFORM3, TOY_SET, TOY_PI0)
    assert np.allclose(got.ravel(), [0.65, 0.65, 0.0], atol=1e-7)


def test_member_is_its_own_projection():
    s = ConvexModelSet(2, 2)
    t = np.array([[0.3, 0.7], [0.5, 0.5]])
    got, rep = bregman_project(G.negative_entropy(), [0.5, 0.5], s, t)
    assert np.array_equal(got, t) and rep.iterations == 0


def test_sphere_sets_are_refused():
    with pytest.raises(DomainError):
        bregman_project(G.squared_euclidean(), [1.0], ConvexModelSet(1, 2, sphere=True), [[1.0, 1.0]])


def test_squared_euclidean_centroid_gain_pair_formula():
    # for a pair the gain is w_a w_b / (w_a + w_b) * 1/2 |t_a - t_b|^2
    phi = InvarianceMap((1, 0, 2))
    w = np.array([0.5, 0.3, 0.2])
    t = np.array([[0.9, 0.1], [0.2, 0.8], [0.5, 0.5]])
    expected = 0.5 * 0.3 / 0.8 * 0.5 * float(np.sum((t[0] - t[1]) ** 2))
    assert two_step_delta(G.squared_euclidean(), w, phi, t) == pytest.approx(expected, abs=1e-15)


def test_floors_hand_values():
    phi = InvarianceMap((1, 0))
    t = np.array([[0.5, 0.5], [0.1, 0.9]])
    w = np.array([0.5, 0.5])
    # H^2 = 1 - sqrt(.05) - sqrt(.45); floor = 2 * 0.5 * H^2 summed over both prompts * 0.5 weight
    h2 = 1 - math.sqrt(0.05) - math.sqrt(0.45)
    assert hellinger_improvement_floor(w, phi, t) == pytest.approx(h2, abs=1e-15)
    # mu = 1, L1 norm: 0.5 * sum_x 0.5 * 0.25 * 0.8^2
    assert strong_convexity_floor(G.negative_entropy(), w, phi, t) == pytest.approx(0.08, abs=1e-15)


KINDS = [G.SQUARED_EUCLIDEAN, G.NEGATIVE_ENTROPY, G.NEGATIVE_LOG, G.DIAGONAL_QUADRATIC]


def _gen(kind, d):
    if kind == G.DIAGONAL_QUADRATIC:
        return G.diagonal_quadratic(np.linspace(0.5, 2.0, d))
    return G.GeneratorSpec.from_dict({"kind": kind})


@given(seed=seeds, kind=st.sampled_from(KINDS))
def test_projection_improves_every_coherent_member(seed, kind):
    inst = random_instance(seed, 20, n_range=(2, 5), d_range=(2, 4))
    gen = _gen(kind, inst.pi0.shape[1])
    out, _ = direct_projection(gen, inst.dist, inst.phi, inst.set_pi, inst.pi0)
    assert is_coherent(out, inst.phi, 1e-9)
    assert inst.set_pi.contains(out, 1e-8)
    gain = expected_divergence(gen, inst.dist, out, inst.pi0)
    for star in random_coherent_members(rng_for(seed, 21), inst, 4):
        if not G.in_domain(gen, star):
            continue
        assert improvement(gen, inst.dist, star, inst.pi0, out) >= gain - 1e-8
        coh = inst.set_pi.with_coherence(inst.phi)
        assert pythagorean_residual(gen, inst.dist, coh, star, out, inst.pi0) >= -1e-8


@given(seed=seeds, kind=st.sampled_from([k for k in KINDS if k != G.NEGATIVE_LOG]))
def test_direct_and_two_step_agree(seed, kind):
    inst = random_instance(seed, 22, n_range=(2, 5), d_range=(2, 4))
    gen = _gen(kind, inst.pi0.shape[1])
    direct, _ = direct_projection(gen, inst.dist, inst.phi, inst.set_pi, inst.pi0)
    two, _, inter = two_step_projection(gen, inst.dist, inst.phi, inst.set_pi, inst.pi0)
    assert np.max(np.abs(direct - two)) <= 1e-7
    assert is_coherent(inter, inst.phi, 1e-12)


@given(seed=seeds, kind=st.sampled_from(KINDS))
def test_centroid_gain_is_nonnegative(seed, kind):
    inst = random_instance(seed, 23)
    gen = _gen(kind, inst.pi0.shape[1])
    assert two_step_delta(gen, inst.dist, inst.phi, inst.pi0) >= -1e-12


def test_two_step_refuses_model_scope():
    gen = G.quadratic_coupled(np.eye(4), scope="model")
    with pytest.raises(DomainError):
        two_step_projection(gen, [0.5, 0.5], InvarianceMap((1, 0)), ConvexModelSet(2, 2),
                            np.array([[0.5, 0.5], [0.2, 0.8]]))
