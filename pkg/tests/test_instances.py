import numpy as np
from hypothesis import given, strategies as st

from coherence_proj.coherence import is_coherent
from coherence_proj.instances import random_instance, random_involution, random_spd, rng_for

from strategies import seeds


def test_streams_are_reproducible_and_keyed():
    a = rng_for(5, 1, 2).uniform(size=3)
    assert np.array_equal(a, rng_for(5, 1, 2).uniform(size=3))
    assert not np.array_equal(a, rng_for(5, 1, 3).uniform(size=3))


@given(seed=seeds, n=st.integers(1, 9))
def test_random_involution_is_an_involution(seed, n):
    phi = random_involution(rng_for(seed), n)
    assert all(phi.perm[phi.perm[x]] == x for x in range(n))


@given(seed=seeds, base=st.sampled_from(["simplex", "cube"]))
def test_anchor_is_coherent_and_inside_caps(seed, base):
    inst = random_instance(seed, 1, base=base)
    assert is_coherent(inst.anchor, inst.phi)
    for x, k, u in inst.set_pi.caps:
        assert inst.anchor[x, k] <= u - 0.05 + 1e-12


@given(seed=seeds)
def test_random_spd_condition_number(seed):
    eig = np.linalg.eigvalsh(random_spd(rng_for(seed), 4, cond=10.0))
    assert eig.min() > 0 and eig.max() / eig.min() <= 10.0 + 1e-9
