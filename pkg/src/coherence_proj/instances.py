"""Seeded random instances for the property suites."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import generators as G
from .coherence import InvarianceMap, orbit_partition
from .convex_sets import AffineRow, ConvexModelSet


def rng_for(seed, *keys) -> np.random.Generator:
    """A PCG64 stream derived from a root seed and a path of integer keys."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys)))


@dataclass(frozen=True, eq=False)
class Instance:
    dist: np.ndarray
    phi: InvarianceMap
    pi0: np.ndarray
    set_pi: ConvexModelSet
    anchor: np.ndarray  # a coherent point of the set, strictly inside every cap


def random_involution(rng, n: int, fixed_frac: float = 0.25) -> InvarianceMap:
    perm = list(range(n))
    order = rng.permutation(n)
    n_fixed = int(rng.binomial(n, fixed_frac))
    movers = order[n_fixed:]
    for a, b in zip(movers[0::2], movers[1::2]):
        perm[a], perm[b] = int(b), int(a)
    return InvarianceMap(tuple(perm))


def random_dist(rng, n: int, invariant_under: InvarianceMap | None = None) -> np.ndarray:
    w = rng.uniform(0.2, 1.0, n)
    if invariant_under is not None:
        for orb in orbit_partition(invariant_under).orbits:
            w[list(orb)] = w[list(orb)].mean()
    return w / w.sum()


def random_rows(rng, n: int, d: int, floor: float = 0.02) -> np.ndarray:
    t = rng.dirichlet(np.ones(d), size=n)
    return (1 - floor * d) * t + floor


def random_coherent(rng, n: int, d: int, phi: InvarianceMap, floor: float = 0.05) -> np.ndarray:
    t = random_rows(rng, n, d, floor)
    for orb in orbit_partition(phi).orbits:
        t[list(orb)] = t[orb[0]]
    return t


def random_set(rng, n, d, phi, caps=2, affine=1, base="simplex") -> tuple[ConvexModelSet, np.ndarray]:
    """A random polyhedral model class containing a known coherent anchor point.

    Caps are multiples of 0.1 placed at least 0.05 above the anchor; affine rows
    take their right-hand side from the anchor.
    """
    anchor = random_coherent(rng, n, d, phi)
    if base == "cube":
        anchor = anchor * rng.uniform(0.5, 1.5, size=(n, 1))
        anchor = np.clip(anchor, 0.05, 0.95)
        for orb in orbit_partition(phi).orbits:
            anchor[list(orb)] = anchor[orb[0]]
    cap_list = []
    for _ in range(caps):
        x, k = int(rng.integers(n)), int(rng.integers(d))
        u = np.ceil((anchor[x, k] + 0.05) * 10) / 10
        if u < 1.0:
            cap_list.append((x, k, float(u)))
    rows = []
    for _ in range(affine):
        c = np.zeros((n, d))
        m = int(rng.integers(1, min(4, n * d) + 1))
        for _ in range(m):
            c[int(rng.integers(n)), int(rng.integers(d))] += float(rng.choice([-1.0, 1.0]) * rng.uniform(0.5, 1.5))
        rows.append(AffineRow(c, float((c * anchor).sum())))
    return ConvexModelSet(n, d, base, tuple(cap_list), tuple(rows)), anchor


def random_instance(seed, *keys, n_range=(2, 8), d_range=(2, 5), caps=2, affine=1,
                    base="simplex", invariant=False) -> Instance:
    rng = rng_for(seed, *keys)
    n = int(rng.integers(n_range[0], n_range[1] + 1))
    d = int(rng.integers(d_range[0], d_range[1] + 1))
    phi = random_involution(rng, n)
    dist = random_dist(rng, n, phi if invariant else None)
    set_pi, anchor = random_set(rng, n, d, phi, caps, affine, base)
    pi0 = random_rows(rng, n, d)
    if base == "cube":
        pi0 = rng.uniform(0.05, 0.95, size=(n, d))
    return Instance(dist, phi, pi0, set_pi, anchor)


def random_coherent_members(rng, inst: Instance, k: int) -> list[np.ndarray]:
    """Coherent members of the set: the anchor, and Euclidean projections of random tables."""
    coh = inst.set_pi.with_coherence(inst.phi)
    out = [inst.anchor.copy()]
    for _ in range(k - 1):
        raw = rng.uniform(-0.2, 1.2, size=inst.pi0.shape)
        out.append(coh.euclidean_project(raw))
    return out


def random_spd(rng, d: int, cond: float = 10.0) -> np.ndarray:
    q, _ = np.linalg.qr(rng.normal(size=(d, d)))
    eig = np.exp(rng.uniform(0.0, np.log(cond), d))
    return (q * eig) @ q.T


def random_generator(rng, kind: str, d: int) -> G.GeneratorSpec:
    kind = G.canonical_kind(kind)
    if kind == G.SQUARED_EUCLIDEAN:
        return G.squared_euclidean()
    if kind == G.NEGATIVE_ENTROPY:
        return G.negative_entropy()
    if kind == G.NEGATIVE_LOG:
        return G.negative_log()
    if kind == G.MAHALANOBIS:
        return G.mahalanobis(random_spd(rng, d))
    if kind == G.DIAGONAL_QUADRATIC:
        return G.diagonal_quadratic(rng.uniform(0.5, 3.0, d))
    return G.quadratic_coupled(random_spd(rng, d))
