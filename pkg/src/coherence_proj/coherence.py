"""Invariance maps, orbit and block partitions, and the closed-form coherence step."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import generators as G
from .bregman import centroid
from .errors import DomainError, NotInvolution
from .models import as_table, as_weights


@dataclass(frozen=True)
class InvarianceMap:
    """A permutation of prompt indices; ``perm[x]`` is the image of x."""

    perm: tuple
    involution_flag: bool | None = None

    def __post_init__(self):
        perm = tuple(int(v) for v in self.perm)
        n = len(perm)
        if sorted(perm) != list(range(n)):
            raise ValueError("perm must be a bijection on 0..n-1")
        object.__setattr__(self, "perm", perm)
        inv = all(perm[perm[x]] == x for x in range(n))
        if self.involution_flag is None:
            object.__setattr__(self, "involution_flag", inv)
        elif self.involution_flag and not inv:
            raise NotInvolution("map flagged as involution but perm(perm(x)) != x")

    @property
    def n(self) -> int:
        return len(self.perm)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.perm, dtype=int)

    @classmethod
    def identity(cls, n: int) -> "InvarianceMap":
        return cls(tuple(range(n)))

    @classmethod
    def from_pairs(cls, n: int, pairs) -> "InvarianceMap":
        perm = list(range(n))
        for a, b in pairs:
            perm[a], perm[b] = b, a
        return cls(tuple(perm))

    def to_list(self) -> list:
        return list(self.perm)


@dataclass(frozen=True)
class BlockPartition:
    """A partition of prompts into blocks whose rows must agree."""

    blocks: tuple

    def __post_init__(self):
        blocks = tuple(tuple(sorted(int(v) for v in b)) for b in self.blocks if len(b))
        blocks = tuple(sorted(blocks, key=lambda b: b[0]))
        flat = sorted(v for b in blocks for v in b)
        if flat != list(range(len(flat))):
            raise ValueError("blocks must partition 0..n-1")
        object.__setattr__(self, "blocks", blocks)

    @property
    def n(self) -> int:
        return sum(len(b) for b in self.blocks)

    @property
    def labels(self) -> np.ndarray:
        lab = np.empty(self.n, dtype=int)
        for i, b in enumerate(self.blocks):
            lab[list(b)] = i
        return lab

    @classmethod
    def singletons(cls, n: int) -> "BlockPartition":
        return cls(tuple((x,) for x in range(n)))

    @classmethod
    def from_labels(cls, labels) -> "BlockPartition":
        groups: dict = {}
        for x, lab in enumerate(labels):
            groups.setdefault(lab, []).append(x)
        return cls(tuple(tuple(g) for g in groups.values()))

    def join(self, other: "BlockPartition") -> "BlockPartition":
        """Finest partition coarser than both (union of the two equivalences)."""
        if other.n != self.n:
            raise ValueError("partitions over different prompt sets")
        parent = list(range(self.n))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for part in (self, other):
            for b in part.blocks:
                for v in b[1:]:
                    ra, rb = find(b[0]), find(v)
                    if ra != rb:
                        parent[rb] = ra
        return BlockPartition.from_labels([find(x) for x in range(self.n)])

    def is_trivial(self) -> bool:
        return all(len(b) == 1 for b in self.blocks)


@dataclass(frozen=True)
class OrbitPartition(BlockPartition):
    """Cycle decomposition of an invariance map."""

    @property
    def orbits(self) -> tuple:
        return self.blocks

    @property
    def orbit_of(self) -> np.ndarray:
        return self.labels


def orbit_partition(phi: InvarianceMap) -> OrbitPartition:
    seen = [False] * phi.n
    orbits = []
    for x in range(phi.n):
        if seen[x]:
            continue
        cyc = []
        y = x
        while not seen[y]:
            seen[y] = True
            cyc.append(y)
            y = phi.perm[y]
        orbits.append(tuple(cyc))
    return OrbitPartition(tuple(orbits))


def level_set_partition(table, tol: float = 1e-9) -> BlockPartition:
    """Group prompts whose rows agree within ``tol`` in the sup norm (transitively)."""
    t = as_table(table)
    n = t.shape[0]
    labels = list(range(n))

    def find(a):
        while labels[a] != a:
            a = labels[a]
        return a

    for x in range(n):
        for y in range(x + 1, n):
            if np.max(np.abs(t[x] - t[y])) <= tol:
                rx, ry = find(x), find(y)
                if rx != ry:
                    labels[ry] = rx
    return BlockPartition.from_labels([find(x) for x in range(n)])


def _require_involution(phi):
    if not phi.involution_flag:
        raise NotInvolution("operation requires an involution")


def lambda_weight(dist, phi: InvarianceMap, x: int) -> float:
    """P(x) / (P(x) + P(phi(x)))."""
    _require_involution(phi)
    w = as_weights(dist)
    return float(w[x] / (w[x] + w[phi.perm[x]]))


def lambda_weights(dist, phi: InvarianceMap) -> np.ndarray:
    _require_involution(phi)
    w = as_weights(dist)
    return w / (w + w[phi.array])


def is_coherent(pi, phi: InvarianceMap, tol: float = 1e-12) -> bool:
    t = as_table(pi)
    return bool(np.max(np.abs(t - t[phi.array])) <= tol)


def is_block_constant(pi, blocks: BlockPartition, tol: float = 1e-12) -> bool:
    t = as_table(pi)
    return all(np.max(np.abs(t[list(b)] - t[b[0]])) <= tol for b in blocks.blocks)


def orbit_average(gen: G.GeneratorSpec, dist, phi: InvarianceMap, pi0) -> np.ndarray:
    """Bregman projection of pi0 onto the coherent nonnegative cone.

    Each orbit gets the B_F-centroid of its rows with weights proportional to
    the prompt probabilities. For an involution these weights are lambda(x)
    and 1 - lambda(x).
    """
    if gen.scope == "model":
        raise DomainError("orbit averaging needs a row-scope generator")
    t = as_table(pi0)
    w = as_weights(dist)
    out = np.empty_like(t)
    for orb in orbit_partition(phi).orbits:
        idx = list(orb)
        lam = w[idx] / w[idx].sum()
        lam = lam / lam.sum()
        out[idx] = centroid(gen, lam, t[idx])
    return out


def block_average(gen: G.GeneratorSpec, dist, blocks: BlockPartition, pi0) -> np.ndarray:
    """Weighted B_F-centroid of pi0 over each block (no other constraint)."""
    t = as_table(pi0)
    w = as_weights(dist)
    out = np.empty_like(t)
    for b in blocks.blocks:
        idx = list(b)
        lam = w[idx] / w[idx].sum()
        lam = lam / lam.sum()
        out[idx] = centroid(gen, lam, t[idx])
    return out


def arithmetic_orbit_average(dist, phi: InvarianceMap, pi0) -> np.ndarray:
    """Probability-weighted arithmetic mean over each orbit (the orbit-averaged model)."""
    t = as_table(pi0)
    w = as_weights(dist)
    out = np.empty_like(t)
    for orb in orbit_partition(phi).orbits:
        idx = list(orb)
        out[idx] = (w[idx] @ t[idx]) / w[idx].sum()
    return out


def _row_norm_sq(diff, norm_tag):
    if norm_tag == "L1":
        return np.abs(diff).sum(axis=-1) ** 2
    if norm_tag == "L2":
        return (diff * diff).sum(axis=-1)
    raise ValueError("norm_tag must be 'L1' or 'L2'")


def incoherence_gamma0(dist, pi0, phi: InvarianceMap, norm_tag: str = "L2") -> float:
    """E ||pi0(x) - pi0(phi(x))||^2 with the declared row norm."""
    _require_involution(phi)
    t = as_table(pi0)
    w = as_weights(dist)
    return math.fsum(w * _row_norm_sq(t - t[phi.array], norm_tag))


def delta_coh_bounds(gamma0: float, c_phi: float) -> tuple[float, float]:
    """(gamma0 / (1 + C_phi)^2, gamma0 / 4)."""
    if gamma0 < 0 or c_phi < 0:
        raise ValueError("gamma0 and C_phi must be nonnegative")
    return gamma0 / (1.0 + c_phi) ** 2, gamma0 / 4.0


def c_phi(dist, phi: InvarianceMap) -> float:
    """Operator norm of pi -> pi o phi on L2(P): max_x sqrt(P(phi^{-1}(x)) / P(x))."""
    w = as_weights(dist)
    inv = np.empty(phi.n, dtype=int)
    inv[phi.array] = np.arange(phi.n)
    return float(np.sqrt(np.max(w[inv] / w)))


def is_phi_invariant(dist, phi: InvarianceMap, tol: float = 1e-15) -> bool:
    w = as_weights(dist)
    return bool(np.max(np.abs(w - w[phi.array])) <= tol)


def delta_coh(dist, pi0, phi: InvarianceMap, norm_tag: str = "L2") -> float:
    """Squared L2(P) distance from pi0 to the coherent models, with the given row norm.

    For the L2 row norm the nearest coherent model is the weighted orbit mean.
    For L1 each orbit is a small convex program min sum_x w_x ||pi0(x) - z||_1^2,
    solved as a quadratic program with auxiliary variables.
    """
    t = as_table(pi0)
    w = as_weights(dist)
    if norm_tag == "L2":
        avg = arithmetic_orbit_average(w, phi, t)
        return math.fsum(w * _row_norm_sq(t - avg, "L2"))
    if norm_tag != "L1":
        raise ValueError("norm_tag must be 'L1' or 'L2'")
    from .solvers import l1_orbit_distance

    total = []
    for orb in orbit_partition(phi).orbits:
        idx = list(orb)
        if len(idx) == 1:
            continue
        total.append(l1_orbit_distance(w[idx], t[idx]))
    return math.fsum(total)
