"""Declarative convex model classes with membership, projection and a reduced form.

A set is a base (product of simplices or unit cubes) intersected with
coordinate caps, affine rows over the (prompt, outcome) table and a block
partition forcing rows to agree. The block partition is folded into a reduced
variable space with one row per block, which makes those equalities exact.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np

from .coherence import BlockPartition, InvarianceMap, orbit_partition
from .errors import DomainError, Infeasible
from .models import as_table
from .polytope import Polytope, interior_point

SIMPLEX = "simplex"
CUBE = "cube"

_DYKSTRA_MAX_ITER = 10_000
_DYKSTRA_TOL = 1e-11


@dataclass(frozen=True, eq=False)
class AffineRow:
    """sum_{x,k} coeffs[x, k] pi[x, k] = rhs."""

    coeffs: np.ndarray
    rhs: float

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "rhs", float(self.rhs))


@dataclass(frozen=True, eq=False)
class ConvexModelSet:
    n: int
    d: int
    base: str = SIMPLEX
    caps: tuple = ()
    affine: tuple = ()
    blocks: BlockPartition | None = None
    sphere: bool = False
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        base = {"fullsimplexproduct": SIMPLEX, "unitcubeproduct": CUBE}.get(
            self.base.lower().replace("_", ""), self.base.lower())
        if base not in (SIMPLEX, CUBE):
            raise ValueError(f"unknown base {self.base!r}")
        object.__setattr__(self, "base", base)
        caps = []
        for x, k, u in self.caps:
            x, k, u = int(x), int(k), float(u)
            if not (0 <= x < self.n and 0 <= k < self.d):
                raise ValueError(f"cap index ({x}, {k}) out of range")
            if not 0.0 <= u <= 1.0:
                raise ValueError("caps must lie in [0, 1]")
            caps.append((x, k, u))
        object.__setattr__(self, "caps", tuple(caps))
        rows = []
        for r in self.affine:
            if not isinstance(r, AffineRow):
                r = AffineRow(*r) if isinstance(r, (tuple, list)) else AffineRow(r["coeffs"], r["rhs"])
            if r.coeffs.shape != (self.n, self.d):
                raise ValueError("affine coefficients must be an n x d table")
            rows.append(r)
        object.__setattr__(self, "affine", tuple(rows))
        if self.blocks is not None:
            bp = self.blocks if isinstance(self.blocks, BlockPartition) else BlockPartition(self.blocks)
            if bp.n != self.n:
                raise ValueError("block partition size differs from n")
            object.__setattr__(self, "blocks", bp)

    # -- construction helpers ------------------------------------------------

    @classmethod
    def full(cls, n, d, base=SIMPLEX) -> "ConvexModelSet":
        return cls(n, d, base)

    def partition(self) -> BlockPartition:
        return self.blocks if self.blocks is not None else BlockPartition.singletons(self.n)

    def with_blocks(self, blocks: BlockPartition) -> "ConvexModelSet":
        joined = self.partition().join(blocks)
        return ConvexModelSet(self.n, self.d, self.base, self.caps, self.affine, joined, self.sphere)

    def with_coherence(self, phi: InvarianceMap) -> "ConvexModelSet":
        return self.with_blocks(orbit_partition(phi))

    def without_blocks(self) -> "ConvexModelSet":
        return ConvexModelSet(self.n, self.d, self.base, self.caps, self.affine, None, self.sphere)

    def to_dict(self) -> dict:
        out = {"base": self.base, "n": self.n, "d": self.d}
        if self.caps:
            out["caps"] = [list(c) for c in self.caps]
        if self.affine:
            out["affine"] = [{"coeffs": r.coeffs.tolist(), "rhs": r.rhs} for r in self.affine]
        if self.blocks is not None:
            out["blocks"] = [list(b) for b in self.blocks.blocks]
        if self.sphere:
            out["sphere"] = True
        return out

    @classmethod
    def from_dict(cls, doc: dict, n: int | None = None, d: int | None = None) -> "ConvexModelSet":
        n = doc.get("n", n)
        d = doc.get("d", d)
        if n is None or d is None:
            raise ValueError("set dimensions n and d are required")
        affine = []
        for r in doc.get("affine", []):
            coeffs = r["coeffs"]
            arr = np.zeros((n, d))
            if coeffs and isinstance(coeffs[0], (list, tuple)) and len(coeffs[0]) == 3 \
                    and np.asarray(coeffs).shape != (n, d):
                for x, k, c in coeffs:
                    arr[int(x), int(k)] += float(c)
            else:
                arr = np.asarray(coeffs, dtype=float).reshape(n, d)
            affine.append(AffineRow(arr, r["rhs"]))
        blocks = doc.get("blocks")
        return cls(n, d, doc.get("base", SIMPLEX), tuple(tuple(c) for c in doc.get("caps", [])),
                   tuple(affine), BlockPartition(tuple(tuple(b) for b in blocks)) if blocks else None,
                   bool(doc.get("sphere", False)))

    # -- reduced representation ----------------------------------------------

    @property
    def reduced(self) -> "ReducedSet":
        if "reduced" not in self._cache:
            self._cache["reduced"] = ReducedSet.from_set(self)
        return self._cache["reduced"]

    def is_block_separable(self) -> bool:
        """True when no affine row couples two different blocks."""
        lab = self.partition().labels
        for r in self.affine:
            touched = np.unique(lab[np.any(r.coeffs != 0, axis=1)])
            if touched.size > 1:
                return False
        return True

    def has_inequalities(self) -> bool:
        """Whether any inequality beyond nonnegativity of the base is present."""
        return bool(self.caps) or self.base == CUBE

    # -- operations ----------------------------------------------------------

    def contains(self, pi, tol: float = 1e-9) -> bool:
        t = as_table(pi)
        if t.shape != (self.n, self.d):
            return False
        if np.any(t < -tol):
            return False
        if self.sphere:
            return bool(np.all(np.abs((t * t).sum(axis=1) - 1.0) <= tol))
        if self.base == SIMPLEX and np.any(np.abs(t.sum(axis=1) - 1.0) > tol):
            return False
        if self.base == CUBE and np.any(t > 1.0 + tol):
            return False
        for x, k, u in self.caps:
            if t[x, k] > u + tol:
                return False
        for r in self.affine:
            if abs(float((r.coeffs * t).sum()) - r.rhs) > tol:
                return False
        if self.blocks is not None:
            for b in self.blocks.blocks:
                if np.max(np.abs(t[list(b)] - t[b[0]])) > tol:
                    return False
        return True

    def euclidean_project(self, pi) -> np.ndarray:
        """Nearest point of the set in the Frobenius norm (Dykstra in the reduced space)."""
        if self.sphere:
            raise DomainError("the sphere constraint is not convex")
        t = as_table(pi)
        red = self.reduced
        z0 = red.restrict(t)
        z = red.dykstra(z0)
        if not red.polytope.contains(z, 1e-10):
            z = red.qp_project(z0)
        # the last affine step may leave entries just below zero
        z[(z < 0) & (z > -1e-9)] = 0.0
        out = red.expand(z)
        if not self.contains(out, 1e-8):
            raise Infeasible("projection did not reach a feasible point")
        return out

    def feasible_point(self) -> np.ndarray:
        """A strictly feasible point when one exists, else a relative-interior point."""
        if self.sphere:
            t = np.full((self.n, self.d), 1.0 / np.sqrt(self.d))
            return t
        red = self.reduced
        guess = np.full(red.nvar, 1.0 / self.d if self.base == SIMPLEX else 0.5)
        G, h = red.polytope.inequalities()
        eq_ok = not red.polytope.A.size or np.max(np.abs(red.polytope.A @ guess - red.polytope.b)) <= 1e-12
        if eq_ok and (G.size == 0 or np.min(h - G @ guess) > 1e-12):
            return red.expand(guess)
        z, _ = interior_point(red.polytope)
        return red.expand(z)


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection of each row of v onto the probability simplex."""
    v = np.atleast_2d(np.asarray(v, dtype=float))
    n, d = v.shape
    u = -np.sort(-v, axis=1)
    css = np.cumsum(u, axis=1) - 1.0
    ind = np.arange(1, d + 1)
    cond = u - css / ind > 0
    rho = d - 1 - np.argmax(cond[:, ::-1], axis=1)
    theta = css[np.arange(n), rho] / (rho + 1)
    return np.maximum(v - theta[:, None], 0.0)


@dataclass(frozen=True, eq=False)
class ReducedSet:
    """The set written over one d-vector per block, flattened to length nblocks * d."""

    labels: np.ndarray
    sizes: np.ndarray
    d: int
    base: str
    polytope: Polytope
    cap_ub: np.ndarray

    @classmethod
    def from_set(cls, s: ConvexModelSet) -> "ReducedSet":
        part = s.partition()
        labels = part.labels
        nb = len(part.blocks)
        d = s.d
        nvar = nb * d
        sizes = np.array([len(b) for b in part.blocks], dtype=float)
        A_rows, b_rows = [], []
        if s.base == SIMPLEX:
            for bi in range(nb):
                row = np.zeros(nvar)
                row[bi * d:(bi + 1) * d] = 1.0
                A_rows.append(row)
                b_rows.append(1.0)
        for r in s.affine:
            row = np.zeros(nvar)
            for x in range(s.n):
                row[labels[x] * d:(labels[x] + 1) * d] += r.coeffs[x]
            if not np.any(row):
                if abs(r.rhs) > 1e-12:
                    raise Infeasible("affine row reduces to 0 = rhs != 0")
                continue
            A_rows.append(row)
            b_rows.append(r.rhs)
        lb = np.zeros(nvar)
        ub = np.full(nvar, 1.0 if s.base == CUBE else np.inf)
        cap_ub = np.full(nvar, np.inf)
        for x, k, u in s.caps:
            j = labels[x] * d + k
            cap_ub[j] = min(cap_ub[j], u)
            ub[j] = min(ub[j], u)
        A = np.array(A_rows).reshape(-1, nvar)
        poly = Polytope(A, np.array(b_rows, dtype=float), np.zeros((0, nvar)), np.zeros(0), lb, ub)
        return cls(labels, sizes, d, s.base, poly, cap_ub)

    @property
    def nblocks(self) -> int:
        return self.sizes.size

    @property
    def nvar(self) -> int:
        return self.nblocks * self.d

    def expand(self, z) -> np.ndarray:
        return np.asarray(z, dtype=float).reshape(self.nblocks, self.d)[self.labels]

    def restrict(self, table) -> np.ndarray:
        """Block means of a full table (the Euclidean projection onto block-constant tables)."""
        t = as_table(table)
        out = np.zeros((self.nblocks, self.d))
        np.add.at(out, self.labels, t)
        return (out / self.sizes[:, None]).ravel()

    def block_polytopes(self) -> list:
        """Per-block polytopes over one d-vector each, keeping rows that touch only that block."""
        P = self.polytope
        d = self.d
        out = []
        for b in range(self.nblocks):
            cols = slice(b * d, (b + 1) * d)
            other = np.ones(P.nvar, dtype=bool)
            other[cols] = False
            rows = ~np.any(P.A[:, other] != 0, axis=1)
            out.append(Polytope(P.A[rows][:, cols], P.b[rows], np.zeros((0, d)), np.zeros(0),
                                P.lb[cols], P.ub[cols]))
        return out

    def block_weights(self, weights) -> np.ndarray:
        """Sum of per-prompt weights within each block."""
        out = np.zeros(self.nblocks)
        np.add.at(out, self.labels, np.asarray(weights, dtype=float))
        return out

    @functools.cached_property
    def _affine_projector(self):
        A, b = self.polytope.A, self.polytope.b
        if self.base == SIMPLEX:
            nb = self.nblocks
            A, b = A[nb:], b[nb:]
        if A.shape[0] == 0:
            return None
        winv = 1.0 / np.repeat(self.sizes, self.d)
        M = (A * winv) @ A.T
        Mp = np.linalg.pinv(M)
        return A, b, winv, Mp

    def qp_project(self, z0: np.ndarray) -> np.ndarray:
        """Same projection as ``dykstra`` solved as a QP; used when Dykstra stalls on sharp corners."""
        from .solvers import QuadraticObjective, SolverOptions, minimize

        wts = np.repeat(self.sizes.astype(float), self.d)
        z0 = np.asarray(z0, dtype=float)
        obj = QuadraticObjective(np.diag(wts), -wts * z0, 0.5 * float(wts @ (z0 * z0)))
        z, _ = minimize(obj, self.polytope, SolverOptions(tol_kkt=1e-10))
        return z

    def dykstra(self, z0: np.ndarray) -> np.ndarray:
        """Projection of z0 onto the reduced polytope in the block-size-weighted metric."""
        d = self.d
        atoms = []
        if self.base == SIMPLEX:
            atoms.append(lambda z: project_simplex(z.reshape(-1, d)).ravel())
            if np.isfinite(self.cap_ub).any():
                ub = self.cap_ub
                atoms.append(lambda z: np.clip(z, 0.0, ub))
        else:
            ub = self.polytope.ub
            atoms.append(lambda z: np.clip(z, 0.0, ub))
        proj = self._affine_projector
        if proj is not None:
            A, b, winv, Mp = proj

            def affine(z):
                return z - winv * (A.T @ (Mp @ (A @ z - b)))

            atoms.append(affine)
        z = np.asarray(z0, dtype=float).copy()
        if len(atoms) == 1:
            return atoms[0](z)
        incr = [np.zeros_like(z) for _ in atoms]
        for _ in range(_DYKSTRA_MAX_ITER):
            prev = z.copy()
            moved = 0.0
            for i, atom in enumerate(atoms):
                y = atom(z + incr[i])
                new_incr = z + incr[i] - y
                moved = max(moved, float(np.max(np.abs(new_incr - incr[i]))))
                incr[i] = new_incr
                z = y
            # the iterate can stall while the corrections still move
            moved = max(moved, float(np.max(np.abs(z - prev))))
            if moved <= _DYKSTRA_TOL and self.polytope.contains(z, 1e-10):
                break
        return z
