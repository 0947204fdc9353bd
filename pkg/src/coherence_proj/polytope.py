"""Polyhedra {z : A z = b, G z <= h, lb <= z <= ub} and the linear programs used on them."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import Infeasible

_SLACK_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Polytope:
    A: np.ndarray
    b: np.ndarray
    G: np.ndarray
    h: np.ndarray
    lb: np.ndarray
    ub: np.ndarray

    @classmethod
    def build(cls, nvar, A=None, b=None, G=None, h=None, lb=None, ub=None):
        def mat(m):
            return np.zeros((0, nvar)) if m is None else np.atleast_2d(np.asarray(m, float)).reshape(-1, nvar)

        def vec(v, fill=None, size=0):
            if v is None:
                return np.full(size, fill) if fill is not None else np.zeros(0)
            return np.asarray(v, dtype=float).ravel()

        A = mat(A)
        G = mat(G)
        return cls(A, vec(b, size=A.shape[0]) if b is not None else np.zeros(A.shape[0]),
                   G, vec(h) if h is not None else np.zeros(G.shape[0]),
                   vec(lb, -np.inf, nvar), vec(ub, np.inf, nvar))

    @property
    def nvar(self) -> int:
        return self.lb.size

    def inequalities(self) -> tuple[np.ndarray, np.ndarray]:
        """All inequality rows, bounds included, as (G, h) with G z <= h."""
        n = self.nvar
        eye = np.eye(n)
        lo = np.isfinite(self.lb)
        hi = np.isfinite(self.ub)
        G = np.vstack([self.G, -eye[lo], eye[hi]])
        h = np.concatenate([self.h, -self.lb[lo], self.ub[hi]])
        return G, h

    def restrict(self, free: np.ndarray, fixed_values: np.ndarray) -> "Polytope":
        """Substitute the variables outside ``free`` by ``fixed_values`` (full-length vector)."""
        fixed = ~free
        fv = np.where(fixed, fixed_values, 0.0)
        b = self.b - self.A[:, fixed] @ fv[fixed]
        h = self.h - self.G[:, fixed] @ fv[fixed]
        return Polytope(self.A[:, free], b, self.G[:, free], h, self.lb[free], self.ub[free])

    def residuals(self, z) -> tuple[float, float]:
        """(max equality violation, max inequality violation)."""
        z = np.asarray(z, float)
        eq = float(np.max(np.abs(self.A @ z - self.b))) if self.A.size else 0.0
        G, h = self.inequalities()
        ineq = float(np.max(G @ z - h)) if G.size else 0.0
        return eq, max(ineq, 0.0)

    def contains(self, z, tol=1e-9) -> bool:
        eq, ineq = self.residuals(z)
        return eq <= tol and ineq <= tol


def _lp(c, A_ub, b_ub, A_eq, b_eq, bounds):
    res = linprog(c, A_ub=A_ub if A_ub is not None and A_ub.size else None,
                  b_ub=b_ub if A_ub is not None and A_ub.size else None,
                  A_eq=A_eq if A_eq.size else None, b_eq=b_eq if A_eq.size else None,
                  bounds=bounds, method="highs")
    return res


def interior_point(poly: Polytope) -> tuple[np.ndarray, np.ndarray]:
    """A point in the relative interior and a mask of implicit-equality inequality rows.

    The mask refers to the rows of ``poly.inequalities()``. Rows outside the
    mask have strictly positive slack at the returned point.
    """
    G, h = poly.inequalities()
    n = poly.nvar
    k = G.shape[0]
    if k == 0:
        res = _lp(np.zeros(n), None, None, poly.A, poly.b, [(None, None)] * n)
        if res.status != 0:
            raise Infeasible("equality constraints are inconsistent")
        return res.x, np.zeros(0, dtype=bool)
    # max s subject to G z + s <= h, s <= 1
    c = np.zeros(n + 1)
    c[-1] = -1.0
    A_ub = np.hstack([G, np.ones((k, 1))])
    A_eq = np.hstack([poly.A, np.zeros((poly.A.shape[0], 1))])
    res = _lp(c, A_ub, h, A_eq, poly.b, [(None, None)] * n + [(None, 1.0)])
    if res.status != 0 or res.x[-1] < -_SLACK_TOL:
        raise Infeasible("constraint set is empty")
    if res.x[-1] > _SLACK_TOL:
        return res.x[:n], np.zeros(k, dtype=bool)
    # Some rows cannot be strictly satisfied. Find them by repeatedly maximising
    # the total (capped) slack of the rows not yet shown to be loose.
    undecided = np.ones(k, dtype=bool)
    points = []
    while undecided.any():
        m = int(undecided.sum())
        c = np.concatenate([np.zeros(n), -np.ones(m)])
        T = np.zeros((k, m))
        T[np.flatnonzero(undecided), np.arange(m)] = 1.0
        A_ub = np.hstack([G, T])
        A_eq = np.hstack([poly.A, np.zeros((poly.A.shape[0], m))])
        res = _lp(c, A_ub, h, A_eq, poly.b, [(None, None)] * n + [(0.0, 1.0)] * m)
        if res.status != 0:
            raise Infeasible("constraint set is empty")
        t = res.x[n:]
        loose = t > _SLACK_TOL
        if not loose.any():
            break
        points.append(res.x[:n])
        idx = np.flatnonzero(undecided)[loose]
        undecided[idx] = False
    if points:
        z = np.mean(points, axis=0)
    else:
        z = res.x[:n]
    return z, undecided


def linear_minimum(poly: Polytope, c, box=None) -> tuple[float, np.ndarray]:
    """min c.z over the polytope (optionally intersected with a box)."""
    lb = poly.lb.copy()
    ub = poly.ub.copy()
    if box is not None:
        lb = np.maximum(lb, box[0])
        ub = np.minimum(ub, box[1])
    bounds = [(None if not np.isfinite(l) else l, None if not np.isfinite(u) else u)
              for l, u in zip(lb, ub)]
    res = _lp(np.asarray(c, float), poly.G, poly.h, poly.A, poly.b, bounds)
    if res.status == 2:
        raise Infeasible("constraint set is empty")
    if res.status != 0:
        return -np.inf, None
    return float(res.fun), res.x


def vi_residual(poly: Polytope, z, g) -> float:
    """max(0, -min_{y in P, |y - z|_inf <= 1} <g, y - z>): zero iff z is optimal for gradient g."""
    z = np.asarray(z, float)
    g = np.asarray(g, float)
    if poly.nvar == 0:
        return 0.0
    val, _ = linear_minimum(poly, g, box=(z - 1.0, z + 1.0))
    return max(0.0, float(g @ z) - val)


def vertices(poly: Polytope, tol=1e-9, max_combinations=500_000) -> np.ndarray:
    """All vertices of a bounded polytope by enumerating active sets (small problems only)."""
    G, h = poly.inequalities()
    n = poly.nvar
    A, b = poly.A, poly.b
    rank = np.linalg.matrix_rank(A) if A.size else 0
    need = n - rank
    if need == 0:
        z = np.linalg.lstsq(A, b, rcond=None)[0]
        return z[None, :] if poly.contains(z, tol) else np.zeros((0, n))
    k = G.shape[0]
    from math import comb

    if comb(k, need) > max_combinations:
        raise ValueError("too many active-set combinations for vertex enumeration")
    found = []
    for rows in itertools.combinations(range(k), need):
        M = np.vstack([A, G[list(rows)]])
        if np.linalg.matrix_rank(M) < n:
            continue
        rhs = np.concatenate([b, h[list(rows)]])
        z = np.linalg.lstsq(M, rhs, rcond=None)[0]
        if poly.contains(z, tol):
            found.append(z)
    if not found:
        return np.zeros((0, n))
    pts = np.array(found)
    keys = np.round(pts / tol) * tol
    _, idx = np.unique(keys.round(12), axis=0, return_index=True)
    return pts[np.sort(idx)]
