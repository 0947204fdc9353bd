"""Bregman projections onto model classes, the coherent projections and their diagnostics."""

from __future__ import annotations

import math

import numpy as np

from . import generators as G
from .bregman import divergence, expected_divergence
from .coherence import (InvarianceMap, _require_involution, _row_norm_sq, lambda_weights,
                        orbit_average)
from .convex_sets import ConvexModelSet
from .errors import DomainError, MissingConstant
from .models import as_table, as_weights
from .polytope import linear_minimum
from .solvers import QuadraticObjective, SolveReport, SolverOptions, minimize

_PSD_RIDGE = 1e-12


class RowObjective:
    """z -> sum_x w_x B_F(z_{block(x)} || source_x) over block-representative rows z."""

    def __init__(self, gen, weights, labels, nblocks, source):
        self.gen = gen
        self.w = np.asarray(weights, dtype=float)
        self.labels = np.asarray(labels)
        self.nb = nblocks
        self.src = as_table(source)
        self.d = self.src.shape[1]
        self.live = self.w > 0
        self.Wb = np.zeros(nblocks)
        np.add.at(self.Wb, self.labels, self.w)
        S = np.zeros((nblocks, self.d))
        src = self.src[self.live]
        if G.is_steep(gen):
            if gen.kind == G.NEGATIVE_LOG and np.any(~(src > 0)):
                raise DomainError("Itakura-Saito projection needs a strictly positive source")
            if np.any(src < 0):
                raise DomainError("source must be nonnegative for a steep generator")
            pos = src > 0
            grads = np.zeros_like(src)
            grads[pos] = 1.0 + np.log(src[pos]) if gen.kind == G.NEGATIVE_ENTROPY else -1.0 / src[pos]
        else:
            grads = G.gradient(gen, src)
        np.add.at(S, self.labels[self.live], self.w[self.live, None] * grads)
        self.S = S
        # coordinates that must be zero: some weighted source row is zero there
        forced = np.zeros((nblocks, self.d), dtype=bool)
        if gen.kind == G.NEGATIVE_ENTROPY:
            np.logical_or.at(forced, self.labels[self.live], src == 0)
        self.forced = forced.ravel()
        ridge = _PSD_RIDGE if (G.is_quadratic(gen) and not G.is_legendre(gen)) else 0.0
        self.ridge = ridge

    def _rows(self, z):
        return np.asarray(z, dtype=float).reshape(self.nb, self.d)

    def in_domain(self, z):
        return G.in_domain(self.gen, z)

    def value(self, z):
        Z = self._rows(z)
        full = Z[self.labels[self.live]]
        rows = divergence(self.gen, full, self.src[self.live])
        rows = np.atleast_1d(rows)
        if np.any(np.isinf(rows)):
            return math.inf
        out = math.fsum(self.w[self.live] * rows)
        if self.ridge:
            out += 0.5 * self.ridge * float(z @ z)
        return out

    def grad(self, z):
        Z = self._rows(z)
        if G.is_steep(self.gen):
            pos = Z > 0
            gz = np.zeros_like(Z)
            if self.gen.kind == G.NEGATIVE_ENTROPY:
                gz[pos] = 1.0 + np.log(Z[pos])
            else:
                gz[pos] = -1.0 / Z[pos]
        else:
            gz = G.gradient(self.gen, Z)
        g = self.Wb[:, None] * gz - self.S
        if self.gen.kind == G.NEGATIVE_ENTROPY:
            g[Z <= 0] = 0.0
        g = g.ravel()
        if self.ridge:
            g = g + self.ridge * z
        return g

    def hess(self, z):
        Z = self._rows(z)
        n = Z.size
        if G.is_separable(self.gen):
            safe = np.where(Z > 0, Z, 1.0) if G.is_steep(self.gen) else Z
            hd = self.Wb[:, None] * G.hessian_diag(self.gen, safe)
            H = np.diag(hd.ravel())
        else:
            H = np.zeros((n, n))
            A = self.gen.matrix
            for b in range(self.nb):
                sl = slice(b * self.d, (b + 1) * self.d)
                H[sl, sl] = self.Wb[b] * A
        if self.ridge:
            H = H + self.ridge * np.eye(n)
        return H


def model_objective(gen, labels, nblocks, d, source):
    """Quadratic objective for a generator acting on the flattened model vector."""
    n = len(labels)
    E = np.zeros((n * d, nblocks * d))
    for x, b in enumerate(labels):
        E[x * d:(x + 1) * d, b * d:(b + 1) * d] = np.eye(d)
    A = G._quad_matrix(gen)
    if A.shape[0] != n * d:
        raise DomainError(f"model-scope generator has dimension {A.shape[0]}, model has {n * d}")
    v0 = as_table(source).ravel()
    Q = E.T @ A @ E
    ridge = _PSD_RIDGE if not G.is_legendre(gen) else 0.0
    Q = Q + ridge * np.eye(Q.shape[0])
    return QuadraticObjective(Q, -E.T @ (A @ v0), 0.5 * float(v0 @ A @ v0))


def project_weighted(gen, weights, set_: ConvexModelSet, source, opts: SolverOptions | None = None):
    """Projection with raw nonnegative prompt weights (zero weights allowed)."""
    opts = opts or SolverOptions()
    if set_.sphere:
        raise DomainError("the sphere constraint is handled only by the kernel example")
    src = as_table(source)
    if src.shape != (set_.n, set_.d):
        raise DomainError(f"source shape {src.shape} does not match set ({set_.n}, {set_.d})")
    w = np.asarray(weights, dtype=float)
    red = set_.reduced
    if gen.scope == "model":
        obj = model_objective(gen, red.labels, red.nblocks, set_.d, src)
        forced = np.zeros(red.nvar, dtype=bool)
    else:
        obj = RowObjective(gen, w, red.labels, red.nblocks, src)
        forced = obj.forced
    if set_.contains(src, 1e-13) and np.all(w > 0 if gen.scope == "row" else True):
        if G.in_domain(gen, src):
            return src.copy(), SolveReport("optimal", 0, 0.0, 0.0, 0)
    z, rep = minimize(obj, red.polytope, opts, forced, np.zeros(red.nvar))
    if gen.scope == "row":
        rep.objective = obj.value(z) - (0.5 * obj.ridge * float(z @ z) if obj.ridge else 0.0)
    return red.expand(z), rep


def bregman_project(gen, dist, set_: ConvexModelSet, source, opts: SolverOptions | None = None):
    """argmin over the set of E_x B_F(pi(x) || source(x)); returns (table, SolveReport)."""
    w = as_weights(dist) if gen.scope == "row" else np.ones(set_.n)
    return project_weighted(gen, w, set_, source, opts)


def direct_projection(gen, dist, phi: InvarianceMap, set_pi: ConvexModelSet, pi0, opts=None):
    return bregman_project(gen, dist, set_pi.with_coherence(phi), pi0, opts)


def two_step_projection(gen, dist, phi: InvarianceMap, set_pi: ConvexModelSet, pi0, opts=None):
    """Orbit centroid first, then projection of the centroid onto the coherent part of the set."""
    if not G.has_orthant_domain(gen):
        raise DomainError("two-step projection needs a generator whose domain contains the orthant")
    inter = orbit_average(gen, dist, phi, pi0)
    final, rep = bregman_project(gen, dist, set_pi.with_coherence(phi), inter, opts)
    return final, rep, inter


def equivalence_residual(gen, dist, phi, set_pi, pi0, opts=None) -> float:
    if not (G.is_separable(gen) or G.is_quadratic(gen)):
        raise DomainError("equivalence needs a separable or quadratic generator")
    direct, _ = direct_projection(gen, dist, phi, set_pi, pi0, opts)
    two, _, _ = two_step_projection(gen, dist, phi, set_pi, pi0, opts)
    return float(np.max(np.abs(direct - two)))


def improvement(gen, dist, pi_star, pi0, pi) -> float:
    """E B(pi* || pi0) - E B(pi* || pi)."""
    return expected_divergence(gen, dist, pi_star, pi0) - expected_divergence(gen, dist, pi_star, pi)


def pythagorean_residual(gen, dist, set_, pi_ref, projected, source) -> float:
    """B(ref || source) - B(ref || projected) - B(projected || source); >= 0 on convex sets."""
    return (expected_divergence(gen, dist, pi_ref, source)
            - expected_divergence(gen, dist, pi_ref, projected)
            - expected_divergence(gen, dist, projected, source))


def two_step_delta(gen, dist, phi, pi0) -> float:
    """Jensen gap of the conjugate across each orbit.

    Written as sum_x P(x) F*(grad F(pi0(x))) - sum_x P(x) F*(grad F(centroid(x))),
    which equals the lambda-weighted form for involutions and also covers longer
    orbits.
    """
    w = as_weights(dist)
    t = as_table(pi0)
    bar = orbit_average(gen, w, phi, t)
    a = G.conjugate_at_primal(gen, t)
    b = G.conjugate_at_primal(gen, bar)
    return math.fsum(w * a) - math.fsum(w * b)


def hellinger_sq(p, q) -> np.ndarray:
    """1 - sum_k sqrt(p_k q_k) along the last axis."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    return 1.0 - np.sqrt(p * q).sum(axis=-1)


def hellinger_improvement_floor(dist, phi: InvarianceMap, pi0) -> float:
    """E[2 min(lambda, 1 - lambda) H^2(pi0(x), pi0(phi(x)))]."""
    t = as_table(pi0)
    if np.any(~(t > 0)):
        raise DomainError("Hellinger floor needs strictly positive baseline rows")
    w = as_weights(dist)
    lam = lambda_weights(w, phi)
    h = hellinger_sq(t, t[phi.array])
    return math.fsum(w * 2.0 * np.minimum(lam, 1.0 - lam) * h)


def strong_convexity_floor(gen, dist, phi: InvarianceMap, pi0) -> float:
    """(mu / 2) E[lambda (1 - lambda) ||pi0(x) - pi0(phi(x))||^2] in the generator's norm."""
    if gen.mu is None or gen.norm_tag is None:
        raise MissingConstant("the generator has no declared strong-convexity constant")
    _require_involution(phi)
    t = as_table(pi0)
    w = as_weights(dist)
    lam = lambda_weights(w, phi)
    return 0.5 * gen.mu * math.fsum(w * lam * (1 - lam) * _row_norm_sq(t - t[phi.array], gen.norm_tag))


def non_realizable_bound(gen, dist, phi, set_pi, pi0, pi_star, opts=None) -> dict:
    """Both sides of E B(pi*||pi_hat) - E B(pi*||pi0) <= -D + (2L/mu) sqrt(eps D).

    ``eps`` is the distance from pi* to its projection onto the coherent part of
    the set and ``D`` the divergence from the projection to the baseline.
    """
    if gen.mu is None or gen.smoothness is None:
        raise MissingConstant("the bound needs both mu and the smoothness constant")
    coh = set_pi.with_coherence(phi)
    pi_hat, _ = bregman_project(gen, dist, coh, pi0, opts)
    pi_bar, _ = bregman_project(gen, dist, coh, pi_star, opts)
    eps = expected_divergence(gen, dist, pi_star, pi_bar)
    D = expected_divergence(gen, dist, pi_hat, pi0)
    lhs = expected_divergence(gen, dist, pi_star, pi_hat) - expected_divergence(gen, dist, pi_star, pi0)
    rhs = -D + 2.0 * gen.smoothness / gen.mu * math.sqrt(max(eps, 0.0) * max(D, 0.0))
    return {"lhs": lhs, "rhs": rhs, "eps": eps, "D": D, "pi_hat": pi_hat, "pi_bar": pi_bar}


# -- maximin ------------------------------------------------------------------

def inner_min_improvement(gen, dist, phi, set_pi, pi0, candidate) -> float:
    """min over coherent pi* in the set of Improv_{pi*}(candidate).

    Improv is affine in pi*, so the minimum is a linear program over the
    reduced polytope. Candidates with zero entries under a steep generator are
    evaluated against the polytope's vertices instead.
    """
    w = as_weights(dist)
    t0 = as_table(pi0)
    c = as_table(candidate)
    coh = set_pi.with_coherence(phi)
    red = coh.reduced
    if G.is_steep(gen) and (np.any(c <= 0) or np.any(t0 <= 0)):
        from .polytope import vertices

        best = math.inf
        for z in vertices(red.polytope):
            star = red.expand(z)
            best = min(best, improvement(gen, w, star, t0, c))
        return best
    # Improv = sum_x w_x [F(c_x) - F(t0_x) + <g0_x, t0_x> - <gc_x, c_x> + <gc_x - g0_x, pi*_x>]
    gc = G.gradient(gen, c)
    g0 = G.gradient(gen, t0)
    const = math.fsum(w * (G.value(gen, c) - G.value(gen, t0) + (g0 * t0).sum(1) - (gc * c).sum(1)))
    coef = w[:, None] * (gc - g0)
    cz = np.zeros((red.nblocks, coh.d))
    np.add.at(cz, red.labels, coef)
    val, _ = linear_minimum(red.polytope, cz.ravel())
    return const + val


def maximin_grid_best(gen, dist, phi, set_pi, pi0, step=0.005) -> tuple[float, np.ndarray]:
    """Best inner minimum over a per-block grid of coherent candidates (d = 2, block-separable sets)."""
    w = as_weights(dist)
    t0 = as_table(pi0)
    coh = set_pi.with_coherence(phi)
    if coh.d != 2 or coh.base != "simplex" or not coh.is_block_separable():
        raise DomainError("grid maximin is implemented for block-separable simplex sets with d = 2")
    red = coh.reduced
    grid = np.linspace(0.0, 1.0, int(round(1.0 / step)) + 1)
    total = []
    best = np.zeros((red.nblocks, 2))
    for b in range(red.nblocks):
        members = np.flatnonzero(red.labels == b)
        lo0, hi0 = 0.0, 1.0
        ub = red.polytope.ub[b * 2:(b + 1) * 2]
        hi0 = min(hi0, ub[0])
        lo0 = max(lo0, 1.0 - ub[1])
        verts = [np.array([lo0, 1 - lo0]), np.array([hi0, 1 - hi0])]
        pts = grid[(grid >= lo0 - 1e-15) & (grid <= hi0 + 1e-15)]
        pts = np.unique(np.concatenate([pts, [lo0, hi0]]))
        vals = []
        for p in pts:
            z = np.array([p, 1 - p])
            inner = math.inf
            for v in verts:
                s = 0.0
                for x in members:
                    s += w[x] * (divergence(gen, v, t0[x]) - divergence(gen, v, z))
                inner = min(inner, s)
            vals.append(inner)
        k = int(np.argmax(vals))
        total.append(vals[k])
        best[b] = [pts[k], 1 - pts[k]]
    return math.fsum(total), best[red.labels]


def maximin_gap(gen, dist, phi, set_pi, pi0, step=0.005, opts=None) -> dict:
    """Inner minimum at the two-step output minus the grid-best inner minimum."""
    if not G.is_jointly_convex(gen):
        raise DomainError("maximin optimality needs a jointly convex divergence")
    two, _, inter = two_step_projection(gen, dist, phi, set_pi, pi0, opts)
    val_two = inner_min_improvement(gen, dist, phi, set_pi, pi0, two)
    val_grid, grid_best = maximin_grid_best(gen, dist, phi, set_pi, pi0, step)
    # The two-step improvement guarantee is a floor for the inner minimum.
    floor = expected_divergence(gen, dist, two, inter) + expected_divergence(gen, dist, inter, pi0)
    return {"two_step": two, "value_two_step": val_two, "value_grid": val_grid,
            "grid_best": grid_best, "gap": val_two - val_grid, "floor": floor}


__all__ = ["RowObjective", "bregman_project", "direct_projection", "two_step_projection",
           "equivalence_residual", "improvement", "pythagorean_residual", "two_step_delta",
           "hellinger_sq", "hellinger_improvement_floor", "strong_convexity_floor",
           "non_realizable_bound", "inner_min_improvement", "maximin_grid_best", "maximin_gap",
           "project_weighted", "model_objective"]
