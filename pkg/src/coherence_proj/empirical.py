"""Finite-sample projection and the estimation error over the divergence class.

The estimation error is eps_m = sup_f |E f - E_S f| over the functions
x -> B(pi(x) || pi0(x)) and x -> B(pi'(x) || pi(x)) with pi, pi' ranging over
the coherent part of the model class. ``epsilon_m`` gives a panel lower
estimate for any generator. ``epsilon_m_upper`` evaluates the supremum for
row-scope quadratic generators on block-separable sets, where every piece is
a quadratic over a polytope and the extremes are found at vertices or by a
convex program.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np

from . import generators as G
from .bregman import divergence, expected_divergence
from .convex_sets import ConvexModelSet
from .errors import DomainError
from .models import as_table, as_weights
from .polytope import vertices
from .projection import RowObjective, bregman_project, improvement, project_weighted
from .reports import BoundReport, Inequality
from .solvers import QuadraticObjective, SolverOptions, minimize


@dataclass(frozen=True)
class PromptSample:
    indices: tuple
    seed: int
    n: int

    @property
    def m(self) -> int:
        return len(self.indices)

    @property
    def weights(self) -> np.ndarray:
        """Empirical distribution: multiplicity / m."""
        return np.bincount(np.asarray(self.indices, dtype=int), minlength=self.n) / self.m

    @classmethod
    def from_counts(cls, counts, seed: int = 0) -> "PromptSample":
        idx = [x for x, c in enumerate(counts) for _ in range(int(c))]
        return cls(tuple(idx), seed, len(counts))


def sample_prompts(dist, m: int, seed: int) -> PromptSample:
    """m i.i.d. prompts from dist, drawn with a PCG64 generator seeded by ``seed``."""
    if m < 1:
        raise ValueError("m must be at least 1")
    w = as_weights(dist)
    rng = np.random.Generator(np.random.PCG64(int(seed)))
    idx = rng.choice(w.size, size=int(m), p=w)
    return PromptSample(tuple(int(i) for i in idx), int(seed), w.size)


def _coherent(set_pi: ConvexModelSet, phi) -> ConvexModelSet:
    return set_pi if phi is None else set_pi.with_coherence(phi)


def unsampled_prompts(sample: PromptSample, set_pi: ConvexModelSet, phi=None) -> np.ndarray:
    """Mask of prompts whose whole coherence block is absent from the sample."""
    red = _coherent(set_pi, phi).reduced
    seen = red.block_weights(sample.weights) > 0
    return ~seen[red.labels]


def empirical_projection(gen, sample: PromptSample, phi, set_pi: ConvexModelSet, pi0,
                         opts: SolverOptions | None = None, dist=None):
    """Minimiser of the sample-weighted objective over the coherent part of the set.

    The sample objective does not see blocks without sampled prompts. Those are
    set in a second solve, with the sampled blocks held fixed, to the projection
    of pi0 restricted to them (population weights from ``dist``, uniform when
    absent).
    """
    opts = opts or SolverOptions()
    coh = _coherent(set_pi, phi)
    t0 = as_table(pi0)
    w_hat = sample.weights
    if gen.scope != "row":
        raise DomainError("empirical projection needs a row-scope generator")
    red = coh.reduced
    table, rep = project_weighted(gen, w_hat, coh, t0, opts)
    seen = red.block_weights(w_hat) > 0
    if seen.all():
        return table, rep
    z = red.restrict(table)
    w_pop = np.ones(coh.n) / coh.n if dist is None else as_weights(dist)
    w2 = np.where(seen[red.labels], 0.0, w_pop)
    obj2 = RowObjective(gen, w2, red.labels, red.nblocks, t0)
    fixed = np.repeat(seen, coh.d)
    values = np.where(fixed, z, 0.0)
    fixed = fixed | obj2.forced
    z2, rep2 = minimize(obj2, red.polytope, opts, fixed, values)
    rep.iterations += rep2.iterations
    rep.wall_ns += rep2.wall_ns
    rep.kkt_residual = max(rep.kkt_residual, rep2.kkt_residual)
    return red.expand(z2), rep


# -- estimation error ---------------------------------------------------------

def _deviation(w, w_hat, values) -> float:
    return abs(math.fsum((w - w_hat) * values))


def panel_members(set_pi: ConvexModelSet, phi, panel_size: int, seed: int) -> list:
    """Random members of the coherent set: Euclidean projections of random tables."""
    coh = _coherent(set_pi, phi)
    rng = np.random.Generator(np.random.PCG64(int(seed)))
    out = []
    for _ in range(panel_size):
        raw = rng.uniform(-0.3, 1.3, size=(coh.n, coh.d))
        out.append(coh.euclidean_project(raw))
    return out


def epsilon_m(gen, dist, sample: PromptSample, set_pi, phi, pi0, panel_size: int = 32,
              extra=(), seed: int = 0) -> float:
    """Lower estimate of eps_m from a finite panel of coherent members.

    The panel is ``panel_size`` random members plus any structured candidates
    passed in ``extra`` (for example the population and sample projections).
    """
    w = as_weights(dist)
    w_hat = sample.weights
    t0 = as_table(pi0)
    members = [as_table(p) for p in extra] + panel_members(set_pi, phi, panel_size, seed)
    best = 0.0
    rows = []
    for p in members:
        try:
            r = np.asarray(divergence(gen, p, t0), dtype=float)
        except DomainError:
            continue
        if np.all(np.isfinite(r)):
            best = max(best, _deviation(w, w_hat, r))
        rows.append(p)
    for p, q in product(rows, rows):
        try:
            r = np.asarray(divergence(gen, q, p), dtype=float)
        except DomainError:
            continue
        if np.all(np.isfinite(r)):
            best = max(best, _deviation(w, w_hat, r))
    return best


def _quad_parts(gen, d):
    if not G.is_quadratic(gen) or gen.scope != "row":
        return None
    return G._quad_matrix(gen) if gen.kind != G.SQUARED_EUCLIDEAN else np.eye(d)


def epsilon_m_upper(gen, dist, sample: PromptSample, set_pi, phi, pi0) -> float:
    """The supremum defining eps_m, for row-scope quadratic generators on block-separable sets.

    Returns +inf for generators whose divergence class is unbounded on the set
    (negative entropy and negative log, whose second argument may approach the
    boundary). Raises DomainError when the set couples blocks.
    """
    coh = _coherent(set_pi, phi)
    d = coh.d
    A = _quad_parts(gen, d)
    if A is None:
        if G.is_steep(gen):
            return math.inf
        raise DomainError("upper estimate needs a row-scope quadratic generator")
    if not coh.is_block_separable():
        raise DomainError("upper estimate needs a block-separable set")
    red = coh.reduced
    t0 = as_table(pi0)
    delta = as_weights(dist) - sample.weights
    hi_sum, lo_sum, pos, neg = [], [], [], []
    opts = SolverOptions(tol_kkt=1e-10)
    for b, poly in enumerate(red.block_polytopes()):
        members = np.flatnonzero(red.labels == b)
        db = math.fsum(delta[members])
        c = (delta[members, None] * t0[members]).sum(axis=0)
        k = 0.5 * math.fsum(delta[x] * float(t0[x] @ A @ t0[x]) for x in members)
        V = vertices(poly)

        def q(z):
            return 0.5 * db * float(z @ A @ z) - float(z @ A @ c) + k

        vert_vals = [q(v) for v in V]
        # max q: convex when db >= 0 (vertex), else minimise -q
        if db >= 0:
            qmax = max(vert_vals)
        else:
            _, rep = minimize(QuadraticObjective(-db * A, A @ c, -k), poly, opts)
            qmax = -rep.objective
        if db <= 0:
            qmin = min(vert_vals)
        else:
            _, rep = minimize(QuadraticObjective(db * A, -(A @ c), k), poly, opts)
            qmin = rep.objective
        hi_sum.append(qmax)
        lo_sum.append(qmin)
        Mb = max(0.5 * float((u - v) @ A @ (u - v)) for u in V for v in V)
        (pos if db > 0 else neg).append(abs(db) * Mb)
    class1 = max(math.fsum(hi_sum), -math.fsum(lo_sum))
    class2 = max(math.fsum(pos), math.fsum(neg))
    return max(class1, class2, 0.0)


def _simplex_grid(d, step, lb, ub, simplex):
    k = int(round(1.0 / step))
    if simplex:
        pts = [np.array(c) * step for c in _compositions(k, d)]
    else:
        axis = np.arange(k + 1) * step
        pts = [np.array(c) for c in product(axis, repeat=d)]
    P = np.array(pts)
    keep = np.all(P >= lb - 1e-12, axis=1) & np.all(P <= ub + 1e-12, axis=1)
    return P[keep]


def _compositions(k, d):
    if d == 1:
        yield (k,)
        return
    for i in range(k + 1):
        for rest in _compositions(k - i, d - 1):
            yield (i,) + rest


def epsilon_m_grid(gen, dist, sample: PromptSample, set_pi, phi, pi0, step: float = 0.02) -> float:
    """Grid maximum of the supremum plus a Lipschitz covering correction (quadratic, d <= 3).

    Caps must lie on the grid, so that rounding a feasible point to the grid
    stays feasible and moves it by at most step * sqrt(d).
    """
    coh = _coherent(set_pi, phi)
    d = coh.d
    A = _quad_parts(gen, d)
    if A is None or d > 3 or coh.affine:
        raise DomainError("grid upper estimate needs a quadratic generator, d <= 3 and no affine rows")
    for _, _, u in coh.caps:
        if abs(u / step - round(u / step)) > 1e-9:
            raise DomainError("caps must be multiples of the grid step")
    red = coh.reduced
    t0 = as_table(pi0)
    delta = as_weights(dist) - sample.weights
    normA = float(np.linalg.norm(A, 2))
    r = step * math.sqrt(d)
    diam = math.sqrt(d)
    hi_sum, lo_sum, pos, neg = [], [], [], []
    for b in range(red.nblocks):
        sl = slice(b * d, (b + 1) * d)
        P = _simplex_grid(d, step, red.polytope.lb[sl], red.polytope.ub[sl], coh.base == "simplex")
        members = np.flatnonzero(red.labels == b)
        vals = np.zeros(len(P))
        lip = 0.0
        for x in members:
            diff = P - t0[x]
            vals += delta[x] * 0.5 * np.einsum("ij,jk,ik->i", diff, A, diff)
            lip += abs(delta[x]) * normA * diam
        hi_sum.append(vals.max() + lip * r)
        lo_sum.append(vals.min() - lip * r)
        D = P[:, None, :] - P[None, :, :]
        Mb = float(0.5 * np.einsum("abj,jk,abk->ab", D, A, D).max()) + 2 * normA * diam * r
        db = math.fsum(delta[members])
        (pos if db > 0 else neg).append(abs(db) * Mb)
    return max(math.fsum(hi_sum), -math.fsum(lo_sum), math.fsum(pos), math.fsum(neg), 0.0)


def lipschitz_error_map(gen, set_pi, phi) -> float:
    """A Lipschitz constant of pi -> E B(pi* || pi) in the L2(P) norm, for quadratic generators.

    The gradient A (pi(x) - pi*(x)) is bounded by lambda_max times the row
    diameter of the base set (sqrt 2 for the simplex, sqrt d for the cube).
    """
    coh = _coherent(set_pi, phi)
    A = _quad_parts(gen, coh.d)
    if A is None:
        raise DomainError("Lipschitz constant available for quadratic generators only")
    lam_max = float(np.linalg.eigvalsh(A)[-1])
    diam = math.sqrt(2.0) if coh.base == "simplex" else math.sqrt(coh.d)
    return lam_max * diam


def empirical_bound_report(gen, dist, sample: PromptSample, set_pi, phi, pi0, pi_star,
                           mu=None, L_star=None, panel_size: int = 16, eps_upper=None,
                           opts=None, seed: int = 0) -> BoundReport:
    """Both sides of the finite-sample inequalities for one sample.

    The inequalities are: the main bound on E B(pi* || pi_S), the improvement
    consequence, both sides of the excess-risk sandwich, the improvement lower
    bound, and (when mu and L_star are given) the strong-convexity bound.
    """
    w = as_weights(dist)
    coh = _coherent(set_pi, phi)
    pi_hat, _ = bregman_project(gen, w, coh, pi0, opts)
    pi_s, _ = empirical_projection(gen, sample, None, coh, pi0, opts, dist=w)
    eps_lo = epsilon_m(gen, w, sample, coh, None, pi0, panel_size, extra=(pi_hat, pi_s, pi_star),
                       seed=seed)
    source = "panel"
    if eps_upper is None:
        try:
            eps_upper = epsilon_m_upper(gen, w, sample, coh, None, pi0)
            source = "panel+vertex"
        except DomainError:
            eps_upper = None
    B = expected_divergence
    s_hat = B(gen, w, pi_star, pi_hat)
    s_s = B(gen, w, pi_star, pi_s)
    s_0 = B(gen, w, pi_star, pi0)
    h0 = B(gen, w, pi_hat, pi0)
    hs = B(gen, w, pi_s, pi0)
    ineqs = [
        Inequality("main", s_s, s_hat + s_0 - h0, 6.0),
        Inequality("improvement_consequence", s_s - s_0, s_0 - 2.0 * h0, 6.0),
        Inequality("two_sided_left", h0, hs, 0.0),
        Inequality("two_sided_right", hs, h0, 2.0),
        # Improv(pi_S) >= h0 - s_hat - 6 eps  written as  -Improv <= ...
        Inequality("improvement_lower", -improvement(gen, w, pi_star, pi0, pi_s), -(h0 - s_hat), 6.0),
    ]
    if mu is not None and L_star is not None:
        imp_hat = improvement(gen, w, pi_star, pi0, pi_hat)
        ineqs.append(Inequality("strong_convexity", -improvement(gen, w, pi_star, pi0, pi_s),
                                -imp_hat, 2.0 * L_star / math.sqrt(mu), 0.5))
    main = ineqs[0]
    excess = main.lhs - main.base
    ref = eps_upper if eps_upper is not None and math.isfinite(eps_upper) else eps_lo
    if excess <= 0:
        c = 0.0
    elif ref > 0:
        c = excess / ref
    else:
        c = math.inf
    return BoundReport(eps_lo, eps_upper, source, ineqs, smallest_constant=c)


__all__ = ["PromptSample", "sample_prompts", "empirical_projection", "unsampled_prompts",
           "epsilon_m", "epsilon_m_upper", "epsilon_m_grid", "lipschitz_error_map",
           "empirical_bound_report", "panel_members"]
