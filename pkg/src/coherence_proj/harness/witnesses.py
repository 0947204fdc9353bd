"""Counterexamples and impossibility witnesses for uniform improvement."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.optimize import minimize as scipy_minimize
from scipy.stats import qmc

from .. import generators as G
from ..bregman import divergence, expected_divergence
from ..coherence import InvarianceMap, arithmetic_orbit_average, level_set_partition
from ..convex_sets import CUBE, ConvexModelSet
from ..instances import random_dist, random_involution, random_rows, random_spd, rng_for
from ..models import as_table, as_weights
from ..polytope import Polytope, vertices
from ..projection import bregman_project
from ..reports import SuiteReport, WitnessReport
from ..solvers import QuadraticObjective, SolverOptions, minimize

# -- minimax failure ---------------------------------------------------------

MINIMAX_PI0 = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
MINIMAX_REFERENCE = np.array([[0.0, 1.0, 0.0], [0.0, 1.0, 0.0]])


def minimax_generators(M: float):
    """The two diagonal quadratics on the concatenated 6-vector."""
    A1 = np.diag([M, 1.0, 1.0, 1.0, 1.0, 1.0])
    A2 = np.diag([1.0, 1.0, 1.0, 1.0, M, 1.0])
    return G.quadratic_coupled(A1), G.quadratic_coupled(A2)


def _minimax_1d(M: float) -> float:
    """argmin over q1 in [0, 1/2] of max(f1, f2) by enumerating candidate points.

    f1 = ((M+1)(q-1)^2 + 2q^2)/2 and f2 = (2(q-1)^2 + (M+1)q^2)/2 on the face
    q3 = 0. The minimum of a max of two convex quadratics on an interval is at
    an endpoint, a stationary point of either piece, or a crossing point.
    """
    def f1(q):
        return 0.5 * ((M + 1) * (q - 1) ** 2 + 2 * q * q)

    def f2(q):
        return 0.5 * (2 * (q - 1) ** 2 + (M + 1) * q * q)

    cands = [0.0, 0.5, (M + 1) / (M + 3), 2.0 / (M + 3), 0.5]  # crossing: (q-1)^2 = q^2
    cands = [q for q in cands if 0.0 <= q <= 0.5]
    return min(cands, key=lambda q: (max(f1(q), f2(q)), q))


def _minimax_solve(M: float) -> np.ndarray:
    """Solve min over coherent capped rows q of max(B1, B2) with the generic solver.

    B1 - B2 = (M-1)/2 (q2 - q1)(2 - q1 - q2), so B1 is the larger branch on
    {q1 <= q2} and B2 on {q1 >= q2}. Each branch is a convex QP over a polytope.
    """
    g1, g2 = minimax_generators(M)
    a = MINIMAX_PI0.ravel()
    E = np.vstack([np.eye(3), np.eye(3)])  # coherent table from one row
    best = None
    for gen, sign in ((g1, 1.0), (g2, -1.0)):
        A = gen.matrix
        Q = E.T @ A @ E
        obj = QuadraticObjective(Q, -E.T @ (A @ a), 0.5 * float(a @ A @ a))
        poly = Polytope.build(3, A=[[1.0, 1.0, 1.0]], b=[1.0], G=[[sign, -sign, 0.0]], h=[0.0],
                              lb=np.zeros(3), ub=[0.5, np.inf, np.inf])
        q, _ = minimize(obj, poly, SolverOptions(tol_kkt=1e-10))
        table = np.vstack([q, q])
        val = max(divergence(g1, table.ravel(), a), divergence(g2, table.ravel(), a))
        if best is None or val < best[0] - 1e-15:
            best = (val, table)
    return best[1]


def minimax_counterexample(M: float) -> WitnessReport:
    """Reproduce the minimax failure: the F2 gap equals (M - 5)/8."""
    if not M > 1:
        raise ValueError("M must exceed 1")
    q1 = _minimax_1d(M)
    closed = np.array([[q1, 1 - q1, 0.0], [q1, 1 - q1, 0.0]])
    solved = _minimax_solve(M)
    expected = np.array([[0.5, 0.5, 0.0], [0.5, 0.5, 0.0]])
    _, g2 = minimax_generators(M)
    ref = MINIMAX_REFERENCE.ravel()
    gap = float(divergence(g2, ref, solved.ravel()) - divergence(g2, ref, MINIMAX_PI0.ravel()))
    formula = (M - 5.0) / 8.0
    detail = {
        "M": M,
        "pi_mm": solved,
        "pi_mm_closed_form": closed,
        "solve_error": float(np.max(np.abs(solved - expected))),
        "closed_form_error": float(np.max(np.abs(closed - expected))),
        "gap_formula": formula,
        "gap_error": abs(gap - formula),
    }
    return WitnessReport("minimax_counterexample", gap > 0, gap, detail)


# -- orbit averaging ----------------------------------------------------------

JOINTLY_CONVEX = (G.SQUARED_EUCLIDEAN, G.MAHALANOBIS, G.NEGATIVE_ENTROPY, G.DIAGONAL_QUADRATIC)


def _orbit_instance(rng, n, d):
    phi = random_involution(rng, n)
    dist = random_dist(rng, n)
    pi0 = random_rows(rng, n, d, floor=0.02)
    avg = arithmetic_orbit_average(dist, phi, pi0)
    caps = []
    for _ in range(2):
        x, k = int(rng.integers(n)), int(rng.integers(d))
        u = math.ceil((avg[x, k] + 0.01) * 20) / 20
        if u < 1:
            caps.append((x, k, u))
    set_pi = ConvexModelSet(n, d, "simplex", tuple(caps))
    return dist, phi, pi0, set_pi, avg


def orbit_average_universal_check(family, instances: int, seed: int, panel: int = 6,
                                  d: int | None = None) -> SuiteReport:
    """E B(pi* || orbit average) <= E B(pi* || pi0) for every generator and coherent pi*.

    Each instance draws pi0, an involution and a capped set that contains the
    orbit average. Generators outside the jointly convex kinds are run as
    negative controls: their violations are reported but not counted.
    """
    rep = SuiteReport("orbit-average", seed)
    worst = {}
    for i in range(instances):
        rng = rng_for(seed, 7, i)
        n = int(rng.integers(2, 7))
        dd = d or int(rng.integers(2, 5))
        dist, phi, pi0, set_pi, avg = _orbit_instance(rng, n, dd)
        coh = set_pi.with_coherence(phi)
        stars = [avg] + [coh.euclidean_project(rng.uniform(-0.2, 1.2, (n, dd))) for _ in range(panel - 1)]
        for gi, gen in enumerate(family):
            gen = _sized(gen, dd, rng)
            control = gen.kind not in JOINTLY_CONVEX
            key = f"{gi}:{gen.kind}"
            for s in stars:
                if G.is_steep(gen) and np.any(s <= 0):
                    continue
                diff = expected_divergence(gen, dist, s, avg) - expected_divergence(gen, dist, s, pi0)
                worst.setdefault(key, [-math.inf, 0, control])
                worst[key][0] = max(worst[key][0], diff)
                worst[key][1] += int(diff > 1e-9)
    for key, (w, nviol, control) in sorted(worst.items()):
        if control:
            rep.add(f"{key} violations (negative control)", nviol > 0, w, 1e-9,
                    negative_control=True, violations=nviol)
        else:
            rep.add(f"{key} no violations", nviol == 0, w, 1e-9, violations=nviol)
    return rep


def _sized(gen, d, rng):
    """Resample a matrix generator at dimension d (family entries act as kind templates)."""
    if gen.kind == G.MAHALANOBIS and gen.dim != d:
        return G.mahalanobis(random_spd(rng, d))
    if gen.kind == G.QUADRATIC_COUPLED and gen.dim != d:
        B = rng.normal(size=(d, d - 1))
        return G.quadratic_coupled(B @ B.T)
    if gen.kind == G.DIAGONAL_QUADRATIC and gen.dim != d:
        return G.diagonal_quadratic(rng.uniform(0.5, 3.0, d))
    return gen


# -- reversed Jensen ----------------------------------------------------------

@dataclass
class JensenWitness:
    q1: np.ndarray
    q2: np.ndarray
    p_star: np.ndarray
    lam: float
    gap: float
    recheck_gap: float
    detail: dict = field(default_factory=dict)


def _to_simplex(u, d, margin=1e-3):
    """Map points of the unit cube [0,1]^(d-1) into the interior of the simplex."""
    u = np.atleast_2d(u)
    rest = np.ones(u.shape[0])
    cols = []
    for j in range(d - 1):
        v = rest * u[:, j]
        cols.append(v)
        rest = rest - v
    cols.append(rest)
    p = np.stack(cols, axis=1)
    return (1 - d * margin) * p + margin


def _jensen_gap(gen, p, q1, q2, lam):
    mix = lam[:, None] * q1 + (1 - lam[:, None]) * q2
    return (divergence(gen, p, mix) - lam * divergence(gen, p, q1)
            - (1 - lam) * divergence(gen, p, q2))


def _fresh_divergence(gen, p, q) -> float:
    """B_F(p || q) with scalar arithmetic, independent of the vectorised path."""
    p = [float(v) for v in p]
    q = [float(v) for v in q]
    k = gen.kind
    if k == G.NEGATIVE_LOG:
        return math.fsum(a / b - math.log(a / b) - 1.0 for a, b in zip(p, q))
    if k == G.NEGATIVE_ENTROPY:
        return math.fsum((a * math.log(a / b) if a > 0 else 0.0) - a + b for a, b in zip(p, q))
    diff = [a - b for a, b in zip(p, q)]
    if k == G.SQUARED_EUCLIDEAN:
        return 0.5 * math.fsum(v * v for v in diff)
    if k == G.DIAGONAL_QUADRATIC:
        return 0.5 * math.fsum(float(w) * v * v for w, v in zip(gen.matrix, diff))
    A = gen.matrix
    return 0.5 * math.fsum(diff[i] * float(A[i][j]) * diff[j]
                           for i in range(len(diff)) for j in range(len(diff)))


def reversed_jensen_witness(gen, trials: int, seed: int, d: int = 2, tol: float = 1e-9):
    """Search for B(p || l q1 + (1-l) q2) > l B(p || q1) + (1-l) B(p || q2) + tol.

    Scrambled Sobol points over (p, q1, q2, lambda), then 200 Nelder-Mead steps
    from the best point. Returns a JensenWitness re-verified with scalar
    arithmetic, or None.
    """
    dim = 3 * (d - 1) + 1
    sob = qmc.Sobol(dim, scramble=True, seed=np.random.default_rng(seed))
    m = max(1, math.ceil(math.log2(max(trials, 1))))
    pts = sob.random_base2(m)[:trials]

    def unpack(u):
        u = np.atleast_2d(u)
        k = d - 1
        p = _to_simplex(u[:, :k], d)
        q1 = _to_simplex(u[:, k:2 * k], d)
        q2 = _to_simplex(u[:, 2 * k:3 * k], d)
        lam = 0.001 + 0.998 * u[:, -1]
        return p, q1, q2, lam

    best_gap, best_u = -math.inf, None
    for start in range(0, len(pts), 8192):
        chunk = pts[start:start + 8192]
        g = _jensen_gap(gen, *unpack(chunk))
        j = int(np.argmax(g))
        if g[j] > best_gap:
            best_gap, best_u = float(g[j]), chunk[j]
    if best_u is None:
        return None

    def neg(u):
        u = np.clip(u, 0.0, 1.0)
        return -float(_jensen_gap(gen, *unpack(u))[0])

    res = scipy_minimize(neg, best_u, method="Nelder-Mead", options={"maxiter": 200})
    u = np.clip(res.x, 0.0, 1.0)
    if -res.fun > best_gap:
        best_gap, best_u = -float(res.fun), u
    if best_gap <= tol:
        return None
    p, q1, q2, lam = (v[0] for v in unpack(best_u))
    lam = float(lam)
    mix = [lam * a + (1 - lam) * b for a, b in zip(q1, q2)]
    recheck = (_fresh_divergence(gen, p, mix) - lam * _fresh_divergence(gen, p, q1)
               - (1 - lam) * _fresh_divergence(gen, p, q2))
    if recheck <= tol:
        return None
    return JensenWitness(q1, q2, p, lam, best_gap, recheck, {"trials": trials, "seed": seed})


# -- orbit infeasibility ------------------------------------------------------

def psd_panel(d: int) -> list:
    """Rank-one PSD matrices e_i e_i^T and (e_i + e_j)(e_i + e_j)^T; they span the symmetric matrices."""
    eye = np.eye(d)
    out = [np.outer(eye[i], eye[i]) for i in range(d)]
    for i, j in combinations(range(d), 2):
        v = eye[i] + eye[j]
        out.append(np.outer(v, v))
    return out


def _block_grid(poly: Polytope, d: int, base: str, step: float) -> np.ndarray:
    k = int(round(1.0 / step))
    axis = np.arange(k + 1) * step
    grids = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)
    if base != CUBE:
        grids = grids[np.abs(grids.sum(axis=1) - 1.0) <= 1e-9]
    keep = [z for z in grids if poly.contains(z, 1e-9)]
    if keep:
        return np.array(keep)
    V = vertices(poly)
    mids = [(a + b) / 2 for a, b in combinations(V, 2)]
    return np.array(list(V) + mids)


def _orbit_margin(q, rows, weights, mats, stars) -> tuple[float, dict]:
    """max over (M, p*) of B_M(p* || q) - sum_i w_i B_M(p* || rows_i), for normalised weights."""
    best, arg = -math.inf, {}
    for mi, M in enumerate(mats):
        for si, p in enumerate(stars):
            lhs = 0.5 * float((p - q) @ M @ (p - q))
            rhs = 0.5 * math.fsum(w * float((p - a) @ M @ (p - a)) for w, a in zip(weights, rows))
            if lhs - rhs > best:
                best, arg = lhs - rhs, {"matrix": mi, "p_star": si}
    return best, arg


def orbit_infeasibility_witness(set_pi: ConvexModelSet, dist, phi: InvarianceMap, pi0,
                                step: float = 0.05, tol: float = 1e-12) -> WitnessReport:
    """Show that no coherent member of the set improves on pi0 for all quadratic generators.

    Applies when the orbit average is outside the set. For each orbit, every
    candidate row on a grid of the coherent set is matched with a distribution
    on the orbit, a matrix from the PSD panel and a coherent target p* (a vertex
    of the base set) that make the candidate worse than pi0. The distribution
    is taken from the given one first, then from one-hot and uniform weights.
    The reported margin is the smallest such violation over candidates,
    maximised over orbits: a margin above ``tol`` means every candidate fails.
    """
    t0 = as_table(pi0)
    w = as_weights(dist)
    avg = arithmetic_orbit_average(w, phi, t0)
    if set_pi.contains(avg, 1e-9):
        return WitnessReport("orbit_infeasibility", False, 0.0, {"applicable": False})
    coh = set_pi.with_coherence(phi)
    if not coh.is_block_separable():
        raise ValueError("the candidate grid needs a block-separable set")
    red = coh.reduced
    d = coh.d
    mats = psd_panel(d)
    stars = list(np.eye(d)) if coh.base != CUBE else [np.array(v, float) for v in np.ndindex(*([2] * d))]
    polys = red.block_polytopes()
    orbit_rows = []
    for b, poly in enumerate(polys):
        members = np.flatnonzero(red.labels == b)
        rows = t0[members]
        wb = w[members]
        panels = [wb / wb.sum()] if wb.sum() > 0 else []
        panels += list(np.eye(len(members))) + [np.full(len(members), 1.0 / len(members))]
        cands = _block_grid(poly, d, coh.base, step)
        worst_q, worst_m, worst_arg = None, math.inf, {}
        for q in cands:
            m_q, arg_q = -math.inf, {}
            for pi, wts in enumerate(panels):
                m, arg = _orbit_margin(q, rows, wts, mats, stars)
                if m > m_q:
                    m_q, arg_q = m, dict(arg, weights=pi)
                if m_q > tol:
                    break  # this distribution already witnesses
            if m_q < worst_m:
                worst_q, worst_m, worst_arg = q, m_q, arg_q
        orbit_rows.append({"block": b, "members": members.tolist(), "candidates": len(cands),
                           "min_margin": worst_m, "least_violated": worst_q, "witness": worst_arg})
    margin = max(r["min_margin"] for r in orbit_rows)
    return WitnessReport("orbit_infeasibility", margin > tol, margin,
                         {"applicable": True, "orbit_average": avg, "orbits": orbit_rows})


def infeasibility_instance():
    """Two prompts swapped by the involution; rows average to 0.6 in the capped coordinate."""
    phi = InvarianceMap.from_pairs(2, [(0, 1)])
    dist = np.array([0.5, 0.5])
    pi0 = np.array([[0.9, 0.1], [0.3, 0.7]])
    set_pi = ConvexModelSet(2, 2, "simplex", ((0, 0, 0.5), (1, 0, 0.5)))
    return set_pi, dist, phi, pi0


# -- single-generator characterisation -----------------------------------------

@dataclass
class CharacterizationResult:
    residual: float
    inequality_holds: bool
    worst_violation: float
    partition: tuple
    psi_inf: float | None = None


def strong_improvement_violation(gen, dist, mechanism_output, pi0, panel) -> float:
    """max over pi* in the panel of E B(pi*||m) - E B(pi*||pi0) + E B(m||pi0)."""
    base = expected_divergence(gen, dist, mechanism_output, pi0)
    worst = -math.inf
    for s in panel:
        v = expected_divergence(gen, dist, s, mechanism_output) - expected_divergence(gen, dist, s, pi0) + base
        worst = max(worst, v)
    return worst


def strictness_functional(gen, dist, mechanism_output, pi0, pi) -> float:
    """E <grad F(m) - grad F(pi0), pi - m>."""
    m = as_table(mechanism_output)
    V = G.gradient(gen, m) - G.gradient(gen, as_table(pi0))
    return math.fsum(as_weights(dist) * (V * (as_table(pi) - m)).sum(axis=1))


def strictness_inf(gen, dist, set_pi: ConvexModelSet, pi0, mechanism_output, step: float = 0.05):
    """Grid estimate of inf Psi over members of the set that break the output's level-set blocks.

    Only for small instances (n * d <= 6 grid cells per axis product); returns
    None when the competitor set is empty on the grid.
    """
    m = as_table(mechanism_output)
    n, d = m.shape
    if n * d > 6:
        raise ValueError("grid estimate limited to n * d <= 6")
    part = level_set_partition(m, 1e-9)
    k = int(round(1.0 / step))
    axis = np.arange(k + 1) * step
    pts = np.stack(np.meshgrid(*([axis] * (n * d)), indexing="ij"), axis=-1).reshape(-1, n, d)
    best = None
    V = G.gradient(gen, m) - G.gradient(gen, as_table(pi0))
    w = as_weights(dist)
    lab = part.labels
    for p in pts:
        if not set_pi.contains(p, 1e-9):
            continue
        if all(np.allclose(p[lab == b], p[lab == b][0], atol=1e-12) for b in range(len(part.blocks))):
            continue
        val = float((w * (V * (p - m)).sum(axis=1)).sum())
        best = val if best is None else min(best, val)
    return best


def single_f_characterization_check(gen, dist, set_pi: ConvexModelSet, pi0, mechanism_output,
                                    panel_size: int = 24, seed: int = 0, opts=None,
                                    with_psi: bool = False) -> CharacterizationResult:
    """Check that a mechanism output satisfying strong improvement is a Bregman projection.

    The strong improvement inequality is tested first over a panel of set
    members; if it fails, the worst violation is returned as the residual.
    Otherwise the output's level sets define blocks, pi0 is projected onto the
    set with those blocks tied, and the sup-distance to the output is returned.
    """
    m = as_table(mechanism_output)
    rng = np.random.default_rng(seed)
    n, d = m.shape
    panel = [m, set_pi.feasible_point()]
    panel += [set_pi.euclidean_project(rng.uniform(-0.2, 1.2, (n, d))) for _ in range(panel_size)]
    worst = strong_improvement_violation(gen, dist, m, pi0, panel)
    part = level_set_partition(m, 1e-9)
    psi = None
    if with_psi:
        psi = strictness_inf(gen, dist, set_pi, pi0, m)
    if worst > 1e-9:
        return CharacterizationResult(worst, False, worst, part.blocks, psi)
    proj, _ = bregman_project(gen, dist, set_pi.with_blocks(part), pi0, opts)
    return CharacterizationResult(float(np.max(np.abs(proj - m))), True, worst, part.blocks, psi)


# -- four-point term -----------------------------------------------------------

def four_point_residual(gen_f, gen_g, dist, affine_set: ConvexModelSet, pi0, opts=None) -> float:
    """A(F, G) = E <V_F - V_G, pi_G - pi_F> with V_F = grad F(pi_F) - grad F(pi0)."""
    w = as_weights(dist)
    t0 = as_table(pi0)
    pf, _ = bregman_project(gen_f, w, affine_set, t0, opts)
    pg, _ = bregman_project(gen_g, w, affine_set, t0, opts)
    vf = G.gradient(gen_f, pf) - G.gradient(gen_f, t0)
    vg = G.gradient(gen_g, pg) - G.gradient(gen_g, t0)
    return math.fsum(w * ((vf - vg) * (pg - pf)).sum(axis=1))


__all__ = ["minimax_counterexample", "minimax_generators", "orbit_average_universal_check",
           "reversed_jensen_witness", "JensenWitness", "orbit_infeasibility_witness",
           "infeasibility_instance", "psd_panel", "single_f_characterization_check",
           "CharacterizationResult", "strictness_functional", "strictness_inf",
           "strong_improvement_violation", "four_point_residual"]
