"""Smooth convex minimisation over polytopes.

The main algorithm (``reduced_newton``) is a log-barrier Newton method run in
the null space of the equality constraints, followed by an active-set Newton
polish on the constraints the barrier identified as tight. Frank-Wolfe and
mirror descent are kept as independent cross-checks. Every result carries a
certificate: the variational-inequality residual
max(0, -min_{y feasible} <grad f(z), y - z>), computed by a linear program.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import minimize_scalar

from .errors import Infeasible, SolverError
from .polytope import Polytope, interior_point, linear_minimum, vi_residual

ALGORITHMS = ("reduced_newton", "frank_wolfe", "mirror_descent")


@dataclass(frozen=True)
class SolverOptions:
    max_iter: int = 50_000
    tol_obj: float = 1e-12
    tol_kkt: float = 1e-8
    algorithm: str = "reduced_newton"

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")


@dataclass
class SolveReport:
    status: str
    iterations: int
    objective: float
    kkt_residual: float
    wall_ns: int

    def to_dict(self) -> dict:
        return asdict(self)


class QuadraticObjective:
    """f(z) = 1/2 z^T Q z + c^T z + const."""

    def __init__(self, Q, c, const=0.0):
        self.Q = np.asarray(Q, dtype=float)
        self.c = np.asarray(c, dtype=float)
        self.const = float(const)

    def value(self, z):
        return float(0.5 * z @ self.Q @ z + self.c @ z + self.const)

    def grad(self, z):
        return self.Q @ z + self.c

    def hess(self, z):
        return self.Q

    def in_domain(self, z):
        return bool(np.all(np.isfinite(z)))


# -- the barrier / active-set solver ------------------------------------------

def _general_form(poly: Polytope):
    G, h = poly.inequalities()
    return poly.A.copy(), poly.b.copy(), G, h


def _solve_sym(H, g):
    try:
        return np.linalg.solve(H, g)
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(H, g, rcond=None)[0]


def _orthonormal_equalities(A, b):
    """Drop dependent equality rows; returns (A', b') with independent rows."""
    if A.shape[0] == 0:
        return A, b
    u, s, vt = np.linalg.svd(A, full_matrices=False)
    tol = max(A.shape) * np.finfo(float).eps * (s[0] if s.size else 1.0) * 10
    r = int(np.sum(s > tol))
    return vt[:r], (u[:, :r].T @ b) / s[:r]


class _Barrier:
    def __init__(self, obj, A, b, G, h, z0, max_iter):
        self.obj = obj
        self.G = G
        self.h = h
        self.A, self.b = _orthonormal_equalities(A, b)
        if self.A.shape[0]:
            z0 = z0 - self.A.T @ (self.A @ z0 - self.b)
            self.Z = null_space(self.A)
        else:
            self.Z = np.eye(z0.size)
        self.z0 = z0
        self.max_iter = max_iter
        self.iterations = 0

    def run(self, gap_tol=1e-10):
        obj, G, h, Z = self.obj, self.G, self.h, self.Z
        z = self.z0.copy()
        m = G.shape[0]
        if Z.shape[1] == 0:
            return z, np.inf
        s = h - G @ z
        if m and np.min(s) <= 0:
            raise SolverError("barrier start is not strictly feasible")
        if not obj.in_domain(z):
            raise SolverError("barrier start is outside the objective domain")
        GZ = G @ Z
        scale = max(1.0, abs(obj.value(z)))
        t = max(1.0, m) / scale
        mu = 10.0
        while True:
            for _ in range(200):
                if self.iterations >= self.max_iter:
                    return z, t
                self.iterations += 1
                s = h - G @ z
                gf = obj.grad(z)
                Hf = obj.hess(z)
                inv_s = 1.0 / s if m else np.zeros(0)
                g = Z.T @ (t * gf) + GZ.T @ inv_s
                H = Z.T @ (t * Hf) @ Z + (GZ.T * inv_s ** 2) @ GZ
                dy = -_solve_sym(H, g)
                dec = -float(g @ dy)
                # relative stop: below this the barrier value is dominated by rounding
                if dec <= 1e-9 or dec <= 1e-13 * t * scale:
                    break
                dz = Z @ dy
                phi0 = t * obj.value(z) - (np.log(s).sum() if m else 0.0)
                alpha = 1.0
                gd = float(g @ dy)
                accepted = False
                for _ in range(80):
                    zn = z + alpha * dz
                    sn = h - G @ zn
                    if (not m or np.min(sn) > 0) and obj.in_domain(zn):
                        phin = t * obj.value(zn) - (np.log(sn).sum() if m else 0.0)
                        slack_tol = 1e-13 * max(1.0, abs(phi0))
                        if np.isfinite(phin) and phin <= phi0 + 0.25 * alpha * gd + slack_tol:
                            accepted = True
                            break
                    alpha *= 0.5
                if not accepted:
                    break
                z = zn
            if m == 0 or m / t < gap_tol * scale:
                return z, t
            t *= mu


def _polish(obj, A, b, G, h, z, max_rounds=12):
    """Equality-constrained Newton on a guessed active set, refined by multiplier signs.

    Returns (z, ok). ``ok`` means a KKT point was found: primal feasible,
    stationary in the span of the active constraints, multipliers >= 0.
    """
    s = h - G @ z
    active = s <= 1e-7 * max(1.0, float(np.max(np.abs(h))) if h.size else 1.0)
    z_start = z
    for _ in range(max_rounds):
        M = np.vstack([A, G[active]])
        rhs = np.concatenate([b, h[active]])
        zc = z_start.copy()
        if M.shape[0]:
            zc = zc - np.linalg.lstsq(M, M @ zc - rhs, rcond=None)[0]
            Z = null_space(M)
        else:
            Z = np.eye(z.size)
        if not obj.in_domain(zc):
            return z, False
        for _ in range(60):
            if Z.shape[1] == 0:
                break
            gr = Z.T @ obj.grad(zc)
            if np.max(np.abs(gr)) <= 1e-15 * max(1.0, float(np.max(np.abs(obj.grad(zc))))):
                break
            Hr = Z.T @ obj.hess(zc) @ Z
            dy = -np.linalg.lstsq(Hr, gr, rcond=None)[0]
            dz = Z @ dy
            alpha = 1.0
            while alpha > 1e-12 and not obj.in_domain(zc + alpha * dz):
                alpha *= 0.5
            step = zc + alpha * dz
            if np.max(np.abs(step - zc)) <= 1e-16 * max(1.0, np.max(np.abs(zc))):
                zc = step
                break
            zc = step
        g = obj.grad(zc)
        if M.shape[0]:
            mult = np.linalg.lstsq(M.T, -g, rcond=None)[0]
            lam = mult[A.shape[0]:]
        else:
            lam = np.zeros(0)
        slack = h - G @ zc
        viol = -slack
        viol[active] = -np.inf
        worst_viol = int(np.argmax(viol)) if viol.size else -1
        gscale = max(1.0, float(np.max(np.abs(g))))
        if viol.size and viol[worst_viol] > 1e-12:
            active[worst_viol] = True
            continue
        if lam.size and lam.min() < -1e-10 * gscale:
            idx = np.flatnonzero(active)[int(np.argmin(lam))]
            active[idx] = False
            continue
        return zc, True
    return z, False


def _cleanup_bounds(z, lb, ub):
    """Snap values within rounding of a bound onto it (keeps e.g. exact zeros exact)."""
    z = z.copy()
    lo = np.isfinite(lb) & (np.abs(z - lb) <= 1e-13)
    hi = np.isfinite(ub) & (np.abs(z - ub) <= 1e-13)
    z[lo] = lb[lo]
    z[hi] = ub[hi]
    return z


def minimize(obj, poly: Polytope, opts: SolverOptions | None = None, fixed=None,
             fixed_values=None) -> tuple[np.ndarray, SolveReport]:
    """Minimise a smooth convex objective over a polytope.

    ``fixed`` is a boolean mask of variables pinned to ``fixed_values``; they
    are removed before solving (used for coordinates forced to zero by a steep
    generator).
    """
    opts = opts or SolverOptions()
    start = time.perf_counter_ns()
    n = poly.nvar
    fixed = np.zeros(n, dtype=bool) if fixed is None else np.asarray(fixed, dtype=bool)
    fv = np.zeros(n) if fixed_values is None else np.asarray(fixed_values, dtype=float)
    free = ~fixed
    sub = poly.restrict(free, fv)

    def full(zf):
        z = fv.copy()
        z[free] = zf
        return z

    class _Sub:
        def value(self, zf):
            return obj.value(full(zf))

        def grad(self, zf):
            return obj.grad(full(zf))[free]

        def hess(self, zf):
            return obj.hess(full(zf))[np.ix_(free, free)]

        def in_domain(self, zf):
            return obj.in_domain(full(zf))

    sobj = _Sub()
    if free.sum() == 0:
        if not poly.contains(fv, 1e-9):
            raise Infeasible("fixed variables violate the constraints")
        return fv, SolveReport("optimal", 0, obj.value(fv), 0.0, time.perf_counter_ns() - start)

    zf0, implicit = interior_point(sub)
    A, b, G, h = _general_form(sub)
    if implicit.any():
        # Tight rows that are bounds on a single variable pin that variable.
        rows = np.flatnonzero(implicit)
        pins = {}
        for r in rows:
            nz = np.flatnonzero(G[r])
            if nz.size == 1:
                pins[int(nz[0])] = h[r] / G[r, nz[0]]
        if pins:
            idx_free = np.flatnonzero(free)
            new_fixed = fixed.copy()
            new_fv = fv.copy()
            for j, v in pins.items():
                new_fixed[idx_free[j]] = True
                new_fv[idx_free[j]] = v
            z, rep = minimize(obj, poly, opts, new_fixed, new_fv)
            rep.wall_ns = time.perf_counter_ns() - start
            return z, rep
        A = np.vstack([A, G[implicit]])
        b = np.concatenate([b, h[implicit]])
        G, h = G[~implicit], h[~implicit]

    if opts.algorithm == "reduced_newton":
        zf, iters = _newton(sobj, A, b, G, h, zf0, opts, sub)
    elif opts.algorithm == "frank_wolfe":
        zf, iters = _frank_wolfe(sobj, sub, zf0, opts)
    else:
        zf, iters = _projected_gradient(sobj, sub, zf0, opts)
    zf = _cleanup_bounds(zf, sub.lb, sub.ub)
    if not sobj.in_domain(zf):
        zf = zf0
    g = sobj.grad(zf)
    # Relative to the gradient scale so heavily penalised objectives are judged fairly.
    kkt = vi_residual(sub, zf, g) / max(1.0, float(np.max(np.abs(g))) if g.size else 1.0)
    z = full(zf)
    status = "optimal" if kkt <= opts.tol_kkt else "inaccurate"
    report = SolveReport(status, int(iters), float(obj.value(z)), float(kkt),
                         time.perf_counter_ns() - start)
    if status != "optimal":
        raise SolverError(f"KKT residual {kkt:.3e} above tolerance {opts.tol_kkt:.1e}", report)
    return z, report


def _newton(sobj, A, b, G, h, z0, opts, poly):
    bar = _Barrier(sobj, A, b, G, h, z0, opts.max_iter)
    z, _ = bar.run()
    iters = bar.iterations
    zp, ok = _polish(sobj, bar.A, bar.b, G, h, z)
    if ok and sobj.in_domain(zp):
        feasible = (not G.size or np.max(G @ zp - h) <= 1e-12) and \
                   (not bar.A.size or np.max(np.abs(bar.A @ zp - bar.b)) <= 1e-11)
        if feasible:
            fz, fp = sobj.value(z), sobj.value(zp)
            # Values can tie within rounding on stiff problems; then the certificate decides.
            if fp <= fz + 1e-13 * max(1.0, abs(fz)) or \
                    vi_residual(poly, zp, sobj.grad(zp)) <= vi_residual(poly, z, sobj.grad(z)):
                z = zp
    return z, iters


def _frank_wolfe(sobj, poly, z0, opts):
    """Frank-Wolfe with away steps; the start point is kept as one of the atoms.

    Atoms are points of the polytope with convex weights summing to z, so away
    steps stay feasible even though the start is not a vertex.
    """
    z = z0.copy()
    atoms = {"start": [z0.copy(), 1.0]}
    it = 0
    for it in range(1, opts.max_iter + 1):
        g = sobj.grad(z)
        val, s = linear_minimum(poly, g)
        if s is None:
            raise SolverError("linear oracle failed")
        gap = float(g @ z) - val
        if gap <= opts.tol_kkt:
            break
        away_key = max(atoms, key=lambda k: float(g @ atoms[k][0]))
        v, a_v = atoms[away_key]
        away_gain = float(g @ (v - z))
        if gap >= away_gain or a_v >= 1.0:
            d, gmax, toward = s - z, 1.0, True
        else:
            d, gmax, toward = z - v, a_v / (1.0 - a_v), False

        def line(gamma):
            zn = z + gamma * d
            if not sobj.in_domain(zn):
                return 1e300
            v_ = sobj.value(zn)
            return v_ if np.isfinite(v_) else 1e300

        res = minimize_scalar(line, bounds=(0.0, gmax), method="bounded", options={"xatol": 1e-14})
        gamma = float(res.x)
        if line(gmax) <= res.fun:
            gamma = gmax
        z = z + gamma * d
        if toward:
            key = np.round(s, 12).tobytes()
            for atom in atoms.values():
                atom[1] *= 1.0 - gamma
            if gamma >= 1.0:
                atoms = {}
            atoms.setdefault(key, [s.copy(), 0.0])[1] += gamma
        else:
            for atom in atoms.values():
                atom[1] *= 1.0 + gamma
            atoms[away_key][1] -= gamma
            if gamma >= gmax:
                del atoms[away_key]
        atoms = {k: a for k, a in atoms.items() if a[1] > 1e-15}
    return z, it


def _projected_gradient(sobj, poly, z0, opts):
    """Euclidean mirror descent (projected gradient) with Armijo backtracking."""

    A, b = _orthonormal_equalities(poly.A, poly.b)
    G, h = poly.G, poly.h

    def project(v):
        # Dykstra over the equality subspace, the box and any general rows.
        z = v.copy()
        incr = [np.zeros_like(z) for _ in range(2 + G.shape[0])]
        for _ in range(10_000):
            prev = z.copy()
            before = [v.copy() for v in incr]
            y = np.clip(z + incr[0], poly.lb, poly.ub)
            incr[0] = z + incr[0] - y
            z = y
            if A.shape[0]:
                w = z + incr[1]
                y = w - A.T @ (A @ w - b)
                incr[1] = w - y
                z = y
            for i in range(G.shape[0]):
                w = z + incr[2 + i]
                gi = G[i]
                viol = gi @ w - h[i]
                y = w - max(viol, 0.0) * gi / (gi @ gi)
                incr[2 + i] = w - y
                z = y
            # the iterate can stall while the corrections still move
            moved = max(float(np.max(np.abs(a - c))) for a, c in zip(incr, before))
            if max(moved, float(np.max(np.abs(z - prev)))) <= 1e-13:
                break
        return z

    z = project(z0)
    step = 1.0
    it = 0
    for it in range(1, opts.max_iter + 1):
        g = sobj.grad(z)
        f0 = sobj.value(z)
        while True:
            zn = project(z - step * g)
            if sobj.in_domain(zn):
                fn = sobj.value(zn)
                if fn <= f0 + g @ (zn - z) + 0.5 / step * float((zn - z) @ (zn - z)):
                    break
            step *= 0.5
            if step < 1e-20:
                return z, it
        if np.max(np.abs(zn - z)) <= 1e-15:
            z = zn
            break
        z = zn
        step *= 1.5
        if it % 50 == 0 and vi_residual(poly, z, sobj.grad(z)) <= opts.tol_kkt:
            break
    return z, it


def l1_orbit_distance(weights, rows) -> float:
    """min over z in the simplex of sum_x w_x ||rows[x] - z||_1^2."""
    w = np.asarray(weights, dtype=float)
    R = np.asarray(rows, dtype=float)
    k, d = R.shape
    nv = d + k * d
    # variables: z (d), t_x (d each); f = sum_x w_x (sum_k t_xk)^2
    Q = np.zeros((nv, nv))
    for x in range(k):
        sl = slice(d + x * d, d + (x + 1) * d)
        Q[sl, sl] += 2.0 * w[x]
    Gr, hr = [], []
    for x in range(k):
        for j in range(d):
            row = np.zeros(nv)
            row[j] = 1.0
            row[d + x * d + j] = -1.0
            Gr.append(row)
            hr.append(R[x, j])
            row = np.zeros(nv)
            row[j] = -1.0
            row[d + x * d + j] = -1.0
            Gr.append(row)
            hr.append(-R[x, j])
    A = np.zeros((1, nv))
    A[0, :d] = 1.0
    lb = np.full(nv, -np.inf)
    lb[:d] = 0.0
    ub = np.full(nv, np.inf)
    ub[d:] = 2.0
    poly = Polytope(A, np.ones(1), np.array(Gr), np.array(hr), lb, ub)
    z, rep = minimize(QuadraticObjective(Q, np.zeros(nv)), poly, SolverOptions(tol_kkt=1e-9))
    return max(0.0, rep.objective)


__all__ = ["SolverOptions", "SolveReport", "QuadraticObjective", "minimize", "ALGORITHMS",
           "l1_orbit_distance"]
