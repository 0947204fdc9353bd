"""Relaxed coherence: a budget on the expected divergence between paraphrase rows."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import rel_entr

from .bregman import expected_divergence
from .coherence import _require_involution
from .errors import ConfigError, DomainError, SolverError
from .models import as_table, as_weights
from .polytope import Polytope
from .projection import RowObjective
from .solvers import SolveReport, SolverOptions, minimize

KL_SYM = "kl_symmetrized"
JS = "jensen_shannon"
HELLINGER = "squared_hellinger"
SQ_EUCLID = "squared_euclidean"
TV_SURROGATE = "tv_squared_surrogate"

# D >= (mu_D / 2) ||p - q||^2 on the simplex, with the norm listed.
_CONSTANTS = {
    KL_SYM: (2.0, "L1"),
    JS: (0.25, "L1"),
    HELLINGER: (0.25, "L1"),
    SQ_EUCLID: (1.0, "L2"),
    TV_SURROGATE: (0.5, "L1"),
}

_ALIASES = {
    "klsymmetrized": KL_SYM, "klsym": KL_SYM, "jensenshannon": JS, "js": JS,
    "squaredhellinger": HELLINGER, "hellinger": HELLINGER, "squaredeuclidean": SQ_EUCLID,
    "totalvariationsquaredsurrogate": TV_SURROGATE, "tvsquaredsurrogate": TV_SURROGATE,
    "tv": TV_SURROGATE,
}

_DOUBLINGS = 60


@dataclass(frozen=True)
class SoftDivergenceSpec:
    kind: str
    mu_D: float | None = None
    norm_tag: str | None = None

    def __post_init__(self):
        key = str(self.kind).lower().replace("_", "").replace("-", "")
        kind = _ALIASES.get(key)
        if kind is None:
            raise ValueError(f"unknown soft divergence {self.kind!r}")
        mu, norm = _CONSTANTS[kind]
        object.__setattr__(self, "kind", kind)
        if self.mu_D is None:
            object.__setattr__(self, "mu_D", mu)
        if self.norm_tag is None:
            object.__setattr__(self, "norm_tag", norm)

    @classmethod
    def of(cls, kind: str) -> "SoftDivergenceSpec":
        return cls(kind)


def soft_divergence(spec: SoftDivergenceSpec, p, q) -> float | np.ndarray:
    """D(p, q) along the last axis; natural logarithms."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise DomainError("shape mismatch")
    if np.any(p < 0) or np.any(q < 0):
        raise DomainError("soft divergences need nonnegative arguments")
    k = spec.kind
    if k == KL_SYM:
        if np.any(~(p > 0)) or np.any(~(q > 0)):
            raise DomainError("symmetrised KL needs strictly positive arguments")
        out = ((p - q) * np.log(p / q)).sum(axis=-1)
    elif k == JS:
        m = 0.5 * (p + q)
        out = 0.5 * (rel_entr(p, m) + rel_entr(q, m)).sum(axis=-1)
    elif k == HELLINGER:
        out = (0.5 * (p + q) - np.sqrt(p * q)).sum(axis=-1)
    elif k == SQ_EUCLID:
        out = 0.5 * ((p - q) ** 2).sum(axis=-1)
    else:
        out = 0.25 * np.abs(p - q).sum(axis=-1) ** 2
    return out[()] if isinstance(out, np.ndarray) else out


def _pair_derivatives(spec, p, q):
    """Gradient (gp, gq) and Hessian blocks (Hpp, Hpq, Hqq), the latter as diagonals."""
    k = spec.kind
    if k == KL_SYM:
        gp = np.log(p / q) + 1.0 - q / p
        gq = np.log(q / p) + 1.0 - p / q
        return gp, gq, 1 / p + q / p ** 2, -1 / p - 1 / q, 1 / q + p / q ** 2
    if k == JS:
        m = 0.5 * (p + q)
        gp = 0.5 * np.log(p / m)
        gq = 0.5 * np.log(q / m)
        c = -0.25 / m
        return gp, gq, 0.5 / p + c, c, 0.5 / q + c
    if k == HELLINGER:
        r = np.sqrt(q / p)
        gp = 0.5 - 0.5 * r
        gq = 0.5 - 0.5 / r
        s = np.sqrt(p * q)
        return gp, gq, 0.25 * np.sqrt(q) * p ** -1.5, -0.25 / s, 0.25 * np.sqrt(p) * q ** -1.5
    if k == SQ_EUCLID:
        diff = p - q
        one = np.ones_like(p)
        return diff, -diff, one, -one, one
    raise ValueError("no smooth derivatives for the TV surrogate")


def _pairs(dist, phi):
    """(a, b, weight) for each 2-orbit, weight = P(a) + P(b); fixed points contribute nothing."""
    _require_involution(phi)
    w = as_weights(dist)
    out = []
    for a in range(phi.n):
        b = phi.perm[a]
        if a < b:
            out.append((a, b, w[a] + w[b]))
    return out


def expected_soft_divergence(spec, dist, phi, pi) -> float:
    """E_x D(pi(x), pi(phi(x)))."""
    t = as_table(pi)
    return math.fsum(wt * float(soft_divergence(spec, t[a], t[b])) for a, b, wt in _pairs(dist, phi))


class _Penalized:
    """sum_x w_x B_F(pi_x || pi0_x) + penalty * E D(pi(x), pi(phi x)), over the flattened table.

    For the TV surrogate the variables are extended by t >= |pi_a - pi_b| for
    each pair, and D is written as (1/4)(sum t)^2.
    """

    def __init__(self, gen, spec, dist, phi, pi0, penalty):
        t0 = as_table(pi0)
        self.n, self.d = t0.shape
        self.base = RowObjective(gen, as_weights(dist), np.arange(self.n), self.n, t0)
        self.spec = spec
        self.pairs = _pairs(dist, phi)
        self.penalty = float(penalty)
        self.nx = self.n * self.d
        self.tv = spec.kind == TV_SURROGATE
        self.nvar = self.nx + (len(self.pairs) * self.d if self.tv else 0)

    def in_domain(self, z):
        x = z[:self.nx]
        if not self.base.in_domain(x):
            return False
        if self.spec.kind in (KL_SYM, JS, HELLINGER) and self.penalty > 0:
            return bool(np.all(x > 0))
        return True

    def value(self, z):
        x = z[:self.nx]
        v = self.base.value(x)
        if self.penalty == 0:
            return v
        if self.tv:
            pen = 0.0
            for i, (_, _, wt) in enumerate(self.pairs):
                t = z[self.nx + i * self.d:self.nx + (i + 1) * self.d]
                pen += wt * 0.25 * t.sum() ** 2
        else:
            T = x.reshape(self.n, self.d)
            pen = math.fsum(wt * float(soft_divergence(self.spec, T[a], T[b])) for a, b, wt in self.pairs)
        return v + self.penalty * pen

    def grad(self, z):
        x = z[:self.nx]
        g = np.zeros(self.nvar)
        g[:self.nx] = self.base.grad(x)
        if self.penalty == 0:
            return g
        d = self.d
        if self.tv:
            for i, (_, _, wt) in enumerate(self.pairs):
                sl = slice(self.nx + i * d, self.nx + (i + 1) * d)
                g[sl] += self.penalty * wt * 0.5 * z[sl].sum()
            return g
        T = x.reshape(self.n, d)
        for a, b, wt in self.pairs:
            gp, gq, *_ = _pair_derivatives(self.spec, T[a], T[b])
            g[a * d:(a + 1) * d] += self.penalty * wt * gp
            g[b * d:(b + 1) * d] += self.penalty * wt * gq
        return g

    def hess(self, z):
        x = z[:self.nx]
        H = np.zeros((self.nvar, self.nvar))
        H[:self.nx, :self.nx] = self.base.hess(x)
        if self.penalty == 0:
            return H
        d = self.d
        if self.tv:
            for i, (_, _, wt) in enumerate(self.pairs):
                sl = slice(self.nx + i * d, self.nx + (i + 1) * d)
                H[sl, sl] += self.penalty * wt * 0.5
            return H
        T = x.reshape(self.n, d)
        for a, b, wt in self.pairs:
            _, _, hpp, hpq, hqq = _pair_derivatives(self.spec, T[a], T[b])
            ia = np.arange(a * d, (a + 1) * d)
            ib = np.arange(b * d, (b + 1) * d)
            c = self.penalty * wt
            H[ia, ia] += c * hpp
            H[ib, ib] += c * hqq
            H[ia, ib] += c * hpq
            H[ib, ia] += c * hpq
        return H

    def polytope(self):
        n, d, nv = self.n, self.d, self.nvar
        A = np.zeros((n, nv))
        for x in range(n):
            A[x, x * d:(x + 1) * d] = 1.0
        rows, h = [], []
        if self.tv:
            for i, (a, b, _) in enumerate(self.pairs):
                for k in range(d):
                    for sgn in (1.0, -1.0):
                        r = np.zeros(nv)
                        r[a * d + k] = sgn
                        r[b * d + k] = -sgn
                        r[self.nx + i * d + k] = -1.0
                        rows.append(r)
                        h.append(0.0)
        lb = np.zeros(nv)
        ub = np.full(nv, np.inf)
        ub[:self.nx] = 1.0
        G_ = np.array(rows).reshape(-1, nv)
        return Polytope(A, np.ones(n), G_, np.array(h), lb, ub)


def _check_norms(gen, spec):
    if gen.norm_tag is not None and spec.norm_tag is not None and gen.norm_tag != spec.norm_tag:
        raise ConfigError(f"generator norm {gen.norm_tag} differs from soft-divergence norm "
                          f"{spec.norm_tag}", "$.soft")


def penalized_project(gen, spec, penalty, dist, phi, pi0, opts=None):
    """Minimiser of E B_F(pi || pi0) + penalty * E D(pi(x), pi(phi(x))) over row-stochastic tables."""
    if gen.scope != "row":
        raise DomainError("relaxed projection needs a row-scope generator")
    if penalty < 0:
        raise ValueError("penalty must be nonnegative")
    obj = _Penalized(gen, spec, dist, phi, pi0, penalty)
    t0 = as_table(pi0)
    fixed = np.zeros(obj.nvar, dtype=bool)
    fixed[:obj.nx] = obj.base.forced
    if penalty == 0 and np.allclose(t0.sum(axis=1), 1.0, atol=1e-13, rtol=0):
        return t0.copy(), SolveReport("optimal", 0, 0.0, 0.0, 0)
    z, rep = minimize(obj, obj.polytope(), opts or SolverOptions(), fixed, np.zeros(obj.nvar))
    return z[:obj.nx].reshape(obj.n, obj.d), rep


def relaxed_project(gen, spec, Lambda, dist, phi, pi0, opts=None):
    """Constrained form: min E B_F(pi || pi0) subject to E D(pi(x), pi(phi x)) <= Lambda.

    Returns (pi_hat, multiplier, report). The multiplier is found by doubling an
    upper bracket (at most 60 times) and then root-finding on the monotone
    constraint value.
    """
    if not Lambda > 0:
        raise ValueError("Lambda must be positive")
    _check_norms(gen, spec)
    t0 = as_table(pi0)
    if expected_soft_divergence(spec, dist, phi, t0) <= Lambda:
        return t0.copy(), 0.0, SolveReport("optimal", 0, 0.0, 0.0, 0)
    cache = {}

    def solve(lam):
        if lam not in cache:
            cache[lam] = penalized_project(gen, spec, lam, dist, phi, t0, opts)
        return cache[lam]

    def excess(lam):
        return expected_soft_divergence(spec, dist, phi, solve(lam)[0]) - Lambda

    lo, hi = 0.0, 1.0
    for _ in range(_DOUBLINGS):
        if excess(hi) <= 0:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise SolverError("multiplier bracket did not close after 60 doublings")
    if excess(hi) == 0:
        lam = hi
    else:
        lam = brentq(excess, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    # Prefer the feasible side of the root.
    if excess(lam) > 0 and excess(hi) <= 0 and abs(hi - lam) <= 1e-12 * max(1, hi):
        lam = hi
    pi, rep = solve(lam)
    return pi, float(lam), rep


def relaxed_improvement_floor(mu_F: float, mu_D: float, Lambda: float, delta_coh: float) -> float:
    """(mu_F / 2) [sqrt(delta_coh) - sqrt(Lambda / (2 mu_D))]_+^2."""
    if min(mu_F, mu_D, Lambda, delta_coh) < 0:
        raise ValueError("arguments must be nonnegative")
    gap = math.sqrt(delta_coh) - math.sqrt(Lambda / (2.0 * mu_D))
    return 0.5 * mu_F * max(gap, 0.0) ** 2


def relaxed_objective(gen, dist, pi, pi0) -> float:
    return expected_divergence(gen, dist, pi, pi0)


__all__ = ["SoftDivergenceSpec", "soft_divergence", "expected_soft_divergence", "penalized_project",
           "relaxed_project", "relaxed_improvement_floor", "relaxed_objective",
           "KL_SYM", "JS", "HELLINGER", "SQ_EUCLID", "TV_SURROGATE"]
