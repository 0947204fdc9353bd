"""Bregman divergences, their identities, centroids and expectation lifting."""

from __future__ import annotations

import math

import numpy as np
from scipy.special import rel_entr

from . import generators as G
from .errors import DomainError
from .models import as_table, as_weights


def divergence(gen: G.GeneratorSpec, p, q) -> np.ndarray | float:
    """B_F(p || q) = F(p) - F(q) - <grad F(q), p - q>, along the last axis.

    Closed forms are used per kind. For negative entropy a component with
    q_i = 0 contributes 0 when p_i = 0 and +inf otherwise.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise DomainError(f"shape mismatch {p.shape} vs {q.shape}")
    G._check_dim(gen, p)
    k = gen.kind
    if k == G.NEGATIVE_ENTROPY:
        if np.any(p < 0) or np.any(q < 0):
            raise DomainError("negative entropy divergence needs nonnegative arguments")
        out = (rel_entr(p, q) - p + q).sum(axis=-1)
    elif k == G.NEGATIVE_LOG:
        if np.any(~(p > 0)) or np.any(~(q > 0)):
            raise DomainError("Itakura-Saito divergence needs positive arguments")
        r = p / q
        out = (r - np.log(r) - 1.0).sum(axis=-1)
    elif k == G.SQUARED_EUCLIDEAN:
        d = p - q
        out = 0.5 * (d * d).sum(axis=-1)
    elif k == G.DIAGONAL_QUADRATIC:
        d = p - q
        out = 0.5 * (gen.matrix * d * d).sum(axis=-1)
    else:
        d = p - q
        out = 0.5 * np.einsum("...i,ij,...j->...", d, gen.matrix, d)
    return out[()] if isinstance(out, np.ndarray) else out


def conjugate_divergence(gen: G.GeneratorSpec, a, b) -> np.ndarray | float:
    """B_{F*}(a || b) for dual points a, b."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    grad_b = G.dual_map_inverse(gen, b)
    out = G.conjugate_value(gen, a) - G.conjugate_value(gen, b) - ((a - b) * grad_b).sum(axis=-1)
    return out


def row_divergences(gen: G.GeneratorSpec, a, b) -> np.ndarray:
    """Per-prompt divergences between two model tables (row scope only)."""
    a = as_table(a)
    b = as_table(b)
    if a.shape != b.shape:
        raise DomainError(f"shape mismatch {a.shape} vs {b.shape}")
    out = np.empty(a.shape[0])
    for x in range(a.shape[0]):
        try:
            out[x] = divergence(gen, a[x], b[x])
        except DomainError as exc:
            raise DomainError(f"prompt {x}: {exc}") from exc
    return out


def expected_divergence(gen: G.GeneratorSpec, dist, a, b) -> float:
    """sum_x P(x) B_F(a(x) || b(x)); model-scope generators ignore ``dist``."""
    a = as_table(a)
    b = as_table(b)
    if gen.scope == "model":
        return float(divergence(gen, a.ravel(), b.ravel()))
    w = as_weights(dist)
    if w.size != a.shape[0]:
        raise DomainError("distribution and model sizes differ")
    rows = row_divergences(gen, a, b)
    if np.any(np.isinf(rows)):
        return math.inf
    return math.fsum(w * rows)


def three_point_residual(gen, p, r, q) -> float:
    """B(p||r) + B(r||q) - B(p||q) - <grad F(q) - grad F(r), p - r>; zero by identity."""
    p, r, q = (np.asarray(v, dtype=float) for v in (p, r, q))
    inner = float(np.dot(G.gradient(gen, q) - G.gradient(gen, r), p - r))
    return float(divergence(gen, p, r) + divergence(gen, r, q) - divergence(gen, p, q) - inner)


def duality_residual(gen, p, q) -> float:
    """|B_F(p||q) - B_{F*}(grad F(q) || grad F(p))|."""
    lhs = divergence(gen, p, q)
    rhs = conjugate_divergence(gen, G.gradient(gen, q), G.gradient(gen, p))
    return float(abs(lhs - rhs))


def fenchel_bregman_gap(gen, u, v, alpha) -> float:
    """B_F(u||v) + B_{F*}(alpha || grad F(v)) - <u - v, alpha - grad F(v)>; nonnegative."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    beta = G.gradient(gen, v)
    return float(divergence(gen, u, v) + conjugate_divergence(gen, alpha, beta)
                 - np.dot(u - v, alpha - beta))


def centroid(gen, lambdas, points) -> np.ndarray:
    """(grad F)^{-1}(sum_k lambda_k grad F(q_k)), the minimiser of sum_k lambda_k B(. || q_k).

    Under negative entropy a component where some positively weighted point is
    zero is set to zero: every other value makes the objective infinite.
    """
    lam = np.asarray(lambdas, dtype=float)
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if lam.shape != (pts.shape[0],):
        raise DomainError("one weight per point is required")
    if np.any(lam < 0) or abs(lam.sum() - 1.0) > 1e-12:
        raise DomainError("centroid weights must lie in the simplex")
    active = lam > 0
    lam = lam[active]
    pts = pts[active]
    if gen.kind == G.NEGATIVE_ENTROPY:
        if np.any(pts < 0):
            raise DomainError("negative entropy centroid needs nonnegative points")
        zero = np.any(pts == 0, axis=0)
        safe = np.where(zero, 1.0, pts)
        out = np.exp(lam @ np.log(safe))
        out[zero] = 0.0
        return out
    grads = G.gradient(gen, pts)
    return G.dual_map_inverse(gen, lam @ grads)


def centroid_decomposition(gen, lambdas, points, constraint=None, opts=None):
    """Split min_{p in C} sum_k lambda_k B(p || q_k) into a Jensen gap and a projection term.

    Returns ``(centroid, projected, min_value)``. ``constraint`` is a
    single-prompt ConvexModelSet (None means the whole domain). The identity
    min = sum lambda_k F*(grad F(q_k)) - F*(sum lambda_k grad F(q_k)) + B(projected || centroid)
    is checked against the directly evaluated objective.
    """
    lam = np.asarray(lambdas, dtype=float)
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    c = centroid(gen, lam, pts)
    if constraint is None:
        projected = c
    else:
        from .projection import bregman_project

        table, _ = bregman_project(gen, [1.0], constraint, c[None, :], opts)
        projected = table[0]
    direct = math.fsum(lam[i] * divergence(gen, projected, pts[i]) for i in range(lam.size))
    jensen = math.fsum(lam[i] * G.conjugate_at_primal(gen, pts[i]) for i in range(lam.size))
    jensen -= G.conjugate_at_primal(gen, c)
    formula = jensen + divergence(gen, projected, c)
    if abs(direct - formula) > 1e-9 * max(1.0, abs(direct)):
        raise AssertionError(f"centroid decomposition mismatch: {direct} vs {formula}")
    return c, projected, float(direct)
