"""Legendre generators F with their gradient maps and convex conjugates.

Every function accepts a single d-vector or a stack of them (shape ``(..., d)``)
and works along the last axis, so a whole n x d model table can be passed at
once. Values come back with the leading shape.

A generator normally acts row by row on a conditional model and the
divergence between two models is the prompt-weighted sum of row divergences.
Setting ``scope="model"`` declares a generator on the flattened n*d vector
instead; it then ignores the prompt distribution. This is how generators that
couple different prompts (for instance a term p(1) p(3)) are expressed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import xlogy

from .errors import DomainError, SingularMatrix

SQUARED_EUCLIDEAN = "squared_euclidean"
MAHALANOBIS = "mahalanobis"
NEGATIVE_ENTROPY = "negative_entropy"
NEGATIVE_LOG = "negative_log"
QUADRATIC_COUPLED = "quadratic_coupled"
DIAGONAL_QUADRATIC = "diagonal_quadratic"

KINDS = (
    SQUARED_EUCLIDEAN,
    MAHALANOBIS,
    NEGATIVE_ENTROPY,
    NEGATIVE_LOG,
    QUADRATIC_COUPLED,
    DIAGONAL_QUADRATIC,
)
QUADRATIC_KINDS = (SQUARED_EUCLIDEAN, MAHALANOBIS, QUADRATIC_COUPLED, DIAGONAL_QUADRATIC)
SEPARABLE_KINDS = (SQUARED_EUCLIDEAN, NEGATIVE_ENTROPY, NEGATIVE_LOG, DIAGONAL_QUADRATIC)
STEEP_KINDS = (NEGATIVE_ENTROPY, NEGATIVE_LOG)

_ALIASES = {
    "squaredeuclidean": SQUARED_EUCLIDEAN,
    "negativeentropy": NEGATIVE_ENTROPY,
    "kl": NEGATIVE_ENTROPY,
    "negativelog": NEGATIVE_LOG,
    "itakura_saito": NEGATIVE_LOG,
    "quadraticcoupled": QUADRATIC_COUPLED,
    "diagonalquadratic": DIAGONAL_QUADRATIC,
}

_EIG_TOL = 1e-12


def canonical_kind(kind: str) -> str:
    key = kind.strip().lower().replace("-", "_")
    if key in KINDS:
        return key
    key2 = key.replace("_", "")
    if key2 in _ALIASES:
        return _ALIASES[key2]
    if key in _ALIASES:
        return _ALIASES[key]
    raise ValueError(f"unknown generator kind {kind!r}")


@dataclass(frozen=True, eq=False)
class GeneratorSpec:
    """A convex generator F together with its declared constants.

    ``matrix`` is a d x d symmetric matrix for Mahalanobis and QuadraticCoupled
    and a length-d vector of positive weights for DiagonalQuadratic. ``mu`` and
    ``smoothness`` refer to the norm named by ``norm_tag``.
    """

    kind: str
    matrix: np.ndarray | None = None
    linear: np.ndarray | None = None
    mu: float | None = None
    smoothness: float | None = None
    norm_tag: str | None = None
    scope: str = "row"
    _eig: tuple = field(default=(), repr=False)

    def __post_init__(self):
        kind = canonical_kind(self.kind)
        object.__setattr__(self, "kind", kind)
        if self.scope not in ("row", "model"):
            raise ValueError("scope must be 'row' or 'model'")
        if self.norm_tag is not None and self.norm_tag not in ("L1", "L2"):
            raise ValueError("norm_tag must be 'L1' or 'L2'")
        if kind in (MAHALANOBIS, QUADRATIC_COUPLED):
            if self.matrix is None:
                raise ValueError(f"{kind} needs a matrix")
            a = np.array(self.matrix, dtype=float)
            if a.ndim != 2 or a.shape[0] != a.shape[1]:
                raise ValueError("matrix must be square")
            if not np.allclose(a, a.T, atol=1e-12, rtol=0):
                raise ValueError("matrix must be symmetric")
            a = 0.5 * (a + a.T)
            eig = np.linalg.eigvalsh(a)
            scale = max(1.0, float(np.max(np.abs(eig))))
            if kind == MAHALANOBIS and eig[0] <= _EIG_TOL * scale:
                raise ValueError("Mahalanobis matrix must be positive definite")
            if eig[0] < -_EIG_TOL * scale:
                raise ValueError("QuadraticCoupled matrix must be positive semidefinite")
            a.setflags(write=False)
            object.__setattr__(self, "matrix", a)
            object.__setattr__(self, "_eig", (float(eig[0]), float(eig[-1])))
        elif kind == DIAGONAL_QUADRATIC:
            if self.matrix is None:
                raise ValueError("diagonal_quadratic needs weights")
            w = np.array(self.matrix, dtype=float)
            if w.ndim == 2:
                if not np.allclose(w, np.diag(np.diag(w))):
                    raise ValueError("diagonal_quadratic matrix must be diagonal")
                w = np.diag(w).copy()
            if np.any(w <= 0):
                raise ValueError("diagonal weights must be positive")
            w.setflags(write=False)
            object.__setattr__(self, "matrix", w)
            object.__setattr__(self, "_eig", (float(w.min()), float(w.max())))
        elif self.matrix is not None:
            raise ValueError(f"{kind} takes no matrix")
        if self.linear is not None:
            if kind != QUADRATIC_COUPLED:
                raise ValueError("only quadratic_coupled takes a linear term")
            b = np.array(self.linear, dtype=float)
            b.setflags(write=False)
            object.__setattr__(self, "linear", b)

    @property
    def dim(self) -> int | None:
        """Fixed dimension if the generator carries a matrix, else None."""
        if self.matrix is None:
            return None
        return self.matrix.shape[0]

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.matrix is not None:
            out["matrix"] = self.matrix.tolist()
        if self.linear is not None:
            out["linear"] = self.linear.tolist()
        if self.mu is not None:
            out["mu"] = self.mu
        if self.smoothness is not None:
            out["smoothness"] = self.smoothness
        if self.norm_tag is not None:
            out["norm"] = self.norm_tag
        if self.scope != "row":
            out["scope"] = self.scope
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorSpec":
        kind = canonical_kind(d["kind"])
        factories = {
            SQUARED_EUCLIDEAN: lambda: squared_euclidean(),
            NEGATIVE_ENTROPY: lambda: negative_entropy(),
            NEGATIVE_LOG: lambda: negative_log(),
            MAHALANOBIS: lambda: mahalanobis(d["matrix"]),
            QUADRATIC_COUPLED: lambda: quadratic_coupled(d["matrix"], d.get("linear")),
            DIAGONAL_QUADRATIC: lambda: diagonal_quadratic(d.get("weights", d.get("matrix"))),
        }
        gen = factories[kind]()
        overrides = {}
        for src, dst in (("mu", "mu"), ("smoothness", "smoothness"), ("norm", "norm_tag"),
                         ("norm_tag", "norm_tag"), ("scope", "scope")):
            if src in d:
                overrides[dst] = d[src]
        if overrides:
            gen = replace_constants(gen, **overrides)
        return gen


def replace_constants(gen: GeneratorSpec, **changes) -> GeneratorSpec:
    fields = dict(kind=gen.kind, matrix=gen.matrix, linear=gen.linear, mu=gen.mu,
                  smoothness=gen.smoothness, norm_tag=gen.norm_tag, scope=gen.scope)
    fields.update(changes)
    return GeneratorSpec(**fields)


def squared_euclidean() -> GeneratorSpec:
    return GeneratorSpec(SQUARED_EUCLIDEAN, mu=1.0, smoothness=1.0, norm_tag="L2")


def negative_entropy() -> GeneratorSpec:
    # Pinsker: 1-strongly convex w.r.t. L1 on the simplex.
    return GeneratorSpec(NEGATIVE_ENTROPY, mu=1.0, norm_tag="L1")


def negative_log() -> GeneratorSpec:
    return GeneratorSpec(NEGATIVE_LOG)


def mahalanobis(matrix) -> GeneratorSpec:
    """F(p) = 1/2 p^T A p with A positive definite; mu, L are its extreme eigenvalues."""
    a = np.asarray(matrix, dtype=float)
    eig = np.linalg.eigvalsh(0.5 * (a + a.T))
    return GeneratorSpec(MAHALANOBIS, matrix=a, mu=float(eig[0]), smoothness=float(eig[-1]),
                         norm_tag="L2")


def quadratic_coupled(matrix, linear=None, scope="row") -> GeneratorSpec:
    """F(p) = 1/2 p^T A p + b^T p with A positive semidefinite."""
    a = np.asarray(matrix, dtype=float)
    eig = np.linalg.eigvalsh(0.5 * (a + a.T))
    mu = float(eig[0]) if eig[0] > _EIG_TOL * max(1.0, abs(eig[-1])) else None
    return GeneratorSpec(QUADRATIC_COUPLED, matrix=a, linear=linear, mu=mu,
                         smoothness=float(eig[-1]), norm_tag="L2", scope=scope)


def diagonal_quadratic(weights) -> GeneratorSpec:
    w = np.asarray(weights, dtype=float)
    return GeneratorSpec(DIAGONAL_QUADRATIC, matrix=w, mu=float(np.min(w)),
                         smoothness=float(np.max(w)), norm_tag="L2")


def model_scope(gen: GeneratorSpec) -> GeneratorSpec:
    """The same generator acting on the flattened model vector."""
    return replace_constants(gen, scope="model")


# -- properties ---------------------------------------------------------------

def is_quadratic(gen: GeneratorSpec) -> bool:
    return gen.kind in QUADRATIC_KINDS


def is_separable(gen: GeneratorSpec) -> bool:
    return gen.kind in SEPARABLE_KINDS


def is_steep(gen: GeneratorSpec) -> bool:
    return gen.kind in STEEP_KINDS


def is_legendre(gen: GeneratorSpec) -> bool:
    """False only for a quadratic with a singular matrix."""
    if gen.kind == QUADRATIC_COUPLED:
        lo, hi = gen._eig
        return lo > _EIG_TOL * max(1.0, abs(hi))
    return True


def is_jointly_convex(gen: GeneratorSpec) -> bool:
    """Whether (p, q) -> B_F(p || q) is jointly convex."""
    return gen.kind != NEGATIVE_LOG


def has_orthant_domain(gen: GeneratorSpec) -> bool:
    """Whether dom F contains the closed nonnegative orthant."""
    return gen.kind != NEGATIVE_LOG


def eigen_range(gen: GeneratorSpec) -> tuple[float, float]:
    """Smallest and largest eigenvalue of the Hessian of a quadratic generator."""
    if gen.kind == SQUARED_EUCLIDEAN:
        return 1.0, 1.0
    if not gen._eig:
        raise ValueError(f"{gen.kind} is not quadratic")
    return gen._eig


# -- core maps ----------------------------------------------------------------

def _arr(p) -> np.ndarray:
    return np.asarray(p, dtype=float)


def _check_dim(gen, p):
    if gen.dim is not None and p.shape[-1] != gen.dim:
        raise DomainError(f"expected dimension {gen.dim}, got {p.shape[-1]}")


def _quad_matrix(gen) -> np.ndarray:
    if gen.kind == DIAGONAL_QUADRATIC:
        return np.diag(gen.matrix)
    return gen.matrix


def value(gen: GeneratorSpec, p) -> np.ndarray | float:
    """F(p). Steep generators accept boundary points with 0 log 0 = 0."""
    p = _arr(p)
    _check_dim(gen, p)
    k = gen.kind
    if k == NEGATIVE_ENTROPY:
        if np.any(p < 0) or np.any(~np.isfinite(p)):
            raise DomainError("negative entropy needs p >= 0")
        out = xlogy(p, p).sum(axis=-1)
    elif k == NEGATIVE_LOG:
        if np.any(~(p > 0)):
            raise DomainError("negative log needs p > 0")
        out = -np.log(p).sum(axis=-1)
    elif k == SQUARED_EUCLIDEAN:
        out = 0.5 * (p * p).sum(axis=-1)
    elif k == DIAGONAL_QUADRATIC:
        out = 0.5 * (gen.matrix * p * p).sum(axis=-1)
    else:
        out = 0.5 * np.einsum("...i,ij,...j->...", p, gen.matrix, p)
        if gen.linear is not None:
            out = out + p @ gen.linear
    return out[()] if isinstance(out, np.ndarray) else out


def gradient(gen: GeneratorSpec, p) -> np.ndarray:
    """The gradient map; steep generators require strictly positive input."""
    p = _arr(p)
    _check_dim(gen, p)
    k = gen.kind
    if k == NEGATIVE_ENTROPY:
        if np.any(~(p > 0)):
            raise DomainError("negative entropy gradient needs p > 0")
        return 1.0 + np.log(p)
    if k == NEGATIVE_LOG:
        if np.any(~(p > 0)):
            raise DomainError("negative log gradient needs p > 0")
        return -1.0 / p
    if k == SQUARED_EUCLIDEAN:
        return p.copy()
    if k == DIAGONAL_QUADRATIC:
        return gen.matrix * p
    g = p @ gen.matrix
    if gen.linear is not None:
        g = g + gen.linear
    return g


def hessian(gen: GeneratorSpec, p) -> np.ndarray:
    """Hessian of F at a single point p (d x d)."""
    p = _arr(p)
    _check_dim(gen, p)
    if p.ndim != 1:
        raise ValueError("hessian takes a single point")
    k = gen.kind
    if k in SEPARABLE_KINDS:
        return np.diag(hessian_diag(gen, p))
    return np.array(gen.matrix)


def hessian_diag(gen: GeneratorSpec, p) -> np.ndarray:
    """Diagonal of the Hessian for separable generators, vectorised."""
    p = _arr(p)
    k = gen.kind
    if k == NEGATIVE_ENTROPY:
        if np.any(~(p > 0)):
            raise DomainError("negative entropy Hessian needs p > 0")
        return 1.0 / p
    if k == NEGATIVE_LOG:
        if np.any(~(p > 0)):
            raise DomainError("negative log Hessian needs p > 0")
        return 1.0 / (p * p)
    if k == SQUARED_EUCLIDEAN:
        return np.ones_like(p)
    if k == DIAGONAL_QUADRATIC:
        return np.broadcast_to(gen.matrix, p.shape).copy()
    raise ValueError(f"{k} is not separable")


def dual_map_inverse(gen: GeneratorSpec, u) -> np.ndarray:
    """(grad F)^{-1}(u), which is also the gradient of the conjugate."""
    u = _arr(u)
    _check_dim(gen, u)
    k = gen.kind
    if k == NEGATIVE_ENTROPY:
        if np.any(np.isnan(u)) or np.any(u == np.inf):
            raise DomainError("dual point outside R^d")
        return np.exp(u - 1.0)
    if k == NEGATIVE_LOG:
        if np.any(~(u < 0)):
            raise DomainError("negative log dual points must be < 0")
        return -1.0 / u
    if k == SQUARED_EUCLIDEAN:
        return u.copy()
    if k == DIAGONAL_QUADRATIC:
        return u / gen.matrix
    if not is_legendre(gen):
        raise SingularMatrix("quadratic generator matrix is singular")
    v = u - gen.linear if gen.linear is not None else u
    return np.linalg.solve(gen.matrix, v.T).T


def conjugate_value(gen: GeneratorSpec, u) -> np.ndarray | float:
    """F*(u) = sup_p <u, p> - F(p)."""
    u = _arr(u)
    _check_dim(gen, u)
    k = gen.kind
    if k == NEGATIVE_ENTROPY:
        out = np.exp(u - 1.0).sum(axis=-1)
    elif k == NEGATIVE_LOG:
        if np.any(~(u < 0)):
            raise DomainError("negative log conjugate needs u < 0")
        out = (-1.0 - np.log(-u)).sum(axis=-1)
    elif k == SQUARED_EUCLIDEAN:
        out = 0.5 * (u * u).sum(axis=-1)
    elif k == DIAGONAL_QUADRATIC:
        out = 0.5 * (u * u / gen.matrix).sum(axis=-1)
    else:
        x = dual_map_inverse(gen, u)
        v = u - gen.linear if gen.linear is not None else u
        out = 0.5 * (v * x).sum(axis=-1)
    return out[()] if isinstance(out, np.ndarray) else out


def conjugate_at_primal(gen: GeneratorSpec, p) -> np.ndarray | float:
    """F*(grad F(p)) = <p, grad F(p)> - F(p), extended to boundary points.

    For negative entropy this is sum(p), which stays finite when some p_i = 0.
    """
    p = _arr(p)
    _check_dim(gen, p)
    k = gen.kind
    if k == NEGATIVE_ENTROPY:
        if np.any(p < 0):
            raise DomainError("negative entropy needs p >= 0")
        out = p.sum(axis=-1)
    elif k == NEGATIVE_LOG:
        if np.any(~(p > 0)):
            raise DomainError("negative log needs p > 0")
        out = np.log(p).sum(axis=-1) - p.shape[-1]
    elif k == SQUARED_EUCLIDEAN:
        out = 0.5 * (p * p).sum(axis=-1)
    elif k == DIAGONAL_QUADRATIC:
        out = 0.5 * (gen.matrix * p * p).sum(axis=-1)
    else:
        out = 0.5 * np.einsum("...i,ij,...j->...", p, gen.matrix, p)
    return out[()] if isinstance(out, np.ndarray) else out


def in_domain(gen: GeneratorSpec, p, interior: bool = False) -> bool:
    p = _arr(p)
    if not np.all(np.isfinite(p)):
        return False
    if gen.kind == NEGATIVE_ENTROPY:
        return bool(np.all(p > 0)) if interior else bool(np.all(p >= 0))
    if gen.kind == NEGATIVE_LOG:
        return bool(np.all(p > 0))
    return True
