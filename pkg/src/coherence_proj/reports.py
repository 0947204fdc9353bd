"""Value objects emitted by the verification suites; all serialise to plain JSON."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np


def jsonable(v):
    """Convert numpy values and non-finite floats into JSON-safe values."""
    if isinstance(v, dict):
        return {str(k): jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return jsonable(v.tolist())
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        if math.isnan(f):
            return "nan"
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    return v


@dataclass
class Check:
    """One named verdict: value compared with a threshold."""

    name: str
    passed: bool
    value: float | None = None
    threshold: float | None = None
    detail: dict = field(default_factory=dict)
    negative_control: bool = False
    documented: bool = False  # known disagreement with a published value, kept visible
    sense: str | None = None  # "le": value <= tol, "ge": value >= -tol; None: not re-judgeable

    def rejudge(self, tol: float) -> None:
        if self.sense is None or self.value is None:
            return
        v = float(self.value)
        self.threshold = tol
        self.passed = bool(v <= tol) if self.sense == "le" else bool(v >= -tol)

    def to_dict(self) -> dict:
        return jsonable(asdict(self))


@dataclass
class SuiteReport:
    suite: str
    seed: int
    checks: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)

    def add(self, name, passed, value=None, threshold=None, negative_control=False,
            documented=False, sense=None, **detail):
        self.checks.append(Check(name, bool(passed), value, threshold, detail, negative_control,
                                 documented, sense))
        return passed

    def within(self, name, value, tol, **detail):
        """Tolerance check value <= tol that a verdict override may re-judge."""
        return self.add(name, value <= tol, value, tol, sense="le", **detail)

    def at_least(self, name, value, tol, **detail):
        """Slack check value >= -tol that a verdict override may re-judge."""
        return self.add(name, value >= -tol, value, tol, sense="ge", **detail)

    def extend(self, other: "SuiteReport", prefix: str = "") -> None:
        for c in other.checks:
            self.checks.append(Check(prefix + c.name, c.passed, c.value, c.threshold, c.detail,
                                     c.negative_control, c.documented, c.sense))
        for k, v in other.tables.items():
            self.tables[prefix + k] = v

    def override_tolerance(self, tol: float) -> None:
        for c in self.checks:
            c.rejudge(tol)

    @property
    def failures(self) -> list:
        return [c for c in self.checks
                if not c.passed and not c.negative_control and not c.documented]

    @property
    def documented_failures(self) -> list:
        return [c for c in self.checks if not c.passed and c.documented]

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return jsonable({"suite": self.suite, "seed": self.seed, "ok": self.ok,
                         "n_checks": len(self.checks), "n_failures": len(self.failures),
                         "n_documented": len(self.documented_failures),
                         "checks": [c.to_dict() for c in self.checks], "tables": self.tables})

    def summary(self) -> str:
        lines = [f"[{'PASS' if self.ok else 'FAIL'}] {self.suite}: {len(self.checks)} checks, "
                 f"{len(self.failures)} failures"]
        for c in self.checks:
            tag = "ok " if c.passed else ("neg" if c.negative_control else ("DOC" if c.documented else "BAD"))
            val = "" if c.value is None else f" value={c.value:.6g}"
            lines.append(f"  {tag} {c.name}{val}")
        return "\n".join(lines)


@dataclass
class WitnessReport:
    name: str
    found: bool
    margin: float
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return jsonable(asdict(self))


@dataclass
class Inequality:
    """lhs <= rhs, where rhs = base + coef * g(eps) for an estimation-error term eps."""

    name: str
    lhs: float
    base: float
    coef: float
    eps_power: float = 1.0

    def rhs(self, eps: float) -> float:
        if self.coef == 0:
            return self.base
        if math.isinf(eps):
            return math.inf
        return self.base + self.coef * eps ** self.eps_power


@dataclass
class BoundReport:
    """Inequalities of the finite-sample analysis, judged with lower and upper estimates of eps."""

    eps_lower: float
    eps_upper: float | None
    eps_source: str
    inequalities: list = field(default_factory=list)
    slack: float = 1e-8
    smallest_constant: float | None = None

    def verdict(self, ineq: Inequality) -> str:
        # "holds" with the lower estimate implies it holds for the true eps.
        if ineq.lhs <= ineq.rhs(self.eps_lower) + self.slack:
            return "holds"
        # "violated" is claimed only against the upper estimate.
        if self.eps_upper is not None and ineq.lhs > ineq.rhs(self.eps_upper) + self.slack:
            return "violated"
        return "inconclusive"

    def verdict_upper(self, ineq: Inequality) -> str:
        if self.eps_upper is None:
            return "unavailable"
        return "holds" if ineq.lhs <= ineq.rhs(self.eps_upper) + self.slack else "violated"

    @property
    def violations(self) -> list:
        return [i.name for i in self.inequalities if self.verdict(i) == "violated"]

    def get(self, name) -> Inequality:
        for i in self.inequalities:
            if i.name == name:
                return i
        raise KeyError(name)

    def to_dict(self) -> dict:
        rows = []
        for i in self.inequalities:
            rows.append({"name": i.name, "lhs": i.lhs, "rhs_lower_eps": i.rhs(self.eps_lower),
                         "rhs_upper_eps": None if self.eps_upper is None else i.rhs(self.eps_upper),
                         "slack": i.rhs(self.eps_lower) - i.lhs, "verdict": self.verdict(i)})
        return jsonable({"eps_lower": self.eps_lower, "eps_upper": self.eps_upper,
                         "eps_source": self.eps_source, "smallest_constant": self.smallest_constant,
                         "inequalities": rows})
