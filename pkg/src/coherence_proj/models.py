"""Prompt distributions and model tables, with CSV/JSON round trips."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

_SUM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class PromptDistribution:
    """Strictly positive weights over n prompts summing to one."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("weights must be a non-empty vector")
        if np.any(~(w > 0)):
            raise ValueError("all prompt weights must be strictly positive")
        if abs(w.sum() - 1.0) > _SUM_TOL:
            raise ValueError(f"weights sum to {w.sum()!r}, not 1")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.weights.size

    @classmethod
    def uniform(cls, n: int) -> "PromptDistribution":
        return cls(np.full(n, 1.0 / n))

    @classmethod
    def normalized(cls, raw) -> "PromptDistribution":
        raw = np.asarray(raw, dtype=float)
        return cls(raw / raw.sum())


@dataclass(frozen=True, eq=False)
class UnnormalizedModel:
    """A nonnegative n x d table."""

    table: np.ndarray

    def __post_init__(self):
        t = np.array(self.table, dtype=float)
        if t.ndim != 2:
            raise ValueError("model table must be 2-D")
        if np.any(~(t >= 0)):
            raise ValueError("model entries must be nonnegative")
        t.setflags(write=False)
        object.__setattr__(self, "table", t)

    @property
    def shape(self):
        return self.table.shape


@dataclass(frozen=True, eq=False)
class ConditionalModel(UnnormalizedModel):
    """A row-stochastic n x d table: row x is the distribution pi(x)."""

    def __post_init__(self):
        super().__post_init__()
        sums = self.table.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > _SUM_TOL):
            raise ValueError("every row must sum to 1")


def as_table(model) -> np.ndarray:
    """Accept a model object or anything array-like and return a float 2-D array."""
    t = getattr(model, "table", model)
    t = np.asarray(t, dtype=float)
    if t.ndim == 1:
        t = t[:, None]
    return t


def as_weights(dist) -> np.ndarray:
    return np.asarray(getattr(dist, "weights", dist), dtype=float)


def outcome_ids(d: int) -> list[str]:
    return [f"y{k}" for k in range(d)]


def format_float(v: float) -> str:
    return format(float(v), ".17g")


def to_csv(model, header=None) -> str:
    t = as_table(model)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header or outcome_ids(t.shape[1]))
    for row in t:
        w.writerow([format_float(v) for v in row])
    return buf.getvalue()


def from_csv(text: str) -> np.ndarray:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise ValueError("empty CSV")
    body = [[float(v) for v in r] for r in rows[1:] if r]
    return np.array(body, dtype=float)


def to_json(model) -> str:
    return json.dumps({"table": as_table(model).tolist()})


def from_json(text: str) -> np.ndarray:
    doc = json.loads(text)
    return np.array(doc["table"] if isinstance(doc, dict) else doc, dtype=float)
