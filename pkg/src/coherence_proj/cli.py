"""Command line entry point: config-driven projections and the verification suites.

Exit codes: 0 all checks pass, 1 at least one check failed, 2 solver or domain
error, 3 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import logging
import os
import re
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import generators as G
from .coherence import InvarianceMap, incoherence_gamma0
from .convex_sets import ConvexModelSet
from .empirical import empirical_bound_report, empirical_projection, sample_prompts
from .errors import CoherenceError, ConfigError, UnknownSuite
from .models import as_table, format_float, to_csv
from .projection import bregman_project, direct_projection, two_step_delta, two_step_projection
from .relaxed import (SoftDivergenceSpec, expected_soft_divergence, penalized_project,
                      relaxed_objective, relaxed_project)
from .reports import SuiteReport, jsonable
from .solvers import SolverOptions

log = logging.getLogger("coherence_proj")

EXIT_OK, EXIT_FAIL, EXIT_SOLVER, EXIT_CONFIG = 0, 1, 2, 3
TASKS = ("project", "two-step", "relaxed", "empirical", "verify")
LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "warning": logging.WARNING,
              "info": logging.INFO, "debug": logging.DEBUG}
_TOP_KEYS = {"version", "task", "seed", "generator", "dist", "phi", "set", "pi0", "pi_star",
             "soft", "lambda_cap", "penalty", "sample", "suite", "suite_config", "M", "solver"}


# -- config parsing ---------------------------------------------------------------

def _require(doc, key, path):
    if key not in doc:
        raise ConfigError("required key missing", f"{path}.{key}")
    return doc[key]


def _table(v, path) -> np.ndarray:
    try:
        t = np.asarray(v, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError("expected a numeric table", path) from None
    if t.ndim == 1:
        t = t[:, None]
    if t.ndim != 2 or t.size == 0 or not np.all(np.isfinite(t)):
        raise ConfigError("expected a non-empty finite 2-D table", path)
    return t


def parse_generator(doc, path="$.generator") -> G.GeneratorSpec:
    if not isinstance(doc, dict):
        raise ConfigError("expected an object with a 'kind' key", path)
    if "kind" not in doc:
        raise ConfigError("required key missing", f"{path}.kind")
    try:
        G.canonical_kind(str(doc["kind"]))
    except ValueError as e:
        raise ConfigError(str(e), f"{path}.kind") from None
    try:
        return G.GeneratorSpec.from_dict(doc)
    except KeyError as e:
        raise ConfigError("required key missing", f"{path}.{e.args[0]}") from None
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e), path) from None


def parse_dist(v, n, path="$.dist") -> np.ndarray:
    if v is None or v == "uniform":
        return np.full(n, 1.0 / n)
    try:
        w = np.asarray(v, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError("expected 'uniform' or a list of weights", path) from None
    if w.shape != (n,) or np.any(w < 0) or not np.isfinite(w).all() or w.sum() <= 0:
        raise ConfigError(f"expected {n} nonnegative weights with positive sum", path)
    return w / w.sum()


def parse_phi(v, n, path="$.phi") -> InvarianceMap | None:
    """A permutation list, or {"pairs": [[a, b], ...]} for an involution."""
    if v is None:
        return None
    try:
        if isinstance(v, dict):
            return InvarianceMap.from_pairs(n, _require(v, "pairs", path))
        phi = InvarianceMap(tuple(v))
    except (TypeError, ValueError, IndexError) as e:
        raise ConfigError(f"not a permutation of 0..{n - 1}: {e}", path) from None
    if phi.n != n:
        raise ConfigError(f"permutation has length {phi.n}, expected {n}", path)
    return phi


def parse_set(v, n, d, path="$.set") -> ConvexModelSet:
    if v is None:
        v = {}
    if not isinstance(v, dict):
        raise ConfigError("expected an object", path)
    unknown = set(v) - {"base", "n", "d", "caps", "affine", "blocks", "sphere"}
    if unknown:
        raise ConfigError("unknown key", f"{path}.{sorted(unknown)[0]}")
    for i, r in enumerate(v.get("affine", [])):
        for key in ("coeffs", "rhs"):
            if not isinstance(r, dict) or key not in r:
                raise ConfigError("required key missing", f"{path}.affine[{i}].{key}")
    try:
        s = ConvexModelSet.from_dict(v, n, d)
    except (TypeError, ValueError, IndexError, KeyError) as e:
        raise ConfigError(str(e), path) from None
    if (s.n, s.d) != (n, d):
        raise ConfigError(f"set shape ({s.n}, {s.d}) does not match pi0 ({n}, {d})", path)
    return s


def parse_soft(v, path="$.soft") -> SoftDivergenceSpec:
    if v is None:
        raise ConfigError("required key missing", path)
    try:
        if isinstance(v, str):
            return SoftDivergenceSpec(v)
        if isinstance(v, dict):
            return SoftDivergenceSpec(_require(v, "kind", path), v.get("mu_D"), v.get("norm"))
    except ValueError as e:
        raise ConfigError(str(e), f"{path}.kind" if isinstance(v, dict) else path) from None
    raise ConfigError("expected a name or an object with 'kind'", path)


def parse_solver(v, path="$.solver") -> SolverOptions:
    if v is None:
        return SolverOptions()
    if not isinstance(v, dict):
        raise ConfigError("expected an object", path)
    unknown = set(v) - {"max_iter", "tol_obj", "tol_kkt", "algorithm"}
    if unknown:
        raise ConfigError("unknown key", f"{path}.{sorted(unknown)[0]}")
    try:
        return SolverOptions(**v)
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e), path) from None


def validate(doc) -> dict:
    """Schema checks shared by every task; returns the document unchanged."""
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object", "$")
    if doc.get("version") != 1:
        raise ConfigError("expected 1", "$.version")
    task = _require(doc, "task", "$")
    if task not in TASKS:
        raise ConfigError(f"expected one of {', '.join(TASKS)}", "$.task")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ConfigError("unknown key", f"$.{sorted(unknown)[0]}")
    return doc


# -- tasks ------------------------------------------------------------------------

class _Problem:
    """The pieces shared by the projection tasks."""

    def __init__(self, doc):
        self.gen = parse_generator(_require(doc, "generator", "$"))
        self.pi0 = _table(_require(doc, "pi0", "$"), "$.pi0")
        n, d = self.pi0.shape
        self.dist = parse_dist(doc.get("dist"), n)
        self.phi = parse_phi(doc.get("phi"), n)
        self.set = parse_set(doc.get("set"), n, d)
        self.opts = parse_solver(doc.get("solver"))
        self.pi_star = _table(doc["pi_star"], "$.pi_star") if doc.get("pi_star") is not None else None
        if self.pi_star is not None and self.pi_star.shape != (n, d):
            raise ConfigError(f"expected shape ({n}, {d})", "$.pi_star")

    def need_phi(self, task):
        if self.phi is None:
            raise ConfigError(f"required for task {task!r}", "$.phi")
        return self.phi


def _solver_block(rep) -> dict:
    d = rep.to_dict()
    return {k: d[k] for k in ("status", "iterations", "objective", "kkt_residual")}


def _membership_checks(rep: SuiteReport, prob: _Problem, out) -> None:
    rep.add("output lies in the set", bool(prob.set.contains(out, 1e-8)), None, 1e-8)
    if prob.phi is not None:
        gap = float(np.max(np.abs(out - out[prob.phi.array])))
        rep.within("output is coherent", gap, 1e-9)


def task_project(doc, seed):
    prob = _Problem(doc)
    if prob.phi is None:
        out, srep = bregman_project(prob.gen, prob.dist, prob.set, prob.pi0, prob.opts)
    else:
        out, srep = direct_projection(prob.gen, prob.dist, prob.phi, prob.set, prob.pi0, prob.opts)
    rep = SuiteReport("project", seed)
    _membership_checks(rep, prob, out)
    rep.within("KKT residual", srep.kkt_residual, max(prob.opts.tol_kkt, 1e-8))
    result = {"projection": out, "solver": _solver_block(srep)}
    return rep, result, {"projection": out}, srep.wall_ns


def task_two_step(doc, seed):
    prob = _Problem(doc)
    phi = prob.need_phi("two-step")
    out, srep, inter = two_step_projection(prob.gen, prob.dist, phi, prob.set, prob.pi0, prob.opts)
    direct, drep = direct_projection(prob.gen, prob.dist, phi, prob.set, prob.pi0, prob.opts)
    delta = two_step_delta(prob.gen, prob.dist, phi, prob.pi0)
    rep = SuiteReport("two-step", seed)
    _membership_checks(rep, prob, out)
    rep.at_least("centroid step gain is nonnegative", delta, 1e-12)
    result = {"projection": out, "centroid": inter, "direct": direct,
              "max_abs_difference_to_direct": float(np.max(np.abs(out - direct))),
              "centroid_gain": delta, "solver": _solver_block(srep)}
    return rep, result, {"projection": out, "centroid": inter, "direct": direct}, \
        srep.wall_ns + drep.wall_ns


def task_relaxed(doc, seed):
    prob = _Problem(doc)
    phi = prob.need_phi("relaxed")
    soft = parse_soft(doc.get("soft"))
    cap, pen = doc.get("lambda_cap"), doc.get("penalty")
    if (cap is None) == (pen is None):
        raise ConfigError("give exactly one of lambda_cap and penalty", "$.lambda_cap")
    rep = SuiteReport("relaxed", seed)
    try:
        if cap is not None:
            out, lam, srep = relaxed_project(prob.gen, soft, float(cap), prob.dist, phi, prob.pi0,
                                             prob.opts)
        else:
            lam = float(pen)
            out, srep = penalized_project(prob.gen, soft, lam, prob.dist, phi, prob.pi0, prob.opts)
    except ValueError as e:
        if isinstance(e, CoherenceError):
            raise
        raise ConfigError(str(e), "$.lambda_cap" if cap is not None else "$.penalty") from None
    soft_value = expected_soft_divergence(soft, prob.dist, phi, out)
    if cap is not None:
        rep.within("soft incoherence within the cap", soft_value - float(cap), 1e-9)
    result = {"projection": out, "multiplier": lam, "soft_incoherence": soft_value,
              "baseline_soft_incoherence": expected_soft_divergence(soft, prob.dist, phi, prob.pi0),
              "objective": relaxed_objective(prob.gen, prob.dist, out, prob.pi0),
              "incoherence_gamma0": incoherence_gamma0(prob.dist, prob.pi0, phi),
              "solver": _solver_block(srep)}
    return rep, result, {"projection": out}, srep.wall_ns


def task_empirical(doc, seed):
    prob = _Problem(doc)
    phi = prob.need_phi("empirical")
    sdoc = _require(doc, "sample", "$")
    if not isinstance(sdoc, dict):
        raise ConfigError("expected an object", "$.sample")
    m = _require(sdoc, "m", "$.sample")
    if not isinstance(m, int) or m < 1:
        raise ConfigError("expected a positive integer", "$.sample.m")
    sample_seed = int(sdoc.get("seed", seed))
    sample = sample_prompts(prob.dist, m, sample_seed)
    out, srep = empirical_projection(prob.gen, sample, phi, prob.set, prob.pi0, prob.opts,
                                     dist=prob.dist)
    rep = SuiteReport("empirical", seed)
    _membership_checks(rep, prob, out)
    result = {"projection": out, "sample_counts": np.bincount(sample.indices, minlength=sample.n), "sample_seed": sample_seed,
              "solver": _solver_block(srep)}
    if prob.pi_star is not None:
        bounds = empirical_bound_report(prob.gen, prob.dist, sample, prob.set, phi, prob.pi0,
                                        prob.pi_star, opts=prob.opts, seed=sample_seed)
        for ineq in bounds.inequalities:
            verdict = bounds.verdict(ineq)
            rep.add(f"{ineq.name}: not violated", verdict != "violated", None, bounds.slack,
                    verdict=verdict)
        result["bounds"] = bounds.to_dict()
    return rep, result, {"projection": out}, srep.wall_ns


# -- verification suites ------------------------------------------------------------

def _suite_config(doc):
    from .harness.suites import SuiteConfig
    raw = dict(doc.get("suite_config") or {})
    if "M" in doc:
        raw["minimax_sweep"] = [doc["M"]] if not isinstance(doc["M"], list) else doc["M"]
    try:
        return SuiteConfig.from_dict(raw)
    except KeyError as e:
        raise ConfigError("unknown key", f"$.suite_config.{e.args[0]}") from None
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e), "$.suite_config") from None


def _run_one(args):
    from .harness.suites import run_suite
    name, seed, cfg = args
    t0 = time.perf_counter_ns()
    rep = run_suite(name, seed, cfg)
    return rep, time.perf_counter_ns() - t0


def run_suites(names, seed, cfg, jobs=1) -> list:
    """Run suites, in parallel when jobs > 1; results come back in the order of ``names``."""
    work = [(n, seed, cfg) for n in names]
    if jobs <= 1 or len(work) <= 1:
        return [_run_one(w) for w in work]
    with ProcessPoolExecutor(max_workers=min(jobs, len(work))) as pool:
        return list(pool.map(_run_one, work))


def task_verify(doc, seed, jobs=1):
    from .harness.suites import suite_names
    name = doc.get("suite", "all")
    try:
        names = suite_names(name)
    except UnknownSuite:
        raise ConfigError(f"unknown suite {name!r}", "$.suite") from None
    cfg = _suite_config(doc)
    results = run_suites(names, seed, cfg, jobs)
    return [r for r, _ in results], {n: w for n, (_, w) in zip(names, results)}


# -- output -----------------------------------------------------------------------

def _slug(s: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "_", s).strip("_").lower()


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return format_float(v)
    if isinstance(v, (list, tuple, dict)):
        return json.dumps(jsonable(v), sort_keys=True)
    return str(v)


def table_csv(rows) -> str | None:
    """RFC 4180 text for a list of flat dicts; None when the table has another shape."""
    if not isinstance(rows, list) or not rows or not all(isinstance(r, dict) for r in rows):
        return None
    cols = []
    for r in rows:
        cols.extend(k for k in r if k not in cols)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_cell(r.get(c, "")) for c in cols])
    return buf.getvalue()


def dumps(doc) -> str:
    return json.dumps(jsonable(doc), indent=2, sort_keys=True) + "\n"


def summary_text(task, reports, result=None) -> str:
    lines = [f"task: {task}"]
    if result is not None and "projection" in result:
        lines.append("projection:")
        for row in as_table(result["projection"]):
            lines.append("  " + "  ".join(f"{v:.5f}" for v in row))
    for rep in reports:
        lines.append(rep.summary())
        sweep = rep.tables.get("M_sweep")
        if sweep:
            lines.append("  M sweep:")
            for r in sweep:
                lines.append(f"    M={r['M']:g} gap={r['gap']:.6g} {r['verdict']}")
    n_fail = sum(len(r.failures) for r in reports)
    lines.append(f"overall: {'PASS' if n_fail == 0 else 'FAIL'} ({n_fail} failures)")
    return "\n".join(lines) + "\n"


def write_outputs(out_dir, task, seed, reports, result, tables, metadata) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    doc = {"version": 1, "task": task, "seed": seed,
           "ok": all(r.ok for r in reports),
           "reports": [r.to_dict() for r in reports]}
    if result is not None:
        doc["result"] = result
    (out / "report.json").write_text(dumps(doc), encoding="utf-8")
    (out / "metadata.json").write_text(dumps(metadata), encoding="utf-8")
    (out / "summary.txt").write_text(summary_text(task, reports, result), encoding="utf-8")
    for name, table in (tables or {}).items():
        (out / f"{_slug(name)}.csv").write_bytes(to_csv(table).encode("utf-8"))
    for rep in reports:
        for name, rows in rep.tables.items():
            text = table_csv(rows)
            if text is not None:
                (out / f"{_slug(rep.suite)}__{_slug(name)}.csv").write_bytes(text.encode("utf-8"))


# -- entry point --------------------------------------------------------------------

def configure_logging() -> None:
    raw = os.environ.get("COHERENCE_PROJ_LOG", "warn").strip().lower()
    level = LOG_LEVELS.get(raw)
    if level is None:
        raise ConfigError(f"expected one of error, warn, info, debug; got {raw!r}",
                          "env:COHERENCE_PROJ_LOG")
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", force=True)


def load_config(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config: {e.strerror}", "$") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON at line {e.lineno} column {e.colno}", "$") from None
    return validate(doc)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default="out", help="output directory (default: ./out)")
    common.add_argument("--seed", type=int, default=None, help="root seed, 0 <= seed < 2**64")
    common.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                        help="worker processes for suite-level parallelism")
    common.add_argument("--tol-override", type=float, default=None,
                        help="re-judge report verdicts at this tolerance; solvers are unaffected")

    p = argparse.ArgumentParser(prog="coherence-proj", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", parents=[common], help="execute the task in a config file")
    run.add_argument("--config", required=True, help="path to a JSON config with version 1")
    run.add_argument("--suite", default=None, help="override the suite of a verify config")
    mode = run.add_mutually_exclusive_group()
    mode.add_argument("--lambda-cap", type=float, default=None, help="constrained relaxed form")
    mode.add_argument("--penalty", type=float, default=None, help="penalized relaxed form")
    ver = sub.add_parser("verify", parents=[common], help="run a verification suite")
    ver.add_argument("--suite", default="all", help="suite name or 'all'")
    ver.add_argument("--config", default=None, help="optional config supplying suite_config")
    return p


def execute(args) -> int:
    configure_logging()
    if args.command == "run":
        doc = load_config(args.config)
        if args.suite is not None:
            doc["suite"] = args.suite
        if args.lambda_cap is not None:
            doc.pop("penalty", None)
            doc["lambda_cap"] = args.lambda_cap
        if args.penalty is not None:
            doc.pop("lambda_cap", None)
            doc["penalty"] = args.penalty
    else:
        doc = load_config(args.config) if args.config else {"version": 1, "task": "verify"}
        if doc["task"] != "verify":
            raise ConfigError("verify needs a config with task 'verify'", "$.task")
        doc["suite"] = args.suite
    seed = args.seed if args.seed is not None else doc.get("seed", 0)
    if not isinstance(seed, int) or not 0 <= seed < 2 ** 64:
        raise ConfigError("expected an integer in [0, 2**64)", "$.seed")
    task = doc["task"]
    log.info("task %s seed %d", task, seed)

    t0 = time.perf_counter_ns()
    result, tables = None, {}
    if task == "verify":
        reports, walls = task_verify(doc, seed, max(1, args.jobs))
    else:
        fn = {"project": task_project, "two-step": task_two_step, "relaxed": task_relaxed,
              "empirical": task_empirical}[task]
        rep, result, tables, solve_ns = fn(doc, seed)
        reports, walls = [rep], {"solver": solve_ns}
    if args.tol_override is not None:
        for r in reports:
            r.override_tolerance(args.tol_override)
    metadata = {"version": __version__, "task": task, "seed": seed, "jobs": args.jobs,
                "tol_override": args.tol_override, "wall_ns": walls,
                "total_wall_ns": time.perf_counter_ns() - t0,
                "finished_utc": _dt.datetime.now(_dt.timezone.utc).isoformat()}
    write_outputs(args.out, task, seed, reports, result, tables, metadata)
    sys.stdout.write(summary_text(task, reports, result))
    return EXIT_OK if all(r.ok for r in reports) else EXIT_FAIL


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return execute(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except CoherenceError as e:
        print(f"solver error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_SOLVER
    except np.linalg.LinAlgError as e:
        print(f"solver error: {e}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
