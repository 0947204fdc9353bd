"""Acceptance criteria, each run at its stated tolerance and time budget.

Every test records one PASS/FAIL line; the lines are printed at the end of the
session (and immediately when pytest runs with -s).
"""

import time

import numpy as np
import pytest

from coherence_proj.harness import run_suite
from coherence_proj.harness.rigidity import KERNEL_PI0, project_to_quarter_circle, toy_block_example
from coherence_proj.harness.suites import SuiteConfig, maximin, pythagorean, two_step_bounds

from conftest import ACCEPTANCE_LINES

CFG = SuiteConfig()


def record(label, ok, elapsed, budget, note=""):
    line = f"{'PASS' if ok else 'FAIL'}  {label}  ({elapsed:.2f} s, budget {budget:g} s){note}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def judge(label, budget, reports, extra_ok=True, note=""):
    elapsed = time.perf_counter() - judge.t0
    failures = [f"{r.suite}: {c.name}" for r in reports for c in r.failures]
    ok = not failures and extra_ok and elapsed < budget
    record(label, ok, elapsed, budget, note)
    assert not failures, failures
    assert extra_ok
    assert elapsed < budget


@pytest.fixture(autouse=True)
def _clock():
    judge.t0 = time.perf_counter()


def test_criterion_01_toy_golden_values():
    rep = toy_block_example()
    judge("1 toy-example golden values", 1.0, [rep])


def test_criterion_02_minimax_counterexample():
    rep = run_suite("minimax", 0, CFG)
    sweep = {row["M"]: row for row in rep.tables["M_sweep"]}
    verdicts = all(sweep[M]["violation"] == (M > 5) for M in (2.0, 5.0, 6.0, 10.0, 100.0))
    judge("2 minimax counterexample", 1.0, [rep], verdicts)


def test_criterion_03_rigidity_examples():
    rig = run_suite("rigidity", 0, CFG)
    ker = run_suite("kernel", 0, CFG)
    # the weighted kernel row disagrees with its published point; judged in the next test
    judge("3 rigidity examples and kernel circle (squared-Euclidean row)", 2.0, [rig, ker])


@pytest.mark.xfail(strict=True, reason="published weighted point is not the minimiser of the stated objective")
def test_criterion_03_kernel_weighted_published_point():
    p = project_to_quarter_circle((1.0, 10.0), KERNEL_PI0)
    err_p = float(np.max(np.abs(p - (0.985, 0.174))))
    err_z = float(np.max(np.abs(p * p - (0.97, 0.03))))
    ok = err_p <= 5e-4 and err_z <= 1e-3
    record("3 kernel circle, weighted generator vs published (0.985, 0.174)", ok,
           time.perf_counter() - judge.t0, 2.0,
           f"  computed ({p[0]:.6f}, {p[1]:.6f}), error {err_p:.3f}")
    assert ok


def test_criterion_04_direct_improvement():
    judge("4 direct-improvement property suite", 60.0, [run_suite("direct-improvement", 0, CFG)])


def test_criterion_05_equivalence():
    rep = run_suite("equivalence", 0, CFG)
    worst = max(c.value for c in rep.checks if c.name.startswith("max |direct - two-step|"))
    judge("5 equivalence suite", 60.0, [rep], worst <= 1e-7, f"  max diff {worst:.2e}")


def test_criterion_06_two_step_bounds():
    judge("6 two-step bound suite", 30.0, [two_step_bounds(0, CFG)])


def test_criterion_07_pythagorean():
    judge("7 Pythagorean equality", 30.0, [pythagorean(0, CFG)])


def test_criterion_08_maximin():
    judge("8 maximin", 120.0, [maximin(0, CFG)])


def test_criterion_09_empirical():
    rep = run_suite("empirical", 0, CFG)
    cons = [c for c in rep.checks if "consistency" in c.name]
    judge("9 empirical suite", 180.0, [rep], bool(cons),
          f"  consistency median {cons[0].value:.2e}" if cons else "")


def test_criterion_10_impossibility():
    reps = [run_suite("orbit-average", 0, CFG), run_suite("impossibility", 0, CFG)]
    judge("10 impossibility suites", 120.0, reps)


def test_criterion_11_numerical_hygiene():
    judge("11 numerical hygiene", 30.0, [run_suite("bregman-identities", 0, CFG)])


def test_four_point_residual_on_affine_instances():
    rep = run_suite("rigidity", 0, CFG)
    fp = [c for c in rep.checks if c.name == "(c) four-point residual"]
    ok = bool(fp) and fp[0].passed and abs(fp[0].value) <= 1e-8
    judge("rigidity acceptance: four-point residual |A(F,G)| <= 1e-8", 2.0, [], ok,
          f"  residual {fp[0].value:.2e}" if fp else "")
