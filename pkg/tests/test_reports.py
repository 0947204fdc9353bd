import json
import math

import numpy as np

from coherence_proj.reports import BoundReport, Check, Inequality, SuiteReport, jsonable


def test_jsonable_handles_numpy_and_nonfinite():
    doc = jsonable({"a": np.float64(0.5), "b": np.array([1, 2]), "c": math.inf, "d": np.bool_(True),
                    "e": float("nan")})
    assert doc == {"a": 0.5, "b": [1, 2], "c": "inf", "d": True, "e": "nan"}
    json.dumps(doc)


def test_within_and_at_least_senses():
    rep = SuiteReport("x", 0)
    rep.within("small", 1e-10, 1e-9)
    rep.at_least("nonneg", -1e-13, 1e-12)
    assert rep.ok
    rep.override_tolerance(1e-14)
    assert [c.passed for c in rep.checks] == [False, False]
    assert all(c.threshold == 1e-14 for c in rep.checks)


def test_override_leaves_plain_checks_alone():
    rep = SuiteReport("x", 0)
    rep.add("structural", True, None, None)
    rep.override_tolerance(0.0)
    assert rep.checks[0].passed


def test_negative_controls_and_documented_checks_are_not_failures():
    rep = SuiteReport("x", 0)
    rep.add("control", False, negative_control=True)
    rep.add("published", False, documented=True)
    assert rep.ok and rep.failures == []
    assert [c.name for c in rep.documented_failures] == ["published"]
    assert "DOC published" in rep.summary()


def test_extend_prefixes_checks_and_tables():
    inner = SuiteReport("in", 0)
    inner.within("v", 0.1, 1.0)
    inner.tables["t"] = [{"a": 1}]
    outer = SuiteReport("out", 0)
    outer.extend(inner, "in: ")
    assert outer.checks[0].name == "in: v" and outer.checks[0].sense == "le"
    assert "in: t" in outer.tables


def test_check_rejudge_ge():
    c = Check("g", True, value=-0.5, sense="ge")
    c.rejudge(1.0)
    assert c.passed
    c.rejudge(0.1)
    assert not c.passed


def test_bound_report_verdicts():
    ineq = Inequality("i", lhs=1.0, base=0.5, coef=1.0)
    assert BoundReport(0.6, 1.0, "t", [ineq]).verdict(ineq) == "holds"
    assert BoundReport(0.1, 0.2, "t", [ineq]).verdict(ineq) == "violated"
    assert BoundReport(0.1, 1.0, "t", [ineq]).verdict(ineq) == "inconclusive"
    assert BoundReport(0.1, None, "t", [ineq]).verdict_upper(ineq) == "unavailable"
    assert Inequality("j", 0.0, 1.0, 2.0).rhs(math.inf) == math.inf
