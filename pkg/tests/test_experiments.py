import math
import warnings

import numpy as np
import pytest

from levelset import Gaussian, UnsupportedError, UsageError, parse_function
from levelset import experiments as ex
from levelset.report import Report, Verdict

P = parse_function


def test_default_schedule():
    s = ex.default_schedule()
    assert len(s) == 11 and s[0] == 1.0 and s[-1] == 2.0**-10


def test_analytic_target_and_envelope():
    u, v = P("interval lo=0 hi=1"), P("interval lo=4 hi=5")
    assert ex.analytic_target(u, v, 1) == 4.0
    assert ex.common_radius(u, v) == 5.0
    lo, hi = ex.envelope_bounds(u, v, 1, 5.0, 0.01)
    w = 0.01 * 4 * 25
    assert (lo, hi) == pytest.approx((4 - 2 * w, 4 + w))


def test_fit_limit_recovers_line():
    lams = [2.0 ** -k for k in range(8)]
    vals = [3.0 + 0.7 * t**2 for t in lams]
    a, b, a_se, rms = ex.fit_limit(lams, vals, [0.01] * 8, 2, n_fit=5)
    assert a == pytest.approx(3.0, abs=1e-12) and b == pytest.approx(0.7, abs=1e-9)
    assert rms < 1e-12 and a_se > 0


def test_fit_uses_smallest_lambdas():
    lams = [1.0, 0.5, 0.25, 0.125]
    vals = [100.0, 50.0, 1.0, 1.0]  # large-lambda junk must be ignored
    a, *_ = ex.fit_limit(lams, vals, [0.0] * 4, 1, n_fit=2)
    assert a == pytest.approx(1.0)


def test_truncate():
    g = ex.truncate(P("scale[2](gauss a=1 w=1)"), 3.0)
    assert g.support_radius() == 3.0
    b = P("ball a=1 r=1")
    assert ex.truncate(b, 2.0) is b
    with pytest.raises(UnsupportedError):
        ex.truncate(P("witness a=1 p=2"), 2.0)
    with pytest.raises(UsageError):
        ex.truncate(b, 0.0)


def test_verify_heart_small():
    r = ex.verify_heart(P("ball a=1 r=1"), 1, [0.1, 1, 10], 20_000, 1)
    assert r.passed, [v.line() for v in r.verdicts if not v.passed]
    names = " ".join(v.name for v in r.verdicts)
    assert "exact" in names and "grid" in names
    assert len(r.results["per_lambda"]) == 3


def test_verify_heart_truncates_gaussian():
    r = ex.verify_heart(P("gauss a=1 w=1"), 2, [0.5, 2.0], 20_000, 2, grid_h=None)
    assert r.passed, [v.line() for v in r.verdicts if not v.passed]


def test_limit_sweep_heart_is_flat():
    res = ex.limit_sweep(P("ball a=1 r=1"), P("zero"), 1, None, 5000, 3)
    assert res.extrapolated_limit == pytest.approx(4.0, rel=1e-12)
    assert all(val == pytest.approx(4.0) for _, val, _ in res.pairs)
    assert len(res.rows) == 11


def test_limit_sweep_volume_budget_warns():
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        res = ex.limit_sweep(P("interval lo=0 hi=1"), P("interval lo=4 hi=5"), 1, None, 5000, 3,
                             volume_budget=50.0)
    assert res.dropped
    assert any(issubclass(x.category, ex.VolumeBudgetWarning) for x in w)


def test_gy_reduction_closed_form():
    # lam |E_lam(chi, -chi)| = 4 - 2 lam, limit 4
    r = ex.gy_reduction(P("interval lo=0 hi=1"), 1, None, 200_000, 5)
    assert r.passed
    assert r.results["extrapolated_limit"] == pytest.approx(4.0, rel=0.02)
    rows = r.sweep_rows()
    assert [row["lambda"] for row in rows] == ex.default_schedule()


def test_envelope_check_small():
    r = ex.envelope_check(P("interval lo=0 hi=1"), P("interval a=-1 lo=2 hi=3"), 1,
                          n_samples=50_000, seed=4, grid_h=4e-3)
    assert r.passed, [v.line() for v in r.verdicts if not v.passed]
    for row in r.sweep_rows():
        assert row["envelope_lo"] <= row["envelope_hi"]


def test_sandwich_check_small():
    r = ex.sandwich_check(P("ball a=1 r=1"), P("ball a=1 r=0.5"), 2, 50_000, 6,
                          lambda_grid=[1e2, 1e1, 1, 1e-1, 1e-2], refine_rounds=1)
    assert r.passed, [v.line() for v in r.verdicts if not v.passed]


def test_sandwich_exposes_weak_l1_counterexample():
    # two far-apart unit intervals at p = 1: sup lam |E_lam| exceeds ||u||_1 + ||v||_1 = 2
    # times kappa = 2, because the cross pairs add mass at moderate lambda
    r = ex.sandwich_check(P("interval lo=0 hi=1"), P("interval lo=4 hi=5"), 1, 400_000, 7,
                          lambda_grid=list(np.geomspace(10, 1e-3, 13)), refine_rounds=3)
    upper = [v for v in r.verdicts if v.name.startswith("upper")][0]
    assert upper.measured > 4.2
    assert not upper.passed


def test_corollary_forms_small():
    # the minus form has lam |E_lam| = 4 - 2 lam, so the grid must reach small lambda
    r = ex.corollary_forms(P("interval lo=0 hi=1"), 1, 50_000, 8,
                           lambda_grid=[1e1, 1, 1e-1, 1e-2, 1e-3, 1e-4], refine_rounds=1)
    assert r.passed, [v.line() for v in r.verdicts if not v.passed]


def test_truncation_study_gaussian():
    r = ex.truncation_study(P("gauss a=1 w=1"), P("zero"), 2, (2.0, 3.0, 4.0), None, 100_000, 9)
    assert r.passed, [v.line() for v in r.verdicts if not v.passed]
    assert ex.analytic_target(Gaussian(), P("zero"), 2) == pytest.approx(math.sqrt(2 * math.pi))


def test_gagliardo_oracle_and_check():
    assert ex.gagliardo_indicator_oracle(0.0, 1.0, 1.0, 0.5, 1.0) == pytest.approx(16.0, rel=1e-9)
    assert ex.gagliardo_check(P("interval lo=0 hi=1"), 0.5, 1, target=16.0).passed
    assert ex.gagliardo_check(P("interval lo=0 hi=1"), 0.6, 2, expect_divergent=True).passed
    assert not ex.gagliardo_check(P("interval lo=0 hi=1"), 0.5, 1, target=17.0).passed


def test_merge_reports():
    a = Report("a", {"x": 1}, {}, [Verdict("one", True, 1, 1, 0)], 1.0)
    b = Report("b", {}, {}, [Verdict("two", False, 1, 0, 0)], 2.0)
    m = ex.merge_reports("m", [a, b])
    assert [v.name for v in m.verdicts] == ["a: one", "b: two"]
    assert m.wall_time_seconds == 3.0 and not m.passed
