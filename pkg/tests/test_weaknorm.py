import math

import pytest

from levelset import UnsupportedError, UsageError, parse_function
from levelset.experiments import gagliardo_indicator_oracle
from levelset.report import Verdict
from levelset.weaknorm import (
    WeakNormEstimate,
    check_monotone,
    check_quasi_triangle,
    default_lambda_grid,
    gagliardo_seminorm_p_power,
    weak_quasinorm_p_power,
)

P = parse_function
GRID = default_lambda_grid(9, 1e-2, 1e2)


# --------------------------------------------------------------- weak norm


def test_default_grid_is_decreasing_and_spans_eight_decades():
    g = default_lambda_grid()
    assert len(g) == 33 and g[0] == pytest.approx(1e4) and g[-1] == pytest.approx(1e-4)
    assert all(b < a for a, b in zip(g, g[1:]))


def test_heart_profile_is_flat():
    w = weak_quasinorm_p_power(P("ball a=1 r=1"), P("zero"), 1, GRID, 5000, seed=1)
    assert w.value_p_power == pytest.approx(4.0, rel=1e-13)
    assert all(val == pytest.approx(4.0, rel=1e-13) for _, val, _ in w.profile)
    assert w.lower_bound_from_limit == pytest.approx(4.0)
    assert w.stderr == 0.0


def test_zero_pair():
    w = weak_quasinorm_p_power(P("zero"), P("zero"), 2, GRID, 1000)
    assert w.value_p_power == 0.0 and w.value == 0.0


def test_opposite_pair_supremum_near_small_lambda_limit():
    # lam |E_lam(chi, -chi)| = 4 - 2 lam for lam <= 1, so the sup is 4 (approached as lam -> 0)
    u = P("interval lo=0 hi=1")
    w = weak_quasinorm_p_power(u, P("neg(interval lo=0 hi=1)"), 1, None, 50_000, seed=3, refine_rounds=1)
    assert w.value_p_power <= 4.0 + 3 * w.stderr
    assert w.value_p_power >= 4.0 - 0.01 - 3 * w.stderr
    assert w.argmax_lambda <= 1e-2


def test_value_reported_at_argmax_is_fresh_estimate():
    u, v = P("ball a=1 r=1"), P("ball a=-0.5 r=0.5")
    w = weak_quasinorm_p_power(u, v, 2, GRID, 20_000, seed=5, refine_rounds=2)
    probe = dict((lam, val) for lam, val, _ in w.profile)
    assert w.argmax_lambda in probe
    assert w.value_p_power != probe[w.argmax_lambda]
    assert abs(w.value_p_power - probe[w.argmax_lambda]) <= 5 * w.stderr * math.sqrt(2)


def test_homogeneity_under_scaling():
    u, v = "ball a=1 r=1", "step radii=0.5,1 values=1,-1"
    base = weak_quasinorm_p_power(P(u), P(v), 2, GRID, 100_000, seed=2)
    c = 3.0
    scaled = weak_quasinorm_p_power(P(f"scale[{c}]({u})"), P(f"scale[{c}]({v})"), 2, GRID, 100_000, seed=8)
    se = math.hypot(c**2 * base.stderr, scaled.stderr)
    assert scaled.value_p_power == pytest.approx(c**2 * base.value_p_power, abs=4 * se + 1e-9)


@pytest.mark.parametrize("kw", [
    {"lambda_grid": [1.0]},
    {"lambda_grid": [1.0, 0.1]},
    {"lambda_grid": [1e2, -1.0, 1e-3]},
    {"refine_rounds": -1},
])
def test_weak_norm_argument_checks(kw):
    kw.setdefault("lambda_grid", GRID)
    with pytest.raises(UsageError):
        weak_quasinorm_p_power(P("ball"), P("zero"), 1, n_samples=100, **kw)


def test_estimate_root():
    e = WeakNormEstimate(8.0, 1.0, (1.0,), 0.0, 0.0, 3.0)
    assert e.value == pytest.approx(2.0)


# ------------------------------------------------------------------ checks


def test_quasi_triangle_verdicts():
    v = check_quasi_triangle(4.0, 4.0, 8.0, 1)
    assert isinstance(v, Verdict) and v.passed and v.target == pytest.approx(8.0)
    assert not check_quasi_triangle(1.0, 1.0, 20.0, 2).passed
    # p = 2: bound is 2 ([f] + [g]) on the roots
    v = check_quasi_triangle(1.0, 1.0, 15.9, 2)
    assert v.passed and v.target == pytest.approx(4.0) and v.measured == pytest.approx(math.sqrt(15.9))


def test_quasi_triangle_allowance_uses_stderr():
    assert not check_quasi_triangle((1.0, 0.0), (1.0, 0.0), (2.2, 0.0), 1).passed
    assert check_quasi_triangle((1.0, 0.0), (1.0, 0.0), (2.2, 0.1), 1).passed


def test_monotone_verdicts():
    assert check_monotone((1.0, 2.0), 1).passed
    assert not check_monotone((3.0, 2.0), 1).passed
    assert check_monotone(((3.0, 1.0), (2.0, 0.0)), 1).passed


# --------------------------------------------------------------- Gagliardo


@pytest.mark.parametrize("s, p", [(0.5, 1), (0.3, 1), (0.3, 2), (0.2, 3), (0.7, 1)])
def test_indicator_closed_form(s, p):
    # chi_[0,1]: 4 / (s p (1 - s p)) whenever s p < 1
    g = gagliardo_seminorm_p_power(P("interval lo=0 hi=1"), s, p, tol=1e-7)
    want = 4.0 / (s * p * (1 - s * p))
    assert not g.diverged
    assert g.value == pytest.approx(want, rel=1e-6)
    assert abs(g.value - want) <= max(g.error, 1e-7) * 10


@pytest.mark.parametrize("a, lo, hi, s, p", [(1, 0, 1, 0.5, 1), (2, -1, 2, 0.4, 2), (-1.5, 3, 3.5, 0.6, 1)])
def test_indicator_against_scipy(a, lo, hi, s, p):
    g = gagliardo_seminorm_p_power(P(f"interval a={a} lo={lo} hi={hi}"), s, p, tol=1e-8)
    assert g.value == pytest.approx(gagliardo_indicator_oracle(lo, hi, a, s, p), rel=1e-6)


def test_gaussian_matches_fourier_closed_forms():
    # s = 1/2, p = 2 equals the integral of |xi| |u_hat|^2 up to the dimension constant
    g1 = gagliardo_seminorm_p_power(P("gauss a=1 w=1"), 0.5, 2, tol=1e-8)
    assert g1.value == pytest.approx(2 * math.pi, rel=1e-6)
    g2 = gagliardo_seminorm_p_power(P("gauss a=1 w=1 n=2"), 0.5, 2, tol=1e-8)
    assert g2.value == pytest.approx(2 * math.pi**2 * math.sqrt(math.pi / 2), rel=1e-6)


@pytest.mark.parametrize("s, p", [(0.6, 2), (0.5, 2), (0.9, 2), (0.4, 3)])
def test_divergence_flag_for_jumps(s, p):
    g = gagliardo_seminorm_p_power(P("interval lo=0 hi=1"), s, p)
    assert g.diverged and g.value == math.inf


def test_smooth_function_converges_where_indicator_diverges():
    assert not gagliardo_seminorm_p_power(P("gauss"), 0.6, 2).diverged


def test_translation_and_scaling():
    a = gagliardo_seminorm_p_power(P("ball a=1 r=0.5"), 0.4, 2, tol=1e-8).value
    b = gagliardo_seminorm_p_power(P("shift[7](scale[-2](ball a=1 r=0.5))"), 0.4, 2, tol=1e-8).value
    assert b == pytest.approx(4 * a, rel=1e-7)


def test_gagliardo_zero_and_argument_checks():
    assert gagliardo_seminorm_p_power(P("zero"), 0.5, 1).value == 0.0
    for s in (0.0, 1.0, -0.1):
        with pytest.raises(UsageError):
            gagliardo_seminorm_p_power(P("ball"), s, 1)
    with pytest.raises(UsageError):
        gagliardo_seminorm_p_power(P("ball"), 0.5, 1, tol=0)
    with pytest.raises(UnsupportedError):
        gagliardo_seminorm_p_power(P("ball n=3"), 0.5, 1)
    with pytest.raises(UnsupportedError):
        gagliardo_seminorm_p_power(P("power alpha=0.5 r=1"), 0.2, 1)
