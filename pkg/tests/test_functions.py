import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy import integrate as si

from levelset import (
    AbsValue,
    BallIndicator,
    Gaussian,
    Negated,
    RadialStep,
    Scaled,
    Shifted,
    SpecParseError,
    TruncatedPower,
    UsageError,
    WeakLpWitness,
    Zero,
    interval,
    parse_function,
    unit_ball_volume,
)

P = parse_function


# ---------------------------------------------------------------- examples


def test_eval_examples():
    b = BallIndicator(1.0, 1.0, 1)
    assert b(np.array([0.5])) == 1.0
    assert b(np.array([2.0])) == 0.0
    assert b(np.array([1.0])) == 1.0  # closed ball
    assert Gaussian(dimension=2)(np.zeros(2)) == 1.0


def test_eval_is_vectorized():
    f = P("ball a=2 r=1 n=2")
    pts = np.array([[0.0, 0.0], [0.9, 0.0], [1.0, 1.0]])
    assert list(f(pts)) == [2.0, 2.0, 0.0]


def test_dimension_mismatch_is_usage_error():
    with pytest.raises(UsageError):
        BallIndicator(1.0, 1.0, 1)(np.zeros(2))


def test_lp_norm_examples():
    assert BallIndicator(1.0, 1.0, 1).lp_norm_p_power(1) == 2.0
    assert Gaussian().lp_norm_p_power(2) == pytest.approx(math.sqrt(math.pi / 2), rel=1e-14)
    assert TruncatedPower(1.0, 0.5, 1.0, 1).lp_norm_p_power(1) == pytest.approx(4.0, rel=1e-14)
    assert WeakLpWitness(1.0, 2.0, 1).lp_norm_p_power(2) == math.inf


def test_truncated_power_not_in_lp_when_alpha_p_reaches_n():
    assert TruncatedPower(1.0, 0.5, 1.0, 1).lp_norm_p_power(2) == math.inf


def test_p_below_one_rejected():
    with pytest.raises(UsageError):
        BallIndicator(1.0, 1.0, 1).lp_norm_p_power(0.5)


def test_support_and_sup_examples():
    assert BallIndicator(1.0, 3.0, 1).support_radius() == 3.0
    assert Zero(1).support_radius() == 0.0
    assert Gaussian().support_radius() == math.inf
    assert BallIndicator(2.0, 1.0, 1).sup_norm() == 2.0
    assert Gaussian().sup_norm() == 1.0
    assert TruncatedPower(1.0, 0.5, 1.0, 1).sup_norm() == math.inf


def test_shifted_support_radius_adds_offset():
    f = Shifted(BallIndicator(1.0, 0.5, 1), (0.5,))
    assert f.support_radius() == 1.0
    assert f == interval(0.0, 1.0)


def test_witness_is_infinite_at_origin_and_weak_norm():
    w = WeakLpWitness(1.0, 2.0, 1)
    assert w(np.array([0.0])) == math.inf
    assert w.weak_norm_p_power() == pytest.approx(2.0)


@pytest.mark.parametrize("n, value", [(1, 2.0), (2, math.pi), (3, 4 * math.pi / 3)])
def test_unit_ball_volume(n, value):
    assert unit_ball_volume(n) == pytest.approx(value, rel=1e-15)


@pytest.mark.parametrize("n", range(1, 12))
def test_unit_ball_volume_matches_gamma(n):
    assert unit_ball_volume(n) == pytest.approx(math.pi ** (n / 2) / math.gamma(n / 2 + 1), rel=1e-14)


# -------------------------------------------------------- quadrature oracle


COMPACT = [
    "ball a=1 r=1 n=1",
    "ball a=-2 r=0.5 n=2",
    "step radii=0.5,1 values=2,-1 n=1",
    "step radii=1,2 values=1,3 n=2",
    "gauss a=1.5 w=0.7 cutoff=2 n=1",
    "gauss a=1 w=1 cutoff=1.5 n=2",
    "power a=1 alpha=0.3 r=1 n=1",
    "power a=2 alpha=0.5 r=2 n=2",
]


def _radial_norm_scipy(f, p):
    form = f.radial_form()
    N = f.dimension
    area = N * unit_ball_volume(N)
    pts = [b for b in form.breakpoints if 0 < b < form.support]
    val, _ = si.quad(lambda r: area * r ** (N - 1) * abs(float(form.profile(np.array([r]))[0])) ** p,
                     0, form.support, points=pts or None, limit=200, epsabs=1e-13, epsrel=1e-12)
    return val


@pytest.mark.parametrize("spec", COMPACT)
@pytest.mark.parametrize("p", [1.0, 1.5, 2.0])
def test_closed_form_norm_matches_scipy_quadrature(spec, p):
    f = P(spec)
    exact = f.lp_norm_p_power(p)
    if math.isinf(exact):
        pytest.skip("not in L^p")
    assert _radial_norm_scipy(f, p) == pytest.approx(exact, rel=1e-6)


def test_closed_form_norm_for_interval_by_scipy_1d():
    f = P("shift[3](interval a=2 lo=-1 hi=0.5)")
    val, _ = si.quad(lambda x: abs(float(f(np.array([x])))) ** 3, -5, 10, points=[2, 3.5], limit=200)
    assert val == pytest.approx(f.lp_norm_p_power(3), rel=1e-8)


def test_tail_and_excess_match_direct_integration():
    g = Gaussian(1.0, 1.0, math.inf, 1)
    for R in (0.5, 1.0, 2.0):
        val, _ = si.quad(lambda x: math.exp(-2 * x * x), R, math.inf)
        assert g.tail_p_power(2, R) == pytest.approx(2 * val, rel=1e-10)
    level = 0.5
    rho = math.sqrt(math.log(2))
    val, _ = si.quad(lambda x: math.exp(-2 * x * x), -rho, rho)
    assert g.excess_p_power(2, level) == pytest.approx(val, rel=1e-10)


# ---------------------------------------------------------------- wrappers


WRAPPABLE = COMPACT + ["gauss a=1 w=1 n=1", "zero n=2"]


@pytest.mark.parametrize("spec", WRAPPABLE)
@pytest.mark.parametrize("c", [-2.0, 0.5, 3.0])
def test_scaled_norm(spec, c):
    f = P(spec)
    for p in (1.0, 2.0):
        base = f.lp_norm_p_power(p)
        if math.isinf(base):
            continue
        assert Scaled(f, c).lp_norm_p_power(p) == pytest.approx(abs(c) ** p * base, rel=1e-14)


@pytest.mark.parametrize("spec", WRAPPABLE)
def test_shift_abs_neg_preserve_norms(spec):
    f = P(spec)
    a = tuple(0.7 * (k + 1) for k in range(f.dimension))
    for p in (1.0, 2.0, 3.0):
        base = f.lp_norm_p_power(p)
        for g in (Shifted(f, a), AbsValue(f), Negated(f)):
            assert g.lp_norm_p_power(p) == base
    assert Shifted(f, a).sup_norm() == f.sup_norm()


@settings(max_examples=60, deadline=None)
@given(st.floats(-3, 3), st.floats(0.1, 2), st.floats(-5, 5))
def test_wrapper_evaluation_identities(c, r, x):
    assume(abs(abs(x) - r) > 1e-9)  # shifting by 1.5 rounds points on the sphere
    f = BallIndicator(1.0, r, 1)
    pt = np.array([x])
    assert Scaled(f, c)(pt) == c * f(pt)
    assert Negated(f)(pt) == -f(pt)
    assert AbsValue(Scaled(f, c))(pt) == abs(c) * f(pt)
    assert Shifted(f, (1.5,))(pt + 1.5) == f(pt)


def test_nested_wrapper_norms():
    f = P("shift[1,2](abs(scale[-2](step radii=1,2 values=1,-1 n=2)))")
    t = f.norms(2)
    assert t.sup_norm == 2.0
    assert t.lp_norm_p_power == pytest.approx(4 * math.pi * 4, rel=1e-14)


def test_norm_table_sup_dominates_average():
    for spec in COMPACT[:4]:
        f = P(spec)
        t = f.norms(2)
        vol = unit_ball_volume(f.dimension) * f.support_radius() ** f.dimension
        assert t.sup_norm >= (t.lp_norm_p_power / vol) ** 0.5 - 1e-12


# ------------------------------------------------------------------ parser


SPECS = [
    "ball a=1 r=1 n=1",
    "step radii=0.5,1 values=1,-1 n=1",
    "gauss a=1 w=1 cutoff=inf n=2",
    "gauss a=1 w=2 cutoff=3 n=1",
    "power a=1 alpha=0.5 r=1 n=1",
    "witness a=1 p=2 n=1",
    "zero n=3",
    "abs(ball a=1 r=2 n=1)",
    "neg(scale[0.5](shift[1,-1](ball a=3 r=0.25 n=2)))",
]


@pytest.mark.parametrize("spec", SPECS)
def test_spec_round_trip(spec):
    f = P(spec)
    assert P(f.to_spec()) == f


def test_defaults_and_short_forms():
    assert P("gauss n=2") == Gaussian(1.0, 1.0, math.inf, 2)
    assert P("ball") == BallIndicator(1.0, 1.0, 1)
    assert P("power alpha=0.5 r=1 n=1") == TruncatedPower(1.0, 0.5, 1.0, 1)
    assert P("interval lo=0 hi=1") == interval(0.0, 1.0)
    assert P("step radii=1,2 values=1,3") == RadialStep((1.0, 2.0), (1.0, 3.0), 1)


@pytest.mark.parametrize("bad, pos", [
    ("ball a=1 r=(", 11),
    ("bal a=1", 0),
    ("abs(ball a=1 r=1", 16),
    ("shift[1,2](ball n=1)", 0),
    ("ball a=1 r=1 n=1 extra", 17),
])
def test_parse_errors_report_position(bad, pos):
    with pytest.raises(SpecParseError) as err:
        P(bad)
    assert err.value.position == pos
    assert "^" in str(err.value)


def test_parse_error_is_usage_error():
    with pytest.raises(UsageError):
        P("ball r=-1")


def test_functions_are_immutable():
    f = BallIndicator(1.0, 1.0, 1)
    with pytest.raises(Exception):
        f.radius = 2.0
