import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from levelset import PreconditionError, UnsupportedError, UsageError, parse_function
from levelset.measure import (
    LevelSetQuery,
    MeasureValue,
    exact_single_measure,
    grid_bruteforce_measure,
    radial_quadrature_measure,
    worker_count,
)
from levelset.montecarlo import bounding_region

P = parse_function


def Q(u, v, p, lam):
    return LevelSetQuery(P(u), P(v), p, lam)


def box(q):
    return bounding_region(q.u, q.v, q.p, q.lam).required_halfwidth + 1e-6


# ---------------------------------------------------------------- examples


def test_exact_examples():
    assert exact_single_measure(Q("ball a=1 r=1", "zero", 1, 1)).measure == 4.0
    assert exact_single_measure(Q("ball a=1 r=1", "zero", 1, 10)).measure == pytest.approx(0.4, rel=1e-15)
    m = exact_single_measure(Q("zero", "zero", 1, 3))
    assert m.measure == 0.0 and m.method == "exact" and m.error_bound == 0.0


def test_exact_requires_zero_v():
    with pytest.raises(PreconditionError):
        exact_single_measure(Q("ball", "ball", 1, 1))


def test_exact_infinite_for_non_lp():
    assert exact_single_measure(Q("power alpha=0.5 r=1", "zero", 2, 1)).measure == math.inf


def test_measure_value_invariants():
    with pytest.raises(Exception):
        MeasureValue(-1.0, "grid", None)
    with pytest.raises(Exception):
        MeasureValue(1.0, "exact", 0.5)


def test_query_validation():
    with pytest.raises(UsageError):
        Q("ball", "ball n=2", 1, 1)
    with pytest.raises(UsageError):
        Q("ball", "zero", 1, 0.0)
    with pytest.raises(UsageError):
        Q("ball", "zero", 0.5, 1)


def test_radial_quadrature_examples():
    r = radial_quadrature_measure(Q("ball a=1 r=1", "zero", 1, 1), tol=1e-8)
    assert r.measure == pytest.approx(4.0, abs=1e-8)
    assert r.method == "quadrature"
    assert radial_quadrature_measure(Q("zero", "zero", 1, 1)).measure == 0.0


def test_radial_quadrature_rejects_bad_input():
    with pytest.raises(UsageError):
        radial_quadrature_measure(Q("ball", "zero", 1, 1), tol=0)
    with pytest.raises(UnsupportedError):
        radial_quadrature_measure(Q("interval lo=0 hi=1", "interval lo=4 hi=5", 1, 1))


def test_grid_examples():
    g = grid_bruteforce_measure(Q("interval lo=0 hi=1", "zero", 1, 1), 5, 1e-3)
    assert g.measure == pytest.approx(2.0, abs=0.01)
    big = grid_bruteforce_measure(Q("interval lo=0 hi=1", "interval lo=4 hi=5", 1, 1e6), 6, 1e-3)
    assert big.measure <= 4.1 / 1e6
    assert grid_bruteforce_measure(Q("zero", "zero", 1, 1), 1, 1e-2).measure == 0.0


def test_grid_box_too_small_names_required_halfwidth():
    with pytest.raises(PreconditionError, match="need at least 2"):
        grid_bruteforce_measure(Q("ball a=1 r=1", "zero", 1, 1), 1.5, 1e-3)


def test_grid_only_in_one_dimension():
    with pytest.raises(UnsupportedError):
        grid_bruteforce_measure(Q("ball n=2", "zero n=2", 1, 1), 5, 0.1)


def test_grid_identical_across_workers():
    q = Q("step radii=0.5,1 values=2,-1", "ball a=1 r=0.7", 1.5, 0.8)
    b = box(q)
    ms = {grid_bruteforce_measure(q, b, 2e-3, workers=w).measure for w in (1, 3, 8)}
    assert len(ms) == 1


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("LEVELSET_THREADS", "3")
    assert worker_count() == 3
    assert worker_count(5) == 5
    monkeypatch.delenv("LEVELSET_THREADS")
    assert worker_count() >= 1


# --------------------------------------------------------- cross-oracle


RADIAL_PAIRS = [
    ("ball a=1 r=1", "ball a=1 r=1", 1),
    ("ball a=1 r=1", "neg(ball a=1 r=1)", 1),
    ("step radii=0.5,1 values=2,-1", "ball a=1 r=0.7", 1),
    ("ball a=2 r=0.5", "step radii=0.3,1 values=1,1.5", 2),
    ("gauss a=1 w=0.5 cutoff=1.5", "ball a=-1 r=1", 1),
]


@pytest.mark.parametrize("u, v, p", RADIAL_PAIRS)
@pytest.mark.parametrize("lam", [0.5, 2.0])
def test_quadrature_agrees_with_grid(u, v, p, lam):
    q = Q(u, v, p, lam)
    quad = radial_quadrature_measure(q, tol=1e-7).measure
    grid = grid_bruteforce_measure(q, box(q), 1e-3).measure
    assert grid == pytest.approx(quad, rel=0.01, abs=1e-3)


def test_known_closed_form_two_balls():
    # u = v = chi_[-1,1], p = 1: lam L = 8 - 4 lam for small lam, 6 at lam = 1
    for lam, want in ((0.25, 7.0), (1.0, 6.0)):
        m = radial_quadrature_measure(Q("ball a=1 r=1", "ball a=1 r=1", 1, lam), tol=1e-9).measure
        assert lam * m == pytest.approx(want, abs=1e-7)


def test_gy_closed_form():
    # u = chi_[0,1], v = -u: lam L = 4 - 2 lam for lam <= 1 (grid oracle)
    for lam in (0.25, 0.5):
        q = Q("interval lo=0 hi=1", "neg(interval lo=0 hi=1)", 1, lam)
        assert lam * grid_bruteforce_measure(q, box(q), 1e-3).measure == pytest.approx(
            4 - 2 * lam, rel=5e-3)


def test_quadrature_matches_exact_for_v_zero_in_two_and_three_dims():
    for n in (2, 3):
        for spec in (f"ball a=1 r=1 n={n}", f"gauss a=1 w=1 cutoff=2 n={n}"):
            q = LevelSetQuery(P(spec), P(f"zero n={n}"), 1.5, 0.7)
            want = exact_single_measure(q).measure
            assert radial_quadrature_measure(q, tol=1e-7).measure == pytest.approx(want, rel=1e-6)


def test_quadrature_handles_singular_power_and_gaussian_tail():
    q = Q("power a=1 alpha=0.4 r=1", "zero", 2, 1.3)
    assert radial_quadrature_measure(q, tol=1e-8).measure == pytest.approx(
        exact_single_measure(q).measure, rel=1e-6)
    q = Q("gauss a=1 w=1", "gauss a=0.5 w=2", 2, 0.9)
    a = radial_quadrature_measure(q, tol=1e-6).measure
    b = radial_quadrature_measure(q.swapped(), tol=1e-6).measure
    assert a == pytest.approx(b, rel=1e-5)


# --------------------------------------------------------------- properties


@pytest.mark.parametrize("u, v, p", RADIAL_PAIRS[:3])
def test_swap_symmetry(u, v, p):
    q = Q(u, v, p, 0.8)
    assert radial_quadrature_measure(q, 1e-8).measure == pytest.approx(
        radial_quadrature_measure(q.swapped(), 1e-8).measure, abs=3e-8)
    g1 = grid_bruteforce_measure(q, box(q), 2e-3).measure
    g2 = grid_bruteforce_measure(q.swapped(), box(q), 2e-3).measure
    assert g1 == g2  # transposed grid, identical cell classification


def test_monotone_in_lambda():
    lams = [0.2, 0.4, 0.8, 1.6, 3.2]
    for u, v, p in RADIAL_PAIRS:
        vals = [radial_quadrature_measure(Q(u, v, p, t), 1e-7).measure for t in lams]
        assert all(b <= a + 4e-7 for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize("c", [2.0, -0.5])
def test_scaling_exact_on_grid(c):
    # |c u + c v| >= lam d  <=>  |u + v| >= (lam/|c|) d; powers of two keep it exact
    u, v = "step radii=0.5,1 values=2,-1", "ball a=1 r=0.7"
    q1 = LevelSetQuery(P(f"scale[{c}]({u})"), P(f"scale[{c}]({v})"), 1, 1.0)
    q2 = Q(u, v, 1, 1.0 / abs(c))
    b = max(box(q1), box(q2))
    assert grid_bruteforce_measure(q1, b, 2e-3).measure == grid_bruteforce_measure(q2, b, 2e-3).measure
    assert radial_quadrature_measure(q1, 1e-8).measure == pytest.approx(
        radial_quadrature_measure(q2, 1e-8).measure, abs=3e-8)


@settings(max_examples=8, deadline=None)
@given(st.floats(-3, 3))
def test_translation_invariance(a):
    u, v = "ball a=1 r=1", "step radii=0.5,1 values=2,-1"
    q0 = Q(u, v, 1, 0.9)
    q1 = LevelSetQuery(P(f"shift[{a!r}]({u})"), P(f"shift[{a!r}]({v})"), 1, 0.9)
    want = radial_quadrature_measure(q0, 1e-8).measure
    assert radial_quadrature_measure(q1, 1e-8).measure == pytest.approx(want, abs=3e-8)


def test_dilation_on_grid():
    # u_d(x) = u(x/d): |E_lam(u_d, v_d)| = d^2 |E_{lam d^(1/p)}(u, v)| for N = 1
    d, p, lam = 2.0, 1, 0.5
    q_d = Q("ball a=1 r=2", "step radii=1,2 values=2,-1", p, lam)
    q = Q("ball a=1 r=1", "step radii=0.5,1 values=2,-1", p, lam * d ** (1 / p))
    h = 2e-3
    lhs = grid_bruteforce_measure(q_d, box(q_d), d * h).measure
    rhs = d**2 * grid_bruteforce_measure(q, box(q_d) / d, h).measure
    assert lhs == pytest.approx(rhs, rel=1e-12)


@pytest.mark.parametrize("spec", ["ball a=1 r=1", "ball a=2 r=0.5", "interval a=-1 lo=2 hi=3",
                                  "step radii=0.5,1 values=2,1"])
def test_exact_agrees_with_grid_for_indicators(spec):
    for lam in (0.5, 2.0):
        q = Q(spec, "zero", 1, lam)
        assert grid_bruteforce_measure(q, box(q), 1e-3).measure == pytest.approx(
            exact_single_measure(q).measure, rel=0.01)
