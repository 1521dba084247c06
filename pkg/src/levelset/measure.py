"""Deterministic oracles for the measure of the level set

    E = {(x, y) in R^N x R^N : |u(x) + v(y)| >= lam * |x - y|^(N/p)}.

Three independent routes are provided: the closed form for v = 0, a radial
reduction evaluated by nested adaptive quadrature, and a brute-force midpoint
count on a 2-D grid (N = 1 only).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import optimize

from .errors import PreconditionError, UnsupportedError, UsageError
from .functions import (
    AbsValue,
    Negated,
    Scaled,
    Shifted,
    TestFunction,
    Zero,
    unit_ball_volume,
)
from .quadrature import integrate

__all__ = [
    "LevelSetQuery",
    "MeasureValue",
    "unit_ball_volume",
    "exact_single_measure",
    "radial_quadrature_measure",
    "grid_bruteforce_measure",
    "worker_count",
]

METHODS = ("exact", "quadrature", "grid", "montecarlo")


def worker_count(workers: Optional[int] = None) -> int:
    """Number of worker threads: explicit value, else LEVELSET_THREADS, else CPU count."""
    if workers is None:
        env = os.environ.get("LEVELSET_THREADS")
        if env:
            try:
                workers = int(env)
            except ValueError:
                raise UsageError(f"LEVELSET_THREADS must be an integer, got {env!r}") from None
        else:
            workers = os.cpu_count() or 1
    if workers < 1:
        raise UsageError(f"worker count must be >= 1, got {workers}")
    return int(workers)


@dataclass(frozen=True)
class LevelSetQuery:
    """The data (u, v, p, lam) that defines E_lam on R^N x R^N."""

    u: TestFunction
    v: TestFunction
    p: float
    lam: float

    def __post_init__(self):
        if self.u.dimension != self.v.dimension:
            raise UsageError(
                f"u lives on R^{self.u.dimension} but v on R^{self.v.dimension}"
            )
        if not self.p >= 1 or not math.isfinite(self.p):
            raise UsageError(f"p must be a finite real >= 1, got {self.p!r}")
        if not self.lam > 0 or not math.isfinite(self.lam):
            raise UsageError(f"lambda must be a positive finite real, got {self.lam!r}")

    @property
    def N(self) -> int:
        return self.u.dimension

    def swapped(self) -> "LevelSetQuery":
        return LevelSetQuery(self.v, self.u, self.p, self.lam)

    def contains(self, x, y):
        """Vectorized membership test for points (x, y), each of shape (..., N)."""
        total = np.abs(self.u.eval(x) + self.v.eval(y))
        d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
        dist = np.sqrt(np.sum(d * d, axis=-1))
        return total >= self.lam * dist ** (self.N / self.p)


@dataclass(frozen=True)
class MeasureValue:
    measure: float
    method: str
    error_bound: Optional[float]

    def __post_init__(self):
        if self.method not in METHODS:
            raise UsageError(f"unknown method tag {self.method!r}")
        if not self.measure >= 0:
            raise UsageError("measure must be nonnegative")
        if self.method == "exact" and self.error_bound != 0:
            raise UsageError("exact values carry error bound 0")


def _is_zero(f: TestFunction) -> bool:
    return isinstance(f, Zero) or f.sup_norm() == 0.0


def exact_single_measure(q: LevelSetQuery) -> MeasureValue:
    """Closed form kappa_N * ||u||_p^p / lam^p, valid for every lam when v = 0."""
    if not _is_zero(q.v):
        raise PreconditionError("exact_single_measure needs v = 0")
    norm = q.u.lp_norm_p_power(q.p)
    if math.isinf(norm):
        return MeasureValue(math.inf, "exact", 0.0)
    return MeasureValue(unit_ball_volume(q.N) * norm / q.lam**q.p, "exact", 0.0)


# ------------------------------------------------------------------ radial


def centered(f: TestFunction) -> TestFunction:
    """Strip translations, keeping every other wrapper."""
    if isinstance(f, Shifted):
        return centered(f.inner)
    if isinstance(f, Scaled):
        return Scaled(centered(f.inner), f.factor)
    if isinstance(f, AbsValue):
        return AbsValue(centered(f.inner))
    if isinstance(f, Negated):
        return Negated(centered(f.inner))
    return f


def _angular(N, r, s, D):
    """Angular measure of directions y/|y| with |x - y| <= D, |x| = r, |y| = s."""
    if N == 1:
        return (np.abs(r - s) <= D).astype(float) + (r + s <= D)
    with np.errstate(divide="ignore", invalid="ignore"):
        c = (r * r + s * s - D * D) / (2.0 * r * s)
    c = np.clip(np.nan_to_num(c, nan=1.0, posinf=1.0, neginf=-1.0), -1.0, 1.0)
    if N == 2:
        return 2.0 * np.arccos(c)
    return 2.0 * math.pi * (1.0 - c)


def _sign_changes(h, lo, hi, n=48):
    if not hi > lo:
        return []
    grid = np.linspace(lo, hi, n)
    vals = h(grid)
    roots = []
    for a, b, fa, fb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if fa == 0:
            roots.append(a)
        elif fa * fb < 0:
            roots.append(optimize.brentq(h, a, b, xtol=1e-14 * max(1.0, abs(b))))
    return roots


class _RadialProblem:
    def __init__(self, q: LevelSetQuery, tol: float):
        if q.N > 3:
            raise UnsupportedError("radial quadrature supports 1 <= N <= 3")
        fu, fv = q.u.radial_form(), q.v.radial_form()
        if fu is None or fv is None:
            raise UnsupportedError("radial quadrature needs radial u and v")
        zu, zv = fu.sup == 0.0, fv.sup == 0.0
        if not (zu or zv) and not np.allclose(fu.center, fv.center, rtol=0, atol=1e-12):
            raise UnsupportedError(
                "radial quadrature needs u and v radial about a common center"
            )
        self.q, self.tol = q, tol
        self.N, self.p, self.lam = q.N, q.p, q.lam
        self.e = q.p / q.N
        self.fu, self.fv = fu, fv
        self.cu, self.cv = centered(q.u), centered(q.v)
        self.kappa = unit_ball_volume(self.N)

    def D(self, a):
        return (np.abs(a) / self.lam) ** self.e

    # V values on the constant pieces, including the zero region past support
    def _v_pieces(self):
        fv = self.fv
        edges = [0.0, *fv.breakpoints]
        pieces = []
        for lo, hi in zip(edges[:-1], edges[1:]):
            pieces.append((lo, hi))
        pieces.append((edges[-1], math.inf))
        return pieces

    def inner(self, r):
        """m(r) / angular normalization: integral over s of s^(N-1) * angular(...)."""
        N, fv = self.N, self.fv
        Ur = float(self.fu.profile(np.array([r]))[0])
        if not math.isfinite(Ur):
            return math.inf
        if math.isfinite(fv.sup):
            s_hi = r + self.D(abs(Ur) + fv.sup)
        else:
            s_hi = max(fv.support, r + self.D(abs(Ur)))
        points = [b for b in fv.breakpoints if 0 < b < s_hi]
        for lo, hi in self._v_pieces():
            if lo >= s_hi:
                break
            top = min(hi, s_hi)
            beyond_support = math.isinf(hi) and math.isfinite(fv.support)
            if fv.piecewise_constant or beyond_support:
                Vk = 0.0 if math.isinf(hi) else float(fv.profile(np.array([0.5 * (lo + hi)]))[0])
                Dk = self.D(Ur + Vk)
                for cand in (r - Dk, r + Dk, Dk - r):
                    if lo < cand < top:
                        points.append(cand)
            else:
                def same(s):
                    return (r - s) ** 2 - self.D(Ur + fv.profile(s)) ** 2

                def opp(s):
                    return (r + s) ** 2 - self.D(Ur + fv.profile(s)) ** 2

                eps = 1e-12 * max(1.0, top)
                # the band |r - s| <= D around s = r can be thinner than any scan
                # step; splitting at r leaves one sign change on each side
                cuts = [lo + eps, *([r] if lo + eps < r < top - eps else []), top - eps]
                for a, b in zip(cuts[:-1], cuts[1:]):
                    points += _sign_changes(same, a, b)
                    points += _sign_changes(opp, a, b)
                if lo < r < top:
                    points.append(r)

        def integrand(s):
            Ds = self.D(Ur + fv.profile(s))
            w = s ** (N - 1) if N > 1 else 1.0
            return w * _angular(N, r, s, Ds)

        res = integrate(integrand, 0.0, s_hi, tol=self.inner_tol, points=points, rtol=1e-13)
        self.inner_err = max(self.inner_err, res.error)
        return res.value

    def outer_limit(self):
        fu, fv = self.fu, self.fv
        if all(math.isfinite(t) for t in (fu.support, fv.support, fu.sup, fv.sup)):
            rho = self.D(fu.sup + fv.sup)
            return max(fu.support, fv.support + rho if fv.sup > 0 else 0.0), 0.0
        # E restricted to |x| > T lies in {2|u(x)| >= lam d} u {2|v(y)| >= lam d},
        # whose measure is bounded by closed-form tails of |u|^p and |v|^p.
        p, lam, N = self.p, self.lam, self.N
        budget = self.tol / 4.0
        T = max(1.0, fu.support if math.isfinite(fu.support) else 1.0)
        for _ in range(200):
            level = 0.5 * lam * (0.5 * T) ** (N / p)
            bound = self.kappa * (2.0 / lam) ** p * (
                self.cu.tail_p_power(p, T)
                + self.cv.tail_p_power(p, 0.5 * T)
                + self.cv.excess_p_power(p, level)
            )
            if bound <= budget:
                return T, bound
            T *= 1.5
        raise UnsupportedError("could not bound the level set tail; functions decay too slowly")

    def outer_points(self, T):
        fu, fv = self.fu, self.fv
        pts = set(b for b in fu.breakpoints if 0 < b < T)
        if fu.piecewise_constant and fv.piecewise_constant:
            u_vals = [0.0] + [float(fu.profile(np.array([b * (1 - 1e-9)]))[0]) for b in fu.breakpoints]
            v_vals = [0.0] + [float(fv.profile(np.array([b * (1 - 1e-9)]))[0]) for b in fv.breakpoints]
            v_edges = [0.0, *fv.breakpoints]
            for a in u_vals:
                for b in v_vals:
                    Dk = self.D(a + b)
                    for edge in v_edges:
                        for cand in (edge - Dk, edge + Dk, Dk - edge):
                            if 0 < cand < T:
                                pts.add(cand)
        return sorted(pts)

    def solve(self):
        fu, fv = self.fu, self.fv
        if fu.sup == 0.0 and fv.sup == 0.0:
            return 0.0, 0.0
        if math.isinf(self.q.u.lp_norm_p_power(self.p)) or math.isinf(
            self.q.v.lp_norm_p_power(self.p)
        ):
            return math.inf, 0.0
        T, tail = self.outer_limit()
        N = self.N
        area = N * self.kappa  # surface area of the unit sphere
        self.inner_tol = self.tol / (2.0 * self.kappa * T**N)
        self.inner_err = 0.0

        def outer(r):
            flat = np.ravel(r)
            vals = np.array([self.inner(float(t)) for t in flat])
            w = flat ** (N - 1) if N > 1 else 1.0
            return (area * w * vals).reshape(np.shape(r))

        singular = {}
        beta = fu.singular_exponent * self.p - (N - 1)
        if beta > 0:
            singular[0.0] = beta
        res = integrate(outer, 0.0, T, tol=self.tol / 4.0, points=self.outer_points(T),
                        singular=singular, rtol=1e-13)
        err = res.error + tail + self.inner_err * self.kappa * T**N
        return res.value, err


def radial_quadrature_measure(q: LevelSetQuery, tol: float = 1e-8) -> MeasureValue:
    """Measure of E_lam for radial u, v by nested adaptive quadrature.

    The outer integral runs over r = |x - c|, the inner over s = |y - c|, and
    the angle between x - c and y - c is integrated in closed form.  The
    returned ``error_bound`` is the larger of ``tol`` and the accumulated
    quadrature error estimate.
    """
    if not tol > 0:
        raise UsageError(f"tolerance must be positive, got {tol!r}")
    value, err = _RadialProblem(q, tol).solve()
    if math.isinf(value):
        return MeasureValue(math.inf, "quadrature", None)
    return MeasureValue(max(value, 0.0), "quadrature", max(tol, err))


# -------------------------------------------------------------------- grid


def _row_counts(U, V, centers, lam, p, rows, band, nz_v, h):
    """Off-diagonal hit count and diagonal area fractions for one block of rows.

    Cells farther than the certified radius from the diagonal are skipped, as
    are cells where u(x) = 0 and v(y) = 0; neither can satisfy the inequality.
    """
    lo, hi = rows
    n = len(centers)
    c0, c1 = max(0, lo - band), min(n, hi + band)
    total = 0
    active = np.flatnonzero(U[lo:hi]) + lo
    if active.size:
        s = np.abs(U[active, None] + V[None, c0:c1])
        d = np.abs(centers[active, None] - centers[None, c0:c1])
        if p != 1:
            d = d ** (1.0 / p)
        total += int(np.count_nonzero(s >= lam * d))
    idle = np.setdiff1d(np.arange(lo, hi), active, assume_unique=True)
    cols = nz_v[(nz_v >= c0) & (nz_v < c1)]
    if idle.size and cols.size:
        s = np.abs(V[None, cols]) * np.ones((idle.size, 1))
        d = np.abs(centers[idle, None] - centers[None, cols])
        if p != 1:
            d = d ** (1.0 / p)
        total += int(np.count_nonzero(s >= lam * d))
    # diagonal cells were counted whole whenever u or v is nonzero there; replace
    # them by the exact area of {|x - y| <= w} inside the cell, w = (|u+v|/lam)^p
    touched = (U[lo:hi] != 0) | (V[lo:hi] != 0)
    total -= int(np.count_nonzero(touched))
    s_diag = np.abs(U[lo:hi] + V[lo:hi])
    w = s_diag / lam
    if p != 1:
        w = w ** p
    t = np.minimum(w / h, 1.0)
    frac = np.where(s_diag > 0, 1.0 - (1.0 - t) ** 2, 0.0)
    return total, frac[touched]


def grid_bruteforce_measure(q: LevelSetQuery, box_halfwidth: float, h: float,
                            workers: Optional[int] = None,
                            block_rows: int = 256) -> MeasureValue:
    """Midpoint count of E_lam on the square [-box, box]^2 with cells of side h (N = 1).

    Rows are counted independently and summed in index order, so the result
    does not depend on the number of worker threads.
    """
    from .montecarlo import bounding_region

    if q.N != 1:
        raise UnsupportedError("the grid oracle is restricted to N = 1")
    if not (h > 0 and box_halfwidth > 0):
        raise UsageError("box halfwidth and cell size must be positive")
    region = bounding_region(q.u, q.v, q.p, q.lam)
    if region.required_halfwidth > box_halfwidth:
        raise PreconditionError(
            f"grid box halfwidth {box_halfwidth} does not contain the certified "
            f"bounding region; need at least {region.required_halfwidth:.17g}"
        )
    n = int(round(2.0 * box_halfwidth / h))
    if n < 1:
        raise UsageError("cell size larger than the box")
    h_eff = 2.0 * box_halfwidth / n
    centers = -box_halfwidth + (np.arange(n) + 0.5) * h_eff
    pts = centers[:, None]
    U = np.asarray(q.u.eval(pts), dtype=float)
    V = np.asarray(q.v.eval(pts), dtype=float)
    if not (np.any(U) or np.any(V)):
        return MeasureValue(0.0, "grid", None)

    band = int(math.ceil(region.rho / h_eff)) + 2
    nz_v = np.flatnonzero(V)
    blocks = [(lo, min(lo + block_rows, n)) for lo in range(0, n, block_rows)]

    def count(b):
        return _row_counts(U, V, centers, q.lam, q.p, b, band, nz_v, h_eff)

    w = worker_count(workers)
    if w == 1:
        parts = [count(b) for b in blocks]
    else:
        with ThreadPoolExecutor(max_workers=w) as pool:
            parts = list(pool.map(count, blocks))
    hits = sum(c for c, _ in parts)
    diag = math.fsum(np.concatenate([f for _, f in parts]).tolist())
    return MeasureValue(h_eff * h_eff * (hits + diag), "grid", None)
