"""Hit-or-miss Monte Carlo for the measure of E_lam over a certified region.

If x is outside supp u and y outside supp v then u(x) + v(y) = 0, so E_lam
lies in {x in B_u} u {y in B_v}; on E_lam also |x - y| <= rho with
rho = ((sup|u| + sup|v|)/lam)^(p/N).  The sampling region is the union of the
two strata

    S_x = {x in B_u, |x - y| <= rho},    S_y = {y in B_v, |x - y| <= rho}.

Each sample picks a stratum with probability proportional to its volume and a
point uniformly inside it; a hit lying in both strata counts 1/2.  Randomness
comes from Philox keyed by (seed, block index), so blocks of samples can be
drawn in any order or on any number of threads with identical results.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import UnsupportedError, UsageError
from .functions import TestFunction, unit_ball_volume
from .measure import LevelSetQuery, worker_count

__all__ = [
    "Stratum",
    "BoundingRegion",
    "MeasureEstimate",
    "bounding_region",
    "estimate_measure",
    "estimate_sweep",
    "sample_region",
    "BLOCK_SIZE",
]

BLOCK_SIZE = 1 << 16
_SEED_LIMIT = 1 << 64


@dataclass(frozen=True)
class Stratum:
    side: str  # "x": the x coordinate ranges over the ball; "y": the y coordinate does
    center: tuple
    radius: float
    rho: float
    volume: float


@dataclass(frozen=True)
class BoundingRegion:
    strata: tuple
    rho: float
    total_volume: float
    dimension: int

    @property
    def required_halfwidth(self) -> float:
        """Half side of the smallest origin-centered cube holding the region."""
        if not self.strata:
            return 0.0
        return max(float(np.max(np.abs(s.center))) + s.radius + s.rho for s in self.strata)


@dataclass(frozen=True)
class MeasureEstimate:
    value: float
    stderr: float
    samples: int
    seed: int
    region_volume: float

    @property
    def band95(self) -> tuple:
        return (self.value - 1.96 * self.stderr, self.value + 1.96 * self.stderr)


def _check_bounded(f: TestFunction, name: str):
    if math.isinf(f.support_ball()[1]) or math.isinf(f.sup_norm()):
        raise UnsupportedError(
            f"{name} = {f.to_spec()} has unbounded support or is unbounded; "
            "the Monte Carlo region needs both finite. Truncate the function "
            "first (see experiments.truncation_study)."
        )


def bounding_region(u: TestFunction, v: TestFunction, p: float, lam: float) -> BoundingRegion:
    """Certified region containing E_lam (see module docstring)."""
    q = LevelSetQuery(u, v, p, lam)
    _check_bounded(u, "u")
    _check_bounded(v, "v")
    N = q.N
    mu, mv = u.sup_norm(), v.sup_norm()
    rho = ((mu + mv) / lam) ** (p / N) if mu + mv > 0 else 0.0
    kappa = unit_ball_volume(N)
    strata = []
    for side, f, m in (("x", u, mu), ("y", v, mv)):
        c, R = f.support_ball()
        if m > 0 and R > 0:
            vol = kappa * R**N * kappa * rho**N
            strata.append(Stratum(side, tuple(float(t) for t in c), float(R), rho, vol))
    total = float(sum(s.volume for s in strata))
    return BoundingRegion(tuple(strata), rho, total, N)


def _uniform_ball(rng, m, N):
    if N == 1:
        return rng.uniform(-1.0, 1.0, size=(m, 1))
    g = rng.standard_normal(size=(m, N))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g * rng.random(size=(m, 1)) ** (1.0 / N)


def _block_rng(seed, block):
    return np.random.Generator(np.random.Philox(key=seed + (block << 64)))


def _draw_block(q, region, seed, block, m):
    """Samples of one block: x, y, weight (0 for misses), stratum index."""
    rng = _block_rng(seed, block)
    N = q.N
    strata = region.strata
    pick = rng.random(m)
    b1 = _uniform_ball(rng, m, N)
    b2 = _uniform_ball(rng, m, N)
    x = np.empty((m, N))
    y = np.empty((m, N))
    which = np.zeros(m, dtype=np.int8)
    if len(strata) == 2:
        which[pick >= strata[0].volume / region.total_volume] = 1
    mult = np.ones(m, dtype=np.int8)
    for k, s in enumerate(strata):
        rows = which == k
        anchor = np.asarray(s.center) + s.radius * b1[rows]
        other = anchor + s.rho * b2[rows]
        if s.side == "x":
            x[rows], y[rows] = anchor, other
        else:
            y[rows], x[rows] = anchor, other
    if len(strata) == 2:
        for k, s in enumerate(strata):
            o = strata[1 - k]
            rows = which == k
            pts = x[rows] if o.side == "x" else y[rows]
            inside = np.linalg.norm(pts - np.asarray(o.center), axis=1) <= o.radius
            mult[np.flatnonzero(rows)[inside]] = 2
    hit = q.contains(x, y)
    return x, y, hit, mult, which


def sample_region(q: LevelSetQuery, n_samples: int, seed: int):
    """All samples used by :func:`estimate_measure` (for inspection and tests).

    Returns ``(x, y, hit, multiplicity, stratum_index, region)``.
    """
    region = bounding_region(q.u, q.v, q.p, q.lam)
    seed = _check_seed(seed)
    parts = [
        _draw_block(q, region, seed, b, m) for b, m in _blocks(n_samples)
    ] if region.strata else []
    if not parts:
        z = np.zeros((0, q.N))
        return z, z, np.zeros(0, bool), np.zeros(0, np.int8), np.zeros(0, np.int8), region
    cols = list(zip(*parts))
    return (*(np.concatenate(c) for c in cols), region)


def _blocks(n):
    return [(b, min(BLOCK_SIZE, n - b * BLOCK_SIZE)) for b in range((n + BLOCK_SIZE - 1) // BLOCK_SIZE)]


def _check_seed(seed):
    if not isinstance(seed, (int, np.integer)) or not 0 <= seed < _SEED_LIMIT:
        raise UsageError(f"seed must be an integer in [0, 2^64), got {seed!r}")
    return int(seed)


def _block_halfhits(q, region, seed, block, m):
    _, _, hit, mult, _ = _draw_block(q, region, seed, block, m)
    # a hit inside both strata counts 1/2: tally in half units to stay integral
    return int(np.sum(np.where(hit, 3 - mult, 0), dtype=np.int64))


def estimate_measure(q: LevelSetQuery, n_samples: int, seed: int,
                     workers: Optional[int] = None) -> MeasureEstimate:
    """Estimate the Lebesgue measure of E_lam from ``n_samples`` region samples.

    The result depends only on (q, n_samples, seed), not on ``workers``.
    """
    if not isinstance(n_samples, (int, np.integer)) or n_samples < 1:
        raise UsageError(f"n_samples must be a positive integer, got {n_samples!r}")
    seed = _check_seed(seed)
    region = bounding_region(q.u, q.v, q.p, q.lam)
    if not region.strata:
        return MeasureEstimate(0.0, 0.0, int(n_samples), seed, 0.0)
    blocks = _blocks(int(n_samples))
    w = min(worker_count(workers), len(blocks))
    if w == 1:
        halves = [_block_halfhits(q, region, seed, b, m) for b, m in blocks]
    else:
        with ThreadPoolExecutor(max_workers=w) as pool:
            halves = list(pool.map(lambda bm: _block_halfhits(q, region, seed, *bm), blocks))
    total = sum(halves)
    frac = total / (2.0 * n_samples)
    vol = region.total_volume
    stderr = vol * math.sqrt(max(frac * (1.0 - frac), 0.0) / n_samples)
    return MeasureEstimate(vol * frac, stderr, int(n_samples), seed, vol)


def sweep_seed(seed: int, index: int) -> int:
    """Sub-seed for the index-th lambda of a sweep: seed XOR index."""
    return _check_seed(seed) ^ int(index)


def estimate_sweep(u: TestFunction, v: TestFunction, p: float, lambda_grid,
                   n_samples: int, seed: int, workers: Optional[int] = None):
    """One independent estimate per lambda of a strictly decreasing grid."""
    grid = [float(t) for t in lambda_grid]
    if not grid:
        raise UsageError("lambda grid is empty")
    if any(not t > 0 for t in grid):
        raise UsageError("lambda grid must be strictly positive")
    if any(b >= a for a, b in zip(grid, grid[1:])):
        raise UsageError("lambda grid must be strictly decreasing")
    return [
        (lam, estimate_measure(LevelSetQuery(u, v, p, lam), n_samples, sweep_seed(seed, i), workers))
        for i, lam in enumerate(grid)
    ]
