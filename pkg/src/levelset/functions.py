"""Catalog of test functions on R^N with closed-form norms.

Every catalog entry is an immutable object that evaluates on arrays of points
(last axis = coordinates) and knows its own L^p norms, sup-norm and support.
The catalog is closed on purpose: acceptance checks need exact targets.

Spec strings
------------
Functions can be built from short strings, which is what the command line uses::

    ball a=1 r=1 n=1          a * indicator of the closed ball of radius r
    step radii=1,2 values=1,-1 n=2
                              radial step, value values[i] on r[i-1] < |x| <= r[i]
    gauss a=1 w=1 cutoff=inf n=2
                              a * exp(-|x|^2 / w^2), zeroed for |x| > cutoff
    power a=1 alpha=0.5 r=1 n=1
                              a * |x|^(-alpha) on 0 < |x| <= r
    witness a=1 p=2 n=1       a * |x|^(-n/p) on all of R^n (weak-L^p, not L^p)
    interval a=1 lo=0 hi=1    a * indicator of [lo, hi] (n=1 only)
    zero n=1
    abs(F)  neg(F)  scale[c](F)  shift[a1,...,an](F)

Omitted keys take the defaults shown; ``n`` defaults to 1.
"""

from __future__ import annotations

import math
import re
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import special

from .errors import SpecParseError, UnsupportedError, UsageError

__all__ = [
    "TestFunction",
    "NormTable",
    "RadialForm",
    "BallIndicator",
    "RadialStep",
    "Gaussian",
    "TruncatedPower",
    "WeakLpWitness",
    "Shifted",
    "Scaled",
    "AbsValue",
    "Negated",
    "Zero",
    "interval",
    "parse_function",
    "unit_ball_volume",
]

MAX_EVAL_DIMENSION = 8


def unit_ball_volume(n: int) -> float:
    """Volume of the unit ball in R^n, via kappa_n = kappa_{n-2} * 2*pi/n."""
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise UsageError(f"dimension must be a positive integer, got {n!r}")
    vol = 2.0 if n % 2 else 1.0  # kappa_1 or kappa_0
    for k in range(2 if n % 2 == 0 else 3, n + 1, 2):
        vol *= 2.0 * math.pi / k
    return vol


def _check_p(p):
    if not p >= 1:
        raise UsageError(f"exponent p must satisfy p >= 1, got {p!r}")


def _radius(x, n):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0 or x.shape[-1] != n:
        raise UsageError(
            f"point has trailing dimension {x.shape[-1] if x.ndim else 0}, "
            f"function lives on R^{n}"
        )
    if n == 1:
        return np.abs(x[..., 0])
    return np.sqrt(np.einsum("...i,...i->...", x, x))


def _fmt(v) -> str:
    if isinstance(v, (tuple, list, np.ndarray)):
        return ",".join(_fmt(t) for t in v)
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


@dataclass(frozen=True)
class NormTable:
    p: float
    lp_norm_p_power: float
    sup_norm: float


@dataclass(frozen=True)
class RadialForm:
    """Radial description f(x) = profile(|x - center|).

    ``breakpoints`` are the radii where the profile jumps or changes formula;
    between consecutive breakpoints the profile is smooth, and constant when
    ``piecewise_constant`` is set.  ``singular_exponent`` is the alpha of a
    |x|^-alpha blow-up at the center (0 when bounded).
    """

    center: np.ndarray
    profile: Callable[[np.ndarray], np.ndarray]
    breakpoints: tuple
    piecewise_constant: bool
    support: float
    sup: float
    singular_exponent: float = 0.0


class TestFunction(ABC):
    """A real function on R^N with analytically known norms."""

    __test__ = False  # keep pytest from collecting the class
    dimension: int

    @property
    def kind(self) -> str:
        return type(self).__name__

    def __call__(self, x):
        return self.eval(x)

    def eval(self, x):
        """Evaluate at one point (shape ``(N,)``) or a batch (shape ``(..., N)``)."""
        x = np.asarray(x, dtype=float)
        if x.ndim == 0 or x.shape[-1] != self.dimension:
            raise UsageError(
                f"{self.kind} lives on R^{self.dimension}, "
                f"got a point of shape {x.shape}"
            )
        if self.dimension > MAX_EVAL_DIMENSION:
            raise UnsupportedError(
                f"evaluation is supported for N <= {MAX_EVAL_DIMENSION}, got N={self.dimension}"
            )
        out = self._eval(x)
        return float(out) if x.ndim == 1 else out

    @abstractmethod
    def _eval(self, x: np.ndarray) -> np.ndarray: ...

    def lp_norm_p_power(self, p: float) -> float:
        """Return the integral of |f|^p over R^N (may be ``inf``)."""
        _check_p(p)
        return self._lp(p)

    @abstractmethod
    def _lp(self, p: float) -> float: ...

    def norms(self, p: float) -> NormTable:
        return NormTable(p, self.lp_norm_p_power(p), self.sup_norm())

    @abstractmethod
    def sup_norm(self) -> float: ...

    @abstractmethod
    def support_ball(self) -> tuple[np.ndarray, float]:
        """A closed ball (center, radius) outside which f vanishes."""

    def support_radius(self) -> float:
        """Smallest R with f = 0 outside the closed ball B_R about the origin."""
        center, radius = self.support_ball()
        if radius == 0.0:
            return 0.0
        return float(np.linalg.norm(center)) + radius

    def tail_p_power(self, p: float, radius: float) -> float:
        """Upper bound on the integral of |f|^p over {|x| > radius}.

        Exact for functions centered at the origin.
        """
        _check_p(p)
        return self._tail(p, max(float(radius), 0.0))

    @abstractmethod
    def _tail(self, p: float, radius: float) -> float: ...

    def excess_p_power(self, p: float, level: float) -> float:
        """Upper bound on the integral of |f|^p over {|f| >= level}, level > 0."""
        _check_p(p)
        if not level > 0:
            raise UsageError("level must be positive")
        return self._excess(p, float(level))

    @abstractmethod
    def _excess(self, p: float, level: float) -> float: ...

    def radial_form(self) -> Optional[RadialForm]:
        """Radial description, or ``None`` if f is not radial about any point."""
        return None

    @abstractmethod
    def to_spec(self) -> str: ...

    def __str__(self):
        return self.to_spec()


def _origin(n):
    return np.zeros(n)


@dataclass(frozen=True)
class Zero(TestFunction):
    dimension: int = 1

    def __post_init__(self):
        _check_dimension(self.dimension)

    def _eval(self, x):
        return np.zeros(x.shape[:-1])

    def _lp(self, p):
        return 0.0

    def sup_norm(self):
        return 0.0

    def support_ball(self):
        return _origin(self.dimension), 0.0

    def _tail(self, p, radius):
        return 0.0

    def _excess(self, p, level):
        return 0.0

    def radial_form(self):
        return RadialForm(
            _origin(self.dimension),
            lambda r: np.zeros_like(np.asarray(r, dtype=float)),
            (),
            True,
            0.0,
            0.0,
        )

    def to_spec(self):
        return f"zero n={self.dimension}"


def _check_dimension(n):
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise UsageError(f"dimension must be a positive integer, got {n!r}")


@dataclass(frozen=True)
class BallIndicator(TestFunction):
    """``amplitude`` on the closed ball of ``radius`` about the origin."""

    amplitude: float = 1.0
    radius: float = 1.0
    dimension: int = 1

    def __post_init__(self):
        _check_dimension(self.dimension)
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise UsageError("ball radius must be positive and finite")
        if not math.isfinite(self.amplitude):
            raise UsageError("ball amplitude must be finite")

    def _eval(self, x):
        r = _radius(x, self.dimension)
        return np.where(r <= self.radius, float(self.amplitude), 0.0)

    def _inside(self, p, radius):
        rr = min(radius, self.radius)
        return abs(self.amplitude) ** p * unit_ball_volume(self.dimension) * rr**self.dimension

    def _lp(self, p):
        return self._inside(p, self.radius)

    def sup_norm(self):
        return abs(float(self.amplitude))

    def support_ball(self):
        if self.amplitude == 0:
            return _origin(self.dimension), 0.0
        return _origin(self.dimension), float(self.radius)

    def _tail(self, p, radius):
        return self._lp(p) - self._inside(p, radius)

    def _excess(self, p, level):
        return self._lp(p) if abs(self.amplitude) >= level else 0.0

    def radial_form(self):
        a, R = float(self.amplitude), float(self.radius)
        return RadialForm(
            _origin(self.dimension),
            lambda r: np.where(np.asarray(r) <= R, a, 0.0),
            (R,),
            True,
            R if a != 0 else 0.0,
            abs(a),
        )

    def to_spec(self):
        return f"ball a={_fmt(self.amplitude)} r={_fmt(self.radius)} n={self.dimension}"


@dataclass(frozen=True)
class RadialStep(TestFunction):
    """Value ``values[i]`` on the shell ``radii[i-1] < |x| <= radii[i]`` (radii[-1] = 0)."""

    radii: tuple = (1.0,)
    values: tuple = (1.0,)
    dimension: int = 1

    def __post_init__(self):
        _check_dimension(self.dimension)
        radii = tuple(float(r) for r in self.radii)
        values = tuple(float(v) for v in self.values)
        object.__setattr__(self, "radii", radii)
        object.__setattr__(self, "values", values)
        if not radii or len(radii) != len(values):
            raise UsageError("step needs as many values as radii (at least one)")
        if radii[0] <= 0 or any(b <= a for a, b in zip(radii, radii[1:])):
            raise UsageError("step radii must be positive and strictly increasing")
        if not all(math.isfinite(t) for t in radii + values):
            raise UsageError("step radii and values must be finite")

    def _eval(self, x):
        r = _radius(x, self.dimension)
        idx = np.searchsorted(np.asarray(self.radii), r, side="left")
        table = np.append(np.asarray(self.values), 0.0)
        return table[idx]

    def _inside(self, p, radius):
        kappa = unit_ball_volume(self.dimension)
        n = self.dimension
        total, lo = 0.0, 0.0
        for hi, v in zip(self.radii, self.values):
            top = min(hi, radius)
            if top > lo:
                total += abs(v) ** p * kappa * (top**n - lo**n)
            lo = hi
        return total

    def _lp(self, p):
        return self._inside(p, math.inf)

    def sup_norm(self):
        return max(abs(v) for v in self.values)

    def support_ball(self):
        nz = [r for r, v in zip(self.radii, self.values) if v != 0]
        return _origin(self.dimension), (max(nz) if nz else 0.0)

    def _tail(self, p, radius):
        return self._lp(p) - self._inside(p, radius)

    def _excess(self, p, level):
        kappa = unit_ball_volume(self.dimension)
        n = self.dimension
        total, lo = 0.0, 0.0
        for hi, v in zip(self.radii, self.values):
            if abs(v) >= level:
                total += abs(v) ** p * kappa * (hi**n - lo**n)
            lo = hi
        return total

    def radial_form(self):
        radii = np.asarray(self.radii)
        table = np.append(np.asarray(self.values), 0.0)
        return RadialForm(
            _origin(self.dimension),
            lambda r: table[np.searchsorted(radii, np.asarray(r), side="left")],
            tuple(self.radii),
            True,
            self.support_ball()[1],
            self.sup_norm(),
        )

    def to_spec(self):
        return f"step radii={_fmt(self.radii)} values={_fmt(self.values)} n={self.dimension}"


@dataclass(frozen=True)
class Gaussian(TestFunction):
    """``amplitude * exp(-|x|^2 / width^2)``, set to zero beyond ``cutoff``."""

    amplitude: float = 1.0
    width: float = 1.0
    cutoff: float = math.inf
    dimension: int = 1

    def __post_init__(self):
        _check_dimension(self.dimension)
        if not (self.width > 0 and math.isfinite(self.width)):
            raise UsageError("gaussian width must be positive and finite")
        if not self.cutoff > 0:
            raise UsageError("gaussian cutoff must be positive")
        if not math.isfinite(self.amplitude):
            raise UsageError("gaussian amplitude must be finite")

    def _eval(self, x):
        r = _radius(x, self.dimension)
        val = self.amplitude * np.exp(-((r / self.width) ** 2))
        if math.isfinite(self.cutoff):
            val = np.where(r <= self.cutoff, val, 0.0)
        return val

    def _inside(self, p, radius):
        rr = min(radius, self.cutoff)
        if rr <= 0:
            return 0.0
        full = abs(self.amplitude) ** p * (math.pi * self.width**2 / p) ** (self.dimension / 2)
        if math.isinf(rr):
            return full
        return full * float(special.gammainc(self.dimension / 2, p * (rr / self.width) ** 2))

    def _lp(self, p):
        return self._inside(p, math.inf)

    def _tail(self, p, radius):
        rr = min(radius, self.cutoff)
        if rr >= self.cutoff:
            return 0.0
        full = abs(self.amplitude) ** p * (math.pi * self.width**2 / p) ** (self.dimension / 2)
        upper = float(special.gammaincc(self.dimension / 2, p * (rr / self.width) ** 2))
        if math.isfinite(self.cutoff):
            upper -= float(special.gammaincc(self.dimension / 2, p * (self.cutoff / self.width) ** 2))
        return full * max(upper, 0.0)

    def _excess(self, p, level):
        a = abs(self.amplitude)
        if a < level:
            return 0.0
        rho = self.width * math.sqrt(math.log(a / level))
        return self._inside(p, rho)

    def sup_norm(self):
        return abs(float(self.amplitude))

    def support_ball(self):
        if self.amplitude == 0:
            return _origin(self.dimension), 0.0
        return _origin(self.dimension), float(self.cutoff)

    def radial_form(self):
        a, w, c = float(self.amplitude), float(self.width), float(self.cutoff)

        def profile(r):
            r = np.asarray(r, dtype=float)
            val = a * np.exp(-((r / w) ** 2))
            return np.where(r <= c, val, 0.0) if math.isfinite(c) else val

        return RadialForm(
            _origin(self.dimension),
            profile,
            (c,) if math.isfinite(c) else (),
            False,
            self.support_ball()[1],
            abs(a),
        )

    def truncated(self, radius: float) -> "Gaussian":
        """The cut-off function chi_{B_radius} * f."""
        return Gaussian(self.amplitude, self.width, min(self.cutoff, radius), self.dimension)

    def to_spec(self):
        return (
            f"gauss a={_fmt(self.amplitude)} w={_fmt(self.width)} "
            f"cutoff={_fmt(self.cutoff)} n={self.dimension}"
        )


@dataclass(frozen=True)
class TruncatedPower(TestFunction):
    """``amplitude * |x|^-alpha`` on the punctured closed ball of ``radius``."""

    amplitude: float = 1.0
    alpha: float = 0.5
    radius: float = 1.0
    dimension: int = 1

    def __post_init__(self):
        _check_dimension(self.dimension)
        if not self.alpha >= 0:
            raise UsageError("power exponent alpha must be >= 0")
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise UsageError("power radius must be positive and finite")
        if not math.isfinite(self.amplitude):
            raise UsageError("power amplitude must be finite")

    def _eval(self, x):
        r = _radius(x, self.dimension)
        with np.errstate(divide="ignore"):
            val = self.amplitude * r ** (-float(self.alpha))
        return np.where(r <= self.radius, val, 0.0)

    def _inside(self, p, radius):
        rr = min(radius, self.radius)
        if rr <= 0:
            return 0.0
        n = self.dimension
        expo = n - self.alpha * p
        if expo <= 0:
            return math.inf
        return abs(self.amplitude) ** p * n * unit_ball_volume(n) * rr**expo / expo

    def _lp(self, p):
        if self.amplitude == 0:
            return 0.0
        return self._inside(p, self.radius)

    def _tail(self, p, radius):
        if radius >= self.radius or self.amplitude == 0:
            return 0.0
        n = self.dimension
        expo = n - self.alpha * p
        if expo <= 0:
            return math.inf
        return (
            abs(self.amplitude) ** p * n * unit_ball_volume(n)
            * (self.radius**expo - radius**expo) / expo
        )

    def _excess(self, p, level):
        a = abs(self.amplitude)
        if a == 0:
            return 0.0
        if self.alpha == 0:
            return self._lp(p) if a >= level else 0.0
        rho = (a / level) ** (1.0 / self.alpha)
        return self._inside(p, rho)

    def sup_norm(self):
        if self.amplitude == 0:
            return 0.0
        return math.inf if self.alpha > 0 else abs(float(self.amplitude))

    def support_ball(self):
        if self.amplitude == 0:
            return _origin(self.dimension), 0.0
        return _origin(self.dimension), float(self.radius)

    def radial_form(self):
        a, alpha, R = float(self.amplitude), float(self.alpha), float(self.radius)

        def profile(r):
            r = np.asarray(r, dtype=float)
            with np.errstate(divide="ignore"):
                return np.where(r <= R, a * r ** (-alpha), 0.0)

        return RadialForm(
            _origin(self.dimension),
            profile,
            (R,),
            alpha == 0,
            self.support_ball()[1],
            self.sup_norm(),
            singular_exponent=alpha,
        )

    def to_spec(self):
        return (
            f"power a={_fmt(self.amplitude)} alpha={_fmt(self.alpha)} "
            f"r={_fmt(self.radius)} n={self.dimension}"
        )


@dataclass(frozen=True)
class WeakLpWitness(TestFunction):
    """``amplitude * |x|^(-N/exponent)``: in weak-L^exponent but in no L^p.

    The value at the origin is ``inf`` and exceeds every threshold.
    """

    amplitude: float = 1.0
    exponent: float = 2.0
    dimension: int = 1

    def __post_init__(self):
        _check_dimension(self.dimension)
        if not self.exponent >= 1:
            raise UsageError("witness exponent must be >= 1")

    def _eval(self, x):
        r = _radius(x, self.dimension)
        with np.errstate(divide="ignore"):
            return self.amplitude * r ** (-self.dimension / self.exponent)

    def _lp(self, p):
        return 0.0 if self.amplitude == 0 else math.inf

    def sup_norm(self):
        return 0.0 if self.amplitude == 0 else math.inf

    def support_ball(self):
        return _origin(self.dimension), (0.0 if self.amplitude == 0 else math.inf)

    def _tail(self, p, radius):
        return self._lp(p)

    def _excess(self, p, level):
        return self._lp(p)

    def weak_norm_p_power(self) -> float:
        """sup_t t^q |{|f| >= t}| with q = exponent, which equals kappa_N |a|^q."""
        return unit_ball_volume(self.dimension) * abs(self.amplitude) ** self.exponent

    def to_spec(self):
        return f"witness a={_fmt(self.amplitude)} p={_fmt(self.exponent)} n={self.dimension}"


@dataclass(frozen=True)
class Shifted(TestFunction):
    """``inner(x - shift)``."""

    inner: TestFunction
    shift: tuple = field(default=(0.0,))

    def __post_init__(self):
        shift = tuple(float(s) for s in np.atleast_1d(self.shift))
        object.__setattr__(self, "shift", shift)
        if len(shift) != self.inner.dimension:
            raise UsageError(
                f"shift has {len(shift)} components, inner function lives on "
                f"R^{self.inner.dimension}"
            )

    @property
    def dimension(self):
        return self.inner.dimension

    def _eval(self, x):
        return self.inner._eval(x - np.asarray(self.shift))

    def _lp(self, p):
        return self.inner._lp(p)

    def sup_norm(self):
        return self.inner.sup_norm()

    def support_ball(self):
        c, r = self.inner.support_ball()
        return c + np.asarray(self.shift), r

    def _tail(self, p, radius):
        off = float(np.linalg.norm(self.shift))
        return self.inner._tail(p, max(radius - off, 0.0))

    def _excess(self, p, level):
        return self.inner._excess(p, level)

    def radial_form(self):
        form = self.inner.radial_form()
        if form is None:
            return None
        return RadialForm(
            form.center + np.asarray(self.shift),
            form.profile,
            form.breakpoints,
            form.piecewise_constant,
            form.support,
            form.sup,
            form.singular_exponent,
        )

    def to_spec(self):
        return f"shift[{_fmt(self.shift)}]({self.inner.to_spec()})"


@dataclass(frozen=True)
class Scaled(TestFunction):
    """``factor * inner(x)``."""

    inner: TestFunction
    factor: float = 1.0

    def __post_init__(self):
        if not math.isfinite(self.factor):
            raise UsageError("scale factor must be finite")

    @property
    def dimension(self):
        return self.inner.dimension

    def _eval(self, x):
        if self.factor == 0:
            return np.zeros(x.shape[:-1])
        return self.factor * self.inner._eval(x)

    def _lp(self, p):
        if self.factor == 0:
            return 0.0
        return abs(self.factor) ** p * self.inner._lp(p)

    def sup_norm(self):
        return 0.0 if self.factor == 0 else abs(self.factor) * self.inner.sup_norm()

    def support_ball(self):
        if self.factor == 0:
            return _origin(self.dimension), 0.0
        return self.inner.support_ball()

    def _tail(self, p, radius):
        if self.factor == 0:
            return 0.0
        return abs(self.factor) ** p * self.inner._tail(p, radius)

    def _excess(self, p, level):
        if self.factor == 0:
            return 0.0
        return abs(self.factor) ** p * self.inner._excess(p, level / abs(self.factor))

    def radial_form(self):
        form = self.inner.radial_form()
        if form is None:
            return None
        c, prof = float(self.factor), form.profile
        return RadialForm(
            form.center,
            lambda r: c * prof(r),
            form.breakpoints,
            form.piecewise_constant,
            form.support if c != 0 else 0.0,
            abs(c) * form.sup if c != 0 else 0.0,
            form.singular_exponent,
        )

    def to_spec(self):
        return f"scale[{_fmt(self.factor)}]({self.inner.to_spec()})"


@dataclass(frozen=True)
class _Unary(TestFunction):
    inner: TestFunction

    @property
    def dimension(self):
        return self.inner.dimension

    def _lp(self, p):
        return self.inner._lp(p)

    def sup_norm(self):
        return self.inner.sup_norm()

    def support_ball(self):
        return self.inner.support_ball()

    def _tail(self, p, radius):
        return self.inner._tail(p, radius)

    def _excess(self, p, level):
        return self.inner._excess(p, level)

    _op = staticmethod(lambda v: v)
    _name = ""

    def _eval(self, x):
        return self._op(self.inner._eval(x))

    def radial_form(self):
        form = self.inner.radial_form()
        if form is None:
            return None
        op, prof = self._op, form.profile
        return RadialForm(
            form.center,
            lambda r: op(prof(r)),
            form.breakpoints,
            form.piecewise_constant,
            form.support,
            form.sup,
            form.singular_exponent,
        )

    def to_spec(self):
        return f"{self._name}({self.inner.to_spec()})"


@dataclass(frozen=True)
class AbsValue(_Unary):
    """``|inner(x)|``."""

    _op = staticmethod(np.abs)
    _name = "abs"


@dataclass(frozen=True)
class Negated(_Unary):
    """``-inner(x)``."""

    _op = staticmethod(np.negative)
    _name = "neg"


def interval(lo: float, hi: float, amplitude: float = 1.0) -> TestFunction:
    """Indicator of the closed interval [lo, hi] on R, scaled by ``amplitude``."""
    if not hi > lo:
        raise UsageError(f"interval needs lo < hi, got [{lo}, {hi}]")
    ball = BallIndicator(amplitude, (hi - lo) / 2.0, 1)
    mid = (hi + lo) / 2.0
    return ball if mid == 0 else Shifted(ball, (mid,))


# ---------------------------------------------------------------- parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>[-+]?(?:inf|(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?))"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<sym>[=(),\[\]]))"
)

_ATOMS = {
    "ball": {"a": 1.0, "r": 1.0, "n": 1},
    "step": {"radii": None, "values": None, "n": 1},
    "gauss": {"a": 1.0, "w": 1.0, "cutoff": math.inf, "n": 1},
    "power": {"a": 1.0, "alpha": 0.5, "r": 1.0, "n": 1},
    "witness": {"a": 1.0, "p": 2.0, "n": 1},
    "interval": {"a": 1.0, "lo": 0.0, "hi": 1.0},
    "zero": {"n": 1},
}
_UNARY = {"abs": AbsValue, "neg": Negated}
_BRACKETED = ("scale", "shift")


class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = []
        pos = 0
        while pos < len(text):
            if text[pos:].strip() == "":
                break
            m = _TOKEN.match(text, pos)
            if m is None or m.end() == pos:
                start = len(text) - len(text[pos:].lstrip())
                raise SpecParseError(text, start, ["a name, number or one of = ( ) [ ] ,"], text[start])
            kind = m.lastgroup
            value = m.group(kind)
            self.tokens.append((kind, value, m.start(kind)))
            pos = m.end()
        self.i = 0

    def peek(self):
        if self.i < len(self.tokens):
            return self.tokens[self.i]
        return ("end", "<end>", len(self.text))

    def fail(self, expected):
        _, value, pos = self.peek()
        raise SpecParseError(self.text, pos, expected, value)

    def expect_sym(self, sym):
        kind, value, _ = self.peek()
        if kind != "sym" or value != sym:
            self.fail([repr(sym)])
        self.i += 1

    def number(self):
        kind, value, _ = self.peek()
        if kind != "num":
            self.fail(["a number"])
        self.i += 1
        return float(value)

    def numbers(self):
        vals = [self.number()]
        while self.peek()[0] == "sym" and self.peek()[1] == ",":
            self.i += 1
            vals.append(self.number())
        return vals

    def parse(self):
        f = self.function()
        if self.peek()[0] != "end":
            self.fail(["end of input"])
        return f

    def function(self):
        kind, value, pos = self.peek()
        known = sorted(_ATOMS) + sorted(_UNARY) + list(_BRACKETED)
        if kind != "name":
            self.fail(["a function name (" + ", ".join(known) + ")"])
        name = value.lower()
        self.i += 1
        if name in _UNARY:
            self.expect_sym("(")
            inner = self.function()
            self.expect_sym(")")
            return _UNARY[name](inner)
        if name in _BRACKETED:
            self.expect_sym("[")
            args = self.numbers()
            self.expect_sym("]")
            self.expect_sym("(")
            inner = self.function()
            self.expect_sym(")")
            if name == "scale":
                if len(args) != 1:
                    raise SpecParseError(self.text, pos, ["a single scale factor"], value)
                return Scaled(inner, args[0])
            if len(args) != inner.dimension:
                raise SpecParseError(
                    self.text, pos, [f"{inner.dimension} shift components"], f"{len(args)} components"
                )
            return Shifted(inner, tuple(args))
        if name not in _ATOMS:
            self.i -= 1
            self.fail(["a function name (" + ", ".join(known) + ")"])
        return self.atom(name, pos)

    def atom(self, name, pos):
        allowed = _ATOMS[name]
        params = {}
        while self.peek()[0] == "name":
            _, key, kpos = self.peek()
            if key not in allowed:
                self.fail([f"a key of '{name}' ({', '.join(allowed)})"])
            self.i += 1
            self.expect_sym("=")
            vals = self.numbers()
            if key not in ("radii", "values") and len(vals) != 1:
                raise SpecParseError(self.text, kpos, [f"a single number for {key}"], "a list")
            params[key] = vals if key in ("radii", "values") else vals[0]
        for key, default in allowed.items():
            if key not in params:
                if default is None:
                    raise SpecParseError(self.text, pos, [f"key '{key}' for '{name}'"], "nothing")
                params[key] = default
        if "n" in params:
            n = params["n"]
            if n != int(n) or not 1 <= n:
                raise SpecParseError(self.text, pos, ["a positive integer dimension n"], _fmt(n))
            params["n"] = int(n)
        try:
            return _build_atom(name, params)
        except UsageError as exc:
            raise SpecParseError(self.text, pos, [f"valid '{name}' parameters ({exc})"], name) from None


def _build_atom(name, q):
    if name == "ball":
        return BallIndicator(q["a"], q["r"], q["n"])
    if name == "step":
        return RadialStep(tuple(q["radii"]), tuple(q["values"]), q["n"])
    if name == "gauss":
        return Gaussian(q["a"], q["w"], q["cutoff"], q["n"])
    if name == "power":
        return TruncatedPower(q["a"], q["alpha"], q["r"], q["n"])
    if name == "witness":
        return WeakLpWitness(q["a"], q["p"], q["n"])
    if name == "interval":
        return interval(q["lo"], q["hi"], q["a"])
    return Zero(q["n"])


def parse_function(text: str) -> TestFunction:
    """Build a catalog function from its spec string (grammar in module docstring)."""
    return _Parser(text).parse()
