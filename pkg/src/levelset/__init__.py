"""Numerical verification toolkit for level-set measures of (u(x)+v(y))/|x-y|^(N/p)."""

from .errors import (
    LevelSetError,
    PreconditionError,
    SpecParseError,
    UnsupportedError,
    UsageError,
)
from .functions import (
    AbsValue,
    BallIndicator,
    Gaussian,
    Negated,
    RadialStep,
    Scaled,
    Shifted,
    TestFunction,
    TruncatedPower,
    WeakLpWitness,
    Zero,
    interval,
    parse_function,
    unit_ball_volume,
)

__version__ = "0.1.0"
