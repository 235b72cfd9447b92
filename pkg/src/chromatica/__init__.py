"""Truncated formal group law arithmetic and torsion exponents for
cohomology rings of finite abelian p-groups."""

from .precision import PrecisionProfile
from .series import (
    CompositionError,
    ExactDivisionError,
    MonicPolynomial,
    NotAUnitError,
    ProfileMismatchError,
    TruncatedSeries,
    WeierstrassError,
)

__version__ = "0.1.0"

__all__ = [
    "PrecisionProfile",
    "TruncatedSeries",
    "MonicPolynomial",
    "ProfileMismatchError",
    "CompositionError",
    "ExactDivisionError",
    "NotAUnitError",
    "WeierstrassError",
    "__version__",
]
