"""Floating-point precision tags, rounding, and the high/low policy object.

Everything downstream passes float64 arrays around; a "half" or "single"
array is a float64 array whose entries are exactly representable in the
lower format.  Rounding through the native numpy dtype gives correctly
rounded (round-to-nearest-even) results per elementary operation, which is
the emulation model used by all the precision sweeps.
"""

from dataclasses import dataclass

import numpy as np

HALF = "half"
SINGLE = "single"
DOUBLE = "double"
PRECISIONS = (HALF, SINGLE, DOUBLE)

DTYPES = {HALF: np.float16, SINGLE: np.float32, DOUBLE: np.float64}

# unit roundoff u = 2**-p for p significand bits including the implicit one
UNIT_ROUNDOFF = {HALF: 2.0 ** -11, SINGLE: 2.0 ** -24, DOUBLE: 2.0 ** -53}


class PrecisionRangeError(ArithmeticError):
    """A finite value overflowed the representable range of a lower format."""


def _check_tag(tag):
    if tag not in PRECISIONS:
        raise ValueError(f"unknown precision {tag!r}, expected one of {PRECISIONS}")


def round_to(a, tag):
    """Round values to the nearest representable numbers of the target format.

    Returns a float64 array carrying the rounded values.  Finite inputs that
    overflow the target range raise PrecisionRangeError; infinities and NaNs
    pass through unchanged.
    """
    _check_tag(tag)
    a = np.asarray(a, dtype=np.float64)
    if tag == DOUBLE:
        return a.copy()
    with np.errstate(over="ignore"):
        r = a.astype(DTYPES[tag])
    overflowed = np.isfinite(a) & ~np.isfinite(r)
    if np.any(overflowed):
        worst = np.max(np.abs(np.extract(overflowed, a)))
        raise PrecisionRangeError(f"value {worst:g} overflows {tag} range")
    return r.astype(np.float64)


@dataclass(frozen=True)
class PrecisionPolicy:
    """Pair of precisions: `low` for high-dimensional work, `high` for the rest.

    high applies to sketched-space coefficients, norms, the triangular factors
    and solves; low applies to n-dimensional storage and updates.  `high` must
    be at least as precise as `low`.
    """

    high: str = DOUBLE
    low: str = DOUBLE

    def __post_init__(self):
        _check_tag(self.high)
        _check_tag(self.low)
        if UNIT_ROUNDOFF[self.high] > UNIT_ROUNDOFF[self.low]:
            raise ValueError(f"high precision {self.high!r} is coarser than low {self.low!r}")

    @classmethod
    def uniform(cls, tag):
        return cls(high=tag, low=tag)

    @classmethod
    def mixed(cls, high=DOUBLE, low=HALF):
        return cls(high=high, low=low)

    @property
    def mode(self):
        return "uniform" if self.high == self.low else "mixed"

    @property
    def high_dtype(self):
        return DTYPES[self.high]

    @property
    def low_dtype(self):
        return DTYPES[self.low]

    @property
    def u_high(self):
        return UNIT_ROUNDOFF[self.high]

    @property
    def u_low(self):
        return UNIT_ROUNDOFF[self.low]


DOUBLE_POLICY = PrecisionPolicy()


def policy_from_tag(tag):
    """CLI precision flag -> policy.  'mixed' means half storage, double coefficients."""
    if tag == "mixed":
        return PrecisionPolicy.mixed()
    _check_tag(tag)
    return PrecisionPolicy.uniform(tag)
