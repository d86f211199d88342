"""Plane geometry carriers and log-domain magnitudes.

Radii of deep-generation building blocks underflow double precision (values
like 1e-700 are routine), so every positive magnitude in this package is
carried as its natural logarithm.  ``LogScale`` wraps that convention:
multiplying magnitudes adds logs, and converting back to a plain float is an
explicit, checked step that fails loudly instead of silently flushing to zero.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

__all__ = [
    "LogScale",
    "Disk",
    "MultiIndex",
    "ScaleRangeError",
    "log_scale_product",
    "disks_disjoint",
    "ensure_finite_complex",
]

# exp() overflows just above this; used by the checked conversions
_MAX_EXP = 709.0


class ScaleRangeError(ValueError):
    """A magnitude left the range representable at the requested precision."""


def ensure_finite_complex(z: complex) -> complex:
    z = complex(z)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise ValueError(f"non-finite point {z!r}")
    return z


@dataclass(frozen=True, order=True)
class LogScale:
    """A positive magnitude stored as its natural log."""

    log: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.log):
            raise ScaleRangeError(f"scale out of range: log={self.log!r}")

    @staticmethod
    def of(value: float) -> "LogScale":
        if not (value > 0) or not math.isfinite(value):
            raise ValueError(f"LogScale requires a finite positive value, got {value!r}")
        return LogScale(math.log(value))

    @property
    def value(self) -> float:
        """Checked conversion to a plain float; raises outside double range."""
        if self.log > _MAX_EXP or self.log < -_MAX_EXP:
            raise ScaleRangeError(f"scale out of range: e^{self.log:.6g}")
        return math.exp(self.log)

    def value_or_zero(self) -> float:
        """Unchecked conversion; underflows to 0.0, still raises on overflow."""
        if self.log > _MAX_EXP:
            raise ScaleRangeError(f"scale out of range: e^{self.log:.6g}")
        return math.exp(self.log) if self.log >= -745.0 else 0.0

    def __mul__(self, other: "LogScale") -> "LogScale":
        return LogScale(self.log + other.log)

    def __truediv__(self, other: "LogScale") -> "LogScale":
        return LogScale(self.log - other.log)

    def __pow__(self, exponent: float) -> "LogScale":
        return LogScale(self.log * exponent)

    def __repr__(self) -> str:  # pragma: no cover - cosmetic
        return f"LogScale(log={self.log!r})"


def log_scale_product(factors: Iterable[LogScale]) -> LogScale:
    """Product of magnitudes as a LogScale (compensated summation of logs).

    Generation products feed exponent fits, so the accumulated log must not
    drift with the number of factors; Kahan summation keeps the error at one
    ulp per term independent of accumulation order.
    """
    total = 0.0
    comp = 0.0
    for f in factors:
        y = f.log - comp
        t = total + y
        comp = (t - total) - y
        total = t
    if not math.isfinite(total):
        raise ScaleRangeError("scale out of range: log product overflowed")
    return LogScale(total)


@dataclass(frozen=True)
class Disk:
    """A disk with an exactly-carried (log-domain) radius."""

    center: complex
    radius: LogScale

    def __post_init__(self) -> None:
        ensure_finite_complex(self.center)

    @property
    def log_radius(self) -> float:
        return self.radius.log


def disks_disjoint(a: Disk, b: Disk) -> bool:
    """Strict disjointness: tangent disks count as NOT disjoint.

    The annuli of the map constructions must never touch, hence the strict
    inequality.  Radii must be representable at working precision (this is a
    shallow-generation predicate).
    """
    ra = a.radius.value
    rb = b.radius.value
    return abs(a.center - b.center) > ra + rb


@dataclass(frozen=True, order=True)
class MultiIndex:
    """A tree path: one (generation, family, member) triple per level."""

    entries: tuple[tuple[int, int, int], ...]

    def __post_init__(self) -> None:
        prev = 0
        for gen, fam, mem in self.entries:
            if gen != prev + 1:
                raise ValueError(f"generations must increase from 1, got {self.entries!r}")
            if fam < 0 or mem < 0:
                raise ValueError("family/member indices must be nonnegative")
            prev = gen

    @property
    def depth(self) -> int:
        return len(self.entries)

    def child(self, family: int, member: int) -> "MultiIndex":
        return MultiIndex(self.entries + ((self.depth + 1, family, member),))


def unit_phase(angle: float) -> complex:
    """e^{i*angle} helper shared by the map modules."""
    return cmath.exp(1j * angle)
