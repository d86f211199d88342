"""Closed-form map pieces: similarities, radial stretches, spiral stretches.

Each piece is a homeomorphism of the plane with an analytic derivative,
Beltrami coefficient and inverse.  The stretch kinds act as the power map

    f(z) = c + (z - c) |(z - c)/R|^(q - 1)

inside the disk D(c, R) and as the identity outside; ``q = a + i b`` with
``a > 0``.  For a radial stretch q = a is real (a = 1/K gives the extremal
K-quasiconformal stretch); a spiral stretch uses q = alpha*(1 + i*gamma).
The Beltrami coefficient of the power map is ((q-1)/(q+1)) * w/conj(w), of
constant modulus |q-1|/|q+1| on the punctured disk.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

from .logscale import LogScale, ensure_finite_complex

__all__ = [
    "Identity",
    "Similarity",
    "RadialStretch",
    "SpiralStretch",
    "BeltramiSample",
    "finite_difference_beltrami",
    "DegenerateDerivativeError",
]

# below this radius the direct complex arithmetic is replaced by the
# log-polar route (deep-generation tests probe such scales)
_LOGPOLAR_CUTOFF = -700.0


class DegenerateDerivativeError(ArithmeticError):
    """Raised when a finite-difference z-derivative vanishes."""


@dataclass(frozen=True)
class BeltramiSample:
    location: complex
    mu: complex

    def __post_init__(self) -> None:
        ensure_finite_complex(self.location)
        if not abs(self.mu) < 1.0:
            raise ValueError(f"|mu| must be < 1, got {abs(self.mu)}")


@dataclass(frozen=True)
class Identity:
    def eval(self, z: complex) -> complex:
        return ensure_finite_complex(z)

    def beltrami(self, z: complex) -> complex:
        return 0j

    def inverse_eval(self, w: complex) -> complex:
        return ensure_finite_complex(w)

    @property
    def distortion(self) -> float:
        return 1.0


@dataclass(frozen=True)
class Similarity:
    """w = post_center + scale * e^{i rotation} * (z - pre_center)."""

    scale: LogScale
    rotation: float = 0.0
    pre_center: complex = 0j
    post_center: complex = 0j

    @property
    def factor(self) -> complex:
        return cmath.rect(self.scale.value, self.rotation)

    def eval(self, z: complex) -> complex:
        return self.post_center + self.factor * (ensure_finite_complex(z) - self.pre_center)

    def beltrami(self, z: complex) -> complex:
        return 0j

    def inverse_eval(self, w: complex) -> complex:
        return self.pre_center + (ensure_finite_complex(w) - self.post_center) / self.factor

    @property
    def distortion(self) -> float:
        return 1.0


def _power_eval(w: complex, log_R: float, q: complex) -> complex:
    """(w)|w/R|^(q-1) for w != 0, stable down to |w| ~ 1e-308."""
    r = abs(w)
    log_ratio = math.log(r) - log_R
    # |w/R|^(q-1) = exp((a-1) log_ratio) * e^{i b log_ratio}
    mag = math.exp((q.real - 1.0) * log_ratio)
    if q.imag == 0.0:
        return w * mag
    return w * cmath.rect(mag, q.imag * log_ratio)


def _power_eval_logpolar(log_r: float, angle: float, log_R: float, q: complex) -> tuple[float, float]:
    """Log-polar form of the power map about its center.

    Returns (log radius, argument) of f(c + e^{log_r + i angle}) - c.  The
    argument is the unreduced real number a*angle-free... the map multiplies
    the radius by |w/R|^(a-1) and adds b*log(|w|/R) to the argument; the
    spiral phase is anchored to 0 on the outer boundary and grows
    continuously in log|w/R|.
    """
    log_ratio = log_r - log_R
    return (q.real * log_ratio + log_R, angle + q.imag * log_ratio)


@dataclass(frozen=True)
class _PowerMapBase:
    center: complex = 0j
    outer_radius: LogScale = field(default_factory=lambda: LogScale(0.0))

    @property
    def exponent(self) -> complex:  # q
        raise NotImplementedError

    def _q_inverse(self) -> complex:
        q = self.exponent
        return (1.0 - 1j * q.imag) / q.real

    def eval(self, z: complex) -> complex:
        z = ensure_finite_complex(z)
        w = z - self.center
        if w == 0:
            return self.center  # fixed point, never NaN
        log_R = self.outer_radius.log
        r = abs(w)
        if math.log(r) >= log_R:
            return z  # identity on and outside the boundary circle
        if math.log(r) < _LOGPOLAR_CUTOFF:
            lr, ang = _power_eval_logpolar(math.log(r), cmath.phase(w), log_R, self.exponent)
            if lr < -745.0:
                return self.center
            return self.center + cmath.rect(math.exp(lr), ang)
        return self.center + _power_eval(w, log_R, self.exponent)

    def eval_logpolar(self, log_r: float, angle: float) -> tuple[float, float]:
        """Evaluate at c + e^{log_r + i*angle} in log-polar form.

        Usable at scales far below double range; the returned argument keeps
        the unreduced spiral phase for cumulative-rotation bookkeeping.
        """
        if log_r >= self.outer_radius.log:
            return (log_r, angle)
        return _power_eval_logpolar(log_r, angle, self.outer_radius.log, self.exponent)

    def beltrami(self, z: complex) -> complex:
        z = ensure_finite_complex(z)
        w = z - self.center
        if w == 0:
            return 0j
        if abs(w) >= self.outer_radius.value_or_zero():
            return 0j  # conformal (identity) region
        q = self.exponent
        return ((q - 1.0) / (q + 1.0)) * (w / w.conjugate())

    def inverse_eval(self, w: complex) -> complex:
        w = ensure_finite_complex(w)
        v = w - self.center
        if v == 0:
            return self.center
        log_R = self.outer_radius.log
        if math.log(abs(v)) >= log_R:
            return w
        return self.center + _power_eval(v, log_R, self._q_inverse())

    @property
    def mu_modulus(self) -> float:
        q = self.exponent
        return abs(q - 1.0) / abs(q + 1.0)

    @property
    def distortion(self) -> float:
        m = self.mu_modulus
        return (1.0 + m) / (1.0 - m)


@dataclass(frozen=True)
class RadialStretch(_PowerMapBase):
    """Pure modulus power map; exponent 1/K is the extremal K-qc stretch."""

    exponent_real: float = 0.5

    def __post_init__(self) -> None:
        if not self.exponent_real > 0:
            raise ValueError("exponent_real must be positive")

    @property
    def exponent(self) -> complex:
        return complex(self.exponent_real, 0.0)


@dataclass(frozen=True)
class SpiralStretch(_PowerMapBase):
    """Stretching and rotation combined: exponent alpha*(1 + i*gamma)."""

    alpha: float = 0.5
    gamma: float = 0.0
    # q - 1 is what every formula consumes; cache the offset once
    _q_minus_1: complex = field(init=False, repr=False, compare=False, default=0j)

    def __post_init__(self) -> None:
        if not self.alpha > 0:
            raise ValueError("alpha (real part of the exponent) must be positive")
        object.__setattr__(self, "_q_minus_1", complex(self.alpha - 1.0, self.alpha * self.gamma))

    @property
    def exponent(self) -> complex:
        return self._q_minus_1 + 1.0


def finite_difference_beltrami(f, z: complex, h: float) -> complex:
    """mu-hat = (d/dzbar f)/(d/dz f) by central differences.

    O(h^2) bias away from region boundaries.  ``f`` is anything with an
    ``eval`` method or a plain callable.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    ev = f.eval if hasattr(f, "eval") else f
    dx = ev(z + h) - ev(z - h)
    dy = ev(z + 1j * h) - ev(z - 1j * h)
    fz = (dx - 1j * dy) / (4.0 * h)
    fzbar = (dx + 1j * dy) / (4.0 * h)
    if abs(fz) < 1e-14:
        raise DegenerateDerivativeError(f"derivative vanishes at {z!r}")
    return fzbar / fz
