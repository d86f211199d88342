"""Weighted sums of radial stretches: stretching at every point of a list.

f(z) = sum_n 2^{-n} f_{lambda_n}(z) with f_lambda(z) = (z-lambda)|z-lambda|^{1/K-1} + lambda
inside lambda + D and the identity outside.  Only finite lists are
materialized; the countable tail is handled by the analytic certificate
|tail after N terms| <= 2^{1-N} (each f_lambda is bounded by 2 on the disks
that matter), never by summed terms.

Probing the stretching exponent at lambda_n needs increments at scales far
below double resolution once n is large (the proof's collision cutoff grows
like 4^n), so increments have a dedicated small-r path: the n-th term
contributes exactly 2^{-n} r^{1/K}, every other listed term enters through
its Wirtinger derivatives at lambda_n, and magnitudes ride on a shared
scaling exponent.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .logscale import LogScale

__all__ = ["SeriesMap", "stretching_estimate_constant", "terms_for_tolerance"]


def terms_for_tolerance(tol: float) -> int:
    """Smallest truncation length with certified tail below tol."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    return math.ceil(1.0 - math.log2(tol / 2.0))


def stretching_estimate_constant(K: float, n_mag: int = 160, n_angle: int = 64) -> float:
    """Empirical sup of |(1+z)|1+z|^{1/K-1} - 1| / min(|z|, |z|^{1/K}).

    Grid: |z| log-uniform over [1e-8, 1e4] times n_angle directions.  The
    ratio tends to 1/K at 0, to 1 at infinity, and equals 1 at z = -1.
    """
    if not K > 1:
        raise ValueError("need K > 1")
    q = 1.0 / K
    mags = np.exp(np.linspace(math.log(1e-8), math.log(1e4), n_mag))
    angles = np.linspace(0.0, 2.0 * math.pi, n_angle, endpoint=False)
    z = mags[:, None] * np.exp(1j * angles)[None, :]
    w = 1.0 + z
    aw = np.abs(w)
    f = np.where(aw > 0, w * aw ** (q - 1.0), 0.0)
    num = np.abs(f - 1.0)
    den = np.minimum(np.abs(z), np.abs(z) ** q)
    return float(np.max(num / den))


@dataclass
class SeriesMap:
    """Finite-list sum of radial 1/K-stretches with weights 2^{-n} (n is 1-based)."""

    K: float
    lambdas: tuple[complex, ...]
    _c0: float | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if not self.K > 1:
            raise ValueError("need K > 1")
        self.lambdas = tuple(complex(l) for l in self.lambdas)
        for l in self.lambdas:
            if not abs(l) < 1.0:
                raise ValueError(f"lambda {l} outside the open unit disk")

    @property
    def c0(self) -> float:
        """Lemma-style estimate constant, computed once and recorded with the map."""
        if self._c0 is None:
            self._c0 = stretching_estimate_constant(self.K)
        return self._c0

    @property
    def cutoff_a(self) -> int:
        """Smallest a with 2^a > C_0."""
        return math.floor(math.log2(self.c0)) + 1

    # -- evaluation ----------------------------------------------------------

    def _term(self, n: int, z: complex) -> complex:
        lam = self.lambdas[n - 1]
        w = z - lam
        r = abs(w)
        if r >= 1.0 or r == 0.0:
            return z
        return w * r ** (1.0 / self.K - 1.0) + lam

    def eval(self, z: complex, tol: float = 1e-12) -> complex:
        val, _n = self.eval_certified(z, tol)
        return val

    def eval_certified(self, z: complex, tol: float) -> tuple[complex, int]:
        """Partial sum through N = min(listed, ceil(1 - log2(tol/2))) terms.

        The dropped indices (listed or not) contribute at most 2^{1-N} in
        absolute value, which is <= tol by the choice of N.
        """
        n_used = min(len(self.lambdas), terms_for_tolerance(tol))
        total = 0j
        for n in range(1, n_used + 1):
            total += 2.0**-n * self._term(n, z)
        return total, n_used

    # -- increments at a listed point -----------------------------------------

    def _derivative_coeffs(self, n: int) -> tuple[complex, complex]:
        """(sum_m w_m dz f_m, sum_m w_m dzbar f_m) at lambda_n, m != n."""
        q = 1.0 / self.K
        lam_n = self.lambdas[n - 1]
        A = 0j
        B = 0j
        for m, lam in enumerate(self.lambdas, start=1):
            if m == n:
                continue
            w = lam_n - lam
            r = abs(w)
            wt = 2.0**-m
            if r >= 1.0:
                A += wt  # identity branch
                continue
            mag = r ** (q - 1.0)
            A += wt * ((q + 1.0) / 2.0) * mag
            B += wt * ((q - 1.0) / 2.0) * mag * (w / w.conjugate())
        return A, B

    def increment(self, n: int, log_r: np.ndarray, angle: float = 0.0):
        """(log |f(lambda_n + r e^{i phi}) - f(lambda_n)|, arg) for log-domain r.

        Exact to first order in r/separation: for scales below 1e-3 times
        the distance to the nearest other lambda the non-own terms are
        linearized through their derivatives; above that the sum is
        evaluated directly.
        """
        log_r = np.asarray(log_r, dtype=np.float64).ravel()
        lam = self.lambdas[n - 1]
        q = 1.0 / self.K
        others = [l for m, l in enumerate(self.lambdas, start=1) if m != n]
        sep = min((abs(l - lam) for l in others), default=1.0)
        direct_floor = math.log(max(1e-12, 1e-3 * sep))
        phase = cmath.rect(1.0, angle)
        A, B = self._derivative_coeffs(n)
        wn = 2.0**-n
        out_mag = np.empty(len(log_r))
        out_arg = np.empty(len(log_r))
        f0 = self.eval(lam, tol=1e-300)
        for i, lr in enumerate(log_r):
            if lr >= direct_floor:
                r = math.exp(lr)
                d = self.eval(lam + r * phase, tol=1e-300) - f0
                out_mag[i] = math.log(abs(d))
                out_arg[i] = cmath.phase(d)
                continue
            # own term: w_n * (r e^{i phi}) r^{q-1}; others: A v + B conj(v)
            own_log = math.log(wn) + q * lr
            lin_log = lr  # coefficient magnitudes are O(1)
            scale = max(own_log, lin_log)
            own = cmath.rect(math.exp(own_log - scale), angle)
            v = math.exp(lr - scale)
            lin = (A * phase + B * phase.conjugate()) * v
            d = own + lin
            out_mag[i] = scale + math.log(abs(d))
            out_arg[i] = cmath.phase(d)
        return out_mag, out_arg

    # -- stretching probes -----------------------------------------------------

    def collision_radius(self, n: int) -> float:
        """Largest safe probe scale at lambda_n per the two-scale cutoff.

        A scale r is usable when every other listed lambda_m with index
        m < n + a + 10 stays outside distance r * (2^{n+1} C_0)^{1/(1-1/K)};
        nearer small-index points put the probe outside the far/near split
        the estimates need.
        """
        blow = (2.0 ** (n + 1) * self.c0) ** (1.0 / (1.0 - 1.0 / self.K))
        lam = self.lambdas[n - 1]
        lim = math.inf
        for m, l in enumerate(self.lambdas, start=1):
            if m == n or m >= n + self.cutoff_a + 10:
                continue
            lim = min(lim, abs(l - lam) / blow)
        return lim if lim < math.inf else 1.0

    def flagged(self, n: int, log_r: float) -> bool:
        return log_r > math.log(self.collision_radius(n))

    def stretching_at_lambda(self, n: int, scales) -> "SeriesStretchFit":
        """Per-scale stretching values at lambda_n plus the fitted constant c.

        Scales colliding with another lambda's near field are flagged and
        excluded from the fit, not silently used.  c comes from least
        squares of |increment| against r^{1/K} on the 4 smallest unflagged
        scales.
        """
        logs = np.array(sorted((s.log for s in scales), reverse=True))
        mags, _args = self.increment(n, logs)
        values = mags / logs
        flags = np.array([self.flagged(n, lr) for lr in logs])
        ok = np.flatnonzero(~flags)
        if len(ok) == 0:
            raise ValueError(f"every probe scale at lambda_{n} collides with a neighbor")
        fit_idx = ok[-4:] if len(ok) >= 4 else ok
        q = 1.0 / self.K
        # c = sum x y / sum x^2 with x = r^{1/K}, y = |increment|, rescaled
        ax = q * logs[fit_idx]
        ay = mags[fit_idx]
        s = np.max(ax)
        x = np.exp(ax - s)
        y = np.exp(ay - s)
        c = float(np.dot(x, y) / np.dot(x, x))
        exponent = float(values[ok[-1]])
        return SeriesStretchFit(
            n=n,
            log_scales=logs,
            values=values,
            flags=flags,
            exponent=exponent,
            c=c,
        )

    def descriptor(self) -> dict:
        return {
            "K": self.K,
            "lambdas": [[l.real, l.imag] for l in self.lambdas],
        }


@dataclass
class SeriesStretchFit:
    n: int
    log_scales: np.ndarray
    values: np.ndarray
    flags: np.ndarray
    exponent: float
    c: float
