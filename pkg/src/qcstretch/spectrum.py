"""Multifractal spectrum formula, the parameter disk B_K, and gauge functions.

The spectrum F_K(alpha, gamma) is the maximal Hausdorff dimension of a
simultaneous stretching/rotation set of a K-quasiconformal map; parameter
pairs are realizable iff alpha*(1 + i*gamma) lies in the closed disk B_K
centered at (K + 1/K)/2 with radius (K - 1/K)/2.

Gauges are measuring functions Lambda(r) = r^d * h(r) with h nonnegative,
nondecreasing, and admissible: h(r)/h(s) >= C_eps * (r/s)^eps for every
eps > 0 on 0 < r <= s <= r_max.  Admissibility is verified empirically
(sampling plus a trend regression), not symbolically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "spectrum_dimension",
    "in_B_K",
    "StretchRotationParams",
    "rotation_bar_parameters",
    "Gauge",
    "AdmissibilityRow",
    "GaugeDomainError",
    "NotNondecreasingError",
    "RieszParams",
]

LOG_GAUGE_R_MAX = 0.01  # the log gauges blow up near 1; cut the domain at 1/100


class GaugeDomainError(ValueError):
    pass


class NotNondecreasingError(ValueError):
    pass


def spectrum_dimension(K: float, alpha: float, gamma: float = 0.0) -> float:
    """F_K(alpha, gamma) = 1 + alpha - (K+1)/(K-1) * sqrt((1-alpha)^2 + 4K alpha^2 gamma^2/(K+1)^2).

    May be <= 0 for extreme parameters; callers check positivity.
    """
    if K <= 1.0:
        raise ValueError("conformal case excluded (need K > 1)")
    rad = (1.0 - alpha) ** 2 + 4.0 * K * (alpha * gamma) ** 2 / (K + 1.0) ** 2
    return 1.0 + alpha - (K + 1.0) / (K - 1.0) * math.sqrt(rad)


def in_B_K(K: float, alpha: float, gamma: float, open_disk: bool = False) -> bool:
    """Membership of alpha*(1+i*gamma) in B_K (open or closed)."""
    center = 0.5 * (K + 1.0 / K)
    radius = 0.5 * (K - 1.0 / K)
    dist2 = (alpha - center) ** 2 + (alpha * gamma) ** 2
    return dist2 < radius**2 if open_disk else dist2 <= radius**2


@dataclass(frozen=True)
class StretchRotationParams:
    """Target exponents (alpha, gamma) for a K-quasiconformal construction."""

    K: float
    alpha: float
    gamma: float = 0.0

    def __post_init__(self) -> None:
        if not self.K > 1.0:
            raise ValueError("need K > 1")
        if not self.alpha > 0.0:
            raise ValueError("need alpha > 0")
        if not in_B_K(self.K, self.alpha, self.gamma):
            raise ValueError(
                f"alpha(1+i gamma) = {self.alpha}(1+{self.gamma}i) outside closed B_K for K={self.K}"
            )

    def dimension(self) -> float:
        return spectrum_dimension(self.K, self.alpha, self.gamma)


def rotation_bar_parameters(K: float, alpha: float, gamma: float) -> tuple[float, float, float]:
    """(d, K_bar, b) for the rotation construction.

    d = F_K(alpha, gamma); K_bar solves F_{K_bar}(alpha, 0) = d, i.e.
    K_bar = (2-d)/(2*alpha-d) (which forces 1/K_bar < alpha < 1); the spiral
    exponent on the annuli is q = 1/K_bar + i*b with
    b = alpha*gamma*(K_bar-1)/(K_bar*(1-alpha)).  This q always lands on the
    boundary circle of B_K, so the spiral piece has |mu| = (K-1)/(K+1).
    """
    if not alpha < 1.0:
        raise ValueError("rotation construction requires alpha < 1")
    d = spectrum_dimension(K, alpha, gamma)
    if not d > 0.0:
        raise ValueError(f"spectrum dimension nonpositive ({d}); parameters too extreme")
    K_bar = (2.0 - d) / (2.0 * alpha - d)
    b = alpha * gamma * (K_bar - 1.0) / (K_bar * (1.0 - alpha))
    return d, K_bar, b


@dataclass(frozen=True)
class AdmissibilityRow:
    eps: float
    c_eps: float
    failed: bool


@dataclass
class Gauge:
    """Lambda(r) = r^d * h(r) with h one of: constant, (log 1/r)^-beta, or a table.

    ``r_max`` cuts the domain (1/100 for the log gauges, which are not
    meaningful near 1); h is extended constantly above r_max for internal
    clamped evaluation, while the strict ``eval_log`` refuses r > r_max.
    """

    d: float
    kind: str = "constant"  # constant | log_power | table
    beta: float = 0.0
    table: tuple[tuple[float, float], ...] = ()  # (log r, log h) pairs, log r increasing
    r_max: float = 1.0
    _witness: dict[float, float] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        if not 0.0 < self.d < 2.0:
            raise ValueError("gauge dimension d must lie in (0, 2)")
        if self.kind == "log_power":
            if not self.beta > 0:
                raise ValueError("log_power gauge needs beta > 0")
            self.r_max = min(self.r_max, LOG_GAUGE_R_MAX)
        elif self.kind == "table":
            if len(self.table) < 2:
                raise ValueError("table gauge needs at least two points")
            self.r_max = min(self.r_max, LOG_GAUGE_R_MAX)
        elif self.kind != "constant":
            raise ValueError(f"unknown gauge kind {self.kind!r}")

    @staticmethod
    def constant(d: float) -> "Gauge":
        return Gauge(d=d, kind="constant")

    @staticmethod
    def log_power(d: float, beta: float) -> "Gauge":
        return Gauge(d=d, kind="log_power", beta=beta)

    @staticmethod
    def from_h_function(d: float, h, log_r_grid) -> "Gauge":
        tab = tuple((float(lr), math.log(h(math.exp(lr)))) for lr in sorted(log_r_grid))
        return Gauge(d=d, kind="table", table=tab)

    # -- h in log domain ---------------------------------------------------

    def log_h(self, log_r: float, clamp: bool = True) -> float:
        log_rmax = math.log(self.r_max)
        if log_r > log_rmax:
            if not clamp:
                raise GaugeDomainError(f"outside gauge domain: r=e^{log_r:.3g} > r_max={self.r_max}")
            log_r = log_rmax
        if self.kind == "constant":
            return 0.0
        if self.kind == "log_power":
            return -self.beta * math.log(-log_r)
        return self._table_log_h(log_r)

    def _table_log_h(self, log_r: float) -> float:
        xs = [p[0] for p in self.table]
        ys = [p[1] for p in self.table]
        if log_r <= xs[0]:
            return ys[0]
        if log_r >= xs[-1]:
            return ys[-1]
        i = int(np.searchsorted(xs, log_r)) - 1
        t = (log_r - xs[i]) / (xs[i + 1] - xs[i])
        return ys[i] + t * (ys[i + 1] - ys[i])

    def eval_log(self, log_r: float) -> float:
        """log Lambda(r) = d*log r + log h(r); strict domain (0, r_max]."""
        if log_r > math.log(self.r_max):
            raise GaugeDomainError(f"outside gauge domain: log r = {log_r:.6g}")
        return self.d * log_r + self.log_h(log_r, clamp=False)

    def eval_log_clamped(self, log_r: float) -> float:
        """log Lambda with h frozen at h(r_max) above the cut (still monotone)."""
        return self.d * log_r + self.log_h(log_r, clamp=True)

    # -- admissibility -----------------------------------------------------

    def analytic_c_eps(self, eps: float) -> float | None:
        """Exact admissibility constant where a closed form exists."""
        if self.kind == "constant":
            return 1.0
        if self.kind == "log_power":
            L = -math.log(self.r_max)
            if self.beta <= eps * L:
                return 1.0
            return (eps * L / self.beta) ** self.beta * math.exp(self.beta - eps * L)
        return None

    def check_admissibility(
        self,
        eps_grid,
        sample_count: int = 20000,
        rng_seed: int = 0,
        log_r_floor: float = -80.0,
    ) -> list[AdmissibilityRow]:
        """Empirical inf of (h(r)/h(s)) (s/r)^eps over random pairs r <= s <= r_max.

        FAIL is flagged when the infimum trends to zero as r/s shrinks
        (negative slope of the log ratio against log(s/r)).
        """
        if sample_count < 1000:
            raise ValueError("sample_count must be >= 1000")
        rng = np.random.default_rng(rng_seed)
        log_rmax = math.log(self.r_max)
        log_s = rng.uniform(log_r_floor, log_rmax, size=sample_count)
        log_r = rng.uniform(log_r_floor, log_s)
        self._check_monotone(log_r_floor, log_rmax)
        lh_r = np.array([self.log_h(x, clamp=False) for x in log_r])
        lh_s = np.array([self.log_h(x, clamp=False) for x in log_s])
        gap = log_s - log_r
        rows = []
        for eps in eps_grid:
            if not eps > 0:
                raise ValueError("eps must be positive")
            log_val = lh_r - lh_s + eps * gap
            c_eps = float(np.exp(np.min(log_val)))
            slope = _ls_slope(gap, log_val)
            failed = slope < -1e-3
            rows.append(AdmissibilityRow(eps=float(eps), c_eps=c_eps, failed=failed))
            if not failed:
                self._witness[float(eps)] = c_eps
        return rows

    def _check_monotone(self, log_lo: float, log_hi: float, n: int = 512) -> None:
        grid = np.linspace(log_lo, log_hi, n)
        vals = [self.log_h(x, clamp=False) for x in grid]
        diffs = np.diff(vals)
        if np.any(diffs < -1e-12):
            raise NotNondecreasingError("h not nondecreasing")

    def ensure_admissible(self, eps_grid=(0.05, 0.1, 0.5, 1.0), **kw) -> None:
        """Verify and cache C_eps witnesses; fatal on FAIL (builder inputs)."""
        missing = [e for e in eps_grid if float(e) not in self._witness]
        if not missing:
            return
        rows = self.check_admissibility(missing, **kw)
        bad = [r for r in rows if r.failed]
        if bad:
            raise ValueError(f"gauge not admissible (FAIL at eps={[r.eps for r in bad]})")

    def witness(self, eps: float) -> float:
        """Cached C_eps (analytic where available, else empirical)."""
        exact = self.analytic_c_eps(eps)
        if exact is not None:
            return exact
        if float(eps) not in self._witness:
            self.ensure_admissible((eps,))
        return self._witness[float(eps)]

    def check_inverse_gauge_condition(
        self, K: float, samples: int = 4000, rng_seed: int = 0, log_r_floor: float = -80.0
    ) -> tuple[bool, float]:
        """Whether h(r)/h(r^K) stays bounded; returns (bounded, worst ratio).

        The ratio is >= 1 for nondecreasing h (r^K < r), so boundedness of
        this comparison constant is exactly the extra decay Theorem-style
        condition the inverse-gauge construction needs.
        """
        if not K > 1:
            raise ValueError("need K > 1")
        rng = np.random.default_rng(rng_seed)
        log_r = rng.uniform(log_r_floor, math.log(self.r_max), size=samples)
        ratio = np.array([self.log_h(x, clamp=False) - self.log_h(K * x, clamp=False) for x in log_r])
        worst = float(np.exp(np.max(ratio)))
        # trend against log log(1/r): polynomial-in-log growth shows as a
        # positive slope here
        t = np.log(-log_r)
        slope = _ls_slope(t, ratio)
        return (slope < 0.05, worst)

    def descriptor(self) -> dict:
        out: dict = {"d": self.d, "kind": self.kind}
        if self.kind == "log_power":
            out["beta"] = self.beta
        if self.kind == "table":
            out["table"] = [list(p) for p in self.table]
        return out

    @staticmethod
    def from_descriptor(desc: dict) -> "Gauge":
        kind = desc.get("kind", "constant")
        if kind == "constant":
            return Gauge.constant(float(desc["d"]))
        if kind == "log_power":
            return Gauge.log_power(float(desc["d"]), float(desc["beta"]))
        if kind == "table":
            return Gauge(d=float(desc["d"]), kind="table", table=tuple(map(tuple, desc["table"])))
        raise ValueError(f"unknown gauge kind {kind!r}")


def _ls_slope(x: np.ndarray, y: np.ndarray) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xm = x - x.mean()
    denom = float(np.dot(xm, xm))
    if denom == 0.0:
        return 0.0
    return float(np.dot(xm, y - y.mean()) / denom)


@dataclass(frozen=True)
class RieszParams:
    """Parameters (beta, p) of the homogeneous Riesz capacity C_{beta,p}.

    The homogeneity 2 - beta*p equals the gauge dimension d of the
    associated construction; delta = 1 + 1/(d*K*(p'-1)) makes the Wolff
    potential comparison series sum_{n>=2} n^{-d K (p'-1) delta} convergent.
    """

    beta: float
    p: float
    K: float

    def __post_init__(self) -> None:
        if not 0.0 < self.beta < 2.0:
            raise ValueError("beta must lie in (0,2)")
        if not self.p > 1.0:
            raise ValueError("p must exceed 1")
        if not 0.0 < self.d < 2.0:
            raise ValueError(f"homogeneity 2 - beta*p = {self.d} outside (0,2)")

    @property
    def d(self) -> float:
        return 2.0 - self.beta * self.p

    @property
    def p_conjugate(self) -> float:
        return self.p / (self.p - 1.0)

    @property
    def delta(self) -> float:
        return 1.0 + 1.0 / (self.d * self.K * (self.p_conjugate - 1.0))
