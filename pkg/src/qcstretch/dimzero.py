"""Dimension-zero construction: a binary tree of concentric spiral annuli.

Each generation-n block of radius r_n gets a concentric inner disk of radius
rt_n = r_n^(max(n,1)^2) and two children of radius rt_n/4; the map is the
spiral z |z/r_n|^(alpha(1+i gamma) - 1) on the annulus and a similarity with
factor (rt_n/r_n)^(alpha-1) e^{i theta_n} inside.  The exponent schedule is
degenerate at n = 0 (and n = 1, where rt_1 = r_1), so the first nontrivial
annulus appears at generation 2; this is the k = 0 interpretation flagged in
the construction notes.

Radii collapse super-exponentially (rt_4 ~ 1e-790 already underflows
doubles), so everything is carried in the log domain; literal map
evaluation is refused beyond the last double-representable generation,
while the stretching/rotation exponent queries stay available at any depth.
"""

from __future__ import annotations

import cmath
import math

import numpy as np

from .elementary import SpiralStretch, finite_difference_beltrami
from .logscale import LogScale
from .spectrum import StretchRotationParams, in_B_K

__all__ = ["DimensionZeroStructure", "build_dimension_zero"]

_LOG4 = math.log(4.0)
_EVAL_FLOOR = -700.0


class DimensionZeroStructure:
    variant = "dimension_zero"

    def __init__(self, params: StretchRotationParams, depth: int, seed: int):
        self.params = params
        self.depth = depth
        self.seed = seed
        a, g = params.alpha, params.gamma
        self.exponent = complex(a, a * g)  # q = alpha(1 + i gamma)
        # schedule in the log domain
        lr = [0.0]
        lrt: list[float] = []
        theta: list[float] = []
        log_beta = [0.0]  # |beta_n|; beta_0 = 1
        cum_rot = [0.0]  # arg beta_n, unreduced
        for n in range(depth + 1):
            e = max(n, 1) ** 2
            lrt.append(e * lr[n])
            th = a * g * (lrt[n] - lr[n])  # phase making f continuous across the annulus
            theta.append(th)
            log_beta.append(log_beta[n] + (a - 1.0) * (lrt[n] - lr[n]))
            cum_rot.append(cum_rot[n] + th)
            lr.append(lrt[n] - _LOG4)
        self.log_r = lr  # len depth+2 (r_{depth+1} defined too)
        self.log_rt = lrt  # len depth+1
        self.theta = theta
        self.log_beta = log_beta
        self.cum_rotation = cum_rot
        self.evaluable_depth = max(
            (n for n in range(depth + 1) if self.log_rt[n] >= _EVAL_FLOOR), default=0
        )

    # -- symbolic (log-domain) exponent queries ------------------------------

    def stretch_ratio(self, n: int) -> float:
        """log|f(rt_n) - f(0)| / log rt_n from the stored branch data."""
        num = self.log_beta[n + 1] + self.log_rt[n]
        return num / self.log_rt[n]

    def stretch_ratio_formula(self, n: int) -> float:
        """Same ratio as alpha + log|beta_n|/log rt_n - (alpha-1) log r_n / log rt_n."""
        a = self.params.alpha
        return a + self.log_beta[n] / self.log_rt[n] - (a - 1.0) * self.log_r[n] / self.log_rt[n]

    def rotation_ratio(self, n: int) -> float:
        """arg(f(rt_n) - f(0)) / log|f(rt_n) - f(0)|, both from stored data."""
        num = self.cum_rotation[n] + self.theta[n]  # = arg beta_{n+1}
        den = self.log_beta[n + 1] + self.log_rt[n]
        return num / den

    def error_bound(self, n: int) -> float:
        """2(1-alpha) n log(rt_{n-1})/log(rt_n), the bound on |log beta_n / log rt_n|."""
        if n < 1:
            return 0.0
        return 2.0 * (1.0 - self.params.alpha) * n * (self.log_rt[n - 1] / self.log_rt[n])

    def beta_over_logrt(self, n: int) -> float:
        return abs(self.log_beta[n] / self.log_rt[n])

    def block_radius(self, n: int) -> LogScale:
        return LogScale(self.log_r[n])

    # -- point evaluation (shallow generations only) --------------------------

    def eval(self, z: complex) -> complex:
        """The composed map at a plain complex point.

        Descends the binary tree; raises when the descent reaches a
        generation whose scales underflow doubles.
        """
        from .descent import PrecisionRefusalError

        if abs(z) >= 1.0:
            return z
        c = 0j
        img = 0j
        beta = 1.0 + 0j
        n = 0
        while True:
            # inside A_n of the current block: children at +-rt_n/2, radius rt_n/4
            if n >= self.depth:
                return img + beta * (z - c)
            rt = math.exp(self.log_rt[n]) if self.log_rt[n] >= _EVAL_FLOOR else None
            if rt is None:
                raise PrecisionRefusalError(
                    f"scale below evaluable range at generation {n}; use symbolic exponent queries"
                )
            w = z - c
            child_off = None
            for off in (0.5 * rt, -0.5 * rt):
                if abs(w - off) <= 0.25 * rt:
                    child_off = off
                    break
            if child_off is None:
                return img + beta * w
            c = c + child_off
            img = img + beta * child_off
            n += 1  # now at the child block, radius r_n
            if self.log_rt[n] < _EVAL_FLOOR:
                raise PrecisionRefusalError(
                    f"scale below evaluable range at generation {n}; use symbolic exponent queries"
                )
            w = z - c
            rho = abs(w)
            r_n = math.exp(self.log_r[n])
            rt_n = math.exp(self.log_rt[n])
            if rho >= rt_n:
                lr = math.log(rho) - self.log_r[n] if rho > 0 else 0.0
                q = self.exponent
                fac = cmath.rect(math.exp((q.real - 1.0) * lr), q.imag * lr)
                return img + beta * (w * fac)
            beta *= cmath.rect(
                math.exp((self.params.alpha - 1.0) * (self.log_rt[n] - self.log_r[n])),
                self.theta[n],
            )

    def annulus_mu_samples(self, count: int, rng: np.random.Generator, fd_rel: float = 1e-6):
        """FD |mu-hat| at random annulus points, in block-local coordinates.

        The composed map near a generation-n annulus is (global similarity)
        o (spiral piece), and similarities leave |mu| unchanged, so the FD
        runs on the spiral piece in its own frame; this stays valid at
        generations whose absolute offsets underflow.
        """
        gens = [n for n in range(2, self.depth + 1) if self.log_rt[n] >= _EVAL_FLOOR + 100.0]
        if not gens:
            raise ValueError("no nontrivial evaluable annuli (need depth >= 2)")
        out_g = np.empty(count, dtype=np.int64)
        out_mu = np.empty(count)
        for i in range(count):
            n = int(gens[rng.integers(0, len(gens))])
            piece = SpiralStretch(
                center=0j,
                outer_radius=LogScale(self.log_r[n]),
                alpha=self.params.alpha,
                gamma=self.params.gamma,
            )
            lo = self.log_rt[n] + 1e-3
            hi = self.log_r[n] - 1e-3
            rho = math.exp(rng.uniform(lo, hi))
            th = rng.uniform(0.0, 2.0 * math.pi)
            z = cmath.rect(rho, th)
            mu = finite_difference_beltrami(piece, z, fd_rel * rho)
            out_g[i] = n
            out_mu[i] = abs(mu)
        return out_g, out_mu

    def descriptor(self) -> dict:
        return {
            "variant": self.variant,
            "K": self.params.K,
            "alpha": self.params.alpha,
            "gamma": self.params.gamma,
            "depth": self.depth,
            "seed": self.seed,
        }


def build_dimension_zero(
    params: StretchRotationParams, depth: int = 50, rng_seed: int = 0
) -> DimensionZeroStructure:
    """Binary-tree dimension-zero structure with the r^(n^2) inner-radius schedule.

    Requires z|z|^(alpha(1+i gamma)-1) to be K-quasiconformal, i.e.
    alpha(1+i gamma) in the closed disk B_K.
    """
    if not in_B_K(params.K, params.alpha, params.gamma):
        raise ValueError("alpha(1+i gamma) outside closed B_K: spiral piece not K-quasiconformal")
    if depth < 1:
        raise ValueError("depth must be >= 1")
    return DimensionZeroStructure(params, depth, rng_seed)
