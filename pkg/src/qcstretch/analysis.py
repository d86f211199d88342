"""Measurement side: exponent estimators, premeasure/Carleson checks, Wolff potentials.

All operations act on frozen structures (or closed-form maps) and are pure;
probe loops use per-call RNG streams derived from explicit seeds.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .descent import probe_increments
from .engine import CantorStructure
from .logscale import Disk, LogScale
from .spectrum import Gauge, RieszParams

__all__ = [
    "ExponentTrace",
    "CarlesonReport",
    "WolffReport",
    "CallableProbe",
    "StructureProbe",
    "SeriesPointProbe",
    "stretch_trace",
    "rotation_trace",
    "gauged_premeasure",
    "premeasure_targets",
    "carleson_check",
    "wolff_potential",
    "wolff_report",
    "analytic_wolff_series",
    "image_premeasure",
    "image_premeasure_sequence",
]


# ----------------------------------------------------------------------
# probes: anything that can produce increments f(z0 + r e^{i phi}) - f(z0)


class CallableProbe:
    """Increments of a plain point-evaluable map (double-precision scales only)."""

    def __init__(self, f, z0: complex):
        self.f = f.eval if hasattr(f, "eval") else f
        self.z0 = complex(z0)
        self.f0 = self.f(self.z0)

    def increment(self, log_r, angle: float = 0.0):
        log_r = np.asarray(log_r, dtype=np.float64).ravel()
        mags = np.empty(len(log_r))
        args = np.empty(len(log_r))
        phase = cmath.rect(1.0, angle)
        for i, lr in enumerate(log_r):
            d = self.f(self.z0 + math.exp(lr) * phase) - self.f0
            if d == 0:
                raise ArithmeticError(f"degenerate increment at scale e^{lr:.3g}")
            mags[i] = math.log(abs(d))
            args[i] = cmath.phase(d)
        return mags, args


class StructureProbe:
    """Increments at a block center of a built structure, exact at any depth."""

    def __init__(self, structure: CantorStructure, slots):
        self.structure = structure
        self.chain = structure.chain(slots)

    def increment(self, log_r, angle: float = 0.0):
        res = probe_increments(self.structure, self.chain, log_r, angle)
        return res.log_mag, res.arg

    def branch_scales(self) -> list[LogScale]:
        return [LogScale(x) for x in self.chain.logs[1:]]

    @property
    def recorded_rotation(self) -> float:
        return self.structure.node_sumtheta[self.chain.nodes[-1]]


class SeriesPointProbe:
    """Increments of a series map at its n-th listed point."""

    def __init__(self, series, n: int):
        self.series = series
        self.n = n

    def increment(self, log_r, angle: float = 0.0):
        return self.series.increment(self.n, log_r, angle)


# ----------------------------------------------------------------------
# traces


@dataclass
class ExponentTrace:
    point: complex | None
    samples: list[tuple[LogScale, float]]  # scales strictly decreasing
    fitted_limit: float  # value at the smallest scale
    fit_residual: float  # spread over the last 3 samples
    cum_args: list[float] | None = None  # rotation traces: unwrapped args per scale


def _make_trace(point, log_scales, values, cum_args=None) -> ExponentTrace:
    samples = [(LogScale(lr), float(v)) for lr, v in zip(log_scales, values)]
    tail = values[-3:] if len(values) >= 3 else values
    return ExponentTrace(
        point=point,
        samples=samples,
        fitted_limit=float(values[-1]),
        fit_residual=float(np.max(tail) - np.min(tail)),
        cum_args=list(cum_args) if cum_args is not None else None,
    )


def stretch_trace(probe, scales, angle: float = 0.0, point: complex | None = None) -> ExponentTrace:
    """value per scale = log|f(z0+r) - f(z0)| / log r."""
    logs = np.array(sorted((s.log for s in scales), reverse=True))
    mags, _ = probe.increment(logs, angle)
    return _make_trace(point, logs, mags / logs)


def rotation_trace(
    probe,
    scales,
    ray_samples_per_decade: int = 64,
    angle: float = 0.0,
    anchor: float = 4.0,
    max_refinements: int = 6,
    point: complex | None = None,
) -> ExponentTrace:
    """Cumulative winding of the image of the ray [z0 + r, infinity).

    The argument is unwrapped along log-spaced ray samples from the outer
    anchor (where the maps here are near the identity) down to each probe
    scale; value per scale = cumulative arg / log|f(z0+r) - f(z0)|.
    """
    want = np.array(sorted((s.log for s in scales), reverse=True))
    lo = float(want[-1])
    hi = math.log(anchor)
    spd = ray_samples_per_decade
    prev_total = None
    for _ in range(max_refinements + 1):
        n = max(2, int(math.ceil((hi - lo) / math.log(10.0) * spd)) + 1)
        grid = np.unique(np.concatenate([np.linspace(hi, lo, n), want]))[::-1]
        mags, args = probe.increment(grid, angle)
        steps = np.diff(args)
        wrapped = (steps + math.pi) % (2.0 * math.pi) - math.pi
        cum = args[0] + np.concatenate([[0.0], np.cumsum(wrapped)])
        total = cum[-1]
        if np.max(np.abs(wrapped), initial=0.0) < 0.95 * math.pi and (
            prev_total is not None and abs(total - prev_total) < 1e-6
        ):
            idx = np.searchsorted(-grid, -want)  # grid is descending
            values = cum[idx] / mags[idx]
            return _make_trace(point, want, values, cum_args=cum[idx])
        prev_total = total
        spd *= 2
    raise ArithmeticError("ray passes too near a singular center (unwrap did not stabilize)")


# ----------------------------------------------------------------------
# premeasures


def gauged_premeasure(structure: CantorStructure, gauge: Gauge, generation: int) -> float:
    """Sum over generation blocks of Lambda(s), multiplicity-weighted, log-safe."""
    if not 1 <= generation <= structure.depth:
        raise ValueError(f"generation must lie in [1, {structure.depth}]")
    lo, hi = structure.gen_node_range[generation]
    terms = [
        math.exp(structure.node_logcount[i] + gauge.eval_log_clamped(structure.node_logs[i]))
        for i in range(lo, hi)
    ]
    return math.fsum(terms)


def premeasure_targets(structure: CantorStructure) -> list[float]:
    """The builder identity values: prod_{k<=N} (1 - eps_k) per generation."""
    return [structure.coverage_product(g) for g in range(1, structure.depth + 1)]


def image_premeasure(structure: CantorStructure, generation: int, d_prime: float | None = None) -> float:
    """Sum of Lambda'(t) over generation blocks, Lambda'(r) = r^d' h(r)^{d'/(K d)}.

    d' defaults to d/alpha, the exponent balancing s -> t (the image radii
    satisfy log t / log s -> alpha).
    """
    if d_prime is None:
        d_prime = structure.d / structure.params.alpha
    g = structure.gauge
    power = d_prime / (structure.K_bar * structure.d)
    lo, hi = structure.gen_node_range[generation]
    terms = [
        math.exp(
            structure.node_logcount[i]
            + d_prime * structure.node_logt[i]
            + power * g.log_h(structure.node_logt[i], clamp=True)
        )
        for i in range(lo, hi)
    ]
    return math.fsum(terms)


def image_premeasure_sequence(structure: CantorStructure, d_prime: float | None = None) -> list[float]:
    return [image_premeasure(structure, g, d_prime) for g in range(1, structure.depth + 1)]


# ----------------------------------------------------------------------
# Carleson packing


@dataclass
class CarlesonReport:
    test_disks: int
    worst_ratio: float
    worst_disk: Disk
    worst_slack: float  # certified bound on the worst ratio's truncation error


def _node_lambdas(structure: CantorStructure, gauge: Gauge) -> np.ndarray:
    logs = np.asarray(structure.node_logs)
    return np.exp(np.array([gauge.eval_log_clamped(x) for x in logs]))


def _subtree_mass(structure: CantorStructure, lam: np.ndarray) -> np.ndarray:
    """mass[i] = sum over deepest-generation descendant paths of prod(m) * Lambda(s)."""
    n = len(structure.node_gen)
    mass = np.zeros(n)
    lo, hi = structure.gen_node_range[structure.depth]
    mass[lo:hi] = lam[lo:hi]
    for g in range(structure.depth - 1, 0, -1):
        tpl = structure.templates[g]  # children templates (generation g+1)
        counts = np.array([m for m, _ in tpl.families], dtype=float)
        lo, hi = structure.gen_node_range[g]
        for i in range(lo, hi):
            base = structure.node_childbase[i]
            mass[i] = float(np.dot(counts, mass[base : base + len(counts)]))
    return mass


def carleson_sum(
    structure: CantorStructure,
    gauge: Gauge,
    center: complex,
    log_radius: float,
    rel_tol: float = 1e-6,
    _cache: dict | None = None,
) -> tuple[float, float]:
    """(sum of Lambda(s) over maximal blocks inside B, certified slack).

    Maximal means: a block fully inside B is counted and its descendants are
    not.  Partial overlaps are recursed; a partial block whose entire
    subtree premeasure falls below rel_tol * Lambda(r(B)) is dropped into
    the slack tally instead.
    """
    if _cache is None:
        _cache = {}
    if "lam" not in _cache:
        _cache["lam"] = _node_lambdas(structure, gauge)
        _cache["mass"] = _subtree_mass(structure, _cache["lam"])
    lam = _cache["lam"]
    mass = _cache["mass"]
    radius = math.exp(log_radius)
    tol = rel_tol * math.exp(gauge.eval_log_clamped(log_radius))
    total = 0.0
    slack = 0.0
    # stack of (node, source center); the node's children get classified in bulk
    stack: list[tuple[int, complex]] = [(0, 0j)]
    while stack:
        node, c = stack.pop()
        gen = structure.node_gen[node]
        if gen >= structure.depth:
            continue
        tpl = structure.templates[gen]
        s_parent = math.exp(structure.node_logs[node]) if structure.node_logs[node] > -700 else 0.0
        childc = c + s_parent * tpl.centers
        base = structure.node_childbase[node]
        fam = tpl.fam_of_slot
        logs_child = np.array(
            [structure.node_logs[base + f] for f in range(len(tpl.families))]
        )
        s_child = np.exp(np.maximum(logs_child, -700.0)) * (logs_child > -745.0)
        sc = s_child[fam]
        dist = np.abs(childc - center)
        full = dist + sc <= radius
        partial = (~full) & (dist < radius + sc)
        if full.any():
            counts = np.bincount(fam[full], minlength=len(tpl.families)).astype(float)
            total += float(np.dot(counts, lam[base : base + len(counts)]))
        for idx in np.flatnonzero(partial):
            child = base + int(fam[idx])
            m = mass[child]
            if m <= tol:
                slack += m
            else:
                stack.append((child, complex(childc[idx])))
    return total, slack


def carleson_check(
    structure: CantorStructure,
    gauge: Gauge,
    trials: int = 1000,
    rng_seed: int = 0,
) -> CarlesonReport:
    """Worst ratio sum Lambda(blocks in B) / Lambda(r(B)) over random disks.

    Radii are log-uniform between the smallest block scale and 1, centers
    uniform in the unit disk.
    """
    if trials < 100:
        raise ValueError("trials must be >= 100")
    rng = np.random.default_rng(rng_seed)
    lo, hi = structure.gen_node_range[structure.depth]
    log_smallest = min(structure.node_logs[lo:hi])
    cache: dict = {}
    worst = -1.0
    worst_disk = Disk(0j, LogScale(0.0))
    worst_slack = 0.0
    for _ in range(trials):
        log_r = rng.uniform(log_smallest, 0.0)
        rad = math.sqrt(rng.random())
        th = rng.uniform(0.0, 2.0 * math.pi)
        c = cmath.rect(rad, th)
        total, slack = carleson_sum(structure, gauge, c, log_r, _cache=cache)
        denom = math.exp(gauge.eval_log_clamped(log_r))
        ratio = (total + 0.5 * slack) / denom
        if ratio > worst:
            worst = ratio
            worst_disk = Disk(c, LogScale(log_r))
            worst_slack = 0.5 * slack / denom
    return CarlesonReport(
        test_disks=trials, worst_ratio=worst, worst_disk=worst_disk, worst_slack=worst_slack
    )


# ----------------------------------------------------------------------
# Wolff potentials


@dataclass
class WolffReport:
    evaluation_points: int
    sup_potential: float
    analytic_series_value: float
    potentials: list[float]
    off_support: list[bool]


def analytic_wolff_series(riesz: RieszParams, n_max: int) -> float:
    """Partial comparison series sum_{n=2}^{n_max} n^{-d K (p'-1) delta}."""
    e = riesz.d * riesz.K * (riesz.p_conjugate - 1.0) * riesz.delta
    return math.fsum(n**-e for n in range(2, n_max + 1))


def _containing_chain(structure: CantorStructure, z: complex, gen_cut: int):
    """Slot path of nested source blocks containing z, down to gen_cut (may stop early).

    Walks in frame coordinates; a point is in a generation-g block iff the
    frame position sits inside a slot's inner pullback disk of radius
    sigma^K_bar * R.
    """
    slots = []
    node = 0
    p = z
    for g in range(1, gen_cut + 1):
        tpl = structure.templates[g - 1]
        d2 = np.abs(p - tpl.centers) ** 2
        inside = np.flatnonzero(d2 < tpl.radii**2)
        hit = -1
        scl = 0.0
        for s in inside:
            child = structure.node_childbase[node] + int(tpl.fam_of_slot[s])
            # sigma^K_bar * R, the inner-pullback radius in frame units
            skr = math.exp(
                structure.K_bar * structure.node_logsigma[child] + structure.node_logR[child]
            )
            if d2[s] < skr * skr:
                hit = int(s)
                scl = skr
                break
        if hit < 0:
            break
        p = (p - complex(tpl.centers[hit])) / scl
        slots.append(hit)
        node = structure.node_childbase[node] + int(tpl.fam_of_slot[hit])
    return slots


def _nu_profile(structure: CantorStructure, z: complex, gen_cut: int, budget: int = 600):
    """Terminal records (dist, size, mass) of a mass-priority tree exploration.

    nu(B(z,r)) is bracketed from the records: masses fully inside B(z,r)
    give the lower bound, masses whose window [dist-s, dist+s] straddles r
    give the slack.  Expansion priority favors heavy blocks near z, and the
    branch through z is force-expanded so the small-r behavior at support
    points is exact.  One profile serves every radius.
    """
    masses = [1.0]
    for g in range(1, gen_cut + 1):
        masses.append(masses[-1] / structure.templates[g - 1].slot_count)
    # candidate pool (unexpanded nodes), grown in chunks
    p_node = [np.array([0], dtype=np.int64)]
    p_center = [np.array([0j], dtype=np.complex128)]
    p_gen = [np.array([0], dtype=np.int64)]
    p_dist = [np.array([abs(z)])]
    p_size = [np.array([1.0])]
    p_haz = [np.array([True])]
    expanded = [np.array([False])]
    spent = 0
    while spent < budget:
        node = np.concatenate(p_node)
        center = np.concatenate(p_center)
        gen = np.concatenate(p_gen)
        dist = np.concatenate(p_dist)
        size = np.concatenate(p_size)
        haz = np.concatenate(p_haz)
        exp_flag = np.concatenate(expanded)
        p_node, p_center, p_gen = [node], [center], [gen]
        p_dist, p_size, p_haz, expanded = [dist], [size], [haz], [exp_flag]
        cand = np.flatnonzero(~exp_flag & (gen < gen_cut))
        if len(cand) == 0:
            break
        m_arr = np.array([masses[g] for g in gen[cand]])
        pri = m_arr / (dist[cand] + size[cand] + 1e-300) + 1e30 * haz[cand]
        take = cand[np.argsort(-pri)[: min(64, budget - spent)]]
        spent += len(take)
        exp_flag[take] = True
        for i in take:
            g = int(gen[i])
            tpl = structure.templates[g]
            ls = structure.node_logs[node[i]]
            s_parent = math.exp(ls) if ls > -700 else 0.0
            childc = center[i] + s_parent * tpl.centers
            base = int(structure.node_childbase[node[i]])
            fam = tpl.fam_of_slot
            logs_child = np.array(
                [structure.node_logs[base + f] for f in range(len(tpl.families))]
            )
            s_child = np.where(logs_child > -700.0, np.exp(np.maximum(logs_child, -700.0)), 0.0)
            sc = s_child[fam]
            d = np.abs(childc - z)
            hz = np.zeros(len(childc), dtype=bool)
            if haz[i]:
                j = int(np.argmin(d))
                if d[j] < sc[j]:
                    hz[j] = True
            p_node.append(base + fam.astype(np.int64))
            p_center.append(childc)
            p_gen.append(np.full(len(childc), g + 1, dtype=np.int64))
            p_dist.append(d)
            p_size.append(sc)
            p_haz.append(hz)
            expanded.append(np.zeros(len(childc), dtype=bool))
    node = np.concatenate(p_node)
    gen = np.concatenate(p_gen)
    dist = np.concatenate(p_dist)
    size = np.concatenate(p_size)
    exp_flag = np.concatenate(expanded)
    keep = ~exp_flag
    m = np.array([masses[g] for g in gen[keep]])
    return dist[keep], size[keep], m


def wolff_potential(
    structure: CantorStructure,
    riesz: RieszParams,
    z: complex,
    generation_cut: int,
    budget: int = 1500,
) -> tuple[float, bool]:
    """Discretized homogeneous Wolff potential of the natural measure at z.

    The natural measure splits mass equally among children; nu(B(z,r)) is
    evaluated by block counting at generation_cut granularity on a dyadic
    log grid from the generation_cut block scale up to r = 4, and the
    integral is the trapezoid sum of (nu / r^{2-beta p})^{p'-1} d(log r).
    Returns (potential, off_support flag).
    """
    if not 1 <= generation_cut <= structure.depth:
        raise ValueError("generation_cut outside built depth")
    chain = _containing_chain(structure, z, generation_cut)
    off_support = len(chain) < generation_cut
    if chain:
        node = structure.node_for_path(
            tuple(
                int(structure.templates[g].fam_of_slot[s]) for g, s in enumerate(chain)
            )
        )
        r_lo = structure.node_logs[node] - math.log(2.0)
    else:
        lo, hi = structure.gen_node_range[generation_cut]
        r_lo = min(structure.node_logs[lo:hi]) - math.log(2.0)
    r_lo = max(r_lo, -700.0)
    grid = np.arange(r_lo, math.log(4.0), 0.5 * math.log(2.0))
    d_rec, s_rec, m_rec = _nu_profile(structure, z, generation_cut, budget)
    r = np.exp(grid)
    lower = np.array([float(np.sum(m_rec[d_rec + s_rec <= rv])) for rv in r])
    slack = np.array(
        [float(np.sum(m_rec[(d_rec + s_rec > rv) & (d_rec - s_rec < rv)])) for rv in r]
    )
    nu = lower + 0.5 * slack
    expo = riesz.p_conjugate - 1.0
    integrand = (nu / r ** (2.0 - riesz.beta * riesz.p)) ** expo
    dx = np.diff(grid)
    val = float(np.sum(0.5 * (integrand[1:] + integrand[:-1]) * dx))
    return val, off_support


def wolff_report(
    structure: CantorStructure,
    riesz: RieszParams,
    points,
    generation_cut: int,
) -> WolffReport:
    vals = []
    offs = []
    for z in points:
        v, off = wolff_potential(structure, riesz, complex(z), generation_cut)
        vals.append(v)
        offs.append(off)
    return WolffReport(
        evaluation_points=len(vals),
        sup_potential=max(vals) if vals else 0.0,
        analytic_series_value=analytic_wolff_series(riesz, max(generation_cut, 2)),
        potentials=vals,
        off_support=offs,
    )
