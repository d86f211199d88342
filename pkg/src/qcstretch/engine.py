"""Cantor-type generation trees and their composed quasiconformal maps.

A built structure holds, per generation, one packed template (shared by all
parent blocks) and a tree of *path nodes*.  A path node represents "a block
whose branch chose families (j_1, ..., j_g)": the governing equation that
fixes the shrink factors sigma depends only on the accumulated products
R_{1,j_1}...R_{g,j_g} and eta_{1,j_1}...eta_{g-1,j_{g-1}} along the branch,
never on the member placements, so blocks sharing a family path share all
scale data.  Member-level blocks (the astronomically many actual disks) are
materialized lazily from (path node, slot choices).

Geometry convention used throughout evaluation: the *frame* of a block is
the unit disk mapped onto its source disk.  Template slots sit at their
packed positions in every frame; entering a child's inner disk rescales the
frame by sigma^K_bar * R and multiplies the image unfolding factor by
sigma * R * e^{i theta}.  All per-step factors stay in double range even
when the cumulative radii are far below 1e-308.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .logscale import Disk, LogScale, MultiIndex
from .packing import GenerationPacking, PackingInfeasibleError, auto_pack, pack_unit_disk
from .spectrum import (
    Gauge,
    RieszParams,
    StretchRotationParams,
    rotation_bar_parameters,
    spectrum_dimension,
)

__all__ = [
    "SchedulePlan",
    "CantorStructure",
    "BuildingBlock",
    "Chain",
    "solve_eta",
    "GoverningEquationError",
    "SigmaCapError",
    "build_gauged_stretch",
    "build_gauged_rotation",
    "build_riesz_capacity",
]

DEFAULT_SIGMA_CAP = 0.75
MAX_HALVINGS = 40


class GoverningEquationError(RuntimeError):
    pass


class SigmaCapError(RuntimeError):
    pass


# ----------------------------------------------------------------------
# schedule plans


@dataclass(frozen=True)
class SchedulePlan:
    """How to produce each generation's packing.

    auto mode fills the unit disk to deficit
    max(eps0 * ratio^(g-1), eps_floor) with halving families starting at
    r_start; explicit mode packs the given families verbatim.  The floor
    exists because coverage deficits below a few percent need an
    Apollonian-scale number of disks (a 1e-3 deficit costs ~1e5 and minutes
    of packing); lower it when that cost is acceptable.
    """

    mode: str = "auto"  # auto | explicit
    eps0: float = 0.25
    eps_ratio: float = 0.25
    eps_floor: float = 0.08
    r_start: float = 0.1
    explicit: tuple[tuple[tuple[int, float], ...], ...] = ()

    def target_eps(self, gen: int) -> float:
        return max(self.eps0 * self.eps_ratio ** (gen - 1), self.eps_floor)

    def pack(self, gen: int, seed_seq, halvings: int) -> GenerationPacking:
        factor = 0.5**halvings
        if self.mode == "auto":
            key = ("auto", self.target_eps(gen), self.r_start * factor,
                   seed_seq.entropy, tuple(seed_seq.spawn_key))
            hit = _PACK_CACHE.get(key)
            if hit is None:
                hit = auto_pack(self.target_eps(gen), seed_seq, r_start=self.r_start * factor)
                _PACK_CACHE[key] = hit
            return hit
        fams = self.explicit[gen - 1]
        fams = [(int(m * 4**halvings), r * factor) for m, r in fams]
        return pack_unit_disk(fams, seed_seq)

    def descriptor(self) -> dict:
        if self.mode == "auto":
            return {
                "mode": "auto",
                "eps0": self.eps0,
                "eps_ratio": self.eps_ratio,
                "eps_floor": self.eps_floor,
                "r_start": self.r_start,
            }
        return {"mode": "explicit", "generations": [[list(f) for f in g] for g in self.explicit]}

    @staticmethod
    def from_descriptor(desc: dict) -> "SchedulePlan":
        if desc.get("mode", "auto") == "auto":
            return SchedulePlan(
                mode="auto",
                eps0=float(desc.get("eps0", 0.25)),
                eps_ratio=float(desc.get("eps_ratio", 0.25)),
                eps_floor=float(desc.get("eps_floor", 0.08)),
                r_start=float(desc.get("r_start", 0.1)),
            )
        gens = tuple(tuple((int(m), float(r)) for m, r in g) for g in desc["generations"])
        return SchedulePlan(mode="explicit", explicit=gens)


# auto packings depend only on (target, r_start, seed); builds share them
_PACK_CACHE: dict = {}


# ----------------------------------------------------------------------
# governing equation


def solve_eta(
    gauge: Gauge,
    branch_R_product: LogScale,
    branch_eta_product: float,
    K: float,
    d: float,
    tol: float = 1e-12,
) -> float:
    """The unique eta_N > 0 with 1 = (prod eta)^{Kd} h(prod R^{2/d} prod eta^K).

    branch_R_product runs through generation N, branch_eta_product through
    N-1.  Solved by bisection on log eta (the defect is strictly increasing
    since h is nondecreasing), bracket expanded geometrically.
    """
    LR = branch_R_product.log
    if not branch_eta_product > 0:
        raise ValueError("eta product must be positive")
    LH = math.log(branch_eta_product)
    return math.exp(_solve_log_eta(gauge, LR, LH, K, d, tol))


def _solve_log_eta(gauge: Gauge, LR: float, LH: float, K: float, d: float, tol: float) -> float:
    def defect(x: float) -> float:
        lh_tot = LH + x
        return K * d * lh_tot + gauge.log_h((2.0 / d) * LR + K * lh_tot, clamp=True)

    lo = hi = -LH  # pure-power point; exact root for h == 1
    f0 = defect(lo)
    if f0 == 0.0:
        return lo
    step = 1.0
    if f0 > 0:
        while defect(lo) > 0:
            lo -= step
            step *= 2.0
            if step > 1e6:
                raise GoverningEquationError("governing equation unsolvable (bracket blew up)")
        hi = lo + step / 2.0
    else:
        while defect(hi) < 0:
            hi += step
            step *= 2.0
            if step > 1e6:
                raise GoverningEquationError("governing equation unsolvable (bracket blew up)")
        lo = hi - step / 2.0
    for _ in range(300):
        mid = 0.5 * (lo + hi)
        fm = defect(mid)
        if abs(fm) <= tol or hi - lo < 1e-15:
            return mid
        if fm < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ----------------------------------------------------------------------
# the structure


@dataclass
class BuildingBlock:
    index: MultiIndex
    source_disk: Disk
    image_disk: Disk
    sigma: LogScale
    eta: float
    cumulative_rotation: float  # unreduced radians
    cumulative_log_stretch: float  # log(t/s) = log |beta|
    node: int
    slots: tuple[int, ...]


@dataclass
class Chain:
    """Per-generation data along one member branch, frame-exact at any depth."""

    slots: tuple[int, ...]
    nodes: list[int]  # nodes[k] = path node at generation k (nodes[0] = root)
    zeta: list[complex]  # template center entered at generation k (1-based)
    scale: list[float]  # sigma^K_bar * R entered at generation k
    u: list[complex]  # u[k]: center's position in the generation-k frame
    v: list[complex]  # v[k]: image position of f(center) in the gen-k image frame
    logs: list[float]  # cumulative log s per generation (logs[0] = 0)
    logt: list[float]
    sumtheta: list[float]

    @property
    def depth(self) -> int:
        return len(self.slots)


class CantorStructure:
    """A built Cantor construction: templates, path tree, composed map data."""

    def __init__(
        self,
        variant: str,
        params: StretchRotationParams,
        gauge: Gauge,
        depth: int,
        seed: int,
        sigma_cap: float,
        d: float,
        K_bar: float,
        b: float,
        riesz: RieszParams | None = None,
    ):
        self.variant = variant
        self.params = params
        self.gauge = gauge
        self.depth = depth
        self.seed = seed
        self.sigma_cap = sigma_cap
        self.d = d
        self.K_bar = K_bar
        self.b = b
        self.riesz = riesz
        self.plan: SchedulePlan | None = None
        self.templates: list[GenerationPacking] = []
        self.halvings: list[int] = []
        # node arrays (built by the builder, node 0 = root)
        self.node_parent = [0]
        self.node_fam = [-1]
        self.node_gen = [0]
        self.node_childbase = [-1]
        self.node_eta = [1.0]
        self.node_logsigma = [0.0]
        self.node_theta = [0.0]
        self.node_logR = [0.0]
        self.node_logs = [0.0]
        self.node_logt = [0.0]
        self.node_sumtheta = [0.0]
        self.node_sumlogsigma = [0.0]
        self.node_sumLR = [0.0]
        self.node_sumLH = [0.0]
        self.node_logcount = [0.0]
        self.gen_node_range: list[tuple[int, int]] = [(0, 1)]
        self._frozen = None

    # -- derived quantities -------------------------------------------------

    @property
    def annulus_exponent(self) -> complex:
        """q of the annulus power pieces: 1/K_bar + i*b."""
        return complex(1.0 / self.K_bar, self.b)

    @property
    def mu_modulus(self) -> float:
        q = self.annulus_exponent
        return abs(q - 1.0) / abs(q + 1.0)

    def eps_list(self) -> list[float]:
        return [t.eps for t in self.templates]

    def coverage_product(self, generation: int | None = None) -> float:
        gens = self.templates[: generation if generation is not None else self.depth]
        out = 1.0
        for t in gens:
            out *= 1.0 - t.eps
        return out

    def sigma_max(self) -> float:
        return math.exp(max(self.node_logsigma[1:])) if len(self.node_logsigma) > 1 else 0.0

    def min_template_radius(self) -> float:
        return min(float(t.radii.min()) for t in self.templates)

    @property
    def detach_threshold(self) -> float:
        return min(1e-6, 0.002 * self.min_template_radius())

    # -- tree access ----------------------------------------------------------

    def children_of(self, node: int) -> range:
        base = self.node_childbase[node]
        if base < 0:
            return range(0, 0)
        nfam = len(self.templates[self.node_gen[node]].families)
        return range(base, base + nfam)

    def node_for_path(self, fams: tuple[int, ...]) -> int:
        node = 0
        for f in fams:
            node = self.node_childbase[node] + f
        return node

    def chain(self, slots) -> Chain:
        slots = tuple(int(s) for s in slots)
        nodes = [0]
        zeta: list[complex] = []
        scale: list[float] = []
        node = 0
        for g, s in enumerate(slots, start=1):
            tpl = self.templates[g - 1]
            fam = int(tpl.fam_of_slot[s])
            node = self.node_childbase[node] + fam
            nodes.append(node)
            zeta.append(complex(tpl.centers[s]))
            scale.append(math.exp(self.K_bar * self.node_logsigma[node] + self.node_logR[node]))
        m = len(slots)
        u = [0j] * (m + 1)
        v = [0j] * (m + 1)
        for k in range(m - 1, -1, -1):
            u[k] = zeta[k] + scale[k] * u[k + 1]
            n = nodes[k + 1]
            unfold = cmath.rect(
                math.exp(self.node_logsigma[n] + self.node_logR[n]), self.node_theta[n]
            )
            v[k] = zeta[k] + unfold * v[k + 1]
        return Chain(
            slots=slots,
            nodes=nodes,
            zeta=zeta,
            scale=scale,
            u=u,
            v=v,
            logs=[self.node_logs[n] for n in nodes],
            logt=[self.node_logt[n] for n in nodes],
            sumtheta=[self.node_sumtheta[n] for n in nodes],
        )

    def multi_index(self, slots) -> MultiIndex:
        entries = []
        for g, s in enumerate(slots, start=1):
            tpl = self.templates[g - 1]
            fam = int(tpl.fam_of_slot[s])
            lo, _hi = tpl.member_range(fam)
            entries.append((g, fam, int(s) - lo))
        return MultiIndex(tuple(entries))

    def block(self, slots) -> BuildingBlock:
        ch = self.chain(slots)
        node = ch.nodes[-1]
        return BuildingBlock(
            index=self.multi_index(slots),
            source_disk=Disk(ch.u[0], LogScale(self.node_logs[node])),
            image_disk=Disk(ch.v[0], LogScale(self.node_logt[node])),
            sigma=LogScale(self.node_logsigma[node]),
            eta=self.node_eta[node],
            cumulative_rotation=self.node_sumtheta[node],
            cumulative_log_stretch=self.node_logt[node] - self.node_logs[node],
            node=node,
            slots=ch.slots,
        )

    def random_slot_path(self, rng: np.random.Generator, depth: int | None = None) -> tuple[int, ...]:
        depth = self.depth if depth is None else depth
        return tuple(int(rng.integers(0, self.templates[g].slot_count)) for g in range(depth))

    # -- frozen arrays for the kernels ---------------------------------------

    def frozen(self):
        if self._frozen is None:
            self._frozen = _freeze(self)
        return self._frozen


class EngineData:
    """Flat numpy views of a structure, shared by both kernel implementations.

    Grid i (one per generation/family pair, in generation order) owns keys
    grid_keys[key_off[i]:key_off[i+1]], its CSR starts live at
    grid_starts[key_off[i]+i : key_off[i+1]+i+1] (each grid contributes
    nkeys+1 start entries), and start values index grid_items relative to
    item_off[i].
    """

    __slots__ = (
        "depth", "a_re", "b_im", "strict_budget",
        "slot_cx", "slot_cy", "slot_R", "slot_fam", "gen_slot_off",
        "grid_cell", "grid_stride", "grid_slot_base",
        "grid_key_off", "grid_item_off", "grid_keys", "grid_starts", "grid_items",
        "gen_grid_off",
        "node_childbase", "node_sigKR", "node_unfold", "node_logs", "node_logt",
        "node_sumtheta", "node_t", "node_gen",
    )


def _freeze(s: CantorStructure) -> EngineData:
    d = EngineData()
    d.depth = s.depth
    d.a_re = 1.0 / s.K_bar
    d.b_im = s.b
    d.strict_budget = math.log(1e-2) - math.log(2.3e-16)
    cx, cy, R, fam = [], [], [], []
    gen_slot_off = [0]
    grid_cell, grid_stride, grid_slot_base = [], [], []
    grid_keys, grid_starts, grid_items = [], [], []
    grid_key_off, grid_item_off = [0], [0]
    gen_grid_off = [0]
    for tpl in s.templates:
        base = gen_slot_off[-1]
        cx.extend(tpl.centers.real)
        cy.extend(tpl.centers.imag)
        R.extend(tpl.radii)
        fam.extend(tpl.fam_of_slot)
        gen_slot_off.append(base + tpl.slot_count)
        fam_base = base
        for f, (m, _r) in enumerate(tpl.families):
            cell, keys, starts, items = tpl.grids[f]
            side = int(math.ceil(2.0 / cell)) + 4
            grid_cell.append(cell)
            grid_stride.append(side)
            grid_slot_base.append(fam_base)
            grid_keys.append(keys)
            grid_starts.append(starts.astype(np.int64))
            grid_items.append(items)
            grid_key_off.append(grid_key_off[-1] + len(keys))
            grid_item_off.append(grid_item_off[-1] + len(items))
            fam_base += m
        gen_grid_off.append(gen_grid_off[-1] + len(tpl.families))
    d.slot_cx = np.ascontiguousarray(cx, dtype=np.float64)
    d.slot_cy = np.ascontiguousarray(cy, dtype=np.float64)
    d.slot_R = np.ascontiguousarray(R, dtype=np.float64)
    d.slot_fam = np.ascontiguousarray(fam, dtype=np.int32)
    d.gen_slot_off = np.asarray(gen_slot_off, dtype=np.int64)
    d.grid_cell = np.asarray(grid_cell, dtype=np.float64)
    d.grid_stride = np.asarray(grid_stride, dtype=np.int64)
    d.grid_slot_base = np.asarray(grid_slot_base, dtype=np.int64)
    d.grid_key_off = np.asarray(grid_key_off, dtype=np.int64)
    d.grid_item_off = np.asarray(grid_item_off, dtype=np.int64)
    d.grid_keys = (
        np.ascontiguousarray(np.concatenate(grid_keys)) if grid_keys else np.zeros(0, np.int64)
    )
    d.grid_starts = (
        np.ascontiguousarray(np.concatenate(grid_starts)) if grid_starts else np.zeros(0, np.int64)
    )
    d.grid_items = (
        np.ascontiguousarray(np.concatenate(grid_items)) if grid_items else np.zeros(0, np.int32)
    )
    d.gen_grid_off = np.asarray(gen_grid_off, dtype=np.int64)
    n = len(s.node_gen)
    d.node_childbase = np.asarray(s.node_childbase, dtype=np.int64)
    sigKR = np.empty(n)
    unfold = np.empty(n, dtype=np.complex128)
    K_bar = s.K_bar
    for i in range(n):
        if i == 0:
            sigKR[i] = 1.0
            unfold[i] = 1.0
            continue
        ls = s.node_logsigma[i]
        lR = s.node_logR[i]
        sigKR[i] = math.exp(K_bar * ls + lR)
        unfold[i] = cmath.rect(math.exp(ls + lR), s.node_theta[i])
    d.node_sigKR = sigKR
    d.node_unfold = unfold
    d.node_logs = np.asarray(s.node_logs)
    d.node_logt = np.asarray(s.node_logt)
    d.node_sumtheta = np.asarray(s.node_sumtheta)
    with np.errstate(under="ignore"):
        d.node_t = np.exp(np.clip(d.node_logt, -745.0, 50.0))
        d.node_t[d.node_logt < -745.0] = 0.0
    d.node_gen = np.asarray(s.node_gen, dtype=np.int32)
    return d


# ----------------------------------------------------------------------
# builders


def _variant_geometry(variant, params, gauge, riesz):
    K, alpha, gamma = params.K, params.alpha, params.gamma
    if variant == "gauged_stretch":
        if gamma != 0.0:
            raise ValueError("gauged_stretch requires gamma = 0 (use the rotation builder)")
        d = spectrum_dimension(K, alpha, 0.0)
        if not (1.0 / K < alpha < 1.0):
            raise ValueError(f"alpha must lie in (1/K, 1) = ({1.0/K}, 1), got {alpha}")
        return d, K, 0.0
    if variant == "gauged_rotation":
        if not alpha < 1.0:
            raise ValueError("alpha must be < 1")
        d, K_bar, b = rotation_bar_parameters(K, alpha, gamma)
        return d, K_bar, b
    if variant == "riesz_capacity":
        assert riesz is not None
        d_spec = spectrum_dimension(K, alpha, gamma)
        if abs(d_spec - riesz.d) > 1e-9:
            raise ValueError(
                f"Riesz homogeneity 2-beta*p = {riesz.d} must equal F_K(alpha,gamma) = {d_spec}"
            )
        if gamma == 0.0:
            if not (1.0 / K < alpha < 1.0):
                raise ValueError(f"alpha must lie in (1/K, 1), got {alpha}")
            return riesz.d, K, 0.0
        d, K_bar, b = rotation_bar_parameters(K, alpha, gamma)
        return d, K_bar, b
    raise ValueError(f"unknown variant {variant!r}")


def _build(
    variant: str,
    params: StretchRotationParams,
    gauge: Gauge,
    plan: SchedulePlan,
    depth: int,
    rng_seed: int,
    sigma_cap: float,
    riesz: RieszParams | None = None,
) -> CantorStructure:
    if depth < 1:
        raise ValueError("depth must be >= 1")
    d, K_bar, b = _variant_geometry(variant, params, gauge, riesz)
    if variant != "riesz_capacity":
        gauge.ensure_admissible()
    q = complex(1.0 / K_bar, b)
    mu = abs(q - 1.0) / abs(q + 1.0)
    if mu >= 1.0:
        raise ValueError("parameters outside quasiconformal range (|mu| >= 1)")
    s = CantorStructure(
        variant=variant,
        params=params,
        gauge=gauge,
        depth=depth,
        seed=rng_seed,
        sigma_cap=sigma_cap,
        d=d,
        K_bar=K_bar,
        b=b,
        riesz=riesz,
    )
    s.plan = plan
    sig_exp = (2.0 - d) / (K_bar * d)
    memo: dict[tuple[int, int], float] = {}

    for gen in range(1, depth + 1):
        placed = None
        for halvings in range(MAX_HALVINGS + 1):
            seed_seq = np.random.SeedSequence(entropy=rng_seed, spawn_key=(gen, halvings))
            try:
                tpl = plan.pack(gen, seed_seq, halvings)
            except PackingInfeasibleError:
                continue
            new = _solve_generation(s, gen, tpl, gauge, sig_exp, K_bar, d, memo, riesz, sigma_cap)
            if new is not None:
                placed = (tpl, new, halvings)
                break
        if placed is None:
            raise SigmaCapError(
                f"sigma bound {sigma_cap} unachievable at generation {gen} "
                f"after {MAX_HALVINGS} halvings"
            )
        tpl, new_nodes, halvings = placed
        s.templates.append(tpl)
        s.halvings.append(halvings)
        base = len(s.node_gen)
        lo, hi = s.gen_node_range[gen - 1]
        for parent_local, parent in enumerate(range(lo, hi)):
            s.node_childbase[parent] = base + parent_local * len(tpl.families)
        for rec in new_nodes:
            (parent, fam, eta, lsig, theta, lR, logm) = rec
            s.node_parent.append(parent)
            s.node_fam.append(fam)
            s.node_gen.append(gen)
            s.node_childbase.append(-1)
            s.node_eta.append(eta)
            s.node_logsigma.append(lsig)
            s.node_theta.append(theta)
            s.node_logR.append(lR)
            s.node_logs.append(s.node_logs[parent] + K_bar * lsig + lR)
            s.node_logt.append(s.node_logt[parent] + lsig + lR)
            s.node_sumtheta.append(s.node_sumtheta[parent] + theta)
            s.node_sumlogsigma.append(s.node_sumlogsigma[parent] + lsig)
            s.node_sumLR.append(s.node_sumLR[parent] + lR)
            s.node_sumLH.append(s.node_sumLH[parent] + math.log(eta))
            s.node_logcount.append(s.node_logcount[parent] + logm)
        s.gen_node_range.append((base, len(s.node_gen)))
    return s


def _solve_generation(s, gen, tpl, gauge, sig_exp, K_bar, d, memo, riesz, sigma_cap):
    """Solve eta for every (parent node, family); None if the sigma cap breaks."""
    lo, hi = s.gen_node_range[gen - 1]
    out = []
    for parent in range(lo, hi):
        LR_prev = s.node_sumLR[parent]
        LH_prev = s.node_sumLH[parent]
        for fam, (m, R) in enumerate(tpl.families):
            lR = math.log(R)
            if riesz is not None:
                x = riesz.delta * math.log((gen + 1.0) / gen)
            else:
                key = (round((LR_prev + lR) * 1e12), round(LH_prev * 1e12))
                x = memo.get(key)
                if x is None:
                    x = _solve_log_eta(gauge, LR_prev + lR, LH_prev, K_bar, d, 1e-12)
                    memo[key] = x
            lsig = sig_exp * lR + x
            if lsig >= math.log(sigma_cap):
                return None
            theta = s.b * K_bar * lsig
            out.append((parent, fam, math.exp(x), lsig, theta, lR, math.log(m)))
    return out


def build_gauged_stretch(
    params: StretchRotationParams,
    gauge: Gauge,
    plan: SchedulePlan | None = None,
    depth: int = 5,
    rng_seed: int = 0,
    sigma_cap: float = DEFAULT_SIGMA_CAP,
) -> CantorStructure:
    return _build("gauged_stretch", params, gauge, plan or SchedulePlan(), depth, rng_seed, sigma_cap)


def build_gauged_rotation(
    params: StretchRotationParams,
    gauge: Gauge,
    plan: SchedulePlan | None = None,
    depth: int = 5,
    rng_seed: int = 0,
    sigma_cap: float = DEFAULT_SIGMA_CAP,
) -> CantorStructure:
    return _build("gauged_rotation", params, gauge, plan or SchedulePlan(), depth, rng_seed, sigma_cap)


def build_riesz_capacity(
    params: StretchRotationParams,
    riesz: RieszParams,
    plan: SchedulePlan | None = None,
    depth: int = 5,
    rng_seed: int = 0,
    sigma_cap: float = DEFAULT_SIGMA_CAP,
) -> CantorStructure:
    gauge = Gauge.constant(riesz.d)
    return _build(
        "riesz_capacity", params, gauge, plan or SchedulePlan(), depth, rng_seed, sigma_cap, riesz
    )
