"""Quasiconformal stretching/rotation constructions and their verification.

Builds the explicit Cantor-type sets on which a K-quasiconformal map
exhibits prescribed stretching and rotation exponents, with gauge-exact
generation premeasures, and provides the measurement side: exponent traces,
Carleson packing ratios, Wolff potentials, gauge admissibility checks.
"""

from ._kernel_select import using_compiled
from .descent import PrecisionRefusalError, eval_composed, eval_points, probe_increments
from .dimzero import DimensionZeroStructure, build_dimension_zero
from .elementary import (
    Identity,
    RadialStretch,
    Similarity,
    SpiralStretch,
    finite_difference_beltrami,
)
from .engine import (
    BuildingBlock,
    CantorStructure,
    SchedulePlan,
    build_gauged_rotation,
    build_gauged_stretch,
    build_riesz_capacity,
    solve_eta,
)
from .logscale import Disk, LogScale, MultiIndex, log_scale_product, disks_disjoint
from .packing import PackingInfeasibleError, auto_pack, pack_unit_disk
from .series import SeriesMap, stretching_estimate_constant
from .spectrum import (
    Gauge,
    RieszParams,
    StretchRotationParams,
    in_B_K,
    rotation_bar_parameters,
    spectrum_dimension,
)

__version__ = "0.1.0"

__all__ = [
    "using_compiled",
    "PrecisionRefusalError",
    "eval_composed",
    "eval_points",
    "probe_increments",
    "DimensionZeroStructure",
    "build_dimension_zero",
    "Identity",
    "RadialStretch",
    "Similarity",
    "SpiralStretch",
    "finite_difference_beltrami",
    "BuildingBlock",
    "CantorStructure",
    "SchedulePlan",
    "build_gauged_rotation",
    "build_gauged_stretch",
    "build_riesz_capacity",
    "solve_eta",
    "Disk",
    "LogScale",
    "MultiIndex",
    "log_scale_product",
    "disks_disjoint",
    "PackingInfeasibleError",
    "auto_pack",
    "pack_unit_disk",
    "SeriesMap",
    "stretching_estimate_constant",
    "Gauge",
    "RieszParams",
    "StretchRotationParams",
    "in_B_K",
    "rotation_bar_parameters",
    "spectrum_dimension",
]
