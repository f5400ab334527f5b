"""Equilibrium causality analysis for vector autoregressions."""

from .decomp import InfluenceMatrix, fevd, influence, limit_fevd, limit_fevd_svar
from .equilibrium import (
    absorption,
    class_distribution,
    local_distribution,
    periodicity_probe,
    pi_sensitivity,
    solve_pi,
    solve_pi_quota,
    transient_block,
)
from .identification import BootstrapConfig, identify
from .panel import LagSpec, TimeSeriesPanel, load_panel
from .structure import CausalStructure
from .var import RestrictionPattern, VarModel, fit_var

__all__ = [
    "BootstrapConfig",
    "CausalStructure",
    "InfluenceMatrix",
    "LagSpec",
    "RestrictionPattern",
    "TimeSeriesPanel",
    "VarModel",
    "absorption",
    "class_distribution",
    "fevd",
    "fit_var",
    "identify",
    "influence",
    "limit_fevd",
    "limit_fevd_svar",
    "load_panel",
    "local_distribution",
    "periodicity_probe",
    "pi_sensitivity",
    "solve_pi",
    "solve_pi_quota",
    "transient_block",
]
