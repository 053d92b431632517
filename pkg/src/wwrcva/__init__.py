"""CVA under wrong-way risk: drift-adjusted closed forms and bivariate Monte Carlo."""
from .affine import CIRParams, JCIRParams, OUParams, ShiftedAffineModel, parameter_set
from .engine import CvaRequest, CvaResult, compare, cva_from_epe, epe_profile, price, table2
from .exposure import ExposureSpec, forward, lognormal, swap
from .mc import SimulationPlan
from .termstructure import ShiftFunction, SurvivalCurve, calibrate_shift
from .wwm import DriftAdjustment, DriftProxy

__version__ = "0.1.0"

__all__ = [
    "CIRParams", "CvaRequest", "CvaResult", "DriftAdjustment", "DriftProxy", "ExposureSpec",
    "JCIRParams", "OUParams", "ShiftFunction", "ShiftedAffineModel", "SimulationPlan",
    "SurvivalCurve", "calibrate_shift", "compare", "cva_from_epe", "epe_profile", "forward",
    "lognormal", "parameter_set", "price", "swap", "table2",
]
