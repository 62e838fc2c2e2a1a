"""Kähler-Ricci solitons on toric fibrations over flag manifolds, numerically.

The fibre's moment polytope and the base's affine weight forms determine the
Fano test, the soliton vector, the normalization constant and, for
one-dimensional fibres, the metric profile.
"""

__version__ = "0.1.0"

from .basedata import FanoReport, WeightFormSet, available_presets, fano_check, load_base_preset, make_forms
from .errors import ToricSolitonError
from .metric1d import (
    Profile1D,
    ResidualReport,
    boundary_slope_check,
    ma_residual_1d,
    ma_residual_grid,
    potential_on_t_grid,
    residual_convergence,
    solve_profile,
)
from .polytope import MomentTensor, Polytope, Simplex, mc_oracle, triangulate, validate_polytope, weighted_moments
from .soliton import SolitonResult, futaki_vector, normalization_constant, solve_soliton_vector

__all__ = [
    "FanoReport",
    "MomentTensor",
    "Polytope",
    "Profile1D",
    "ResidualReport",
    "Simplex",
    "SolitonResult",
    "ToricSolitonError",
    "WeightFormSet",
    "available_presets",
    "boundary_slope_check",
    "fano_check",
    "futaki_vector",
    "load_base_preset",
    "ma_residual_1d",
    "ma_residual_grid",
    "make_forms",
    "mc_oracle",
    "normalization_constant",
    "potential_on_t_grid",
    "residual_convergence",
    "solve_profile",
    "solve_soliton_vector",
    "triangulate",
    "validate_polytope",
    "weighted_moments",
]
