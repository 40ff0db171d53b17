"""Triangular canonical form: sampled phi and g_i, left inversion, assembly."""

from .build import (
    FORM_VERSION,
    FormSettings,
    ObservabilityWarning,
    ResidualReport,
    TriangularForm,
    assemble_triangular_form,
    build_g,
    build_phi,
    residual_check,
)
from .inverse import INV_TOL, InverseResult, jacobian_condition, left_inverse, warm_inverse
from .sampled import (
    MCSHANE,
    NEAREST,
    InconsistentSamples,
    SampledFunction,
    check_consistency,
    mcshane_extend,
    nearest_extend,
)

__all__ = [
    "FORM_VERSION",
    "INV_TOL",
    "MCSHANE",
    "NEAREST",
    "FormSettings",
    "InconsistentSamples",
    "InverseResult",
    "ObservabilityWarning",
    "ResidualReport",
    "SampledFunction",
    "TriangularForm",
    "assemble_triangular_form",
    "build_g",
    "build_phi",
    "check_consistency",
    "jacobian_condition",
    "left_inverse",
    "mcshane_extend",
    "nearest_extend",
    "residual_check",
    "warm_inverse",
]
