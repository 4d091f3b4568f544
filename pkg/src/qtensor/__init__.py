"""Numerical Hermitian geometry: jets, curvature tensors, identity checks and Q-positivity."""

from .catalog import (
    CATALOG, DomainError, MetricModel, ModelError, OneOneFormModel, ScalarFieldModel, catalog_get,
    conformal, default_rho, flat, from_spec, fubini_study, hopf, hyperbolic_ball, lck_potential,
    linear_pullback, omega_form, polynomial_random, product, rho_from_potential, scalar_field,
)
from .identities import IDENTITIES, IdentityReport, PreconditionError
from .jets import Jet, JetError, JetSingularError, coordinate_jets, ddbar, jeinsum
from .positivity import PositivityCertificate, q_nonneg_certify, qob_check_kahler, vaisman_reduction_bound
from .tensors import Geometry, lee_data, q_tensor, rel_residual

__version__ = "0.1.0"

__all__ = [
    "CATALOG", "DomainError", "Geometry", "IDENTITIES", "IdentityReport", "Jet", "JetError",
    "JetSingularError", "MetricModel", "ModelError", "OneOneFormModel", "PositivityCertificate",
    "PreconditionError", "ScalarFieldModel", "catalog_get", "conformal", "coordinate_jets", "ddbar",
    "default_rho", "flat", "from_spec", "fubini_study", "hopf", "hyperbolic_ball", "jeinsum",
    "lck_potential", "lee_data", "linear_pullback", "omega_form", "polynomial_random", "product",
    "q_nonneg_certify", "q_tensor", "qob_check_kahler", "rel_residual", "rho_from_potential",
    "scalar_field", "vaisman_reduction_bound",
]
