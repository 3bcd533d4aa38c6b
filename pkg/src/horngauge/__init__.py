"""Numeric witnesses for fast loops on semi-weighted homogeneous surface singularities."""

__version__ = "0.1.0"

from .arcs import (
    INFINITY,
    FitResult,
    PuiseuxArc,
    PuiseuxSeries,
    contact_order,
    fit_valuation,
    horn_exponent_from_family,
    numeric_contact_order,
    series_valuation,
)
from .fpflow import FamilyPolynomial, FlowConfig, Sign, eta_valuations, phi, phi_batch, phi_literal, v_field
from .homotopy import growth_exponent, h_map, horn_surface_sample, surface_grid_from_h, trace_link_loop
from .verdict import conicality_verdict, upsilon_lower_bound
from .wpoly import Polynomial, SWHPolynomial, WeightSystem, decompose, euler_residual, singularity_probe

__all__ = [
    "INFINITY",
    "FitResult",
    "PuiseuxArc",
    "PuiseuxSeries",
    "contact_order",
    "fit_valuation",
    "horn_exponent_from_family",
    "numeric_contact_order",
    "series_valuation",
    "FamilyPolynomial",
    "FlowConfig",
    "Sign",
    "eta_valuations",
    "phi",
    "phi_batch",
    "phi_literal",
    "v_field",
    "growth_exponent",
    "h_map",
    "horn_surface_sample",
    "surface_grid_from_h",
    "trace_link_loop",
    "conicality_verdict",
    "upsilon_lower_bound",
    "Polynomial",
    "SWHPolynomial",
    "WeightSystem",
    "decompose",
    "euler_residual",
    "singularity_probe",
    "reference_polynomial",
]


def reference_polynomial() -> SWHPolynomial:
    """``x^2 + y^3 + z^5 + z^6`` with weights (15, 10, 6), the package's regression target."""
    from importlib.resources import files

    from .io import load_polynomial_doc, polynomial_from_doc

    return polynomial_from_doc(load_polynomial_doc(files(__package__) / "data" / "ref.json"))
