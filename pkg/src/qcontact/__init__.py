"""Numerical verification toolkit for quaternionic contact structures.

Extracts the compatible metric and quaternionic structure from a triple
of contact forms on a 7-dimensional level surface in R^8, computes the
vertical torsion and its irreducible components, and validates the
integrability, connection, deformation and symbol laws of the geometry.
"""

__version__ = "0.1.0"

from .geometry import LevelSurface, OneFormField, ScalarField, VectorField
from .qcstruct import (
    CompatiblePack,
    ContactTriple,
    FramePack,
    Sp2Element,
    StructureError,
    TorsionElement,
    adapted_complement,
    canonical_triple,
    conformal_rescale,
    dual_complement,
    galicki_triple,
    integrability_residual,
    metric_from_triple,
    validate_qc,
    vertical_torsion,
)
from .quatalg import Quaternion, ambient_inner, qmul, right_mul_matrix
from .rep4 import ProjectorTable, TensorSpace, build_projectors

__all__ = [
    "__version__",
    "LevelSurface", "OneFormField", "ScalarField", "VectorField",
    "CompatiblePack", "ContactTriple", "FramePack", "Sp2Element",
    "StructureError", "TorsionElement",
    "adapted_complement", "canonical_triple", "conformal_rescale",
    "dual_complement", "galicki_triple", "integrability_residual",
    "metric_from_triple", "validate_qc", "vertical_torsion",
    "Quaternion", "ambient_inner", "qmul", "right_mul_matrix",
    "ProjectorTable", "TensorSpace", "build_projectors",
]
