"""Problem, tuple and result models plus numerical defaults."""

from .constants import DELTA_SWEEP, MAGNITUDES, MESH_N
from .models import (
    CheckResult,
    ControlTuple,
    MayerProblem,
    Mesh,
    NlpProblem,
    NlpTuple,
    OcpProblem,
    PolyhedralCone,
    Problem,
    QuadraticFormRep,
    Report,
    ScalarField,
)
from .polynomial import PolynomialField

__all__ = [
    # Constants
    "DELTA_SWEEP",
    "MAGNITUDES",
    "MESH_N",
    # Problems
    "ScalarField",
    "PolynomialField",
    "NlpProblem",
    "MayerProblem",
    "OcpProblem",
    "Problem",
    # Reference points
    "Mesh",
    "NlpTuple",
    "ControlTuple",
    # Second-order objects
    "PolyhedralCone",
    "QuadraticFormRep",
    # Reports
    "CheckResult",
    "Report",
]
