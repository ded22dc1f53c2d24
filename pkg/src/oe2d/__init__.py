"""Contextual bandits through offline regression and benchmark-policy designs."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    ContextualFunctionClass,
    DesignCertificate,
    Dirac,
    Explicit,
    FunctionClassSlice,
    PerContext,
    Smooth,
)
from .coverage import coverage, worst_pair  # noqa: E402
from .design import SolverConfig, StepMode, certify, exploitative_f_design, pure_exploration_design  # noqa: E402
from .errors import (  # noqa: E402
    CertificationFailure,
    ConfigurationError,
    DomainError,
    OE2DError,
    ResourceError,
    StructuralError,
    UnsupportedError,
)

__all__ = [
    "CertificationFailure",
    "ConfigurationError",
    "ContextualFunctionClass",
    "DesignCertificate",
    "Dirac",
    "DomainError",
    "Explicit",
    "FunctionClassSlice",
    "OE2DError",
    "PerContext",
    "ResourceError",
    "Smooth",
    "SolverConfig",
    "StepMode",
    "StructuralError",
    "UnsupportedError",
    "certify",
    "coverage",
    "exploitative_f_design",
    "pure_exploration_design",
    "worst_pair",
]
