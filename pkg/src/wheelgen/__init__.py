"""Radially-symmetric wheel concept generation with constrained diffusion
sampling: domain types, symmetry operators, the sub-process sampling
pipeline, conditioning assembly, the exemplar data pipeline, an HTTP
service, and a CLI.
"""

from .core import (
    ConceptGroup,
    FeedbackDelta,
    GenerationRecord,
    GenerationRequest,
    InspirationImage,
    SymmetryConfig,
    apply_feedback,
    validate_request,
)
from .pipeline import (
    ConditioningBundle,
    DenoiseSchedule,
    SubProcessPlan,
    linear_schedule,
    run_pipeline,
)
from .symmetry import (
    apply_circular_mask,
    build_wedge_mask,
    symmetrize,
    symmetry_score,
)

__all__ = [
    "ConceptGroup",
    "ConditioningBundle",
    "DenoiseSchedule",
    "FeedbackDelta",
    "GenerationRecord",
    "GenerationRequest",
    "InspirationImage",
    "SubProcessPlan",
    "SymmetryConfig",
    "apply_circular_mask",
    "apply_feedback",
    "build_wedge_mask",
    "linear_schedule",
    "run_pipeline",
    "symmetrize",
    "symmetry_score",
    "validate_request",
]

__version__ = "0.1.0"
