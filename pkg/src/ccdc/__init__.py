"""Robustness of classical common-cause/direct-cause (CCDC) explanations.

Submodules:

- :mod:`ccdc.tensor`          labeled multipartite operators and tensor algebra
- :mod:`ccdc.processes`       process matrices, named processes, validation
- :mod:`ccdc.sdp`             conic program construction and solving
- :mod:`ccdc.approximations`  inner, outer and PPT approximations of the DC cone
- :mod:`ccdc.robustness`      robustness programs, witnesses, analytic bounds
- :mod:`ccdc.sampling`        random ordered processes and see-saw search
- :mod:`ccdc.table`           robustness table for the named processes
- :mod:`ccdc.cli`             ``ccdc`` command
"""

from .approximations import HierarchyLevel, StateSet, build_inner_set, build_outer_set_qubit
from .processes import (
    BUILTINS,
    ProcessError,
    ProcessMatrix,
    canonical_process,
    validate_ordered,
    validate_tripartite_ordered,
)
from .robustness import (
    GENERALIZED,
    WHITE_NOISE,
    RobustnessReport,
    Witness,
    analytic_bounds,
    analytic_witnesses,
    dual_witness,
    robustness,
    verify_witness_sufficient,
)
from .sampling import SamplerSpec, sample_process, seesaw
from .sdp import SolverError
from .tensor import LabeledOperator, LayoutError, operator

__version__ = "0.1.0"

__all__ = [
    "BUILTINS", "GENERALIZED", "WHITE_NOISE", "HierarchyLevel", "LabeledOperator",
    "LayoutError", "ProcessError", "ProcessMatrix", "RobustnessReport", "SamplerSpec",
    "SolverError", "StateSet", "Witness", "analytic_bounds", "analytic_witnesses",
    "build_inner_set", "build_outer_set_qubit", "canonical_process", "dual_witness",
    "operator", "robustness", "sample_process", "seesaw", "validate_ordered",
    "validate_tripartite_ordered", "verify_witness_sufficient",
]
