"""Constrained consensus and distributed subgradient optimization, with
every convergence guarantee doubled as a runtime certificate.

The package simulates round-based multi-agent algorithms in which each
agent keeps its estimate inside its own closed convex set while mixing
with neighbors over a time-varying communication schedule:

* projected consensus: mix, then project (``cclab.consensus``);
* distributed projected subgradient: mix, step along the local
  objective's subgradient, then project (``cclab.subgradient``).

Supporting modules provide exact projections and intersection oracles
(``cclab.sets``), validated weight schedules and their mixing bounds
(``cclab.network``), declarative JSON scenarios (``cclab.scenario``),
independent reference optima (``cclab.reference``) and a CLI
(``cclab.cli``, installed as ``cclab``).
"""

from .consensus import (
    ConsensusTrace,
    StepRecord,
    consensus_step,
    disagreement,
    lyapunov_check,
    rate_certificate,
    run_consensus,
)
from .network import (
    WeightSchedule,
    check_ergodicity,
    ergodicity_bound,
    make_schedule,
    schedule_from_dict,
    transition_matrix,
    validate_schedule,
    validate_weights,
)
from .reference import ReferenceSolution, solve_reference, total_objective
from .report import Report
from .scenario import Scenario, ScenarioError, Witness, load_scenario, save_scenario
from .sets import (
    Ball,
    Box,
    ConvexSet,
    ErrorBoundResult,
    FullSpace,
    Halfspace,
    Hyperplane,
    distance_to_intersection,
    feasibility_gradient,
    feasibility_objective,
    intersection_error_bound,
    project_intersection,
    set_from_dict,
)
from .subgradient import (
    AbsoluteDeviation,
    ConstantStepsize,
    HarmonicStepsize,
    MaxAffine,
    NormDistance,
    OptTrace,
    Quadratic,
    ScriptedStepsize,
    descent_inequality_check,
    disagreement_decay_check,
    envelope_bound,
    function_from_dict,
    geometric_convolution,
    residual_bound_check,
    run_subgradient,
    stepsize_from_dict,
    subgradient_bound,
    subgradient_step,
)

__version__ = "0.1.0"

__all__ = [
    "AbsoluteDeviation",
    "Ball",
    "Box",
    "ConsensusTrace",
    "ConstantStepsize",
    "ConvexSet",
    "ErrorBoundResult",
    "FullSpace",
    "Halfspace",
    "HarmonicStepsize",
    "Hyperplane",
    "MaxAffine",
    "NormDistance",
    "OptTrace",
    "Quadratic",
    "ReferenceSolution",
    "Report",
    "Scenario",
    "ScenarioError",
    "ScriptedStepsize",
    "StepRecord",
    "WeightSchedule",
    "Witness",
    "check_ergodicity",
    "consensus_step",
    "descent_inequality_check",
    "disagreement",
    "disagreement_decay_check",
    "distance_to_intersection",
    "envelope_bound",
    "ergodicity_bound",
    "feasibility_gradient",
    "feasibility_objective",
    "function_from_dict",
    "geometric_convolution",
    "intersection_error_bound",
    "load_scenario",
    "lyapunov_check",
    "make_schedule",
    "project_intersection",
    "rate_certificate",
    "residual_bound_check",
    "run_consensus",
    "run_subgradient",
    "save_scenario",
    "schedule_from_dict",
    "set_from_dict",
    "solve_reference",
    "stepsize_from_dict",
    "subgradient_bound",
    "subgradient_step",
    "total_objective",
    "transition_matrix",
    "validate_schedule",
    "validate_weights",
]
