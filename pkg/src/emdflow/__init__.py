"""Approximate Euclidean transportation maps in nearly linear time."""

from .instance import (
    DimensionError,
    Instance,
    InstanceError,
    ParseError,
    SupplyImbalanceError,
    TransportMap,
    format_instance,
    load_instance,
    map_cost,
    map_feasible,
)
from .mwu import SolverFailure, solve_flow
from .oracle import exact_emd
from .pipeline import TrialResult, approximate_emd, run_trial

__all__ = [
    "DimensionError",
    "Instance",
    "InstanceError",
    "ParseError",
    "SolverFailure",
    "SupplyImbalanceError",
    "TransportMap",
    "TrialResult",
    "approximate_emd",
    "exact_emd",
    "format_instance",
    "load_instance",
    "map_cost",
    "map_feasible",
    "run_trial",
    "solve_flow",
]
