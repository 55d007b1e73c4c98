"""Hybrid quantum-classical pulse optimisation on simulated spin systems."""

__version__ = "0.1.0"

from .oracle import MeasurementModel, Oracle, OracleAnswer, OracleConfig, query_count
from .optimize import LineSearchParams, StopRule, run
from .pauli import PauliString, SparsePauliState, expectation, hs_inner, parse_label, to_matrix
from .propagation import ControlPulse, build_cache, discretize_duration, propagate, slice_propagator
from .spin import SpinSystem, build_controls, build_drift, load_system

__all__ = [
    "ControlPulse",
    "LineSearchParams",
    "MeasurementModel",
    "Oracle",
    "OracleAnswer",
    "OracleConfig",
    "PauliString",
    "SparsePauliState",
    "SpinSystem",
    "StopRule",
    "build_cache",
    "build_controls",
    "build_drift",
    "discretize_duration",
    "expectation",
    "hs_inner",
    "load_system",
    "parse_label",
    "propagate",
    "query_count",
    "run",
    "slice_propagator",
    "to_matrix",
]
