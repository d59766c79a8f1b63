"""Consensus of linear multi-agent systems under non-uniform time-varying delays.

Delay-dependent LMI stability conditions for the consensus error, a
barrier-method feasibility solver with verifiable certificates, delay-margin
search, and a fixed-step DDE simulator for checking the results.
"""
from .graph import DelayGraph, Edge, check_topology, index_delays, laplacian, split_laplacians
from .model import AgentSystem, ErrorSystem, assemble_error_system
from .lmi import VariableLayout, VariableValues, assemble_full_lmi, layout_for
from .sdp import FeasibilityProblem, SolverOptions, Status, solve_feasibility, verify_certificate
from .margins import MarginQuery, bisect_scale, coordinate_margins, probe
from .simulate import (DelayProfile, HistorySpec, constant_profile, make_sinusoidal_profile,
                       simulate_x, simulate_z)
from .diagnostics import QuadratureTrace, check_lemma1, check_lemma2, lyapunov_series
from .config import RunConfig, load_config, parse_config, serialize

__all__ = [
    "AgentSystem", "DelayGraph", "DelayProfile", "Edge", "ErrorSystem", "FeasibilityProblem",
    "HistorySpec", "MarginQuery", "QuadratureTrace", "RunConfig", "SolverOptions", "Status",
    "VariableLayout", "VariableValues", "assemble_error_system", "assemble_full_lmi",
    "bisect_scale", "check_lemma1", "check_lemma2", "check_topology", "constant_profile",
    "coordinate_margins", "index_delays", "laplacian", "layout_for", "load_config",
    "lyapunov_series", "make_sinusoidal_profile", "parse_config", "probe", "serialize",
    "simulate_x", "simulate_z", "solve_feasibility", "split_laplacians", "verify_certificate",
]
