"""Exact dynamic belief-network tracking over light-beam sensor data."""

from .factors import (
    DiscreteVariable,
    EnumerationCapError,
    Evidence,
    Factor,
    ImpossibleEvidenceError,
    Network,
    Node,
    NodeId,
    brute_force_posterior,
    elimination_order,
    evidence_probability,
    multiply,
    normalize,
    posterior,
    reduce,
    sum_out,
)
from .world import Layout, ObjectSpec, Sensor, SensorModelParams, uniform_initial
from .engine import (
    BeliefTrace,
    Session,
    advance,
    belief_trace,
    beliefs,
    inject_status_report,
    new_session,
    occupancy,
    oracle_max_deviation,
    position_beliefs,
    predict,
    sensor_status,
)
from .scenario import (
    ScenarioConfig,
    ScenarioError,
    ScenarioSemanticError,
    ScenarioSyntaxError,
    load_scenario,
    parse_scenario,
)
from .report import RunReport, render_trace, run

__version__ = "0.1.0"
