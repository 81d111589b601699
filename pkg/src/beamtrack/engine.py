"""The growing unrolled network: expansion, evidence entry, and queries.

A session starts at interval T0 with the configured world nodes and, for the
chained variants, one status node per sensor. Each observation event expands
the network by one interval:

  1. new position and motion nodes for T+1
  2. temporal links from the T nodes
  3. new actual-crossing and observed-signal nodes (status nodes too, for
     the variants that track them, whether or not the sensor reported)
  4. links from the world nodes
  5. the report of every sensor entered as evidence (silent sensors count
     as explicit nc reports)
  6. beliefs refreshed, including those of earlier intervals

Sessions are immutable: ``advance`` and ``inject_status_report`` return new
sessions, so a rejected observation set never corrupts the caller's state.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Mapping

import numpy as np

from .factors import (
    ENUMERATION_CAP,
    DiscreteVariable,
    EnumerationCapError,
    Evidence,
    Factor,
    ImpossibleEvidenceError,
    Network,
    Node,
    NodeId,
    brute_force_posterior,
    enumeration_size,
    evidence_probability,
    posterior,
)
from .world import (
    ACT_STATES,
    MOTION_STATES,
    OBS_STATES,
    Layout,
    ObjectSpec,
    SensorModelParams,
    bc_act_cpt,
    bc_inv_chain_cpt,
    bc_inv_prior,
    bc_obs_cpt,
    motion_prior,
    transition_cpt,
)

OBJ, MOTION, ACT, OBS, INV = "obj", "motion", "act", "obs", "inv"


def node_id(kind: str, entity: str, time: int) -> NodeId:
    return NodeId(kind, entity, time)


@dataclass(frozen=True)
class TimeIndex:
    """Interval index with optional wall-clock bounds."""

    k: int
    t_begin: float | None = None
    t_end: float | None = None


@dataclass(frozen=True)
class TraceColumn:
    """Smoothed marginals computed right after one advance."""

    eval_time: int
    evidence_mass: float
    object_beliefs: Mapping[str, tuple[np.ndarray, ...]]
    status_beliefs: Mapping[str, Mapping[int, np.ndarray]] | None


@dataclass(frozen=True)
class BeliefTrace:
    """Time-indexed posterior position marginals for one object.

    ``columns[k][t]`` is the belief, evaluated during interval k, about the
    object's position during interval t <= k.
    """

    object_id: str
    states: tuple[str, ...]
    columns: Mapping[int, Mapping[int, np.ndarray]]

    @property
    def eval_times(self) -> tuple[int, ...]:
        return tuple(self.columns)


@dataclass(frozen=True)
class Session:
    layout: Layout
    objects: tuple[ObjectSpec, ...]
    params: SensorModelParams
    virtual_confidence: float | None
    t: int
    network: Network
    evidence: Mapping
    trace: tuple[TraceColumn, ...]
    evidence_log: tuple[float, ...]
    intervals: tuple[TimeIndex, ...]
    pending_reports: Mapping[str, float]


def _obj_var(layout: Layout, obj: str, t: int) -> DiscreteVariable:
    return DiscreteVariable(node_id(OBJ, obj, t), layout.regions)


def _motion_var(obj: str, t: int) -> DiscreteVariable:
    return DiscreteVariable(node_id(MOTION, obj, t), MOTION_STATES)


def _act_var(sensor: str, t: int) -> DiscreteVariable:
    return DiscreteVariable(node_id(ACT, sensor, t), ACT_STATES)


def _obs_var(sensor: str, t: int) -> DiscreteVariable:
    return DiscreteVariable(node_id(OBS, sensor, t), OBS_STATES)


def _inv_var(params: SensorModelParams, sensor: str, t: int) -> DiscreteVariable:
    return DiscreteVariable(node_id(INV, sensor, t), params.inv_states)


def new_session(
    layout: Layout,
    objects: Iterable[ObjectSpec],
    params: SensorModelParams,
    *,
    virtual_confidence: float | None = None,
) -> Session:
    """Fresh session at T0 with priors only."""
    objects = tuple(objects)
    if not objects:
        raise ValueError("at least one object is required")
    ids = [o.id for o in objects]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate object ids")
    if virtual_confidence is not None:
        if params.variant != "basic":
            raise ValueError(
                "virtual-likelihood evidence entry needs the basic variant"
            )
        if not 0.0 <= virtual_confidence <= 1.0:
            raise ValueError("virtual confidence must be in [0, 1]")

    nodes: list[Node] = []
    for obj in objects:
        var = _obj_var(layout, obj.id, 0)
        nodes.append(Node(var, (), Factor([var], obj.initial_distribution(layout))))
        mvar = _motion_var(obj.id, 0)
        nodes.append(Node(mvar, (), motion_prior(mvar, obj)))
    if params.chained:
        for sensor in layout.sensors:
            ivar = _inv_var(params, sensor.id, 0)
            nodes.append(Node(ivar, (), bc_inv_prior(params, ivar)))

    return Session(
        layout=layout,
        objects=objects,
        params=params,
        virtual_confidence=virtual_confidence,
        t=0,
        network=Network(nodes),
        evidence={},
        trace=(),
        evidence_log=(),
        intervals=(TimeIndex(0),),
        pending_reports={},
    )


def _virtual_finding(confidence: float, reported: str) -> np.ndarray:
    vec = np.full(len(OBS_STATES), (1.0 - confidence) / 2)
    vec[OBS_STATES.index(reported)] = confidence
    return vec


def _check_observations(layout: Layout, observations: Mapping[str, str]) -> None:
    known = {s.id for s in layout.sensors}
    for sensor_id, value in observations.items():
        if sensor_id not in known:
            raise ValueError(f"observation for unknown sensor {sensor_id}")
        if value not in OBS_STATES:
            raise ValueError(
                f"invalid observation {value!r} for {sensor_id}; "
                f"expected one of {OBS_STATES}"
            )


def advance(
    session: Session,
    observations: Mapping[str, str] | None = None,
    *,
    t_begin: float | None = None,
    t_end: float | None = None,
) -> Session:
    """Expand the network to T+1 and absorb one observation set.

    Sensors missing from ``observations`` report nc. Raises
    ImpossibleEvidenceError, leaving the input session untouched, when the
    observation set has zero probability under the model.
    """
    observations = dict(observations or {})
    _check_observations(session.layout, observations)
    if t_begin is not None and t_end is not None and t_end < t_begin:
        raise ValueError("t_end precedes t_begin")
    last = session.intervals[-1]
    if t_begin is not None and last.t_end is not None and t_begin < last.t_end:
        raise ValueError("interval metadata must be monotone")

    params = session.params
    layout = session.layout
    t_prev, t_new = session.t, session.t + 1

    nodes: list[Node] = []
    pairs: list[tuple[DiscreteVariable, DiscreteVariable]] = []
    for obj in session.objects:
        prev = _obj_var(layout, obj.id, t_prev)
        mprev = _motion_var(obj.id, t_prev)
        nxt = _obj_var(layout, obj.id, t_new)
        nodes.append(
            Node(
                nxt,
                (prev.id, mprev.id),
                transition_cpt(layout, obj, prev, mprev, nxt),
            )
        )
        mnew = _motion_var(obj.id, t_new)
        nodes.append(Node(mnew, (), motion_prior(mnew, obj)))
        pairs.append((prev, nxt))

    evidence = dict(session.evidence)
    for sensor in layout.sensors:
        inv = None
        if params.has_inv:
            inv = _inv_var(params, sensor.id, t_new)
            if not params.chained:
                nodes.append(Node(inv, (), bc_inv_prior(params, inv)))
            elif sensor.id in session.pending_reports:
                confidence = session.pending_reports[sensor.id]
                nodes.append(
                    Node(inv, (), bc_inv_prior(params.override(conf=confidence), inv))
                )
            else:
                prev_inv = _inv_var(params, sensor.id, t_prev)
                nodes.append(
                    Node(
                        inv,
                        (prev_inv.id,),
                        bc_inv_chain_cpt(params, prev_inv, inv),
                    )
                )
        act = _act_var(sensor.id, t_new)
        act_parents = tuple(v.id for pair in pairs for v in pair)
        nodes.append(Node(act, act_parents, bc_act_cpt(layout, sensor.id, pairs, act)))
        obs = _obs_var(sensor.id, t_new)
        if inv is None:
            nodes.append(Node(obs, (act.id,), bc_obs_cpt(params, act, obs)))
        else:
            nodes.append(
                Node(obs, (act.id, inv.id), bc_obs_cpt(params, act, obs, inv))
            )
        reported = observations.get(sensor.id, "nc")
        if session.virtual_confidence is not None:
            evidence[obs.id] = _virtual_finding(session.virtual_confidence, reported)
        else:
            evidence[obs.id] = reported

    network = session.network.extended(nodes)
    mass = evidence_probability(network, evidence)
    if mass == 0.0:
        raise ImpossibleEvidenceError(
            f"observation set at T{t_new} has probability 0 under "
            f"the {params.variant} variant"
        )

    object_beliefs = {
        obj.id: tuple(
            posterior(network, evidence, [node_id(OBJ, obj.id, t)]).values
            for t in range(t_new + 1)
        )
        for obj in session.objects
    }
    status_beliefs = None
    if params.has_inv:
        first = 0 if params.chained else 1
        status_beliefs = {
            sensor.id: {
                t: posterior(network, evidence, [node_id(INV, sensor.id, t)]).values
                for t in range(first, t_new + 1)
            }
            for sensor in layout.sensors
        }
    column = TraceColumn(
        eval_time=t_new,
        evidence_mass=mass,
        object_beliefs=object_beliefs,
        status_beliefs=status_beliefs,
    )

    return replace(
        session,
        t=t_new,
        network=network,
        evidence=evidence,
        trace=session.trace + (column,),
        evidence_log=session.evidence_log + (mass,),
        intervals=session.intervals + (TimeIndex(t_new, t_begin, t_end),),
        pending_reports={},
    )


def inject_status_report(
    session: Session, sensor_id: str, time: int, report_confidence: float
) -> Session:
    """Register a sensor status report arriving during the current interval.

    The next status node created for that sensor starts a fresh chain with
    prior (report_confidence, 1 - report_confidence) and no predecessor.
    """
    if not session.params.chained:
        raise ValueError(
            f"variant {session.params.variant!r} has no status chain to reset"
        )
    session.layout.sensor(sensor_id)
    if time != session.t:
        raise ValueError(
            f"status report timed {time}, but the session is at interval {session.t}"
        )
    if not 0.0 <= report_confidence <= 1.0:
        raise ValueError("report confidence must be in [0, 1]")
    pending = dict(session.pending_reports)
    pending[sensor_id] = report_confidence
    return replace(session, pending_reports=pending)


# --------------------------------------------------------------------------
# Queries
# --------------------------------------------------------------------------


def _require_node(session: Session, nid: NodeId) -> DiscreteVariable:
    if nid not in session.network:
        raise ValueError(f"unknown node {nid}")
    return session.network.variables[nid]


def beliefs(session: Session, kind: str, entity: str, at_time: int) -> dict[str, float]:
    """Smoothed posterior marginal of one node given all evidence so far."""
    nid = node_id(kind, entity, at_time)
    var = _require_node(session, nid)
    dist = posterior(session.network, session.evidence, [nid])
    return dict(zip(var.states, dist.values.tolist()))


def position_beliefs(session: Session, obj: str, at_time: int) -> dict[str, float]:
    return beliefs(session, OBJ, obj, at_time)


def sensor_status(session: Session, sensor_id: str, at_time: int) -> dict[str, float]:
    """Smoothed posterior over the sensor's status states."""
    if not session.params.has_inv:
        raise ValueError(
            f"variant {session.params.variant!r} does not track sensor status"
        )
    return beliefs(session, INV, sensor_id, at_time)


def predict(session: Session, horizon: int) -> dict[str, dict[int, np.ndarray]]:
    """Position marginals for T+1 .. T+horizon with no future observations."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    layout = session.layout
    nodes: list[Node] = []
    for obj in session.objects:
        for j in range(horizon):
            t_prev, t_new = session.t + j, session.t + j + 1
            prev = _obj_var(layout, obj.id, t_prev)
            mprev = _motion_var(obj.id, t_prev)
            nxt = _obj_var(layout, obj.id, t_new)
            nodes.append(
                Node(
                    nxt,
                    (prev.id, mprev.id),
                    transition_cpt(layout, obj, prev, mprev, nxt),
                )
            )
            mnew = _motion_var(obj.id, t_new)
            nodes.append(Node(mnew, (), motion_prior(mnew, obj)))
    network = session.network.extended(nodes)
    return {
        obj.id: {
            session.t + j: posterior(
                network, session.evidence, [node_id(OBJ, obj.id, session.t + j)]
            ).values
            for j in range(1, horizon + 1)
        }
        for obj in session.objects
    }


def occupancy(session: Session, region: str, at_time: int) -> np.ndarray:
    """Distribution of the number of objects in a region, entry k = P(#=k).

    Computed from the joint posterior over all object positions, not from a
    product of marginals.
    """
    if region not in session.layout.regions:
        raise ValueError(f"unknown region {region}")
    query = [node_id(OBJ, obj.id, at_time) for obj in session.objects]
    for nid in query:
        _require_node(session, nid)
    joint = posterior(session.network, session.evidence, query)
    r_idx = session.layout.regions.index(region)
    counts = np.zeros(len(session.objects) + 1)
    for assignment in np.ndindex(joint.values.shape):
        counts[sum(1 for a in assignment if a == r_idx)] += joint.values[assignment]
    return counts


def belief_trace(session: Session, obj: str) -> BeliefTrace:
    """The full smoothed position history, one column per advance."""
    if obj not in {o.id for o in session.objects}:
        raise ValueError(f"unknown object {obj}")
    columns = {
        col.eval_time: dict(enumerate(col.object_beliefs[obj]))
        for col in session.trace
    }
    return BeliefTrace(object_id=obj, states=session.layout.regions, columns=columns)


# --------------------------------------------------------------------------
# Oracle self-check
# --------------------------------------------------------------------------


def oracle_max_deviation(
    session: Session, cap: int = ENUMERATION_CAP
) -> float | None:
    """Max |elimination - enumeration| over all unevidenced node marginals.

    Returns None when the session's joint is too large to enumerate.
    """
    network, evidence = session.network, session.evidence
    if enumeration_size(network, evidence) > cap:
        return None
    queries = [
        nid
        for nid in network.nodes
        if not (nid in evidence and isinstance(evidence[nid], str))
    ]
    slow = brute_force_marginals(network, evidence, queries, cap=cap)
    worst = 0.0
    for nid in queries:
        fast = posterior(network, evidence, [nid]).values
        worst = max(worst, float(np.abs(fast - slow[nid].values).max()))
    return worst
