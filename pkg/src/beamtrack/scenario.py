"""Scenario documents: the YAML schema the command-line tool runs.

A scenario bundles a layout, the tracked objects, a sensor model, and an
ordered observation sequence. Example::

    schema: 1
    name: two-room-demo
    layout:
      regions: [r1, r2]
      adjacency: [[r1, r2]]
      sensors:
        - {id: LB1, left: r1, right: r2}
    objects:
      - {id: obj1, mobility: 0.1, initial: uniform}
    model: {variant: modified, conf1: 0.99, conf2: 0.99}
    observations:
      - {LB1: dir1}

Sensors omitted from an observation row report nc. Syntax problems raise
ScenarioSyntaxError (with the YAML position); well-formed documents that
violate the schema raise ScenarioSemanticError.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import yaml

from .world import (
    OBS_STATES,
    Layout,
    ObjectSpec,
    Sensor,
    SensorModelParams,
    uniform_initial,
)

SCHEMA_VERSION = 1


class ScenarioError(Exception):
    """Base for scenario document problems."""


class ScenarioSyntaxError(ScenarioError):
    """The document is not well-formed YAML."""


class ScenarioSemanticError(ScenarioError):
    """The document is well-formed but violates the scenario schema."""


@dataclass(frozen=True)
class StatusReport:
    sensor: str
    at: int
    confidence: float


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    layout: Layout
    objects: tuple[ObjectSpec, ...]
    params: SensorModelParams
    observations: tuple[dict[str, str], ...]
    status_reports: tuple[StatusReport, ...]
    trace_objects: tuple[str, ...]
    status_sensors: tuple[str, ...]

    def with_params(self, params: SensorModelParams) -> "ScenarioConfig":
        from dataclasses import replace

        return replace(self, params=params)

    def with_mobility(self, mobility: float) -> "ScenarioConfig":
        from dataclasses import replace

        objects = tuple(
            ObjectSpec(o.id, mobility, o.initial) for o in self.objects
        )
        return replace(self, objects=objects)


def _expect(mapping, key, kind, where, *, required=True, default=None):
    if not isinstance(mapping, dict):
        raise ScenarioSemanticError(f"{where} must be a mapping")
    if key not in mapping:
        if required:
            raise ScenarioSemanticError(f"{where} is missing {key!r}")
        return default
    value = mapping[key]
    if kind is float:
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ScenarioSemanticError(f"{where}.{key} must be a number")
        return float(value)
    if not isinstance(value, kind):
        raise ScenarioSemanticError(
            f"{where}.{key} must be {kind.__name__}, got {type(value).__name__}"
        )
    return value


def _no_extras(mapping, allowed, where):
    extras = set(mapping) - set(allowed)
    if extras:
        raise ScenarioSemanticError(f"{where} has unknown keys {sorted(extras)}")


def _parse_layout(doc) -> Layout:
    regions = _expect(doc, "regions", list, "layout")
    adjacency = _expect(doc, "adjacency", list, "layout")
    sensors_doc = _expect(doc, "sensors", list, "layout")
    _no_extras(doc, {"regions", "adjacency", "sensors"}, "layout")
    pairs = []
    for i, edge in enumerate(adjacency):
        if not isinstance(edge, list) or len(edge) != 2:
            raise ScenarioSemanticError(
                f"layout.adjacency[{i}] must be a pair of regions"
            )
        pairs.append((str(edge[0]), str(edge[1])))
    sensors = []
    for i, s in enumerate(sensors_doc):
        where = f"layout.sensors[{i}]"
        sid = _expect(s, "id", str, where)
        left = _expect(s, "left", str, where)
        right = _expect(s, "right", str, where)
        _no_extras(s, {"id", "left", "right"}, where)
        sensors.append(Sensor(sid, left, right))
    try:
        return Layout(tuple(str(r) for r in regions), tuple(pairs), tuple(sensors))
    except ValueError as exc:
        raise ScenarioSemanticError(f"layout: {exc}") from exc


def _parse_objects(doc, layout: Layout) -> tuple[ObjectSpec, ...]:
    if not isinstance(doc, list) or not doc:
        raise ScenarioSemanticError("objects must be a non-empty list")
    out = []
    for i, o in enumerate(doc):
        where = f"objects[{i}]"
        oid = _expect(o, "id", str, where)
        mobility = _expect(o, "mobility", float, where)
        initial = _expect(o, "initial", object, where)
        _no_extras(o, {"id", "mobility", "initial"}, where)
        if initial == "uniform":
            initial = uniform_initial(layout)
        elif not isinstance(initial, dict):
            raise ScenarioSemanticError(
                f"{where}.initial must be 'uniform' or a region->probability map"
            )
        try:
            spec = ObjectSpec(oid, mobility, {str(k): float(v) for k, v in initial.items()})
            spec.initial_distribution(layout)
        except (ValueError, TypeError) as exc:
            raise ScenarioSemanticError(f"{where}: {exc}") from exc
        out.append(spec)
    return tuple(out)


def _parse_model(doc) -> SensorModelParams:
    variant = _expect(doc, "variant", str, "model")
    _no_extras(doc, {"variant", "conf1", "conf2", "conf", "d", "X", "x"}, "model")
    kwargs = {}
    for name in ("conf1", "conf2", "conf", "d", "X", "x"):
        if name in doc:
            kwargs[name] = _expect(doc, name, float, "model")
    try:
        return SensorModelParams(variant, **kwargs)
    except ValueError as exc:
        raise ScenarioSemanticError(f"model: {exc}") from exc


def _parse_observations(doc, layout: Layout) -> tuple[dict[str, str], ...]:
    if not isinstance(doc, list):
        raise ScenarioSemanticError("observations must be a list")
    known = {s.id for s in layout.sensors}
    rows = []
    for i, row in enumerate(doc):
        where = f"observations[{i}]"
        if row is None:
            row = {}
        if not isinstance(row, dict):
            raise ScenarioSemanticError(f"{where} must be a sensor->value map")
        clean = {}
        for sensor_id, value in row.items():
            if sensor_id not in known:
                raise ScenarioSemanticError(
                    f"{where} reports unknown sensor {sensor_id!r}"
                )
            if value not in OBS_STATES:
                raise ScenarioSemanticError(
                    f"{where}.{sensor_id} must be one of {OBS_STATES}, "
                    f"got {value!r}"
                )
            clean[str(sensor_id)] = str(value)
        rows.append(clean)
    return tuple(rows)


def _parse_reports(doc, layout: Layout, n_observations: int) -> tuple[StatusReport, ...]:
    if doc is None:
        return ()
    if not isinstance(doc, list):
        raise ScenarioSemanticError("status_reports must be a list")
    known = {s.id for s in layout.sensors}
    out = []
    for i, r in enumerate(doc):
        where = f"status_reports[{i}]"
        sensor = _expect(r, "sensor", str, where)
        at = _expect(r, "at", int, where)
        confidence = _expect(r, "confidence", float, where)
        _no_extras(r, {"sensor", "at", "confidence"}, where)
        if sensor not in known:
            raise ScenarioSemanticError(f"{where} names unknown sensor {sensor!r}")
        if not 0 <= at <= n_observations:
            raise ScenarioSemanticError(
                f"{where}.at={at} outside the run's intervals 0..{n_observations}"
            )
        if not 0.0 <= confidence <= 1.0:
            raise ScenarioSemanticError(f"{where}.confidence outside [0, 1]")
        out.append(StatusReport(sensor, at, confidence))
    return tuple(out)


def parse_scenario(text: str, *, name: str | None = None) -> ScenarioConfig:
    """Parse and validate one scenario document."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioSyntaxError(f"not valid YAML: {exc}") from exc
    if not isinstance(doc, dict):
        raise ScenarioSemanticError("scenario must be a mapping")
    _no_extras(
        doc,
        {"schema", "name", "layout", "objects", "model", "observations",
         "status_reports", "outputs"},
        "scenario",
    )
    schema = _expect(doc, "schema", int, "scenario")
    if schema != SCHEMA_VERSION:
        raise ScenarioSemanticError(
            f"unsupported schema version {schema}; this build reads {SCHEMA_VERSION}"
        )
    layout = _parse_layout(_expect(doc, "layout", dict, "scenario"))
    objects = _parse_objects(_expect(doc, "objects", list, "scenario"), layout)
    params = _parse_model(_expect(doc, "model", dict, "scenario"))
    observations = _parse_observations(
        _expect(doc, "observations", list, "scenario"), layout
    )
    reports = _parse_reports(doc.get("status_reports"), layout, len(observations))

    outputs = doc.get("outputs") or {}
    _no_extras(outputs, {"trace", "sensor_status"}, "outputs")
    trace_objects = tuple(outputs.get("trace") or [o.id for o in objects])
    status_sensors = tuple(
        outputs.get("sensor_status") or [s.id for s in layout.sensors]
    )
    object_ids = {o.id for o in objects}
    for oid in trace_objects:
        if oid not in object_ids:
            raise ScenarioSemanticError(f"outputs.trace names unknown object {oid!r}")
    sensor_ids = {s.id for s in layout.sensors}
    for sid in status_sensors:
        if sid not in sensor_ids:
            raise ScenarioSemanticError(
                f"outputs.sensor_status names unknown sensor {sid!r}"
            )

    return ScenarioConfig(
        name=doc.get("name") or name or "scenario",
        layout=layout,
        objects=objects,
        params=params,
        observations=observations,
        status_reports=reports,
        trace_objects=trace_objects,
        status_sensors=status_sensors,
    )


def load_scenario(path: "str | Path") -> ScenarioConfig:
    path = Path(path)
    return parse_scenario(path.read_text(encoding="utf-8"), name=path.stem)
