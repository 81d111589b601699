"""Compile the domain configuration into network nodes and CPTs.

The domain is a set of regions partitioned by directional light-beam
sensors, with a known, fixed population of moving objects. Each sensor has
an observation model chosen by variant:

  basic        deterministic signal: the report always equals the crossing
  modified     soft confidences conf1 (reported crossings) / conf2 (quiet)
  invalidator  a per-reading working/defective status node gates the signal
  chain        invalidator statuses linked over time (degradation d,
               recovery X)
  intermittent chain whose defective sensor still reports correctly with
               probability x
  extended     chain with typed defects: def-ghost, def-dir, def-miss
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from .factors import DiscreteVariable, Factor

MOTION_STATES = ("stat", "move")
ACT_STATES = ("nc", "dir1", "dir2", "both")
OBS_STATES = ("nc", "dir1", "dir2")
INV_STATES = ("work", "def")
INV_STATES_EXTENDED = ("work", "def-ghost", "def-dir", "def-miss")

VARIANTS = ("basic", "modified", "invalidator", "chain", "intermittent", "extended")
INV_VARIANTS = frozenset({"invalidator", "chain", "intermittent", "extended"})
CHAINED_VARIANTS = frozenset({"chain", "intermittent", "extended"})

DISTRIBUTION_TOL = 1e-12


@dataclass(frozen=True)
class Sensor:
    """A directional beam between two adjacent regions.

    dir1 is a left-to-right crossing, dir2 right-to-left.
    """

    id: str
    left: str
    right: str


@dataclass(frozen=True)
class Layout:
    regions: tuple[str, ...]
    adjacency: tuple[tuple[str, str], ...]
    sensors: tuple[Sensor, ...]

    def __post_init__(self):
        object.__setattr__(self, "regions", tuple(self.regions))
        object.__setattr__(
            self, "adjacency", tuple((a, b) for a, b in self.adjacency)
        )
        object.__setattr__(self, "sensors", tuple(self.sensors))
        if len(set(self.regions)) != len(self.regions):
            raise ValueError("duplicate region ids")
        known = set(self.regions)
        for a, b in self.adjacency:
            if a not in known or b not in known:
                raise ValueError(f"adjacency ({a}, {b}) names unknown regions")
            if a == b:
                raise ValueError(f"region {a} cannot be adjacent to itself")
        ids = [s.id for s in self.sensors]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate sensor ids")
        for s in self.sensors:
            if s.left not in known or s.right not in known:
                raise ValueError(f"sensor {s.id} names unknown regions")
            if s.left == s.right:
                raise ValueError(f"sensor {s.id} must span two distinct regions")
            if not self.adjacent(s.left, s.right):
                raise ValueError(
                    f"sensor {s.id} spans non-adjacent regions "
                    f"{s.left} and {s.right}"
                )

    def adjacent(self, a: str, b: str) -> bool:
        return (a, b) in self.adjacency or (b, a) in self.adjacency

    def neighbors(self, region: str) -> tuple[str, ...]:
        if region not in self.regions:
            raise ValueError(f"unknown region {region}")
        out = [r for r in self.regions if r != region and self.adjacent(region, r)]
        return tuple(out)

    def sensor(self, sensor_id: str) -> Sensor:
        for s in self.sensors:
            if s.id == sensor_id:
                return s
        raise ValueError(f"unknown sensor {sensor_id}")


@dataclass(frozen=True)
class ObjectSpec:
    """A tracked object: per-interval move probability and initial position."""

    id: str
    mobility: float
    initial: Mapping[str, float]

    def __post_init__(self):
        object.__setattr__(self, "initial", dict(self.initial))
        if not 0.0 <= self.mobility <= 1.0:
            raise ValueError(f"mobility of {self.id} must be in [0, 1]")

    def initial_distribution(self, layout: Layout) -> np.ndarray:
        unknown = set(self.initial) - set(layout.regions)
        if unknown:
            raise ValueError(
                f"initial distribution of {self.id} names unknown regions {unknown}"
            )
        dist = np.array(
            [float(self.initial.get(r, 0.0)) for r in layout.regions]
        )
        if np.any(dist < 0):
            raise ValueError(f"initial distribution of {self.id} has negatives")
        if abs(dist.sum() - 1.0) > DISTRIBUTION_TOL:
            raise ValueError(
                f"initial distribution of {self.id} sums to {dist.sum()!r}"
            )
        return dist


def uniform_initial(layout: Layout) -> dict[str, float]:
    return {r: 1.0 / len(layout.regions) for r in layout.regions}


@dataclass(frozen=True)
class SensorModelParams:
    """Sensor model variant plus whichever parameters that variant needs."""

    variant: str
    conf1: float | None = None
    conf2: float | None = None
    conf: float | None = None
    d: float | None = None
    X: float | None = None
    x: float | None = None

    _REQUIRED = {
        "basic": (),
        "modified": ("conf1", "conf2"),
        "invalidator": ("conf",),
        "chain": ("conf", "d", "X"),
        "intermittent": ("conf", "d", "X", "x"),
        "extended": ("conf", "d", "X"),
    }

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(
                f"unknown variant {self.variant!r}; expected one of {VARIANTS}"
            )
        for name in self._REQUIRED[self.variant]:
            value = getattr(self, name)
            if value is None:
                raise ValueError(
                    f"variant {self.variant!r} requires parameter {name!r}"
                )
        for name in ("conf1", "conf2", "conf", "d", "X", "x"):
            value = getattr(self, name)
            if value is not None and not 0.0 <= value <= 1.0:
                raise ValueError(f"parameter {name}={value} outside [0, 1]")

    @property
    def has_inv(self) -> bool:
        return self.variant in INV_VARIANTS

    @property
    def chained(self) -> bool:
        return self.variant in CHAINED_VARIANTS

    @property
    def inv_states(self) -> tuple[str, ...]:
        return INV_STATES_EXTENDED if self.variant == "extended" else INV_STATES

    def override(self, **changes) -> "SensorModelParams":
        """A copy with the given parameters replaced."""
        return replace(self, **{k: v for k, v in changes.items() if v is not None})


# --------------------------------------------------------------------------
# CPT builders
# --------------------------------------------------------------------------


def motion_prior(motion_var: DiscreteVariable, obj: ObjectSpec) -> Factor:
    """Prior over (stat, move) from the object's mobility."""
    if motion_var.states != MOTION_STATES:
        raise ValueError(f"{motion_var.id} is not a motion variable")
    return Factor([motion_var], [1.0 - obj.mobility, obj.mobility])


def transition_cpt(
    layout: Layout,
    obj: ObjectSpec,
    obj_prev: DiscreteVariable,
    motion_prev: DiscreteVariable,
    obj_next: DiscreteVariable,
) -> Factor:
    """Position transition: stay when stationary, else move to a uniformly
    chosen adjacent region (a moving object always changes region)."""
    m = len(layout.regions)
    table = np.zeros((m, 2, m))
    for i, region in enumerate(layout.regions):
        table[i, 0, i] = 1.0
        targets = layout.neighbors(region)
        if not targets:
            if obj.mobility > 0:
                raise ValueError(
                    f"region {region} has no neighbors but {obj.id} "
                    f"has mobility {obj.mobility}"
                )
            # Unreachable row; keep the CPT a valid distribution.
            table[i, 1, i] = 1.0
            continue
        for t in targets:
            table[i, 1, layout.regions.index(t)] = 1.0 / len(targets)
    return Factor([obj_prev, motion_prev, obj_next], table)


def crossing(sensor: Sensor, prev_region: str, next_region: str) -> str:
    """Direction an object moving prev -> next crosses the sensor, or nc."""
    if (prev_region, next_region) == (sensor.left, sensor.right):
        return "dir1"
    if (prev_region, next_region) == (sensor.right, sensor.left):
        return "dir2"
    return "nc"


def bc_act_cpt(
    layout: Layout,
    sensor_id: str,
    object_pairs: Sequence[tuple[DiscreteVariable, DiscreteVariable]],
    act_var: DiscreteVariable,
) -> Factor:
    """Deterministic actual-crossing table over all objects' (prev, next).

    Per parent assignment exactly one child state has probability 1:
    dir1/dir2 when crossings occurred in one direction only, both when in
    both, nc otherwise.
    """
    sensor = layout.sensor(sensor_id)
    parents = [v for pair in object_pairs for v in pair]
    shape = tuple(v.cardinality for v in parents) + (len(ACT_STATES),)
    table = np.zeros(shape)
    for assignment in np.ndindex(shape[:-1]):
        seen = set()
        for k in range(len(object_pairs)):
            prev_region = layout.regions[assignment[2 * k]]
            next_region = layout.regions[assignment[2 * k + 1]]
            hit = crossing(sensor, prev_region, next_region)
            if hit != "nc":
                seen.add(hit)
        if seen == {"dir1", "dir2"}:
            value = "both"
        elif seen:
            value = seen.pop()
        else:
            value = "nc"
        table[assignment + (ACT_STATES.index(value),)] = 1.0
    return Factor(parents + [act_var], table)


def _basic_obs_rows() -> np.ndarray:
    rows = np.zeros((4, 3))
    rows[ACT_STATES.index("nc"), OBS_STATES.index("nc")] = 1.0
    rows[ACT_STATES.index("dir1"), OBS_STATES.index("dir1")] = 1.0
    rows[ACT_STATES.index("dir2"), OBS_STATES.index("dir2")] = 1.0
    rows[ACT_STATES.index("both"), OBS_STATES.index("dir1")] = 0.5
    rows[ACT_STATES.index("both"), OBS_STATES.index("dir2")] = 0.5
    return rows


def _modified_obs_rows(conf1: float, conf2: float) -> np.ndarray:
    # state order: obs = (nc, dir1, dir2)
    return np.array(
        [
            [conf2, (1 - conf2) / 2, (1 - conf2) / 2],     # act = nc
            [(1 - conf1) / 2, conf1, (1 - conf1) / 2],     # act = dir1
            [(1 - conf1) / 2, (1 - conf1) / 2, conf1],     # act = dir2
            [1 - conf1, conf1 / 2, conf1 / 2],             # act = both
        ]
    )


def _defective_obs_rows() -> np.ndarray:
    # The defective sensor emits one of the two wrong values, equiprobably;
    # under an actual both-crossing no value is right, so all three tie.
    return np.array(
        [
            [0.0, 0.5, 0.5],
            [0.5, 0.0, 0.5],
            [0.5, 0.5, 0.0],
            [1 / 3, 1 / 3, 1 / 3],
        ]
    )


def bc_obs_cpt(
    params: SensorModelParams,
    act_var: DiscreteVariable,
    obs_var: DiscreteVariable,
    inv_var: DiscreteVariable | None = None,
) -> Factor:
    """Observed-signal table for the chosen variant.

    Variants without a status node return a factor over (act, obs); the
    others over (act, inv, obs).
    """
    if params.variant == "basic":
        return Factor([act_var, obs_var], _basic_obs_rows())
    if params.variant == "modified":
        return Factor(
            [act_var, obs_var], _modified_obs_rows(params.conf1, params.conf2)
        )
    if inv_var is None:
        raise ValueError(f"variant {params.variant!r} needs a status variable")
    if inv_var.states != params.inv_states:
        raise ValueError(
            f"{inv_var.id} has states {inv_var.states}, "
            f"expected {params.inv_states}"
        )

    work = _basic_obs_rows()
    if params.variant == "extended":
        ghost = work.copy()
        ghost[ACT_STATES.index("nc")] = [0.0, 0.5, 0.5]
        wrong_dir = np.zeros((4, 3))
        wrong_dir[ACT_STATES.index("nc"), OBS_STATES.index("nc")] = 1.0
        wrong_dir[ACT_STATES.index("dir1"), OBS_STATES.index("dir2")] = 1.0
        wrong_dir[ACT_STATES.index("dir2"), OBS_STATES.index("dir1")] = 1.0
        wrong_dir[ACT_STATES.index("both")] = [0.0, 0.5, 0.5]
        miss = np.zeros((4, 3))
        miss[:, OBS_STATES.index("nc")] = 1.0
        table = np.stack([work, ghost, wrong_dir, miss], axis=1)
    else:
        defective = _defective_obs_rows()
        if params.variant == "intermittent":
            defective = params.x * work + (1 - params.x) * defective
        table = np.stack([work, defective], axis=1)
    return Factor([act_var, inv_var, obs_var], table)


def bc_inv_prior(params: SensorModelParams, inv_var: DiscreteVariable) -> Factor:
    """Status prior: work with probability conf."""
    if not params.has_inv:
        raise ValueError(f"variant {params.variant!r} has no status node")
    if params.variant == "extended":
        rest = (1 - params.conf) / 3
        return Factor([inv_var], [params.conf, rest, rest, rest])
    return Factor([inv_var], [params.conf, 1 - params.conf])


def bc_inv_chain_cpt(
    params: SensorModelParams,
    inv_prev: DiscreteVariable,
    inv_next: DiscreteVariable,
) -> Factor:
    """Status persistence: degradation d from work, recovery X from defect."""
    if not params.chained:
        raise ValueError(f"variant {params.variant!r} has no status chain")
    d, X = params.d, params.X
    if params.variant == "extended":
        table = np.zeros((4, 4))
        table[0] = [1 - d, d / 3, d / 3, d / 3]
        for k in range(1, 4):
            table[k, 0] = X
            table[k, k] = 1 - X
    else:
        table = np.array([[1 - d, d], [X, 1 - X]])
    return Factor([inv_prev, inv_next], table)
