"""Discrete factor algebra and exact posterior computation.

Factors are dense non-negative tables over an ordered tuple of discrete
variables, stored row-major (C order) with the last scope variable varying
fastest. Inference is exact: variable elimination with a greedy min-fill
ordering, plus an independent brute-force enumeration oracle used to
cross-check it.

Evidence is a plain mapping from variable id to a finding: a state label
(hard evidence) or a likelihood vector over the variable's states (virtual
evidence).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce as _fold
from math import prod
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np

VarId = Hashable
Finding = "str | Sequence[float] | np.ndarray"
Evidence = Mapping[VarId, "str | Sequence[float] | np.ndarray"]

CPT_ROW_TOL = 1e-12


class ImpossibleEvidenceError(Exception):
    """The entered evidence has probability exactly zero under the model."""


class EnumerationCapError(Exception):
    """The joint state space is too large for brute-force enumeration."""


@dataclass(frozen=True, order=True)
class NodeId:
    """Structured variable name: node kind, entity id, time interval index."""

    kind: str
    entity: str
    time: int

    def __str__(self) -> str:
        return f"{self.kind}:{self.entity}@{self.time}"


@dataclass(frozen=True)
class DiscreteVariable:
    """A named discrete variable with an ordered tuple of state labels."""

    id: VarId
    states: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        if not self.states:
            raise ValueError(f"variable {self.id} has no states")
        if len(set(self.states)) != len(self.states):
            raise ValueError(f"variable {self.id} has duplicate state labels")

    @property
    def cardinality(self) -> int:
        return len(self.states)

    def index_of(self, label: str) -> int:
        try:
            return self.states.index(label)
        except ValueError:
            raise ValueError(
                f"state {label!r} not among states of {self.id}: {self.states}"
            ) from None


class Factor:
    """Non-negative table over an ordered scope of discrete variables.

    ``values.shape`` equals the scope cardinalities; a factor with empty
    scope is a scalar (0-d array). All entries must be finite and >= 0.
    """

    __slots__ = ("scope", "values")

    def __init__(self, scope: Iterable[DiscreteVariable], values) -> None:
        scope = tuple(scope)
        ids = [v.id for v in scope]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate variables in factor scope: {ids}")
        table = np.asarray(values, dtype=float)
        shape = tuple(v.cardinality for v in scope)
        if table.size != prod(shape):
            raise ValueError(
                f"table size {table.size} does not match scope shape {shape}"
            )
        table = table.reshape(shape)
        if not np.all(np.isfinite(table)):
            raise ValueError("factor entries must be finite")
        if np.any(table < 0):
            raise ValueError("factor entries must be non-negative")
        self.scope = scope
        self.values = table

    @property
    def ids(self) -> tuple[VarId, ...]:
        return tuple(v.id for v in self.scope)

    def axis_of(self, var_id: VarId) -> int:
        for i, v in enumerate(self.scope):
            if v.id == var_id:
                return i
        raise ValueError(f"variable {var_id} not in factor scope {self.ids}")

    def __repr__(self) -> str:
        return f"Factor({[str(i) for i in self.ids]}, shape={self.values.shape})"


def _aligned(factor: Factor, target: tuple[DiscreteVariable, ...]) -> np.ndarray:
    """Broadcast ``factor.values`` against a target scope that contains it."""
    pos = {v.id: i for i, v in enumerate(factor.scope)}
    perm = [pos[v.id] for v in target if v.id in pos]
    arr = np.transpose(factor.values, perm)
    shape = tuple(v.cardinality if v.id in pos else 1 for v in target)
    return arr.reshape(shape)


def multiply(f1: Factor, f2: Factor) -> Factor:
    """Factor product over the union of the two scopes.

    Shared variables must be identical (same states); the result scope is
    f1's scope followed by f2's remaining variables.
    """
    by_id = {v.id: v for v in f1.scope}
    for v in f2.scope:
        other = by_id.get(v.id)
        if other is not None and other.states != v.states:
            raise ValueError(
                f"shared variable {v.id} disagrees on states: "
                f"{other.states} vs {v.states}"
            )
    target = f1.scope + tuple(v for v in f2.scope if v.id not in by_id)
    return Factor(target, _aligned(f1, target) * _aligned(f2, target))


def sum_out(f: Factor, var_id: VarId) -> Factor:
    """Marginalize one variable out of the factor."""
    axis = f.axis_of(var_id)
    scope = f.scope[:axis] + f.scope[axis + 1 :]
    return Factor(scope, f.values.sum(axis=axis))


def _check_virtual(var: DiscreteVariable, finding) -> np.ndarray:
    vec = np.asarray(finding, dtype=float)
    if vec.shape != (var.cardinality,):
        raise ValueError(
            f"virtual finding for {var.id} has shape {vec.shape}, "
            f"expected ({var.cardinality},)"
        )
    if not np.all(np.isfinite(vec)) or np.any(vec < 0) or not np.any(vec > 0):
        raise ValueError(f"malformed virtual finding for {var.id}: {vec}")
    return vec


def reduce(f: Factor, evidence: Evidence) -> Factor:
    """Apply evidence to a factor.

    Hard findings slice the observed state out (the variable leaves the
    scope); virtual findings scale the table by the likelihood vector (the
    variable stays in scope).
    """
    scope = list(f.scope)
    values = f.values
    for var in f.scope:
        if var.id not in evidence:
            continue
        finding = evidence[var.id]
        axis = scope.index(var)
        if isinstance(finding, str):
            values = np.take(values, var.index_of(finding), axis=axis)
            scope.pop(axis)
        else:
            vec = _check_virtual(var, finding)
            shape = [1] * values.ndim
            shape[axis] = var.cardinality
            values = values * vec.reshape(shape)
    return Factor(scope, values)


def normalize(f: Factor) -> Factor:
    """Scale the factor to total mass 1; zero mass is impossible evidence."""
    total = f.values.sum()
    if total == 0.0:
        raise ImpossibleEvidenceError(
            "all entries are zero: evidence has probability 0"
        )
    return Factor(f.scope, f.values / total)


# --------------------------------------------------------------------------
# Networks
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Node:
    """One network node: a variable, its parent ids, and its CPT.

    The CPT is a factor over (*parents, child) in that order; every row
    (a fixed parent assignment) sums to 1 within CPT_ROW_TOL.
    """

    var: DiscreteVariable
    parents: tuple[VarId, ...]
    cpt: Factor


class Network:
    """A DAG of discrete variables with conditional probability tables."""

    def __init__(self, nodes: Iterable[Node]) -> None:
        nodes = tuple(nodes)
        self.nodes: dict[VarId, Node] = {}
        for node in nodes:
            if node.var.id in self.nodes:
                raise ValueError(f"duplicate variable id {node.var.id}")
            self.nodes[node.var.id] = node
        self.variables: dict[VarId, DiscreteVariable] = {
            n.var.id: n.var for n in nodes
        }
        for node in nodes:
            for p in node.parents:
                if p not in self.nodes:
                    raise ValueError(
                        f"node {node.var.id} has unknown parent {p}"
                    )
            expected = tuple(p for p in node.parents) + (node.var.id,)
            if node.cpt.ids != expected:
                raise ValueError(
                    f"CPT scope of {node.var.id} is {node.cpt.ids}, "
                    f"expected {expected}"
                )
        self._order = self._toposort()
        for node in nodes:
            rows = node.cpt.values.sum(axis=-1)
            if not np.allclose(rows, 1.0, rtol=0.0, atol=CPT_ROW_TOL):
                raise ValueError(
                    f"CPT rows of {node.var.id} do not sum to 1 "
                    f"(max deviation {np.abs(rows - 1.0).max():.3e})"
                )

    def _toposort(self) -> tuple[VarId, ...]:
        indeg = {v: len(n.parents) for v, n in self.nodes.items()}
        children: dict[VarId, list[VarId]] = {v: [] for v in self.nodes}
        for v, n in self.nodes.items():
            for p in n.parents:
                children[p].append(v)
        frontier = [v for v, d in indeg.items() if d == 0]
        order: list[VarId] = []
        while frontier:
            v = frontier.pop()
            order.append(v)
            for c in children[v]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    frontier.append(c)
        if len(order) != len(self.nodes):
            raise ValueError("parent graph contains a cycle")
        return tuple(order)

    @property
    def topological_order(self) -> tuple[VarId, ...]:
        return self._order

    def extended(self, new_nodes: Iterable[Node]) -> "Network":
        """A new network with additional nodes appended."""
        return Network(tuple(self.nodes.values()) + tuple(new_nodes))

    def __contains__(self, var_id: VarId) -> bool:
        return var_id in self.nodes

    def __len__(self) -> int:
        return len(self.nodes)


def validate_evidence(net: Network, evidence: Evidence) -> None:
    """Check each finding against the network's variables."""
    for var_id, finding in evidence.items():
        if var_id not in net.variables:
            raise ValueError(f"evidence on unknown variable {var_id}")
        var = net.variables[var_id]
        if isinstance(finding, str):
            var.index_of(finding)
        else:
            _check_virtual(var, finding)


def _hard_vars(evidence: Evidence) -> set[VarId]:
    return {v for v, f in evidence.items() if isinstance(f, str)}


def _relevant_nodes(net: Network, targets: Iterable[VarId]) -> list[VarId]:
    """Targets plus all their ancestors, in network insertion order.

    Nodes outside this set are barren for any query over the targets: they
    marginalize to 1 and can be dropped exactly.
    """
    keep: set[VarId] = set()
    stack = list(targets)
    while stack:
        v = stack.pop()
        if v in keep:
            continue
        keep.add(v)
        stack.extend(net.nodes[v].parents)
    return [v for v in net.nodes if v in keep]


# --------------------------------------------------------------------------
# Elimination ordering
# --------------------------------------------------------------------------


def _greedy_order(
    cliques: Iterable[Sequence[VarId]], eliminate: set[VarId]
) -> list[VarId]:
    """Greedy min-fill order (min-degree, then variable name, as tie-breaks)."""
    neighbors: dict[VarId, set[VarId]] = {}
    for clique in cliques:
        for v in clique:
            neighbors.setdefault(v, set())
        for i, v in enumerate(clique):
            for w in clique[i + 1 :]:
                if v != w:
                    neighbors[v].add(w)
                    neighbors[w].add(v)
    for v in eliminate:
        neighbors.setdefault(v, set())

    def fill_in(v: VarId) -> int:
        around = list(neighbors[v])
        return sum(
            1
            for i, a in enumerate(around)
            for b in around[i + 1 :]
            if b not in neighbors[a]
        )

    remaining = set(eliminate)
    order: list[VarId] = []
    while remaining:
        v = min(
            remaining, key=lambda u: (fill_in(u), len(neighbors[u]), str(u))
        )
        order.append(v)
        remaining.discard(v)
        around = [u for u in neighbors[v]]
        for i, a in enumerate(around):
            for b in around[i + 1 :]:
                neighbors[a].add(b)
                neighbors[b].add(a)
        for u in around:
            neighbors[u].discard(v)
        del neighbors[v]
    return order


def elimination_order(
    net: Network, evidence: Evidence | None = None, query: Iterable[VarId] = ()
) -> list[VarId]:
    """Total elimination order over all non-query, non-hard-evidence variables."""
    evidence = evidence or {}
    query = tuple(query)
    for q in query:
        if q not in net.variables:
            raise ValueError(f"unknown query variable {q}")
    validate_evidence(net, evidence)
    hard = _hard_vars(evidence)
    for q in query:
        if q in hard:
            raise ValueError(f"query variable {q} has hard evidence")
    cliques = [
        [i for i in node.cpt.ids if i not in hard]
        for node in net.nodes.values()
    ]
    eliminate = {v for v in net.variables if v not in hard and v not in query}
    return _greedy_order(cliques, eliminate)


# --------------------------------------------------------------------------
# Posterior queries
# --------------------------------------------------------------------------


def _components(factors: Sequence[Factor]) -> list[list[int]]:
    """Group factor indices by shared variables (connected components)."""
    parent = list(range(len(factors)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    owner: dict[VarId, int] = {}
    for i, f in enumerate(factors):
        for var_id in f.ids:
            if var_id in owner:
                parent[find(i)] = find(owner[var_id])
            else:
                owner[var_id] = i
    groups: dict[int, list[int]] = {}
    for i in range(len(factors)):
        groups.setdefault(find(i), []).append(i)
    return list(groups.values())


def _eliminate(factors: list[Factor], order: Iterable[VarId]) -> Factor:
    """Run variable elimination, returning the product of what remains."""
    live = list(factors)
    for var_id in order:
        bucket = [f for f in live if var_id in f.ids]
        if not bucket:
            continue
        live = [f for f in live if var_id not in f.ids]
        live.append(sum_out(_fold(multiply, bucket), var_id))
    return _fold(multiply, live) if live else Factor((), 1.0)


def posterior(
    net: Network,
    evidence: Evidence,
    query: Iterable[VarId],
    order: Sequence[VarId] | None = None,
) -> Factor:
    """Exact normalized joint posterior over the query variables.

    Barren nodes are dropped and only the query's connected component (after
    evidence reduction) contributes to the returned values; other components
    are still eliminated to detect impossible evidence.
    """
    query = tuple(query)
    if not query:
        raise ValueError("query must name at least one variable")
    if len(set(query)) != len(query):
        raise ValueError("duplicate query variables")
    for q in query:
        if q not in net.variables:
            raise ValueError(f"unknown query variable {q}")
    validate_evidence(net, evidence)
    hard = _hard_vars(evidence)
    for q in query:
        if q in hard:
            raise ValueError(f"query variable {q} has hard evidence")

    relevant = _relevant_nodes(net, list(query) + list(evidence))
    factors = [reduce(net.nodes[v].cpt, evidence) for v in relevant]

    query_set = set(query)
    query_factors: list[Factor] = []
    for component in _components(factors):
        group = [factors[i] for i in component]
        if any(query_set & set(f.ids) for f in group):
            query_factors.extend(group)
            continue
        # Components disjoint from the query cancel in the normalizer, so
        # they are only eliminated to detect zero evidence mass.
        scoped = {v for f in group for v in f.ids}
        if float(_eliminate(group, sorted(scoped, key=str)).values) == 0.0:
            raise ImpossibleEvidenceError("evidence has probability 0")

    in_scope = {v for f in query_factors for v in f.ids}
    to_eliminate = in_scope - query_set
    if order is None:
        cliques = [f.ids for f in query_factors]
        ve_order = _greedy_order(cliques, to_eliminate)
    else:
        missing = to_eliminate - set(order)
        if missing:
            raise ValueError(f"elimination order misses variables {missing}")
        ve_order = [v for v in order if v in to_eliminate]

    result = _eliminate(query_factors, ve_order)
    by_id = {v.id: v for v in result.scope}
    target = tuple(by_id[q] for q in query if q in by_id)
    result = Factor(target, _aligned(result, target))
    if set(result.ids) != query_set:
        # A query variable can drop out only when the whole network is empty
        # of it, which the unknown-variable check above already rejects.
        raise AssertionError("query variable lost during elimination")
    return normalize(result)


def evidence_probability(net: Network, evidence: Evidence) -> float:
    """Total probability mass of the evidence (the query normalizer)."""
    validate_evidence(net, evidence)
    factors = [reduce(node.cpt, evidence) for node in net.nodes.values()]
    mass = 1.0
    for component in _components(factors):
        group = [factors[i] for i in component]
        scoped = {v for f in group for v in f.ids}
        mass *= float(_eliminate(group, sorted(scoped, key=str)).values)
    return mass


# --------------------------------------------------------------------------
# Brute-force enumeration oracle
# --------------------------------------------------------------------------

ENUMERATION_CAP = 10_000_000


class _JointTable:
    """The fully enumerated joint over all non-hard-evidence variables.

    The joint is a flat vector indexed mixed-radix over the free variables
    (last one fastest); hard-evidence variables are pinned to their observed
    state index. Built by direct per-node lookups, with no use of the factor
    product/marginalization code it serves as an oracle for.
    """

    def __init__(self, net: Network, evidence: Evidence, cap: int) -> None:
        validate_evidence(net, evidence)
        self.net = net
        self.pinned = {
            v: net.variables[v].index_of(f)
            for v, f in evidence.items()
            if isinstance(f, str)
        }
        free = [v for v in net.nodes if v not in self.pinned]
        cards = {v: net.variables[v].cardinality for v in free}
        self.total = prod(cards.values()) if free else 1
        if self.total > cap:
            raise EnumerationCapError(
                f"joint has {self.total} states, above the cap of {cap}"
            )
        self._stride: dict[VarId, int] = {}
        acc = 1
        for v in reversed(free):
            self._stride[v] = acc
            acc *= cards[v]
        self._base = np.arange(self.total)

        joint = np.ones(self.total)
        for var_id, node in net.nodes.items():
            flat = 0
            f_acc = 1
            for member in reversed(node.parents + (var_id,)):
                flat = flat + self.state_codes(member) * f_acc
                f_acc *= net.variables[member].cardinality
            joint *= node.cpt.values.ravel()[flat]
        for var_id, finding in evidence.items():
            if var_id in self.pinned:
                continue
            vec = _check_virtual(net.variables[var_id], finding)
            joint *= vec[self.state_codes(var_id)]
        self.joint = joint
        if joint.sum() == 0.0:
            raise ImpossibleEvidenceError("evidence has probability 0")

    def state_codes(self, var_id: VarId) -> "np.ndarray | int":
        if var_id in self.pinned:
            return self.pinned[var_id]
        card = self.net.variables[var_id].cardinality
        return (self._base // self._stride[var_id]) % card

    def marginal(self, query: tuple[VarId, ...]) -> Factor:
        qvars = tuple(self.net.variables[q] for q in query)
        qcode = 0
        q_acc = 1
        for q in reversed(query):
            qcode = qcode + self.state_codes(q) * q_acc
            q_acc *= self.net.variables[q].cardinality
        weights = np.bincount(
            np.broadcast_to(qcode, (self.total,)),
            weights=self.joint,
            minlength=q_acc,
        )
        return normalize(Factor(qvars, weights))


def _check_query(net: Network, evidence: Evidence, query: tuple[VarId, ...]) -> None:
    if not query:
        raise ValueError("query must name at least one variable")
    if len(set(query)) != len(query):
        raise ValueError("duplicate query variables")
    for q in query:
        if q not in net.variables:
            raise ValueError(f"unknown query variable {q}")
        if q in _hard_vars(evidence):
            raise ValueError(f"query variable {q} has hard evidence")


def brute_force_posterior(
    net: Network,
    evidence: Evidence,
    query: Iterable[VarId],
    cap: int = ENUMERATION_CAP,
) -> Factor:
    """Posterior by direct enumeration of the full joint state space.

    Same contract as :func:`posterior`; independent of the elimination code
    path and used as the test oracle. Raises EnumerationCapError when the
    joint exceeds ``cap``.
    """
    query = tuple(query)
    _check_query(net, evidence, query)
    return _JointTable(net, evidence, cap).marginal(query)


def brute_force_marginals(
    net: Network,
    evidence: Evidence,
    queries: Iterable[VarId],
    cap: int = ENUMERATION_CAP,
) -> dict[VarId, Factor]:
    """Single-variable enumeration marginals, sharing one joint build."""
    queries = tuple(queries)
    table = _JointTable(net, evidence, cap)
    out = {}
    for q in queries:
        _check_query(net, evidence, (q,))
        out[q] = table.marginal((q,))
    return out


def enumeration_size(net: Network, evidence: Evidence) -> int:
    """Number of joint states the oracle would enumerate."""
    hard = _hard_vars(evidence)
    return prod(
        var.cardinality for v, var in net.variables.items() if v not in hard
    )
