"""Relay network models, validation and layer decomposition.

Two models share one interface:

* :class:`LinearRelayNetwork` -- every node sends a vector in F_p^q and each
  edge ``(i, j)`` carries a q x q gain matrix; node ``j`` receives the sum of
  ``G[i, j] @ x_i`` over its input neighbours.
* :class:`GeneralRelayNetwork` -- every node ``j`` receives
  ``g_j(x_i for i in inputs)`` given by an explicit lookup table.

Node ids are strings and "ascending" always means Python string order.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import NetworkError, NotLayeredError
from .field import FieldMatrix


@dataclass(frozen=True)
class NodeFunction:
    """Lookup table of a received signal.

    ``table[k]`` is the output for the input tuple whose mixed-radix index is
    ``k``; inputs are in ascending id order and the first input is the most
    significant digit.
    """

    inputs: tuple[str, ...]
    table: tuple[int, ...]
    outputs: int

    def evaluate(self, input_symbols, sizes) -> np.ndarray:
        """Vectorised lookup. ``input_symbols[k]`` is an int array for ``inputs[k]``."""
        index = None
        for sym, size in zip(input_symbols, sizes):
            sym = np.asarray(sym, dtype=np.int64)
            index = sym if index is None else index * size + sym
        table = np.asarray(self.table, dtype=np.int64)
        if index is None:
            return table[0:1].copy()
        return table[index]


def canonical_function(inputs, table, outputs, sizes: Mapping[str, int]) -> NodeFunction:
    """Build a :class:`NodeFunction`, permuting the table so inputs are ascending."""
    inputs = tuple(inputs)
    order = sorted(range(len(inputs)), key=lambda k: inputs[k])
    table = np.asarray(table, dtype=np.int64)
    if order != list(range(len(inputs))):
        dims = [sizes[i] for i in inputs]
        table = table.reshape(dims).transpose(order).ravel()
    return NodeFunction(tuple(inputs[k] for k in order), tuple(int(v) for v in table), int(outputs))


class RelayNetwork:
    """Shared behaviour; concrete models are dataclasses below."""

    nodes: tuple[str, ...]
    source: str
    destinations: tuple[str, ...]
    unbounded: frozenset

    model = "abstract"

    @property
    def edges(self) -> tuple[tuple[str, str], ...]:
        raise NotImplementedError

    def alphabet_size(self, node: str) -> int:
        raise NotImplementedError

    def in_neighbors(self, j: str) -> frozenset[str]:
        return input_neighbors(self, j)

    def out_neighbors(self, i: str) -> frozenset[str]:
        if i not in self.nodes:
            raise NetworkError(f"unknown node {i!r}")
        return frozenset(v for u, v in self.edges if u == i)


@dataclass(frozen=True)
class LinearRelayNetwork(RelayNetwork):
    nodes: tuple[str, ...]
    source: str
    destinations: tuple[str, ...]
    prime: int
    dim: int
    gains: Mapping[tuple[str, str], FieldMatrix]
    unbounded: frozenset = frozenset()
    name: str | None = None
    comment: str | None = None

    model = "linear"

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "destinations", tuple(self.destinations))
        object.__setattr__(self, "gains", dict(sorted(self.gains.items())))
        object.__setattr__(self, "unbounded", frozenset(tuple(e) for e in self.unbounded))

    @property
    def edges(self):
        return tuple(self.gains)

    def alphabet_size(self, node):
        return self.prime ** self.dim

    def gain(self, i: str, j: str) -> FieldMatrix:
        g = self.gains.get((i, j))
        return g if g is not None else FieldMatrix.zeros(self.prime, self.dim, self.dim)


@dataclass(frozen=True)
class GeneralRelayNetwork(RelayNetwork):
    nodes: tuple[str, ...]
    source: str
    destinations: tuple[str, ...]
    alphabets: Mapping[str, int]
    functions: Mapping[str, NodeFunction]
    edge_list: tuple[tuple[str, str], ...] | None = None
    unbounded: frozenset = frozenset()
    name: str | None = None
    comment: str | None = None

    model = "general"

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "destinations", tuple(self.destinations))
        object.__setattr__(self, "alphabets", dict(sorted(self.alphabets.items())))
        object.__setattr__(self, "functions", dict(sorted(self.functions.items())))
        if self.edge_list is None:
            derived = {(i, j) for j, f in self.functions.items() for i in f.inputs}
            object.__setattr__(self, "edge_list", tuple(sorted(derived)))
        else:
            object.__setattr__(self, "edge_list", tuple(sorted(tuple(e) for e in self.edge_list)))
        object.__setattr__(self, "unbounded", frozenset(tuple(e) for e in self.unbounded))

    @property
    def edges(self):
        return self.edge_list

    def alphabet_size(self, node):
        return int(self.alphabets.get(node, 1))

    def function(self, j: str) -> NodeFunction:
        f = self.functions.get(j)
        return f if f is not None else NodeFunction((), (0,), 1)


# --------------------------------------------------------------------------
# validation


@dataclass
class ValidationReport:
    errors: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors


def reachable_from(net: RelayNetwork, start: str) -> set[str]:
    succ: dict[str, list[str]] = {}
    for u, v in net.edges:
        succ.setdefault(u, []).append(v)
    seen = {start}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v in succ.get(u, ()):
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return seen


def reaching(net: RelayNetwork, targets) -> set[str]:
    pred: dict[str, list[str]] = {}
    for u, v in net.edges:
        pred.setdefault(v, []).append(u)
    seen = set(targets)
    queue = deque(seen)
    while queue:
        v = queue.popleft()
        for u in pred.get(v, ()):
            if u not in seen:
                seen.add(u)
                queue.append(u)
    return seen


def validate(net: RelayNetwork) -> ValidationReport:
    """Report every violated invariant; an empty error list means valid."""
    rep = ValidationReport()
    nodes = set(net.nodes)
    if len(nodes) != len(net.nodes):
        rep.errors.append("duplicate node ids")
    if net.source not in nodes:
        rep.errors.append(f"unknown node: source {net.source!r} is not declared")
    if not net.destinations:
        rep.errors.append("destination set is empty")
    if len(set(net.destinations)) != len(net.destinations):
        rep.errors.append("duplicate destinations")
    for d in net.destinations:
        if d not in nodes:
            rep.errors.append(f"unknown node: destination {d!r} is not declared")
    if net.source in net.destinations:
        rep.errors.append("source is also a destination")
    seen_edges = set()
    for u, v in net.edges:
        for x in (u, v):
            if x not in nodes:
                rep.errors.append(f"unknown node: edge ({u!r}, {v!r}) references {x!r}")
        if (u, v) in seen_edges:
            rep.errors.append(f"duplicate edge ({u!r}, {v!r})")
        seen_edges.add((u, v))
    for u, v in net.unbounded:
        if (u, v) not in seen_edges:
            rep.errors.append(f"unbounded marker ({u!r}, {v!r}) is not an edge")

    if isinstance(net, LinearRelayNetwork):
        _validate_linear(net, rep)
    elif isinstance(net, GeneralRelayNetwork):
        _validate_general(net, rep)

    if rep.errors:
        return rep
    reach = reachable_from(net, net.source)
    for d in net.destinations:
        if d not in reach:
            rep.warnings.append(f"destination {d!r} is unreachable from the source: capacity is zero")
    useful = reaching(net, net.destinations)
    for v in net.nodes:
        if v not in reach:
            rep.warnings.append(f"node {v!r} is unreachable from the source")
        elif v not in useful:
            rep.warnings.append(f"node {v!r} does not reach any destination")
    return rep


def _validate_linear(net: LinearRelayNetwork, rep: ValidationReport):
    if net.dim < 1:
        rep.errors.append(f"vector dimension q must be >= 1, got {net.dim}")
    for (u, v), g in net.gains.items():
        if g.prime != net.prime:
            rep.errors.append(f"edge ({u!r}, {v!r}) matrix is over F_{g.prime}, expected F_{net.prime}")
        if g.shape != (net.dim, net.dim):
            rep.errors.append(f"edge ({u!r}, {v!r}) matrix has shape {g.shape}, expected {(net.dim, net.dim)}")


def _validate_general(net: GeneralRelayNetwork, rep: ValidationReport):
    nodes = set(net.nodes)
    for v, a in net.alphabets.items():
        if v not in nodes:
            rep.errors.append(f"unknown node: alphabet declared for {v!r}")
        if a < 1:
            rep.errors.append(f"alphabet of {v!r} must have size >= 1, got {a}")
    for v in net.nodes:
        if v not in net.alphabets:
            rep.errors.append(f"node {v!r} has no declared alphabet")
    preds: dict[str, set[str]] = {}
    for u, v in net.edges:
        preds.setdefault(v, set()).add(u)
    for j in net.nodes:
        expected = tuple(sorted(preds.get(j, ())))
        f = net.functions.get(j)
        if f is None:
            if expected:
                rep.errors.append(f"node {j!r} has input neighbours but no function table")
            continue
        if f.inputs != expected:
            rep.errors.append(f"function of {j!r} lists inputs {list(f.inputs)}, edges give {list(expected)}")
            continue
        rows = 1
        for i in f.inputs:
            rows *= net.alphabet_size(i)
        if len(f.table) != rows:
            rep.errors.append(f"function table of {j!r} has {len(f.table)} rows, expected {rows}")
        if f.outputs < 1:
            rep.errors.append(f"output alphabet of {j!r} must have size >= 1")
        elif any(not 0 <= y < f.outputs for y in f.table):
            rep.errors.append(f"function table of {j!r} has an output outside [0, {f.outputs})")
    for j in net.functions:
        if j not in nodes:
            rep.errors.append(f"unknown node: function declared for {j!r}")


def require_valid(net: RelayNetwork) -> RelayNetwork:
    rep = validate(net)
    if not rep.ok:
        raise NetworkError("; ".join(rep.errors))
    return net


def input_neighbors(net: RelayNetwork, j: str) -> frozenset[str]:
    """``{i : (i, j) in E}``."""
    if j not in net.nodes:
        raise NetworkError(f"unknown node {j!r}")
    return frozenset(u for u, v in net.edges if v == j)


# --------------------------------------------------------------------------
# layers


@dataclass(frozen=True)
class LayerDecomposition:
    """Level of every node relative to the source.

    Reachable nodes get their hop distance. Unreachable nodes get the level
    forced by their edges; a component with no connection to the source is
    shifted so that its lowest level is 0.
    """

    levels: Mapping[str, int]
    depth: Mapping[str, int]
    unreachable: frozenset[str]

    layered = True

    @property
    def d(self) -> int:
        return max(self.depth.values())

    def layer(self, l: int) -> frozenset[str]:
        return frozenset(v for v, lv in self.levels.items() if lv == l)

    @property
    def layers(self) -> list[frozenset[str]]:
        top = max(self.levels.values())
        return [self.layer(l) for l in range(top + 1)]


@dataclass(frozen=True)
class NotLayered:
    reason: str
    witness: tuple

    layered = False


def _bfs_paths(net: RelayNetwork, start: str):
    succ: dict[str, list[str]] = {}
    for u, v in net.edges:
        succ.setdefault(u, []).append(v)
    for k in succ:
        succ[k].sort()
    dist = {start: 0}
    parent: dict[str, str | None] = {start: None}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v in succ.get(u, ()):
            if v not in dist:
                dist[v] = dist[u] + 1
                parent[v] = u
                queue.append(v)
    return dist, parent


def _path_to(parent, v):
    path = []
    while v is not None:
        path.append(v)
        v = parent[v]
    return path[::-1]


def _shortest_path(net, a, b):
    dist, parent = _bfs_paths(net, a)
    return _path_to(parent, b) if b in dist else None


def layer_structure(net: RelayNetwork) -> LayerDecomposition | NotLayered:
    """Classify ``net`` as layered or return a witness that it is not.

    A network is layered when every edge goes from level ``l - 1`` to level
    ``l``; then every source-destination path has the same hop count. The
    witness for a non-layered network is a pair of paths of unequal length
    between the same endpoints.
    """
    for u, v in net.edges:
        if u == v:
            return NotLayered(f"self-loop at {u!r}", ((u, u),))
    dist, parent = _bfs_paths(net, net.source)
    for u, v in net.edges:
        if u in dist and dist[v] != dist[u] + 1:
            p1 = _path_to(parent, v)
            p2 = _path_to(parent, u) + [v]
            tails = [d for d in sorted(net.destinations) if _shortest_path(net, v, d)]
            if tails:
                tail = _shortest_path(net, v, tails[0])[1:]
                p1, p2 = p1 + tail, p2 + tail
            return NotLayered(f"paths of lengths {len(p1) - 1} and {len(p2) - 1}",
                              (tuple(p1), tuple(p2)))

    # extend levels across edges to nodes the source cannot reach
    levels = dict(dist)
    nbrs: dict[str, list[tuple[str, int]]] = {}
    for u, v in net.edges:
        nbrs.setdefault(u, []).append((v, 1))
        nbrs.setdefault(v, []).append((u, -1))
    def spread(seeds):
        queue = deque(seeds)
        member = set(seeds)
        while queue:
            x = queue.popleft()
            for y, step in nbrs.get(x, ()):
                want = levels[x] + step
                if y not in levels:
                    levels[y] = want
                    member.add(y)
                    queue.append(y)
                elif levels[y] != want:
                    return None, ((x, y),)
        return member, None

    member, bad = spread(sorted(levels))
    if bad:
        return NotLayered(f"edge between {bad[0][0]!r} and {bad[0][1]!r} skips or repeats a level", bad)
    if min(levels[v] for v in member) < 0:
        v = min(member, key=lambda k: (levels[k], k))
        return NotLayered(f"node {v!r} feeds the source side above level 0", ((v, net.source),))
    # components with no connection to the source: any consistent offset works
    for v in sorted(net.nodes):
        if v in levels:
            continue
        levels[v] = 0
        member, bad = spread([v])
        if bad:
            return NotLayered(f"edge between {bad[0][0]!r} and {bad[0][1]!r} skips or repeats a level", bad)
        low = min(levels[x] for x in member)
        for x in member:
            levels[x] -= low

    depth = {}
    for d in net.destinations:
        depth[d] = dist.get(d, 0)
    unreachable = frozenset(v for v in net.nodes if v not in dist)
    return LayerDecomposition(levels=levels, depth=depth, unreachable=unreachable)


def require_layers(net: RelayNetwork) -> LayerDecomposition:
    ls = layer_structure(net)
    if not ls.layered:
        raise NotLayeredError(f"network is not layered: {ls.reason}")
    return ls


def cut_partition(net: RelayNetwork, omega, l: int, layers: LayerDecomposition | None = None):
    """Return ``(beta_l, gamma_l, T_l)`` for the cut ``omega``.

    ``beta_l`` are the cut-side nodes at level ``l - 1``, ``gamma_l`` the
    complement-side nodes at level ``l`` and ``T_l`` every transmitter with an
    edge into ``gamma_l``.
    """
    layers = layers or require_layers(net)
    omega = frozenset(omega)
    beta = frozenset(v for v in omega if layers.levels.get(v) == l - 1)
    gamma = frozenset(v for v in net.nodes if v not in omega and layers.levels.get(v) == l)
    influencing = frozenset(u for u, v in net.edges if v in gamma)
    return beta, gamma, influencing
