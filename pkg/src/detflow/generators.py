"""Seeded random instances for tests, acceptance checks and ``verify``."""

from __future__ import annotations

import numpy as np

from .field import FieldMatrix, make_rng
from .network import GeneralRelayNetwork, LinearRelayNetwork, canonical_function
from .submodularity import SubsetFamily


def _relay_names(n: int) -> list[str]:
    return [f"R{k}" for k in range(1, n + 1)]


def _random_edges(rng, nodes, source, dests, edge_prob):
    edges = []
    for u in nodes:
        for v in nodes:
            if u == v or v == source or u in dests:
                continue
            if rng.random() < edge_prob:
                edges.append((u, v))
    return edges


def _gain(rng, p, q):
    return FieldMatrix(p, rng.integers(0, p, size=(q, q)))


def random_linear_network(seed, n_nodes: int = 4, p: int = 2, q: int = 1,
                          edge_prob: float = 0.6, n_dest: int = 1) -> LinearRelayNetwork:
    """Arbitrary topology (cycles allowed) with uniform random gains.

    Destinations never transmit and nothing feeds the source, which keeps the
    instances close to the relay setting without forcing layers.
    """
    rng = make_rng(seed)
    dests = ["D"] if n_dest == 1 else [f"D{k}" for k in range(1, n_dest + 1)]
    nodes = ["S", *_relay_names(n_nodes - 1 - len(dests)), *dests]
    edges = _random_edges(rng, nodes, "S", set(dests), edge_prob)
    gains = {e: _gain(rng, p, q) for e in edges}
    return LinearRelayNetwork(tuple(nodes), "S", tuple(dests), p, q, gains)


def _levels(rng, depth, width_max):
    levels = [["S"]]
    for l in range(1, depth):
        width = int(rng.integers(1, width_max + 1))
        levels.append([f"{chr(65 + k)}{l}" for k in range(width)])
    levels.append(["D"])
    return levels


def _layered_edges(rng, levels, edge_prob):
    edges = []
    for a, b in zip(levels, levels[1:]):
        for v in b:
            # at least one in-edge so every node is reachable
            must = a[int(rng.integers(0, len(a)))]
            for u in a:
                if u == must or rng.random() < edge_prob:
                    edges.append((u, v))
    return edges


def random_layered_linear(seed, depth: int = 3, width_max: int = 2, p: int = 2, q: int = 1,
                          edge_prob: float = 0.5) -> LinearRelayNetwork:
    """Layered network: source, ``depth - 1`` relay levels, one destination."""
    rng = make_rng(seed)
    levels = _levels(rng, depth, width_max)
    edges = _layered_edges(rng, levels, edge_prob)
    nodes = tuple(v for lev in levels for v in lev)
    gains = {e: _gain(rng, p, q) for e in edges}
    return LinearRelayNetwork(nodes, "S", ("D",), p, q, gains)


def _general(rng, nodes, source, dests, edges, alphabet_max, output_max):
    alphabets = {v: int(rng.integers(2, alphabet_max + 1)) if v not in dests else 1 for v in nodes}
    inputs = {}
    for u, v in edges:
        inputs.setdefault(v, []).append(u)
    functions = {}
    for v, ins in inputs.items():
        ins = sorted(ins)
        size = int(np.prod([alphabets[u] for u in ins]))
        outputs = int(rng.integers(2, output_max + 1))
        table = rng.integers(0, outputs, size=size)
        functions[v] = canonical_function(ins, table, outputs, alphabets)
    return GeneralRelayNetwork(tuple(nodes), source, tuple(dests), alphabets, functions)


def random_general_network(seed, n_nodes: int = 4, alphabet_max: int = 2, output_max: int = 3,
                           edge_prob: float = 0.6) -> GeneralRelayNetwork:
    """Arbitrary topology with random lookup tables."""
    rng = make_rng(seed)
    nodes = ["S", *_relay_names(n_nodes - 2), "D"]
    edges = _random_edges(rng, nodes, "S", {"D"}, edge_prob)
    return _general(rng, nodes, "S", ["D"], edges, alphabet_max, output_max)


def random_layered_general(seed, depth: int = 3, width_max: int = 2, alphabet_max: int = 2,
                           output_max: int = 3, edge_prob: float = 0.5) -> GeneralRelayNetwork:
    rng = make_rng(seed)
    levels = _levels(rng, depth, width_max)
    edges = _layered_edges(rng, levels, edge_prob)
    nodes = [v for lev in levels for v in lev]
    return _general(rng, nodes, "S", ["D"], edges, alphabet_max, output_max)


def random_family(net, seed, l: int | None = None, destination: str | None = None) -> SubsetFamily:
    """Distinct cut complements (each holds the destination, none the source)."""
    rng = make_rng(seed)
    d = destination or sorted(net.destinations)[0]
    free = sorted(v for v in net.nodes if v not in (net.source, d))
    total = 1 << len(free)
    if l is None:
        l = int(rng.integers(1, min(total, 5) + 1))
    l = min(l, total)
    masks = rng.choice(total, size=l, replace=False)
    sets = [frozenset({d, *(v for k, v in enumerate(free) if int(m) >> k & 1)}) for m in masks]
    return SubsetFamily.for_network(net, sets, d)


def random_sets(seed, ground_size: int = 6, l_max: int = 8) -> list[frozenset]:
    """Arbitrary (possibly repeated) subsets of ``range(ground_size)``."""
    rng = make_rng(seed)
    l = int(rng.integers(1, l_max + 1))
    return [frozenset(np.flatnonzero(rng.random(ground_size) < 0.5).tolist()) for _ in range(l)]


def random_joint(seed, n_vars: int = 4, arity: int = 2) -> np.ndarray:
    """Dirichlet-distributed joint pmf with one axis per variable."""
    rng = make_rng(seed)
    return rng.dirichlet(np.ones(arity ** n_vars)).reshape((arity,) * n_vars)
