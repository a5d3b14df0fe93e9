"""Time expansion of arbitrary relay networks.

Stage ``i`` holds a copy ``v[i]`` of every node. Each original edge ``(u, v)``
becomes ``u[i] -> v[i+1]`` for ``i = 0 .. K-1``, so ``K`` stages of
transmission are followed by one stage that only receives. An unfolded cut
picks a source side ``Omega_i`` of the original network at every stage; its
value is the sum over the ``K`` transitions of the value of the signals that
leave ``Omega_i`` and land outside ``Omega_{i+1}``.

The same object can be written out as an ordinary layered network with a
super-source ``*S`` and one super-destination ``*d`` per destination. Buffer
chains of unbounded edges pad every stage to a common depth; they carry zero
gains (or unit alphabets), so they only mark which cuts are admissible.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import limits
from .cutset import (
    Cut,
    ProductDistribution,
    conditional_entropy,
    enumerate_cuts,
    transfer_between,
)
from .errors import LimitError, ModelError, NetworkError
from .field import FieldMatrix, make_rng
from .network import (
    GeneralRelayNetwork,
    LinearRelayNetwork,
    NodeFunction,
    RelayNetwork,
    canonical_function,
    require_valid,
)

TOL = 1e-9


def stage_name(v: str, i: int) -> str:
    return f"{v}[{i}]"


@dataclass(frozen=True)
class UnfoldedNetwork:
    """``K``-transition expansion of ``original`` and its emitted layered form."""

    original: RelayNetwork
    stages: int
    network: RelayNetwork
    super_source: str
    super_destinations: dict
    origin: dict = field(repr=False)

    @property
    def K(self) -> int:
        return self.stages

    def node(self, v: str, i: int) -> str:
        if v not in self.original.nodes or not 0 <= i <= self.stages:
            raise NetworkError(f"no stage node for {v!r} at stage {i}")
        return stage_name(v, i)

    def stage(self, name: str) -> int | None:
        o = self.origin.get(name)
        return None if o is None else o[1]

    def origin_of(self, name: str) -> str | None:
        o = self.origin.get(name)
        return None if o is None else o[0]


def _buffer_names(net: RelayNetwork, K: int):
    src = "*" + net.source
    tchain = [f"*{net.source}.T[{j}]" for j in range(1, K)]
    supers = {d: "*" + d for d in net.destinations}
    rchains = {d: [f"*{d}.R[{j}]" for j in range(2, K + 1)] for d in net.destinations}
    return src, tchain, supers, rchains


def _buffer_edges(net, K, src, tchain, supers, rchains):
    S = net.source
    edges = [(src, stage_name(S, 0))]
    prev = src
    for j, t in enumerate(tchain, start=1):
        edges += [(prev, t), (t, stage_name(S, j))]
        prev = t
    for d in net.destinations:
        chain = rchains[d]
        # D[i] joins the chain at R[i+1]; the chain ends in the super-destination
        for j, r in enumerate(chain, start=2):
            edges.append((stage_name(d, j - 1), r))
            if j > 2:
                edges.append((chain[j - 3], r))
        if K >= 1:
            edges.append((stage_name(d, K), supers[d]))
        if chain:
            edges.append((chain[-1], supers[d]))
    return edges


def unfold(net: RelayNetwork, K: int) -> UnfoldedNetwork:
    """Expand ``net`` over ``K`` transitions (``K + 1`` stage copies)."""
    if K < 1:
        raise ValueError("the number of stages must be at least 1")
    require_valid(net)
    n_nodes = (K + 1) * len(net.nodes) + 1 + max(K - 1, 0) + len(net.destinations) * K
    if n_nodes > limits.unfold_node_limit():
        raise LimitError(f"unfolded network would have {n_nodes} nodes "
                         f"(limit {limits.unfold_node_limit()})")
    src, tchain, supers, rchains = _buffer_names(net, K)
    origin = {stage_name(v, i): (v, i) for i in range(K + 1) for v in net.nodes}
    buffers = [src, *tchain, *supers.values(), *itertools.chain(*rchains.values())]
    names = list(origin) + buffers
    if len(set(names)) != len(names):
        raise NetworkError("node ids collide with the generated stage or buffer names")
    nodes = tuple(sorted(names))
    stage_edges = [(stage_name(u, i), stage_name(v, i + 1), (u, v))
                   for i in range(K) for u, v in net.edges]
    bufs = _buffer_edges(net, K, src, tchain, supers, rchains)
    unbounded = set(bufs)
    unbounded |= {(a, b) for a, b, e in stage_edges if e in net.unbounded}
    dests = tuple(sorted(supers.values()))
    meta = dict(name=f"{net.name or 'network'} unfolded over {K} stages",
                comment=net.comment)

    if isinstance(net, LinearRelayNetwork):
        zero = FieldMatrix.zeros(net.prime, net.dim, net.dim)
        gains = {(a, b): net.gains[e] for a, b, e in stage_edges}
        gains.update({e: zero for e in bufs})
        out = LinearRelayNetwork(nodes, src, dests, net.prime, net.dim, gains,
                                 frozenset(unbounded), **meta)
    elif isinstance(net, GeneralRelayNetwork):
        alphabets = {stage_name(v, i): net.alphabet_size(v)
                     for i in range(K + 1) for v in net.nodes}
        alphabets.update({b: 1 for b in buffers})
        inputs: dict[str, list[str]] = {}
        for a, b, _ in stage_edges + [(a, b, None) for a, b in bufs]:
            inputs.setdefault(b, []).append(a)
        functions = {}
        for b, ins in inputs.items():
            ins = sorted(set(ins))
            size = int(np.prod([alphabets[a] for a in ins]))
            o = origin.get(b)
            if o is None or o[1] == 0:
                functions[b] = canonical_function(ins, [0] * size, 1, alphabets)
                continue
            f = net.function(o[0])
            lifted = [stage_name(u, o[1] - 1) for u in f.inputs]
            extra = [a for a in ins if a not in lifted]  # unit-alphabet buffers
            table = np.asarray(f.table, dtype=np.int64)
            functions[b] = canonical_function(lifted + extra, table, f.outputs, alphabets)
        out = GeneralRelayNetwork(nodes, src, dests, alphabets, functions,
                                  tuple(sorted(set(bufs) | {(a, b) for a, b, _ in stage_edges})),
                                  frozenset(unbounded), **meta)
    else:
        raise ModelError(f"unsupported network model {net.model!r}")
    return UnfoldedNetwork(net, K, out, src, supers, origin)


def lift_distribution(unf: UnfoldedNetwork, dist: ProductDistribution) -> ProductDistribution:
    """Same per-node input distribution at every stage; buffers are constant."""
    pmfs = {}
    for v in unf.network.nodes:
        o = unf.origin.get(v)
        pmfs[v] = dist.pmf(o[0]) if o else [1.0]
    return ProductDistribution(pmfs)


# --------------------------------------------------------------------------
# unfolded cuts


@dataclass(frozen=True)
class UnfoldedCut:
    """Source sides ``Omega_0 .. Omega_K`` of the original network, one per stage."""

    destination: str
    stages: tuple

    @property
    def K(self) -> int:
        return len(self.stages) - 1

    @property
    def steady(self) -> bool:
        return all(s == self.stages[0] for s in self.stages)

    @property
    def kind(self) -> str:
        return "steady" if self.steady else "wiggling"

    def is_valid(self, net: RelayNetwork) -> bool:
        return all(net.source in s and self.destination not in s for s in self.stages)

    def label(self) -> str:
        return " | ".join("{" + ",".join(sorted(s)) + "}" for s in self.stages)

    def omega(self, unf: UnfoldedNetwork) -> frozenset:
        """Source side in the emitted network (buffers placed so no unbounded edge is cut)."""
        net = unf.original
        names = {unf.super_source} | {f"*{net.source}.T[{j}]" for j in range(1, unf.K)}
        for i, s in enumerate(self.stages):
            names |= {stage_name(v, i) for v in s}
        for d in net.destinations:
            if d != self.destination:
                names.add(unf.super_destinations[d])
                names |= {f"*{d}.R[{j}]" for j in range(2, unf.K + 1)}
        return frozenset(names)

    def as_cut(self, unf: UnfoldedNetwork) -> Cut:
        return Cut(self.omega(unf), unf.super_destinations[self.destination])


def lift_steady_cut(unf: UnfoldedNetwork, cut: Cut) -> UnfoldedCut:
    """The unfolded cut that uses ``cut`` at every stage."""
    return UnfoldedCut(cut.destination, (frozenset(cut.omega),) * (unf.K + 1))


def _engine_name(engine) -> str:
    return "rank" if engine == "rank" else "entropy"


class _Transitions:
    """Cached transition values ``value(Omega_a -> complement of Omega_b)``."""

    def __init__(self, net: RelayNetwork, engine):
        if engine == "rank":
            if not isinstance(net, LinearRelayNetwork):
                raise ModelError("the rank engine needs a linear network; pass a distribution")
            self._logp = math.log2(net.prime)
        elif isinstance(engine, ProductDistribution):
            engine.check(net)
        else:
            raise ValueError("engine must be 'rank' or a ProductDistribution")
        self.net = net
        self.engine = engine
        self._nodes = frozenset(net.nodes)
        self._cache = {}

    def __call__(self, omega_a, omega_b) -> float:
        key = (omega_a, omega_b)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        net = self.net
        recv = self._nodes - omega_b
        if any(u in omega_a and v in recv for u, v in net.unbounded):
            val = math.inf
        elif self.engine == "rank":
            val = transfer_between(net, omega_a, recv).rank * self._logp
        else:
            val = conditional_entropy(net, self.engine, recv, self._nodes - omega_a)
        self._cache[key] = val
        return val

    def matrix(self, states) -> np.ndarray:
        return np.array([[self(a.omega, b.omega) for b in states] for a in states], dtype=float)


def unfolded_cut_value(unf: UnfoldedNetwork, cut: UnfoldedCut, engine="rank") -> float:
    """Sum of the transition values; ``inf`` for a cut that is not admissible."""
    if cut.K != unf.K:
        raise ValueError(f"cut has {cut.K} transitions, network has {unf.K}")
    if not cut.is_valid(unf.original):
        return math.inf
    tr = _Transitions(unf.original, engine)
    return float(sum(tr(a, b) for a, b in zip(cut.stages, cut.stages[1:])))


def original_min_cut(net: RelayNetwork, engine="rank", destination: str | None = None) -> float:
    """Min over the cuts of ``net`` of the single-stage value under ``engine``."""
    tr = _Transitions(net, engine)
    dests = [destination] if destination else sorted(net.destinations)
    return min(tr(c.omega, c.omega) for d in dests for c in enumerate_cuts(net, d))


def free_bits(net: RelayNetwork, K: int) -> int:
    return (K + 1) * (len(net.nodes) - 2)


def enumerate_unfolded_cuts(unf: UnfoldedNetwork, destination: str):
    """Every admissible unfolded cut for ``destination``, stage 0 varying slowest."""
    net = unf.original
    if free_bits(net, unf.K) > limits.unfolded_limit():
        raise LimitError(f"{free_bits(net, unf.K)} free node-stage bits exceed the exhaustive "
                         f"limit of {limits.unfolded_limit()}")
    states = enumerate_cuts(net, destination)
    for seq in itertools.product(range(len(states)), repeat=unf.K + 1):
        yield UnfoldedCut(destination, tuple(states[k].omega for k in seq))


def _sequence_values(W: np.ndarray, seqs: np.ndarray) -> np.ndarray:
    vals = np.zeros(len(seqs))
    for k in range(seqs.shape[1] - 1):
        vals += W[seqs[:, k], seqs[:, k + 1]]
    return vals


@dataclass
class UnfoldedMinCut:
    bits: float
    cut: UnfoldedCut
    per_destination: dict
    method: str

    @property
    def normalized(self) -> float:
        return self.bits / self.cut.K


def _dp_argmin(W: np.ndarray, K: int):
    """Lexicographically first minimum-cost walk with ``K`` steps."""
    L = W.shape[0]
    J = np.zeros((K + 1, L))
    for k in range(K - 1, -1, -1):
        J[k] = np.min(W + J[k + 1][None, :], axis=1)
    best = float(J[0].min())
    seq = [int(np.flatnonzero(J[0] <= best + TOL)[0])]
    for k in range(K):
        s = seq[-1]
        cand = W[s] + J[k + 1]
        seq.append(int(np.flatnonzero(cand <= J[k, s] + TOL)[0]))
    return best, seq


def unfolded_min_cut(unf: UnfoldedNetwork, engine="rank", method: str = "auto") -> UnfoldedMinCut:
    """Minimum over admissible unfolded cuts (steady and wiggling).

    ``method`` is ``"exhaustive"`` (every cut, within the enumeration limit),
    ``"dp"`` (exact shortest walk over per-stage cuts) or ``"auto"``, which
    picks exhaustive when it fits. Both return the lexicographically first
    minimiser with stage 0 most significant.
    """
    net = unf.original
    if method == "auto":
        method = "exhaustive" if free_bits(net, unf.K) <= limits.unfolded_limit() else "dp"
    if method not in ("exhaustive", "dp"):
        raise ValueError(f"unknown method {method!r}")
    tr = _Transitions(net, engine)
    per = {}
    for d in sorted(net.destinations):
        states = enumerate_cuts(net, d)
        W = tr.matrix(states)
        if method == "exhaustive":
            if free_bits(net, unf.K) > limits.unfolded_limit():
                raise LimitError(f"{free_bits(net, unf.K)} free node-stage bits exceed the "
                                 f"exhaustive limit of {limits.unfolded_limit()}")
            L = len(states)
            seqs = np.stack(np.unravel_index(np.arange(L ** (unf.K + 1)), (L,) * (unf.K + 1)), axis=1)
            vals = _sequence_values(W, seqs)
            best = float(vals.min())
            seq = seqs[int(np.flatnonzero(vals <= best + TOL)[0])]
        else:
            best, seq = _dp_argmin(W, unf.K)
        per[d] = (best, UnfoldedCut(d, tuple(states[k].omega for k in seq)))
    d = min(per, key=lambda k: (per[k][0], k))
    return UnfoldedMinCut(per[d][0], per[d][1], per, method)


# --------------------------------------------------------------------------
# lower bound check


def loop_decomposition(walk) -> tuple[list[list], list]:
    """Split a walk into simple closed loops plus a simple residual path.

    Returns ``(loops, path)``; each loop lists its distinct states in order and
    is closed by returning to its first state. The transitions of all loops
    plus those of the path account for every step of the walk.
    """
    loops, stack = [], []
    for s in walk:
        if s in stack:
            j = stack.index(s)
            loops.append(stack[j:])
            del stack[j + 1:]
        else:
            stack.append(s)
    return loops, stack


@dataclass
class CutCheck:
    cut: UnfoldedCut
    value: float
    slack: float
    passed: bool
    loops_ok: bool


@dataclass
class Lemma2Report:
    K: int
    L: int
    min_cut: float
    bound: float
    vacuous: bool
    mode: str
    checked: int
    violations: int
    worst_slack: float
    loop_failures: int
    entries: list = field(default_factory=list, repr=False)

    @property
    def passed(self) -> bool:
        return self.violations == 0 and self.loop_failures == 0


def lemma2_check(net: RelayNetwork, K: int, engine="rank", *, mode: str = "auto",
                 samples: int = 1000, seed=0, keep_entries: bool = False) -> Lemma2Report:
    """Check ``value >= (K - L + 1) * min cut`` for unfolded cuts of ``net``.

    Each cut is also split into loops; every loop of ``l`` transitions must be
    worth at least ``l`` times the min cut, and the loop-free remainder must
    have fewer than ``L`` transitions. ``mode`` is ``"exhaustive"``,
    ``"sampled"`` (uniform random stage sequences) or ``"auto"``.
    """
    if K < 1:
        raise ValueError("K must be at least 1")
    tr = _Transitions(net, engine)
    L = 1 << (len(net.nodes) - 2)
    if mode == "auto":
        mode = "exhaustive" if free_bits(net, K) <= limits.unfolded_limit() else "sampled"
    if mode == "exhaustive" and free_bits(net, K) > limits.unfolded_limit():
        raise LimitError(f"{free_bits(net, K)} free node-stage bits exceed the exhaustive limit")
    rng = make_rng(seed)
    C_all = original_min_cut(net, engine)
    checked = violations = loop_failures = 0
    worst = math.inf
    entries = []
    for d in sorted(net.destinations):
        states = enumerate_cuts(net, d)
        C = min(tr(c.omega, c.omega) for c in states)
        W = tr.matrix(states)
        if mode == "exhaustive":
            seqs = itertools.product(range(len(states)), repeat=K + 1)
        elif mode == "sampled":
            seqs = (tuple(int(v) for v in rng.integers(0, len(states), K + 1)) for _ in range(samples))
        else:
            raise ValueError(f"unknown mode {mode!r}")
        for seq in seqs:
            value = float(sum(W[a, b] for a, b in zip(seq, seq[1:])))
            slack = value - (K - L + 1) * C
            ok = slack >= -TOL
            loops, path = loop_decomposition(list(seq))
            loops_ok = len(path) - 1 <= L - 1
            for loop in loops:
                ring = loop + loop[:1]
                around = sum(W[a, b] for a, b in zip(ring, ring[1:]))
                loops_ok &= around >= len(loop) * C - TOL
            checked += 1
            violations += not ok
            loop_failures += not loops_ok
            worst = min(worst, slack)
            if keep_entries:
                cut = UnfoldedCut(d, tuple(states[k].omega for k in seq))
                entries.append(CutCheck(cut, value, slack, ok, loops_ok))
    return Lemma2Report(K, L, C_all, (K - L + 1) * C_all, K - L + 1 <= 0, mode, checked,
                        violations, worst, loop_failures, entries)


# --------------------------------------------------------------------------
# convergence


@dataclass
class ConvergenceRow:
    K: int
    unfolded: float
    normalized: float
    lower: float
    upper: float
    argmin_kind: str
    argmin: str


@dataclass
class ConvergenceReport:
    rows: list
    min_cut: float
    L: int

    @property
    def monotone(self) -> bool:
        vals = [r.normalized for r in self.rows]
        return all(b >= a - TOL for a, b in zip(vals, vals[1:]))

    @property
    def within_bracket(self) -> bool:
        return all(r.lower - TOL <= r.normalized <= r.upper + TOL for r in self.rows)

    @property
    def wiggling_argmins(self) -> list[int]:
        """Stage counts whose lexicographically first minimiser is not steady."""
        return [r.K for r in self.rows if r.argmin_kind == "wiggling"]


def convergence_report(net: RelayNetwork, K_range, engine="rank") -> ConvergenceReport:
    """Normalised unfolded min cut for each ``K`` next to its bracket."""
    C = original_min_cut(net, engine)
    L = 1 << (len(net.nodes) - 2)
    rows = []
    for K in K_range:
        unf = unfold(net, K)
        res = unfolded_min_cut(unf, engine, method="dp")
        rows.append(ConvergenceRow(K, res.bits, res.bits / K, max(K - L + 1, 0) / K * C, C,
                                   res.cut.kind, res.cut.label()))
    return ConvergenceReport(rows, C, L)
