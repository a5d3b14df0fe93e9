"""Cut enumeration and cut values.

Two independent engines evaluate a cut:

* the rank engine (linear networks only) builds the transfer matrix from the
  cut side to its complement and takes its rank over F_p;
* the entropy engine enumerates every joint transmit assignment of the nodes
  that influence the complement, pushes it through the network and computes
  ``H(Y_complement | X_complement)`` exactly.

All values are in bits.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from . import limits
from .errors import LimitError, ModelError
from .field import FieldMatrix, block, make_rng, rank
from .network import GeneralRelayNetwork, LinearRelayNetwork, RelayNetwork, reachable_from

LOG2 = math.log(2.0)
PROB_FLOOR = 1e-15
ASCENT_TOL = 1e-9


@dataclass(frozen=True)
class Cut:
    """Source side ``omega`` of a cut separating the source from ``destination``."""

    omega: frozenset
    destination: str

    def complement(self, net: RelayNetwork) -> frozenset:
        return frozenset(v for v in net.nodes if v not in self.omega)

    def label(self) -> str:
        return "{" + ",".join(sorted(self.omega)) + "}"


def _destinations(net, destination):
    if destination is None:
        return tuple(sorted(net.destinations))
    if destination not in net.destinations:
        raise ModelError(f"{destination!r} is not a destination")
    return (destination,)


def enumerate_cuts(net: RelayNetwork, destination: str, limit: int | None = None) -> list[Cut]:
    """All ``2**(|V|-2)`` cuts in binary-counter order.

    The free nodes (everything except the source and ``destination``) are taken
    in ascending id order and the first one is the least significant bit, so
    the first cut is always ``{S}``.
    """
    limit = limits.node_limit() if limit is None else limit
    if len(net.nodes) > limit:
        raise LimitError(f"{len(net.nodes)} nodes exceed the cut enumeration limit of {limit}")
    if destination not in net.destinations:
        raise ModelError(f"{destination!r} is not a destination")
    free = sorted(v for v in net.nodes if v not in (net.source, destination))
    cuts = []
    for mask in range(1 << len(free)):
        omega = {net.source}
        omega.update(v for k, v in enumerate(free) if mask >> k & 1)
        cuts.append(Cut(frozenset(omega), destination))
    return cuts


def crosses_unbounded(net: RelayNetwork, omega) -> bool:
    """True when an unbounded edge leaves ``omega``; such a cut has infinite value."""
    return any(u in omega and v not in omega for u, v in net.unbounded)


# --------------------------------------------------------------------------
# rank engine


@dataclass(frozen=True)
class TransferMatrix:
    transmitters: tuple[str, ...]
    receivers: tuple[str, ...]
    matrix: FieldMatrix

    @property
    def rank(self) -> int:
        return rank(self.matrix)


def transfer_between(net: LinearRelayNetwork, senders, receivers) -> TransferMatrix:
    """Block matrix from ``senders`` to ``receivers`` (block ``(r, t)`` is ``G[t, r]``)."""
    if not isinstance(net, LinearRelayNetwork):
        raise ModelError("transfer matrices exist only for linear networks")
    senders, receivers = set(senders), set(receivers)
    crossing = [(u, v) for u, v in net.edges if u in senders and v in receivers]
    tx = tuple(sorted({u for u, _ in crossing}))
    rx = tuple(sorted({v for _, v in crossing}))
    if not crossing:
        return TransferMatrix(tx, rx, FieldMatrix.zeros(net.prime, 0, 0))
    blocks = [[net.gains.get((t, r)) for t in tx] for r in rx]
    # every row/column has at least one edge, so block() can infer shapes
    return TransferMatrix(tx, rx, block(blocks, net.prime))


def transfer_matrix(net: RelayNetwork, cut: Cut) -> TransferMatrix:
    if not isinstance(net, LinearRelayNetwork):
        raise ModelError("transfer matrices exist only for linear networks; use the entropy engine")
    return transfer_between(net, cut.omega, cut.complement(net))


def cut_rank(net: RelayNetwork, cut: Cut) -> int:
    return transfer_matrix(net, cut).rank


def rank_cut_value(net: RelayNetwork, cut: Cut) -> float:
    """``rank(G_cut) * log2(p)`` bits; ``inf`` if the cut crosses an unbounded edge."""
    if crosses_unbounded(net, cut.omega):
        return math.inf
    return cut_rank(net, cut) * math.log2(net.prime)


@dataclass
class CutValue:
    cut: Cut
    bits: float
    rank: int | None = None


@dataclass
class CapacityResult:
    """Minimum cut value; ``per_destination`` holds each destination's value and argmin cut."""

    bits: float
    per_destination: dict[str, tuple[float, Cut]]
    cut_values: dict[str, list[CutValue]] = field(default_factory=dict)
    label: str = "capacity"

    @property
    def min_cut(self) -> Cut:
        d = min(self.per_destination, key=lambda k: (self.per_destination[k][0], k))
        return self.per_destination[d][1]


def _pmap(fn, items, threads):
    if threads and threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _minimize(net, cuts_by_dest, evaluate, threads, label):
    per_dest = {}
    values = {}
    for d, cuts in cuts_by_dest.items():
        vals = _pmap(evaluate, cuts, threads)
        values[d] = vals
        best = None
        for cv in vals:
            # strict comparison keeps the first cut in enumeration order on ties
            if best is None or cv.bits < best.bits - 1e-12:
                best = cv
        per_dest[d] = (best.bits, best.cut)
    total = min(v for v, _ in per_dest.values())
    return CapacityResult(total, per_dest, values, label)


def linear_capacity(net: RelayNetwork, destination: str | None = None, threads: int = 1) -> CapacityResult:
    """Min over destinations of the min-rank cut, in bits (0 for unreachable destinations)."""
    if not isinstance(net, LinearRelayNetwork):
        raise ModelError("linear capacity needs a linear network; use achievable_rate for general networks")
    dests = _destinations(net, destination)
    cuts = {d: enumerate_cuts(net, d) for d in dests}
    logp = math.log2(net.prime)

    def evaluate(cut):
        if crosses_unbounded(net, cut.omega):
            return CutValue(cut, math.inf, None)
        r = cut_rank(net, cut)
        return CutValue(cut, r * logp, r)

    return _minimize(net, cuts, evaluate, threads, "capacity")


# --------------------------------------------------------------------------
# entropy engine


class ProductDistribution:
    """One independent pmf per node over that node's transmit alphabet."""

    def __init__(self, pmfs: Mapping[str, object]):
        clean = {}
        for v, pmf in pmfs.items():
            arr = np.array(pmf, dtype=float)
            if arr.ndim != 1 or arr.size == 0:
                raise ValueError(f"pmf of {v!r} must be a non-empty vector")
            if (arr < 0).any():
                raise ValueError(f"pmf of {v!r} has negative entries")
            if abs(arr.sum() - 1.0) > 1e-12:
                raise ValueError(f"pmf of {v!r} sums to {arr.sum()!r}, not 1")
            arr.setflags(write=False)
            clean[v] = arr
        self.pmfs = dict(sorted(clean.items()))

    @classmethod
    def uniform(cls, net: RelayNetwork) -> "ProductDistribution":
        return cls({v: np.full(net.alphabet_size(v), 1.0 / net.alphabet_size(v)) for v in net.nodes})

    @classmethod
    def random(cls, net: RelayNetwork, seed) -> "ProductDistribution":
        """Dirichlet(1) pmf per node."""
        rng = make_rng(seed)
        pmfs = {}
        for v in sorted(net.nodes):
            w = rng.dirichlet(np.ones(net.alphabet_size(v)))
            pmfs[v] = w / w.sum()
        return cls(pmfs)

    def pmf(self, node: str) -> np.ndarray:
        return self.pmfs[node]

    def replace(self, node: str, pmf) -> "ProductDistribution":
        new = dict(self.pmfs)
        new[node] = pmf
        return ProductDistribution(new)

    def check(self, net: RelayNetwork):
        for v in net.nodes:
            if v not in self.pmfs:
                raise ValueError(f"distribution has no pmf for node {v!r}")
            if self.pmfs[v].size != net.alphabet_size(v):
                raise ValueError(f"pmf of {v!r} has {self.pmfs[v].size} entries, "
                                 f"alphabet has {net.alphabet_size(v)}")

    def to_dict(self) -> dict[str, list[float]]:
        return {v: [float(x) for x in p] for v, p in self.pmfs.items()}

    def __eq__(self, other):
        if not isinstance(other, ProductDistribution):
            return NotImplemented
        return self.pmfs.keys() == other.pmfs.keys() and all(
            np.array_equal(self.pmfs[k], other.pmfs[k]) for k in self.pmfs)

    def __repr__(self):
        return f"ProductDistribution({self.to_dict()})"


def _influencers(net: RelayNetwork, receivers) -> set[str]:
    receivers = set(receivers)
    if isinstance(net, LinearRelayNetwork):
        return {u for (u, v), g in net.gains.items() if v in receivers and not g.is_zero()}
    return {u for u, v in net.edges if v in receivers}


def _digits(idx: np.ndarray, base: int, width: int) -> np.ndarray:
    """Integer symbols -> vectors, first component most significant."""
    out = np.empty(idx.shape + (width,), dtype=np.int64)
    rest = idx.copy()
    for k in range(width - 1, -1, -1):
        out[..., k] = rest % base
        rest //= base
    return out


def _undigits(vec: np.ndarray, base: int) -> np.ndarray:
    key = np.zeros(vec.shape[:-1], dtype=np.int64)
    for k in range(vec.shape[-1]):
        key = key * base + vec[..., k]
    return key


def received_symbols(net: RelayNetwork, j: str, x: Mapping[str, np.ndarray]) -> np.ndarray:
    """Received symbol index of node ``j`` for arrays of transmit symbols ``x``.

    Linear received vectors are encoded as integers with the first component
    most significant, the same convention as transmit symbols.
    """
    if isinstance(net, LinearRelayNetwork):
        p, q = net.prime, net.dim
        acc = None
        for (u, v), g in net.gains.items():
            if v != j or g.is_zero():
                continue
            contrib = _digits(np.asarray(x[u], dtype=np.int64), p, q) @ g.array.T
            acc = contrib if acc is None else acc + contrib
        if acc is None:
            shape = np.shape(next(iter(x.values()))) if x else (1,)
            return np.zeros(shape, dtype=np.int64)
        return _undigits(acc % p, p)
    f = net.function(j)
    return f.evaluate([x[i] for i in f.inputs], [net.alphabet_size(i) for i in f.inputs])


def output_size(net: RelayNetwork, j: str) -> int:
    if isinstance(net, LinearRelayNetwork):
        return net.prime ** net.dim
    return net.function(j).outputs


def _group(columns, cards) -> np.ndarray:
    """Dense group labels for the rows of several integer columns."""
    if not columns:
        return None
    key = np.zeros(len(columns[0]), dtype=np.int64)
    span = 1
    for col, card in zip(columns, cards):
        if span * card >= (1 << 62):
            key = np.unique(key, return_inverse=True)[1].astype(np.int64)
            span = int(key.max()) + 1
        key = key * card + col
        span *= card
    return np.unique(key, return_inverse=True)[1]


def _entropy_bits(labels, prob) -> float:
    if labels is None:
        return 0.0
    mass = np.bincount(labels, weights=prob)
    mass = mass[mass >= PROB_FLOOR]
    return float(-(mass * np.log(mass)).sum() / LOG2)


def _enumerate(net, dist, nodes):
    """Joint support of independent transmit symbols of ``nodes``."""
    nodes = sorted(nodes)
    supports = []
    for v in nodes:
        pmf = dist.pmf(v)
        supports.append(np.flatnonzero(pmf >= PROB_FLOOR))
    total = 1
    for s in supports:
        total *= len(s)
    if total > limits.support_limit():
        raise LimitError(f"joint support of {total} assignments exceeds the limit of {limits.support_limit()}")
    if not nodes:
        return {}, np.ones(1)
    grids = np.unravel_index(np.arange(total, dtype=np.int64), [len(s) for s in supports])
    x = {}
    prob = np.ones(total)
    for v, s, g in zip(nodes, supports, grids):
        sym = s[g]
        x[v] = sym
        prob = prob * dist.pmf(v)[sym]
    return x, prob


def joint_entropy(net: RelayNetwork, dist: ProductDistribution, ys=(), xs=()) -> float:
    """``H(Y_ys, X_xs)`` by exhaustive enumeration."""
    ys, xs = sorted(set(ys)), sorted(set(xs))
    x, prob = _enumerate(net, dist, _influencers(net, ys) | set(xs))
    cols = [received_symbols(net, j, x) * np.ones_like(prob, dtype=np.int64) for j in ys]
    cards = [output_size(net, j) for j in ys]
    cols += [x[v] for v in xs]
    cards += [net.alphabet_size(v) for v in xs]
    return _entropy_bits(_group(cols, cards), prob)


def conditional_entropy(net: RelayNetwork, dist: ProductDistribution, receivers, given) -> float:
    """``H(Y_receivers | X_given)`` for a product distribution.

    Transmitters in ``given`` that do not influence the receivers are
    independent of everything involved and are dropped.
    """
    receivers = sorted(set(receivers))
    if not receivers:
        return 0.0
    infl = _influencers(net, receivers)
    cond = sorted(infl & set(given))
    x, prob = _enumerate(net, dist, infl)
    ycols = [received_symbols(net, j, x) * np.ones_like(prob, dtype=np.int64) for j in receivers]
    ycards = [output_size(net, j) for j in receivers]
    xcols = [x[v] for v in cond]
    xcards = [net.alphabet_size(v) for v in cond]
    joint = _entropy_bits(_group(ycols + xcols, ycards + xcards), prob)
    marginal = _entropy_bits(_group(xcols, xcards), prob)
    return max(joint - marginal, 0.0)


def entropy_cut_value(net: RelayNetwork, cut: Cut, dist: ProductDistribution) -> float:
    """``H(Y_complement | X_complement)``; ``inf`` if the cut crosses an unbounded edge."""
    if crosses_unbounded(net, cut.omega):
        return math.inf
    comp = cut.complement(net)
    return conditional_entropy(net, dist, comp, comp)


def achievable_rate(net: RelayNetwork, dist: ProductDistribution | None = None,
                    destination: str | None = None, threads: int = 1) -> CapacityResult:
    """Min over destinations and cuts of the entropy cut value under ``dist``."""
    dist = dist or ProductDistribution.uniform(net)
    dist.check(net)
    dests = _destinations(net, destination)
    cuts = {d: enumerate_cuts(net, d) for d in dests}
    return _minimize(net, cuts, lambda c: CutValue(c, entropy_cut_value(net, c, dist)),
                     threads, "achievable rate")


# --------------------------------------------------------------------------
# distribution search


@dataclass
class OptimizationResult:
    distribution: ProductDistribution
    bits: float
    method: str
    evaluations: int
    label: str = "certified achievable lower bound"


def _transmitters(net):
    senders = {u for u, _ in net.edges}
    return sorted(v for v in senders if net.alphabet_size(v) > 1)


def _compositions(total, parts):
    for bars in itertools.combinations(range(total + parts - 1), parts - 1):
        prev = -1
        out = []
        for b in bars:
            out.append(b - prev - 1)
            prev = b
        out.append(total + parts - 2 - prev)
        yield out


GRID_LIMIT = 200_000


def optimize_distribution(net: RelayNetwork, method: str = "uniform", *, resolution: int = 8,
                          restarts: int = 4, seed: int = 0, destination: str | None = None,
                          threads: int = 1) -> OptimizationResult:
    """Search product distributions for a large achievable rate.

    ``uniform`` evaluates the uniform distribution, ``grid`` enumerates every
    product of pmfs with probabilities in multiples of ``1/resolution``, and
    ``ascent`` runs coordinate ascent from the uniform start plus
    ``restarts - 1`` random starts. The max-min objective is not concave, so
    the result is only a lower bound on the best product distribution.
    """
    base = ProductDistribution.uniform(net)
    reachable = reachable_from(net, net.source)

    def score(dist):
        return achievable_rate(net, dist, destination, threads).bits

    if method == "uniform":
        return OptimizationResult(base, score(base), "uniform", 1)
    nodes = [v for v in _transmitters(net) if v in reachable]
    if method == "grid":
        if resolution < 1:
            raise ValueError("grid resolution must be >= 1")
        per_node = [[np.array(c, dtype=float) / resolution
                     for c in _compositions(resolution, net.alphabet_size(v))] for v in nodes]
        count = 1
        for opts in per_node:
            count *= len(opts)
        if count > GRID_LIMIT:
            raise LimitError(f"grid has {count} points, limit is {GRID_LIMIT}")
        # the uniform point is always a candidate, even when 1/|X| is off the grid
        best, best_val, evals = base, score(base), 1
        for combo in itertools.product(*per_node):
            dist = ProductDistribution({**base.pmfs, **dict(zip(nodes, combo))})
            val = score(dist)
            evals += 1
            if val > best_val + 1e-12:
                best, best_val = dist, val
        return OptimizationResult(best, best_val, f"grid:{resolution}", evals)
    if method == "ascent":
        if restarts < 1:
            raise ValueError("ascent needs at least one restart")
        best, best_val, evals = None, -math.inf, 0
        for r in range(restarts):
            if r == 0:
                start = base
            else:
                rnd = ProductDistribution.random(net, make_rng(seed, r))
                start = ProductDistribution({**base.pmfs, **{v: rnd.pmf(v) for v in nodes}})
            dist, val, n = _coordinate_ascent(start, nodes, score)
            evals += n
            if val > best_val + 1e-12:
                best, best_val = dist, val
        return OptimizationResult(best, best_val, f"ascent:{restarts}", evals)
    raise ValueError(f"unknown optimisation method {method!r}")


def _coordinate_ascent(dist, nodes, score):
    current = score(dist)
    evals = 1
    while True:
        sweep_gain = 0.0
        for v in nodes:
            pmf = dist.pmf(v).copy()
            step = 0.5
            while step >= 1e-4:
                improved = False
                for a in range(pmf.size):
                    for b in range(pmf.size):
                        if a == b or pmf[a] <= 0:
                            continue
                        move = min(step, pmf[a])
                        trial = pmf.copy()
                        trial[a] -= move
                        trial[b] += move
                        trial = np.clip(trial, 0.0, None)
                        trial /= trial.sum()
                        cand = dist.replace(v, trial)
                        val = score(cand)
                        evals += 1
                        if val > current + ASCENT_TOL:
                            sweep_gain += val - current
                            dist, current, pmf = cand, val, trial
                            improved = True
                if not improved:
                    step /= 2
        if sweep_gain <= ASCENT_TOL:
            return dist, current, evals
