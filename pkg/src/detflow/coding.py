"""Random relay coding on layered networks and its error analysis.

One sub-message is pushed through the layers at a time (message
synchronisation makes this exact for layered networks). Each trial draws a
fresh scheme: a uniform source codebook and an independent random map per
relay, either a uniform ``Tq x Tq`` matrix (linear model) or a uniform lookup
table over received blocks (general model). The decoder is exhaustive: a trial
fails when any other message produces the same destination block as the sent
one.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import limits
from .cutset import (
    ProductDistribution,
    _enumerate,
    conditional_entropy,
    enumerate_cuts,
    entropy_cut_value,
    received_symbols,
    output_size,
    transfer_between,
)
from .errors import LimitError, ModelError
from .field import RNG_ID, apply_blockwise, make_rng, mulmod, sample_uniform
from .network import (
    GeneralRelayNetwork,
    LayerDecomposition,
    LinearRelayNetwork,
    RelayNetwork,
    cut_partition,
    require_layers,
)

#: Upper bound on messages x trials x nodes handled by one estimate.
WORK_BUDGET = 1 << 36
#: Largest block space a general-model relay table may cover.
TABLE_LIMIT = 1 << 22


@dataclass(frozen=True)
class SimulationConfig:
    rate: float
    block_length: int
    trials: int
    seed: int = 0
    delta: float = math.inf
    distribution: ProductDistribution | None = None
    threads: int = 1

    def __post_init__(self):
        if self.block_length < 1:
            raise ValueError("block length must be >= 1")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.rate < 0:
            raise ValueError("rate must be non-negative")
        if self.delta < 0:
            raise ValueError("typicality parameter must be non-negative")

    @property
    def messages(self) -> int:
        """``2**ceil(R*T)``."""
        return 1 << math.ceil(self.rate * self.block_length - 1e-9)


@dataclass
class RelayScheme:
    """One draw of the random scheme.

    ``codebook_index`` holds each source block as an integer, first symbol
    (and first vector component) most significant; ``codebook`` is the
    unpacked symbol array.
    """

    model: str
    block_length: int
    messages: int
    codebook_index: np.ndarray
    encoders: dict
    layers: LayerDecomposition
    admissible: dict = field(default_factory=dict)
    symbol_base: int = 2
    symbol_width: int = 1

    @property
    def codebook(self) -> np.ndarray:
        return self.blocks(np.arange(self.messages))

    def blocks(self, messages) -> np.ndarray:
        """Source blocks of the given message indices."""
        index = self.codebook_index[np.asarray(messages, dtype=np.int64)]
        flat = _block_symbols(index, self.symbol_base, self.block_length * self.symbol_width)
        if self.model == "linear":
            return flat.reshape(index.size, self.block_length, self.symbol_width)
        return flat


# --------------------------------------------------------------------------
# block helpers for the general model


def _block_index(blocks: np.ndarray, base: int) -> np.ndarray:
    key = np.zeros(blocks.shape[:-1], dtype=np.int64)
    for t in range(blocks.shape[-1]):
        key = key * base + blocks[..., t]
    return key


def _block_symbols(index: np.ndarray, base: int, length: int) -> np.ndarray:
    out = np.empty(np.shape(index) + (length,), dtype=np.int64)
    rest = np.array(index, dtype=np.int64)
    for t in range(length - 1, -1, -1):
        out[..., t] = rest % base
        rest = rest // base
    return out


def is_typical(block, pmf, delta: float) -> bool:
    """Robust typicality: ``|freq(a) - p(a)| <= delta * p(a)`` for every symbol."""
    block = np.asarray(block, dtype=np.int64)
    pmf = np.asarray(pmf, dtype=float)
    freq = np.bincount(block, minlength=pmf.size)[: pmf.size] / block.size
    return bool(np.all(np.abs(freq - pmf) <= delta * pmf + 1e-12))


def typical_set(pmf, length: int, delta: float) -> np.ndarray:
    """Indices (first symbol most significant) of all delta-typical blocks."""
    pmf = np.asarray(pmf, dtype=float)
    size = pmf.size ** length
    if size > TABLE_LIMIT:
        raise LimitError(f"block space of {size} sequences exceeds {TABLE_LIMIT}")
    blocks = _block_symbols(np.arange(size, dtype=np.int64), pmf.size, length)
    counts = np.stack([(blocks == a).sum(axis=1) for a in range(pmf.size)], axis=1)
    ok = np.all(np.abs(counts / length - pmf) <= delta * pmf + 1e-12, axis=1)
    return np.flatnonzero(ok)


def received_pmf(net: RelayNetwork, j: str, dist: ProductDistribution) -> np.ndarray:
    """Distribution of ``y_j`` induced by a product input distribution."""
    infl = set(net.in_neighbors(j))
    x, prob = _enumerate(net, dist, infl)
    y = received_symbols(net, j, x) * np.ones_like(prob, dtype=np.int64)
    return np.bincount(y, weights=prob, minlength=output_size(net, j))


# --------------------------------------------------------------------------
# scheme construction and propagation


def _space(base: int, length: int) -> int:
    size = base ** length
    if size > 1 << 62:
        raise LimitError(f"block space {base}**{length} does not fit a 62-bit index")
    return size


def _relays(net, layers):
    return [v for v in sorted(net.nodes) if v != net.source and v in layers.levels]


def build_scheme(net: RelayNetwork, config: SimulationConfig, seed) -> RelayScheme:
    """Draw a codebook and one random map per relay; deterministic in ``seed``."""
    layers = require_layers(net)
    rng = make_rng(seed)
    T, M = config.block_length, config.messages
    if isinstance(net, LinearRelayNetwork):
        p, q = net.prime, net.dim
        codebook = rng.integers(0, _space(p, T * q), size=M, dtype=np.int64)
        encoders = {v: sample_uniform(p, T * q, T * q, rng) for v in _relays(net, layers)}
        return RelayScheme("linear", T, M, codebook, encoders, layers, symbol_base=p, symbol_width=q)
    if not isinstance(net, GeneralRelayNetwork):
        raise ModelError(f"unsupported network model {net.model!r}")

    dist = config.distribution or ProductDistribution.uniform(net)
    typical = math.isfinite(config.delta)
    admissible = {}

    def transmit_set(v):
        a = net.alphabet_size(v)
        if not typical:
            return None
        s = typical_set(dist.pmf(v), T, config.delta)
        if s.size == 0:
            raise ValueError(f"no {config.delta}-typical transmit blocks of length {T} at node {v!r}")
        return s

    a_s = net.alphabet_size(net.source)
    src = transmit_set(net.source)
    if src is None:
        codebook = rng.integers(0, _space(a_s, T), size=M, dtype=np.int64)
    else:
        admissible[net.source] = src
        codebook = src[rng.integers(0, src.size, size=M)]

    encoders = {}
    for v in _relays(net, layers):
        ysize = net.function(v).outputs ** T
        if ysize > TABLE_LIMIT:
            raise LimitError(f"relay {v!r} would need a table of {ysize} received blocks")
        tx = transmit_set(v)
        if tx is None:
            xsize = net.alphabet_size(v) ** T
            table = rng.integers(0, xsize, size=ysize, dtype=np.int64)
        else:
            admissible[v] = tx
            table = tx[rng.integers(0, tx.size, size=ysize)]
            rx = typical_set(received_pmf(net, v, dist), T, config.delta)
            # atypical received blocks are outside the scheme; send a fixed block
            mask = np.ones(ysize, dtype=bool)
            mask[rx] = False
            table[mask] = tx[0]
        encoders[v] = table
    return RelayScheme("general", T, M, codebook, encoders, layers, admissible, symbol_base=a_s)


def propagate(net: RelayNetwork, scheme: RelayScheme, messages) -> tuple[dict, dict]:
    """Received and transmitted blocks of every node for each message.

    Returns ``(received, transmitted)``; arrays have a leading message axis.
    """
    messages = np.asarray(messages, dtype=np.int64)
    return _propagate_blocks(net, scheme, scheme.blocks(messages))


def _propagate_blocks(net, scheme, source_blocks):
    n = source_blocks.shape[0]
    T = scheme.block_length
    order = sorted(scheme.layers.levels, key=lambda v: (scheme.layers.levels[v], v))
    rx, tx = {}, {}
    linear = scheme.model == "linear"
    for v in order:
        if linear:
            p, q = net.prime, net.dim
            y = np.zeros((n, T, q), dtype=np.int64)
            for u in sorted(net.in_neighbors(v)):
                y = y + apply_blockwise(net.gains[(u, v)], tx[u])
            y %= p
        else:
            f = net.function(v)
            sizes = [net.alphabet_size(i) for i in f.inputs]
            y = f.evaluate([tx[i] for i in f.inputs], sizes)
            y = np.broadcast_to(y, (n, T)).copy() if y.ndim < 2 else y
        rx[v] = y
        if v == net.source:
            tx[v] = source_blocks
        elif linear:
            F = scheme.encoders[v]
            tx[v] = mulmod(y.reshape(n, T * q), F.array.T, p).reshape(n, T, q)
        else:
            f = net.function(v)
            idx = scheme.encoders[v][_block_index(y, f.outputs)]
            tx[v] = _block_symbols(idx, net.alphabet_size(v), T)
    return rx, tx


def run_trial(net: RelayNetwork, scheme: RelayScheme, w: int, w2: int) -> dict[str, bool]:
    """Whether each node can distinguish messages ``w`` and ``w2``.

    The source always can; every other node compares its received blocks.
    """
    if w == w2:
        raise ValueError("distinguishability needs two different messages")
    for m in (w, w2):
        if not 0 <= m < scheme.messages:
            raise ValueError(f"message index {m} outside [0, {scheme.messages})")
    rx, _ = propagate(net, scheme, [w, w2])
    out = {}
    for v in sorted(rx):
        if v == net.source:
            out[v] = True
        else:
            out[v] = not np.array_equal(rx[v][0], rx[v][1])
    return out


def message_tags(net: RelayNetwork, blocks: int) -> dict[tuple[str, int], frozenset]:
    """Sub-message indices each received block depends on, over ``blocks`` blocks.

    The source sends sub-message ``k`` in block ``k`` and every relay forwards
    in block ``k + 1`` a function of what it received in block ``k``. In a
    layered network every entry is a single index.
    """
    sent = {}
    received = {}
    preds = {v: sorted(net.in_neighbors(v)) for v in net.nodes}
    for k in range(1, blocks + 1):
        for v in net.nodes:
            if v == net.source:
                sent[v, k] = frozenset({k})
            else:
                sent[v, k] = received.get((v, k - 1), frozenset())
        for v in net.nodes:
            tags = frozenset()
            for u in preds[v]:
                tags |= sent[u, k]
            received[v, k] = tags
    return received


# --------------------------------------------------------------------------
# error estimation


@dataclass
class SimulationReport:
    trials: int
    errors: int
    error_rate: float
    union_bound: float
    ci_halfwidth: float
    seed: int
    generator: str
    rate: float
    block_length: int
    messages: int
    mode: str
    min_cut_exponent: dict

    def to_dict(self) -> dict:
        return asdict(self)


def union_bound(net: RelayNetwork, config: SimulationConfig) -> tuple[float, dict]:
    """``M * |cuts| * 2**(-T * min cut value)`` summed over destinations, clipped to 1.

    For the general model the per-cut exponent holds up to sub-exponential
    factors only, so the value is indicative rather than a strict bound.
    """
    from .cutset import linear_capacity, achievable_rate

    T, M = config.block_length, config.messages
    total = 0.0
    exponents = {}
    for d in sorted(net.destinations):
        ncuts = len(enumerate_cuts(net, d))
        if isinstance(net, LinearRelayNetwork):
            bits = linear_capacity(net, d).bits
        else:
            bits = achievable_rate(net, config.distribution, d).bits
        exponents[d] = bits
        total += M * ncuts * 2.0 ** (-T * bits)
    return min(total, 1.0), exponents


def _trial_error(net, config, t) -> bool:
    scheme = build_scheme(net, config, make_rng(config.seed, t))
    if scheme.messages < 2:
        return False
    if scheme.model == "linear":
        received = _linear_received(net, scheme)
    else:
        rx, _ = propagate(net, scheme, np.arange(scheme.messages))
        received = {d: rx[d].reshape(scheme.messages, -1) for d in net.destinations}
    return any(_collides_with_first(received[d]) for d in sorted(net.destinations))


def _linear_received(net, scheme) -> dict:
    """Destination blocks of every codeword through the end-to-end linear map.

    The whole layered network acts linearly on the source block, so pushing
    the unit vectors through once gives the map for all codewords.
    """
    T, q, p = scheme.block_length, net.dim, net.prime
    n = T * q
    basis = np.eye(n, dtype=np.int64).reshape(n, T, q)
    rx, _ = _propagate_blocks(net, scheme, basis)
    out = {}
    for d in net.destinations:
        cols = rx[d].reshape(n, n)  # row k is the image of unit vector k
        if p == 2:
            out[d] = _binary_apply(scheme.codebook_index, cols)[:, None]
        else:
            flat = _block_symbols(scheme.codebook_index, p, n)
            out[d] = mulmod(flat, cols, p)
    return out


def _binary_apply(index: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Apply a linear map over F_2 to packed blocks with byte lookup tables."""
    n = cols.shape[0]
    weights = 1 << np.arange(n - 1, -1, -1, dtype=np.int64)
    images = cols @ weights  # packed image of unit vector k (bit n-1-k of the input)
    y = np.zeros(index.shape, dtype=np.int64)
    for lo in range(0, n, 8):
        bits = list(range(lo, min(lo + 8, n)))  # input bit positions, LSB first
        table = np.zeros(1 << len(bits), dtype=np.int64)
        for b, pos in enumerate(bits):
            img = images[n - 1 - pos]
            table[1 << b:2 << b] = table[:1 << b] ^ img
        y ^= table[(index >> lo) & ((1 << len(bits)) - 1)]
    return y


def _collides_with_first(y: np.ndarray) -> bool:
    """Whether any later row of ``y`` equals row 0."""
    same = np.ones(y.shape[0] - 1, dtype=bool)
    for k in range(y.shape[1]):
        same &= y[1:, k] == y[0, k]
        if not same.any():
            return False
    return bool(same.any())


def estimate_error_rate(net: RelayNetwork, config: SimulationConfig) -> SimulationReport:
    """Monte Carlo error rate of the random scheme with the analytic union bound."""
    layers = require_layers(net)
    work = config.messages * config.trials * max(len(layers.levels), 1) * config.block_length
    if work > WORK_BUDGET:
        raise LimitError(f"simulation work {work} exceeds the budget of {WORK_BUDGET}")
    if config.distribution is not None:
        config.distribution.check(net)

    def chunk(bounds):
        lo, hi = bounds
        return sum(_trial_error(net, config, t) for t in range(lo, hi))

    n, threads = config.trials, max(1, config.threads)
    step = max(1, -(-n // (threads * 4)))
    spans = [(lo, min(lo + step, n)) for lo in range(0, n, step)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            errors = sum(pool.map(chunk, spans))
    else:
        errors = sum(map(chunk, spans))
    rate = errors / n
    bound, exps = union_bound(net, config)
    if isinstance(net, LinearRelayNetwork):
        mode = "linear"
    elif math.isfinite(config.delta):
        mode = f"general/typical(delta={config.delta})"
    else:
        mode = "general/delta=inf"
    return SimulationReport(
        trials=n, errors=int(errors), error_rate=rate, union_bound=bound,
        ci_halfwidth=1.96 * math.sqrt(rate * (1 - rate) / n), seed=config.seed,
        generator=RNG_ID, rate=config.rate, block_length=config.block_length,
        messages=config.messages, mode=mode, min_cut_exponent=exps)


# --------------------------------------------------------------------------
# per-layer exponents


def layer_blocks(net: RelayNetwork, cut) -> list:
    """Per-layer transfer matrices ``G_l`` from ``beta_l`` to ``gamma_l``."""
    if not isinstance(net, LinearRelayNetwork):
        raise ModelError("layer blocks exist only for linear networks")
    layers = require_layers(net)
    top = max(layers.levels.values())
    out = []
    for l in range(1, top + 1):
        beta, gamma, _ = cut_partition(net, cut.omega, l, layers)
        out.append(transfer_between(net, beta, gamma))
    return out


def layer_error_exponent(net: RelayNetwork, cut) -> int:
    """``sum_l rank(G_l)`` over the layers of a layered linear network."""
    return sum(b.rank for b in layer_blocks(net, cut))


def general_layer_exponent(net: RelayNetwork, cut, dist: ProductDistribution) -> float:
    """``sum_l H(Z_l | X_{T_l & complement})`` computed layer by layer, in bits."""
    layers = require_layers(net)
    dist.check(net)
    comp = cut.complement(net)
    total = 0.0
    for l in range(1, max(layers.levels.values()) + 1):
        _, gamma, infl = cut_partition(net, cut.omega, l, layers)
        if gamma:
            total += conditional_entropy(net, dist, gamma, infl & comp)
    return total
