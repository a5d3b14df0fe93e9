"""Tilde families and the entropy inequalities built on them.

For sets ``V_1 .. V_l`` the tilde set ``V~_k`` is the union of all k-wise
intersections, i.e. everything that lies in at least ``k`` of the sets. The
checks here compute each side independently so they can serve as oracles.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable, Sequence

import numpy as np

from .cutset import ProductDistribution, conditional_entropy, joint_entropy
from .errors import LimitError, NetworkError
from .network import RelayNetwork

MAX_FAMILY = 20
TOL = 1e-9


@dataclass(frozen=True)
class SubsetFamily:
    """Ordered family of distinct subsets of ``ground``.

    When ``anchor`` is given every subset must contain it; ``excluded`` must
    be in none of them. For a network the ground set is ``V - {S}``, the
    anchor is the destination and the excluded node is the source, so each
    subset is the complement side of a cut.
    """

    sets: tuple
    ground: frozenset
    anchor: Hashable | None = None
    excluded: Hashable | None = None

    def __post_init__(self):
        sets = tuple(frozenset(s) for s in self.sets)
        object.__setattr__(self, "sets", sets)
        object.__setattr__(self, "ground", frozenset(self.ground))
        if not sets:
            raise ValueError("a family needs at least one subset")
        if len(set(sets)) != len(sets):
            raise ValueError("family subsets must be pairwise distinct")
        for s in sets:
            if not s <= self.ground:
                raise ValueError(f"subset {sorted(map(str, s))} leaves the ground set")
            if self.anchor is not None and self.anchor not in s:
                raise ValueError(f"every subset must contain {self.anchor!r}")
            if self.excluded is not None and self.excluded in s:
                raise ValueError(f"no subset may contain {self.excluded!r}")

    @classmethod
    def for_network(cls, net: RelayNetwork, sets: Iterable, destination: str | None = None):
        d = destination or sorted(net.destinations)[0]
        if d not in net.destinations:
            raise NetworkError(f"{d!r} is not a destination")
        ground = frozenset(v for v in net.nodes if v != net.source)
        return cls(tuple(sets), ground, d, net.source)

    @property
    def l(self) -> int:
        return len(self.sets)

    def canonical(self) -> tuple:
        """Order-free key: the subsets as sorted tuples, sorted."""
        return tuple(sorted(tuple(sorted(map(str, s))) for s in self.sets))


def tilde_sets(sets: Sequence[Iterable]) -> list[frozenset]:
    """``V~_k`` for ``k = 1 .. l`` by enumerating every k-element index set."""
    sets = [frozenset(s) for s in sets]
    l = len(sets)
    if l > MAX_FAMILY:
        raise LimitError(f"families of {l} subsets exceed the limit of {MAX_FAMILY}")
    out = []
    for k in range(1, l + 1):
        acc = set()
        for idx in itertools.combinations(range(l), k):
            acc |= frozenset.intersection(*(sets[i] for i in idx))
        out.append(frozenset(acc))
    return out


def build_tilde_family(fam: SubsetFamily) -> list[frozenset]:
    return tilde_sets(fam.sets)


def is_nested(tilde: Sequence[frozenset]) -> bool:
    """``V~_l <= ... <= V~_1``."""
    return all(b <= a for a, b in zip(tilde, tilde[1:]))


@dataclass
class CountingReport:
    counts: dict
    passed: bool


def counting_check(fam: SubsetFamily | Sequence[Iterable], ground: Iterable | None = None) -> CountingReport:
    """Membership counts of every ground element in the family and in its tilde family."""
    if isinstance(fam, SubsetFamily):
        sets, ground = fam.sets, fam.ground
    else:
        sets = [frozenset(s) for s in fam]
        ground = frozenset(ground) if ground is not None else frozenset().union(*sets)
    tilde = tilde_sets(sets)
    counts = {}
    for v in sorted(ground, key=str):
        a = sum(v in s for s in sets)
        b = sum(v in t for t in tilde)
        counts[v] = (a, b, a == b)
    return CountingReport(counts, all(ok for _, _, ok in counts.values()))


def psi(net: RelayNetwork, dist: ProductDistribution, V1, V2) -> float:
    """``H(Y_V2 | X_V1)`` in bits."""
    return conditional_entropy(net, dist, V2, V1)


@dataclass
class InequalityReport:
    lhs: float
    rhs: float
    details: dict = field(default_factory=dict)

    @property
    def slack(self) -> float:
        return self.lhs - self.rhs

    @property
    def passed(self) -> bool:
        return self.slack >= -TOL and all(self.details.get(k, True) for k in
                                          ("composite_identity", "kway_passed", "x_identity"))


def composite_sets(sets: Sequence[frozenset]) -> list[frozenset]:
    """``W_i = {Y_v : v in V_i} | {X_v : v in V_(i-1)}`` with ``V_0 = V_l``."""
    l = len(sets)
    return [frozenset({("Y", v) for v in sets[i]} | {("X", v) for v in sets[i - 1]})
            for i in range(l)]


def loop_inequality_check(net: RelayNetwork, dist: ProductDistribution, fam: SubsetFamily) -> InequalityReport:
    """Cyclic sum of ``psi(V_i, V_(i+1))`` against the sum of ``psi(V~_i, V~_i)``.

    ``details`` also records the steps of the argument: the tilde family of
    the composite sets ``W_i`` equals ``{Y_V~_i, X_V~_i}``, joint entropy is
    k-way submodular on the ``W_i``, and the input entropies sum to the same
    total over the family and over its tilde family.
    """
    if not isinstance(dist, ProductDistribution):
        raise TypeError("the loop inequality needs a product distribution")
    dist.check(net)
    V = fam.sets
    l = len(V)
    tilde = build_tilde_family(fam)
    lhs = sum(psi(net, dist, V[i], V[(i + 1) % l]) for i in range(l))
    rhs = sum(psi(net, dist, t, t) for t in tilde)

    W = composite_sets(V)
    Wt = tilde_sets(W)
    composite_ok = all(Wt[r] == frozenset({("Y", v) for v in tilde[r]} | {("X", v) for v in tilde[r]})
                       for r in range(l))

    def h(ws):
        return joint_entropy(net, dist, ys=[v for t, v in ws if t == "Y"],
                             xs=[v for t, v in ws if t == "X"])

    kway = k_way_submodularity_check(h, W)
    hx_family = sum(joint_entropy(net, dist, xs=s) for s in V)
    hx_tilde = sum(joint_entropy(net, dist, xs=t) for t in tilde)
    details = dict(tilde=tilde, composite_identity=composite_ok, kway_slack=kway.slack,
                   kway_passed=kway.slack >= -TOL, x_identity=abs(hx_family - hx_tilde) <= TOL,
                   x_identity_gap=hx_family - hx_tilde)
    return InequalityReport(lhs, rhs, details)


def k_way_submodularity_check(set_function: Callable[[frozenset], float],
                              family: Sequence[Iterable]) -> InequalityReport:
    """``sum xi(V_i) >= sum xi(V~_i)`` for a submodular ``xi``."""
    sets = [frozenset(s) for s in family]
    tilde = tilde_sets(sets)
    lhs = float(sum(set_function(s) for s in sets))
    rhs = float(sum(set_function(t) for t in tilde))
    return InequalityReport(lhs, rhs, {"tilde": tilde})


# --------------------------------------------------------------------------
# explicit joint distributions


def _entropy(p: np.ndarray) -> float:
    p = p[p > 1e-15]
    return float(-(p * np.log2(p)).sum())


def subset_entropy(joint: np.ndarray, subset: Iterable[int]) -> float:
    """Entropy of the marginal of ``joint`` on the axes in ``subset``."""
    keep = sorted(set(subset))
    if not keep:
        return 0.0
    drop = tuple(a for a in range(joint.ndim) if a not in keep)
    return _entropy(np.asarray(joint.sum(axis=drop) if drop else joint).ravel())


def entropy_function(joint: np.ndarray) -> Callable[[frozenset], float]:
    """Set function ``A -> H(X_A)`` of a joint pmf array (one axis per variable)."""
    joint = np.asarray(joint, dtype=float)
    if joint.min() < 0 or not math.isclose(joint.sum(), 1.0, abs_tol=1e-9):
        raise ValueError("joint pmf must be non-negative and sum to 1")
    cache = {}

    def h(subset):
        key = frozenset(subset)
        if key not in cache:
            cache[key] = subset_entropy(joint, key)
        return cache[key]

    return h


def product_joint(pmfs: Sequence) -> np.ndarray:
    """Joint pmf array of independent variables (outer product of marginals)."""
    out = np.ones(())
    for p in pmfs:
        out = np.multiply.outer(out, np.asarray(p, dtype=float))
    return out


def entropy_sum_identity(pmfs: Sequence, family: Sequence[Iterable]) -> InequalityReport:
    """``sum H(X_V_i) = sum H(X_V~_i)`` for independent variables.

    Each entropy is taken from the explicit joint distribution, not from the
    sum of marginal entropies, so the two sides are computed separately.
    """
    h = entropy_function(product_joint(pmfs))
    return k_way_submodularity_check(h, family)
