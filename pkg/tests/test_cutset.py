import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from detflow.cutset import (
    Cut, ProductDistribution, achievable_rate, conditional_entropy, crosses_unbounded, entropy_cut_value,
    enumerate_cuts, joint_entropy, linear_capacity, optimize_distribution, rank_cut_value, transfer_matrix,
)
from detflow.errors import LimitError, ModelError
from detflow.field import FieldMatrix
from detflow.generators import random_general_network, random_linear_network
from detflow.network import GeneralRelayNetwork, LinearRelayNetwork, NodeFunction

from conftest import eye, linear
from oracles import brute_capacity, entropy_oracle, rank_by_image, transfer_dense

seeds = st.integers(0, 10**6)


def test_two_node_network_has_one_cut():
    net = linear("SD", {("S", "D"): [[1]]})
    assert [c.omega for c in enumerate_cuts(net, "D")] == [frozenset({"S"})]


def test_enumeration_order(diamond):
    assert [c.label() for c in enumerate_cuts(diamond, "D")] == ["{S}", "{A,S}", "{B,S}", "{A,B,S}"]


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(2, 6))
def test_enumeration_covers_every_cut(seed, n):
    net = random_linear_network(seed, n_nodes=n)
    cuts = enumerate_cuts(net, "D")
    assert len(cuts) == 2 ** (n - 2) == len({c.omega for c in cuts})
    assert all("S" in c.omega and "D" not in c.omega for c in cuts)


def test_enumeration_limit(diamond, monkeypatch):
    monkeypatch.setenv("DETFLOW_LIMIT_NODES", "3")
    with pytest.raises(LimitError):
        enumerate_cuts(diamond, "D")


def test_unknown_destination(diamond):
    with pytest.raises(ModelError):
        enumerate_cuts(diamond, "A")


def test_diamond_cut_values(diamond):
    values = [rank_cut_value(diamond, c) for c in enumerate_cuts(diamond, "D")]
    assert values == [2.0, 2.0, 4.0, 2.0]
    res = linear_capacity(diamond)
    assert res.bits == 2.0 and res.min_cut.omega == {"S"}


def test_transfer_matrix_layout(diamond):
    tm = transfer_matrix(diamond, Cut(frozenset({"S", "A"}), "D"))
    assert tm.transmitters == ("A", "S") and tm.receivers == ("B", "D")
    assert tm.matrix.tolist() == [[0, 0, 1, 0], [0, 0, 0, 0], [1, 0, 0, 0], [0, 0, 0, 0]]


def test_no_crossing_edges_is_zero():
    net = linear("SAD", {("S", "A"): [[1]]})
    assert rank_cut_value(net, Cut(frozenset({"S", "A"}), "D")) == 0.0
    assert linear_capacity(net).bits == 0.0


def test_prime_scales_bits():
    net = linear("SD", {("S", "D"): [[1, 0], [0, 1]]}, p=5, q=2)
    assert linear_capacity(net).bits == pytest.approx(2 * math.log2(5))


def test_unbounded_edge_makes_cut_infinite():
    net = linear("SAD", {("S", "A"): [[1]], ("A", "D"): [[1]]}, unbounded=frozenset({("S", "A")}))
    cut = Cut(frozenset({"S"}), "D")
    assert crosses_unbounded(net, cut.omega)
    assert rank_cut_value(net, cut) == math.inf
    assert linear_capacity(net).bits == 1.0


@settings(max_examples=60, deadline=None)
@given(seeds, st.integers(3, 5), st.sampled_from([(2, 1), (2, 2), (3, 1)]))
def test_capacity_matches_brute_force(seed, n, pq):
    p, q = pq
    net = random_linear_network(seed, n_nodes=n, p=p, q=q)
    assert linear_capacity(net).bits == pytest.approx(brute_capacity(net), abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_cut_rank_matches_image_count(seed):
    net = random_linear_network(seed, n_nodes=4, q=2)
    for cut in enumerate_cuts(net, "D"):
        expect = rank_by_image(transfer_dense(net, cut.omega), 2)
        assert rank_cut_value(net, cut) == expect


def test_multicast_takes_worst_destination():
    net = linear(["S", "A", "D1", "D2"],
                 {("S", "A"): eye(2), ("A", "D1"): eye(2), ("A", "D2"): [[1, 0], [0, 0]]},
                 q=2, dests=("D1", "D2"))
    res = linear_capacity(net)
    assert res.per_destination["D1"][0] == 2.0
    assert res.per_destination["D2"][0] == 1.0
    assert res.bits == 1.0
    assert linear_capacity(net, destination="D1").bits == 2.0


def test_threads_do_not_change_results():
    net = random_linear_network(11, n_nodes=6, q=2)
    a, b = linear_capacity(net), linear_capacity(net, threads=4)
    assert a.bits == b.bits and a.per_destination == b.per_destination
    assert [c.bits for c in a.cut_values["D"]] == [c.bits for c in b.cut_values["D"]]


# adding a single edge can lower the linear capacity: the new signal at R1
# interferes with what R1 already receives from S
_BASE = {("R1", "D"): [[0, 1], [1, 1]], ("R1", "R2"): [[1, 1], [1, 1]],
         ("R2", "R3"): [[1, 0], [0, 0]], ("R3", "D"): [[1, 0], [0, 0]], ("R3", "R1"): [[1, 1], [1, 0]],
         ("S", "R1"): [[1, 1], [1, 1]], ("S", "R2"): [[1, 0], [1, 1]], ("S", "R3"): [[1, 1], [0, 0]]}


def test_added_edge_can_reduce_capacity():
    nodes = ["S", "R1", "R2", "R3", "D"]
    before = linear(nodes, _BASE, q=2)
    after = linear(nodes, {**_BASE, ("R2", "R1"): [[1, 0], [1, 0]]}, q=2)
    assert linear_capacity(before).bits == brute_capacity(before) == 2.0
    assert linear_capacity(after).bits == brute_capacity(after) == 1.0


@settings(max_examples=40, deadline=None)
@given(seeds, st.data())
def test_edge_into_silent_node_never_hurts(seed, data):
    # a node with no in-edges sends nothing useful, so every cut can only grow
    net = random_linear_network(seed, n_nodes=5, q=2)
    gains = dict(net.gains)
    gains[("X", data.draw(st.sampled_from(["R1", "R2", "D"])))] = FieldMatrix(2, eye(2))
    grown = LinearRelayNetwork(net.nodes + ("X",), "S", ("D",), 2, 2, gains)
    assert linear_capacity(grown).bits >= linear_capacity(net).bits


# --------------------------------------------------------------------------
# entropy engine


def test_or_network(or_network):
    dist = ProductDistribution.uniform(or_network)
    h = entropy_cut_value(or_network, Cut(frozenset({"S"}), "D"), dist)
    assert h == pytest.approx(0.8112781244591328, abs=1e-12)
    assert optimize_distribution(or_network, "grid", resolution=4).bits == pytest.approx(1.0)


def test_or_network_ascent_reaches_one_bit(or_network):
    res = optimize_distribution(or_network, "ascent", restarts=2, seed=3)
    assert res.bits == pytest.approx(1.0, abs=1e-3)
    assert res.label == "certified achievable lower bound"


def test_diamond_uniform_rate(diamond):
    assert achievable_rate(diamond).bits == pytest.approx(2.0, abs=1e-12)


def test_linear_uniform_is_optimal(diamond):
    for method in ("uniform", "grid"):
        assert optimize_distribution(diamond, method, resolution=2).bits == pytest.approx(2.0, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(seeds, st.sampled_from([(2, 1), (3, 1), (2, 2)]))
def test_rank_and_entropy_agree(seed, pq):
    p, q = pq
    net = random_linear_network(seed, n_nodes=4, p=p, q=q)
    dist = ProductDistribution.uniform(net)
    for cut in enumerate_cuts(net, "D"):
        assert entropy_cut_value(net, cut, dist) == pytest.approx(rank_cut_value(net, cut), abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(seeds, seeds)
def test_any_distribution_stays_below_capacity(seed, dseed):
    net = random_linear_network(seed, n_nodes=4, q=2)
    dist = ProductDistribution.random(net, dseed)
    assert achievable_rate(net, dist).bits <= linear_capacity(net).bits + 1e-9


@settings(max_examples=40, deadline=None)
@given(seeds, seeds, st.integers(0, 3))
def test_entropy_matches_oracle(seed, dseed, mask):
    net = random_general_network(seed, n_nodes=4)
    dist = ProductDistribution.random(net, dseed)
    pmfs = {v: dist.pmf(v) for v in net.nodes}
    free = ["R1", "R2"]
    comp = {"D"} | {v for k, v in enumerate(free) if mask >> k & 1}
    assert conditional_entropy(net, dist, comp, comp) == pytest.approx(
        entropy_oracle(net, pmfs, comp, comp), abs=1e-9)
    omega = set(net.nodes) - comp
    assert conditional_entropy(net, dist, comp, omega) == pytest.approx(
        entropy_oracle(net, pmfs, comp, omega), abs=1e-9)


def test_joint_entropy_of_inputs():
    net = random_general_network(4, n_nodes=4, alphabet_max=3)
    dist = ProductDistribution.random(net, 9)
    total = sum(joint_entropy(net, dist, xs=[v]) for v in net.nodes)
    assert joint_entropy(net, dist, xs=net.nodes) == pytest.approx(total, abs=1e-12)


@pytest.mark.parametrize("pmfs, message", [
    ({"S": [0.5, 0.6], "D": [1.0]}, "sum"),
    ({"S": [1.0], "D": [1.0]}, "alphabet"),
    ({"S": [1.5, -0.5], "D": [1.0]}, "negative"),
])
def test_distribution_checks(pmfs, message):
    net = GeneralRelayNetwork(("S", "D"), "S", ("D",), {"S": 2, "D": 1},
                              {"D": NodeFunction(("S",), (0, 1), 2)})
    with pytest.raises(ValueError, match=message):
        ProductDistribution(pmfs).check(net)


def test_entropy_engine_limit(monkeypatch):
    net = random_general_network(1, n_nodes=4, alphabet_max=3)
    monkeypatch.setenv("DETFLOW_LIMIT_SUPPORT", "4")
    with pytest.raises(LimitError):
        achievable_rate(net)


def test_general_network_rejected_by_rank_engine(or_network):
    with pytest.raises(ModelError):
        linear_capacity(or_network)
