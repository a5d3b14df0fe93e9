import math

import pytest
from hypothesis import given, settings, strategies as st

from detflow.cutset import ProductDistribution, achievable_rate, enumerate_cuts, linear_capacity, rank_cut_value
from detflow.errors import LimitError
from detflow.generators import random_general_network, random_linear_network
from detflow.network import layer_structure, reachable_from
from detflow.unfolding import (
    UnfoldedCut, convergence_report, enumerate_unfolded_cuts, lemma2_check, lift_distribution,
    lift_steady_cut, loop_decomposition, original_min_cut, unfold, unfolded_cut_value, unfolded_min_cut,
)

from conftest import linear

seeds = st.integers(0, 10**6)


def test_construction(unequal_paths):
    unf = unfold(unequal_paths, 2)
    stage_nodes = [v for v in unf.network.nodes if unf.stage(v) is not None]
    assert len(stage_nodes) == 9
    crossing = {e for e in unf.network.edges if unf.stage(e[0]) is not None and unf.stage(e[1]) is not None}
    assert crossing == {(f"{u}[{i}]", f"{v}[{i + 1}]") for i in (0, 1)
                        for u, v in [("S", "D"), ("S", "A"), ("A", "D")]}
    assert unf.origin_of("A[1]") == "A" and unf.stage("A[1]") == 1
    assert unf.super_source == "*S" and unf.super_destinations == {"D": "*D"}
    assert unf.network.destinations == ("*D",)


def test_self_loop_crosses_stages():
    net = linear("SAD", {("S", "A"): [[1]], ("A", "A"): [[1]], ("A", "D"): [[1]]})
    unf = unfold(net, 3)
    assert {("A[0]", "A[1]"), ("A[1]", "A[2]"), ("A[2]", "A[3]")} <= set(unf.network.edges)
    assert not any(unf.stage(u) == unf.stage(v) for u, v in unf.network.edges if unf.stage(u) is not None
                   and unf.stage(v) is not None)


@settings(max_examples=25, deadline=None)
@given(seeds, st.integers(1, 4))
def test_emitted_network_is_layered(seed, K):
    net = random_linear_network(seed, n_nodes=4)
    unf = unfold(net, K)
    ls = layer_structure(unf.network)
    assert ls.layered
    if "*D" in reachable_from(unf.network, "*S"):
        assert ls.levels["*D"] == K + 2
    # buffers carry nothing but may never be cut
    for e in unf.network.unbounded:
        assert not unf.network.gains[e].array.any() or unf.stage(e[0]) is not None


def test_rejects_bad_stage_count(two_hop):
    with pytest.raises(ValueError):
        unfold(two_hop, 0)


def test_node_limit(two_hop, monkeypatch):
    monkeypatch.setenv("DETFLOW_LIMIT_UNFOLD_NODES", "10")
    with pytest.raises(LimitError):
        unfold(two_hop, 3)


def test_cut_validity(unequal_paths):
    unf = unfold(unequal_paths, 2)
    ok = UnfoldedCut("D", (frozenset("S"), frozenset("SA"), frozenset("S")))
    bad = UnfoldedCut("D", (frozenset("S"), frozenset("SD"), frozenset("S")))
    assert ok.is_valid(unequal_paths) and ok.kind == "wiggling"
    assert ok.label() == "{S} | {A,S} | {S}"
    assert unfolded_cut_value(unf, bad) == math.inf
    assert rank_cut_value(unf.network, bad.as_cut(unf)) == math.inf


def test_unequal_paths_frozen(unequal_paths):
    # C = 1 bit; every K has unfolded min cut K with a steady minimiser
    for K in range(1, 9):
        res = unfolded_min_cut(unfold(unequal_paths, K))
        assert res.bits == K and res.cut.steady


def test_two_hop_wiggles(two_hop):
    rep = convergence_report(two_hop, range(1, 7))
    assert [r.unfolded for r in rep.rows] == [0, 1, 2, 3, 4, 5]
    assert rep.wiggling_argmins == [1, 2, 3, 4, 5, 6]
    assert rep.monotone and rep.within_bracket
    assert rep.rows[0].argmin == "{S} | {A,S}"


@settings(max_examples=25, deadline=None)
@given(seeds, st.integers(1, 3))
def test_steady_lift_scales(seed, K):
    net = random_linear_network(seed, n_nodes=4, q=2)
    unf = unfold(net, K)
    for cut in enumerate_cuts(net, "D"):
        lifted = lift_steady_cut(unf, cut)
        assert lifted.steady
        assert unfolded_cut_value(unf, lifted) == pytest.approx(K * rank_cut_value(net, cut))


@settings(max_examples=25, deadline=None)
@given(seeds, st.integers(1, 4))
def test_exhaustive_and_dp_agree(seed, K):
    net = random_linear_network(seed, n_nodes=4)
    unf = unfold(net, K)
    a = unfolded_min_cut(unf, method="exhaustive")
    b = unfolded_min_cut(unf, method="dp")
    assert a.bits == b.bits and a.cut == b.cut
    brute = min(unfolded_cut_value(unf, c) for c in enumerate_unfolded_cuts(unf, "D"))
    assert a.bits == brute


@settings(max_examples=15, deadline=None)
@given(seeds, st.integers(1, 2))
def test_matches_capacity_of_emitted_network(seed, K):
    net = random_linear_network(seed, n_nodes=4)
    unf = unfold(net, K)
    assert unfolded_min_cut(unf).bits == linear_capacity(unf.network).bits


@settings(max_examples=10, deadline=None)
@given(seeds, seeds)
def test_entropy_engine_matches_emitted_network(seed, dseed):
    net = random_general_network(seed, n_nodes=3, alphabet_max=2)
    dist = ProductDistribution.random(net, dseed)
    unf = unfold(net, 1)
    got = unfolded_min_cut(unf, dist).bits
    assert got == pytest.approx(achievable_rate(unf.network, lift_distribution(unf, dist)).bits, abs=1e-9)


@settings(max_examples=25, deadline=None)
@given(seeds, st.integers(1, 4))
def test_sandwich(seed, K):
    net = random_linear_network(seed, n_nodes=4)
    C = original_min_cut(net)
    L = 2 ** (len(net.nodes) - 2)
    val = unfolded_min_cut(unfold(net, K)).bits
    assert (K - L + 1) * C - 1e-9 <= val <= K * C + 1e-9


@settings(max_examples=20, deadline=None)
@given(seeds, st.integers(1, 5))
def test_lower_bound_holds_exhaustively(seed, K):
    net = random_linear_network(seed, n_nodes=4)
    rep = lemma2_check(net, K, mode="exhaustive")
    assert rep.passed and rep.checked == 4 ** (K + 1)
    assert rep.vacuous == (K - 3 <= 0)


def test_lower_bound_steady_slack(unequal_paths):
    rep = lemma2_check(unequal_paths, 4, keep_entries=True)
    for e in rep.entries:
        if e.cut.steady:
            # K * c - (K - L + 1) * C with L = 2
            assert e.slack == pytest.approx(e.value - 3 * rep.min_cut)
    assert rep.passed and rep.mode == "exhaustive"


def test_lower_bound_sampled_mode(fig1):
    rep = lemma2_check(fig1, 6, mode="sampled", samples=200, seed=1)
    assert rep.mode == "sampled" and rep.checked == 200 and rep.passed


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 5), min_size=1, max_size=20))
def test_loop_decomposition_accounts_for_every_step(walk):
    loops, path = loop_decomposition(walk)
    assert len(set(path)) == len(path)
    assert all(len(set(lp)) == len(lp) for lp in loops)
    assert sum(len(lp) for lp in loops) + len(path) - 1 == len(walk) - 1
    assert path[0] == walk[0] and path[-1] == walk[-1]


def test_exhaustive_limit(fig1):
    with pytest.raises(LimitError):
        unfolded_min_cut(unfold(fig1, 4), method="exhaustive")
    assert unfolded_min_cut(unfold(fig1, 4)).method == "dp"
