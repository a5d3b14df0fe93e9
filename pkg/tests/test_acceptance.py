"""Acceptance criteria 1-10.

Each test records one ``criterion N: PASS|FAIL`` line, printed in the
terminal summary of the run (and to stdout under ``pytest -s``).
"""

import io
import math
import time

from conftest import ACCEPTANCE
from detflow import cli
from detflow.coding import SimulationConfig, estimate_error_rate, general_layer_exponent, layer_error_exponent
from detflow.cutset import (
    ProductDistribution, entropy_cut_value, enumerate_cuts, linear_capacity, rank_cut_value, transfer_matrix,
)
from detflow.field import make_rng
from detflow.document import dump, dumps, load, loads
from detflow.generators import (
    random_family, random_general_network, random_joint, random_layered_general, random_layered_linear,
    random_linear_network, random_sets,
)
from detflow.submodularity import (
    counting_check, entropy_function, is_nested, k_way_submodularity_check, loop_inequality_check, tilde_sets,
)
from detflow.unfolding import (
    lemma2_check, lift_steady_cut, original_min_cut, unfold, unfolded_cut_value,
    unfolded_min_cut,
)


def record(n, ok, detail, seconds, limit=None):
    timing = f"{seconds:.2f}s" + (f" (limit {limit}s)" if limit else "")
    line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}  [{timing}]"
    ACCEPTANCE[n] = line
    print(line)
    assert ok, line


def test_criterion_01_rank_entropy_equivalence():
    t0 = time.perf_counter()
    worst, cuts, nets = 0.0, 0, 0
    for seed in range(120):
        p, q = (2, 3)[seed % 2], 1 + (seed // 2) % 2
        net = random_linear_network(seed, n_nodes=3 + seed % 3, p=p, q=q)
        dist = ProductDistribution.uniform(net)
        for cut in enumerate_cuts(net, "D"):
            worst = max(worst, abs(entropy_cut_value(net, cut, dist) - rank_cut_value(net, cut)))
            cuts += 1
        nets += 1
    dt = time.perf_counter() - t0
    record(1, worst <= 1e-9 and dt < 60, f"{nets} networks, {cuts} cuts, max |H - rank log p| = {worst:.1e}", dt, 60)


def test_criterion_02_diamond_capacity(tmp_path, diamond):
    path = tmp_path / "diamond.json"
    dump(diamond, path)
    t0 = time.perf_counter()
    out, err = io.StringIO(), io.StringIO()
    code = cli.run(["capacity", str(path), "--list-cuts"], out, err)
    dt = time.perf_counter() - t0
    lines = out.getvalue().splitlines()
    values = [l.split()[-1] for l in lines[1:5]]
    ok = code == 0 and lines[0] == "2.0 bits, min cut {S}" and values == ["2.0", "2.0", "4.0", "2.0"] and dt < 1
    record(2, ok, f"'{lines[0]}', cut values {values}", dt, 1)


def test_criterion_03_union_bound(single_hop):
    t0 = time.perf_counter()
    rep = estimate_error_rate(single_hop, SimulationConfig(1.0, 4, 10_000, seed=2024))
    dt = time.perf_counter() - t0
    se = math.sqrt(rep.union_bound * (1 - rep.union_bound) / rep.trials)
    limit = 0.0625 + 3 * se
    ok = rep.union_bound == 0.0625 and rep.error_rate <= limit and dt < 30
    record(3, ok, f"error rate {rep.error_rate:.4f} <= {limit:.4f} (bound 0.0625 + 3 SE)", dt, 30)


def test_criterion_04_above_capacity(single_hop):
    C = linear_capacity(single_hop).bits
    t0 = time.perf_counter()
    rep = estimate_error_rate(single_hop, SimulationConfig(C + 1, 6, 1000, seed=2024))
    dt = time.perf_counter() - t0
    record(4, rep.error_rate >= 0.9 and dt < 30, f"R = {C + 1:g}, error rate {rep.error_rate:.3f} >= 0.9", dt, 30)


def test_criterion_05_block_diagonal_identity():
    t0 = time.perf_counter()
    bad = cuts = 0
    for seed in range(50):
        net = random_layered_linear(seed, depth=2 + seed % 3, width_max=2, p=(2, 3)[seed % 2], q=1 + seed % 2)
        for cut in enumerate_cuts(net, "D"):
            bad += layer_error_exponent(net, cut) != transfer_matrix(net, cut).rank
            cuts += 1
    dt = time.perf_counter() - t0
    record(5, bad == 0, f"50 layered networks, {cuts} cuts, {bad} mismatches", dt)


def test_criterion_06_unfolded_sandwich(unequal_paths):
    t0 = time.perf_counter()
    C = original_min_cut(unequal_paths)
    checks = violations = 0
    normalized = []
    bracket = True
    for K in range(2, 9):
        rep = lemma2_check(unequal_paths, K, mode="exhaustive")
        checks += rep.checked
        violations += rep.violations + rep.loop_failures
        val = unfolded_min_cut(unfold(unequal_paths, K)).bits / K
        normalized.append(val)
        bracket &= (K - 1) / K * C - 1e-9 <= val <= C + 1e-9
    monotone = all(b >= a - 1e-12 for a, b in zip(normalized, normalized[1:]))
    dt = time.perf_counter() - t0
    ok = violations == 0 and bracket and monotone and dt < 120
    record(6, ok, f"K=2..8, {checks} unfolded cuts, {violations} violations, normalized {normalized}, "
                  f"monotone {monotone}", dt, 120)


def test_criterion_07_steady_lift():
    t0 = time.perf_counter()
    bad = checks = 0
    for seed in range(20):
        net = random_linear_network(seed, n_nodes=3 + seed % 3, q=1 + seed % 2)
        for K in range(1, 6):
            unf = unfold(net, K)
            for cut in enumerate_cuts(net, "D"):
                bad += unfolded_cut_value(unf, lift_steady_cut(unf, cut)) != K * rank_cut_value(net, cut)
                checks += 1
    dt = time.perf_counter() - t0
    record(7, bad == 0, f"20 networks, K=1..5, {checks} lifted cuts, {bad} mismatches", dt)


def test_criterion_08_set_family_suite():
    t0 = time.perf_counter()
    counting = nesting = loop = kway = 0
    worst_loop = worst_kway = math.inf
    for i in range(1000):
        net = random_linear_network(i, n_nodes=5) if i % 2 else random_general_network(i, n_nodes=5)
        fam = random_family(net, 10_000 + i)
        counting += not counting_check(fam).passed
        nesting += not is_nested(tilde_sets(fam.sets))
        sets = random_sets(20_000 + i)
        counting += not counting_check(sets, range(6)).passed
        nesting += not is_nested(tilde_sets(sets))
        rep = loop_inequality_check(net, ProductDistribution.random(net, 30_000 + i), fam)
        loop += not rep.passed
        worst_loop = min(worst_loop, rep.slack)
        h = entropy_function(random_joint(40_000 + i, n_vars=4))
        kr = k_way_submodularity_check(h, random_sets(50_000 + i, ground_size=4, l_max=6))
        kway += kr.slack < -1e-9
        worst_kway = min(worst_kway, kr.slack)
    dt = time.perf_counter() - t0
    ok = counting == nesting == loop == kway == 0 and dt < 180
    record(8, ok, f"failures: counting {counting}, nesting {nesting}, loop {loop} (worst slack {worst_loop:.2e}), "
                  f"k-way {kway} (worst slack {worst_kway:.2e})", dt, 180)


def test_criterion_09_general_layered_identity():
    t0 = time.perf_counter()
    worst, checks = 0.0, 0
    for seed in range(30):
        net = random_layered_general(seed, depth=2 + seed % 3, width_max=2)
        for k in range(3):
            dist = ProductDistribution.random(net, make_rng(900 + seed, k))
            for cut in enumerate_cuts(net, "D"):
                worst = max(worst, abs(general_layer_exponent(net, cut, dist) - entropy_cut_value(net, cut, dist)))
                checks += 1
    dt = time.perf_counter() - t0
    record(9, worst <= 1e-9, f"30 networks x 3 distributions, {checks} cuts, max gap {worst:.1e}", dt)


def _call(argv):
    out, err = io.StringIO(), io.StringIO()
    code = cli.run([str(a) for a in argv], out, err)
    return code, out.getvalue()


def test_criterion_10_cli_contract(tmp_path, monkeypatch, or_network, unequal_paths):
    t0 = time.perf_counter()
    round_trip = 0
    for seed in range(50):
        gens = [random_linear_network, random_general_network, random_layered_linear, random_layered_general]
        net = gens[seed % 4](seed)
        path = tmp_path / f"n{seed}.json"
        dump(net, path)
        text = path.read_bytes()
        again = tmp_path / f"m{seed}.json"
        dump(load(path), again)
        round_trip += text == again.read_bytes() and loads(text) == net and dumps(loads(text)).encode() == text

    layered = tmp_path / "fig.json"
    dump(random_layered_linear(7, depth=3), layered)
    general = tmp_path / "or.json"
    dump(or_network, general)
    unequal = tmp_path / "unequal.json"
    dump(unequal_paths, unequal)
    broken = tmp_path / "broken.json"
    broken.write_text("{")
    codes = {
        0: _call(["capacity", layered])[0],
        1: _call(["capacity"])[0],
        2: _call(["capacity", broken])[0],
        3: _call(["capacity", general])[0],
    }
    with monkeypatch.context() as m:
        m.setenv("DETFLOW_LIMIT_NODES", "2")
        codes[4] = _call(["capacity", layered])[0]
    with monkeypatch.context() as m:
        m.setitem(cli.SUITES, "counting", lambda net, trials, seed: (1, -1.0, trials))
        codes[5] = _call(["verify", layered, "--suite", "counting", "--trials", 2])[0]
    exit_ok = all(k == v for k, v in codes.items())

    commands = [
        ["capacity", layered, "--list-cuts"],
        ["rate", general, "--dist", "ascent:2", "--seed", 3],
        ["simulate", layered, "--rate", 0.5, "--block-length", 4, "--trials", 200, "--seed", 11],
        ["converge", unequal, "--max-stages", 4],
        ["unfold", unequal, "--stages", 2],
        ["verify", layered, "--suite", "loop", "--trials", 20, "--seed", 5],
    ]
    reproducible = 0
    for argv in commands:
        for mode in ([], ["--json"]):
            outs = [_call([*argv, *mode, "--threads", t]) for t in (1, 4, 1)]
            reproducible += len({o for _, o in outs}) == 1 and all(c == 0 for c, _ in outs)
    dt = time.perf_counter() - t0
    ok = round_trip == 50 and exit_ok and reproducible == 2 * len(commands)
    record(10, ok, f"round trips {round_trip}/50, exit codes {codes}, "
                   f"reproducible reports {reproducible}/{2 * len(commands)}", dt)
