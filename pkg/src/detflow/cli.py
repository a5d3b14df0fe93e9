"""Command line interface.

Exit codes: 0 success, 1 usage error, 2 document syntax or schema error,
3 semantic error, 4 resource limit, 5 verification failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

from . import __version__
from .coding import SimulationConfig, estimate_error_rate
from .cutset import (
    ProductDistribution,
    achievable_rate,
    linear_capacity,
    optimize_distribution,
    entropy_cut_value,
    enumerate_cuts,
    rank_cut_value,
)
from .document import canonical_json, dumps, load, to_document
from .errors import DetflowError, ModelError
from .field import RNG_ID, make_rng
from .network import LinearRelayNetwork
from .unfolding import convergence_report, lemma2_check, unfold, unfolded_min_cut

EXIT_OK, EXIT_USAGE, EXIT_DOCUMENT, EXIT_SEMANTIC, EXIT_LIMIT, EXIT_VERIFY = range(6)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def fmt_bits(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    x = round(float(x), 12) + 0.0  # drops negative zero
    if x.is_integer():
        return repr(float(x))
    return f"{x:.9f}"


def _num(x):
    """JSON-safe number: infinities become the string ``"inf"``."""
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    return x


# --------------------------------------------------------------------------
# commands; each returns (report dict, human text lines, exit code)


def cmd_capacity(args):
    net = load(args.file)
    if not isinstance(net, LinearRelayNetwork):
        raise ModelError("capacity needs a linear network; use 'rate' for general networks")
    res = linear_capacity(net, args.destination, threads=args.threads)
    best = res.min_cut
    report = {"bits": res.bits, "min_cut": sorted(best.omega), "destination": best.destination,
              "per_destination": {d: {"bits": b, "min_cut": sorted(c.omega)}
                                  for d, (b, c) in res.per_destination.items()}}
    lines = [f"{fmt_bits(res.bits)} bits, min cut {best.label()}"]
    if args.list_cuts:
        report["cuts"] = [{"destination": d, "omega": sorted(cv.cut.omega), "bits": _num(cv.bits),
                           "rank": cv.rank} for d, vals in res.cut_values.items() for cv in vals]
        for d, vals in res.cut_values.items():
            for cv in vals:
                lines.append(f"  {d}  {cv.cut.label():<24} {fmt_bits(cv.bits)}")
    return report, lines, EXIT_OK


def _parse_dist(spec: str):
    name, _, arg = spec.partition(":")
    if name == "uniform" and not arg:
        return "uniform", {}
    if name in ("grid", "ascent"):
        try:
            n = int(arg)
        except ValueError:
            raise UsageError(f"--dist {name}:N needs an integer, got {arg!r}") from None
        if n < 1:
            raise UsageError(f"--dist {name}:N needs N >= 1")
        return name, {"resolution": n} if name == "grid" else {"restarts": n}
    raise UsageError(f"unknown --dist {spec!r}; use uniform, grid:R or ascent:RESTARTS")


def cmd_rate(args):
    method, kw = _parse_dist(args.dist)
    net = load(args.file)
    opt = optimize_distribution(net, method, seed=args.seed, destination=args.destination,
                                threads=args.threads, **kw)
    res = achievable_rate(net, opt.distribution, args.destination)
    best = res.min_cut
    report = {"bits": opt.bits, "method": opt.method, "label": opt.label, "evaluations": opt.evaluations,
              "distribution": opt.distribution.to_dict(), "min_cut": sorted(best.omega),
              "destination": best.destination}
    lines = [f"{fmt_bits(opt.bits)} bits ({opt.label}, {opt.method}), min cut {best.label()}"]
    for v, pmf in opt.distribution.to_dict().items():
        lines.append(f"  p({v}) = [" + ", ".join(f"{x:.9f}" for x in pmf) + "]")
    return report, lines, EXIT_OK


def cmd_simulate(args):
    net = load(args.file)
    cfg = SimulationConfig(args.rate, args.block_length, args.trials, args.seed,
                           math.inf if args.delta is None else args.delta, None, args.threads)
    rep = estimate_error_rate(net, cfg)
    report = {k: _num(v) for k, v in rep.to_dict().items() if k not in ("seed", "generator")}
    lines = [f"error rate {rep.error_rate:.6f} ({rep.errors}/{rep.trials}) +/- {rep.ci_halfwidth:.6f}",
             f"union bound {rep.union_bound:.6f}  messages {rep.messages}  mode {rep.mode}"]
    return report, lines, EXIT_OK


def _engine(net):
    return "rank" if isinstance(net, LinearRelayNetwork) else ProductDistribution.uniform(net)


def cmd_unfold(args):
    if args.stages < 1:
        raise UsageError("--stages must be at least 1")
    net = load(args.file)
    unf = unfold(net, args.stages)
    res = unfolded_min_cut(unf, _engine(net), method="dp")
    report = {"stages": unf.K, "nodes": len(unf.network.nodes), "edges": len(unf.network.edges),
              "unfolded_min_cut": res.bits, "normalized": res.bits / unf.K,
              "argmin": [sorted(s) for s in res.cut.stages], "argmin_kind": res.cut.kind}
    lines = [f"{unf.K} stages: {len(unf.network.nodes)} nodes, {len(unf.network.edges)} edges",
             f"unfolded min cut {fmt_bits(res.bits)} bits ({fmt_bits(res.bits / unf.K)} per stage), "
             f"{res.cut.kind} argmin {res.cut.label()}"]
    text = dumps(unf.network)
    if args.emit:
        Path(args.emit).write_text(text, encoding="utf-8")
        report["emitted"] = str(args.emit)
        lines.append(f"unfolded document written to {args.emit}")
    else:
        report["document"] = to_document(unf.network)
        lines.append(text.rstrip("\n"))
    return report, lines, EXIT_OK


def cmd_converge(args):
    if args.max_stages < 1:
        raise UsageError("--max-stages must be at least 1")
    net = load(args.file)
    rep = convergence_report(net, range(1, args.max_stages + 1), _engine(net))
    rows = [{"K": r.K, "unfolded": r.unfolded, "normalized": r.normalized, "lower": r.lower,
             "upper": r.upper, "argmin_kind": r.argmin_kind} for r in rep.rows]
    report = {"min_cut": rep.min_cut, "L": rep.L, "rows": rows, "monotone": rep.monotone,
              "within_bracket": rep.within_bracket, "wiggling_argmins": rep.wiggling_argmins}
    lines = [f"{'K':>3} {'unfolded':>14} {'normalized':>14} {'lower':>14} {'upper':>14}  argmin"]
    for r in rep.rows:
        lines.append(f"{r.K:>3} {fmt_bits(r.unfolded):>14} {fmt_bits(r.normalized):>14} "
                     f"{fmt_bits(r.lower):>14} {fmt_bits(r.upper):>14}  {r.argmin_kind}")
    lines.append(f"monotone: {rep.monotone}  within bracket: {rep.within_bracket}")
    return report, lines, EXIT_OK


# --------------------------------------------------------------------------
# verify suites; each returns (failures, worst slack, checks run)


def _suite_counting(net, trials, seed):
    from .generators import random_family
    from .submodularity import build_tilde_family, counting_check, is_nested
    fails, worst = 0, math.inf
    for t in range(trials):
        fam = random_family(net, make_rng(seed, t))
        rep = counting_check(fam)
        tilde = build_tilde_family(fam)
        ok = rep.passed and is_nested(tilde) and all(fam.anchor in s and fam.excluded not in s for s in tilde)
        fails += not ok
        worst = min(worst, min(b - a for a, b, _ in rep.counts.values()) if ok else -1)
    return fails, worst, trials


def _suite_loop(net, trials, seed):
    from .generators import random_family
    from .submodularity import loop_inequality_check
    fails, worst = 0, math.inf
    for t in range(trials):
        rng = make_rng(seed, t)
        fam = random_family(net, rng)
        rep = loop_inequality_check(net, ProductDistribution.random(net, rng), fam)
        fails += not rep.passed
        worst = min(worst, rep.slack)
    return fails, worst, trials


def _suite_kway(net, trials, seed):
    from .cutset import joint_entropy
    from .generators import random_family
    from .submodularity import k_way_submodularity_check
    fails, worst = 0, math.inf
    for t in range(trials):
        rng = make_rng(seed, t)
        dist = ProductDistribution.random(net, rng)
        fam = random_family(net, rng)
        rep = k_way_submodularity_check(lambda s: joint_entropy(net, dist, ys=s), fam.sets)
        fails += not rep.passed
        worst = min(worst, rep.slack)
    return fails, worst, trials


def _suite_lemma2(net, trials, seed):
    fails, worst, checked = 0, math.inf, 0
    for t in range(trials):
        rng = make_rng(seed, t)
        engine = "rank" if isinstance(net, LinearRelayNetwork) else ProductDistribution.random(net, rng)
        K = 1 + t % 6
        rep = lemma2_check(net, K, engine, samples=64, seed=rng)
        fails += not rep.passed
        worst = min(worst, rep.worst_slack)
        checked += rep.checked
    return fails, worst, checked


def _suite_rank_entropy(net, trials, seed):
    if not isinstance(net, LinearRelayNetwork):
        raise ModelError("the rank-entropy suite needs a linear network")
    uniform = ProductDistribution.uniform(net)
    fails, worst, checked = 0, math.inf, 0
    cuts = [c for d in sorted(net.destinations) for c in enumerate_cuts(net, d)]
    for cut in cuts:
        r = rank_cut_value(net, cut)
        gap = abs(entropy_cut_value(net, cut, uniform) - r)
        fails += gap > 1e-9
        worst = min(worst, -gap)
        checked += 1
    for t in range(trials):
        dist = ProductDistribution.random(net, make_rng(seed, t))
        for cut in cuts:
            slack = rank_cut_value(net, cut) - entropy_cut_value(net, cut, dist)
            fails += slack < -1e-9
            worst = min(worst, slack)
            checked += 1
    return fails, worst, checked


SUITES = {"loop": _suite_loop, "counting": _suite_counting, "kway": _suite_kway,
          "lemma2": _suite_lemma2, "rank-entropy": _suite_rank_entropy}


def cmd_verify(args):
    if args.trials < 1:
        raise UsageError("--trials must be at least 1")
    net = load(args.file)
    fails, worst, checked = SUITES[args.suite](net, args.trials, args.seed)
    passed = fails == 0
    report = {"suite": args.suite, "trials": args.trials, "checks": checked, "failures": fails,
              "worst_slack": _num(worst), "passed": passed}
    lines = [f"{args.suite}: {'PASS' if passed else 'FAIL'}  {checked} checks, {fails} failures, "
             f"worst slack {fmt_bits(worst)}"]
    return report, lines, EXIT_OK if passed else EXIT_VERIFY


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="detflow", description="Capacity tools for deterministic relay networks.")
    parser.add_argument("--version", action="version", version=f"detflow {__version__}")
    common = _Parser(add_help=False)
    common.add_argument("--json", action="store_true", help="print one JSON report object")
    common.add_argument("--threads", type=int, default=1, help="worker threads (output does not depend on it)")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("capacity", parents=[common], help="min-cut capacity of a linear network")
    p.add_argument("file")
    p.add_argument("--destination")
    p.add_argument("--list-cuts", action="store_true")
    p.set_defaults(func=cmd_capacity, seed=None)

    p = sub.add_parser("rate", parents=[common], help="achievable rate under a product distribution")
    p.add_argument("file")
    p.add_argument("--dist", default="uniform", help="uniform | grid:R | ascent:RESTARTS")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--destination")
    p.set_defaults(func=cmd_rate)

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo error rate of random relay coding")
    p.add_argument("file")
    p.add_argument("--rate", type=float, required=True)
    p.add_argument("--block-length", type=int, required=True)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--delta", type=float)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("unfold", parents=[common], help="time-expanded layered network")
    p.add_argument("file")
    p.add_argument("--stages", type=int, required=True)
    p.add_argument("--emit")
    p.set_defaults(func=cmd_unfold, seed=None)

    p = sub.add_parser("converge", parents=[common], help="normalised unfolded min cut for K = 1..max")
    p.add_argument("file")
    p.add_argument("--max-stages", type=int, required=True)
    p.set_defaults(func=cmd_converge, seed=None)

    p = sub.add_parser("verify", parents=[common], help="property suites on a network")
    p.add_argument("file")
    p.add_argument("--suite", required=True, choices=sorted(SUITES))
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)
    return parser


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.threads < 1:
            raise UsageError("--threads must be at least 1")
        report, lines, code = args.func(args)
    except UsageError as exc:
        print(exc, file=stderr)
        return EXIT_USAGE
    except DetflowError as exc:
        print(f"error: {exc}", file=stderr)
        return exc.exit_code
    except (ValueError, MemoryError) as exc:
        code = EXIT_LIMIT if isinstance(exc, MemoryError) else EXIT_SEMANTIC
        print(f"error: {exc}", file=stderr)
        return code
    header = {"tool": "detflow", "version": __version__, "command": args.command,
              "seed": args.seed, "rng": RNG_ID}
    if args.json:
        stdout.write(canonical_json({**header, **report}) + "\n")
    else:
        stdout.write("\n".join(lines) + "\n")
        seed = "-" if args.seed is None else args.seed
        stdout.write(f"detflow {__version__}  seed {seed}  rng {RNG_ID}\n")
    return code


def main(argv=None):
    try:
        code = run(argv)
    except SystemExit as exc:  # --help and --version
        code = exc.code if isinstance(exc.code, int) else EXIT_USAGE
    sys.exit(code)


if __name__ == "__main__":
    main()
