"""``pktline`` command line.

Every summary line is ``key value`` (or ``key k=v ...``) so scripts can
parse output without scraping prose. Exit codes: 0 success, 1 validation or
usage failure, 2 search budget exhausted (the result is still printed).
"""
from __future__ import annotations

import argparse
import sys
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

from . import io
from .analysis import ratio_report
from .core import Instance, InstanceError, InvalidTraceError, block_flows, flow_times
from .engine import BACKEND, PolicyError, SimulationError, simulate, validate_trace
from .gantt import render
from .generators import (
    adversary_43,
    adversary_65,
    gen_greedy_family,
    gen_prop_k2,
    gen_warmup_65,
)
from .offline import (
    DEFAULT_BUDGET,
    OptResult,
    brute_force_opt,
    certificate,
    load_lower_bound,
    reference_schedule,
)
from .policies import BlockPreference, get_policy, policy_names

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_BUDGET = 2

FAMILIES = ("prop-k2", "greedy-lb", "warmup-65", "adv-65", "adv-43")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _emit(key: str, value) -> None:
    print(f"{key} {value}")


def _ratio_str(r: Fraction) -> str:
    return f"{float(r):.4f}"


def _need(args, *names: str) -> None:
    missing = [n for n in names if getattr(args, n.replace("-", "_")) is None]
    if missing:
        raise UsageError(f"{args.family} needs " + ", ".join(f"--{n}" for n in missing))


def _policy(name: str, instance: Optional[Instance] = None):
    try:
        return get_policy(name, instance)
    except (ValueError, InstanceError) as e:
        raise UsageError(str(e)) from e


def _adversary(args):
    pol = _policy(args.target)
    if args.construction == "65":
        if args.h is None:
            raise UsageError("construction 65 needs --h")
        return adversary_65(pol, args.h)
    if args.stages is None or args.ell is None:
        raise UsageError("construction 43 needs --stages and --ell")
    return adversary_43(pol, args.stages, args.ell)


def _print_adversary(res) -> None:
    _emit("ratio", _ratio_str(res.ratio))
    _emit("ratio_exact", f"{res.ratio.numerator}/{res.ratio.denominator}")
    _emit("policy_max_flow", res.policy_value)
    _emit("offline_max_flow", res.offline_value)
    _emit("branch", res.branch or "-")
    _emit("packets", len(res.instance))
    for j, s in enumerate(res.stage_log):
        print(
            f"stage {j} t={s.t} router={s.router} U={s.U} L={s.L} "
            f"longs_early={s.longs_early} next_L={s.next_L} "
            f"prefix_max_flow={s.prefix_max_flow} prefix_offline={s.prefix_offline} "
            f"slack={float(s.slack):.4f}"
        )


def cmd_gen(args) -> int:
    fam = args.family
    pred = None
    if fam == "prop-k2":
        _need(args, "h")
        inst = gen_prop_k2(args.h)
    elif fam == "greedy-lb":
        _need(args, "k", "h")
        inst, pred = gen_greedy_family(args.k, args.h)
    elif fam == "warmup-65":
        _need(args, "h")
        inst = gen_warmup_65(args.h, args.with_jam)
    else:
        args.construction = fam[len("adv-"):]
        res = _adversary(args)
        inst = res.instance
        _print_adversary(res)
    if args.out:
        io.write_instance(args.out, inst)
    _emit("family", fam)
    _emit("k", inst.k)
    _emit("packets", len(inst))
    if pred is not None:
        print(f"prediction greedy={pred.greedy_max_flow} opt={pred.opt_max_flow}")
        _emit("predicted_greedy_max_flow", pred.greedy_max_flow)
        _emit("predicted_opt_max_flow", pred.opt_max_flow)
        for lab in sorted(pred.greedy_blocks):
            print(f"predicted_block {lab} greedy={pred.greedy_blocks[lab]} opt={pred.opt_blocks[lab]}")
    return EXIT_OK


def _print_flows(instance: Instance, trace) -> None:
    flows, value = flow_times(instance, trace)
    _emit("max_flow", value)
    for lab, f in sorted(block_flows(instance, flows).items()):
        print(f"block {lab} {f}")


def cmd_run(args) -> int:
    inst = io.read_instance(args.instance)
    pol = _policy(args.policy, inst)
    trace = simulate(inst, pol, horizon=args.horizon, backend=args.backend)
    if args.out:
        io.write_trace(args.out, trace)
    _emit("policy", pol.name)
    _print_flows(inst, trace)
    return EXIT_OK


def _opt(inst: Instance, mode: str, budget: int, prefs: Optional[str]) -> tuple[Optional[OptResult], int]:
    lb = load_lower_bound(inst)
    if mode == "loadlb":
        return None, lb
    if mode == "reference":
        bp = BlockPreference.parse(prefs) if prefs else None
        return certificate(inst, reference_schedule(inst, bp)), lb
    return brute_force_opt(inst, budget), lb


def cmd_opt(args) -> int:
    inst = io.read_instance(args.instance)
    res, lb = _opt(inst, args.mode, args.budget, args.prefs)
    _emit("mode", args.mode)
    if res is None:
        _emit("value", lb)
        _emit("load_lb", lb)
        return EXIT_OK
    exact = res.exact or res.value == lb
    _emit("value", res.value)
    _emit("exact", "yes" if exact else "no")
    _emit("load_lb", lb)
    _emit("nodes", res.nodes_explored)
    if args.out:
        io.write_trace(args.out, res.trace)
    if args.mode == "brute" and not res.exact:
        print("budget exhausted: value is an upper bound", file=sys.stderr)
        return EXIT_BUDGET
    return EXIT_OK


def cmd_adversary(args) -> int:
    res = _adversary(args)
    if args.out:
        io.write_instance(args.out, res.instance)
    _print_adversary(res)
    return EXIT_OK


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as e:
        raise UsageError(f"expected a comma-separated integer list, got {text!r}") from e


def cmd_ratio(args) -> int:
    names = [x for x in args.policies.split(",") if x]
    jobs: list[tuple[str, Instance]] = []
    if args.instance:
        jobs.append((f"file={args.instance}", io.read_instance(args.instance)))
    elif args.family == "greedy-lb":
        if args.k is None or args.h is None:
            raise UsageError("greedy-lb sweep needs --k and --h")
        for k in _int_list(args.k):
            for h in _int_list(args.h):
                jobs.append((f"family=greedy-lb k={k} h={h}", gen_greedy_family(k, h)[0]))
    elif args.family == "prop-k2":
        if args.h is None:
            raise UsageError("prop-k2 sweep needs --h")
        for h in _int_list(args.h):
            jobs.append((f"family=prop-k2 h={h}", gen_prop_k2(h)))
    else:
        raise UsageError("ratio needs an instance path or --family greedy-lb|prop-k2")
    status = EXIT_OK
    for n, (label, inst) in enumerate(jobs):
        pols = [_policy(x, inst) for x in names]
        cert, _ = _opt(inst, args.mode, args.budget, None)
        if cert is None:
            raise UsageError("ratio needs --mode reference or brute")
        report = ratio_report(inst, pols, cert)
        if n:
            print()
        print(f"instance {label}")
        print(report.to_tsv() if args.tsv else report.to_text(), end="")
        if args.mode == "brute" and not cert.exact:
            status = EXIT_BUDGET
    return status


def cmd_gantt(args) -> int:
    inst = io.read_instance(args.instance)
    traces = []
    for path in args.traces:
        tr = io.read_trace(path)
        bad = validate_trace(inst, tr)
        if bad:
            for v in bad:
                print(f"violation {path}: {v}", file=sys.stderr)
            return EXIT_INVALID
        traces.append((Path(path).stem, tr))
    fmt = args.format or ("text" if str(args.out).endswith(".txt") else "svg")
    Path(args.out).write_text(render(inst, traces, fmt), encoding="utf-8")
    _emit("chart", args.out)
    _emit("format", fmt)
    return EXIT_OK


def cmd_validate(args) -> int:
    inst = io.read_instance(args.instance)
    if args.trace is None:
        _emit("instance", "ok")
        return EXIT_OK
    tr = io.read_trace(args.trace)
    bad = validate_trace(inst, tr)
    for v in bad:
        print(f"violation packet={v.packet} t={v.time} router={v.router} rule={v.rule}")
    if bad:
        _emit("violations", len(bad))
        return EXIT_INVALID
    _emit("trace", "ok")
    _emit("max_flow", flow_times(inst, tr)[1])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pktline", description="Packet forwarding on a line: simulate, solve, attack.")
    p.add_argument("--backend", choices=("auto", "python", "compiled"), default=None,
                   help=f"simulation kernel (default auto, currently {BACKEND})")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="write a named instance family")
    g.add_argument("family", choices=FAMILIES)
    g.add_argument("--k", type=int)
    g.add_argument("--h", type=int)
    g.add_argument("--with-jam", action="store_true")
    g.add_argument("--target", default="greedy", help="policy the adv-* families attack")
    g.add_argument("--stages", type=int)
    g.add_argument("--ell", type=int)
    g.add_argument("--out")
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("run", help="simulate a policy, write its trace")
    r.add_argument("instance")
    r.add_argument("--policy", default="greedy",
                   help=f"one of {', '.join(policy_names())}, or block:<spec> / block:auto")
    r.add_argument("--horizon", type=int)
    r.add_argument("--out")
    r.set_defaults(func=cmd_run)

    o = sub.add_parser("opt", help="offline optimum, reference schedule or lower bound")
    o.add_argument("instance")
    o.add_argument("--mode", choices=("brute", "reference", "loadlb"), default="brute")
    o.add_argument("--budget", type=int, default=DEFAULT_BUDGET, help="node budget per search probe")
    o.add_argument("--prefs", help="block preferences for --mode reference, e.g. '1=B1,A1;2=B1,B2'")
    o.add_argument("--out")
    o.set_defaults(func=cmd_opt)

    a = sub.add_parser("adversary", help="run an adaptive lower-bound construction")
    a.add_argument("--construction", choices=("65", "43"), required=True)
    a.add_argument("--target", required=True)
    a.add_argument("--h", type=int)
    a.add_argument("--stages", type=int)
    a.add_argument("--ell", type=int)
    a.add_argument("--out")
    a.set_defaults(func=cmd_adversary)

    q = sub.add_parser("ratio", help="policy max flows against an offline certificate")
    q.add_argument("instance", nargs="?")
    q.add_argument("--family", choices=("greedy-lb", "prop-k2"))
    q.add_argument("--k", help="comma-separated list")
    q.add_argument("--h", help="comma-separated list")
    q.add_argument("--policies", default=",".join(policy_names()))
    q.add_argument("--mode", choices=("reference", "brute"), default="reference")
    q.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    q.add_argument("--tsv", action="store_true")
    q.set_defaults(func=cmd_ratio)

    c = sub.add_parser("gantt", help="render traces as an SVG or text chart")
    c.add_argument("instance")
    c.add_argument("traces", nargs="*")
    c.add_argument("--out", required=True)
    c.add_argument("--format", choices=("svg", "text"))
    c.set_defaults(func=cmd_gantt)

    v = sub.add_parser("validate", help="check an instance file and optionally a trace")
    v.add_argument("instance")
    v.add_argument("trace", nargs="?")
    v.set_defaults(func=cmd_validate)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as e:
        # argparse usage errors and --help
        return e.code if isinstance(e.code, int) else EXIT_INVALID
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except (io.FormatError, InstanceError, InvalidTraceError, SimulationError, PolicyError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
