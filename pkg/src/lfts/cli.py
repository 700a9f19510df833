"""``lfts`` command line: check, explore, simulate, replay and demo."""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path
from typing import Sequence

from . import __version__
from .errors import ConfigError, LftsError, PreconditionError, ReplayMismatchError
from .explorer import Actor, SystemConfig, explore, replay, simulate, verdict_to_json
from .kernel import DEFAULT_CAP, Status, check_rg_compatibility
from .reference import build_gcd_system, find_min
from .scenario import InputParseError, load_injection, load_scenario, read_json
from .train import topology_from_dict, validate_topology

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_CAP = 0, 1, 2, 3


def _color(text: str, code: str) -> str:
    setting = os.environ.get("LFTS_COLOR")
    on = sys.stdout.isatty() if setting is None else setting == "1"
    return f"\033[{code}m{text}\033[0m" if on else text


def _status_text(status: Status) -> str:
    code = {Status.HOLDS: "32", Status.VIOLATED: "31", Status.CAP_EXCEEDED: "33"}[status]
    return _color(status.value, code)


def _err(message: str) -> None:
    print(f"lfts: {message}", file=sys.stderr)


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be positive, got {value}")
    return value


def _non_negative(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative, got {value}")
    return value


def _on_off(text: str) -> bool:
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected 'on' or 'off'")
    return text == "on"


def _write(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _load(args: argparse.Namespace):
    overrides = {"reservationKeepsFirstFree": True} if args.keeps_first_free else None
    scn = load_scenario(args.topology, args.scenario, overrides)
    ei = load_injection(args.inject) if getattr(args, "inject", None) else None
    return scn, ei


def cmd_check(args: argparse.Namespace) -> int:
    doc = read_json(args.topology)
    topo, _, _ = topology_from_dict(doc)
    verdict = validate_topology(topo)
    print(f"{args.topology}: {_status_text(verdict.status)}")
    for problem in verdict.violations:
        print(f"  - {problem}")
    return EXIT_OK if verdict.holds else EXIT_FAIL


def cmd_explore(args: argparse.Namespace) -> int:
    scn, ei = _load(args)
    cfg = scn.config(layered=args.layered, ei=ei, depth=args.depth, cap=args.cap)
    verdict = explore(cfg, workers=args.workers)
    stats = verdict.stats
    summary = [
        f"explore: {_status_text(verdict.status)}",
        f"  states visited: {stats.states_visited}",
        f"  max depth: {stats.max_depth} (bound {cfg.depth})",
        f"  transitions: {stats.transitions}, blocked steps: {stats.blocked}",
    ]
    for (op, layer), n in sorted(stats.layer_selections.items()):
        label = "normal" if layer == 0 else "degraded"
        summary.append(f"  {op} layer {layer} ({label}): {n}")
    for cls, n in sorted(stats.faults.items()):
        summary.append(f"  injected {cls}: {n}")
    if verdict.status is Status.VIOLATED:
        summary.append(f"  violated invariant: {verdict.invariant}")
        witness_path = args.witness or "witness.trace"
        Path(witness_path).write_text(verdict.witness.to_text(), encoding="utf-8")
        summary.append(f"  witness ({len(verdict.witness)} events) written to {witness_path}")
    human = "\n".join(summary) + "\n"
    if args.json:
        _write(verdict_to_json(verdict) + "\n", args.out)
        if args.out is None:
            sys.stderr.write(human)
        else:
            sys.stdout.write(human)
    else:
        _write(human, args.out)
    return {Status.HOLDS: EXIT_OK, Status.VIOLATED: EXIT_FAIL, Status.CAP_EXCEEDED: EXIT_CAP}[verdict.status]


def cmd_simulate(args: argparse.Namespace) -> int:
    scn, ei = _load(args)
    if args.seed is None:
        cfg = scn.config(layered=args.layered, ei=ei, admin=True)
        trace = simulate(cfg, scn.explicit_schedule(), args.steps)
    else:
        cfg = scn.config(layered=args.layered, ei=ei)
        trace = simulate(cfg, args.seed, args.steps if args.steps is not None else 20)
    _write(trace.to_text(), args.out)
    print(f"simulate: {len(trace)} events, stopped on {trace.termination}", file=sys.stderr)
    return EXIT_OK


def cmd_replay(args: argparse.Namespace) -> int:
    scn, ei = _load(args)
    cfg = scn.config(layered=args.layered, ei=ei, admin=True)
    trace = cfg.parse_trace(Path(args.trace).read_text(encoding="utf-8"))
    try:
        final = replay(cfg, trace)
    except ReplayMismatchError as exc:
        _err(f"replay mismatch at {exc}")
        return EXIT_FAIL
    safety = scn.system.check_safety(final)
    print(f"replay: {len(trace)} events reproduced; final state safety {_status_text(safety.status)}")
    for problem in safety.violations:
        print(f"  - {problem}")
    return EXIT_OK


def cmd_demo(args: argparse.Namespace) -> int:
    if args.demo == "min":
        try:
            print(find_min(args.elems))
        except PreconditionError as exc:
            _err(f"precondition violated: {exc}")
            return EXIT_FAIL
        return EXIT_OK
    system = build_gcd_system(args.a, args.b)
    p1, p2 = system.ops
    cfg = SystemConfig(system.schema, system.initial, (Actor("P1", p1), Actor("P2", p2)), depth=args.a + args.b)
    trace = simulate(cfg, args.seed, 100 * (args.a + args.b))
    final = replay(cfg, trace)
    compat = check_rg_compatibility([p1, p2], system.schema)
    print(f"gcd({args.a}, {args.b}) = {final['a']}")
    print(f"steps: {len(trace)} ({trace.termination})")
    print(f"R/G compatibility: {_status_text(compat.status)}")
    return EXIT_OK if final["a"] == final["b"] and compat.holds else EXIT_FAIL


def _common(p: argparse.ArgumentParser, inject: bool = True) -> None:
    p.add_argument("topology", help="network JSON (path or shipped name, e.g. figure1)")
    p.add_argument("scenario", nargs="?", help="scenario JSON (path or shipped name, e.g. scenarios/disjoint)")
    if inject:
        p.add_argument("--inject", metavar="CONFIG", help="error injector config JSON")
    p.add_argument("--layered", type=_on_off, default=None, metavar="on|off", help="layered route reservation")
    p.add_argument(
        "--reservation-keeps-first-free",
        dest="keeps_first_free",
        action="store_true",
        help="reservation leaves block status free (two-phase reading)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lfts", description=__doc__)
    parser.add_argument("--version", action="version", version=f"lfts {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="validate a network topology")
    p.add_argument("topology")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("explore", help="exhaustively explore interleavings up to a depth")
    _common(p)
    p.add_argument("--depth", type=_non_negative, default=12)
    p.add_argument("--cap", type=_positive, default=DEFAULT_CAP)
    p.add_argument("--workers", type=_positive, default=1)
    p.add_argument("--json", action="store_true", help="emit the verdict as JSON")
    p.add_argument("--out", help="write machine output here instead of stdout")
    p.add_argument("--witness", help="counterexample trace path (default witness.trace)")
    p.set_defaults(func=cmd_explore)

    p = sub.add_parser("simulate", help="run one seeded or scripted execution and print its trace")
    _common(p)
    p.add_argument("--seed", type=int, help="random fair schedule; omit to run the scenario's schedule")
    p.add_argument("--steps", type=_non_negative)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("replay", help="re-execute a trace and check every recorded step")
    _common(p)
    p.add_argument("--trace", required=True)
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("demo", help="reference examples")
    demos = p.add_subparsers(dest="demo", required=True)
    g = demos.add_parser("gcd", help="two interfering processes computing a GCD")
    g.add_argument("a", type=_positive)
    g.add_argument("b", type=_positive)
    g.add_argument("--seed", type=int, default=0)
    m = demos.add_parser("min", help="smallest element of a set of naturals")
    m.add_argument("elems", type=_non_negative, nargs="*")
    p.set_defaults(func=cmd_demo)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputParseError as exc:
        _err(f"parse error: {exc}")
    except FileNotFoundError as exc:
        _err(str(exc))
    except (ConfigError, LftsError, ValueError) as exc:
        _err(f"invalid input: {exc}")
    return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
