"""Command-line front end: run, trace, serve, debug, bridge, bench."""

from __future__ import annotations

import argparse
import sys
import threading
from pathlib import Path

from . import bench as benchmod
from . import bridge as bridgemod
from .channel import Listener, memory_pipe
from .domain import format_domain
from .driver import DriverOptions, DriverSession, emit_default_trace
from .events import ABSENT
from .mediator import DriverError, Mediator, ProtocolError, STEP_PATTERN
from .patterns import PatternError, parse_pattern_file
from .programs import ProgramError, builtin_source, load_program
from .solver import make_step_clock, run_program


def _load_program_arg(spec: str):
    """Program from a path or a builtin: spec; exits on bad input."""
    try:
        source = builtin_source(spec)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        raise SystemExit(2)
    if source is None:
        path = Path(spec)
        if not path.exists():
            print(f"error: no such program file: {spec}", file=sys.stderr)
            raise SystemExit(2)
        source = path.read_text(encoding="utf-8")
    try:
        return load_program(source)
    except ProgramError as exc:
        print(f"error: {spec}: {exc}", file=sys.stderr)
        raise SystemExit(1)


def _clock_opt(args):
    if args.seed_clock is not None:
        return make_step_clock(args.seed_clock)
    return None


def cmd_run(args) -> int:
    program = _load_program_arg(args.program)
    stats = run_program(
        program, max_solutions=args.max_solutions, clock=_clock_opt(args),
        collect_solutions=True,
    )
    for assignment in stats.solution_assignments:
        values = " ".join(f"{k}={v}" for k, v in assignment.items())
        print(f"solution: {values}")
    if stats.solutions == 0:
        print("no solution")
    print(f"events={stats.events} solutions={stats.solutions} failures={stats.failures}")
    return 0


def cmd_trace(args) -> int:
    program = _load_program_arg(args.program)
    clock = _clock_opt(args)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fp:
            nbytes = emit_default_trace(
                program, fp, clock=clock, max_solutions=args.max_solutions,
            )
        print(f"{nbytes} bytes written to {args.out}")
    else:
        nbytes = emit_default_trace(
            program, sys.stdout, clock=clock, max_solutions=args.max_solutions,
        )
        print(f"{nbytes} bytes", file=sys.stderr)
    return 0


def _load_pattern_file(path: str):
    try:
        return parse_pattern_file(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        print(f"error: cannot read patterns: {exc}", file=sys.stderr)
        raise SystemExit(2)
    except PatternError as exc:
        print(f"error: {path}: {exc}", file=sys.stderr)
        raise SystemExit(1)


def cmd_serve(args) -> int:
    program = _load_program_arg(args.program)
    preload = _load_pattern_file(args.patterns) if args.patterns else ()
    listener = Listener(args.host, args.port)
    print(f"listening on {listener.host}:{listener.port}", flush=True)
    channel = listener.accept_one()
    listener.close()
    options = DriverOptions(
        max_solutions=args.max_solutions,
        clock=_clock_opt(args),
        headless_on_disconnect=args.headless_on_disconnect,
    )
    stats = DriverSession(program, channel, options, preload=preload).serve()
    print(f"run finished: events={stats.events} solutions={stats.solutions}"
          f"{' (aborted)' if stats.aborted else ''}")
    return 0


_DEBUG_HELP = """\
commands:
  step                advance to the very next event
  skip_reductions     from an awake event, run to its suspend/entail/reject
  continue            resume until the next matching event
  current a[,b...]    show attribute values of the frozen event
  add <pattern>       add a pattern to the active base
  remove l[,l...]     remove patterns by label
  reset               remove all patterns
  quit                abort the execution and leave
"""


def _format_frozen(event, values: dict) -> str:
    parts = [str(event.chrono or values.get("chrono", "?")), event.port]
    if "cident" in values:
        parts.append(values["cident"])
    if "vident" in values:
        vdom = values.get("vdom")
        if vdom is not None:
            parts.append(f"{values['vident']}={format_domain(vdom)}")
        else:
            parts.append(values["vident"])
    if "delta" in values:
        parts.append(f"W={format_domain(values['delta'])}")
    if event.port in ("choicePoint", "backTo", "failure", "solution"):
        if "node" in values:
            parts.append(f"node={values['node']}")
        if "depth" in values:
            parts.append(f"depth={values['depth']}")
    return " ".join(parts)


def cmd_debug(args) -> int:
    program = _load_program_arg(args.program)
    driver_end, client_end = memory_pipe()
    options = DriverOptions(max_solutions=args.max_solutions, clock=_clock_opt(args))
    session = DriverSession(program, driver_end, options)
    worker = threading.Thread(target=session.serve, daemon=True)
    worker.start()
    med = Mediator(client_end)

    def toplevel(event, bindings):
        try:
            values = dict(med.current(
                ["chrono", "cident", "vident", "vdom", "delta", "node", "depth"]
            ))
        except (DriverError, ProtocolError):
            values = {}
        print(_format_frozen(event, values))
        if not event.sync:
            return
        while True:
            try:
                line = input("codeine> ").strip()
            except EOFError:
                med.request_stop()
                return
            if not line:
                continue
            cmd, _, rest = line.partition(" ")
            try:
                if cmd == "step":
                    med.step(toplevel)
                    return
                if cmd == "skip_reductions":
                    med.skip_reductions(toplevel)
                    return
                if cmd == "continue":
                    med.go()
                    return
                if cmd == "current":
                    attrs = [a.strip() for a in rest.split(",") if a.strip()]
                    for attr, value in med.current(attrs):
                        text = format_domain(value) if hasattr(value, "ranges") else value
                        print(f"{attr} = {text}")
                    continue
                if cmd == "add":
                    med.register(rest, toplevel)
                    print("ok")
                    continue
                if cmd == "remove":
                    med.remove([l.strip() for l in rest.split(",") if l.strip()])
                    print("ok")
                    continue
                if cmd == "reset":
                    med.reset()
                    print("ok")
                    continue
                if cmd == "quit":
                    med.request_stop()
                    return
            except (DriverError, ProtocolError, PatternError) as exc:
                print(f"error: {exc}")
                continue
            print(_DEBUG_HELP, end="")

    med.register(STEP_PATTERN, toplevel)
    med.dispatch_loop()
    med.close()
    print("aborted" if med.stopped else "execution finished")
    worker.join(timeout=5)
    return 0


def cmd_bridge(args) -> int:
    print(f"bridging ws://{args.listen_host}:{args.listen_port} "
          f"-> {args.target_host}:{args.target_port}", flush=True)
    bridgemod.serve_bridge(
        args.listen_host, args.listen_port, args.target_host, args.target_port,
    )
    return 0


def cmd_bench(args) -> int:
    programs = args.programs.split(",") if args.programs else list(benchmod.DEFAULT_PROGRAMS)
    if args.quick:
        repeat, min_seconds = 1, 0.0
    else:
        repeat, min_seconds = args.repeat, args.min_seconds
    log = (lambda s: print(s, file=sys.stderr, flush=True)) if args.verbose else (lambda s: None)
    reports = benchmod.run_suite(
        programs, repeat=repeat, min_seconds=min_seconds, log=log,
    )
    print(benchmod.format_text(reports))
    if args.out:
        Path(args.out).write_text(benchmod.format_csv(reports), encoding="utf-8")
        print(f"csv written to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="codeine",
        description="finite-domain solver with a pattern-driven execution tracer",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, clock=True):
        p.add_argument("program", help="path to an .fd file or builtin:{toy,queens:N,propag:N}")
        p.add_argument("--max-solutions", type=int, default=None)
        if clock:
            p.add_argument("--seed-clock", type=int, default=None,
                           help="deterministic time attribute: ms per event")

    p = sub.add_parser("run", help="run a program untraced and print solutions")
    add_common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("trace", help="write the exhaustive default trace")
    add_common(p)
    p.add_argument("--out", help="output file (default stdout)")
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("serve", help="serve one analyzer connection")
    add_common(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=7411)
    p.add_argument("--patterns", help="pattern file preloaded into the base")
    p.add_argument("--headless-on-disconnect", action="store_true",
                   help="keep running if an async-only analyzer drops")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("debug", help="interactive stepping toplevel")
    add_common(p)
    p.set_defaults(func=cmd_debug)

    p = sub.add_parser("bridge", help="relay web-socket frames to a driver")
    p.add_argument("--listen-host", default="127.0.0.1")
    p.add_argument("--listen-port", type=int, default=7412)
    p.add_argument("--target-host", default="127.0.0.1")
    p.add_argument("--target-port", type=int, default=7411)
    p.set_defaults(func=cmd_bridge)

    p = sub.add_parser("bench", help="measure tracing and filtering overhead")
    p.add_argument("--programs", help="comma list, e.g. toy,queens:8,propag:70000")
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--min-seconds", type=float, default=2.0,
                   help="minimum accumulated time per measurement")
    p.add_argument("--quick", action="store_true", help="single fast pass")
    p.add_argument("--out", help="write machine-readable CSV here")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
