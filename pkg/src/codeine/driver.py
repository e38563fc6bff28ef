"""The tracer driver: per-event pattern filtering and the wire protocol.

The driver owns the base of active patterns.  For every solver event it
consults a per-port pre-filter, evaluates the surviving formulas with
memoized attribute access, and emits one partial XML event per match.  A
synchronous match freezes the solver inside the event callback until the
analyzer sends GO; while frozen the analyzer may inspect the current
event (`CURRENT`) and edit the pattern base.

Protocol, one UTF-8 line per message:

    driver -> analyzer: <codeine version="1"/>, event elements,
                        <values .../>, <ok/>, <error code=".." msg=".."/>
    analyzer -> driver: ADD <pattern>, REMOVE <l1>[,<l2>]*, RESET,
                        CURRENT <a1>[,<a2>]*, GO

Commands arriving while the solver runs are applied at the next event
boundary, before matching.  The run itself starts on the first GO.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

from .channel import ChannelClosed
from .events import (
    ABSENT,
    ATTR_ALIASES,
    HANDSHAKE_LINE,
    OK_LINE,
    PORTS,
    REQUEST_ATTRS,
    error_line,
    parse_event,
    serialize_event,
    values_line,
)
from .patterns import (
    Pattern,
    PatternError,
    eval_formula,
    eval_with_port,
    parse_pattern,
)
from .programs import Program
from .solver import AbortRun, RunStats, UnknownAttributeError, run_program


class DuplicateLabelError(ValueError):
    pass


class UnknownLabelError(KeyError):
    pass


class PatternBase:
    """Ordered set of active patterns plus a per-port pre-filter."""

    def __init__(self, patterns: Iterable[Pattern] = ()):
        self._patterns: dict[str, Pattern] = {}
        self._by_port: dict[str, tuple[Pattern, ...]] = {}
        if patterns:
            self.add_patterns(patterns)
        else:
            self._reindex()

    def _reindex(self) -> None:
        for port in PORTS:
            self._by_port[port] = tuple(
                p for p in self._patterns.values()
                if eval_with_port(p.formula, port) is not False
            )

    def add_patterns(self, patterns: Iterable[Pattern]) -> None:
        incoming = list(patterns)
        seen = set(self._patterns)
        for p in incoming:
            if p.label in seen:
                raise DuplicateLabelError(f"pattern label {p.label!r} already active")
            seen.add(p.label)
        for p in incoming:
            self._patterns[p.label] = p
        self._reindex()

    def add_texts(self, texts: Iterable[str]) -> list[Pattern]:
        """Parse and add atomically: any error leaves the base unchanged."""
        parsed = [parse_pattern(t) for t in texts]
        self.add_patterns(parsed)
        return parsed

    def remove(self, labels: Iterable[str]) -> None:
        wanted = list(labels)
        for label in wanted:
            if label not in self._patterns:
                raise UnknownLabelError(f"no active pattern labelled {label!r}")
        for label in wanted:
            del self._patterns[label]
        self._reindex()

    def reset(self) -> None:
        self._patterns.clear()
        self._reindex()

    def candidates(self, port: str) -> tuple[Pattern, ...]:
        return self._by_port[port]

    def patterns(self) -> list[Pattern]:
        return list(self._patterns.values())

    def labels(self) -> list[str]:
        return list(self._patterns)

    def __len__(self) -> int:
        return len(self._patterns)

    def __contains__(self, label: str) -> bool:
        return label in self._patterns


# -- requests (the add / remove / reset primitives) ----------------------

@dataclass(frozen=True)
class AddPatterns:
    texts: tuple

    def __init__(self, texts: Iterable[str]):
        object.__setattr__(self, "texts", tuple(texts))


@dataclass(frozen=True)
class RemovePatterns:
    labels: tuple

    def __init__(self, labels: Iterable[str]):
        object.__setattr__(self, "labels", tuple(labels))


@dataclass(frozen=True)
class ResetPatterns:
    pass


def apply_request(base: PatternBase, request) -> None:
    """Apply one base-editing request; raises without mutating on error."""
    if isinstance(request, AddPatterns):
        base.add_texts(request.texts)
    elif isinstance(request, RemovePatterns):
        base.remove(request.labels)
    elif isinstance(request, ResetPatterns):
        base.reset()
    else:
        raise TypeError(f"unknown request {request!r}")


# -- per-event matching ---------------------------------------------------

@dataclass(frozen=True)
class MatchResult:
    labels: tuple
    sync: bool
    collect: tuple            # requested attributes present on the event
    dropped_absent: bool      # some requested attribute was absent


_MISSING = object()


def _with_chrono(collect: tuple) -> tuple:
    """Emitted excerpts always carry chrono so they stay correlatable."""
    return collect if "chrono" in collect else ("chrono",) + collect


def check_event(handle, base: PatternBase) -> Optional[MatchResult]:
    """Match one event against the base; attributes computed at most once."""
    candidates = base.candidates(handle.port)
    if not candidates:
        return None
    cache: dict = {}
    get = handle.get

    def provider(attr):
        value = cache.get(attr, _MISSING)
        if value is _MISSING:
            value = get(attr)
            cache[attr] = value
        return value

    labels = []
    sync = False
    requested: list[str] = []
    for pattern in candidates:
        if eval_formula(pattern.formula, provider):
            labels.append(pattern.label)
            if pattern.sync:
                sync = True
            for attr in pattern.current_attrs():
                if attr not in requested:
                    requested.append(attr)
    if not labels:
        return None
    collect = []
    dropped = False
    for attr in requested:
        if handle.has(attr):
            collect.append(attr)
        else:
            dropped = True
    return MatchResult(tuple(labels), sync, tuple(collect), dropped)


# -- transport-free filtered runs (benchmarks, oracles) -------------------

@dataclass
class FilterRunResult:
    stats: RunStats
    matched_events: int = 0
    bytes_emitted: int = 0


def filter_run(program: Program, base: PatternBase, on_line=None, *,
               clock=None, max_solutions=None, default_max=None) -> FilterRunResult:
    """Run with filtering but no connection; sync matches do not freeze."""
    result = FilterRunResult(stats=RunStats())

    def sink(handle):
        match = check_event(handle, base)
        if match is None:
            return
        line = serialize_event(handle.get, handle.port, _with_chrono(match.collect),
                               match.labels, match.sync)
        result.matched_events += 1
        result.bytes_emitted += len(line.encode("utf-8")) + 1
        if on_line is not None:
            on_line(line)

    result.stats = run_program(
        program, sink, clock=clock, max_solutions=max_solutions, default_max=default_max,
    )
    return result


def emit_default_trace(program: Program, out, *, clock=None, max_solutions=None,
                       default_max=None) -> int:
    """Write the exhaustive trace (every present attribute); returns bytes."""
    total = 0

    def sink(handle):
        nonlocal total
        line = serialize_event(handle.get, handle.port, handle.present_attrs())
        out.write(line + "\n")
        total += len(line.encode("utf-8")) + 1

    run_program(program, sink, clock=clock, max_solutions=max_solutions,
                default_max=default_max)
    return total


def default_trace_lines(program: Program, **opts) -> list[str]:
    buf = io.StringIO()
    emit_default_trace(program, buf, **opts)
    return buf.getvalue().splitlines()


def post_hoc_matches(lines: Iterable[str], patterns: Iterable[Pattern]):
    """Filter an already-written trace; the oracle for the live driver.

    Evaluates every pattern on every parsed event, with no pre-filter and
    no lazy computation, and returns the (chrono, matched labels) pairs.
    """
    pattern_list = list(patterns)
    out = []
    for line in lines:
        event = parse_event(line)
        labels = tuple(
            p.label for p in pattern_list if eval_formula(p.formula, event.get)
        )
        if labels:
            out.append((event.attrs["chrono"], labels))
    return out


# -- the protocol server ---------------------------------------------------

@dataclass
class DriverOptions:
    max_solutions: Optional[int] = None
    clock: Optional[Callable[[], int]] = None
    default_max: Optional[int] = None
    headless_on_disconnect: bool = False


class DriverSession:
    """Serves one analyzer connection over a line channel."""

    def __init__(self, program: Program, channel, options: DriverOptions | None = None,
                 preload: Iterable[Pattern] = ()):
        self.program = program
        self.channel = channel
        self.options = options or DriverOptions()
        self.base = PatternBase(preload)
        self.frozen = False
        self._disconnected = False

    # Command handling; returns True when the command was GO.
    def _handle_command(self, line: str, handle) -> bool:
        line = line.strip()
        if line == "GO":
            return True
        try:
            if line.startswith("ADD "):
                self.base.add_texts([line[4:]])
                self._reply(OK_LINE)
            elif line.startswith("REMOVE "):
                self.base.remove([l.strip() for l in line[7:].split(",") if l.strip()])
                self._reply(OK_LINE)
            elif line == "RESET":
                self.base.reset()
                self._reply(OK_LINE)
            elif line.startswith("CURRENT"):
                self._reply_current(line[7:].strip(), handle)
            else:
                self._reply(error_line("bad_command", f"unrecognized command {line!r}"))
        except PatternError as exc:
            self._reply(error_line("parse", str(exc)))
        except DuplicateLabelError as exc:
            self._reply(error_line("duplicate_label", str(exc)))
        except UnknownLabelError as exc:
            self._reply(error_line("unknown_label", str(exc)))
        return False

    def _reply_current(self, args: str, handle) -> None:
        if handle is None:
            self._reply(error_line("not_frozen", "no current event: execution not frozen"))
            return
        attrs = []
        for name in (a.strip() for a in args.split(",") if a.strip()):
            attr = ATTR_ALIASES.get(name, name)
            if attr not in REQUEST_ATTRS:
                self._reply(error_line("unknown_attribute", f"unknown attribute {name!r}"))
                return
            attrs.append(attr)
        self._reply(values_line(handle.get, attrs))

    def _reply(self, line: str) -> None:
        self.channel.send_line(line)

    def _frozen_session(self, handle) -> None:
        """Blocking command loop; returns when the analyzer sends GO."""
        self.frozen = True
        try:
            while True:
                try:
                    line = self.channel.recv_line(None)
                except ChannelClosed:
                    raise AbortRun("analyzer connection lost while frozen") from None
                if line is None:
                    continue
                if self._handle_command(line, handle):
                    return
        finally:
            self.frozen = False

    def _poll_commands(self) -> None:
        while True:
            line = self.channel.recv_line(0)
            if line is None:
                return
            # GO while already running is acknowledged by the next event
            self._handle_command(line, None)

    def _sink(self, handle) -> None:
        if self._disconnected:
            return
        sync_pending = False
        try:
            self._poll_commands()
            match = check_event(handle, self.base)
            if match is None:
                return
            sync_pending = match.sync
            line = serialize_event(handle.get, handle.port, _with_chrono(match.collect),
                                   match.labels, match.sync)
            self.channel.send_line(line)
            if match.sync:
                self._frozen_session(handle)
        except ChannelClosed:
            # A lost connection aborts unless the base is effectively
            # asynchronous and headless continuation was asked for.
            if sync_pending or not self.options.headless_on_disconnect:
                raise AbortRun("analyzer connection lost") from None
            self._disconnected = True

    def serve(self) -> RunStats:
        """Handshake, wait for the launching GO, then run the program."""
        opts = self.options
        self.channel.send_line(HANDSHAKE_LINE)
        try:
            self._frozen_session(None)
        except (ChannelClosed, AbortRun):
            self.channel.close()
            return RunStats(aborted=True)
        stats = run_program(
            self.program, self._sink, max_solutions=opts.max_solutions,
            clock=opts.clock, default_max=opts.default_max,
        )
        self.channel.close()
        return stats
