"""Analyzer-side session: registration, dispatch, and steering commands.

One mediator owns one connection to a driver.  Patterns are registered
with a handler per label; the dispatch loop parses incoming partial
events and calls every matched handler in matched order.  When a
synchronous event arrives, GO is sent once, after the handlers finish,
unless a handler already resumed the execution itself (the tracing
commands below do exactly that).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from . import channel as channels
from .channel import ChannelClosed
from .events import ABSENT, ControlMessage, EventFormatError, ParsedEvent, parse_line
from .patterns import Current, Pattern, parse_pattern

log = logging.getLogger("codeine.mediator")

STEP_PATTERN = "step: when true do_synchro call(tracer_toplevel)"


def skip_to_status_pattern(cident: str) -> str:
    """Sync pattern freezing at the awoken constraint's closing status."""
    return (
        f"sr: when cident='{cident}' and port in [suspend,reject,entail] "
        "do_synchro call(tracer_toplevel)"
    )


class MediatorError(Exception):
    pass


class ProtocolError(MediatorError):
    """Local misuse: command issued in the wrong session state."""


class DriverError(MediatorError):
    """An <error/> reply from the driver."""

    def __init__(self, code: str, msg: str):
        super().__init__(f"{code}: {msg}")
        self.code = code


@dataclass
class _Entry:
    pattern: Pattern
    handler: Callable


class Mediator:
    """Client session over a line channel; single thread of control."""

    def __init__(self, chan):
        self.channel = chan
        self.registry: dict[str, _Entry] = {}
        self.state = "idle"            # idle | dispatching | awaiting_go
        self._started = False
        self._go_sent = False
        self._stop = False
        self._pending: list[ParsedEvent] = []
        self.gos_sent = 0
        self.sync_events_seen = 0
        self._consume_handshake()

    @classmethod
    def connect(cls, host: str, port: int) -> "Mediator":
        return cls(channels.connect(host, port))

    def _consume_handshake(self) -> None:
        line = self.channel.recv_line(None)
        msg = parse_line(line)
        if not isinstance(msg, ControlMessage) or msg.kind != "handshake":
            raise MediatorError(f"expected handshake, got {line!r}")
        version = msg.attrs.get("version")
        if version != "1":
            raise MediatorError(f"unsupported driver version {version!r}")

    # -- request/reply ----------------------------------------------------

    def _await_reply(self) -> ControlMessage:
        """Read until a control reply arrives, buffering event lines."""
        while True:
            line = self.channel.recv_line(None)
            if line is None:
                continue
            try:
                msg = parse_line(line)
            except EventFormatError as exc:
                log.warning("skipping malformed line: %s", exc)
                continue
            if isinstance(msg, ControlMessage):
                if msg.kind == "error":
                    raise DriverError(msg.attrs.get("code", "?"), msg.attrs.get("msg", ""))
                return msg
            self._pending.append(msg)

    def register(self, text: str, handler: Callable) -> str:
        """Parse locally, send ADD, record the handler; returns the label."""
        pattern = parse_pattern(text)
        if pattern.label in self.registry:
            raise ProtocolError(f"label {pattern.label!r} already registered")
        self.channel.send_line(f"ADD {text}")
        self._await_reply()
        self.registry[pattern.label] = _Entry(pattern, handler)
        return pattern.label

    def remove(self, labels: Sequence[str]) -> None:
        self.channel.send_line("REMOVE " + ",".join(labels))
        self._await_reply()
        for label in labels:
            self.registry.pop(label, None)

    def reset(self) -> None:
        self.channel.send_line("RESET")
        self._await_reply()
        self.registry.clear()

    def current(self, attrs: Sequence[str]) -> list[tuple[str, object]]:
        """Attribute values of the frozen event; absent ones are omitted."""
        if self.state != "awaiting_go":
            raise ProtocolError("current() requires a frozen synchronous session")
        self.channel.send_line("CURRENT " + ",".join(attrs))
        reply = self._await_reply()
        return [(a, reply.attrs[a]) for a in attrs if a in reply.attrs]

    def go(self) -> None:
        if self.state != "awaiting_go":
            raise ProtocolError("go() outside a frozen synchronous session")
        self._send_go()
        self.state = "dispatching"

    def _send_go(self) -> None:
        self.channel.send_line("GO")
        self.gos_sent += 1
        self._go_sent = True

    def start(self) -> None:
        """Launch the traced execution (the driver waits for a first GO)."""
        if self._started:
            return
        self._started = True
        self.channel.send_line("GO")

    # -- dispatch ---------------------------------------------------------

    def request_stop(self) -> None:
        """Ask the dispatch loop to wind down; callable from handlers.

        No GO is sent for the current event, so a frozen driver observes
        the disconnect and aborts its run.
        """
        self._stop = True

    @property
    def stopped(self) -> bool:
        return self._stop

    def dispatch_loop(self) -> None:
        """Consume events until endExec, disconnect, or a requested stop."""
        self.start()
        while not self._stop:
            if self._pending:
                event = self._pending.pop(0)
            else:
                try:
                    line = self.channel.recv_line(None)
                except ChannelClosed:
                    break
                if line is None:
                    continue
                try:
                    msg = parse_line(line)
                except EventFormatError as exc:
                    log.warning("skipping malformed line: %s", exc)
                    continue
                if isinstance(msg, ControlMessage):
                    log.warning("stray control message %r", msg.kind)
                    continue
                event = msg
            self._dispatch(event)
            if event.port == "endExec":
                break

    def _dispatch(self, event: ParsedEvent) -> None:
        self._go_sent = False
        if event.sync:
            self.sync_events_seen += 1
            self.state = "awaiting_go"
        else:
            self.state = "dispatching"
        for label in event.matched:
            entry = self.registry.get(label)
            if entry is None:
                continue
            try:
                entry.handler(event, _bindings(entry.pattern, event))
            except Exception:
                log.exception("handler for %r failed", label)
        if event.sync and not self._go_sent and not self._stop:
            self._send_go()
        self.state = "idle"

    # -- tracing commands ---------------------------------------------------

    def step(self, handler: Callable) -> None:
        """Freeze again at the very next event."""
        if self.state != "awaiting_go":
            raise ProtocolError("step() requires a frozen synchronous session")
        self.reset()
        self.register(STEP_PATTERN, handler)
        self.go()

    def skip_reductions(self, handler: Callable) -> None:
        """From an awake event, run to its suspend/entail/reject; else step."""
        if self.state != "awaiting_go":
            raise ProtocolError("skip_reductions() requires a frozen synchronous session")
        values = dict(self.current(["cident", "port"]))
        self.reset()
        if values.get("port") == "awake":
            self.register(skip_to_status_pattern(values["cident"]), handler)
        else:
            self.register(STEP_PATTERN, handler)
        self.go()

    def close(self) -> None:
        self.channel.close()


def _bindings(pattern: Pattern, event: ParsedEvent) -> dict:
    """Resolve the pattern's current(...) bindings from the event."""
    out = {}
    for action in pattern.actions:
        if isinstance(action, Current):
            for attr, var in action.items:
                if var is None:
                    continue
                value = event.get(attr)
                if value is not ABSENT:
                    out[var] = value
    return out
