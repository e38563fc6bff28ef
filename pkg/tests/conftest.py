"""Shared fixtures and the scripted analyzer used by protocol tests."""

from __future__ import annotations

import threading

import pytest

from codeine.channel import ChannelClosed, memory_pipe
from codeine.driver import DriverOptions, DriverSession
from codeine.events import ControlMessage, ParsedEvent, parse_line
from codeine.programs import TOY_PROGRAM, load_program, propag_text, queens_text
from codeine.solver import make_step_clock


@pytest.fixture
def toy_program():
    return load_program(TOY_PROGRAM)


@pytest.fixture
def queens6():
    return load_program(queens_text(6))


def collect_events(program, sink_fields=("chrono", "port")):
    """Run a program, returning one tuple per event for quick assertions."""
    from codeine.solver import run_program

    rows = []

    def sink(handle):
        rows.append(tuple(getattr(handle, f) for f in sink_fields))

    stats = run_program(program, sink, clock=make_step_clock(0))
    return rows, stats


def drive_and_collect(program, pattern_texts, *, clock=None, max_solutions=None,
                      on_sync=None):
    """Serve a driver in a thread and consume it with a scripted client.

    Returns the emitted events as ParsedEvent objects, in order.  Sync
    events are acknowledged with GO immediately (after calling on_sync,
    when given).
    """
    driver_end, client_end = memory_pipe()
    session = DriverSession(
        program, driver_end,
        DriverOptions(clock=clock, max_solutions=max_solutions),
    )
    stats_box = {}

    def serve():
        stats_box["stats"] = session.serve()

    worker = threading.Thread(target=serve)
    worker.start()
    events = []
    try:
        msg = parse_line(client_end.recv_line(None))
        assert isinstance(msg, ControlMessage) and msg.kind == "handshake"
        for text in pattern_texts:
            client_end.send_line(f"ADD {text}")
            reply = parse_line(client_end.recv_line(None))
            assert isinstance(reply, ControlMessage) and reply.kind == "ok", reply
        client_end.send_line("GO")
        while True:
            try:
                line = client_end.recv_line(None)
            except ChannelClosed:
                break
            msg = parse_line(line)
            if not isinstance(msg, ParsedEvent):
                continue
            events.append(msg)
            if msg.sync:
                if on_sync is not None:
                    on_sync(msg, client_end)
                client_end.send_line("GO")
    finally:
        worker.join(timeout=30)
    return events, stats_box.get("stats")


def chrono_label_pairs(events):
    """Flatten emitted events into (chrono, label) pairs."""
    pairs = []
    for event in events:
        for label in event.matched:
            pairs.append((event.attrs["chrono"], label))
    return pairs
