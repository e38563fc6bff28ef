"""Benchmark harness: program time, filtering overhead, trace volume.

For each benchmark program the harness measures:

* the untraced run time and the mean time per event;
* the filtering overhead of each never-matching probe (and all probes in
  parallel), run with the driver active but nothing emitted;
* the generation+communication cost of each trace-volume workload, with
  matched events serialized into a byte-counting sink;
* the exhaustive default trace, the denominator for size comparisons.

Every measurement batches runs until a minimum accumulated wall time is
reached, repeats the batch, and reports the mean and the maximum relative
deviation.  Event counts, matched counts and byte counts are asserted
identical across repeats; only times may vary.
"""

from __future__ import annotations

import io
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

from .driver import PatternBase, emit_default_trace, filter_run
from .pattern_sets import OVERHEAD_PROBES, VOLUME_SETS, combined_volume_patterns
from .programs import Program, load_program, propag_text, queens_text, TOY_PROGRAM
from .solver import run_program

DEFAULT_PROGRAMS = ("toy", "queens:8", "propag:70000")


@dataclass
class Measurement:
    kind: str                  # "prog" | "driver" | "gcom" | "trace"
    label: str
    time_ms: float
    ratio: Optional[float] = None
    bytes_out: Optional[int] = None
    matched: Optional[int] = None
    rel_dev: float = 0.0
    raw_times_ms: tuple = ()


@dataclass
class BenchReport:
    program: str
    events: int
    t_prog_ms: float
    epsilon_ns: float          # untraced time per event
    default_trace_bytes: int
    measurements: list = field(default_factory=list)

    def rows(self) -> list[dict]:
        out = []
        for m in self.measurements:
            out.append({
                "program": self.program,
                "kind": m.kind,
                "label": m.label,
                "events": str(self.events),
                "time_ms": f"{m.time_ms:.3f}",
                "ratio": "" if m.ratio is None else f"{m.ratio:.3f}",
                "bytes": "" if m.bytes_out is None else str(m.bytes_out),
                "matched": "" if m.matched is None else str(m.matched),
                "rel_dev": f"{m.rel_dev:.4f}",
            })
        return out


CSV_COLUMNS = ("program", "kind", "label", "events", "time_ms", "ratio",
               "bytes", "matched", "rel_dev")


def resolve_program(name: str) -> Program:
    if name == "toy":
        return load_program(TOY_PROGRAM)
    if name.startswith("queens"):
        n = int(name.split(":")[1]) if ":" in name else 8
        return load_program(queens_text(n))
    if name.startswith("propag"):
        n = int(name.split(":")[1]) if ":" in name else 70000
        return load_program(propag_text(n))
    raise ValueError(f"unknown benchmark program {name!r}")


def _measure(workload: Callable[[], object], repeat: int, min_seconds: float):
    """Repeats timed batches; returns (per-run ms list, last workload result)."""
    times_ms = []
    result = None
    for _ in range(max(1, repeat)):
        runs = 0
        start = time.perf_counter()
        while True:
            result = workload()
            runs += 1
            elapsed = time.perf_counter() - start
            if elapsed >= min_seconds:
                break
        times_ms.append(elapsed * 1000.0 / runs)
    return times_ms, result


def _stats(times_ms) -> tuple[float, float]:
    mean = sum(times_ms) / len(times_ms)
    dev = max(abs(t - mean) for t in times_ms) / mean if mean > 0 else 0.0
    return mean, dev


class _NullWriter(io.TextIOBase):
    def write(self, s):
        return len(s)


def bench_program(name: str, *, repeat: int = 3, min_seconds: float = 2.0,
                  log: Callable[[str], None] = lambda s: None) -> BenchReport:
    program = resolve_program(name)

    log(f"[{name}] measuring untraced run")
    times, stats = _measure(lambda: run_program(program), repeat, min_seconds)
    t_prog_ms, dev = _stats(times)
    events = stats.events
    epsilon_ns = t_prog_ms * 1e6 / events if events else 0.0

    report = BenchReport(
        program=name, events=events, t_prog_ms=t_prog_ms,
        epsilon_ns=epsilon_ns, default_trace_bytes=0,
    )
    report.measurements.append(Measurement(
        kind="prog", label="untraced", time_ms=t_prog_ms, rel_dev=dev,
        raw_times_ms=tuple(times),
    ))

    probe_sets = dict(OVERHEAD_PROBES)
    driver_sets = {name_: (text,) for name_, text in probe_sets.items()}
    driver_sets["all_probes"] = tuple(probe_sets.values())
    for set_name, texts in driver_sets.items():
        base = PatternBase()
        base.add_texts(texts)
        log(f"[{name}] driver overhead: {set_name}")
        times, result = _measure(lambda: filter_run(program, base), repeat, min_seconds)
        mean, dev = _stats(times)
        assert result.matched_events == 0, f"probe {set_name} matched events"
        report.measurements.append(Measurement(
            kind="driver", label=set_name, time_ms=mean,
            ratio=mean / t_prog_ms if t_prog_ms else None,
            matched=0, rel_dev=dev, raw_times_ms=tuple(times),
        ))

    gcom_sets = {k: tuple(v) for k, v in VOLUME_SETS.items()}
    gcom_sets["combined"] = combined_volume_patterns()
    for set_name, texts in gcom_sets.items():
        base = PatternBase()
        base.add_texts(texts)
        log(f"[{name}] generation+communication: {set_name}")
        times, result = _measure(lambda: filter_run(program, base), repeat, min_seconds)
        mean, dev = _stats(times)
        report.measurements.append(Measurement(
            kind="gcom", label=set_name, time_ms=mean,
            ratio=mean / t_prog_ms if t_prog_ms else None,
            bytes_out=result.bytes_emitted, matched=result.matched_events,
            rel_dev=dev, raw_times_ms=tuple(times),
        ))

    log(f"[{name}] default trace")
    sinkhole = _NullWriter()
    times, nbytes = _measure(
        lambda: emit_default_trace(program, sinkhole), repeat=1,
        min_seconds=0.0,
    )
    report.default_trace_bytes = nbytes
    report.measurements.append(Measurement(
        kind="trace", label="default", time_ms=times[0],
        ratio=times[0] / t_prog_ms if t_prog_ms else None,
        bytes_out=nbytes, rel_dev=0.0, raw_times_ms=tuple(times),
    ))
    return report


def run_suite(programs: Iterable[str] = DEFAULT_PROGRAMS, *, repeat: int = 3,
              min_seconds: float = 2.0, log=lambda s: None) -> list[BenchReport]:
    return [
        bench_program(p, repeat=repeat, min_seconds=min_seconds, log=log)
        for p in programs
    ]


def format_text(reports: Iterable[BenchReport]) -> str:
    lines = []
    for r in reports:
        lines.append(
            f"program {r.program}: events={r.events} "
            f"t_prog={r.t_prog_ms:.1f}ms eps={r.epsilon_ns:.0f}ns/event "
            f"default_trace={r.default_trace_bytes}B"
        )
        for m in r.measurements:
            ratio = f" ratio={m.ratio:.3f}" if m.ratio is not None else ""
            size = f" bytes={m.bytes_out}" if m.bytes_out is not None else ""
            matched = f" matched={m.matched}" if m.matched is not None else ""
            lines.append(
                f"  {m.kind:6s} {m.label:14s} {m.time_ms:10.2f}ms"
                f"{ratio}{size}{matched} dev={m.rel_dev:.2%}"
            )
    return "\n".join(lines)


def format_csv(reports: Iterable[BenchReport]) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for r in reports:
        for row in r.rows():
            lines.append(",".join(row[c] for c in CSV_COLUMNS))
    return "\n".join(lines) + "\n"
