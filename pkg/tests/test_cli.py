import subprocess
import sys
import threading

import pytest

from codeine.channel import ChannelClosed, connect
from codeine.cli import main
from codeine.events import ControlMessage, parse_event, parse_line
from codeine.mediator import STEP_PATTERN
from codeine.programs import TOY_PROGRAM


def run_cli(args, input_text=None):
    proc = subprocess.run(
        [sys.executable, "-m", "codeine.cli", *args],
        capture_output=True, text=True, input=input_text, timeout=120,
    )
    return proc


def test_run_toy_prints_solution():
    proc = run_cli(["run", "builtin:toy"])
    assert proc.returncode == 0
    assert "I=1" in proc.stdout and "A=2" in proc.stdout
    assert "solutions=1" in proc.stdout


def test_run_infeasible_prints_no_solution():
    proc = run_cli(["run", "builtin:propag:50"])
    assert proc.returncode == 0
    assert "no solution" in proc.stdout


def test_run_missing_file_exits_2():
    proc = run_cli(["run", "does/not/exist.fd"])
    assert proc.returncode == 2


def test_run_parse_error_nonzero_exit(tmp_path):
    bad = tmp_path / "bad.fd"
    bad.write_text("var ;;;")
    proc = run_cli(["run", str(bad)])
    assert proc.returncode == 1
    assert "line" in proc.stderr


def test_run_program_file(tmp_path):
    source = tmp_path / "toy.fd"
    source.write_text(TOY_PROGRAM)
    proc = run_cli(["run", str(source)])
    assert "I=1" in proc.stdout


def test_trace_writes_file(tmp_path, capsys):
    out = tmp_path / "trace.xml"
    rc = main(["trace", "builtin:toy", "--out", str(out), "--seed-clock", "0"])
    assert rc == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 28
    assert parse_event(lines[0]).port == "newVariable"
    captured = capsys.readouterr()
    assert str(out.stat().st_size) in captured.out


def test_trace_respects_max_solutions(tmp_path):
    full = tmp_path / "full.xml"
    capped = tmp_path / "capped.xml"
    main(["trace", "builtin:queens:6", "--out", str(full)])
    main(["trace", "builtin:queens:6", "--out", str(capped), "--max-solutions", "1"])
    assert capped.stat().st_size < full.stat().st_size


def test_debug_session_scripted():
    script = "step\nstep\nstep\ncurrent vdom\nquit\n"
    proc = run_cli(["debug", "builtin:toy", "--seed-clock", "0"], input_text=script)
    assert proc.returncode == 0
    out = proc.stdout
    assert "1 newVariable v1=[0-268435455]" in out
    assert "2 newVariable v2=[0-268435455]" in out
    assert "3 newConstraint c1" in out
    assert "4 reduce c1 v1=[1-3] W=[0,4-268435455]" in out
    assert "vdom = [1-3]" in out
    assert "aborted" in out


def test_debug_full_run_to_completion():
    # continue with the step pattern active stops at every event; reset
    # then continue lets the run finish
    script = "reset\ncontinue\n"
    proc = run_cli(["debug", "builtin:toy"], input_text=script)
    assert proc.returncode == 0
    assert "execution finished" in proc.stdout


def test_serve_over_tcp(tmp_path):
    patterns = tmp_path / "base.patterns"
    patterns.write_text(
        "% preloaded base\n"
        "red: when port=reduce do current(chrono,vident)\n.\n"
    )
    proc = subprocess.Popen(
        [sys.executable, "-m", "codeine.cli", "serve", "builtin:toy",
         "--port", "0", "--patterns", str(patterns), "--seed-clock", "0"],
        stdout=subprocess.PIPE, text=True,
    )
    try:
        banner = proc.stdout.readline()
        port = int(banner.strip().rsplit(":", 1)[1])
        chan = connect("127.0.0.1", port)
        hello = parse_line(chan.recv_line(None))
        assert isinstance(hello, ControlMessage) and hello.kind == "handshake"
        chan.send_line("GO")
        events = []
        while True:
            try:
                line = chan.recv_line(None)
            except ChannelClosed:
                break
            events.append(parse_event(line))
        assert [e.attrs["chrono"] for e in events] == [4, 5, 11, 13, 21, 25]
        assert all(e.matched == ("red",) for e in events)
    finally:
        proc.wait(timeout=60)
    assert proc.returncode == 0


def test_bench_quick_csv(tmp_path, capsys):
    out = tmp_path / "bench.csv"
    rc = main(["bench", "--programs", "toy", "--quick", "--out", str(out)])
    assert rc == 0
    lines = out.read_text().splitlines()
    header = lines[0].split(",")
    assert header[0] == "program" and "ratio" in header
    assert len(lines) > 5
    captured = capsys.readouterr()
    assert "program toy" in captured.out
    assert "untraced" in captured.out
