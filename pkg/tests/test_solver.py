import itertools

import pytest

from codeine.domain import FiniteDomain, format_domain, parse_domain
from codeine.events import ABSENT
from codeine.programs import TOY_PROGRAM, load_program, propag_text, queens_text
from codeine.solver import (
    AbortRun,
    UnknownAttributeError,
    classify_update,
    make_step_clock,
    run_program,
)


def record_run(program, attrs=("port",), **opts):
    rows = []

    def sink(handle):
        row = {"chrono": handle.chrono, "port": handle.port,
               "depth": handle.depth, "node": handle.node}
        for attr in attrs:
            row[attr] = handle.get(attr)
        rows.append(row)

    opts.setdefault("clock", make_step_clock(0))
    stats = run_program(program, sink, **opts)
    return rows, stats


# -- the toy trace: the anchor oracle ------------------------------------

TOY_PORTS = [
    "newVariable", "newVariable", "newConstraint", "reduce", "reduce", "suspend",
    "beginExec", "choicePoint", "newConstraint", "post", "reduce", "schedule",
    "reduce", "entail", "awake", "reject", "failure", "backTo", "newConstraint",
    "post", "reduce", "schedule", "entail", "awake", "reduce", "entail",
    "solution", "endExec",
]


def test_toy_trace_ports_and_domains():
    prog = load_program(TOY_PROGRAM)
    rows, stats = record_run(prog, attrs=("vident", "vdom", "delta", "cident"))
    assert [r["port"] for r in rows] == TOY_PORTS
    assert [r["chrono"] for r in rows] == list(range(1, 29))

    # events 4 and 5: the two element reductions
    assert rows[3]["vident"] == "v1"
    assert rows[3]["vdom"] == parse_domain("[1-3]")
    assert rows[3]["delta"] == parse_domain("[0,4-268435455]")
    assert rows[4]["vident"] == "v2"
    assert rows[4]["vdom"] == parse_domain("[2,5,7]")
    assert rows[4]["delta"] == parse_domain("[0-1,3-4,6,8-268435455]")
    assert rows[5]["cident"] == "c1"

    assert stats.solutions == 1
    assert stats.failures == 1


def test_toy_solution_assignment():
    prog = load_program(TOY_PROGRAM)
    stats = run_program(prog, collect_solutions=True)
    assert stats.solution_assignments == [{"I": 1, "A": 2}]


def test_empty_program():
    rows, stats = record_run(load_program(""))
    assert [(r["chrono"], r["port"]) for r in rows] == [(1, "beginExec"), (2, "endExec")]
    assert stats.solutions == 0


def test_single_fixed_var_solution_at_depth_zero():
    rows, _ = record_run(load_program("var X in 1..1; label([X]);"))
    ports = [r["port"] for r in rows]
    assert "choicePoint" not in ports
    solution = next(r for r in rows if r["port"] == "solution")
    assert solution["depth"] == 0


# -- search correctness ---------------------------------------------------

def brute_force_queens(n):
    count = 0
    for perm in itertools.permutations(range(1, n + 1)):
        if all(
            abs(perm[i] - perm[j]) != j - i
            for i in range(n) for j in range(i + 1, n)
        ):
            count += 1
    return count


@pytest.mark.parametrize("n", [4, 5, 6])
def test_queens_solution_counts_match_enumeration(n):
    stats = run_program(load_program(queens_text(n)))
    assert stats.solutions == brute_force_queens(n)


def test_queens_solutions_are_valid_boards():
    stats = run_program(load_program(queens_text(5)), collect_solutions=True)
    for board in stats.solution_assignments:
        values = [board[f"Q{i}"] for i in range(1, 6)]
        assert sorted(values) == [1, 2, 3, 4, 5]
        for i in range(5):
            for j in range(i + 1, 5):
                assert abs(values[i] - values[j]) != j - i


def test_propag_is_infeasible():
    stats = run_program(load_program(propag_text(200)))
    assert stats.solutions == 0
    assert stats.failures == 1


def test_propag_dominated_by_reduce_events():
    rows, _ = record_run(load_program(propag_text(500)))
    counts = {}
    for r in rows:
        counts[r["port"]] = counts.get(r["port"], 0) + 1
    assert counts["reduce"] == max(counts.values())


def test_determinism_bit_identical():
    prog = load_program(queens_text(5))

    def trace():
        rows = []

        def sink(handle):
            rows.append((handle.chrono, handle.port, handle.depth, handle.node,
                         handle.time, handle.get("vident"), handle.get("cident"),
                         handle.get("vdom")))

        run_program(prog, sink, clock=make_step_clock(3))
        return rows

    assert trace() == trace()


def test_max_solutions_stops_early():
    prog = load_program(queens_text(6))
    stats = run_program(prog, max_solutions=1)
    assert stats.solutions == 1
    full = run_program(prog)
    assert stats.events < full.events


def test_no_labeling_directive_means_no_solution_event():
    rows, stats = record_run(load_program("var X in 1..5; constraint eqc(X,3);"))
    assert [r["port"] for r in rows] == [
        "newVariable", "newConstraint", "reduce", "entail", "beginExec", "endExec",
    ]
    assert stats.solutions == 0


def test_infeasible_initial_posting():
    rows, stats = record_run(load_program("var X in 1..3; constraint eqc(X,7); label([X]);"))
    ports = [r["port"] for r in rows]
    assert "reject" in ports and "failure" in ports
    assert stats.solutions == 0


# -- propagation semantics -------------------------------------------------

def test_lt_bound_reduction_and_update_kind():
    prog = load_program(
        "var X in 5..5; var Y in 1..9; constraint lt(X,Y); label([X,Y]);"
    )
    rows, _ = record_run(prog, attrs=("vident", "vdom", "update"))
    reduce_rows = [r for r in rows if r["port"] == "reduce"]
    assert reduce_rows[0]["vident"] == "v2"
    assert reduce_rows[0]["vdom"] == parse_domain("[6-9]")
    assert reduce_rows[0]["update"] == "min"
    # max(X) < min(Y) after the cut, so the constraint is proved
    idx = rows.index(reduce_rows[0])
    assert rows[idx + 1]["port"] == "entail"


def test_entail_reachable_for_disjoint_neq():
    prog = load_program(
        "var X in 1..3; var Y in 7..9; constraint neq(X,Y);"
    )
    rows, _ = record_run(prog)
    assert [r["port"] for r in rows[-4:]] == ["newConstraint", "entail", "beginExec", "endExec"]


def test_awake_bracketing():
    rows, _ = record_run(load_program(queens_text(5)), attrs=("cident",))
    current = None
    for row in rows:
        port = row["port"]
        if port == "awake":
            assert current is None
            current = row["cident"]
        elif port in ("suspend", "entail", "reject") and current is not None:
            assert row["cident"] == current
            current = None
        elif port == "reduce" and current is not None:
            assert row["cident"] == current
        else:
            assert port != "awake"


def test_reduce_monotonic_and_delta_exact():
    prog = load_program(queens_text(5))
    domains = {}
    errors = []

    def sink(handle):
        if handle.port == "newVariable":
            domains[handle.get("vident")] = handle.get("vdom")
        elif handle.port == "reduce":
            vid = handle.get("vident")
            before = domains[vid]
            after = handle.get("vdom")
            delta = handle.get("delta")
            if delta.is_empty():
                errors.append(f"empty delta at {handle.chrono}")
            if after.intersect(delta).size() != 0:
                errors.append(f"delta overlaps result at {handle.chrono}")
            if before.difference(after) != delta:
                errors.append(f"delta mismatch at {handle.chrono}")
            domains[vid] = after
        elif handle.port == "backTo":
            domains.clear()
            for var, dom in handle_snapshot(handle):
                domains[var] = dom

    def handle_snapshot(handle):
        text = handle.get("full_dom")
        for chunk in text.split():
            vid, _, dom = chunk.partition("=")
            yield vid, parse_domain(dom)

    run_program(prog, sink)
    assert errors == []


def test_trail_restores_domains_at_back_to():
    prog = load_program(queens_text(5))
    at_node = {}
    errors = []

    def snapshot(handle):
        return handle.get("full_dom")

    def sink(handle):
        if handle.port == "choicePoint":
            at_node[handle.node] = snapshot(handle)
        elif handle.port == "backTo":
            if snapshot(handle) != at_node[handle.node]:
                errors.append(handle.chrono)

    run_program(prog, sink)
    assert errors == []


def test_depth_law():
    prog = load_program(queens_text(5))
    node_depth = {0: 0}
    errors = []
    current = [0]

    def sink(handle):
        if handle.port == "choicePoint":
            parent_depth = node_depth[current[0]]
            if handle.depth != parent_depth + 1:
                errors.append(("child", handle.chrono))
            node_depth[handle.node] = handle.depth
            current[0] = handle.node
        elif handle.port == "backTo":
            if handle.depth != node_depth[handle.node]:
                errors.append(("backTo", handle.chrono))
            current[0] = handle.node

    run_program(prog, sink)
    assert errors == []


def test_schedule_queue_has_no_duplicates():
    prog = load_program(queens_text(5))
    queued = set()
    errors = []

    def sink(handle):
        if handle.port == "schedule":
            cid = handle.get("cident")
            if cid in queued:
                errors.append((handle.chrono, cid))
            queued.add(cid)
        elif handle.port == "awake":
            queued.discard(handle.get("cident"))
        elif handle.port == "backTo":
            queued.clear()

    run_program(prog, sink)
    assert errors == []


def test_stage_flag():
    rows, _ = record_run(load_program(TOY_PROGRAM), attrs=("stage",))
    by_port = {(r["port"], r["chrono"]): r["stage"] for r in rows}
    assert by_port[("newVariable", 1)] == "init"
    assert by_port[("choicePoint", 8)] == "init"       # the two-branch choice
    assert by_port[("solution", 27)] == "labeling"

    qrows, _ = record_run(load_program(queens_text(4)), attrs=("stage",))
    for r in qrows:
        if r["port"] == "post":
            assert r["stage"] == "labeling"


def test_decision_constraints_emit_post_initial_ones_do_not():
    rows, _ = record_run(load_program(queens_text(4)))
    first_cp = next(i for i, r in enumerate(rows) if r["port"] == "choicePoint")
    assert all(r["port"] != "post" for r in rows[:first_cp])
    assert any(r["port"] == "post" for r in rows[first_cp:])


# -- attributes -------------------------------------------------------------

def test_time_uses_injected_clock():
    rows, _ = record_run(load_program(TOY_PROGRAM), attrs=("time",))
    # default record_run clock step is 0
    assert all(r["time"] == 0 for r in rows)
    rows2 = []
    run_program(load_program(TOY_PROGRAM), lambda h: rows2.append(h.time),
                clock=make_step_clock(5))
    assert rows2 == [5 * i for i in range(len(rows2))]


def test_attribute_presence_follows_port():
    variable_ports = {"newVariable", "reduce"}
    constraint_ports = {"newConstraint", "post", "awake", "reduce",
                        "suspend", "entail", "reject", "schedule"}
    seen = set()

    def sink(handle):
        seen.add(handle.port)
        assert (handle.get("vident") is not ABSENT) == (handle.port in variable_ports)
        assert (handle.get("cident") is not ABSENT) == (handle.port in constraint_ports)
        assert (handle.get("delta") is not ABSENT) == (handle.port == "reduce")
        assert (handle.get("update") is not ABSENT) == (handle.port == "reduce")
        assert handle.get("chrono") == handle.chrono
        assert handle.get("stage") in ("init", "labeling")

    run_program(load_program(TOY_PROGRAM), sink)
    assert "reduce" in seen and "solution" in seen


def test_unknown_attribute_raises():
    def sink(handle):
        with pytest.raises(UnknownAttributeError):
            handle.get("nonsense")
        with pytest.raises(UnknownAttributeError):
            handle.has("nonsense")
        raise AbortRun()

    stats = run_program(load_program(TOY_PROGRAM), sink)
    assert stats.aborted


def test_costly_counter_tracks_materialization():
    prog = load_program(TOY_PROGRAM)

    stats = run_program(prog, lambda h: None)
    assert stats.costly_computations == 0

    stats = run_program(prog, lambda h: h.get("vdom"))
    assert stats.costly_computations > 0

    def cheap(handle):
        handle.get("chrono")
        handle.get("port")
        handle.get("update")      # classified from bounds, not counted
        handle.has("delta")
    stats = run_program(prog, cheap)
    assert stats.costly_computations == 0


def test_sink_abort_still_ends_with_end_exec():
    ports = []

    def sink(handle):
        ports.append(handle.port)
        if handle.chrono == 3:
            raise AbortRun()

    stats = run_program(load_program(TOY_PROGRAM), sink)
    assert stats.aborted
    assert ports[-1] == "endExec"
    assert len(ports) <= 5


def test_default_domain_env_override(monkeypatch):
    monkeypatch.setenv("CODEINE_MAX_FD", "99")
    rows, _ = record_run(load_program("var X;"), attrs=("vdom",))
    assert rows[0]["vdom"] == parse_domain("[0-99]")


def test_default_domain_argument_beats_env(monkeypatch):
    monkeypatch.setenv("CODEINE_MAX_FD", "99")
    rows = []
    run_program(load_program("var X;"), lambda h: rows.append(h.get("vdom")),
                default_max=7)
    assert rows[0] == parse_domain("[0-7]")


def test_classify_update_rules_in_order():
    d = parse_domain
    assert classify_update(d("[1-9]"), d("[6-9]")) == "min"
    assert classify_update(d("[1-9]"), d("[1-4]")) == "max"
    # one-sided removals classify by the bound rule even when the
    # result is a singleton; "val" needs removals on both sides
    assert classify_update(d("[1-9]"), d("[9]")) == "min"
    assert classify_update(d("[1-9]"), d("[1]")) == "max"
    assert classify_update(d("[1-9]"), d("[4]")) == "val"
    assert classify_update(d("[1-9]"), d("[1-3,7-9]")) == "any"


def test_descending_and_firstfail_strategies():
    prog = load_program(
        "var X in 1..3; var Y in 1..2;"
        "label([X,Y]) with firstfail, descending;"
    )
    stats = run_program(prog, collect_solutions=True)
    # firstfail picks Y (smaller domain) first; descending tries 2 first
    assert stats.solution_assignments[0] == {"X": 3, "Y": 2}
    assert stats.solutions == 6
