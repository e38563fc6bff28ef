"""Deterministic finite-domain solver emitting trace events through a sink.

The engine runs propagation to fixpoint after every constraint posting,
then enumerates labeling decisions depth-first with chronological
backtracking.  Every state transition emits one of the 15 trace ports via
the sink callback, in strict chrono order.  Event attributes that are
expensive to build (domains as values, withdrawn sets, external constraint
text) are computed lazily through the event handle and counted, so a
caller that never asks for them never pays for them.

Determinism: the propagation queue is FIFO, watchers fire in constraint
creation order, values are enumerated per the declared strategy, and the
clock is injectable, so two runs of one program produce identical event
sequences.
"""

from __future__ import annotations

import os
import time as _time
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional

from .domain import EMPTY_DOMAIN, FiniteDomain, format_domain
from .events import ABSENT, CONSTRAINT_PORTS, PORT_SET, VARIABLE_PORTS
from .programs import (
    DEFAULT_MAX_VALUE,
    Disj,
    Element,
    Eq,
    EqConst,
    Labeling,
    Leq,
    Lt,
    Neq,
    NeqOffset,
    Program,
)

ENV_MAX_FD = "CODEINE_MAX_FD"


class AbortRun(Exception):
    """Raised by a sink to stop the run; the engine still emits endExec."""


class UnknownAttributeError(KeyError):
    """An attribute name outside the trace model was requested."""


@dataclass
class RunStats:
    events: int = 0
    solutions: int = 0
    failures: int = 0
    costly_computations: int = 0
    solution_assignments: list = field(default_factory=list)
    aborted: bool = False


def make_step_clock(step_ms: int) -> Callable[[], int]:
    """A clock advancing by a fixed number of ms per event; reproducible."""
    counter = [-1]

    def clock() -> int:
        counter[0] += 1
        return counter[0] * step_ms

    return clock


def classify_update(old: FiniteDomain, new: FiniteDomain) -> str:
    """Kind of bound update: min, max, val or any (checked in that order)."""
    if new.min() > old.min() and new == old.clamp(new.min(), old.max()):
        return "min"
    if new.max() < old.max() and new == old.clamp(old.min(), new.max()):
        return "max"
    if new.is_singleton():
        return "val"
    return "any"


_ALWAYS_ATTRS = frozenset({"chrono", "port", "depth", "node", "time", "stage"})
_KNOWN_ATTRS = _ALWAYS_ATTRS | frozenset({
    "vident", "vname", "vdom", "cident", "cname", "cexternal",
    "delta", "update", "full_dom", "named_vars",
})


class _Var:
    __slots__ = ("idx", "ident", "name", "domain")

    def __init__(self, idx: int, name: str, domain: FiniteDomain):
        self.idx = idx
        self.ident = f"v{idx + 1}"
        self.name = name
        self.domain = domain


class _Cstr:
    __slots__ = ("idx", "ident", "name", "term", "status", "trigger")

    def __init__(self, idx: int, ident: str, name, term, trigger: str):
        self.idx = idx               # store slot, reused after backtracking
        self.ident = ident           # execution-unique identifier
        self.name = name
        self.term = term
        self.status = "posted"
        self.trigger = trigger


class EventHandle:
    """Lazy view over the current event; valid while the sink holds it."""

    __slots__ = ("_eng", "port", "chrono", "depth", "node", "time", "stage",
                 "_var", "_cstr", "_old", "_new")

    def __init__(self, eng, port, chrono, depth, node, time_ms, stage, var, cstr, old, new):
        self._eng = eng
        self.port = port
        self.chrono = chrono
        self.depth = depth
        self.node = node
        self.time = time_ms
        self.stage = stage
        self._var = var
        self._cstr = cstr
        self._old = old
        self._new = new

    def has(self, attr: str) -> bool:
        """Structural presence test; never computes the value."""
        if attr in _ALWAYS_ATTRS or attr in ("full_dom", "named_vars"):
            return True
        if attr in ("vident", "vdom"):
            return self._var is not None
        if attr == "vname":
            return self._var is not None and self._var.name is not None
        if attr in ("cident", "cexternal"):
            return self._cstr is not None
        if attr == "cname":
            return self._cstr is not None and self._cstr.name is not None
        if attr in ("delta", "update"):
            return self.port == "reduce"
        raise UnknownAttributeError(attr)

    def get(self, attr: str):
        """Attribute value, computed on demand; ABSENT when not carried."""
        if attr == "chrono":
            return self.chrono
        if attr == "port":
            return self.port
        if attr == "depth":
            return self.depth
        if attr == "node":
            return self.node
        if attr == "time":
            return self.time
        if attr == "stage":
            return self.stage
        var = self._var
        if attr == "vident":
            return var.ident if var is not None else ABSENT
        if attr == "vname":
            return var.name if var is not None and var.name is not None else ABSENT
        if attr == "vdom":
            if var is None:
                return ABSENT
            self._eng.costly_computations += 1
            return self._new if self._new is not None else var.domain
        cstr = self._cstr
        if attr == "cident":
            return cstr.ident if cstr is not None else ABSENT
        if attr == "cname":
            return cstr.name if cstr is not None and cstr.name is not None else ABSENT
        if attr == "cexternal":
            if cstr is None:
                return ABSENT
            self._eng.costly_computations += 1
            return self._eng.format_term(cstr.term)
        if attr == "delta":
            if self.port != "reduce":
                return ABSENT
            self._eng.costly_computations += 1
            return self._old.difference(self._new)
        if attr == "update":
            if self.port != "reduce":
                return ABSENT
            return classify_update(self._old, self._new)
        if attr == "full_dom":
            self._eng.costly_computations += 1
            return " ".join(
                f"{v.ident}={format_domain(v.domain)}" for v in self._eng.vars
            )
        if attr == "named_vars":
            self._eng.costly_computations += 1
            return " ".join(v.ident for v in self._eng.vars if v.name is not None)
        raise UnknownAttributeError(attr)

    def present_attrs(self) -> list[str]:
        """The event's own attributes (excludes computed full_dom/named_vars)."""
        out = ["chrono", "depth", "node", "time", "stage"]
        if self._var is not None:
            out.append("vident")
            if self._var.name is not None:
                out.append("vname")
        if self._cstr is not None:
            out.append("cident")
            if self._cstr.name is not None:
                out.append("cname")
            out.append("cexternal")
        if self._var is not None:
            out.append("vdom")
        if self.port == "reduce":
            out.extend(("delta", "update"))
        return out


class _ChoicePoint:
    __slots__ = ("node", "depth", "mark", "kind", "resume",
                 "alt", "var_idx", "snapshot", "last", "descending")

    def __init__(self, node, depth, mark, kind, resume):
        self.node = node
        self.depth = depth
        self.mark = mark
        self.kind = kind          # "disj" | "label"
        self.resume = resume
        self.alt = None
        self.var_idx = -1
        self.snapshot = None
        self.last = 0
        self.descending = False


def _disjoint_shifted(a: FiniteDomain, b: FiniteDomain, k: int) -> bool:
    """True iff a and (b + k) share no value."""
    i = j = 0
    ra, rb = a.ranges, b.ranges
    while i < len(ra) and j < len(rb):
        a1, b1 = ra[i]
        a2, b2 = rb[j][0] + k, rb[j][1] + k
        if max(a1, a2) <= min(b1, b2):
            return False
        if b1 < b2:
            i += 1
        else:
            j += 1
    return True


class Engine:
    """One run of one program; use :func:`run_program` for the plain API."""

    def __init__(self, program: Program, sink=None, *, max_solutions=None,
                 clock=None, default_max=None, collect_solutions=False):
        self.program = program
        self.sink = sink
        self.max_solutions = max_solutions
        self.collect_solutions = collect_solutions
        if default_max is None:
            default_max = int(os.environ.get(ENV_MAX_FD, DEFAULT_MAX_VALUE))
        self.default_max = default_max
        self._clock_arg = clock

        self.vars: list[_Var] = []
        self.by_name: dict[str, int] = {}
        self.cstrs: list[_Cstr] = []
        self.watchers: list[list[int]] = []
        self.queue: deque[int] = deque()
        self.in_queue: set[int] = set()
        self.trail: list = []
        self.cps: list[_ChoicePoint] = []
        self.chrono = 0
        self.node_counter = 0
        self.cur_node = 0
        self.cur_depth = 0
        self.stage = "init"
        self.costly_computations = 0
        self.stats = RunStats()
        self._aborted = False
        self._began = False
        self._cstr_counter = 0

    # -- public entry ---------------------------------------------------

    def run(self) -> RunStats:
        clock = self._clock_arg
        if clock is None:
            t0 = _time.perf_counter_ns()
            clock = lambda: (_time.perf_counter_ns() - t0) // 1_000_000
        self.clock = clock
        try:
            self._execute()
        except AbortRun:
            self._aborted = True
            self.stats.aborted = True
        try:
            self._emit("endExec")
        except AbortRun:
            self.stats.aborted = True
        self.stats.costly_computations = self.costly_computations
        return self.stats

    # -- event plumbing ---------------------------------------------------

    # beginExec brackets the search: it is emitted lazily before the first
    # search-control event (or before endExec), so declaration and initial
    # posting events keep the leading chrono positions.
    _SEARCH_PORTS = frozenset({"choicePoint", "backTo", "failure", "solution", "endExec"})

    def _emit(self, port, var=None, cstr=None, old=None, new=None):
        if not self._began and port in self._SEARCH_PORTS:
            self._began = True
            self._emit("beginExec")
        self.chrono += 1
        self.stats.events += 1
        if self.sink is None:
            return
        handle = EventHandle(
            self, port, self.chrono, self.cur_depth, self.cur_node,
            self.clock(), self.stage, var, cstr, old, new,
        )
        self.sink(handle)

    def format_term(self, term) -> str:
        v = lambda name: self.vars[self.by_name[name]].ident
        if isinstance(term, Eq):
            return f"eq({v(term.x)},{v(term.y)})"
        if isinstance(term, EqConst):
            return f"eqc({v(term.x)},{term.k})"
        if isinstance(term, Neq):
            return f"neq({v(term.x)},{v(term.y)})"
        if isinstance(term, NeqOffset):
            return f"neq_offset({v(term.x)},{v(term.y)},{term.k})"
        if isinstance(term, Lt):
            return f"lt({v(term.x)},{v(term.y)})"
        if isinstance(term, Leq):
            return f"leq({v(term.x)},{v(term.y)})"
        if isinstance(term, Element):
            table = ",".join(str(k) for k in term.table)
            return f"element({v(term.index)},[{table}],{v(term.value)})"
        if isinstance(term, Disj):
            return f"or({self.format_term(term.left)},{self.format_term(term.right)})"
        raise AssertionError(f"unknown term {term!r}")

    # -- search -----------------------------------------------------------

    def _execute(self):
        for decl in self.program.variables:
            lo = 0 if decl.lo is None else decl.lo
            hi = self.default_max if decl.hi is None else decl.hi
            var = _Var(len(self.vars), decl.name, FiniteDomain.interval(lo, hi))
            self.vars.append(var)
            self.by_name[decl.name] = var.idx
            self.watchers.append([])
            self._emit("newVariable", var=var)

        goals = list(self.program.constraints)
        label_index = len(goals)
        i = 0
        while True:
            if i < label_index:
                decl = goals[i]
                if isinstance(decl.term, Disj):
                    ok = self._apply_term(decl.term, i + 1, search_post=True)
                else:
                    ok = self._post(decl.term, decl.name, search_post=False)
                if ok:
                    i += 1
                    continue
                resume = self._backtrack()
                if resume is None:
                    return
                i = resume
                continue
            if self.program.labeling is None:
                return
            self.stage = "labeling"
            outcome = self._labeling_step()
            if outcome == "solution":
                self.stats.solutions += 1
                if self.collect_solutions:
                    self._record_solution()
                if self.max_solutions and self.stats.solutions >= self.max_solutions:
                    return
                resume = self._backtrack()
                if resume is None:
                    return
                i = resume
            elif outcome == "failed":
                resume = self._backtrack()
                if resume is None:
                    return
                i = resume
            # outcome "decided": loop back into labeling at the same index

    def _record_solution(self):
        assignment = {}
        for name in self.program.labeling.variables:
            var = self.vars[self.by_name[name]]
            assignment[name] = var.domain.min()
        self.stats.solution_assignments.append(assignment)

    def _labeling_step(self) -> str:
        lab: Labeling = self.program.labeling
        var = self._pick_var(lab)
        if var is None:
            self._emit("solution")
            return "solution"
        descending = lab.val_strategy == "descending"
        value = var.domain.max() if descending else var.domain.min()
        cp = self._push_choice_point("label", resume=len(self.program.constraints))
        cp.var_idx = var.idx
        cp.snapshot = var.domain
        cp.last = value
        cp.descending = descending
        if not self._post(EqConst(var.name, value), None, search_post=True):
            return "failed"
        return "decided"

    def _pick_var(self, lab: Labeling) -> Optional[_Var]:
        if lab.var_strategy == "firstfail":
            best = None
            best_size = None
            for name in lab.variables:
                var = self.vars[self.by_name[name]]
                size = var.domain.size()
                if size > 1 and (best_size is None or size < best_size):
                    best, best_size = var, size
            return best
        for name in lab.variables:
            var = self.vars[self.by_name[name]]
            if not var.domain.is_singleton():
                return var
        return None

    def _push_choice_point(self, kind: str, resume: int) -> _ChoicePoint:
        if not self._began:
            self._began = True
            self._emit("beginExec")
        self.node_counter += 1
        cp = _ChoicePoint(
            node=self.node_counter,
            depth=self.cur_depth + 1,
            mark=len(self.trail),
            kind=kind,
            resume=resume,
        )
        self.cur_node = cp.node
        self.cur_depth = cp.depth
        self.cps.append(cp)
        self._emit("choicePoint")
        return cp

    def _backtrack(self) -> Optional[int]:
        while self.cps:
            cp = self.cps[-1]
            if cp.kind == "disj":
                alternative = cp.alt
                exhausted = True
            else:
                dom = cp.snapshot
                value = dom.next_below(cp.last) if cp.descending else dom.next_above(cp.last)
                if value is None:
                    # exhausted label node with no alternative left: drop silently
                    self.cps.pop()
                    continue
                cp.last = value
                following = dom.next_below(value) if cp.descending else dom.next_above(value)
                alternative = value
                exhausted = following is None
            self._rewind(cp.mark)
            self.queue.clear()
            self.in_queue.clear()
            self.cur_node = cp.node
            self.cur_depth = cp.depth
            self._emit("backTo")
            if exhausted:
                self.cps.pop()
            if cp.kind == "disj":
                ok = self._apply_term(alternative, cp.resume, search_post=True)
            else:
                var = self.vars[cp.var_idx]
                ok = self._post(EqConst(var.name, alternative), None, search_post=True)
            if ok:
                return cp.resume
        return None

    def _rewind(self, mark: int):
        trail = self.trail
        while len(trail) > mark:
            entry = trail.pop()
            kind = entry[0]
            if kind == "d":
                self.vars[entry[1]].domain = entry[2]
            elif kind == "s":
                self.cstrs[entry[1]].status = entry[2]
            else:  # retract a constraint created past the mark
                cstr = self.cstrs.pop()
                for name in self._watch_vars(cstr.term):
                    lst = self.watchers[self.by_name[name]]
                    assert lst and lst[-1] == cstr.idx
                    lst.pop()

    def _apply_term(self, term, resume: int, search_post: bool) -> bool:
        if isinstance(term, Disj):
            cp = self._push_choice_point("disj", resume)
            cp.alt = term.right
            return self._apply_term(term.left, resume, search_post=True)
        return self._post(term, None, search_post=search_post)

    @staticmethod
    def _watch_vars(term) -> list[str]:
        if isinstance(term, (Eq, Neq, NeqOffset, Lt, Leq)):
            return [term.x, term.y]
        if isinstance(term, EqConst):
            return [term.x]
        if isinstance(term, Element):
            return [term.index, term.value]
        raise AssertionError(f"unexpected term {term!r}")

    _TRIGGERS = {Eq: "minmax", Lt: "minmax", Leq: "minmax",
                 Neq: "val", NeqOffset: "val", EqConst: "val", Element: "any"}

    def _post(self, term, name, search_post: bool) -> bool:
        self._cstr_counter += 1
        cstr = _Cstr(len(self.cstrs), f"c{self._cstr_counter}", name, term,
                     self._TRIGGERS[type(term)])
        self.cstrs.append(cstr)
        self.trail.append(("c",))
        for var_name in self._watch_vars(term):
            self.watchers[self.by_name[var_name]].append(cstr.idx)
        self._emit("newConstraint", cstr=cstr)
        if search_post:
            self._emit("post", cstr=cstr)
        if not self._run_filter(cstr):
            self.stats.failures += 1
            self._emit("failure")
            return False
        return self._drain_queue()

    def _drain_queue(self) -> bool:
        queue = self.queue
        while queue:
            idx = queue.popleft()
            self.in_queue.discard(idx)
            cstr = self.cstrs[idx]
            if cstr.status != "suspended":
                continue
            self._emit("awake", cstr=cstr)
            if not self._run_filter(cstr):
                self.stats.failures += 1
                self._emit("failure")
                return False
        return True

    def _run_filter(self, cstr: _Cstr) -> bool:
        result = self._filter_term(cstr.term)
        if result is None:
            self.trail.append(("s", cstr.idx, cstr.status))
            cstr.status = "rejected"
            self._emit("reject", cstr=cstr)
            return False
        changes, entailed = result
        for var_idx, new in changes:
            var = self.vars[var_idx]
            old = var.domain
            self.trail.append(("d", var_idx, old))
            var.domain = new
            self._emit("reduce", var=var, cstr=cstr, old=old, new=new)
            became_singleton = len(new.ranges) == 1 and new.ranges[0][0] == new.ranges[0][1]
            bounds_changed = (
                new.ranges[0][0] != old.ranges[0][0]
                or new.ranges[-1][1] != old.ranges[-1][1]
            )
            for widx in self.watchers[var_idx]:
                if widx == cstr.idx or widx in self.in_queue:
                    continue
                watcher = self.cstrs[widx]
                if watcher.status != "suspended":
                    continue
                trigger = watcher.trigger
                if (
                    trigger == "any"
                    or (trigger == "val" and became_singleton)
                    or (trigger == "minmax" and bounds_changed)
                ):
                    self.queue.append(widx)
                    self.in_queue.add(widx)
                    self._emit("schedule", cstr=watcher)
        self.trail.append(("s", cstr.idx, cstr.status))
        cstr.status = "entailed" if entailed else "suspended"
        self._emit("entail" if entailed else "suspend", cstr=cstr)
        return True

    # -- constraint filtering ---------------------------------------------
    # Each filter returns (changes, entailed) with changes ordered by
    # variable index, or None on wipe-out.  The store is untouched on None.

    def _filter_term(self, term):
        dom = lambda name: self.vars[self.by_name[name]].domain
        idx = lambda name: self.by_name[name]

        if isinstance(term, EqConst):
            i = idx(term.x)
            di = dom(term.x)
            if not di.contains(term.k):
                return None
            if di.is_singleton():
                return [], True
            return [(i, FiniteDomain.interval(term.k, term.k))], True

        if isinstance(term, Neq):
            i, j = idx(term.x), idx(term.y)
            return self._filter_neq(i, j, 0)

        if isinstance(term, NeqOffset):
            return self._filter_neq(idx(term.x), idx(term.y), term.k)

        if isinstance(term, Eq):
            i, j = idx(term.x), idx(term.y)
            if i == j:
                return [], self.vars[i].domain.is_singleton()
            di, dj = self.vars[i].domain, self.vars[j].domain
            ci, cj = di, dj
            while True:
                lo = max(ci.min(), cj.min())
                hi = min(ci.max(), cj.max())
                if lo > hi:
                    return None
                ni, nj = ci.clamp(lo, hi), cj.clamp(lo, hi)
                if ni.is_empty() or nj.is_empty():
                    return None
                if ni == ci and nj == cj:
                    break
                ci, cj = ni, nj
            changes = [(k, d) for k, d, o in ((i, ci, di), (j, cj, dj)) if d != o]
            changes.sort()
            entailed = ci.is_singleton() and cj.is_singleton()
            return changes, entailed

        if isinstance(term, Lt) or isinstance(term, Leq):
            off = 1 if isinstance(term, Lt) else 0
            i, j = idx(term.x), idx(term.y)
            if i == j:
                return (None if off else ([], True))
            di, dj = self.vars[i].domain, self.vars[j].domain
            ni = di.clamp(di.min(), dj.max() - off)
            if ni.is_empty():
                return None
            nj = dj.clamp(di.min() + off, dj.max())
            if nj.is_empty():
                return None
            changes = [(k, d) for k, d, o in ((i, ni, di), (j, nj, dj)) if d != o]
            changes.sort()
            entailed = ni.max() + off <= nj.min()
            return changes, entailed

        if isinstance(term, Element):
            i, v = idx(term.index), idx(term.value)
            table = term.table
            di = self.vars[i].domain.clamp(1, len(table))
            if di.is_empty():
                return None
            dv = self.vars[v].domain
            while True:
                valid = [k for k in di.values() if dv.contains(table[k - 1])]
                if not valid:
                    return None
                ni = FiniteDomain.from_values(valid)
                nv = dv.intersect(FiniteDomain.from_values(table[k - 1] for k in valid))
                if nv.is_empty():
                    return None
                if ni == di and nv == dv:
                    break
                di, dv = ni, nv
            changes = [
                (k, d) for k, d, o in ((i, di, self.vars[i].domain), (v, dv, self.vars[v].domain))
                if d != o
            ]
            changes.sort()
            return changes, dv.is_singleton()

        raise AssertionError(f"unknown term {term!r}")

    def _filter_neq(self, i: int, j: int, k: int):
        """x != y + k over variable indices i, j."""
        if i == j:
            return None if k == 0 else ([], True)
        di, dj = self.vars[i].domain, self.vars[j].domain
        if di.is_singleton():
            u = di.ranges[0][0]
            forbidden = u - k
            if dj.contains(forbidden):
                nj = dj.remove_value(forbidden)
                if nj.is_empty():
                    return None
                return [(j, nj)], True
            return [], True
        if dj.is_singleton():
            forbidden = dj.ranges[0][0] + k
            if di.contains(forbidden):
                ni = di.remove_value(forbidden)
                if ni.is_empty():
                    return None
                return [(i, ni)], True
            return [], True
        if _disjoint_shifted(di, dj, k):
            return [], True
        return [], False


def run_program(program: Program, sink=None, *, max_solutions=None, clock=None,
                default_max=None, collect_solutions=False) -> RunStats:
    """Run a program to exhaustion (or max_solutions), driving the sink."""
    return Engine(
        program, sink, max_solutions=max_solutions, clock=clock,
        default_max=default_max, collect_solutions=collect_solutions,
    ).run()
