"""codeine: a finite-domain solver wired to a pattern-driven tracer.

The solver emits one event per state transition (15 ports, from
newVariable to endExec).  A tracer driver filters those events against a
base of labelled patterns and ships only the matching excerpts to a
connected analyzer, which may freeze and steer the execution through
synchronous patterns.
"""

from .domain import DomainParseError, FiniteDomain, format_domain, parse_domain
from .driver import (
    AddPatterns,
    DriverOptions,
    DriverSession,
    MatchResult,
    PatternBase,
    RemovePatterns,
    ResetPatterns,
    apply_request,
    check_event,
    default_trace_lines,
    emit_default_trace,
    filter_run,
    post_hoc_matches,
)
from .events import ABSENT, PORTS, parse_event, serialize_event
from .mediator import Mediator
from .patterns import (
    Pattern,
    PatternError,
    eval_formula,
    format_pattern,
    parse_pattern,
    parse_pattern_file,
    required_attributes,
)
from .programs import Program, ProgramError, load_program
from .solver import AbortRun, EventHandle, RunStats, make_step_clock, run_program

__version__ = "0.1.0"

__all__ = [
    "ABSENT",
    "AbortRun",
    "AddPatterns",
    "DomainParseError",
    "DriverOptions",
    "DriverSession",
    "EventHandle",
    "FiniteDomain",
    "MatchResult",
    "Mediator",
    "Pattern",
    "PatternBase",
    "PatternError",
    "PORTS",
    "Program",
    "ProgramError",
    "RemovePatterns",
    "ResetPatterns",
    "RunStats",
    "apply_request",
    "check_event",
    "default_trace_lines",
    "emit_default_trace",
    "eval_formula",
    "filter_run",
    "format_domain",
    "format_pattern",
    "load_program",
    "make_step_clock",
    "parse_domain",
    "parse_event",
    "parse_pattern",
    "parse_pattern_file",
    "post_hoc_matches",
    "required_attributes",
    "run_program",
    "serialize_event",
    "__version__",
]
