"""Canonical pattern texts used by the viewer, benchmarks and tests.

Three families:

* ``VIEWER_PATTERNS`` feed a live search-tree display: tree structure,
  decision constraints, propagation counters, and a synchronizing pattern
  that freezes at every leaf.
* ``OVERHEAD_PROBES`` are designed to match no event on the bundled
  benchmark programs (their constraints are unnamed, chrono starts at 1,
  depth/node never reach the probed values), so a run measures pure
  filtering cost with zero trace generation.
* ``VOLUME_SETS`` are workloads that do emit trace, graded by volume:
  search-tree skeleton, domain snapshots at tree events, every domain
  reduction, every constraint awakening.
"""

VISU_TREE = (
    "visu_tree: when port in [choicePoint,solution,failure,backTo] "
    "do current(port=P and node=N and time=T), call buildTree(P,N,T)"
)
NEW_CSTR = (
    "new_cstr: when port=newConstraint and stage='labeling' "
    "do current(cstrRep=Constraint), call recordDecision(Constraint)"
)
VISU_PROP1 = (
    "visu_prop1: when port=reduce do current(vident=V and cident=C), "
    "call countReduce(V,C)"
)
VISU_PROP2 = "visu_prop2: when port=awake do current(cident=C), call countAwake(C)"
SYNCHRONIZE = "synchronize: when port in [solution,failure] dosynchro refreshViewer(void)"

VIEWER_PATTERNS = (VISU_TREE, NEW_CSTR, VISU_PROP1, VISU_PROP2, SYNCHRONIZE)

OVERHEAD_PROBES = {
    # few candidate events, one costly attribute
    "post_named": (
        "post_named: when port=post and isNamed(cname) do current(port,chrono,cident)"
    ),
    # many candidate events, two costly attributes
    "reduce_named": (
        "reduce_named: when port=reduce and (isNamed(vname) and isNamed(cname)) "
        "do current(port,chrono,cident)"
    ),
    # every event, one cheap attribute
    "chrono_zero": "chrono_zero: when chrono=0 do current(chrono)",
    # every event, three attributes checked systematically
    "deep_node": (
        "deep_node: when depth=50000 or (chrono>=1 and node=9999999) "
        "do current(chrono,depth)"
    ),
}

VOLUME_SETS = {
    "tree": (
        "cstr: when port=post do current(chrono,cident,cinternal)",
        "tree: when port in [failure,backTo,choicePoint,solution] "
        "do current(chrono,node,port)",
    ),
    "domains": (
        "newvar: when port=newVariable do current(chrono,vident,vname)",
        "dom: when port in [choicePoint,backTo,solution] "
        "do current(chrono,node,port,named_vars,full_dom)",
    ),
    "reductions": ("propag1: when port=reduce do current(chrono)",),
    "awakenings": ("propag2: when port=awake do current(chrono)",),
}


def combined_volume_patterns() -> tuple[str, ...]:
    """All four volume workloads active in parallel."""
    out: list[str] = []
    for texts in VOLUME_SETS.values():
        out.extend(texts)
    return tuple(out)


ALL_CANONICAL = (
    VIEWER_PATTERNS
    + tuple(OVERHEAD_PROBES.values())
    + combined_volume_patterns()
)
