"""Static detectors over an analyzed application."""

from __future__ import annotations

from typing import Callable, Iterable, Optional

from ..analysis import Analysis
from .classify import (
    BOUNDED_LIMITED, BOUNDED_SINGLE_RECORD, BOUNDED_SINGLE_VALUE,
    HAS_INPUT, NEVER_WRITTEN, ONLY_CONSTANT, ONLY_OTHER_QUERY,
    OTHER_WITHOUT_INPUT, UNBOUNDED, ColumnClassification,
    classify_boundedness, classify_column_sources, detect_boundedness,
    detect_column_sources, detect_db_sensitive_branches,
)
from .findings import (
    ALL_KINDS, BOUNDEDNESS, COLUMN_SOURCE, DB_SENSITIVE_BRANCH, LOOP_CARRIED,
    LOOP_QUERY, PREFETCHABLE, QUERY_ONLY_SINK, SHARED_SUBEXPRESSION,
    UNUSED_COLUMNS, UNUSED_EAGER_LOAD, Finding, sort_findings,
)
from .loops import detect_loop_carried, detect_loop_queries
from .prefetch import EdgePrefetch, PrefetchEntry, detect_prefetchable, prefetch_edges
from .usage import (
    detect_query_only_sinks, detect_shared_subexpressions,
    detect_unused_columns, detect_unused_eager_loads, shared_groups,
)

DETECTORS: dict[str, Callable[[Analysis], list[Finding]]] = {
    LOOP_QUERY: detect_loop_queries,
    LOOP_CARRIED: detect_loop_carried,
    UNUSED_COLUMNS: detect_unused_columns,
    UNUSED_EAGER_LOAD: detect_unused_eager_loads,
    QUERY_ONLY_SINK: detect_query_only_sinks,
    SHARED_SUBEXPRESSION: detect_shared_subexpressions,
    BOUNDEDNESS: detect_boundedness,
    COLUMN_SOURCE: detect_column_sources,
    DB_SENSITIVE_BRANCH: detect_db_sensitive_branches,
    PREFETCHABLE: detect_prefetchable,
}


def run_detectors(an: Analysis,
                  kinds: Optional[Iterable[str]] = None) -> list[Finding]:
    """Run the named detectors (all by default), sorted for stable output."""
    selected = list(kinds) if kinds is not None else list(ALL_KINDS)
    unknown = [k for k in selected if k not in DETECTORS]
    if unknown:
        raise KeyError(f"unknown detector(s): {', '.join(unknown)}")
    findings: list[Finding] = []
    for kind in selected:
        findings.extend(DETECTORS[kind](an))
    return sort_findings(findings)


__all__ = [
    "ALL_KINDS", "BOUNDEDNESS", "BOUNDED_LIMITED", "BOUNDED_SINGLE_RECORD",
    "BOUNDED_SINGLE_VALUE", "COLUMN_SOURCE", "ColumnClassification",
    "DB_SENSITIVE_BRANCH", "DETECTORS", "EdgePrefetch", "Finding",
    "HAS_INPUT", "LOOP_CARRIED", "LOOP_QUERY", "NEVER_WRITTEN",
    "ONLY_CONSTANT", "ONLY_OTHER_QUERY", "OTHER_WITHOUT_INPUT",
    "PREFETCHABLE", "PrefetchEntry", "QUERY_ONLY_SINK",
    "SHARED_SUBEXPRESSION", "UNBOUNDED", "UNUSED_COLUMNS",
    "UNUSED_EAGER_LOAD", "classify_boundedness", "classify_column_sources",
    "detect_boundedness", "detect_column_sources",
    "detect_db_sensitive_branches", "detect_loop_carried",
    "detect_loop_queries", "detect_prefetchable", "detect_query_only_sinks",
    "detect_shared_subexpressions", "detect_unused_columns",
    "detect_unused_eager_loads", "prefetch_edges", "run_detectors",
    "shared_groups", "sort_findings",
]
