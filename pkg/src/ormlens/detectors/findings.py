"""Finding records shared by every detector.

A Finding is one report-ready observation tied to an action and a source
location. `data` holds detector-specific details and must stay JSON-safe
(plain dicts, lists, strings, numbers, bools) so the report emitters can
dump it without translation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

LOOP_QUERY = "loop_query"
LOOP_CARRIED = "loop_carried"
UNUSED_COLUMNS = "unused_columns"
UNUSED_EAGER_LOAD = "unused_eager_load"
QUERY_ONLY_SINK = "query_only_sink"
SHARED_SUBEXPRESSION = "shared_subexpression"
BOUNDEDNESS = "boundedness"
COLUMN_SOURCE = "column_source"
DB_SENSITIVE_BRANCH = "db_sensitive_branch"
PREFETCHABLE = "prefetchable"

ALL_KINDS = (
    LOOP_QUERY,
    LOOP_CARRIED,
    UNUSED_COLUMNS,
    UNUSED_EAGER_LOAD,
    QUERY_ONLY_SINK,
    SHARED_SUBEXPRESSION,
    BOUNDEDNESS,
    COLUMN_SOURCE,
    DB_SENSITIVE_BRANCH,
    PREFETCHABLE,
)


@dataclass
class Finding:
    kind: str
    action: str
    line: int
    col: int
    message: str
    data: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "action": self.action,
            "line": self.line,
            "col": self.col,
            "message": self.message,
            "data": self.data,
        }


def sort_findings(findings: list[Finding]) -> list[Finding]:
    return sorted(findings,
                  key=lambda f: (f.action, (f.line, f.col), f.kind))
