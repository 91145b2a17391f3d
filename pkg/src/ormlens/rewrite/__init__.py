"""SQL rendering and rewrite suggestions."""

from __future__ import annotations

from .sql import Bindings, emit_insert, emit_sql, emit_update, format_value
from .suggest import (
    CombinedQuery, MemberRewrite, PruneResult, SharedViewPlan, Store,
    combine_queries, eval_descriptor, execute_combined, execute_view_plan,
    prune_projection, suggest_shared_view,
)

__all__ = [
    "Bindings", "CombinedQuery", "MemberRewrite", "PruneResult",
    "SharedViewPlan", "Store", "combine_queries", "emit_insert", "emit_sql",
    "emit_update", "eval_descriptor", "execute_combined",
    "execute_view_plan", "format_value", "prune_projection",
    "suggest_shared_view",
]
