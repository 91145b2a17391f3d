"""Detectors over retrieved-but-unconsumed data and query/query coupling.

All of these reduce to the forward walks in afg.dataflow: which projected
columns reach a consumer, which associations are ever navigated, and where
a query's result ends up.
"""

from __future__ import annotations

from collections import defaultdict

from ..afg.dataflow import assoc_traversals, query_sinks, used_columns
from ..afg.model import Afg, NodeKind, SinkKind
from ..analysis import Analysis
from ..appmodel.sizes import column_byte_size
from .findings import (
    QUERY_ONLY_SINK, SHARED_SUBEXPRESSION, UNUSED_COLUMNS,
    UNUSED_EAGER_LOAD, Finding,
)


def _col_size(an: Analysis, model: str, column: str) -> int:
    f = an.ir.model(model).field_map().get(column)
    return column_byte_size(f) if f is not None else 0


def detect_unused_columns(an: Analysis) -> list[Finding]:
    out: list[Finding] = []
    for key, afg in an.afgs.items():
        for q in afg.query_nodes():
            desc = q.payload.descriptor
            proj = set(desc.projection)
            if not proj:
                continue  # aggregates transfer no row data
            used = used_columns(afg, q.id)
            pks = {(m, "id") for m in desc.models()}
            unused = proj - used - pks
            if not unused:
                continue
            wasted = sum(_col_size(an, m, c) for (m, c) in unused)
            cols = sorted(f"{m}.{c}" for (m, c) in unused)
            out.append(Finding(
                UNUSED_COLUMNS, key, q.loc.line, q.loc.col,
                f"query on {desc.root_model} retrieves "
                f"{len(unused)} column(s) nothing consumes: "
                + ", ".join(cols),
                {
                    "node": q.id,
                    "model": desc.root_model,
                    "columns": cols,
                    "usedColumns": sorted(f"{m}.{c}" for (m, c) in used),
                    "wastedBytesPerRow": wasted,
                }))
    return out


def _predicate_assocs(desc) -> set[str]:
    """Associations a predicate references (their include is load-bearing)."""
    out: set[str] = set()
    for p in desc.predicates:
        if "." in p.column:
            out.add(p.column.split(".", 1)[0])
    return out


def detect_unused_eager_loads(an: Analysis) -> list[Finding]:
    out: list[Finding] = []
    for key, afg in an.afgs.items():
        for q in afg.query_nodes():
            desc = q.payload.descriptor
            if not desc.eager_loads or desc.aggregate is not None:
                continue
            used = used_columns(afg, q.id)
            travs = assoc_traversals(afg, q.id)
            needed = _predicate_assocs(desc)
            model = an.ir.model(desc.root_model)
            assocs = model.assoc_map()
            dead: list[str] = []
            wasted = 0
            for name in desc.eager_loads:
                if name in travs or name in needed:
                    continue
                target = assocs[name].target
                if any(m == target for (m, _c) in used):
                    continue
                dead.append(name)
                tm = an.ir.model(target)
                wasted += sum(column_byte_size(f) for f in tm.fields)
            if not dead:
                continue
            out.append(Finding(
                UNUSED_EAGER_LOAD, key, q.loc.line, q.loc.col,
                f"query on {desc.root_model} eagerly loads "
                + ", ".join(dead) + " but never touches them",
                {
                    "node": q.id,
                    "model": desc.root_model,
                    "associations": dead,
                    "usedAssociations": sorted(
                        a for a in desc.eager_loads if a not in dead),
                    "wastedBytesPerRow": wasted,
                }))
    return out


def detect_query_only_sinks(an: Analysis) -> list[Finding]:
    out: list[Finding] = []
    for key, afg in an.afgs.items():
        for q in afg.query_nodes():
            sinks = query_sinks(afg, q.id)
            if not sinks:
                continue
            if any(kind != SinkKind.QUERY_PARAM for (kind, _n) in sinks):
                continue
            consumers = sorted(n for (_k, n) in sinks)
            out.append(Finding(
                QUERY_ONLY_SINK, key, q.loc.line, q.loc.col,
                f"result of the {q.payload.descriptor.root_model} query "
                "feeds only other queries; the round trip can be folded "
                "into its consumer",
                {
                    "node": q.id,
                    "model": q.payload.descriptor.root_model,
                    "consumers": consumers,
                }))
    return out


def shared_groups(afg: Afg) -> dict[int, list[int]]:
    """Query nodes grouped by the chain they extend.

    Keyed by the anchor node (a stored-chain assignment or the first
    materialized query); the anchor is a member only when it is itself a
    query node. Singleton groups are dropped.
    """
    parent: dict[int, int] = {}
    for q in afg.query_nodes():
        p = q.payload.descriptor.chain_prefix_of
        if p is not None:
            parent[q.id] = p

    def root(n: int) -> int:
        seen = {n}
        while n in parent:
            n = parent[n]
            if n in seen:  # defensive: prefixes form a tree by construction
                break
            seen.add(n)
        return n

    groups: dict[int, list[int]] = defaultdict(list)
    for q in afg.query_nodes():
        groups[root(q.id)].append(q.id)
    return {anchor: sorted(members)
            for anchor, members in groups.items()
            if len(members) >= 2}


def detect_shared_subexpressions(an: Analysis) -> list[Finding]:
    out: list[Finding] = []
    for key, afg in an.afgs.items():
        for anchor, members in sorted(shared_groups(afg).items()):
            node = afg.nodes[anchor]
            base_desc = node.payload.descriptor
            shapes = []
            for m in members:
                d = afg.nodes[m].payload.descriptor
                label = d.aggregate or (
                    "JOIN" if d.eager_loads else "SELECT")
                shapes.append(label)
            out.append(Finding(
                SHARED_SUBEXPRESSION, key, node.loc.line, node.loc.col,
                f"{len(members)} queries repeat the same "
                f"{base_desc.root_model} filter; the shared part could "
                "run once as a view",
                {
                    "anchor": anchor,
                    "anchorIsQuery": node.kind == NodeKind.QUERY,
                    "model": base_desc.root_model,
                    "members": list(members),
                    "shapes": shapes,
                }))
    return out
