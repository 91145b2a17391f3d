"""In-memory query execution over a generated store.

The row semantics here deliberately mirror the rewrite package's
descriptor evaluator: eager loads are inner joins that drop root rows
with no associated row, association predicates hold when any associated
row matches, ordering ties break on id, group keeps the lowest-id row
per key ordered by key, offset applies before limit, and aggregates see
the fully shaped row set. On top of that this engine records which rows
a statement touched and which columns it transferred, which is what the
cache and prefetch statistics consume.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Optional

from ..afg.model import (AGG_ANY, AGG_COUNT, BinExpr, ConstSource, Leaf,
                         QueryDescriptor)
from ..appmodel.ir import AppIR
from ..rewrite.sql import Bindings, emit_sql
from .datagen import Store

Identity = tuple[str, int]


@dataclass
class QueryResult:
    """One executed read: shaped root rows plus what the read touched."""

    rows: list[dict]
    value: Optional[object]  # int for count, bool for any, None otherwise
    identities: tuple[Identity, ...]
    columns: dict[str, tuple[str, ...]]
    sql: str


def _concrete(source, bindings: Bindings):
    if isinstance(source, ConstSource):
        return source.value
    return bindings[source]


def _match(op: str, cell: Any, value: Any) -> bool:
    if isinstance(cell, list):
        return any(_match(op, c, value) for c in cell)
    if op == "==":
        return cell == value
    if op == "!=":
        return cell != value
    if op == "<":
        return cell < value
    if op == ">":
        return cell > value
    if op == "IN":
        vals = list(value) if isinstance(value, (list, tuple, set)) else [value]
        return cell in vals
    raise ValueError(f"unexpected predicate op {op!r}")


def _assoc_rows(ir: AppIR, store: Store, model: str, row: dict,
                assoc_name: str) -> tuple[str, list[dict]]:
    assoc = ir.model(model).assoc_map()[assoc_name]
    rows = store.get(assoc.target, [])
    if assoc.kind == "belongs_to":
        parent = next((r for r in rows if r["id"] == row[assoc.foreign_key]),
                      None)
        return assoc.target, [] if parent is None else [parent]
    return assoc.target, sorted(
        (r for r in rows if r[assoc.foreign_key] == row["id"]),
        key=lambda r: r["id"])


def _eval_vexpr(e, bindings: Bindings) -> int:
    if isinstance(e, Leaf):
        v = _concrete(e.source, bindings)
        return int(v)
    assert isinstance(e, BinExpr)
    left = _eval_vexpr(e.left, bindings)
    right = _eval_vexpr(e.right, bindings)
    if e.op == "+":
        return left + right
    if e.op == "-":
        return left - right
    if e.op == "*":
        return left * right
    return left // right if right != 0 else 0


def _shape(rows: list[dict], desc: QueryDescriptor,
           bindings: Bindings) -> list[dict]:
    if desc.order_by is not None:
        rows = sorted(rows, key=lambda r: (r[desc.order_by], r["id"]))
    else:
        rows = sorted(rows, key=lambda r: r["id"])
    if desc.group_by is not None:
        seen: dict[Any, dict] = {}
        for r in sorted(rows, key=lambda r: r["id"]):
            seen.setdefault(r[desc.group_by], r)
        rows = [seen[k] for k in sorted(seen)]
    if desc.offset is not None:
        rows = rows[max(0, _eval_vexpr(desc.offset, bindings)):]
    if desc.limit is not None:
        rows = rows[:max(0, _eval_vexpr(desc.limit, bindings))]
    return rows


def _columns_map(desc: QueryDescriptor, ir: AppIR,
                 models: list[str]) -> dict[str, tuple[str, ...]]:
    """Columns transferred per model, honoring an explicit projection."""
    out: dict[str, tuple[str, ...]] = {}
    explicit: dict[str, list[str]] = {}
    for m, c in desc.projection:
        explicit.setdefault(m, []).append(c)
    for m in models:
        if m in explicit:
            out[m] = tuple(sorted(set(explicit[m])))
        else:
            out[m] = tuple(sorted(ir.model(m).column_names()))
    return out


def _pred_split(desc: QueryDescriptor):
    root, assoc = [], []
    for p in desc.predicates:
        (assoc if "." in p.column else root).append(p)
    return root, assoc


def execute_query(store: Store, desc: QueryDescriptor, ir: AppIR,
                  bindings: Bindings) -> QueryResult:
    sql = emit_sql(desc, ir, bindings=bindings, executable=True)
    root_preds, assoc_preds = _pred_split(desc)
    root_model = desc.root_model

    # eager inner joins first, then predicates, as the reference evaluator
    rows = list(store.get(root_model, []))
    eager_matches: dict[int, list[tuple[str, list[dict]]]] = {}
    surviving = []
    for r in rows:
        matches = []
        ok = True
        for name in desc.eager_loads:
            target, assoc_rows = _assoc_rows(ir, store, root_model, r, name)
            if not assoc_rows:
                ok = False
                break
            matches.append((target, assoc_rows))
        if ok:
            eager_matches[id(r)] = matches
            surviving.append(r)
    rows = surviving

    for p in root_preds:
        value = _concrete(p.source, bindings)
        rows = [r for r in rows if _match(p.op, r[p.column], value)]

    pred_touched: dict[int, list[tuple[str, list[dict]]]] = {}
    for p in assoc_preds:
        value = _concrete(p.source, bindings)
        assoc_name, col = p.column.split(".", 1)
        kept = []
        for r in rows:
            target, assoc_rows = _assoc_rows(ir, store, root_model, r,
                                             assoc_name)
            hits = [a for a in assoc_rows if _match(p.op, a[col], value)]
            if hits:
                pred_touched.setdefault(id(r), []).append((target, hits))
                kept.append(r)
        rows = kept

    rows = _shape(rows, desc, bindings)

    if desc.aggregate in (AGG_COUNT, AGG_ANY):
        # what the database had to look at to answer: the qualifying root
        # rows plus every association row consulted along the way
        pred_cols = sorted({p.column for p in root_preds} | {"id"})
        columns: dict[str, tuple[str, ...]] = {root_model: tuple(pred_cols)}
        identities: list[Identity] = [(root_model, r["id"]) for r in rows]
        target_cols: dict[str, set] = {}
        for p in assoc_preds:
            assoc_name, col = p.column.split(".", 1)
            target = ir.model(root_model).assoc_map()[assoc_name].target
            target_cols.setdefault(target, set()).add(col)
        for r in rows:
            for target, hits in pred_touched.get(id(r), []):
                for h in hits:
                    identities.append((target, h["id"]))
            for target, hits in eager_matches.get(id(r), []):
                for h in hits:
                    identities.append((target, h["id"]))
                target_cols.setdefault(target, set())
        for target, cols in sorted(target_cols.items()):
            columns[target] = tuple(sorted(cols | {"id"}))
        value = len(rows) if desc.aggregate == AGG_COUNT else bool(rows)
        return QueryResult([], value, tuple(dict.fromkeys(identities)),
                           columns, sql)

    models = [root_model]
    for name in desc.eager_loads:
        target = ir.model(root_model).assoc_map()[name].target
        if target not in models:
            models.append(target)
    columns = _columns_map(desc, ir, models)
    identities = [(root_model, r["id"]) for r in rows]
    for r in rows:
        for target, hits in eager_matches.get(id(r), []):
            for h in hits:
                identities.append((target, h["id"]))
    return QueryResult(rows, None, tuple(dict.fromkeys(identities)),
                       columns, sql)
