"""Rewrite suggestions: narrower projections, folded round trips, shared views.

Each suggestion pairs a structural rewrite with a plan-level executor so
tests can check semantic equivalence against the simulator on random
stores. The executors work on the same store shape the simulator uses
(model name -> list of row dicts) and deliberately reimplement row
evaluation in the simplest possible form; agreement between the two is
part of the evidence the rewrite is sound.

Engine-visible semantics the executors mirror:
  - eager loads are inner joins over distinct root rows (a root row
    survives when every eager association has at least one match),
  - association predicates hold when any associated row matches,
  - ordering sorts by (column value, id); without order_by, by id,
  - group(c) keeps one representative row (lowest id) per distinct value
    of c, ordered by that value,
  - count/any apply after all row shaping.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Mapping, Optional

from ..afg.dataflow import used_columns
from ..afg.model import (
    AGG_ANY, AGG_COUNT, ConstSource, NodeKind, Predicate, QueryDescriptor,
    QueryResultSource,
)
from ..analysis import Analysis
from ..appmodel.ir import AppIR, table_name
from ..appmodel.sizes import column_byte_size
from ..detectors.usage import shared_groups
from ..errors import NotCombinableError, NothingToPruneError, UnboundParameterError
from .sql import Bindings, _column_kind, _render_source, _eval_vexpr, emit_sql


# ---------------------------------------------------------------------------
# Projection pruning
# ---------------------------------------------------------------------------

@dataclass
class PruneResult:
    action: str
    node: int
    descriptor: QueryDescriptor
    kept: list[str]
    dropped: list[str]
    saved_bytes_per_row: int
    sql: str


def prune_projection(an: Analysis, action_key: str,
                     node_id: int) -> PruneResult:
    """Narrow a query's projection to the columns something consumes.

    Primary keys of every involved model are always kept: row identity is
    what makes the rest of the plan (joins, saves, caches) work.
    """
    afg = an.afgs[action_key]
    node = afg.nodes[node_id]
    desc = node.payload.descriptor
    if not desc.projection:
        raise NothingToPruneError("query returns no row data")
    used = used_columns(afg, node_id)
    pks = {(m, "id") for m in desc.models()}
    keep = tuple(c for c in desc.projection if c in used or c in pks)
    dropped = [c for c in desc.projection if c not in keep]
    if not dropped:
        raise NothingToPruneError(
            "every projected column is consumed somewhere")
    new_desc = replace(desc, projection=keep)
    saved = 0
    for (m, c) in dropped:
        f = an.ir.model(m).field_map().get(c)
        if f is not None:
            saved += column_byte_size(f)
    return PruneResult(
        action_key, node_id, new_desc,
        kept=sorted(f"{m}.{c}" for (m, c) in keep),
        dropped=sorted(f"{m}.{c}" for (m, c) in dropped),
        saved_bytes_per_row=saved,
        sql=emit_sql(new_desc, an.ir))


# ---------------------------------------------------------------------------
# Query combination
# ---------------------------------------------------------------------------

@dataclass
class CombinedQuery:
    action: str
    producer: int
    consumer: int
    producer_desc: QueryDescriptor
    consumer_desc: QueryDescriptor
    link_column: str
    link_producer_column: str
    conditions: list[tuple[str, str, str, object, str]] = field(
        default_factory=list)  # (table, column, op, source, kind)

    def sql(self, ir: AppIR, bindings: Optional[Bindings] = None,
            executable: bool = False) -> str:
        ctab = table_name(self.consumer_desc.root_model)
        ptab = table_name(self.producer_desc.root_model)
        conds = []
        for (tab, col, op, source, kind) in self.conditions:
            if source is None:  # the linking condition, both sides columns
                conds.append(f"{ctab}.{self.link_column} = "
                             f"{ptab}.{self.link_producer_column}")
                continue
            rhs = _render_source(source, kind, bindings, executable)
            sqlop = {"==": "=", "!=": "<>", "<": "<", ">": ">",
                     "IN": "IN"}[op]
            conds.append(f"{tab}.{col} {sqlop} {rhs}")
        return (f"SELECT * FROM {ctab} INNER JOIN {ptab} ON "
                + " AND ".join(conds))


def _single_record(desc: QueryDescriptor) -> bool:
    return any(p.column == "id" and p.op == "==" for p in desc.predicates)


def combine_queries(an: Analysis, action_key: str, producer_id: int,
                    consumer_id: int) -> CombinedQuery:
    """Fold a query whose result only parameterizes another into a join."""
    afg = an.afgs[action_key]
    pnode, cnode = afg.nodes[producer_id], afg.nodes[consumer_id]
    if pnode.kind != NodeKind.QUERY or cnode.kind != NodeKind.QUERY:
        raise NotCombinableError("both ends must be query nodes")
    pd = pnode.payload.descriptor
    cd = cnode.payload.descriptor
    if pd.aggregate is not None:
        raise NotCombinableError("producer is an aggregate")
    if pd.group_by is not None:
        raise NotCombinableError("producer groups rows")
    if pd.limit is not None or pd.offset is not None:
        raise NotCombinableError("producer slices its rows; a join "
                                 "cannot reproduce the slice")
    if pd.eager_loads:
        raise NotCombinableError("producer has eager loads")
    if cd.aggregate is not None or cd.group_by is not None \
            or cd.limit is not None or cd.offset is not None:
        raise NotCombinableError("consumer shapes its result beyond a "
                                 "plain filter")
    if cd.eager_loads:
        raise NotCombinableError("consumer has eager loads")

    links = [p for p in cd.predicates
             if isinstance(p.source, QueryResultSource)
             and p.source.node == producer_id]
    if not links:
        raise NotCombinableError(
            "consumer does not use the producer's result")
    if len(links) > 1:
        raise NotCombinableError("producer feeds several predicates")
    link = links[0]
    if link.op == "==" and not _single_record(pd):
        raise NotCombinableError(
            "scalar comparison against a many-row producer")
    if link.op not in ("==", "IN"):
        raise NotCombinableError(f"cannot join on op {link.op!r}")
    if "." in link.column:
        raise NotCombinableError("link predicate targets an association")

    pcol = link.source.column
    if pcol is None:
        pcol = (pd.projection[0][1]
                if len(pd.projection) == 1 else "id")

    ptab = table_name(pd.root_model)
    ctab = table_name(cd.root_model)
    cq = CombinedQuery(action_key, producer_id, consumer_id, pd, cd,
                       link_column=link.column, link_producer_column=pcol)
    for p in pd.predicates:
        if "." in p.column:
            raise NotCombinableError("producer predicate spans a join")
        cq.conditions.append((ptab, p.column, p.op, p.source,
                              _column_kind(an.ir, pd, p.column)))
    cq.conditions.append((ctab, link.column, "=", None, "int"))
    for p in cd.predicates:
        if p is link:
            continue
        if "." in p.column:
            raise NotCombinableError("consumer predicate spans a join")
        cq.conditions.append((ctab, p.column, p.op, p.source,
                              _column_kind(an.ir, cd, p.column)))
    return cq


# ---------------------------------------------------------------------------
# Shared views
# ---------------------------------------------------------------------------

@dataclass
class MemberRewrite:
    node: int
    full: QueryDescriptor
    delta_predicates: tuple[Predicate, ...]
    delta_eager: tuple[str, ...]


@dataclass
class SharedViewPlan:
    action: str
    anchor: int
    view: QueryDescriptor
    view_sql: str
    members: list[MemberRewrite]
    has_shaping_member: bool  # a member groups or aggregates


def suggest_shared_view(an: Analysis, action_key: str,
                        anchor: Optional[int] = None) -> list[SharedViewPlan]:
    """Run each repeated chain prefix once and derive its extensions from it.

    The view keeps only the shared filter core (predicates and eager
    joins); ordering, slicing, grouping and aggregation stay with each
    member and are applied over the view's rows. Applying a member's full
    shaping to unshaped rows reproduces its direct result whether the
    member inherited the prefix's shaping or overrode it.
    """
    afg = an.afgs[action_key]
    groups = shared_groups(afg)
    if anchor is not None:
        groups = {anchor: groups[anchor]} if anchor in groups else {}
    plans: list[SharedViewPlan] = []
    for a, members in sorted(groups.items()):
        node = afg.nodes[a]
        view = replace(node.payload.descriptor, aggregate=None,
                       order_by=None, limit=None, offset=None,
                       group_by=None, projection=())
        mrs: list[MemberRewrite] = []
        shaping = False
        for m in members:
            full = afg.nodes[m].payload.descriptor
            npre = len(view.predicates)
            if full.predicates[:npre] == view.predicates:
                dpred = full.predicates[npre:]
            else:
                dpred = tuple(p for p in full.predicates
                              if p not in view.predicates)
            neag = len(view.eager_loads)
            if full.eager_loads[:neag] == view.eager_loads:
                deag = full.eager_loads[neag:]
            else:
                deag = tuple(e for e in full.eager_loads
                             if e not in view.eager_loads)
            if full.aggregate is not None or full.group_by is not None:
                shaping = True
            mrs.append(MemberRewrite(m, full, dpred, deag))
        plans.append(SharedViewPlan(
            action_key, a, view, emit_sql(view, an.ir), mrs, shaping))
    return plans


# ---------------------------------------------------------------------------
# Plan-level execution (for semantic validation)
# ---------------------------------------------------------------------------

Store = dict[str, list[dict]]


def _concrete(source: object, bindings: Optional[Bindings]) -> Any:
    if isinstance(source, ConstSource):
        return source.value
    if bindings is not None and source in bindings:
        return bindings[source]
    raise UnboundParameterError(f"no binding for {source!r}")


def _match(op: str, cell: Any, value: Any) -> bool:
    if isinstance(cell, list):  # has_many association cells: any match
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


def _assoc_cells(ir: AppIR, store: Store, model: str, row: dict,
                 assoc_name: str, column: str) -> Any:
    assoc = ir.model(model).assoc_map()[assoc_name]
    rows = store.get(assoc.target, [])
    if assoc.kind == "belongs_to":
        parent = next((r for r in rows if r["id"] == row[assoc.foreign_key]),
                      None)
        return [] if parent is None else [parent[column]]
    return [r[column] for r in rows if r[assoc.foreign_key] == row["id"]]


def _cell(ir: AppIR, store: Store, model: str, row: dict,
          column: str) -> Any:
    if "." in column:
        assoc_name, col = column.split(".", 1)
        return _assoc_cells(ir, store, model, row, assoc_name, col)
    return row[column]


def _filter(ir: AppIR, store: Store, model: str, rows: list[dict],
            preds: tuple[Predicate, ...],
            bindings: Optional[Bindings]) -> list[dict]:
    out = rows
    for p in preds:
        value = _concrete(p.source, bindings)
        out = [r for r in out
               if _match(p.op, _cell(ir, store, model, r, p.column), value)]
    return out


def _join_filter(ir: AppIR, store: Store, model: str, rows: list[dict],
                 eager: tuple[str, ...]) -> list[dict]:
    out = rows
    for name in eager:
        out = [r for r in out
               if _assoc_cells(ir, store, model, r, name, "id")]
    return out


def _shape(rows: list[dict], desc: QueryDescriptor,
           bindings: Optional[Bindings]) -> list[dict]:
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
        rows = rows[max(0, _eval_vexpr_or_raise(desc.offset, bindings)):]
    if desc.limit is not None:
        rows = rows[:max(0, _eval_vexpr_or_raise(desc.limit, bindings))]
    return rows


def _eval_vexpr_or_raise(e, bindings: Optional[Bindings]) -> int:
    v = _eval_vexpr(e, bindings)
    if v is None:
        raise UnboundParameterError("unbound limit/offset expression")
    return v


def eval_descriptor(store: Store, desc: QueryDescriptor, ir: AppIR,
                    bindings: Optional[Bindings] = None):
    """Reference evaluation of one descriptor; root rows, or an aggregate."""
    rows = list(store.get(desc.root_model, []))
    rows = _join_filter(ir, store, desc.root_model, rows, desc.eager_loads)
    rows = _filter(ir, store, desc.root_model, rows, desc.predicates,
                   bindings)
    rows = _shape(rows, desc, bindings)
    if desc.aggregate == AGG_COUNT:
        return len(rows)
    if desc.aggregate == AGG_ANY:
        return bool(rows)
    return rows


def execute_combined(store: Store, cq: CombinedQuery, ir: AppIR,
                     bindings: Optional[Bindings] = None) -> list[dict]:
    """Consumer rows the joined statement returns, distinct, by id."""
    prows = _filter(ir, store, cq.producer_desc.root_model,
                    list(store.get(cq.producer_desc.root_model, [])),
                    cq.producer_desc.predicates, bindings)
    pvals = {r[cq.link_producer_column] for r in prows}
    crows = [r for r in store.get(cq.consumer_desc.root_model, [])
             if r[cq.link_column] in pvals]
    rest = tuple(p for p in cq.consumer_desc.predicates
                 if not (isinstance(p.source, QueryResultSource)
                         and p.source.node == cq.producer))
    crows = _filter(ir, store, cq.consumer_desc.root_model, crows, rest,
                    bindings)
    return sorted(crows, key=lambda r: r["id"])


def execute_view_plan(store: Store, plan: SharedViewPlan, ir: AppIR,
                      bindings: Optional[Bindings] = None) -> dict[int, Any]:
    """Run the view once, then each member over the view's rows."""
    vrows = eval_descriptor(store, plan.view, ir, bindings)
    results: dict[int, Any] = {}
    for mr in plan.members:
        rows = list(vrows)
        rows = _join_filter(ir, store, mr.full.root_model, rows,
                            mr.delta_eager)
        rows = _filter(ir, store, mr.full.root_model, rows,
                       mr.delta_predicates, bindings)
        rows = _shape(rows, mr.full, bindings)
        if mr.full.aggregate == AGG_COUNT:
            results[mr.node] = len(rows)
        elif mr.full.aggregate == AGG_ANY:
            results[mr.node] = bool(rows)
        else:
            results[mr.node] = rows
    return results
