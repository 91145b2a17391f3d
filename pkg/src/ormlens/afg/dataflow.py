"""Forward and backward walks over the Data edges of a built AFG.

query_sinks answers "where can this query's result end up", used_columns
answers "which retrieved columns are ever consumed", and trace_sources
answers "where can this value have come from". All three are may-analyses
over the reaching-definition edges, so results are unions over control
paths.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Optional

from .model import (
    Afg, AfgEdge, AfgNode, ConstSource, CreatePayload, EdgeKind,
    FieldWritePayload, NodeKind, PlainAssignPayload, SavePayload, SinkKind,
    SourceKind, StoredChainPayload, Use, UseRole, UtilitySource,
)

_SINK_ROLE = {
    UseRole.QUERY_PARAM: SinkKind.QUERY_PARAM,
    UseRole.RENDER_ARG: SinkKind.RENDERED_IN_VIEW,
    UseRole.CONDITION: SinkKind.BRANCH_CONDITION,
    UseRole.GLOBAL_WRITE: SinkKind.GLOBAL_VARIABLE,
}

# roles a value flows through on its way to a sink
_PASS_ROLES = frozenset({UseRole.VALUE, UseRole.LOOP_SOURCE,
                         UseRole.CHAIN_BASE, UseRole.WRITE_RHS,
                         UseRole.SAVE})

# roles that consume retrieved data (for column usage accounting)
_CONSUME_ROLES = frozenset({UseRole.QUERY_PARAM, UseRole.RENDER_ARG,
                            UseRole.CONDITION, UseRole.GLOBAL_WRITE,
                            UseRole.WRITE_RHS, UseRole.SAVE})

_SHALLOW_PASS = frozenset({UseRole.VALUE, UseRole.LOOP_SOURCE,
                           UseRole.CHAIN_BASE})


def _out_index(afg: Afg) -> dict[int, list[AfgEdge]]:
    idx: dict[int, list[AfgEdge]] = defaultdict(list)
    for e in afg.edges:
        if e.kind == EdgeKind.DATA:
            idx[e.src].append(e)
    return idx


def _in_index(afg: Afg) -> dict[int, list[AfgEdge]]:
    idx: dict[int, list[AfgEdge]] = defaultdict(list)
    for e in afg.edges:
        if e.kind == EdgeKind.DATA:
            idx[e.dst].append(e)
    return idx


def _tainted_uses(afg: Afg, start: int) -> list[tuple[AfgNode, Use]]:
    """All (node, use) pairs the value produced at `start` can reach."""
    idx = _out_index(afg)
    seen = {start}
    work = [start]
    hits: list[tuple[AfgNode, Use]] = []
    while work:
        n = work.pop()
        for e in idx.get(n, ()):
            m = afg.nodes[e.dst]
            for u in m.uses:
                if u.symbol != e.symbol:
                    continue
                hits.append((m, u))
                if u.role in _PASS_ROLES and m.id not in seen:
                    seen.add(m.id)
                    work.append(m.id)
    return hits


def query_sinks(afg: Afg, node_id: int) -> set[tuple[SinkKind, int]]:
    """Where the result of the given Query (or stored chain) node ends up."""
    out: set[tuple[SinkKind, int]] = set()
    for node, use in _tainted_uses(afg, node_id):
        kind = _SINK_ROLE.get(use.role)
        if kind is not None:
            out.add((kind, node.id))
    return out


def _reaches_consumer(afg: Afg, start: int,
                      memo: dict[int, bool]) -> bool:
    if start in memo:
        return memo[start]
    memo[start] = False  # cycle guard: assume no until proven
    idx = _out_index(afg)
    work = [start]
    seen = {start}
    found = False
    while work and not found:
        n = work.pop()
        for e in idx.get(n, ()):
            m = afg.nodes[e.dst]
            for u in m.uses:
                if u.symbol != e.symbol:
                    continue
                if u.role in _CONSUME_ROLES:
                    found = True
                    break
                if u.role in _SHALLOW_PASS and m.id not in seen:
                    seen.add(m.id)
                    work.append(m.id)
            if found:
                break
    memo[start] = found
    return found


def _use_columns(afg: Afg, q: AfgNode, u: Use) -> set[tuple[str, str]]:
    desc = q.payload.descriptor
    proj = set(desc.projection)
    if u.column is not None:
        return {(u.model or desc.root_model, u.column)} & proj
    if u.assoc is not None:
        return set()
    if u.role == UseRole.CONDITION:
        return set()  # truthiness checks emptiness, not column data
    if u.model is not None:
        # a whole row consumes what was transferred for its model; rows
        # reached by a plain association walk transfer nothing here
        return {(m, c) for (m, c) in proj if m == u.model}
    # no column and no model: a scalar alias, accounted where it was read
    return set()


def used_columns(afg: Afg, node_id: int) -> set[tuple[str, str]]:
    """Projected (model, column) pairs whose values reach a consumer."""
    q = afg.nodes[node_id]
    memo: dict[int, bool] = {}
    used: set[tuple[str, str]] = set()
    for node, u in _tainted_uses(afg, node_id):
        if u.role == UseRole.LINK_ARG:
            continue  # link arguments only name the next request
        cols = _use_columns(afg, q, u)
        if not cols:
            continue
        if u.role in _CONSUME_ROLES:
            used |= cols
        elif (u.role in _SHALLOW_PASS and u.column is not None
              and _reaches_consumer(afg, node.id, memo)):
            # copying one column into a variable uses it only if the
            # variable is itself consumed; whole-row pass-through (loops,
            # aliases) consumes nothing by itself
            used |= cols
    return used


def assoc_traversals(afg: Afg, node_id: int) -> set[str]:
    """Associations navigated off this query's rows anywhere downstream."""
    out: set[str] = set()
    for _, u in _tainted_uses(afg, node_id):
        if u.assoc is not None:
            out.add(u.assoc)
    return out


# ---------------------------------------------------------------------------
# Backward tracing
# ---------------------------------------------------------------------------

@dataclass
class SourceSummary:
    kinds: set[SourceKind] = field(default_factory=set)
    consts: list[object] = field(default_factory=list)
    query_columns: list[tuple[Optional[str], Optional[str]]] = \
        field(default_factory=list)
    params: set[str] = field(default_factory=set)
    query_nodes: set[int] = field(default_factory=set)


def trace_sources(afg: Afg, node_id: int, uses: list[Use],
                  ir=None) -> SourceSummary:
    s = SourceSummary()
    in_idx = _in_index(afg)
    # memo key includes the column being traced: create nodes expand
    # differently per column, and re-walking the rest is cycle-safe
    visited: set[tuple[int, Optional[str]]] = set()

    def defs_of(nid: int, sym: str) -> list[int]:
        return sorted(e.src for e in in_idx.get(nid, ()) if e.symbol == sym)

    def walk_use(nid: int, u: Use) -> None:
        if u.leaf is not None:
            if isinstance(u.leaf, ConstSource):
                s.kinds.add(SourceKind.CONSTANT_VALUE)
                s.consts.append(u.leaf.value)
            elif isinstance(u.leaf, UtilitySource):
                s.kinds.add(SourceKind.UTILITY_CALL)
            return
        if u.symbol is None:
            return
        ds = defs_of(nid, u.symbol)
        if not ds:
            if u.symbol.startswith("global:"):
                s.kinds.add(SourceKind.GLOBAL_VARIABLE)
            elif u.symbol.startswith("param:"):
                s.kinds.add(SourceKind.USER_INPUT)
                s.params.add(u.symbol.split(":", 1)[1])
            return
        for d in ds:
            visit(d, u)

    def visit(d: int, via: Use) -> None:
        dn = afg.nodes[d]
        if dn.kind == NodeKind.QUERY:
            s.kinds.add(SourceKind.READ_QUERY)
            model = via.model or dn.payload.descriptor.root_model
            s.query_columns.append((model, via.column))
            s.query_nodes.add(d)
            return
        if dn.kind == NodeKind.PARAM_READ:
            s.kinds.add(SourceKind.USER_INPUT)
            s.params.add(dn.payload.name)
            return
        if (d, via.column) in visited:
            return
        visited.add((d, via.column))
        if dn.kind == NodeKind.GLOBAL_ASSIGN:
            # an intra-action global write is transparent: keep walking
            for u in dn.uses:
                if u.role == UseRole.GLOBAL_WRITE:
                    walk_use(d, u)
            return
        if dn.kind == NodeKind.LOOP_HEAD:
            for u in dn.uses:
                if u.role == UseRole.LOOP_SOURCE:
                    walk_use(d, u)
            return
        if dn.kind == NodeKind.ASSIGN:
            p = dn.payload
            if isinstance(p, FieldWritePayload):
                for u in dn.uses:
                    if u.role == UseRole.WRITE_RHS:
                        walk_use(d, u)
            elif isinstance(p, CreatePayload):
                matched = False
                for u in dn.uses:
                    if u.role != UseRole.WRITE_RHS:
                        continue
                    if via.column is not None and u.wcol != via.column:
                        continue
                    matched = True
                    walk_use(d, u)
                if not matched:
                    # unwritten columns of a fresh row hold type defaults
                    s.kinds.add(SourceKind.CONSTANT_VALUE)
                    if ir is not None and via.column is not None:
                        s.consts.append(_zero_for(ir, p.model, via.column))
            elif isinstance(p, PlainAssignPayload):
                for u in dn.uses:
                    if u.role == UseRole.VALUE:
                        walk_use(d, u)
            elif isinstance(p, SavePayload):
                for u in dn.uses:
                    if u.role == UseRole.SAVE:
                        walk_use(d, u)
            # stored chains are never read as plain values
            return

    for u in uses:
        walk_use(node_id, u)
    return s


def _zero_for(ir, model_name: str, column: str):
    from ..appmodel.ir import zero_value
    f = ir.model(model_name).field_map().get(column)
    return zero_value(f.kind) if f is not None else 0


def value_sources(afg: Afg, node_id: int, column: Optional[str] = None,
                  ir=None) -> SourceSummary:
    """Sources of the value a write node stores (optionally one column)."""
    node = afg.nodes[node_id]
    p = node.payload
    if isinstance(p, FieldWritePayload):
        uses = [u for u in node.uses if u.role == UseRole.WRITE_RHS]
    elif isinstance(p, CreatePayload):
        uses = [u for u in node.uses
                if u.role == UseRole.WRITE_RHS
                and (column is None or u.wcol == column)]
        if column is not None and not uses:
            s = SourceSummary()
            s.kinds.add(SourceKind.CONSTANT_VALUE)
            if ir is not None:
                s.consts.append(_zero_for(ir, p.model, column))
            return s
    elif isinstance(p, SavePayload):
        uses = [u for u in node.uses
                if u.role == UseRole.SAVE
                and (column is None or u.wcol == column)]
    else:
        uses = list(node.uses)
    return trace_sources(afg, node_id, uses, ir=ir)


def condition_sources(afg: Afg, branch_id: int, ir=None) -> SourceSummary:
    node = afg.nodes[branch_id]
    uses = [u for u in node.uses if u.role == UseRole.CONDITION]
    return trace_sources(afg, branch_id, uses, ir=ir)


def node_input_sources(afg: Afg, node_id: int, ir=None) -> SourceSummary:
    """Sources feeding everything a node reads (all of its uses)."""
    node = afg.nodes[node_id]
    return trace_sources(afg, node_id, list(node.uses), ir=ir)
