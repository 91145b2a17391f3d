"""Second, independent implementations of the derived analysis answers.

Every function here re-derives one result from scratch with a different
algorithm than the library uses: whole-graph fixpoints instead of memoized
depth-first walks, per-definition breadth-first reachability instead of a
simultaneous dataflow solve, forward incremental bookkeeping instead of a
backward rescan. The tests assert route-for-route agreement on the fixture
corpus and on generated programs, so a bug would have to be made twice, in
two different shapes, to slip through.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ormlens.afg.model import (
    Afg,
    AfgNode,
    ConstSource,
    CreatePayload,
    EdgeKind,
    FieldWritePayload,
    NodeKind,
    PlainAssignPayload,
    SavePayload,
    SinkKind,
    SourceKind,
    StoredChainPayload,
    Use,
    UseRole,
    UtilitySource,
)
from ormlens.sim.session import SessionLog

SINK_OF_ROLE = {
    UseRole.QUERY_PARAM: SinkKind.QUERY_PARAM,
    UseRole.RENDER_ARG: SinkKind.RENDERED_IN_VIEW,
    UseRole.CONDITION: SinkKind.BRANCH_CONDITION,
    UseRole.GLOBAL_WRITE: SinkKind.GLOBAL_VARIABLE,
}

PASS_ROLES = frozenset({UseRole.VALUE, UseRole.LOOP_SOURCE,
                        UseRole.CHAIN_BASE, UseRole.WRITE_RHS,
                        UseRole.SAVE})
CONSUME_ROLES = frozenset({UseRole.QUERY_PARAM, UseRole.RENDER_ARG,
                           UseRole.CONDITION, UseRole.GLOBAL_WRITE,
                           UseRole.WRITE_RHS, UseRole.SAVE})
SHALLOW_PASS = frozenset({UseRole.VALUE, UseRole.LOOP_SOURCE,
                          UseRole.CHAIN_BASE})


# ---------------------------------------------------------------------------
# Taint closure as a whole-graph fixpoint
# ---------------------------------------------------------------------------

def _taint_pairs(afg: Afg, start: int) -> list[tuple[AfgNode, Use]]:
    """Every (node, use) the value born at `start` can flow into.

    Iterates a round-robin fixpoint over all Data edges at once rather
    than chasing edges depth-first from the start node.
    """
    tainted = {start}
    pairs: set[tuple[int, int]] = set()  # (node id, use index)
    data = [e for e in afg.edges if e.kind == EdgeKind.DATA]
    changed = True
    while changed:
        changed = False
        for e in data:
            if e.src not in tainted:
                continue
            node = afg.nodes[e.dst]
            for i, u in enumerate(node.uses):
                if u.symbol != e.symbol:
                    continue
                if (e.dst, i) not in pairs:
                    pairs.add((e.dst, i))
                    changed = True
                if u.role in PASS_ROLES and e.dst not in tainted:
                    tainted.add(e.dst)
                    changed = True
    return [(afg.nodes[nid], afg.nodes[nid].uses[i])
            for (nid, i) in sorted(pairs)]


def oracle_sinks(afg: Afg, node_id: int) -> set[tuple[SinkKind, int]]:
    out: set[tuple[SinkKind, int]] = set()
    for node, u in _taint_pairs(afg, node_id):
        kind = SINK_OF_ROLE.get(u.role)
        if kind is not None:
            out.add((kind, node.id))
    return out


def oracle_assoc_traversals(afg: Afg, node_id: int) -> set[str]:
    return {u.assoc for _, u in _taint_pairs(afg, node_id)
            if u.assoc is not None}


# ---------------------------------------------------------------------------
# Column usage via a global feeds-a-consumer table
# ---------------------------------------------------------------------------

def _feeds_consumer(afg: Afg) -> dict[int, bool]:
    """For every node, does the value it produces reach a consuming use?

    Solved for all nodes simultaneously by iterating the one-step rule
    until stable, instead of a per-node memoized search.
    """
    data = [e for e in afg.edges if e.kind == EdgeKind.DATA]
    feeds = {nid: False for nid in afg.nodes}
    changed = True
    while changed:
        changed = False
        for e in data:
            if feeds[e.src]:
                continue
            node = afg.nodes[e.dst]
            for u in node.uses:
                if u.symbol != e.symbol:
                    continue
                if u.role in CONSUME_ROLES or (
                        u.role in SHALLOW_PASS and feeds[e.dst]):
                    feeds[e.src] = True
                    changed = True
                    break
    return feeds


def _columns_of_use(q: AfgNode, u: Use) -> set[tuple[str, str]]:
    desc = q.payload.descriptor
    proj = set(desc.projection)
    if u.column is not None:
        pair = (u.model or desc.root_model, u.column)
        return {pair} if pair in proj else set()
    if u.assoc is not None or u.role == UseRole.CONDITION:
        return set()
    if u.model is not None:
        return {pair for pair in proj if pair[0] == u.model}
    return set()


def oracle_used_columns(afg: Afg, node_id: int) -> set[tuple[str, str]]:
    q = afg.nodes[node_id]
    feeds = _feeds_consumer(afg)
    used: set[tuple[str, str]] = set()
    for node, u in _taint_pairs(afg, node_id):
        if u.role == UseRole.LINK_ARG:
            continue
        cols = _columns_of_use(q, u)
        if not cols:
            continue
        if u.role in CONSUME_ROLES:
            used |= cols
        elif u.role in SHALLOW_PASS and u.column is not None and feeds[node.id]:
            used |= cols
    return used


# ---------------------------------------------------------------------------
# Backward source tracing with an explicit frame stack
# ---------------------------------------------------------------------------

@dataclass
class OracleSources:
    kinds: set[SourceKind] = field(default_factory=set)
    consts: set = field(default_factory=set)
    params: set[str] = field(default_factory=set)
    query_columns: set[tuple[str | None, str | None]] = \
        field(default_factory=set)
    query_nodes: set[int] = field(default_factory=set)


def oracle_trace_sources(afg: Afg, node_id: int,
                         uses: list[Use]) -> OracleSources:
    s = OracleSources()
    in_edges: dict[int, list] = {}
    for e in afg.edges:
        if e.kind == EdgeKind.DATA:
            in_edges.setdefault(e.dst, []).append(e)
    visited: set[tuple[int, str | None]] = set()
    # frames: ("use", holder id, use) or ("def", def id, via use)
    stack: list[tuple[str, int, Use]] = [("use", node_id, u) for u in uses]

    while stack:
        tag, nid, u = stack.pop()
        if tag == "use":
            if u.leaf is not None:
                if isinstance(u.leaf, ConstSource):
                    s.kinds.add(SourceKind.CONSTANT_VALUE)
                    s.consts.add(u.leaf.value)
                elif isinstance(u.leaf, UtilitySource):
                    s.kinds.add(SourceKind.UTILITY_CALL)
                continue
            if u.symbol is None:
                continue
            defs = [e.src for e in in_edges.get(nid, ())
                    if e.symbol == u.symbol]
            if not defs:
                if u.symbol.startswith("global:"):
                    s.kinds.add(SourceKind.GLOBAL_VARIABLE)
                elif u.symbol.startswith("param:"):
                    s.kinds.add(SourceKind.USER_INPUT)
                    s.params.add(u.symbol.split(":", 1)[1])
                continue
            for d in defs:
                stack.append(("def", d, u))
            continue

        dn = afg.nodes[nid]
        if dn.kind == NodeKind.QUERY:
            s.kinds.add(SourceKind.READ_QUERY)
            s.query_columns.add(
                (u.model or dn.payload.descriptor.root_model, u.column))
            s.query_nodes.add(nid)
            continue
        if dn.kind == NodeKind.PARAM_READ:
            s.kinds.add(SourceKind.USER_INPUT)
            s.params.add(dn.payload.name)
            continue
        if (nid, u.column) in visited:
            continue
        visited.add((nid, u.column))
        if dn.kind == NodeKind.GLOBAL_ASSIGN:
            for du in dn.uses:
                if du.role == UseRole.GLOBAL_WRITE:
                    stack.append(("use", nid, du))
        elif dn.kind == NodeKind.LOOP_HEAD:
            for du in dn.uses:
                if du.role == UseRole.LOOP_SOURCE:
                    stack.append(("use", nid, du))
        elif dn.kind == NodeKind.ASSIGN:
            p = dn.payload
            if isinstance(p, FieldWritePayload):
                for du in dn.uses:
                    if du.role == UseRole.WRITE_RHS:
                        stack.append(("use", nid, du))
            elif isinstance(p, CreatePayload):
                matched = False
                for du in dn.uses:
                    if du.role != UseRole.WRITE_RHS:
                        continue
                    if u.column is not None and du.wcol != u.column:
                        continue
                    matched = True
                    stack.append(("use", nid, du))
                if not matched:
                    s.kinds.add(SourceKind.CONSTANT_VALUE)
            elif isinstance(p, PlainAssignPayload):
                for du in dn.uses:
                    if du.role == UseRole.VALUE:
                        stack.append(("use", nid, du))
            elif isinstance(p, SavePayload):
                for du in dn.uses:
                    if du.role == UseRole.SAVE:
                        stack.append(("use", nid, du))
            elif isinstance(p, StoredChainPayload):
                pass
    return s


# ---------------------------------------------------------------------------
# Loop-carried flows by per-definition reachability
# ---------------------------------------------------------------------------

def _kills_def(defs: tuple[str, ...], sym: str) -> bool:
    for d in defs:
        if sym == d:
            return True
        if "." not in d and ":" not in d and sym.startswith(d + "."):
            return True
    return False


def _def_reaches(afg: Afg, def_node: int, sym: str,
                 skip_back: tuple[int, int] | None) -> set[int]:
    """Node ids whose entry the definition (sym at def_node) can reach."""
    succ: dict[int, list[int]] = {}
    for e in afg.edges:
        if e.kind != EdgeKind.CONTROL:
            continue
        if skip_back is not None and e.back and (e.src, e.dst) == skip_back:
            continue
        succ.setdefault(e.src, []).append(e.dst)
    reach_in: set[int] = set()
    alive = [def_node]  # nodes whose exit still carries the definition
    seen_alive = {def_node}
    while alive:
        n = alive.pop()
        for m in succ.get(n, ()):
            reach_in.add(m)
            if m in seen_alive:
                continue
            if not _kills_def(afg.nodes[m].defs, sym):
                seen_alive.add(m)
                alive.append(m)
    return reach_in


def oracle_loop_carried(afg: Afg) -> tuple[set[int], set[tuple[int, int, str]]]:
    """Recompute (carried loop heads, carried (def, use, symbol) edges)."""
    heads: set[int] = set()
    edges: set[tuple[int, int, str]] = set()
    for head, end in afg.loop_pairs.items():
        body = {n.id for n in afg.sorted_nodes() if head in n.loops}
        body |= {head, end}
        for d in sorted(body):
            for sym in afg.nodes[d].defs:
                with_back = _def_reaches(afg, d, sym, None)
                without = _def_reaches(afg, d, sym, (end, head))
                only_around = (with_back - without) & body
                for uid in only_around:
                    if any(u.symbol == sym for u in afg.nodes[uid].uses):
                        edges.add((d, uid, sym))
                        heads.add(head)
    return heads, edges


# ---------------------------------------------------------------------------
# Session cache accounting by forward bookkeeping
# ---------------------------------------------------------------------------

def oracle_cache_counts(log: SessionLog) -> tuple[int, int, int, int]:
    """(total reads, hits, syntactic repeats, repeats with changed rows).

    Single forward pass keeping, per row identity, the reads that carried
    it and the position of the last write that touched it.
    """
    reads_of: dict[tuple[str, int], list[tuple[int, int, frozenset]]] = {}
    last_write: dict[tuple[str, int], int] = {}
    last_by_sql: dict[str, tuple] = {}
    total = hits = syntactic = differing = 0
    for pos, e in enumerate(log.entries()):
        if e.kind == "write":
            for ident in e.identities:
                last_write[ident] = pos
            continue
        total += 1
        prev = last_by_sql.get(e.sql)
        if prev is not None:
            syntactic += 1
            if prev != e.identities:
                differing += 1
        last_by_sql[e.sql] = e.identities
        ok = True
        for ident in e.identities:
            need = set(e.columns.get(ident[0], ()))
            lw = last_write.get(ident, -1)
            if not any(rpos > lw and rstep < e.step and need <= cols
                       for (rpos, rstep, cols) in reads_of.get(ident, ())):
                ok = False
                break
        if ok:
            hits += 1
        for ident in e.identities:
            cols = frozenset(e.columns.get(ident[0], ()))
            reads_of.setdefault(ident, []).append((pos, e.step, cols))
    return total, hits, syntactic, differing
