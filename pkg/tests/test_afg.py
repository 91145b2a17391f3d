"""Graph construction: nodes, control shape, sites, stored chains, loops.

The structural assertions pin down exactly where queries fire (site and
let registration), how stored chains copy their predicates into every
consumption, and which dataflow facts the builder derives (reaching
definition edges, loop-carried symbols).
"""

from __future__ import annotations

from hypothesis import given, settings
from hypothesis import strategies as st

from ormlens import analyze_source
from ormlens.afg.model import (
    CreatePayload,
    EdgeKind,
    NodeKind,
    SavePayload,
    StoredChainPayload,
)

from randprog import random_program

ACCUMULATOR = """\
model Item { field score: int }
controller C {
  action a GET () {
    let total = 0
    for it in Item.where(score > 0) {
      total = total + it.score
    }
    render(total)
  }
}
"""


def _control(afg):
    succ: dict[int, list[int]] = {}
    pred: dict[int, list[int]] = {}
    back = []
    for e in afg.edges:
        if e.kind != EdgeKind.CONTROL:
            continue
        succ.setdefault(e.src, []).append(e.dst)
        pred.setdefault(e.dst, []).append(e.src)
        if e.back:
            back.append((e.src, e.dst))
    return succ, pred, back


def test_stored_chain_copies_predicates_to_every_consumption(fix):
    afg = fix("fix4.rlite").afgs["Issues.dashboard"]
    queries = afg.query_nodes()
    assert len(queries) == 2
    any_q, loop_q = queries
    for q in (any_q, loop_q):
        assert [(p.column, p.op) for p in q.payload.descriptor.predicates] \
            == [("priority", ">")]
    assert any_q.payload.descriptor.aggregate == "ANY"
    assert loop_q.payload.descriptor.aggregate is None
    assert loop_q.payload.descriptor.eager_loads == ("status",)
    stored = afg.nodes[min(
        n.id for n in afg.sorted_nodes()
        if isinstance(n.payload, StoredChainPayload))]
    assert any_q.payload.descriptor.chain_prefix_of == stored.id
    assert loop_q.payload.descriptor.chain_prefix_of == stored.id


def test_consumption_sites_point_at_their_query_nodes(fix):
    afg = fix("fix4.rlite").afgs["Issues.dashboard"]
    by_kind = {n.id: n.kind for n in afg.sorted_nodes()}
    assert sorted(afg.site_nodes.values()) == \
        sorted(q.id for q in afg.query_nodes())
    for nid in afg.site_nodes.values():
        assert by_kind[nid] == NodeKind.QUERY


def test_value_consumed_let_is_forced_at_the_let(fix):
    afg = fix("fix2.rlite").afgs["Issues.index"]
    queries = afg.query_nodes()
    assert len(queries) == 2
    assert set(afg.let_sites.values()) == {q.id for q in queries}
    members_q, issues_q = queries
    assert members_q.payload.var == "members"
    assert issues_q.payload.var == "issues"
    assert issues_q.payload.descriptor.chain_prefix_of is None


def test_helper_bodies_are_inlined(fix):
    afg = fix("fix1.rlite").afgs["Todos.index"]
    # one real query; the helper's traversal loop shows up as a nested
    # loop head, not as another query node
    assert len(afg.query_nodes()) == 1
    heads = [n for n in afg.sorted_nodes() if n.kind == NodeKind.LOOP_HEAD]
    assert len(heads) == 2
    inner = max(heads, key=lambda n: n.id)
    assert len(inner.loops) == 1


def test_create_and_save_register_as_sites(fix):
    an = fix("fix5.rlite")
    add = an.afgs["Todos.add"]
    creates = [n for n in add.sorted_nodes()
               if isinstance(n.payload, CreatePayload)]
    assert len(creates) == 1
    assert creates[0].id in set(add.site_nodes.values())
    assert creates[0].payload.model == "Todo"
    assert sorted(c for c, _ in creates[0].payload.writes) == \
        ["parent_id", "status", "title"]

    complete = an.afgs["Todos.complete"]
    saves = [n for n in complete.sorted_nodes()
             if isinstance(n.payload, SavePayload)]
    assert len(saves) == 1
    assert saves[0].id in set(complete.site_nodes.values())
    assert len(complete.query_nodes()) == 1
    assert complete.query_nodes()[0].payload.descriptor.aggregate \
        == "FIND_BY_PK"


def test_action_graph_edges_carry_target_method(fix):
    an = fix("fix5.rlite")
    edges = {(e.src, e.dst): e.method for e in an.graph.edges}
    assert edges == {
        ("Todos.add", "Todos.list"): "GET",
        ("Todos.complete", "Todos.list"): "GET",
        ("Todos.list", "Todos.add"): "POST",
    }


def test_loop_carried_accumulator_is_marked():
    afg = analyze_source(ACCUMULATOR).afgs["C.a"]
    assert len(afg.carried_loops) == 1
    assert {sym for (_, _, sym) in afg.carried_edges} == {"total"}


def test_rebind_without_in_loop_use_is_not_carried(fix):
    # fix1's helper overwrites `last` each pass and only reads it after
    # the loop, so no value actually crosses iterations
    afg = fix("fix1.rlite").afgs["Todos.index"]
    assert afg.carried_loops == set()


def test_branch_has_two_successors(fix):
    afg = fix("fix4.rlite").afgs["Issues.dashboard"]
    succ, _, _ = _control(afg)
    branch = next(n for n in afg.sorted_nodes()
                  if n.kind == NodeKind.BRANCH)
    assert len(succ[branch.id]) == 2


def test_loop_head_can_skip_the_body(fix):
    afg = fix("fix4.rlite").afgs["Issues.dashboard"]
    succ, _, back = _control(afg)
    (head, end), = afg.loop_pairs.items()
    assert end in succ[head]
    assert (end, head) in back


def test_data_edge_symbols_are_defined_at_their_source(each_fixture):
    for afg in each_fixture.afgs.values():
        for e in afg.edges:
            if e.kind == EdgeKind.DATA:
                assert e.symbol in afg.nodes[e.src].defs


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=4000))
def test_control_flow_invariants(seed):
    """Entry reaches every node, every node reaches exit, back edges
    match the recorded loop pairs."""
    an = analyze_source(random_program(seed))
    for afg in an.afgs.values():
        succ, pred, back = _control(afg)
        seen = {afg.entry}
        work = [afg.entry]
        while work:
            n = work.pop()
            for m in succ.get(n, ()):
                if m not in seen:
                    seen.add(m)
                    work.append(m)
        assert seen == set(afg.nodes)
        rseen = {afg.exit}
        work = [afg.exit]
        while work:
            n = work.pop()
            for m in pred.get(n, ()):
                if m not in rseen:
                    rseen.add(m)
                    work.append(m)
        assert rseen == set(afg.nodes)
        for (s, d) in back:
            assert afg.loop_pairs.get(d) == s


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=4000))
def test_site_registration_invariants(seed):
    """Sites name query, create, or save nodes; let sites name queries;
    every query node is reachable through some registration."""
    an = analyze_source(random_program(seed))
    for afg in an.afgs.values():
        registered = set(afg.site_nodes.values()) | set(afg.let_sites.values())
        for nid in afg.site_nodes.values():
            n = afg.nodes[nid]
            assert n.kind == NodeKind.QUERY or \
                isinstance(n.payload, (CreatePayload, SavePayload))
        for nid in afg.let_sites.values():
            assert afg.nodes[nid].kind == NodeKind.QUERY
        for q in afg.query_nodes():
            assert q.id in registered


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=4000))
def test_build_is_deterministic(seed):
    text = random_program(seed)
    def dump(an):
        out = []
        for key in sorted(an.afgs):
            afg = an.afgs[key]
            out.append((key,
                        [(n.id, n.kind.name, repr(n.payload), n.defs,
                          tuple(n.uses), n.loops)
                         for n in afg.sorted_nodes()],
                        sorted((e.src, e.dst, e.kind.name, e.symbol or "",
                                e.back) for e in afg.edges)))
        return out
    assert dump(analyze_source(text)) == dump(analyze_source(text))
