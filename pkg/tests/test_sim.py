"""Simulator: rng streams, data generation, the engine, sessions, stats."""

from __future__ import annotations

import random

import pytest

from ormlens import analyze_source
from ormlens.afg.model import (
    AGG_ANY,
    AGG_COUNT,
    BinExpr,
    ConstSource,
    Leaf,
    ParamSource,
    Predicate,
    QueryDescriptor,
)
from ormlens.sim import (
    Rng,
    cache_stats,
    constant_domains,
    execute_query,
    fnv1a64,
    generate_data,
    prefetch_stats,
    run_session,
    run_simulation,
)
from ormlens.sim.datagen import EPOCH_2016_END, EPOCH_2016_START
from ormlens.sim.session import (
    Executor,
    QueryLogEntry,
    SessionLog,
    StepRecord,
)

from conftest import analyzed
from oracles import oracle_cache_counts
from randprog import (
    random_descriptor,
    random_program,
    random_store,
    schema_ir,
)
from reference_engine import reference_execute


# ---------------------------------------------------------------------------
# Random streams
# ---------------------------------------------------------------------------

def _splitmix(seed: int, n: int) -> list[int]:
    mask = (1 << 64) - 1
    state = seed & mask
    out = []
    for _ in range(n):
        state = (state + 0x9E3779B97F4A7C15) & mask
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & mask
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & mask
        out.append((z ^ (z >> 31)) & mask)
    return out


@pytest.mark.parametrize("seed", [0, 1, 42, 12345, (1 << 63) + 7])
def test_stream_matches_splitmix64(seed):
    rng = Rng(seed)
    assert [rng.next_u64() for _ in range(8)] == _splitmix(seed, 8)


def test_known_splitmix64_vector():
    assert Rng(0).next_u64() == 0xE220A8397B1DCDAF


def test_derive_uses_base_seed_not_state():
    r = Rng(42)
    before = Rng(42).derive("x").next_u64()
    for _ in range(5):
        r.next_u64()
    assert r.derive("x").next_u64() == before


def test_derive_labels_are_independent_streams():
    r = Rng(7)
    xs = [r.derive("x").next_u64() for _ in range(2)]
    assert xs[0] == xs[1]
    assert r.derive("x").next_u64() != r.derive("y").next_u64()


def test_fnv1a64_known_vectors():
    assert fnv1a64("") == 0xCBF29CE484222325
    assert fnv1a64("a") == 0xAF63DC4C8601EC8C


def test_randint_is_inclusive_and_validates():
    rng = Rng(3)
    seen = {rng.randint(0, 2) for _ in range(200)}
    assert seen == {0, 1, 2}
    assert Rng(3).randint(5, 5) == 5
    with pytest.raises(ValueError):
        rng.randint(2, 1)


def test_choice_and_random_bounds():
    rng = Rng(9)
    assert rng.choice(["only"]) == "only"
    with pytest.raises(ValueError):
        rng.choice([])
    assert all(0.0 <= rng.random() < 1.0 for _ in range(100))


# ---------------------------------------------------------------------------
# Data generation
# ---------------------------------------------------------------------------

def test_generated_data_is_deterministic():
    ir = schema_ir()
    assert generate_data(ir, 5, 12) == generate_data(ir, 5, 12)
    assert generate_data(ir, 5, 12) != generate_data(ir, 6, 12)


def test_ids_are_dense_and_foreign_keys_resolve():
    ir = schema_ir()
    store = generate_data(ir, 8, 20)
    assert [r["id"] for r in store["Org"]] == list(range(1, 21))
    assert [r["id"] for r in store["Item"]] == list(range(1, 21))
    assert all(1 <= r["org_id"] <= 20 for r in store["Item"])


def test_value_shapes_per_kind():
    ir = schema_ir()
    store = generate_data(ir, 8, 30)
    for r in store["Item"]:
        assert len(r["title"]) == 12 and r["title"].isalnum()
        assert len(r["body"]) == 32
        assert 0 <= r["score"] <= 999
        assert isinstance(r["flag"], bool)
        assert EPOCH_2016_START <= r["created"] <= EPOCH_2016_END
    assert any(r["flag"] for r in store["Item"])
    assert not all(r["flag"] for r in store["Item"])


def test_domains_pin_generated_columns():
    ir = schema_ir()
    store = generate_data(ir, 1, 25,
                          domains={("Item", "title"): ["a", "b"]})
    assert {r["title"] for r in store["Item"]} <= {"a", "b"}


def test_tables_are_stable_when_unrelated_models_appear():
    from ormlens import parse_app

    from randprog import SCHEMA

    tail = "controller Pages { action home GET () { render(1) } }"
    base = parse_app(SCHEMA + tail)
    wider = parse_app(SCHEMA + "model Zed { field nm: string(10) }\n" + tail)
    a = generate_data(base, 4, 15)
    b = generate_data(wider, 4, 15)
    assert a["Org"] == b["Org"]
    assert a["Item"] == b["Item"]
    assert "Zed" in b and len(b["Zed"]) == 15


def test_constant_domains_from_write_analysis():
    an = analyzed("fix5.rlite")
    assert constant_domains(an) == {("Todo", "status"): ["active", "done"]}
    store = generate_data(an.ir, 2, 30, domains=constant_domains(an))
    assert {r["status"] for r in store["Todo"]} <= {"active", "done"}


# ---------------------------------------------------------------------------
# The query engine on hand stores
# ---------------------------------------------------------------------------

E = EPOCH_2016_START


def _store() -> dict:
    return {
        "Org": [
            {"id": 1, "name": "acme", "kind": "main", "active": True},
            {"id": 2, "name": "beta", "kind": "side", "active": False},
        ],
        "Item": [
            {"id": 1, "title": "a", "body": "x", "score": 5,
             "flag": True, "created": E, "org_id": 1},
            {"id": 2, "title": "b", "body": "y", "score": 1,
             "flag": False, "created": E, "org_id": 1},
            {"id": 3, "title": "a", "body": "z", "score": 9,
             "flag": True, "created": E, "org_id": 7},
        ],
    }


def _ids(res) -> list[int]:
    return [r["id"] for r in res.rows]


def test_eager_load_is_an_inner_join():
    ir = schema_ir()
    d = QueryDescriptor("Item", eager_loads=("org",),
                        predicates=(Predicate("score", ">",
                                              ConstSource(0)),))
    res = execute_query(_store(), d, ir, {})
    assert _ids(res) == [1, 2]  # item 3 points at a missing org
    assert res.identities == (("Item", 1), ("Item", 2), ("Org", 1))
    assert res.columns["Item"] == ("body", "created", "flag", "id",
                                   "org_id", "score", "title")
    assert res.columns["Org"] == ("active", "id", "kind", "name")


def test_explicit_projection_narrows_reported_columns():
    ir = schema_ir()
    d = QueryDescriptor("Item", projection=(("Item", "title"),))
    res = execute_query(_store(), d, ir, {})
    assert _ids(res) == [1, 2, 3]
    assert res.columns == {"Item": ("title",)}


def test_order_breaks_ties_by_id():
    ir = schema_ir()
    by_score = QueryDescriptor("Item", order_by="score")
    assert _ids(execute_query(_store(), by_score, ir, {})) == [2, 1, 3]
    by_title = QueryDescriptor("Item", order_by="title")
    assert _ids(execute_query(_store(), by_title, ir, {})) == [1, 3, 2]


def test_group_keeps_lowest_id_per_key_in_key_order():
    ir = schema_ir()
    d = QueryDescriptor("Item", group_by="title")
    assert _ids(execute_query(_store(), d, ir, {})) == [1, 2]


def test_offset_applies_before_limit_and_clamps():
    ir = schema_ir()
    d = QueryDescriptor("Item", order_by="score",
                        limit=Leaf(ConstSource(1)),
                        offset=Leaf(ConstSource(1)))
    assert _ids(execute_query(_store(), d, ir, {})) == [1]
    neg = QueryDescriptor("Item", limit=Leaf(ConstSource(-2)))
    assert _ids(execute_query(_store(), neg, ir, {})) == []


def test_offset_expression_evaluates_with_bindings():
    ir = schema_ir()
    page = ParamSource("page")
    d = QueryDescriptor("Item", order_by="id",
                        limit=Leaf(ConstSource(40)),
                        offset=BinExpr("*", Leaf(page),
                                       Leaf(ConstSource(40))))
    res = execute_query(_store(), d, ir, {page: 2})
    assert res.rows == [] and "OFFSET 80" in res.sql


def test_count_reports_consulted_rows_and_predicate_columns():
    ir = schema_ir()
    d = QueryDescriptor("Item", aggregate=AGG_COUNT,
                        predicates=(Predicate("score", ">",
                                              ConstSource(2)),))
    res = execute_query(_store(), d, ir, {})
    assert res.value == 2 and res.rows == []
    assert res.identities == (("Item", 1), ("Item", 3))
    assert res.columns == {"Item": ("id", "score")}


def test_any_with_association_predicate_touches_both_models():
    ir = schema_ir()
    d = QueryDescriptor("Item", aggregate=AGG_ANY, eager_loads=("org",),
                        predicates=(Predicate("org.kind", "==",
                                              ConstSource("main")),))
    res = execute_query(_store(), d, ir, {})
    assert res.value is True
    assert set(res.identities) == {("Item", 1), ("Item", 2), ("Org", 1)}
    assert res.columns == {"Item": ("id",), "Org": ("id", "kind")}


def test_in_predicate_accepts_list_bindings():
    ir = schema_ir()
    src = ParamSource("wanted")
    d = QueryDescriptor("Item",
                        predicates=(Predicate("id", "IN", src),))
    res = execute_query(_store(), d, ir, {src: [3, 1]})
    assert _ids(res) == [1, 3]
    assert "IN (3, 1)" in res.sql


def test_empty_store_yields_empty_results():
    ir = schema_ir()
    empty = {"Org": [], "Item": []}
    plain = execute_query(empty, QueryDescriptor("Item"), ir, {})
    assert plain.rows == [] and plain.identities == ()
    count = execute_query(
        empty, QueryDescriptor("Item", aggregate=AGG_COUNT), ir, {})
    assert count.value == 0
    exists = execute_query(
        empty, QueryDescriptor("Item", aggregate=AGG_ANY), ir, {})
    assert exists.value is False


def test_engine_agrees_with_reference_evaluator():
    ir = schema_ir()
    for seed in range(600):
        rng = random.Random(10_000 + seed)
        store = random_store(rng)
        desc, bindings = random_descriptor(rng)
        res = execute_query(store, desc, ir, bindings)
        ids, value, touched = reference_execute(store, desc, ir, bindings)
        if desc.aggregate is None:
            assert _ids(res) == ids, (seed, desc)
        else:
            assert res.value == value, (seed, desc)
        assert set(res.identities) == touched, (seed, desc)


# ---------------------------------------------------------------------------
# The interpreter
# ---------------------------------------------------------------------------

def _run(an, key, params, store):
    ex = Executor(an, store)
    return ex.run_action(key, params, 0)


def test_stored_chain_materializes_at_its_let():
    # The loop later iterates a snapshot; the interleaved insert is
    # logged after the read and never appears in it.
    src = """\
model Todo {
  field title: string(20)
  field status: string(10)
}

controller C {
  action demo POST (t: string) {
    let pending = Todo.where(status == "active")
    let made = Todo.create(title: param(t), status: "active")
    for x in pending {
      render(x.title)
    }
  }
}
"""
    an = analyze_source(src)
    store = {"Todo": [{"id": 1, "title": "old", "status": "active"}]}
    entries, _ = _run(an, "C.demo", {"t": "new"}, store)
    assert [e.kind for e in entries] == ["read", "write"]
    assert entries[0].identities == (("Todo", 1),)
    assert entries[1].sql == \
        "INSERT INTO todos (id, title, status) VALUES (2, 'new', 'active')"


def test_chain_prefix_extensions_execute_at_their_sites():
    an = analyzed("fix4.rlite")
    store = {
        "Status": [{"id": 1, "label": "open"}],
        "Issue": [{"id": 1, "subject": "s", "priority": 8, "status_id": 1}],
    }
    entries, _ = _run(an, "Issues.dashboard", {"min": 5}, store)
    assert [e.node for e in entries] == [3, 5]
    assert entries[0].sql == \
        "SELECT COUNT(*) FROM issues WHERE priority > 5"
    assert entries[1].sql == (
        "SELECT t1.*, t2.* FROM issues AS t1 "
        "INNER JOIN statuses AS t2 ON t2.id = t1.status_id "
        "WHERE t1.priority > 5")
    assert entries[0].params_used == ("min",)


def test_create_defaults_unwritten_columns():
    an = analyzed("fix5.rlite")
    store = {"Project": [], "Todo": [
        {"id": 1, "title": "t", "status": "done",
         "parent_id": 0, "project_id": 0}]}
    entries, transitions = _run(an, "Todos.add",
                                {"title": "x", "parent_id": 3}, store)
    assert [e.kind for e in entries] == ["write"]
    assert entries[0].sql == (
        "INSERT INTO todos (id, title, status, parent_id, project_id) "
        "VALUES (2, 'x', 'active', 3, 0)")
    assert entries[0].identities == (("Todo", 2),)
    row = store["Todo"][-1]
    assert row == {"id": 2, "title": "x", "status": "active",
                   "parent_id": 3, "project_id": 0}
    assert [t.target for t in transitions] == ["Todos.list"]


def test_save_flushes_pending_writes_as_one_update():
    an = analyzed("fix5.rlite")
    store = {"Project": [], "Todo": [
        {"id": 4, "title": "t", "status": "active",
         "parent_id": 0, "project_id": 0}]}
    entries, _ = _run(an, "Todos.complete", {"id": 4}, store)
    assert [e.kind for e in entries] == ["read", "write"]
    assert entries[1].sql == \
        "UPDATE todos SET status = 'done' WHERE id = 4"
    assert store["Todo"][0]["status"] == "done"


def test_missing_record_makes_writes_inert():
    an = analyzed("fix5.rlite")
    store = {"Project": [], "Todo": []}
    entries, _ = _run(an, "Todos.complete", {"id": 99}, store)
    assert [e.kind for e in entries] == ["read"]
    assert entries[0].identities == ()
    assert store["Todo"] == []


def test_sessions_restart_when_a_page_has_no_exits():
    src = """\
model Post {
  field title: string(20)
}

controller Posts {
  action index GET () {
    for p in Post.order(title) {
      render(p.title)
    }
  }
}
"""
    an = analyze_source(src)
    store = generate_data(an.ir, 0, 5)
    log = run_session(an, store, Rng(0).derive("session:0"), 4)
    assert [s.restart for s in log.steps] == [False, True, True, True]
    assert all(s.method is None for s in log.steps)
    assert all(s.action == "Posts.index" for s in log.steps)


def test_pagination_session_advances_the_offset():
    an = analyzed("fix7.rlite")
    store = generate_data(an.ir, 1, 50)
    log = run_session(an, store, Rng(0).derive("session:0"), 4)
    sqls = [e.sql for s in log.steps for e in s.entries]
    assert sqls == [
        "SELECT * FROM stories ORDER BY score LIMIT 40 OFFSET 0",
        "SELECT * FROM stories ORDER BY score LIMIT 40 OFFSET 40",
        "SELECT * FROM stories ORDER BY score LIMIT 40 OFFSET 80",
        "SELECT * FROM stories ORDER BY score LIMIT 40 OFFSET 120",
    ]
    assert [s.method for s in log.steps] == [None, "GET", "GET", "GET"]
    assert [s.params["page"] for s in log.steps] == [0, 1, 2, 3]
    # pages past the data are vacuous cache hits; pages 0 and 1 are cold
    cs = cache_stats(log)
    assert (cs.total, cs.hits, cs.syntactic_equiv,
            cs.equiv_differing_results) == (4, 2, 0, 0)
    pf = prefetch_stats(log)
    assert (pf.total, pf.prefetchable, pf.same_template) == (3, 3, 3)


# ---------------------------------------------------------------------------
# Cache statistics on crafted logs
# ---------------------------------------------------------------------------

def _entry(step, sql, idents, cols, kind="read", line=1, col=1,
           params=()) -> QueryLogEntry:
    return QueryLogEntry(kind, "C.a", step, 1, line, col, sql,
                         tuple(idents), cols, tuple(params))


def _log(*step_entries, methods=None, forms=None) -> SessionLog:
    steps = []
    for i, entries in enumerate(step_entries):
        method = methods[i] if methods else ("GET" if i else None)
        fields = forms[i] if forms else ()
        steps.append(StepRecord("C.a", method, {}, False, fields,
                                list(entries)))
    return SessionLog(steps)


COLS = {"Todo": ("id", "title")}


def test_repeat_read_across_steps_hits():
    log = _log(
        [_entry(0, "Q", [("Todo", 1)], COLS)],
        [_entry(1, "Q", [("Todo", 1)], COLS)],
    )
    s = cache_stats(log)
    assert (s.total, s.hits, s.syntactic_equiv,
            s.equiv_differing_results) == (2, 1, 1, 0)


def test_intervening_write_spoils_the_hit():
    log = _log(
        [_entry(0, "Q", [("Todo", 1)], COLS)],
        [_entry(1, "W", [("Todo", 1)], COLS, kind="write")],
        [_entry(2, "Q", [("Todo", 1)], COLS)],
    )
    s = cache_stats(log)
    assert (s.total, s.hits, s.syntactic_equiv,
            s.equiv_differing_results) == (2, 0, 1, 0)


def test_empty_reads_are_vacuous_hits():
    log = _log([_entry(0, "Q", [], COLS)])
    s = cache_stats(log)
    assert (s.total, s.hits) == (1, 1)


def test_coverage_requires_a_column_superset():
    wide = {"Todo": ("id", "title")}
    narrow = {"Todo": ("id",)}
    miss = cache_stats(_log(
        [_entry(0, "A", [("Todo", 1)], narrow)],
        [_entry(1, "B", [("Todo", 1)], wide)],
    ))
    assert miss.hits == 0
    hit = cache_stats(_log(
        [_entry(0, "A", [("Todo", 1)], wide)],
        [_entry(1, "B", [("Todo", 1)], narrow)],
    ))
    assert hit.hits == 1


def test_syntactic_twin_with_different_rows_is_flagged():
    log = _log(
        [_entry(0, "Q", [("Todo", 1)], COLS)],
        [_entry(1, "W", [("Todo", 2)], COLS, kind="write")],
        [_entry(2, "Q", [("Todo", 1), ("Todo", 2)], COLS)],
    )
    s = cache_stats(log)
    assert (s.total, s.hits, s.syntactic_equiv,
            s.equiv_differing_results) == (2, 0, 1, 1)


def test_same_step_repeats_never_hit_but_count_as_syntactic():
    log = _log([
        _entry(0, "Q", [("Todo", 1)], COLS),
        _entry(0, "Q", [("Todo", 1)], COLS),
    ])
    s = cache_stats(log)
    assert (s.total, s.hits, s.syntactic_equiv) == (2, 0, 1)


def test_cache_stats_match_independent_recount():
    subjects = [analyzed(f"fix{i}.rlite") for i in range(1, 8)]
    subjects += [analyze_source(random_program(seed))
                 for seed in range(10)]
    for an in subjects:
        rep = run_simulation(an, seed=11, sessions=3, session_length=6,
                             rows_per_model=8)
        for log, stats in zip(rep.sessions, rep.cache):
            expect = oracle_cache_counts(log)
            got = (stats.total, stats.hits, stats.syntactic_equiv,
                   stats.equiv_differing_results)
            assert got == expect


# ---------------------------------------------------------------------------
# Prefetch statistics on crafted logs
# ---------------------------------------------------------------------------

def test_entry_steps_without_navigation_are_not_counted():
    log = _log([_entry(0, "Q", [("Todo", 1)], COLS)])
    pf = prefetch_stats(log)
    assert (pf.total, pf.prefetchable) == (0, 0)


def test_get_navigation_is_always_prefetchable():
    log = _log(
        [_entry(0, "Q", [("Todo", 1)], COLS, line=3)],
        [_entry(1, "Q", [("Todo", 1)], COLS, line=3,
                params=("page",))],
        methods=[None, "GET"],
    )
    pf = prefetch_stats(log)
    assert (pf.total, pf.prefetchable, pf.same_template) == (1, 1, 1)


def test_post_blocks_queries_that_consume_submitted_fields():
    log = _log(
        [_entry(0, "Q", [("Todo", 1)], COLS, line=3)],
        [_entry(1, "R", [("Todo", 1)], COLS, line=9,
                params=("title",)),
         _entry(1, "S", [("Todo", 2)], COLS, line=11,
                params=("other",))],
        methods=[None, "POST"],
        forms=[(), ("title",)],
    )
    pf = prefetch_stats(log)
    assert (pf.total, pf.prefetchable, pf.same_template) == (2, 1, 0)


def test_same_template_needs_matching_source_location():
    log = _log(
        [_entry(0, "Q", [("Todo", 1)], COLS, line=3)],
        [_entry(1, "Q", [("Todo", 1)], COLS, line=4)],
        methods=[None, "GET"],
    )
    assert prefetch_stats(log).same_template == 0


# ---------------------------------------------------------------------------
# Whole simulations
# ---------------------------------------------------------------------------

def test_simulation_is_a_pure_function_of_its_inputs(each_fixture):
    a = run_simulation(each_fixture, seed=3, sessions=4,
                       session_length=5, rows_per_model=10)
    b = run_simulation(each_fixture, seed=3, sessions=4,
                       session_length=5, rows_per_model=10)
    assert a.cache == b.cache
    assert a.prefetch == b.prefetch
    assert [[e.sql for e in s.entries()] for s in a.sessions] == \
        [[e.sql for e in s.entries()] for s in b.sessions]


def test_simulation_sessions_are_isolated():
    an = analyzed("fix5.rlite")
    rep = run_simulation(an, seed=3, sessions=6, session_length=6,
                         rows_per_model=10)
    assert len(rep.sessions) == len(rep.cache) == len(rep.prefetch) == 6
    # every session sees the same pristine store: the first step of two
    # sessions that start on the same action issues identical SQL
    first = {}
    for log in rep.sessions:
        step = log.steps[0]
        sqls = tuple(e.sql for e in step.entries)
        assert first.setdefault(step.action, sqls) == sqls
    assert rep.total_queries() == sum(c.total for c in rep.cache)
