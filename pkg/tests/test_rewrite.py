"""Rewrite suggestions and their plan-level semantic equivalence."""

from __future__ import annotations

import random
from dataclasses import replace

import pytest

from ormlens import analyze_source
from ormlens.afg.model import (
    AGG_ANY,
    NodeKind,
    ParamSource,
    QueryResultSource,
)
from ormlens.appmodel.sizes import column_byte_size
from ormlens.errors import NotCombinableError, NothingToPruneError
from ormlens.rewrite.suggest import (
    combine_queries,
    eval_descriptor,
    execute_combined,
    execute_view_plan,
    prune_projection,
    suggest_shared_view,
)

from conftest import analyzed


def _query_ids(an, action):
    afg = an.afgs[action]
    return [nid for nid in sorted(afg.nodes)
            if afg.nodes[nid].kind == NodeKind.QUERY]


# ---------------------------------------------------------------------------
# Projection pruning
# ---------------------------------------------------------------------------

def test_prune_keeps_consumed_columns_and_every_pk():
    an = analyzed("fix1.rlite")
    pr = prune_projection(an, "Todos.index", 1)
    assert pr.kept == ["Pred.id", "Pred.note", "Project.id", "Tag.id",
                       "Todo.id", "Todo.title"]
    assert pr.dropped == ["Pred.todo_id", "Project.name", "Tag.label",
                          "Tag.todo_id", "Todo.body", "Todo.done",
                          "Todo.project_id"]
    assert pr.saved_bytes_per_row == 2523
    assert pr.sql == (
        "SELECT t1.id, t1.title, t2.id, t3.id, t4.id, t4.note "
        "FROM todos AS t1 "
        "INNER JOIN projects AS t2 ON t2.id = t1.project_id "
        "INNER JOIN tags AS t3 ON t3.todo_id = t1.id "
        "INNER JOIN preds AS t4 ON t4.todo_id = t1.id "
        "WHERE t1.done = 0")


def test_prune_changes_nothing_but_the_projection():
    an = analyzed("fix1.rlite")
    old = an.afgs["Todos.index"].nodes[1].payload.descriptor
    pr = prune_projection(an, "Todos.index", 1)
    assert pr.descriptor == replace(old, projection=pr.descriptor.projection)
    assert set(pr.descriptor.projection) < set(old.projection)


def test_prune_drops_link_only_columns():
    # The linking value names the next request; it is not rendered row
    # data, so the projection can lose it. Pruning only ever narrows:
    # the pk is not added back when the written select already lacks it.
    an = analyzed("fix3.rlite")
    pr = prune_projection(an, "Posts.index", 1)
    assert "Post.slug" in pr.dropped
    assert "Post.views" in pr.dropped
    assert pr.kept == ["Post.excerpt", "Post.title"]


PRUNE_SURVEY = {
    ("fix1.rlite", "Todos.index", 1): 2523,
    ("fix2.rlite", "Issues.index", 1): 44,
    ("fix2.rlite", "Issues.index", 2): 5,
    ("fix3.rlite", "Posts.index", 1): 44,
    ("fix3.rlite", "Posts.show", 2): 324,
    ("fix4.rlite", "Issues.dashboard", 3): None,
    ("fix4.rlite", "Issues.dashboard", 5): 8,
    ("fix5.rlite", "Todos.complete", 2): None,
    ("fix5.rlite", "Todos.list", 1): 28,
    ("fix6.rlite", "Todos.sync", 2): None,
    ("fix6.rlite", "Todos.sync", 3): None,
    ("fix7.rlite", "Stories.index", 2): 4,
}


@pytest.mark.parametrize("key", sorted(PRUNE_SURVEY))
def test_prune_survey(key):
    name, action, node = key
    an = analyzed(name)
    expected = PRUNE_SURVEY[key]
    if expected is None:
        with pytest.raises(NothingToPruneError):
            prune_projection(an, action, node)
        return
    pr = prune_projection(an, action, node)
    assert pr.saved_bytes_per_row == expected
    recount = 0
    for label in pr.dropped:
        model, col = label.split(".")
        recount += column_byte_size(an.ir.model(model).field_map()[col])
    assert recount == expected
    for model in pr.descriptor.models():
        if (model, "id") in an.afgs[action].nodes[node] \
                .payload.descriptor.projection:
            assert f"{model}.id" in pr.kept


def test_prune_survey_covers_every_fixture_query():
    seen = set()
    for i in range(1, 8):
        name = f"fix{i}.rlite"
        an = analyzed(name)
        for action, afg in an.afgs.items():
            for nid, node in afg.nodes.items():
                if node.kind == NodeKind.QUERY:
                    seen.add((name, action, nid))
    assert seen == set(PRUNE_SURVEY)


# ---------------------------------------------------------------------------
# Query combination
# ---------------------------------------------------------------------------

def test_combine_folds_feeder_into_single_join():
    an = analyzed("fix2.rlite")
    cq = combine_queries(an, "Issues.index", 1, 2)
    assert cq.link_column == "creator_id"
    assert cq.link_producer_column == "id"
    assert cq.sql(an.ir) == (
        "SELECT * FROM issues INNER JOIN members ON members.group_id = 1 "
        "AND issues.creator_id = members.id AND issues.is_public = 1")


def test_combine_is_deterministic():
    an = analyzed("fix2.rlite")
    a = combine_queries(an, "Issues.index", 1, 2)
    b = combine_queries(an, "Issues.index", 1, 2)
    assert a == b and a.sql(an.ir) == b.sql(an.ir)


def test_unlinked_queries_are_not_combinable():
    an = analyzed("fix4.rlite")
    with pytest.raises(NotCombinableError):
        combine_queries(an, "Issues.dashboard", 3, 5)


def test_non_query_node_is_not_combinable():
    an = analyzed("fix2.rlite")
    with pytest.raises(NotCombinableError):
        combine_queries(an, "Issues.index", 0, 2)


REJECTS = """\
model Writer {
  field name: string(40)
}

model Post {
  field views: int
  field public: bool
  belongs_to author: Writer
}

controller Pairs {
  action sliced GET () {
    let top = Post.where(views > 3).limit(5)
    let rest = Post.where(id in top.id)
    for r in rest { render(r.views) }
  }
  action scalar GET () {
    let one = Post.where(views > 3)
    let rest = Post.where(author_id == one.id)
    for r in rest { render(r.views) }
  }
  action shaped GET () {
    let src = Post.where(views > 3)
    let rest = Post.where(id in src.id).limit(3)
    for r in rest { render(r.views) }
  }
  action eagered GET () {
    let src = Post.where(views > 3).includes(author)
    let rest = Post.where(id in src.id)
    for r in rest { render(r.views) }
  }
  action doubled GET () {
    let src = Post.where(views > 3)
    let rest = Post.where(id in src.id, author_id in src.id)
    for r in rest { render(r.views) }
  }
  action fine GET () {
    let src = Writer.where(name == "ann")
    let rest = Post.where(author_id in src.id)
    for r in rest { render(r.views) }
  }
}
"""


@pytest.fixture(scope="module")
def rejects():
    return analyze_source(REJECTS)


@pytest.mark.parametrize("action,fragment", [
    ("Pairs.sliced", "slices"),
    ("Pairs.scalar", "many-row"),
    ("Pairs.shaped", "shapes its result"),
    ("Pairs.eagered", "eager"),
    ("Pairs.doubled", "several predicates"),
])
def test_combine_rejections(rejects, action, fragment):
    producer, consumer = _query_ids(rejects, action)
    with pytest.raises(NotCombinableError, match=fragment):
        combine_queries(rejects, action, producer, consumer)


def test_combine_accepts_clean_feeder_pair(rejects):
    producer, consumer = _query_ids(rejects, "Pairs.fine")
    cq = combine_queries(rejects, "Pairs.fine", producer, consumer)
    assert cq.sql(rejects.ir) == (
        "SELECT * FROM posts INNER JOIN writers ON writers.name = 'ann' "
        "AND posts.author_id = writers.id")


# ---------------------------------------------------------------------------
# Combined execution matches running the pair separately
# ---------------------------------------------------------------------------

def _feeder_store(rng: random.Random) -> dict:
    members = [{"id": i, "group_id": rng.randint(0, 2),
                "nickname": f"m{i}"}
               for i in range(1, rng.randint(1, 30))]
    issues = [{"id": i, "subject": f"s{i}",
               "is_public": rng.random() < 0.5,
               "creator_id": rng.randint(0, 34)}
              for i in range(1, rng.randint(1, 60))]
    rng.shuffle(members)
    rng.shuffle(issues)
    return {"Member": members, "Issue": issues}


def test_combined_join_equals_two_step_execution():
    an = analyzed("fix2.rlite")
    cq = combine_queries(an, "Issues.index", 1, 2)
    pd = cq.producer_desc
    cd = cq.consumer_desc
    link = next(p for p in cd.predicates
                if isinstance(p.source, QueryResultSource))
    for seed in range(120):
        rng = random.Random(seed)
        store = _feeder_store(rng)
        prows = eval_descriptor(store, pd, an.ir)
        bindings = {link.source: [r["id"] for r in prows]}
        direct = eval_descriptor(store, cd, an.ir, bindings)
        joined = execute_combined(store, cq, an.ir)
        assert [r["id"] for r in joined] == [r["id"] for r in direct], seed


def _writer_store(rng: random.Random) -> dict:
    writers = [{"id": i, "name": rng.choice(["ann", "bo", "cy"])}
               for i in range(1, rng.randint(1, 12))]
    posts = [{"id": i, "views": rng.randint(0, 9),
              "public": rng.random() < 0.5,
              "author_id": rng.randint(0, 13)}
             for i in range(1, rng.randint(1, 40))]
    rng.shuffle(writers)
    rng.shuffle(posts)
    return {"Writer": writers, "Post": posts}


def test_combined_join_equals_two_step_execution_belongs_to(rejects):
    producer, consumer = _query_ids(rejects, "Pairs.fine")
    cq = combine_queries(rejects, "Pairs.fine", producer, consumer)
    link = next(p for p in cq.consumer_desc.predicates
                if isinstance(p.source, QueryResultSource))
    for seed in range(120):
        rng = random.Random(1000 + seed)
        store = _writer_store(rng)
        prows = eval_descriptor(store, cq.producer_desc, rejects.ir)
        bindings = {link.source: [r["id"] for r in prows]}
        direct = eval_descriptor(store, cq.consumer_desc, rejects.ir,
                                 bindings)
        joined = execute_combined(store, cq, rejects.ir)
        assert [r["id"] for r in joined] == [r["id"] for r in direct], seed


# ---------------------------------------------------------------------------
# Shared views
# ---------------------------------------------------------------------------

def test_shared_view_plan_structure():
    an = analyzed("fix4.rlite")
    plans = suggest_shared_view(an, "Issues.dashboard")
    assert len(plans) == 1
    plan = plans[0]
    assert plan.anchor == 2
    assert plan.view_sql == "SELECT * FROM issues WHERE priority > :min"
    assert [m.node for m in plan.members] == [3, 5]
    existence, listing = plan.members
    assert existence.full.aggregate == AGG_ANY
    assert existence.delta_predicates == ()
    assert existence.delta_eager == ()
    assert listing.full.aggregate is None
    assert listing.delta_eager == ("status",)
    assert plan.has_shaping_member


def test_shared_view_strips_all_shaping():
    an = analyzed("fix4.rlite")
    plan = suggest_shared_view(an, "Issues.dashboard")[0]
    v = plan.view
    assert v.aggregate is None and v.order_by is None
    assert v.limit is None and v.offset is None and v.group_by is None
    assert v.projection == ()
    assert plan.view_sql == "SELECT * FROM issues WHERE priority > :min"


def test_anchor_filter_limits_plans():
    an = analyzed("fix4.rlite")
    assert suggest_shared_view(an, "Issues.dashboard", anchor=999) == []
    only = suggest_shared_view(an, "Issues.dashboard", anchor=2)
    assert len(only) == 1 and only[0].anchor == 2


def test_suggest_shared_view_is_deterministic():
    an = analyzed("fix4.rlite")
    assert suggest_shared_view(an, "Issues.dashboard") == \
        suggest_shared_view(an, "Issues.dashboard")


def _dashboard_store(rng: random.Random) -> dict:
    nstat = rng.randint(0, 6)
    statuses = [{"id": i, "label": f"st{i}"} for i in range(1, nstat + 1)]
    issues = [{"id": i, "subject": f"i{i}",
               "priority": rng.randint(0, 9),
               "status_id": rng.randint(0, nstat + 2)}
              for i in range(1, rng.randint(1, 50))]
    rng.shuffle(statuses)
    rng.shuffle(issues)
    return {"Status": statuses, "Issue": issues}


def test_view_plan_reproduces_each_member_result():
    an = analyzed("fix4.rlite")
    plan = suggest_shared_view(an, "Issues.dashboard")[0]
    for seed in range(120):
        rng = random.Random(seed)
        store = _dashboard_store(rng)
        bindings = {ParamSource("min"): rng.randint(0, 9)}
        results = execute_view_plan(store, plan, an.ir, bindings)
        for mr in plan.members:
            direct = eval_descriptor(store, mr.full, an.ir, bindings)
            got = results[mr.node]
            if isinstance(direct, list):
                assert [r["id"] for r in got] == \
                    [r["id"] for r in direct], seed
            else:
                assert got == direct, seed
