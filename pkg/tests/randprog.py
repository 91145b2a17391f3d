"""Seeded generators for programs, query descriptors, and stores.

random_program assembles valid-by-construction source over a fixed
two-model schema, so analysis properties can be checked across hundreds
of distinct applications. random_descriptor and random_store feed the
evaluator equivalence tests directly, skipping the language layer; the
store generator deliberately produces duplicate sort keys, empty tables,
and dangling foreign keys, the corners where two evaluators are most
likely to disagree.
"""

from __future__ import annotations

import random

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

SCHEMA = """\
model Org {
  field name: string(40)
  field kind: string(20)
  field active: bool
  has_many items: Item by org_id
}

model Item {
  field title: string(60)
  field body: text
  field score: int
  field flag: bool
  field created: datetime
  belongs_to org: Org
}
"""

HELPER = """\
def tally(o) {
  let s = 0
  for it in o.items {
    s = s + it.score
  }
  return s
}
"""


# ---------------------------------------------------------------------------
# Whole programs
# ---------------------------------------------------------------------------

def _chain(rng: random.Random) -> str:
    parts = ["Item"]
    preds = []
    if rng.random() < 0.8:
        preds.append(rng.choice([
            f"score > {rng.randint(0, 9)}",
            f"score < {rng.randint(5, 15)}",
            "flag == true",
            "flag != true",
            f"title == \"t{rng.randint(0, 3)}\"",
            "org.kind == \"main\"",
        ]))
    if rng.random() < 0.3:
        preds.append(f"score != {rng.randint(0, 5)}")
    if preds:
        parts.append(f".where({', '.join(preds)})")
    if any(p.startswith("org.") for p in preds) or rng.random() < 0.4:
        parts.append(".includes(org)")
    if rng.random() < 0.3:
        parts.append(".select(title, score)")
    if rng.random() < 0.4:
        parts.append(f".order({rng.choice(['score', 'title', 'created'])})")
    if rng.random() < 0.4:
        parts.append(f".limit({rng.randint(1, 8)})")
        if rng.random() < 0.5:
            parts.append(f".offset({rng.randint(0, 5)})")
    if rng.random() < 0.15:
        parts.append(f".group({rng.choice(['org_id', 'flag'])})")
    if len(parts) == 1:
        parts.append(".order(score)")
    return "".join(parts)


def _render_cols(rng: random.Random, chain: str) -> str:
    cols = ["it.title"] if ".select" in chain else \
        [rng.choice(["it.title", "it.score", "it.body"])]
    if ".includes(org)" in chain and rng.random() < 0.7:
        cols.append("it.org.name")
    return ", ".join(cols)


def _block_list(rng: random.Random) -> list[str]:
    chain = _chain(rng)
    return [f"    for it in {chain} {{",
            f"      render({_render_cols(rng, chain)})",
            "    }"]


def _block_stored(rng: random.Random) -> list[str]:
    chain = _chain(rng)
    lines = [f"    let rel = {chain}"]
    if rng.random() < 0.5:
        lines += ["    if rel.any {",
                  "      for it in rel.order(score) {",
                  "        render(it.title)",
                  "      }",
                  "    }"]
    else:
        lines += ["    let n = rel.count",
                  "    render(n)"]
    return lines


def _block_param_filter(rng: random.Random) -> list[str]:
    return [f"    for it in Item.where(score > param(min)) {{",
            "      render(it.score)",
            "    }"]


def _block_accumulate(rng: random.Random) -> list[str]:
    return ["    let total = 0",
            f"    for it in {_chain(rng)} {{",
            "      total = total + it.score",
            "    }",
            "    render(total)"]


def _block_nested(rng: random.Random) -> list[str]:
    return [f"    for o in Org.where(active == true).limit({rng.randint(1, 4)}) {{",
            "      for it in Item.where(org_id == o.id) {",
            "        render(it.title)",
            "      }",
            "    }"]


def _block_global(rng: random.Random) -> list[str]:
    return [f"    global watermark = Item.where(score > {rng.randint(0, 9)}).count",
            "    render(1)"]


def _block_branch(rng: random.Random) -> list[str]:
    n = rng.randint(1, 6)
    return [f"    let lo = Item.where(score < {n}).count",
            f"    if lo > {rng.randint(0, 4)} {{",
            "      render(lo)",
            "    } else {",
            f"      render({n})",
            "    }"]


def _block_helper(rng: random.Random) -> list[str]:
    return ["    for o in Org.where(active == true) {",
            "      let t = tally(o)",
            "      render(o.name, t)",
            "    }"]


_GET_BLOCKS = [_block_list, _block_stored, _block_accumulate,
               _block_nested, _block_global, _block_branch]


def random_program(seed: int) -> str:
    """One valid application; distinct seeds give distinct bodies."""
    rng = random.Random(seed)
    uses_helper = rng.random() < 0.4
    names = [f"page{i}" for i in range(rng.randint(2, 4))]
    kinds = ["list"] + [rng.choice(["list", "filter", "submit"])
                        for _ in names[1:]]
    post_targets = [n for n, k in zip(names, kinds) if k == "submit"]

    out = [SCHEMA]
    if uses_helper:
        out.append(HELPER)
    out.append("controller Pages {")
    for name, kind in zip(names, kinds):
        if kind == "submit":
            out.append(f"  action {name} POST (title: string, score: int) {{")
            out.append("    let it = Item.create(title: param(title),"
                       f" score: param(score), org_id: {rng.randint(1, 5)})")
            if rng.random() < 0.6:
                out.append("    it.flag = true")
                out.append("    it.save")
            out.append("    render(it.id)")
        elif kind == "filter":
            out.append(f"  action {name} GET (min: int) {{")
            out.extend(_block_param_filter(rng))
        else:
            out.append(f"  action {name} GET () {{")
            pool = _GET_BLOCKS + ([_block_helper] if uses_helper else [])
            for blk in rng.sample(pool, k=rng.randint(1, 2)):
                out.extend(blk(rng))
        others = [n for n in names if n != name]
        if others and rng.random() < 0.8:
            tgt = rng.choice(others)
            if tgt in post_targets:
                out.append(f"    form_to Pages.{tgt}(title, score)")
            else:
                args = "" if (tgt, "filter") not in zip(names, kinds) \
                    else f"min: {rng.randint(0, 5)}"
                out.append(f"    link_to Pages.{tgt}({args})")
        out.append("  }")
    out.append("}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Descriptors and stores for the evaluator tests
# ---------------------------------------------------------------------------

ORG_COLS = ("id", "name", "kind", "active")
ITEM_COLS = ("id", "title", "body", "score", "flag", "created", "org_id")

_SCHEMA_IR = None


def schema_ir():
    """The two-model schema as an IR, for tests that skip the language."""
    global _SCHEMA_IR
    if _SCHEMA_IR is None:
        from ormlens import parse_app

        _SCHEMA_IR = parse_app(
            SCHEMA
            + "controller Pages { action home GET () { render(1) } }")
    return _SCHEMA_IR

_EPOCH_LO = 1451606400
_EPOCH_HI = 1483142400


def random_store(rng: random.Random, max_rows: int = 40) -> dict:
    """A store with empty-table, duplicate-key, and dangling-fk corners."""
    n_org = rng.randint(0, max(1, max_rows // 4))
    n_item = rng.randint(0, max_rows)
    orgs = []
    for i in range(1, n_org + 1):
        orgs.append({
            "id": i,
            "name": rng.choice(["acme", "globex", "initech"]),
            "kind": rng.choice(["main", "side", "lab"]),
            "active": rng.random() < 0.6,
        })
    items = []
    for i in range(1, n_item + 1):
        fk = rng.randint(1, n_org) if n_org and rng.random() < 0.85 \
            else n_org + rng.randint(1, 3)
        items.append({
            "id": i,
            "title": f"t{rng.randint(0, 3)}",
            "body": "b" * rng.randint(0, 4),
            "score": rng.randint(-5, 15),
            "flag": rng.random() < 0.5,
            "created": rng.randint(_EPOCH_LO, _EPOCH_HI),
            "org_id": fk,
        })
    rng.shuffle(orgs)
    rng.shuffle(items)
    return {"Org": orgs, "Item": items}


def _item_pred(rng: random.Random, bindings: dict) -> Predicate:
    roll = rng.random()
    if roll < 0.25:
        op = rng.choice(["==", "!=", "<", ">"])
        return Predicate("score", op, ConstSource(rng.randint(-2, 12)))
    if roll < 0.40:
        return Predicate("flag", rng.choice(["==", "!="]),
                         ConstSource(rng.random() < 0.5))
    if roll < 0.55:
        return Predicate("title", "==", ConstSource(f"t{rng.randint(0, 3)}"))
    if roll < 0.70:
        src = ParamSource(f"p{len(bindings)}")
        bindings[src] = rng.sample(range(1, 9), k=rng.randint(1, 4))
        return Predicate("org_id", "IN", src)
    if roll < 0.85:
        src = ParamSource(f"p{len(bindings)}")
        bindings[src] = rng.randint(-2, 12)
        return Predicate("score", rng.choice(["<", ">"]), src)
    return Predicate("org.kind", rng.choice(["==", "!="]),
                     ConstSource(rng.choice(["main", "side", "lab"])))


def _org_pred(rng: random.Random, bindings: dict) -> Predicate:
    roll = rng.random()
    if roll < 0.35:
        return Predicate("active", "==", ConstSource(rng.random() < 0.5))
    if roll < 0.60:
        return Predicate("kind", rng.choice(["==", "!="]),
                         ConstSource(rng.choice(["main", "side", "lab"])))
    if roll < 0.80:
        return Predicate("items.score", rng.choice(["<", ">"]),
                         ConstSource(rng.randint(-2, 12)))
    src = ParamSource(f"p{len(bindings)}")
    bindings[src] = rng.choice([rng.randint(1, 6),
                                list(range(1, rng.randint(2, 7)))])
    return Predicate("id", "IN" if isinstance(bindings[src], list) else "==",
                     src)


def _int_leaf(rng: random.Random, bindings: dict, lo: int, hi: int):
    if rng.random() < 0.3:
        src = ParamSource(f"p{len(bindings)}")
        bindings[src] = rng.randint(lo, hi)
        base = Leaf(src)
    else:
        base = Leaf(ConstSource(rng.randint(lo, hi)))
    if rng.random() < 0.25:
        return BinExpr("+", base, Leaf(ConstSource(rng.randint(0, 2))))
    return base


def random_descriptor(rng: random.Random) -> tuple[QueryDescriptor, dict]:
    """One executable descriptor plus bindings for its parameter slots."""
    bindings: dict = {}
    if rng.random() < 0.7:
        root, cols = "Item", ITEM_COLS
        preds = tuple(_item_pred(rng, bindings)
                      for _ in range(rng.randint(0, 3)))
        eager = ("org",) if rng.random() < 0.4 else ()
        order = rng.choice([None, "score", "title", "created", "id"])
        group = rng.choice([None, None, None, "org_id", "flag", "title"])
    else:
        root, cols = "Org", ORG_COLS
        preds = tuple(_org_pred(rng, bindings)
                      for _ in range(rng.randint(0, 2)))
        eager = ("items",) if rng.random() < 0.4 else ()
        order = rng.choice([None, "name", "kind", "id"])
        group = rng.choice([None, None, "kind", "active"])
    # an association predicate needs its join in the same chain
    pred_assocs = tuple(p.column.split(".", 1)[0] for p in preds
                        if "." in p.column)
    for name in pred_assocs:
        if name not in eager:
            eager = eager + (name,)
    limit = _int_leaf(rng, bindings, 0, 10) if rng.random() < 0.5 else None
    offset = _int_leaf(rng, bindings, 0, 6) if rng.random() < 0.4 else None
    agg = rng.choice([None, None, None, AGG_COUNT, AGG_ANY])
    proj_cols = cols if rng.random() < 0.7 else \
        tuple(sorted(rng.sample(cols, k=rng.randint(1, len(cols)))))
    desc = QueryDescriptor(
        root_model=root,
        predicates=preds,
        eager_loads=eager,
        order_by=order,
        limit=limit,
        offset=offset,
        group_by=group,
        aggregate=agg,
        projection=tuple((root, c) for c in proj_cols),
    )
    return desc, bindings
