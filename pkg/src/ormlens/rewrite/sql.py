"""Canonical SQL rendering for query descriptors and write statements.

One descriptor always renders to the same single-line string, so rendered
SQL doubles as a cache key: two queries are syntactically equivalent
exactly when their bound SQL is byte-equal. Keywords are uppercase; tables
get t1..tn aliases when the statement joins or projects explicitly, and
stay bare otherwise.

Unbound inputs render as named placeholders (:param, :g_global, :u_utility,
:nNODE_col). With executable=True every placeholder must be covered by the
bindings map (keyed by the source object) or UnboundParameterError is
raised, and values are formatted by the column's declared type: strings
quoted with '' doubling, datetimes as 'YYYY-MM-DD HH:MM:SS' from epoch
seconds, booleans as 1/0.
"""

from __future__ import annotations

from datetime import datetime, timezone
from typing import Any, Mapping, Optional

from ..appmodel.ir import AppIR, ModelDecl, table_name
from ..errors import UnboundParameterError
from ..afg.model import (
    AGG_ANY, AGG_COUNT, BinExpr, ConstSource, GlobalSource, Leaf,
    ParamSource, Predicate, QueryDescriptor, QueryResultSource,
    UtilitySource, ValueExpr, VarSource,
)

_OPS = {"==": "=", "!=": "<>", "<": "<", ">": ">", "IN": "IN", "in": "IN"}

Bindings = Mapping[Any, Any]


def _placeholder(src: object) -> str:
    if isinstance(src, ParamSource):
        return f":{src.name}"
    if isinstance(src, GlobalSource):
        return f":g_{src.name}"
    if isinstance(src, UtilitySource):
        return f":u_{src.name}"
    if isinstance(src, (VarSource, QueryResultSource)):
        col = src.column if src.column is not None else "row"
        return f":n{src.node}_{col}"
    raise UnboundParameterError(f"cannot name source {src!r}")


def format_value(value: Any, kind: str) -> str:
    """One SQL literal, shaped by the column's declared type.

    A value whose runtime type cannot take the column's shape (a string
    bound into an int slot, say, when a link passed the wrong field) is
    rendered as what it is; the comparison then simply never matches,
    which is also what the evaluator does.
    """
    if isinstance(value, str) and kind not in ("string", "text"):
        return "'" + value.replace("'", "''") + "'"
    if kind == "datetime":
        ts = datetime.fromtimestamp(int(value), tz=timezone.utc)
        return "'" + ts.strftime("%Y-%m-%d %H:%M:%S") + "'"
    if kind == "bool":
        return "1" if value else "0"
    if kind in ("string", "text"):
        return "'" + str(value).replace("'", "''") + "'"
    if kind == "float":
        return repr(float(value))
    return str(int(value))


def _render_source(src: object, kind: str, bindings: Optional[Bindings],
                   executable: bool) -> str:
    if isinstance(src, ConstSource):
        return format_value(src.value, kind)
    if bindings is not None and src in bindings:
        value = bindings[src]
        if isinstance(value, (list, tuple, set)):
            items = sorted(value) if isinstance(value, set) else value
            inner = ", ".join(format_value(v, kind) for v in items)
            return f"({inner})" if inner else "(NULL)"
        return format_value(value, kind)
    if executable:
        raise UnboundParameterError(
            f"no binding for {_placeholder(src)}")
    return _placeholder(src)


def _render_vexpr(e: ValueExpr, bindings: Optional[Bindings],
                  executable: bool) -> str:
    """Limit/offset expressions; collapses to an int when fully bound."""
    v = _eval_vexpr(e, bindings)
    if v is not None:
        return str(int(v))
    if executable:
        raise UnboundParameterError("unbound limit/offset expression")
    return _render_static_vexpr(e)


def _eval_vexpr(e: ValueExpr, bindings: Optional[Bindings]) -> Optional[int]:
    if isinstance(e, Leaf):
        if isinstance(e.source, ConstSource):
            return int(e.source.value)
        if bindings is not None and e.source in bindings:
            return int(bindings[e.source])
        return None
    left = _eval_vexpr(e.left, bindings)
    right = _eval_vexpr(e.right, bindings)
    if left is None or right is None:
        return None
    return _apply_arith(e.op, left, right)


def _apply_arith(op: str, left: int, right: int) -> int:
    if op == "+":
        return left + right
    if op == "-":
        return left - right
    if op == "*":
        return left * right
    if op == "/":
        return left // right if right else 0
    raise ValueError(f"unexpected arithmetic op {op!r}")


def _render_static_vexpr(e: ValueExpr) -> str:
    if isinstance(e, Leaf):
        if isinstance(e.source, ConstSource):
            return str(int(e.source.value))
        return _placeholder(e.source)
    return (f"({_render_static_vexpr(e.left)} {e.op} "
            f"{_render_static_vexpr(e.right)})")


def _column_kind(ir: AppIR, desc: QueryDescriptor, column: str) -> str:
    if "." in column:
        assoc_name, col = column.split(".", 1)
        root = ir.model(desc.root_model)
        assoc = root.assoc_map().get(assoc_name)
        model = ir.model(assoc.target) if assoc is not None else None
    else:
        model, col = ir.model(desc.root_model), column
    if model is not None:
        f = model.field_map().get(col)
        if f is not None:
            return f.kind
    return "int"


def _aliases(ir: AppIR, desc: QueryDescriptor) -> tuple[dict, bool]:
    """(qualifier per model/assoc, aliased?) for this statement."""
    aliased = bool(desc.eager_loads) or _explicit_projection(ir, desc)
    root = ir.model(desc.root_model)
    quals: dict[str, str] = {}
    if not aliased:
        quals[desc.root_model] = ""
        return quals, False
    quals[desc.root_model] = "t1"
    for i, name in enumerate(desc.eager_loads, start=2):
        assoc = root.assoc_map()[name]
        quals[f"assoc:{name}"] = f"t{i}"
        quals.setdefault(assoc.target, f"t{i}")
    return quals, True


def _explicit_projection(ir: AppIR, desc: QueryDescriptor) -> bool:
    if desc.aggregate is not None or not desc.projection:
        return False
    return set(desc.projection) != set(_default_projection(ir, desc))


def _default_projection(ir: AppIR,
                        desc: QueryDescriptor) -> list[tuple[str, str]]:
    root = ir.model(desc.root_model)
    cols = [(root.name, f.name) for f in root.fields]
    for name in desc.eager_loads:
        target = ir.model(root.assoc_map()[name].target)
        cols.extend((target.name, f.name) for f in target.fields)
    return cols


def _qualify(quals: dict, desc: QueryDescriptor, column: str) -> str:
    if "." in column:
        assoc_name, col = column.split(".", 1)
        q = quals.get(f"assoc:{assoc_name}")
        if q is None:
            raise UnboundParameterError(
                f"predicate on {column} without includes({assoc_name})")
        return f"{q}.{col}"
    q = quals.get(desc.root_model, "")
    return f"{q}.{column}" if q else column


def emit_sql(desc: QueryDescriptor, ir: AppIR,
             bindings: Optional[Bindings] = None,
             executable: bool = False) -> str:
    root = ir.model(desc.root_model)
    quals, aliased = _aliases(ir, desc)

    if desc.aggregate in (AGG_COUNT, AGG_ANY):
        select = "COUNT(*)"
    elif _explicit_projection(ir, desc):
        select = ", ".join(
            _qualify(quals, desc, c) if m == desc.root_model
            else f"{quals.get(m, '?')}.{c}"
            for (m, c) in desc.projection)
    elif aliased:
        select = ", ".join(f"{q}.*" for q in _ordered_quals(quals))
    else:
        select = "*"

    frm = table_name(desc.root_model)
    if aliased:
        frm += " AS t1"
    parts = [f"SELECT {select} FROM {frm}"]

    for i, name in enumerate(desc.eager_loads, start=2):
        assoc = root.assoc_map()[name]
        tbl = table_name(assoc.target)
        alias = f"t{i}"
        if assoc.kind == "belongs_to":
            on = f"{alias}.id = t1.{assoc.foreign_key}"
        else:
            on = f"{alias}.{assoc.foreign_key} = t1.id"
        parts.append(f"INNER JOIN {tbl} AS {alias} ON {on}")

    conds = []
    for p in desc.predicates:
        lhs = _qualify(quals, desc, p.column)
        kind = _column_kind(ir, desc, p.column)
        rhs = _render_source(p.source, kind, bindings, executable)
        conds.append(f"{lhs} {_OPS[p.op]} {rhs}")
    if conds:
        parts.append("WHERE " + " AND ".join(conds))

    if desc.group_by is not None:
        parts.append("GROUP BY " + _qualify(quals, desc, desc.group_by))
    if desc.order_by is not None:
        parts.append("ORDER BY " + _qualify(quals, desc, desc.order_by))
    if desc.limit is not None:
        parts.append("LIMIT " + _render_vexpr(desc.limit, bindings,
                                              executable))
    if desc.offset is not None:
        parts.append("OFFSET " + _render_vexpr(desc.offset, bindings,
                                               executable))
    return " ".join(parts)


def _ordered_quals(quals: dict) -> list[str]:
    out = []
    for key, q in quals.items():
        if key.startswith("assoc:") or not q:
            continue
        if q not in out:
            out.append(q)
    for key, q in quals.items():
        if key.startswith("assoc:") and q not in out:
            out.append(q)
    return sorted(out, key=lambda a: int(a[1:]))


def emit_insert(ir: AppIR, model: str, row: Mapping[str, Any]) -> str:
    m = ir.model(model)
    cols = [f.name for f in m.fields if f.name in row]
    vals = [format_value(row[c], m.field_map()[c].kind) for c in cols]
    return (f"INSERT INTO {table_name(model)} ({', '.join(cols)}) "
            f"VALUES ({', '.join(vals)})")


def emit_update(ir: AppIR, model: str, row_id: int,
                changes: Mapping[str, Any]) -> str:
    m = ir.model(model)
    sets = ", ".join(
        f"{c} = {format_value(v, m.field_map()[c].kind)}"
        for c, v in changes.items())
    return f"UPDATE {table_name(model)} SET {sets} WHERE id = {row_id}"
