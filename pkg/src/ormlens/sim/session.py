"""Concrete execution of inlined action bodies against a store.

The interpreter walks the same inlined statement lists the graph builder
consumed, and consults the builder's expression-site table to decide
where queries actually fire: an expression id registered in
`afg.site_nodes` marks the point where a chain was forced, an aggregate
was read, a record was created, or a save flushed. Everything between
those points (stored chains, aliases) evaluates to inert markers, so the
dynamic query log lines up one to one with the static query nodes.

Predicate values bind at force time: each source in the executed node's
descriptor is resolved against the current environment, which matches
the reaching-definition semantics the static analysis assigns to stored
chains extended later. Chain arguments are still evaluated eagerly at
the chain's own syntactic position, mirroring where the builder placed
any queries nested inside them.

Writes follow the create-now, save-later convention: create() inserts a
fully defaulted row immediately, field assignments pend on the handle,
and save() flushes them as one update per affected row.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Any, Optional

from ..afg.model import (AGG_ANY, AGG_COUNT, AGG_FIND, Afg, BinExpr,
                         ConstSource, CreatePayload, GlobalSource, Leaf,
                         ParamSource, QueryPayload, QueryResultSource,
                         UtilitySource, VarSource, expr_leaves)
from ..analysis import Analysis
from ..appmodel.ast_nodes import (AssignStmt, BinOp, BoolLit, Call, Expr,
                                  ExprStmt, FieldAccess, FloatLit, ForStmt,
                                  FormStmt, GlobalStmt, IfStmt, IntLit,
                                  LetStmt, LinkStmt, Name, ParamRef,
                                  RenderStmt, StrLit, Stmt, UnOp)
from ..appmodel.ir import zero_value
from ..rewrite.sql import emit_insert, emit_update
from .datagen import EPOCH_2016_END, EPOCH_2016_START, Store
from .engine import QueryResult, execute_query
from .rng import Rng

NOW = 1477958400  # the simulated clock: 2016-11-01 00:00:00 UTC

_PRED_OPS = {"==", "!=", "<", ">", "in"}


# ---------------------------------------------------------------------------
# Runtime values
# ---------------------------------------------------------------------------

@dataclass
class RowHandle:
    """A single record; `row` is a live store reference (None on a miss)."""

    model: str
    row: Optional[dict]
    written: dict[str, Any] = dc_field(default_factory=dict)
    created: bool = False


@dataclass
class RowsHandle:
    """A materialized result set; `scalar_col` is what coercion reads."""

    model: str
    rows: list[dict]
    scalar_col: str = "id"
    written: dict[str, Any] = dc_field(default_factory=dict)


class ChainMarker:
    """A stored, not yet forced chain. Carries nothing at runtime."""


# ---------------------------------------------------------------------------
# Log records
# ---------------------------------------------------------------------------

@dataclass
class QueryLogEntry:
    kind: str                 # "read" | "write"
    action: str
    step: int
    node: int
    line: int
    col: int
    sql: str
    identities: tuple[tuple[str, int], ...]
    columns: dict[str, tuple[str, ...]]
    params_used: tuple[str, ...] = ()


@dataclass(frozen=True)
class Transition:
    """A link or form the action actually rendered this execution."""

    target: str
    method: str
    kind: str  # "link" | "form"
    link_params: tuple[tuple[str, Any], ...] = ()
    form_fields: tuple[str, ...] = ()


@dataclass
class StepRecord:
    action: str
    method: Optional[str]  # None on session start and restarts
    params: dict[str, Any]
    restart: bool
    form_fields: tuple[str, ...]
    entries: list[QueryLogEntry]


@dataclass
class SessionLog:
    steps: list[StepRecord]

    def entries(self) -> list[QueryLogEntry]:
        return [e for s in self.steps for e in s.entries]


# ---------------------------------------------------------------------------
# Interpreter
# ---------------------------------------------------------------------------

class Executor:
    """Runs one session's actions against one mutable store."""

    def __init__(self, an: Analysis, store: Store) -> None:
        self.an = an
        self.ir = an.ir
        self.store = store
        self.globals: dict[str, Any] = {}

    # -- per-action state ----------------------------------------------------

    def run_action(self, key: str, params: dict[str, Any],
                   step: int) -> tuple[list[QueryLogEntry], list[Transition]]:
        self.afg: Afg = self.an.afgs[key]
        self.key = key
        self.step = step
        self.params = params
        self.env: dict[str, Any] = {}
        self.results: dict[int, QueryResult] = {}
        self.scalar_cols: dict[int, str] = {}
        self.entries: list[QueryLogEntry] = []
        self.transitions: list[Transition] = []
        for s in self.an.bodies[key]:
            self.exec_stmt(s)
        return self.entries, self.transitions

    # -- statements ----------------------------------------------------------

    def exec_stmt(self, s: Stmt) -> None:
        if isinstance(s, LetStmt):
            self.env[s.var] = self.eval_expr(s.value)
        elif isinstance(s, AssignStmt):
            if s.field_name is None:
                self.env[s.target] = self.eval_expr(s.value)
            else:
                v = self.scalarize(self.eval_expr(s.value))
                h = self.env.get(s.target)
                if isinstance(h, (RowHandle, RowsHandle)):
                    h.written[s.field_name] = v
        elif isinstance(s, GlobalStmt):
            self.globals[s.name] = self.scalarize(self.eval_expr(s.value))
        elif isinstance(s, ForStmt):
            src = self.eval_expr(s.source)
            if isinstance(src, RowsHandle):
                rows, model = list(src.rows), src.model
            elif isinstance(src, RowHandle):
                rows = [src.row] if src.row is not None else []
                model = src.model
            else:
                rows, model = [], ""
            for row in rows:
                self.env[s.var] = RowHandle(model, row)
                for inner in s.body:
                    self.exec_stmt(inner)
        elif isinstance(s, IfStmt):
            body = s.then_body if self.truthy(self.eval_expr(s.cond)) \
                else s.else_body
            for inner in body:
                self.exec_stmt(inner)
        elif isinstance(s, RenderStmt):
            for a in s.args:
                self.eval_expr(a)
        elif isinstance(s, LinkStmt):
            target = f"{s.controller}.{s.action}"
            args = tuple((k, self.scalarize(self.eval_expr(v)))
                         for k, v in s.args)
            dst = self.ir.action(s.controller, s.action)
            self.transitions.append(
                Transition(target, dst.method, "link", link_params=args))
        elif isinstance(s, FormStmt):
            target = f"{s.controller}.{s.action}"
            dst = self.ir.action(s.controller, s.action)
            self.transitions.append(
                Transition(target, dst.method, "form",
                           form_fields=tuple(s.fields)))
        elif isinstance(s, ExprStmt):
            self.exec_expr_stmt(s)
        # returns only occur in helper bodies, which were inlined away

    def exec_expr_stmt(self, s: ExprStmt) -> None:
        e = s.value
        if isinstance(e, FieldAccess) and e.name == "save" \
                and isinstance(e.base, Name):
            self.do_save(e)
            return
        self.eval_expr(e)

    def do_save(self, e: FieldAccess) -> None:
        h = self.env.get(e.base.name)
        nid = self.afg.site_nodes.get(e.eid)
        if not isinstance(h, (RowHandle, RowsHandle)) or nid is None:
            return
        node = self.afg.nodes[nid]
        changes = dict(sorted(h.written.items()))
        targets = h.rows if isinstance(h, RowsHandle) \
            else ([h.row] if h.row is not None else [])
        if changes:
            cols = {h.model: tuple(sorted(changes))}
            for row in targets:
                row.update(changes)
                sql = emit_update(self.ir, h.model, row["id"], changes)
                self.entries.append(QueryLogEntry(
                    "write", self.key, self.step, nid,
                    node.loc.line, node.loc.col, sql,
                    ((h.model, row["id"]),), cols))
        h.written.clear()

    # -- expressions ---------------------------------------------------------

    def eval_expr(self, e: Expr) -> Any:
        if isinstance(e, (IntLit, FloatLit, StrLit, BoolLit)):
            return e.value
        if isinstance(e, ParamRef):
            return self.params.get(e.name, 0)
        if isinstance(e, Name):
            if e.name in self.env:
                return self.env[e.name]
            if self.ir.model(e.name) is not None:
                return ChainMarker()
            return self.globals.get(e.name, 0)
        if isinstance(e, FieldAccess):
            base = self.eval_expr(e.base)
            nid = self.afg.site_nodes.get(e.eid)
            if nid is not None:
                node = self.afg.nodes[nid]
                if isinstance(node.payload, QueryPayload):
                    return self.execute_node(node)
            return self.read_attr(base, e.name)
        if isinstance(e, Call):
            return self.eval_call(e)
        if isinstance(e, BinOp):
            return self.eval_binop(e)
        if isinstance(e, UnOp):
            v = self.eval_expr(e.operand)
            if e.op == "!":
                return not self.truthy(v)
            return -self.scalarize(v)
        raise TypeError(f"unknown expr {type(e).__name__}")

    def eval_call(self, e: Call) -> Any:
        if e.base is None:
            if e.name == "now":
                return NOW
            return 0
        self.eval_expr(e.base)
        # evaluate arguments at the chain's own position, for their side
        # effects; the values regarded by the query bind at force time
        if e.name == "where":
            for a in e.args:
                if isinstance(a, BinOp) and a.op in _PRED_OPS:
                    self.eval_expr(a.right)
        elif e.name in ("limit", "offset", "find"):
            for a in e.args:
                self.eval_expr(a)
        elif e.name == "create":
            for _, v in e.kwargs:
                self.eval_expr(v)
        nid = self.afg.site_nodes.get(e.eid)
        if nid is not None:
            node = self.afg.nodes[nid]
            if isinstance(node.payload, CreatePayload):
                return self.do_create(node)
            if isinstance(node.payload, QueryPayload):
                return self.execute_node(node)
        return ChainMarker()

    def eval_binop(self, e: BinOp) -> Any:
        if e.op == "&&":
            return self.truthy(self.eval_expr(e.left)) \
                and self.truthy(self.eval_expr(e.right))
        if e.op == "||":
            return self.truthy(self.eval_expr(e.left)) \
                or self.truthy(self.eval_expr(e.right))
        if e.op == "in":
            left = self.scalarize(self.eval_expr(e.left))
            return left in self.listify(self.eval_expr(e.right))
        left = self.scalarize(self.eval_expr(e.left))
        right = self.scalarize(self.eval_expr(e.right))
        if e.op == "==":
            return left == right
        if e.op == "!=":
            return left != right
        if e.op == "<":
            return left < right
        if e.op == ">":
            return left > right
        if e.op == "+":
            return left + right
        if e.op == "-":
            return left - right
        if e.op == "*":
            return left * right
        if e.op == "/":
            return left // right if right != 0 else 0
        raise ValueError(f"unknown operator {e.op!r}")

    # -- attribute reads -----------------------------------------------------

    def read_attr(self, base: Any, name: str) -> Any:
        if isinstance(base, RowHandle):
            if name in base.written:
                return base.written[name]
            if base.row is None:
                return 0
            if name in base.row:
                return base.row[name]
            return self._assoc_read(base.model, [base.row], name)
        if isinstance(base, RowsHandle):
            if base.rows and name in base.rows[0]:
                return [base.written.get(name, r.get(name, 0))
                        for r in base.rows]
            model = self.ir.model(base.model)
            if model is not None and name in model.assoc_map():
                return self._assoc_read(base.model, base.rows, name)
            return []
        return ChainMarker() if isinstance(base, ChainMarker) else 0

    def _assoc_read(self, model: str, rows: list[dict], name: str) -> Any:
        """Navigate an association straight off the store, unlogged."""
        decl = self.ir.model(model)
        assoc = decl.assoc_map().get(name) if decl else None
        if assoc is None:
            return 0
        target_rows = self.store.get(assoc.target, [])
        if assoc.kind == "belongs_to":
            wanted = {r[assoc.foreign_key] for r in rows}
            hits = [t for t in target_rows if t["id"] in wanted]
            if len(rows) == 1:
                return RowHandle(assoc.target, hits[0] if hits else None)
            return RowsHandle(assoc.target, sorted(hits,
                                                   key=lambda r: r["id"]))
        ids = {r["id"] for r in rows}
        hits = [t for t in target_rows if t[assoc.foreign_key] in ids]
        hits = sorted(hits, key=lambda r: r["id"])
        if len(rows) == 1 and assoc.kind == "has_one":
            return RowHandle(assoc.target, hits[0] if hits else None)
        return RowsHandle(assoc.target, hits)

    # -- query execution -----------------------------------------------------

    def execute_node(self, node) -> Any:
        desc = node.payload.descriptor
        params_used: set[str] = set()
        bindings: dict[Any, Any] = {}
        for p in desc.predicates:
            v = self.source_value(p.source, params_used)
            bindings[p.source] = self.listify(v) if p.op == "IN" \
                else self.scalarize(v)
        for ve in (desc.limit, desc.offset):
            if ve is not None:
                for leaf in expr_leaves(ve):
                    v = self.scalarize(self.source_value(leaf, params_used))
                    bindings[leaf] = int(v)
        res = execute_query(self.store, desc, self.ir, bindings)
        self.results[node.id] = res
        self.scalar_cols[node.id] = self._scalar_col(desc)
        self.entries.append(QueryLogEntry(
            "read", self.key, self.step, node.id,
            node.loc.line, node.loc.col, res.sql,
            res.identities, res.columns, tuple(sorted(params_used))))
        if desc.aggregate in (AGG_COUNT, AGG_ANY):
            return res.value
        if desc.aggregate == AGG_FIND:
            row = res.rows[0] if res.rows else None
            return RowHandle(desc.root_model, row)
        return RowsHandle(desc.root_model, res.rows,
                          scalar_col=self._scalar_col(desc))

    @staticmethod
    def _scalar_col(desc) -> str:
        roots = [c for m, c in desc.projection if m == desc.root_model]
        if len(desc.projection) == 1 and len(roots) == 1:
            return roots[0]
        return "id"

    def do_create(self, node) -> RowHandle:
        payload: CreatePayload = node.payload
        model = self.ir.model(payload.model)
        rows = self.store.setdefault(payload.model, [])
        new_id = max((r["id"] for r in rows), default=0) + 1
        row = {f.name: (new_id if f.name == "id" else zero_value(f.kind))
               for f in model.fields}
        for col, vexpr in payload.writes:
            row[col] = self.scalarize(self.eval_vexpr(vexpr))
        rows.append(row)
        sql = emit_insert(self.ir, payload.model, row)
        self.entries.append(QueryLogEntry(
            "write", self.key, self.step, node.id,
            node.loc.line, node.loc.col, sql,
            ((payload.model, new_id),),
            {payload.model: tuple(sorted(row))}))
        return RowHandle(payload.model, row, created=True)

    def eval_vexpr(self, ve) -> Any:
        if isinstance(ve, Leaf):
            return self.source_value(ve.source, set())
        assert isinstance(ve, BinExpr)
        left = self.scalarize(self.eval_vexpr(ve.left))
        right = self.scalarize(self.eval_vexpr(ve.right))
        if ve.op == "+":
            return left + right
        if ve.op == "-":
            return left - right
        if ve.op == "*":
            return left * right
        return left // right if right != 0 else 0

    # -- descriptor sources against the live environment ----------------------

    def source_value(self, src, params_used: set) -> Any:
        if isinstance(src, ConstSource):
            return src.value
        if isinstance(src, ParamSource):
            params_used.add(src.name)
            return self.params.get(src.name, 0)
        if isinstance(src, GlobalSource):
            return self.globals.get(src.name, 0)
        if isinstance(src, UtilitySource):
            return NOW
        if isinstance(src, QueryResultSource):
            return self._result_values(src.node, src.column)
        if isinstance(src, VarSource):
            return self._var_value(src, params_used)
        raise TypeError(f"unknown source {type(src).__name__}")

    def _result_values(self, node_id: int, column: Optional[str]) -> Any:
        res = self.results.get(node_id)
        if res is None:
            return 0
        if res.value is not None:
            return res.value
        col = column or self.scalar_cols.get(node_id, "id")
        return [r.get(col, r.get("id", 0)) for r in res.rows]

    def _var_value(self, src: VarSource, params_used: set) -> Any:
        node = self.afg.nodes.get(src.node)
        sym = node.defs[0] if node is not None and node.defs else None
        if sym is None:
            return 0
        if sym.startswith("%q"):
            return self._result_values(int(sym[2:]), src.column)
        if sym.startswith("param:"):
            name = sym[len("param:"):]
            params_used.add(name)
            return self.params.get(name, 0)
        if sym.startswith("global:"):
            return self.globals.get(sym[len("global:"):], 0)
        if "." in sym:
            var, field_name = sym.split(".", 1)
            return self.read_attr(self.env.get(var), field_name) \
                if var in self.env else 0
        v = self.env.get(sym, 0)
        if src.column is not None and isinstance(v, (RowHandle, RowsHandle)):
            return self.read_attr(v, src.column)
        return v

    # -- coercions -------------------------------------------------------------

    def scalarize(self, v: Any) -> Any:
        if isinstance(v, RowHandle):
            return v.row["id"] if v.row is not None else 0
        if isinstance(v, RowsHandle):
            if not v.rows:
                return 0
            first = v.rows[0]
            return first.get(v.scalar_col, first.get("id", 0))
        if isinstance(v, list):
            return v[0] if v else 0
        if isinstance(v, ChainMarker) or v is None:
            return 0
        return v

    def listify(self, v: Any) -> list:
        if isinstance(v, RowsHandle):
            return [r.get(v.scalar_col, r.get("id", 0)) for r in v.rows]
        if isinstance(v, (list, tuple)):
            return list(v)
        return [self.scalarize(v)]

    def truthy(self, v: Any) -> bool:
        if isinstance(v, RowHandle):
            return v.row is not None
        if isinstance(v, RowsHandle):
            return bool(v.rows)
        if isinstance(v, ChainMarker):
            return False
        return bool(v)


# ---------------------------------------------------------------------------
# Session driving
# ---------------------------------------------------------------------------

def _zero_params(an: Analysis, key: str) -> dict[str, Any]:
    controller, action = key.split(".", 1)
    decl = an.ir.action(controller, action)
    return {p.name: zero_value(p.type) for p in decl.params}


def _gen_value(rng: Rng, ptype: str) -> Any:
    if ptype == "int":
        return rng.randint(0, 999)
    if ptype == "float":
        return rng.random()
    if ptype == "bool":
        return rng.randint(0, 1) == 1
    if ptype == "datetime":
        return rng.randint(EPOCH_2016_START, EPOCH_2016_END)
    return "".join("abcdefghijklmnopqrstuvwxyz"[rng.randint(0, 25)]
                   for _ in range(8))


def _step_params(an: Analysis, t: Transition, rng: Rng) -> dict[str, Any]:
    controller, action = t.target.split(".", 1)
    decl = an.ir.action(controller, action)
    link = dict(t.link_params)
    out: dict[str, Any] = {}
    for p in decl.params:
        if t.kind == "link" and p.name in link:
            out[p.name] = link[p.name]
        elif t.kind == "form" and p.name in t.form_fields:
            out[p.name] = _gen_value(rng, p.type)
        else:
            out[p.name] = zero_value(p.type)
    return out


def run_session(an: Analysis, store: Store, rng: Rng,
                length: int = 9) -> SessionLog:
    """Drive one user session of `length` actions over a private store."""
    actions = sorted(an.afgs)
    ex = Executor(an, store)
    steps: list[StepRecord] = []
    key = rng.choice(actions)
    params = _zero_params(an, key)
    method: Optional[str] = None
    restart = False
    form_fields: tuple[str, ...] = ()
    for step in range(length):
        entries, transitions = ex.run_action(key, params, step)
        steps.append(StepRecord(key, method, params, restart,
                                form_fields, entries))
        if step + 1 == length:
            break
        if transitions:
            t = rng.choice(transitions)
            key = t.target
            params = _step_params(an, t, rng)
            method = t.method
            restart = False
            form_fields = t.form_fields
        else:
            key = rng.choice(actions)
            params = _zero_params(an, key)
            method = None
            restart = True
            form_fields = ()
    return SessionLog(steps)
