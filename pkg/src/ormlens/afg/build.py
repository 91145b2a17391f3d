"""AFG construction: helper inlining, chain resolution, dataflow edges.

Chain laziness mirrors the ORM it models. A let-bound chain becomes a Query
node at the let only when the variable's value is consumed somewhere (field
read, render, iteration, predicate source, link argument); a chain consumed
only by extensions (`v.any`, iterating `v.includes(...)`) stays a
stored-chain Assign node and every extension materializes its own Query node
whose chainPrefixOf points at the base node. Pass A over the inlined body
makes those forcing decisions; pass B builds nodes; reaching definitions
over the control graph then add Data edges, and a second pass without each
loop's back edge marks the loop-carried flows.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Iterator, Optional

from ..appmodel.ast_nodes import (
    AssignStmt, BinOp, Body, BoolLit, Call, Expr, ExprStmt, FieldAccess,
    FloatLit, ForStmt, FormStmt, GlobalStmt, IfStmt, IntLit, LetStmt,
    LinkStmt, Loc, Name, ParamRef, RenderStmt, ReturnStmt, Stmt, StrLit,
    UnOp, clone_expr, clone_stmt,
)
from ..appmodel.ir import ActionDecl, AppIR
from ..errors import (
    OrmLensError, UnknownColumnError, UnresolvedReferenceError,
    UnroutedTargetError,
)
from .model import (
    AGG_ANY, AGG_COUNT, AGG_FIND, ActionGraph, Afg, AfgEdge, AfgNode,
    BinExpr, BranchPayload, ConstSource, CreatePayload, EdgeKind,
    FieldWritePayload, FormPayload, GlobalSource, Leaf, LinkPayload,
    LoopPayload, NextActionEdge, NodeKind, ParamPayload, ParamSource,
    PlainAssignPayload, Predicate, QueryDescriptor, QueryPayload,
    QueryResultSource, RenderPayload, SavePayload, StoredChainPayload, Use,
    UseRole, UtilitySource, ValueExpr, VarSource,
)

_CHAIN_EXT = frozenset({"where", "includes", "select", "order", "limit",
                        "offset", "group"})
_TERMINALS = frozenset({"count", "any"})
_PRED_OPS = {"==": "==", "!=": "!=", "<": "<", ">": ">", "in": "IN"}


class BuildError(OrmLensError):
    """The action body uses a value in a way the graph model cannot express."""


# ---------------------------------------------------------------------------
# Helper inlining
# ---------------------------------------------------------------------------

class _Inliner:
    def __init__(self, ir: AppIR):
        self.ir = ir
        self.next_id = ir.max_node_id
        self.instance = 0

    def fresh(self) -> int:
        self.next_id += 1
        return self.next_id

    def inline_body(self, body: Body, stack: tuple[str, ...]) -> Body:
        out: Body = []
        for s in body:
            out.extend(self.inline_stmt(s, stack))
        return out

    def inline_stmt(self, s: Stmt, stack: tuple[str, ...]) -> Body:
        call = self._helper_call(s)
        if call is not None:
            result_var = None
            if isinstance(s, LetStmt):
                result_var = s.var
            elif isinstance(s, AssignStmt):
                result_var = s.target
            return self._expand(call, result_var, s.loc, stack)
        if isinstance(s, ForStmt):
            return [ForStmt(s.sid, s.loc, s.var, s.source,
                            self.inline_body(s.body, stack))]
        if isinstance(s, IfStmt):
            return [IfStmt(s.sid, s.loc, s.cond,
                           self.inline_body(s.then_body, stack),
                           self.inline_body(s.else_body, stack))]
        return [s]

    def _helper_call(self, s: Stmt) -> Optional[Call]:
        e = None
        if isinstance(s, LetStmt):
            e = s.value
        elif isinstance(s, AssignStmt) and s.field_name is None:
            e = s.value
        elif isinstance(s, ExprStmt):
            e = s.value
        if isinstance(e, Call) and e.base is None and self.ir.helper(e.name):
            return e
        return None

    def _expand(self, call: Call, result_var: Optional[str], loc: Loc,
                stack: tuple[str, ...]) -> Body:
        h = self.ir.helper(call.name)
        if call.name in stack:
            # recursive call at depth one: replaced by a no-op binding
            if result_var is None:
                return []
            sid = self.fresh()
            sloc = replace(loc, stmt=sid)
            return [LetStmt(sid, sloc, result_var,
                            IntLit(self.fresh(), sloc, 0))]
        self.instance += 1
        prefix = f"__{h.name}{self.instance}_"
        rename = {p.name: prefix + p.name for p in h.params}
        for v in _bound_names(h.body):
            rename.setdefault(v, prefix + v)
        out: Body = []
        for p, arg in zip(h.params, call.args):
            sid = self.fresh()
            sloc = replace(arg.loc, stmt=sid)
            out.append(LetStmt(sid, sloc, rename[p.name],
                               clone_expr(arg, self.fresh, {}, {})))
        body = list(h.body)
        ret: Optional[ReturnStmt] = None
        if body and isinstance(body[-1], ReturnStmt):
            ret = body.pop()
        cloned = [clone_stmt(x, self.fresh, rename, {}) for x in body]
        out.extend(self.inline_body(cloned, stack + (h.name,)))
        if result_var is not None:
            sid = self.fresh()
            sloc = replace(loc, stmt=sid)
            if ret is not None:
                value = clone_expr(ret.value, self.fresh, rename, {})
            else:
                value = IntLit(self.fresh(), sloc, 0)
            out.append(LetStmt(sid, sloc, result_var, value))
        return out


def _bound_names(body: Body) -> list[str]:
    out: list[str] = []
    for s in body:
        if isinstance(s, LetStmt):
            out.append(s.var)
        elif isinstance(s, AssignStmt):
            out.append(s.target)
        elif isinstance(s, ForStmt):
            out.append(s.var)
            out.extend(_bound_names(s.body))
        elif isinstance(s, IfStmt):
            out.extend(_bound_names(s.then_body))
            out.extend(_bound_names(s.else_body))
    return out


def inline_action(ir: AppIR, action: ActionDecl) -> Body:
    """Return the action body with every helper call expanded in place."""
    return _Inliner(ir).inline_body(action.body, ())


def iter_exprs(body: Body) -> Iterator[Expr]:
    for s in body:
        if isinstance(s, (LetStmt, GlobalStmt, ExprStmt, ReturnStmt)):
            yield from _walk_expr(s.value)
        elif isinstance(s, AssignStmt):
            yield from _walk_expr(s.value)
        elif isinstance(s, ForStmt):
            yield from _walk_expr(s.source)
            yield from iter_exprs(s.body)
        elif isinstance(s, IfStmt):
            yield from _walk_expr(s.cond)
            yield from iter_exprs(s.then_body)
            yield from iter_exprs(s.else_body)
        elif isinstance(s, RenderStmt):
            for a in s.args:
                yield from _walk_expr(a)
        elif isinstance(s, LinkStmt):
            for _, v in s.args:
                yield from _walk_expr(v)


def _walk_expr(e: Expr) -> Iterator[Expr]:
    yield e
    if isinstance(e, FieldAccess):
        yield from _walk_expr(e.base)
    elif isinstance(e, Call):
        if e.base is not None:
            yield from _walk_expr(e.base)
        for a in e.args:
            yield from _walk_expr(a)
        for _, v in e.kwargs:
            yield from _walk_expr(v)
    elif isinstance(e, BinOp):
        yield from _walk_expr(e.left)
        yield from _walk_expr(e.right)
    elif isinstance(e, UnOp):
        yield from _walk_expr(e.operand)


# ---------------------------------------------------------------------------
# Pass A: which let-bound chains must materialize at their let
# ---------------------------------------------------------------------------

_CHAIN = "chain"
_OTHER = "other"


class _Planner:
    """Marks the let statements whose stored chain is consumed by value."""

    def __init__(self, ir: AppIR):
        self.ir = ir
        self.forced: set[int] = set()

    def run(self, body: Body) -> set[int]:
        self._body(body, {})
        return self.forced

    def _body(self, body: Body, env: dict) -> None:
        for s in body:
            self._stmt(s, env)

    def _stmt(self, s: Stmt, env: dict) -> None:
        if isinstance(s, LetStmt) or (isinstance(s, AssignStmt)
                                      and s.field_name is None):
            av = self._eval(s.value, env, consume=False)
            var = s.var if isinstance(s, LetStmt) else s.target
            if av[0] == _CHAIN:
                env[var] = av if av[1] is not None else (_CHAIN, s.sid)
            else:
                env[var] = (_OTHER, None)
        elif isinstance(s, AssignStmt):
            self._eval(s.value, env, consume=True)
        elif isinstance(s, GlobalStmt):
            self._eval(s.value, env, consume=True)
        elif isinstance(s, ForStmt):
            self._eval(s.source, env, consume=True)
            inner = dict(env)
            inner[s.var] = (_OTHER, None)
            self._body(s.body, inner)
            for k in env:
                if inner.get(k) != env[k]:
                    env[k] = (_OTHER, None)
        elif isinstance(s, IfStmt):
            self._eval(s.cond, env, consume=True)
            left, right = dict(env), dict(env)
            self._body(s.then_body, left)
            self._body(s.else_body, right)
            merged: dict = {}
            for k in set(left) & set(right):
                a, b = left[k], right[k]
                merged[k] = a if a == b else (_OTHER, None)
            env.clear()
            env.update(merged)
        elif isinstance(s, RenderStmt):
            for a in s.args:
                self._eval(a, env, consume=True)
        elif isinstance(s, LinkStmt):
            for _, v in s.args:
                self._eval(v, env, consume=True)
        elif isinstance(s, (ExprStmt, ReturnStmt)):
            self._eval(s.value, env, consume=False)

    def _consume(self, av: tuple) -> None:
        if av[0] == _CHAIN and av[1] is not None:
            self.forced.add(av[1])

    def _eval(self, e: Expr, env: dict, consume: bool) -> tuple:
        if isinstance(e, Name):
            if self.ir.model(e.name) is not None:
                return (_OTHER, None)
            av = env.get(e.name, (_OTHER, None))
            if consume:
                self._consume(av)
            return av
        if isinstance(e, FieldAccess):
            bav = self._eval(e.base, env, consume=False)
            if bav[0] == _CHAIN and e.name not in _TERMINALS:
                self._consume(bav)  # column or association access forces it
            return (_OTHER, None)
        if isinstance(e, Call):
            if e.base is None:
                for a in e.args:
                    self._eval(a, env, consume=True)
                return (_OTHER, None)
            bav = self._eval(e.base, env, consume=False)
            self._scan_chain_args(e, env)
            if e.name in _CHAIN_EXT and (bav[0] == _CHAIN
                                         or self._model_rooted(e.base)):
                return (_CHAIN, None)  # a new chain, not an alias of the base
            return (_OTHER, None)
        if isinstance(e, BinOp):
            self._eval(e.left, env, consume=True)
            self._eval(e.right, env, consume=True)
            return (_OTHER, None)
        if isinstance(e, UnOp):
            self._eval(e.operand, env, consume=True)
            return (_OTHER, None)
        return (_OTHER, None)

    def _model_rooted(self, e: Expr) -> bool:
        while isinstance(e, (Call, FieldAccess)):
            e = e.base
            if e is None:
                return False
        return isinstance(e, Name) and self.ir.model(e.name) is not None

    def _scan_chain_args(self, call: Call, env: dict) -> None:
        if call.name == "where":
            for p in call.args:
                if isinstance(p, BinOp) and p.op in _PRED_OPS:
                    self._eval(p.right, env, consume=True)
        elif call.name in ("limit", "offset", "find"):
            for a in call.args:
                self._eval(a, env, consume=True)
        elif call.name == "create":
            for _, v in call.kwargs:
                self._eval(v, env, consume=True)
        # includes/select/order/group name columns, they carry no values


# ---------------------------------------------------------------------------
# Pass B: node construction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Parts:
    """A query chain under construction, before projection is fixed."""

    root: str
    preds: tuple[Predicate, ...] = ()
    eager: tuple[str, ...] = ()
    select: tuple[str, ...] = ()
    order: Optional[str] = None
    limit: Optional[ValueExpr] = None
    offset: Optional[ValueExpr] = None
    group: Optional[str] = None
    prefix: Optional[int] = None
    uses: tuple[Use, ...] = ()  # reads that evaluating the chain performs


@dataclass
class _Binding:
    kind: str  # rows | row | chain | scalar | opaque
    model: Optional[str] = None
    def_node: int = -1
    def_is_query: bool = False
    base_node: int = -1
    parts: Optional[_Parts] = None
    descriptor: Optional[QueryDescriptor] = None
    single: bool = False
    written: dict[str, int] = field(default_factory=dict)


@dataclass
class _RVal:
    kind: str  # value | rows | row | chainexpr | alias | model | create
    expr: Expr
    source: Optional[object] = None
    vexpr: Optional[ValueExpr] = None
    model: Optional[str] = None
    single: bool = False
    parts: Optional[_Parts] = None
    binding: Optional[_Binding] = None
    alias_name: Optional[str] = None
    pending: Optional[tuple[str, str, str]] = None  # (symbol, assoc, target)
    qnode: int = -1
    descriptor: Optional[QueryDescriptor] = None


def _finalize(ir: AppIR, parts: _Parts,
              aggregate: Optional[str]) -> QueryDescriptor:
    model = ir.model(parts.root)
    for p in parts.preds:
        if "." in p.column:
            assoc = p.column.split(".", 1)[0]
            if assoc not in parts.eager and aggregate != AGG_FIND:
                raise BuildError(
                    f"predicate on association '{assoc}' requires "
                    f"includes({assoc}) in the same chain")
    if aggregate in (AGG_COUNT, AGG_ANY):
        projection: tuple[tuple[str, str], ...] = ()
    elif parts.select:
        projection = tuple((parts.root, c) for c in parts.select)
    else:
        cols = [(parts.root, c) for c in model.column_names()]
        for a in parts.eager:
            assoc = model.assoc_map()[a]
            target = ir.model(assoc.target)
            for c in target.column_names():
                pair = (assoc.target, c)
                if pair not in cols:
                    cols.append(pair)
        projection = tuple(cols)
    return QueryDescriptor(
        root_model=parts.root, predicates=parts.preds,
        eager_loads=parts.eager, order_by=parts.order, limit=parts.limit,
        offset=parts.offset, group_by=parts.group, aggregate=aggregate,
        projection=projection, chain_prefix_of=parts.prefix)


def _param_used(body: Body, name: str) -> bool:
    return any(isinstance(e, ParamRef) and e.name == name
               for e in iter_exprs(body))


class _Builder:
    def __init__(self, ir: AppIR, action: ActionDecl, body: Body,
                 forced: set[int]):
        self.ir = ir
        self.action = action
        self.body = body
        self.forced = forced
        self.nodes: dict[int, AfgNode] = {}
        self.edges: list[AfgEdge] = []
        self.frontier: list[int] = []
        self.env: dict[str, _Binding] = {}
        self.loop_stack: list[int] = []
        self.ids = itertools.count(0)
        self.cur_sid = -1
        self.site_nodes: dict[int, int] = {}
        self.let_sites: dict[int, int] = {}
        self.loop_pairs: dict[int, int] = {}

    # -- plumbing ----------------------------------------------------------

    def new_node(self, kind: NodeKind, loc: Loc, payload=None,
                 defs: tuple[str, ...] = (),
                 uses: tuple[Use, ...] = ()) -> AfgNode:
        nid = next(self.ids)
        node = AfgNode(nid, kind, loc, payload, defs, tuple(uses),
                       tuple(self.loop_stack))
        self.nodes[nid] = node
        for f in self.frontier:
            self.edges.append(AfgEdge(f, nid, EdgeKind.CONTROL))
        self.frontier = [nid]
        return node

    def stmt_loc(self, loc: Loc) -> Loc:
        return Loc(loc.line, loc.col, self.cur_sid)

    def fail(self, msg: str) -> None:
        raise BuildError(f"{self.action.key}: {msg}")

    # -- entry point ---------------------------------------------------------

    def build(self) -> Afg:
        entry = self.new_node(NodeKind.ENTRY, self.stmt_loc(self.action.loc))
        for p in self.action.params:
            if _param_used(self.body, p.name):
                self.new_node(NodeKind.PARAM_READ,
                              self.stmt_loc(self.action.loc),
                              ParamPayload(p.name, p.type),
                              defs=(f"param:{p.name}",))
        self.walk_body(self.body)
        exit_node = self.new_node(NodeKind.EXIT,
                                  self.stmt_loc(self.action.loc))
        afg = Afg(self.action.key, self.action.method, self.nodes,
                  self.edges, entry.id, exit_node.id)
        afg.site_nodes = self.site_nodes
        afg.let_sites = self.let_sites
        afg.loop_pairs = self.loop_pairs
        _add_data_edges(afg)
        _mark_loop_carried(afg)
        return afg

    # -- statements ------------------------------------------------------------

    def walk_body(self, body: Body) -> None:
        for s in body:
            self.walk_stmt(s)

    def walk_stmt(self, s: Stmt) -> None:
        self.cur_sid = s.sid
        if isinstance(s, LetStmt):
            self.bind_stmt(s, s.var)
        elif isinstance(s, AssignStmt):
            if s.field_name is None:
                self.bind_stmt(s, s.target)
            else:
                self.field_write(s)
        elif isinstance(s, GlobalStmt):
            uses: list[Use] = []
            self.resolve_value(s.value, UseRole.GLOBAL_WRITE, uses)
            self.new_node(NodeKind.GLOBAL_ASSIGN, self.stmt_loc(s.loc),
                          PlainAssignPayload(s.name),
                          defs=(f"global:{s.name}",), uses=tuple(uses))
        elif isinstance(s, ForStmt):
            self.for_stmt(s)
        elif isinstance(s, IfStmt):
            self.if_stmt(s)
        elif isinstance(s, RenderStmt):
            uses = []
            for a in s.args:
                self.resolve_value(a, UseRole.RENDER_ARG, uses)
            self.new_node(NodeKind.RENDER, self.stmt_loc(s.loc),
                          RenderPayload(len(s.args)), uses=tuple(uses))
        elif isinstance(s, LinkStmt):
            uses = []
            args = []
            for k, v in s.args:
                rv = self.resolve_value(v, UseRole.LINK_ARG, uses)
                args.append((k, rv.vexpr if rv.vexpr is not None
                             else Leaf(ConstSource(0))))
            self.new_node(NodeKind.LINK, self.stmt_loc(s.loc),
                          LinkPayload(s.controller, s.action, tuple(args)),
                          uses=tuple(uses))
        elif isinstance(s, FormStmt):
            self.new_node(NodeKind.FORM, self.stmt_loc(s.loc),
                          FormPayload(s.controller, s.action,
                                      tuple(s.fields)))
        elif isinstance(s, ExprStmt):
            self.expr_stmt(s)
        else:
            self.fail("return is only allowed as a helper's final statement")

    def bind_stmt(self, s, var: str) -> None:
        loc = self.stmt_loc(s.loc)
        uses: list[Use] = []
        rv = self.resolve_raw(s.value, UseRole.VALUE, uses)
        if rv.kind == "chainexpr":
            if s.sid in self.forced:
                node = self.materialize(rv.parts, None, loc, var=var,
                                        site_eid=s.value.eid)
                self.let_sites[s.sid] = node.id
                self.env[var] = _Binding(
                    "rows", rv.parts.root, node.id, True, node.id, rv.parts,
                    node.payload.descriptor)
            else:
                desc = _finalize(self.ir, rv.parts, None)
                node = self.new_node(NodeKind.ASSIGN, loc,
                                     StoredChainPayload(var, desc),
                                     defs=(var,), uses=rv.parts.uses)
                self.env[var] = _Binding("chain", rv.parts.root, node.id,
                                         False, node.id, rv.parts, desc)
            return
        if rv.kind == "alias":
            b = rv.binding
            node = self.new_node(
                NodeKind.ASSIGN, loc, PlainAssignPayload(var), defs=(var,),
                uses=(Use(UseRole.VALUE, symbol=rv.alias_name,
                          model=b.model),))
            self.env[var] = _Binding(b.kind, b.model, node.id, False,
                                     b.base_node, b.parts, b.descriptor,
                                     b.single, dict(b.written))
            return
        if rv.qnode >= 0 and rv.kind in ("rows", "row", "create"):
            node = self.nodes[rv.qnode]
            payload = node.payload
            if isinstance(payload, (QueryPayload, CreatePayload)) \
                    and payload.var is None:
                node.payload = replace(payload, var=var)
                node.defs = (var,) + node.defs
                if isinstance(payload, QueryPayload):
                    self.let_sites[s.sid] = node.id
                    self.env[var] = _Binding(
                        "row" if rv.single else "rows", rv.model, node.id,
                        True, node.id, rv.parts, payload.descriptor,
                        rv.single)
                else:
                    self.env[var] = _Binding("row", rv.model, node.id,
                                             False, single=True)
                return
        rv = self.consume_rv(rv, UseRole.VALUE, uses)
        node = self.new_node(NodeKind.ASSIGN, loc, PlainAssignPayload(var),
                             defs=(var,), uses=tuple(uses))
        if rv.kind in ("rows", "row"):
            self.env[var] = _Binding(rv.kind, rv.model, node.id, False,
                                     descriptor=rv.descriptor,
                                     single=rv.single)
        else:
            self.env[var] = _Binding("scalar", None, node.id, False)

    def field_write(self, s: AssignStmt) -> None:
        loc = self.stmt_loc(s.loc)
        b = self.env.get(s.target)
        if b is None:
            raise UnresolvedReferenceError(s.target,
                                           (s.loc.line, s.loc.col))
        if b.kind not in ("row", "rows") or b.model is None:
            self.fail(f"cannot assign field '{s.field_name}' of "
                      f"'{s.target}'")
        model = self.ir.model(b.model)
        if s.field_name not in model.field_map():
            raise UnknownColumnError(b.model, s.field_name,
                                     (s.loc.line, s.loc.col))
        uses: list[Use] = []
        rv = self.resolve_value(s.value, UseRole.WRITE_RHS, uses)
        vexpr = rv.vexpr if rv.vexpr is not None else Leaf(ConstSource(0))
        node = self.new_node(
            NodeKind.ASSIGN, loc,
            FieldWritePayload(s.target, b.model, s.field_name, vexpr),
            defs=(f"{s.target}.{s.field_name}",), uses=tuple(uses))
        b.written[s.field_name] = node.id

    def for_stmt(self, s: ForStmt) -> None:
        loc = self.stmt_loc(s.loc)
        uses: list[Use] = []
        src = self.resolve_value(s.source, UseRole.LOOP_SOURCE, uses)
        head = self.new_node(NodeKind.LOOP_HEAD, loc,
                             LoopPayload(s.var, src.model), defs=(s.var,),
                             uses=tuple(uses))
        before = dict(self.env)
        saved = self.env.get(s.var)
        self.env[s.var] = _Binding("row", src.model, head.id, False,
                                   single=True)
        self.loop_stack.append(head.id)
        self.walk_body(s.body)
        self.loop_stack.pop()
        end = self.new_node(NodeKind.LOOP_END, loc)
        self.edges.append(AfgEdge(head.id, end.id, EdgeKind.CONTROL))
        self.edges.append(AfgEdge(end.id, head.id, EdgeKind.CONTROL,
                                  back=True))
        self.loop_pairs[head.id] = end.id
        self._merge_after(before)
        if saved is not None:
            self.env[s.var] = saved
        else:
            self.env.pop(s.var, None)

    def if_stmt(self, s: IfStmt) -> None:
        loc = self.stmt_loc(s.loc)
        uses: list[Use] = []
        self.resolve_value(s.cond, UseRole.CONDITION, uses)
        br = self.new_node(NodeKind.BRANCH, loc, BranchPayload(),
                           uses=tuple(uses))
        base_env = dict(self.env)
        self.frontier = [br.id]
        self.walk_body(s.then_body)
        then_tail = self.frontier
        then_env = self.env
        self.env = dict(base_env)
        self.frontier = [br.id]
        self.walk_body(s.else_body)
        else_tail = self.frontier
        else_env = self.env
        merged: dict[str, _Binding] = {}
        for k in set(then_env) & set(else_env):
            a, b = then_env[k], else_env[k]
            merged[k] = a if _same_binding(a, b) else _Binding("opaque")
        self.env = merged
        self.frontier = list(dict.fromkeys(then_tail + else_tail))

    def _merge_after(self, before: dict[str, _Binding]) -> None:
        merged: dict[str, _Binding] = {}
        for k, old in before.items():
            new = self.env.get(k)
            if new is None:
                continue
            merged[k] = new if _same_binding(old, new) else _Binding("opaque")
        self.env = merged

    def expr_stmt(self, s: ExprStmt) -> None:
        loc = self.stmt_loc(s.loc)
        e = s.value
        if isinstance(e, FieldAccess) and e.name == "save" \
                and isinstance(e.base, Name):
            b = self.env.get(e.base.name)
            if b is None:
                raise UnresolvedReferenceError(e.base.name,
                                               (s.loc.line, s.loc.col))
            if b.kind not in ("row", "rows") or b.model is None:
                self.fail(f"'{e.base.name}.save' needs a record variable")
            uses = [Use(UseRole.SAVE, symbol=e.base.name, model=b.model)]
            for f in sorted(b.written):
                uses.append(Use(UseRole.SAVE, symbol=f"{e.base.name}.{f}",
                                model=b.model, wcol=f))
            node = self.new_node(NodeKind.ASSIGN, loc,
                                 SavePayload(e.base.name, b.model),
                                 uses=tuple(uses))
            self.site_nodes[e.eid] = node.id
            return
        uses = []
        rv = self.resolve_raw(e, UseRole.VALUE, uses)
        if rv.kind in ("create", "chainexpr", "alias", "model"):
            return  # create already made its node; bare chains are no-ops
        if uses:
            self.new_node(NodeKind.ASSIGN, loc, PlainAssignPayload("_"),
                          uses=tuple(uses))

    # -- expression resolution ---------------------------------------------------

    def resolve_value(self, e: Expr, role: UseRole,
                      acc: list[Use]) -> _RVal:
        return self.consume_rv(self.resolve_raw(e, role, acc), role, acc)

    def resolve_vexpr(self, e: Expr, role: UseRole,
                      acc: list[Use]) -> ValueExpr:
        rv = self.resolve_value(e, role, acc)
        if rv.vexpr is None:
            self.fail("expected a value expression")
        return rv.vexpr

    def resolve_raw(self, e: Expr, role: UseRole, acc: list[Use]) -> _RVal:
        if isinstance(e, (IntLit, FloatLit, StrLit, BoolLit)):
            src = ConstSource(e.value)
            acc.append(Use(role, leaf=src))
            return _RVal("value", e, source=src, vexpr=Leaf(src))
        if isinstance(e, ParamRef):
            src = ParamSource(e.name)
            acc.append(Use(role, symbol=f"param:{e.name}"))
            return _RVal("value", e, source=src, vexpr=Leaf(src))
        if isinstance(e, Name):
            if self.ir.model(e.name) is not None:
                return _RVal("model", e, model=e.name)
            b = self.env.get(e.name)
            if b is None:
                src = GlobalSource(e.name)
                acc.append(Use(role, symbol=f"global:{e.name}"))
                return _RVal("value", e, source=src, vexpr=Leaf(src))
            return _RVal("alias", e, binding=b, model=b.model,
                         single=b.single, alias_name=e.name,
                         descriptor=b.descriptor)
        if isinstance(e, UnOp):
            inner = self.resolve_value(e.operand, role, acc)
            if inner.vexpr is None:
                self.fail(f"'{e.op}' needs a plain value")
            if e.op == "-":
                vexpr: ValueExpr = BinExpr("*", Leaf(ConstSource(-1)),
                                           inner.vexpr)
            else:
                vexpr = BinExpr("==", inner.vexpr, Leaf(ConstSource(False)))
            return _RVal("value", e, vexpr=vexpr)
        if isinstance(e, BinOp):
            left = self.resolve_value(e.left, role, acc)
            right = self.resolve_value(e.right, role, acc)
            if left.vexpr is None or right.vexpr is None:
                self.fail(f"'{e.op}' needs plain values")
            return _RVal("value", e,
                         vexpr=BinExpr(e.op, left.vexpr, right.vexpr))
        if isinstance(e, Call) and e.base is None:
            # validated earlier: bare calls are utilities, helpers are gone
            for a in e.args:
                self.resolve_value(a, role, acc)
            src = UtilitySource(e.name)
            acc.append(Use(role, leaf=src))
            return _RVal("value", e, source=src, vexpr=Leaf(src))
        head, ops = _steps(e)
        rv = self.resolve_raw(head, role, acc)
        for op in ops:
            rv = self.apply_op(rv, op, role, acc)
        return rv

    def consume_rv(self, rv: _RVal, role: UseRole, acc: list[Use]) -> _RVal:
        """Turn an unconsumed alias/chain/traversal into a concrete read."""
        if rv.kind == "model":
            self.fail(f"model {rv.model} used as a value")
        if rv.kind == "create":
            node = self.nodes[rv.qnode]
            src = VarSource(rv.qnode, None)
            acc.append(Use(role, symbol=node.result_symbol, model=rv.model))
            node.defs = node.defs + (node.result_symbol,)
            return _RVal("row", rv.expr, source=src, vexpr=Leaf(src),
                         model=rv.model, single=True, qnode=rv.qnode)
        if rv.kind == "chainexpr":
            node = self.materialize(rv.parts, None, self._here(rv.expr),
                                    site_eid=rv.expr.eid)
            desc = node.payload.descriptor
            col = self._implied(desc, role)
            src = QueryResultSource(node.id, col)
            acc.append(Use(role, symbol=node.result_symbol, column=col,
                           model=rv.parts.root))
            return _RVal("rows", rv.expr, source=src, vexpr=Leaf(src),
                         model=rv.parts.root, qnode=node.id, parts=rv.parts,
                         descriptor=desc)
        if rv.kind == "alias":
            b = rv.binding
            if b.kind == "chain":
                self.fail(f"stored chain '{rv.alias_name}' used as a value")
            col = self._implied(b.descriptor, role)
            if b.def_is_query:
                src: object = QueryResultSource(b.def_node, col)
            else:
                src = VarSource(b.def_node, col)
            acc.append(Use(role, symbol=rv.alias_name, column=col,
                           model=b.model))
            kind = b.kind if b.kind in ("rows", "row") else "value"
            return _RVal(kind, rv.expr, source=src, vexpr=Leaf(src),
                         model=b.model, single=b.single,
                         descriptor=b.descriptor)
        if rv.pending is not None:
            sym, assoc, target = rv.pending
            acc.append(Use(role, symbol=sym, assoc=assoc, model=target))
            rv.pending = None
            src = self._symbol_source(sym)
            rv.source = src
            rv.vexpr = Leaf(src)
            return rv
        return rv

    def _symbol_source(self, sym: str) -> object:
        if sym.startswith("%q"):
            return QueryResultSource(int(sym[2:]), None)
        b = self.env.get(sym)
        if b is not None and b.def_is_query:
            return QueryResultSource(b.def_node, None)
        return VarSource(b.def_node if b is not None else -1, None)

    def _implied(self, desc: Optional[QueryDescriptor],
                 role: UseRole) -> Optional[str]:
        if role in (UseRole.LOOP_SOURCE, UseRole.CHAIN_BASE):
            return None
        if desc is not None and len(desc.projection) == 1:
            return desc.projection[0][1]
        return None

    def _here(self, e: Expr) -> Loc:
        return Loc(e.loc.line, e.loc.col, self.cur_sid)

    # -- chain folding ------------------------------------------------------------

    def apply_op(self, cur: _RVal, op: tuple, role: UseRole,
                 acc: list[Use]) -> _RVal:
        if op[0] == "attr":
            return self._apply_attr(cur, op[1], op[2], role, acc)
        return self._apply_call(cur, op[1], op[2], op[3], op[4], role, acc)

    def _apply_attr(self, cur: _RVal, name: str, expr: Expr, role: UseRole,
                    acc: list[Use]) -> _RVal:
        if name in _TERMINALS and cur.kind in ("model", "chainexpr") \
                or name in _TERMINALS and cur.kind == "alias" \
                and cur.binding.kind in ("chain", "rows"):
            agg = AGG_COUNT if name == "count" else AGG_ANY
            parts = self._as_parts(cur, expr)
            node = self.materialize(parts, agg, self._here(expr),
                                    site_eid=expr.eid)
            src = QueryResultSource(node.id, None)
            acc.append(Use(role, symbol=node.result_symbol,
                           model=parts.root))
            return _RVal("value", expr, source=src, vexpr=Leaf(src))
        if cur.kind == "chainexpr":
            # reading a column or association forces the anonymous chain
            cur = self.consume_rv(cur, UseRole.VALUE, acc)
        if cur.kind == "create":
            cur = self.consume_rv(cur, UseRole.VALUE, acc)
            acc.pop()  # the read happens on the column, not the whole row
        if cur.kind == "alias":
            b = cur.binding
            if b.kind == "chain":
                self.fail(f"stored chain '{cur.alias_name}' has no "
                          f"attribute '{name}'")
            if b.kind not in ("rows", "row") or b.model is None:
                self.fail(f"'{cur.alias_name}' has no attribute '{name}'")
            return self._attr_on_rows(cur, cur.alias_name, b.model,
                                      b.written, name, expr, role, acc)
        if cur.kind in ("rows", "row"):
            if cur.pending is not None:
                # column read through a traversal: record the navigation,
                # then read the column against the base symbol
                base_sym, _assoc, target = cur.pending
                cur = self.consume_rv(cur, UseRole.VALUE, acc)
                return self._attr_on_rows(cur, base_sym, target, {}, name,
                                          expr, role, acc)
            symbol = None
            if cur.qnode >= 0:
                symbol = self.nodes[cur.qnode].result_symbol
            elif isinstance(cur.source, QueryResultSource):
                symbol = self.nodes[cur.source.node].result_symbol
            if symbol is None:
                self.fail(f"cannot read '{name}' here")
            return self._attr_on_rows(cur, symbol, cur.model, {}, name,
                                      expr, role, acc)
        self.fail(f"value has no attribute '{name}'")

    def _attr_on_rows(self, cur: _RVal, symbol: str, model_name: str,
                      written: dict[str, int], name: str, expr: Expr,
                      role: UseRole, acc: list[Use]) -> _RVal:
        model = self.ir.model(model_name)
        if name in model.field_map():
            if name in written:
                src: object = VarSource(written[name], name)
                acc.append(Use(role, symbol=f"{symbol}.{name}", column=name,
                               model=model_name))
            else:
                b = self.env.get(symbol)
                if b is not None and b.def_is_query:
                    src = QueryResultSource(b.def_node, name)
                elif b is not None:
                    src = VarSource(b.def_node, name)
                elif symbol.startswith("%q"):
                    src = QueryResultSource(int(symbol[2:]), name)
                else:
                    src = VarSource(-1, name)
                acc.append(Use(role, symbol=symbol, column=name,
                               model=model_name))
            return _RVal("value", expr, source=src, vexpr=Leaf(src))
        if name in model.assoc_map():
            assoc = model.assoc_map()[name]
            single = assoc.single and cur.single
            return _RVal("row" if single else "rows", expr,
                         model=assoc.target, single=single,
                         pending=(symbol, name, assoc.target))
        raise UnknownColumnError(model_name, name,
                                 (expr.loc.line, expr.loc.col))

    def _as_parts(self, cur: _RVal, expr: Expr) -> _Parts:
        """The chain an aggregate or extension applies to."""
        if cur.kind == "chainexpr":
            return cur.parts
        if cur.kind == "model":
            return _Parts(root=cur.model)
        if cur.kind == "alias":
            b = cur.binding
            if b.kind == "chain":
                return replace(
                    b.parts, prefix=b.base_node,
                    uses=b.parts.uses + (Use(UseRole.CHAIN_BASE,
                                             symbol=cur.alias_name,
                                             model=b.model),))
            if b.kind == "rows" and b.parts is not None:
                return replace(
                    b.parts, prefix=b.def_node,
                    uses=b.parts.uses + (Use(UseRole.CHAIN_BASE,
                                             symbol=cur.alias_name,
                                             model=b.model),))
        self.fail("count/any and chain extensions need a model or a chain")

    def _apply_call(self, cur: _RVal, name: str, args, kwargs, expr: Expr,
                    role: UseRole, acc: list[Use]) -> _RVal:
        if name == "find":
            if cur.kind != "model":
                self.fail("find applies directly to a model")
            puses: list[Use] = []
            rv = self.resolve_value(args[0], UseRole.QUERY_PARAM, puses)
            if rv.source is None:
                self.fail("find takes an atomic value")
            parts = _Parts(root=cur.model,
                           preds=(Predicate("id", "==", rv.source),),
                           uses=tuple(puses))
            node = self.materialize(parts, AGG_FIND, self._here(expr),
                                    site_eid=expr.eid)
            return _RVal("row", expr, model=cur.model, single=True,
                         qnode=node.id, parts=parts,
                         descriptor=node.payload.descriptor,
                         source=QueryResultSource(node.id, None))
        if name == "create":
            if cur.kind != "model":
                self.fail("create applies directly to a model")
            model = self.ir.model(cur.model)
            writes = []
            cuses: list[Use] = []
            for k, v in kwargs:
                if k not in model.field_map():
                    raise UnknownColumnError(cur.model, k,
                                             (expr.loc.line, expr.loc.col))
                sub: list[Use] = []
                rv = self.resolve_value(v, UseRole.WRITE_RHS, sub)
                cuses.extend(replace(u, wcol=k) for u in sub)
                writes.append((k, rv.vexpr if rv.vexpr is not None
                               else Leaf(ConstSource(0))))
            node = self.new_node(NodeKind.ASSIGN, self._here(expr),
                                 CreatePayload(None, cur.model,
                                               tuple(writes)),
                                 uses=tuple(cuses))
            self.site_nodes[expr.eid] = node.id
            return _RVal("create", expr, model=cur.model, single=True,
                         qnode=node.id)
        if name in _TERMINALS:
            self.fail(f"{name} takes no arguments")
        if name not in _CHAIN_EXT:
            self.fail(f"unknown chain method '{name}'")
        if cur.kind == "model":
            parts = _Parts(root=cur.model)
        elif cur.kind == "chainexpr":
            parts = cur.parts
        elif cur.kind == "alias":
            parts = self._as_parts(cur, expr)
        else:
            self.fail(f"'{name}' applies to a model or a chain")
        return _RVal("chainexpr", expr, model=parts.root,
                     parts=self._extend(parts, name, args, expr))

    def _extend(self, parts: _Parts, name: str, args, expr: Expr) -> _Parts:
        model = self.ir.model(parts.root)
        loc = (expr.loc.line, expr.loc.col)
        if name == "where":
            preds = list(parts.preds)
            uses = list(parts.uses)
            for a in args:
                if not isinstance(a, BinOp) or a.op not in _PRED_OPS:
                    self.fail("where takes comparisons")
                col = self._pred_column(model, a.left, loc)
                rv = self.resolve_value(a.right, UseRole.QUERY_PARAM, uses)
                if rv.source is None:
                    self.fail("predicate values must be atomic")
                preds.append(Predicate(col, _PRED_OPS[a.op], rv.source))
            return replace(parts, preds=tuple(preds), uses=tuple(uses))
        if name == "includes":
            eager = list(parts.eager)
            for a in args:
                if not isinstance(a, Name) \
                        or a.name not in model.assoc_map():
                    self.fail("includes takes association names")
                if a.name not in eager:
                    eager.append(a.name)
            return replace(parts, eager=tuple(eager))
        if name == "select":
            cols = []
            for a in args:
                if not isinstance(a, Name) \
                        or a.name not in model.field_map():
                    self.fail("select takes column names")
                cols.append(a.name)
            return replace(parts, select=tuple(cols))
        if name in ("order", "group"):
            a = args[0]
            if not isinstance(a, Name) or a.name not in model.field_map():
                self.fail(f"{name} takes a column name")
            if name == "order":
                return replace(parts, order=a.name)
            return replace(parts, group=a.name)
        # limit / offset
        uses = list(parts.uses)
        ve = self.resolve_vexpr(args[0], UseRole.QUERY_PARAM, uses)
        if name == "limit":
            return replace(parts, limit=ve, uses=tuple(uses))
        return replace(parts, offset=ve, uses=tuple(uses))

    def _pred_column(self, model, lhs: Expr, loc) -> str:
        if isinstance(lhs, Name):
            if lhs.name not in model.field_map():
                raise UnknownColumnError(model.name, lhs.name, loc)
            return lhs.name
        if isinstance(lhs, FieldAccess) and isinstance(lhs.base, Name):
            assoc = model.assoc_map().get(lhs.base.name)
            if assoc is None:
                raise UnknownColumnError(model.name, lhs.base.name, loc)
            target = self.ir.model(assoc.target)
            if lhs.name not in target.field_map():
                raise UnknownColumnError(assoc.target, lhs.name, loc)
            return f"{lhs.base.name}.{lhs.name}"
        self.fail("predicate column must be 'col' or 'assoc.col'")

    def materialize(self, parts: _Parts, aggregate: Optional[str], loc: Loc,
                    var: Optional[str] = None,
                    site_eid: Optional[int] = None) -> AfgNode:
        desc = _finalize(self.ir, parts, aggregate)
        node = self.new_node(NodeKind.QUERY, loc, QueryPayload(desc, var),
                             uses=parts.uses)
        defs = (node.result_symbol,)
        if var is not None:
            defs = (var,) + defs
        node.defs = defs
        if site_eid is not None:
            self.site_nodes[site_eid] = node.id
        return node


def _steps(e: Expr):
    ops = []
    while True:
        if isinstance(e, Call) and e.base is not None:
            ops.append(("call", e.name, e.args, e.kwargs, e))
            e = e.base
        elif isinstance(e, FieldAccess):
            ops.append(("attr", e.name, e))
            e = e.base
        else:
            break
    return e, list(reversed(ops))


def _same_binding(a: _Binding, b: _Binding) -> bool:
    return (a.kind == b.kind and a.model == b.model
            and a.def_node == b.def_node and a.base_node == b.base_node)


# ---------------------------------------------------------------------------
# Reaching definitions, data edges, loop-carried flows
# ---------------------------------------------------------------------------

def _reach(afg: Afg, skip_back: Optional[tuple[int, int]] = None) \
        -> dict[int, set[tuple[str, int]]]:
    preds: dict[int, list[int]] = {n: [] for n in afg.nodes}
    for e in afg.edges:
        if e.kind != EdgeKind.CONTROL:
            continue
        if skip_back is not None and (e.src, e.dst) == skip_back and e.back:
            continue
        preds[e.dst].append(e.src)
    gen = {n.id: {(s, n.id) for s in n.defs} for n in afg.sorted_nodes()}
    reach_in: dict[int, set] = {n: set() for n in afg.nodes}
    out: dict[int, set] = {n: set() for n in afg.nodes}
    order = sorted(afg.nodes)
    changed = True
    while changed:
        changed = False
        for n in order:
            new_in = set()
            for p in preds[n]:
                new_in |= out[p]
            survivors = {(s, d) for (s, d) in new_in
                         if not _kills(afg.nodes[n].defs, s)}
            new_out = gen[n] | survivors
            if new_in != reach_in[n] or new_out != out[n]:
                reach_in[n] = new_in
                out[n] = new_out
                changed = True
    return reach_in


def _kills(defs: tuple[str, ...], sym: str) -> bool:
    for d in defs:
        if sym == d:
            return True
        # rebinding a record variable invalidates its written fields
        if "." not in d and ":" not in d and sym.startswith(d + "."):
            return True
    return False


def _add_data_edges(afg: Afg) -> None:
    reach_in = _reach(afg)
    afg.reach_in = reach_in
    seen: set[tuple[int, int, str]] = set()
    for n in afg.sorted_nodes():
        for u in n.uses:
            if u.symbol is None:
                continue
            for (s, d) in reach_in[n.id]:
                if s == u.symbol:
                    seen.add((d, n.id, s))
    for (d, n, s) in sorted(seen):
        afg.edges.append(AfgEdge(d, n, EdgeKind.DATA, symbol=s))


def _mark_loop_carried(afg: Afg) -> None:
    full = afg.reach_in
    for head, end in afg.loop_pairs.items():
        partial = _reach(afg, skip_back=(end, head))
        body = {n.id for n in afg.sorted_nodes() if head in n.loops}
        body |= {head, end}
        for nid in sorted(body):
            node = afg.nodes[nid]
            extra = full[nid] - partial[nid]
            for u in node.uses:
                if u.symbol is None:
                    continue
                for (s, d) in extra:
                    if s == u.symbol and d in body:
                        afg.carried_edges.add((d, nid, s))
                        afg.carried_loops.add(head)


# ---------------------------------------------------------------------------
# Entry points
# ---------------------------------------------------------------------------

def build_afg(ir: AppIR, action: ActionDecl,
              body: Optional[Body] = None) -> Afg:
    if body is None:
        body = inline_action(ir, action)
    forced = _Planner(ir).run(body)
    return _Builder(ir, action, body, forced).build()


def build_all(ir: AppIR) -> tuple[dict[str, Afg], dict[str, Body]]:
    afgs: dict[str, Afg] = {}
    bodies: dict[str, Body] = {}
    for action in ir.actions():
        body = inline_action(ir, action)
        bodies[action.key] = body
        afgs[action.key] = build_afg(ir, action, body)
    return afgs, bodies


def build_action_graph(ir: AppIR, afgs: dict[str, Afg]) -> ActionGraph:
    edges: list[NextActionEdge] = []
    seen: set[tuple[str, str, int]] = set()
    for key in afgs:
        afg = afgs[key]
        for n in afg.sorted_nodes():
            if n.kind not in (NodeKind.LINK, NodeKind.FORM):
                continue
            target = f"{n.payload.controller}.{n.payload.action}"
            if target not in afgs:
                raise UnroutedTargetError(n.payload.controller,
                                          n.payload.action,
                                          (n.loc.line, n.loc.col))
            sig = (key, target, n.id)
            if sig not in seen:
                seen.add(sig)
                edges.append(NextActionEdge(key, target, n.id,
                                            afgs[target].method))
    return ActionGraph(afgs, edges)
