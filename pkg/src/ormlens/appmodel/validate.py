"""AppIR validation.

Returns diagnostics instead of raising so hand-built or deserialized IR can
be checked wholesale; parse_app raises on the first error-kind diagnostic.
Binding-sensitive checks (columns reached through variables) happen later,
at flow-graph construction, where the environment is known.
"""

from __future__ import annotations

from ..errors import (
    BAD_COLUMN, BAD_FOREIGN_KEY, BAD_HELPER, BAD_PARAM, BAD_ROUTE,
    DUPLICATE_DECLARATION, UNRESOLVED_REFERENCE, Diagnostic,
    DuplicateDeclarationError, OrmLensError, UnresolvedReferenceError,
)
from .ast_nodes import (
    AssignStmt, BinOp, Body, Call, Expr, ExprStmt, FieldAccess, ForStmt,
    FormStmt, GlobalStmt, IfStmt, LetStmt, LinkStmt, Name, ParamRef,
    RenderStmt, ReturnStmt, Stmt, UnOp,
)
from .ir import ActionDecl, AppIR, HelperDecl, ModelDecl

UTILITY_NAMES = frozenset({"now"})
CHAIN_METHODS = frozenset({
    "where", "includes", "select", "order", "limit", "offset", "group",
    "find", "create", "count", "any",
})
PRED_OPS = frozenset({"==", "!=", "<", ">", "in"})


def validate(ir: AppIR) -> list[Diagnostic]:
    out: list[Diagnostic] = []
    _check_models(ir, out)
    _check_controllers(ir, out)
    _check_helpers(ir, out)
    for a in ir.actions():
        _check_body(ir, a.body, a, None, out)
    for h in ir.helpers:
        _check_body(ir, h.body, None, h, out)
    return out


class ValidationError(OrmLensError):
    """Raised by parse_app for diagnostics without a dedicated exception."""

    def __init__(self, diag: Diagnostic):
        self.diagnostic = diag
        super().__init__(str(diag))


def raise_on_errors(diags: list[Diagnostic]) -> None:
    for d in diags:
        if d.kind == UNRESOLVED_REFERENCE:
            raise UnresolvedReferenceError(d.name, f"{d.line}:{d.col}" if d.line else None)
        if d.kind == DUPLICATE_DECLARATION:
            raise DuplicateDeclarationError(d.name)
    if diags:
        raise ValidationError(diags[0])


# ---------------------------------------------------------------------------

def _dup(out: list[Diagnostic], name: str, what: str, line: int = 0) -> None:
    out.append(Diagnostic(DUPLICATE_DECLARATION, name,
                          f"duplicate {what} {name!r}", line))


def _check_models(ir: AppIR, out: list[Diagnostic]) -> None:
    seen: set[str] = set()
    for m in ir.models:
        if m.name in seen:
            _dup(out, m.name, "model", m.loc.line)
        seen.add(m.name)
        fseen: set[str] = set()
        for f in m.fields:
            if f.name in fseen:
                _dup(out, f.name, "field", m.loc.line)
            fseen.add(f.name)
        aseen: set[str] = set()
        for a in m.associations:
            if a.name in aseen or a.name in fseen:
                _dup(out, a.name, "association", m.loc.line)
            aseen.add(a.name)
            target = ir.model(a.target)
            if target is None:
                out.append(Diagnostic(UNRESOLVED_REFERENCE, a.target,
                                      f"association {a.name!r} targets undeclared model {a.target!r}",
                                      m.loc.line))
                continue
            holder = m if a.kind == "belongs_to" else target
            fk = holder.field_map().get(a.foreign_key)
            if fk is None:
                out.append(Diagnostic(BAD_FOREIGN_KEY, a.foreign_key,
                                      f"foreign key {a.foreign_key!r} missing on {holder.name}",
                                      m.loc.line))
            elif fk.kind != "int":
                out.append(Diagnostic(BAD_FOREIGN_KEY, a.foreign_key,
                                      f"foreign key {a.foreign_key!r} on {holder.name} must be int",
                                      m.loc.line))


def _check_controllers(ir: AppIR, out: list[Diagnostic]) -> None:
    cseen: set[str] = set()
    keys: set[tuple[str, str]] = set()
    for c in ir.controllers:
        if c.name in cseen:
            _dup(out, c.name, "controller", c.loc.line)
        cseen.add(c.name)
        for a in c.actions:
            if a.key in keys:
                _dup(out, f"{c.name}.{a.name}", "action", a.loc.line)
            keys.add(a.key)
            pseen: set[str] = set()
            for p in a.params:
                if p.name in pseen:
                    _dup(out, p.name, "param", a.loc.line)
                pseen.add(p.name)
    methods: dict[tuple[str, str], str] = {}
    for r in ir.routes:
        prev = methods.get((r.controller, r.action))
        if prev is not None and prev != r.method:
            out.append(Diagnostic(BAD_ROUTE, f"{r.controller}.{r.action}",
                                  "route maps one action to two HTTP methods"))
        methods[(r.controller, r.action)] = r.method
        if ir.action(r.controller, r.action) is None:
            out.append(Diagnostic(BAD_ROUTE, f"{r.controller}.{r.action}",
                                  "route names an undeclared action"))


def _check_helpers(ir: AppIR, out: list[Diagnostic]) -> None:
    seen: set[str] = set()
    for h in ir.helpers:
        if h.name in seen:
            _dup(out, h.name, "helper", h.loc.line)
        seen.add(h.name)
        pseen: set[str] = set()
        for p in h.params:
            if p.name in pseen:
                _dup(out, p.name, "param", h.loc.line)
            pseen.add(p.name)
        for i, s in enumerate(h.body):
            if isinstance(s, ReturnStmt) and i != len(h.body) - 1:
                out.append(Diagnostic(BAD_HELPER, h.name,
                                      "return must be the final helper statement",
                                      s.loc.line, s.loc.col))


# ---------------------------------------------------------------------------

def _check_body(ir: AppIR, body: Body, action: ActionDecl | None,
                helper: HelperDecl | None, out: list[Diagnostic],
                top_level: bool = True) -> None:
    for s in body:
        if isinstance(s, ReturnStmt):
            if helper is None:
                out.append(Diagnostic(BAD_HELPER, "return",
                                      "return outside helper", s.loc.line, s.loc.col))
            elif not top_level:
                out.append(Diagnostic(BAD_HELPER, helper.name,
                                      "return must be the final helper statement",
                                      s.loc.line, s.loc.col))
            _check_expr(ir, s.value, action, out)
        elif isinstance(s, (LetStmt, AssignStmt, GlobalStmt)):
            _check_value_position(ir, s.value, action, out)
        elif isinstance(s, ForStmt):
            _check_expr(ir, s.source, action, out)
            _check_body(ir, s.body, action, helper, out, top_level=False)
        elif isinstance(s, IfStmt):
            _check_expr(ir, s.cond, action, out)
            _check_body(ir, s.then_body, action, helper, out, top_level=False)
            _check_body(ir, s.else_body, action, helper, out, top_level=False)
        elif isinstance(s, RenderStmt):
            for a in s.args:
                _check_expr(ir, a, action, out)
        elif isinstance(s, (LinkStmt, FormStmt)):
            target = ir.action(s.controller, s.action)
            if target is None:
                out.append(Diagnostic(BAD_ROUTE, f"{s.controller}.{s.action}",
                                      f"link/form target {s.controller}.{s.action} not routable",
                                      s.loc.line, s.loc.col))
            if isinstance(s, LinkStmt):
                for _, v in s.args:
                    _check_expr(ir, v, action, out)
            else:
                if target is not None:
                    declared = {p.name for p in target.params}
                    for f in s.fields:
                        if f not in declared:
                            out.append(Diagnostic(BAD_PARAM, f,
                                                  f"form field {f!r} is not a param of {s.controller}.{s.action}",
                                                  s.loc.line, s.loc.col))
                if target is not None and target.method != "POST":
                    out.append(Diagnostic(BAD_ROUTE, f"{s.controller}.{s.action}",
                                          "form_to must target a POST action",
                                          s.loc.line, s.loc.col))
        elif isinstance(s, ExprStmt):
            _check_value_position(ir, s.value, action, out)


def _check_value_position(ir: AppIR, e: Expr, action, out: list[Diagnostic]) -> None:
    """let/assign RHS and bare statements: the one place helper calls may sit."""
    if isinstance(e, Call) and e.base is None and ir.helper(e.name) is not None:
        h = ir.helper(e.name)
        if len(e.args) != len(h.params) or e.kwargs:
            out.append(Diagnostic(BAD_HELPER, e.name,
                                  f"helper {e.name} takes {len(h.params)} argument(s)",
                                  e.loc.line, e.loc.col))
        for a in e.args:
            _check_expr(ir, a, action, out)
        return
    _check_expr(ir, e, action, out)


def _check_expr(ir: AppIR, e: Expr, action, out: list[Diagnostic]) -> None:
    if isinstance(e, ParamRef):
        if action is None:
            out.append(Diagnostic(BAD_PARAM, e.name,
                                  "param() is not allowed inside helpers; use the bare name",
                                  e.loc.line, e.loc.col))
        elif e.name not in {p.name for p in action.params}:
            out.append(Diagnostic(BAD_PARAM, e.name,
                                  f"param({e.name}) not declared by the action",
                                  e.loc.line, e.loc.col))
        return
    if isinstance(e, (FieldAccess, Call)):
        root, ops = flatten_chain(e)
        if isinstance(root, Name) and ir.model(root.name) is not None:
            _check_model_chain(ir, ir.model(root.name), root, ops, action, out)
            return
        if root is None:  # bare call at the head of the chain
            head = ops[0]
            if head[1] is not None and head[0] not in UTILITY_NAMES \
                    and ir.helper(head[0]) is None:
                out.append(Diagnostic(UNRESOLVED_REFERENCE, head[0],
                                      f"unknown function {head[0]!r}",
                                      e.loc.line, e.loc.col))
            elif head[1] is not None and ir.helper(head[0]) is not None:
                out.append(Diagnostic(BAD_HELPER, head[0],
                                      "helper calls must be statement-level or let-bound",
                                      e.loc.line, e.loc.col))
            for op in ops:
                if op[1]:
                    for a in op[1]:
                        _check_expr(ir, a, action, out)
            return
        # variable-rooted chains are resolved during flow-graph construction
        _check_expr(ir, root, action, out)
        for op in ops:
            if op[1]:
                for a in op[1]:
                    if not _is_pred_shape(a):
                        _check_expr(ir, a, action, out)
                    else:
                        _check_expr(ir, a.right, action, out)
        return
    if isinstance(e, BinOp):
        _check_expr(ir, e.left, action, out)
        _check_expr(ir, e.right, action, out)
        return
    if isinstance(e, UnOp):
        _check_expr(ir, e.operand, action, out)
        return
    # literals, bare names: nothing checkable here


def flatten_chain(e: Expr):
    """Decompose postfix chains into (root expr|None, [(name, args|None, kwargs)]).

    args is None for plain field accesses, a list for calls. A bare call
    f(x) yields root None with itself as the first op.
    """
    ops: list[tuple[str, list | None, list]] = []
    cur = e
    while True:
        if isinstance(cur, FieldAccess):
            ops.append((cur.name, None, []))
            cur = cur.base
        elif isinstance(cur, Call):
            ops.append((cur.name, cur.args, cur.kwargs))
            if cur.base is None:
                return None, list(reversed(ops))
            cur = cur.base
        else:
            return cur, list(reversed(ops))


def _is_pred_shape(e: Expr) -> bool:
    return isinstance(e, BinOp) and e.op in PRED_OPS


def _check_model_chain(ir: AppIR, model: ModelDecl, root: Name, ops, action, out) -> None:
    cols = set(model.column_names())
    assocs = model.assoc_map()
    for name, args, kwargs in ops:
        if name not in CHAIN_METHODS:
            out.append(Diagnostic(UNRESOLVED_REFERENCE, name,
                                  f"unknown query function {name!r} on {model.name}",
                                  root.loc.line, root.loc.col))
            continue
        if name == "where" and args is not None:
            for p in args:
                if not _is_pred_shape(p):
                    out.append(Diagnostic(BAD_COLUMN, model.name,
                                          "where() arguments must be comparisons",
                                          p.loc.line, p.loc.col))
                    continue
                _check_pred_column(ir, model, p.left, out)
                _check_expr(ir, p.right, action, out)
        elif name == "includes" and args is not None:
            for a in args:
                if not (isinstance(a, Name) and a.name in assocs):
                    label = a.name if isinstance(a, Name) else "?"
                    out.append(Diagnostic(UNRESOLVED_REFERENCE, label,
                                          f"includes({label}) is not an association of {model.name}",
                                          a.loc.line, a.loc.col))
        elif name in ("select", "order", "group") and args is not None:
            for a in args:
                if isinstance(a, Name):
                    if a.name not in cols:
                        out.append(Diagnostic(BAD_COLUMN, a.name,
                                              f"{model.name} has no column {a.name!r}",
                                              a.loc.line, a.loc.col))
                elif isinstance(a, FieldAccess) and isinstance(a.base, Name):
                    _check_pred_column(ir, model, a, out)
                else:
                    out.append(Diagnostic(BAD_COLUMN, model.name,
                                          f"{name}() takes column names",
                                          a.loc.line, a.loc.col))
        elif name in ("limit", "offset", "find") and args is not None:
            if len(args) != 1:
                out.append(Diagnostic(BAD_COLUMN, model.name,
                                      f"{name}() takes exactly one argument",
                                      root.loc.line, root.loc.col))
            for a in args:
                _check_expr(ir, a, action, out)
        elif name == "create":
            for k, v in kwargs:
                if k not in cols:
                    out.append(Diagnostic(BAD_COLUMN, k,
                                          f"{model.name} has no column {k!r}",
                                          v.loc.line, v.loc.col))
                _check_expr(ir, v, action, out)


def _check_pred_column(ir: AppIR, model: ModelDecl, lhs: Expr, out) -> None:
    if isinstance(lhs, Name):
        if lhs.name not in set(model.column_names()):
            out.append(Diagnostic(BAD_COLUMN, lhs.name,
                                  f"{model.name} has no column {lhs.name!r}",
                                  lhs.loc.line, lhs.loc.col))
        return
    if isinstance(lhs, FieldAccess) and isinstance(lhs.base, Name):
        a = model.assoc_map().get(lhs.base.name)
        if a is None:
            out.append(Diagnostic(UNRESOLVED_REFERENCE, lhs.base.name,
                                  f"{lhs.base.name!r} is not an association of {model.name}",
                                  lhs.loc.line, lhs.loc.col))
            return
        target = ir.model(a.target)
        if target is not None and lhs.name not in set(target.column_names()):
            out.append(Diagnostic(BAD_COLUMN, lhs.name,
                                  f"{target.name} has no column {lhs.name!r}",
                                  lhs.loc.line, lhs.loc.col))
        return
    out.append(Diagnostic(BAD_COLUMN, model.name,
                          "predicate left side must be a column",
                          lhs.loc.line, lhs.loc.col))
