"""AST for RailLite action and helper bodies.

Every statement and expression carries a source location. Statement ids
(`sid`) and expression ids (`eid`) are assigned in file order by the parser
and stay stable across runs; the helper inliner hands out fresh ids past the
parser's high-water mark, in a deterministic order, while keeping the
original line/column so two inlined copies of one helper share a source
location ("same piece of code").

Invariants:
  - sid/eid are unique within one parsed application plus its inlined bodies.
  - Loc.line/Loc.col are 1-based; Loc.stmt is the owning statement's sid.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Union


@dataclass(frozen=True)
class Loc:
    line: int
    col: int
    stmt: int = -1

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"

    def same_template(self, other: "Loc") -> bool:
        """Location identity used for 'issued by the same piece of code'."""
        return (self.line, self.col) == (other.line, other.col)


# --------------------------------------------------------------------------
# Expressions
# --------------------------------------------------------------------------

@dataclass
class Expr:
    eid: int
    loc: Loc


@dataclass
class IntLit(Expr):
    value: int


@dataclass
class FloatLit(Expr):
    value: float


@dataclass
class StrLit(Expr):
    value: str


@dataclass
class BoolLit(Expr):
    value: bool


@dataclass
class Name(Expr):
    name: str


@dataclass
class ParamRef(Expr):
    name: str


@dataclass
class FieldAccess(Expr):
    base: Expr
    name: str


@dataclass
class Call(Expr):
    """`base.name(args)` or bare `name(args)` (helper or utility call).

    `kwargs` is used by create() and carries (name, expr) pairs in source
    order; positional `args` carry everything else, including the
    comparison expressions inside where().
    """

    base: Optional[Expr]
    name: str
    args: list[Expr] = field(default_factory=list)
    kwargs: list[tuple[str, Expr]] = field(default_factory=list)


@dataclass
class BinOp(Expr):
    op: str  # == != < > in + - * / && ||
    left: Expr
    right: Expr


@dataclass
class UnOp(Expr):
    op: str  # ! -
    operand: Expr


# --------------------------------------------------------------------------
# Statements
# --------------------------------------------------------------------------

@dataclass
class Stmt:
    sid: int
    loc: Loc


@dataclass
class LetStmt(Stmt):
    var: str
    value: Expr


@dataclass
class AssignStmt(Stmt):
    """`x = e` or `x.f = e` (field write when x binds a row)."""

    target: str
    field_name: Optional[str]
    value: Expr


@dataclass
class GlobalStmt(Stmt):
    name: str
    value: Expr


@dataclass
class ForStmt(Stmt):
    var: str
    source: Expr
    body: list[Stmt]


@dataclass
class IfStmt(Stmt):
    cond: Expr
    then_body: list[Stmt]
    else_body: list[Stmt]


@dataclass
class RenderStmt(Stmt):
    args: list[Expr]


@dataclass
class LinkStmt(Stmt):
    controller: str
    action: str
    args: list[tuple[str, Expr]]


@dataclass
class FormStmt(Stmt):
    controller: str
    action: str
    fields: list[str]


@dataclass
class ReturnStmt(Stmt):
    value: Expr


@dataclass
class ExprStmt(Stmt):
    value: Expr


Body = list[Stmt]
AnyLit = Union[IntLit, FloatLit, StrLit, BoolLit]


def clone_expr(e: Expr, fresh, rename: dict[str, str], param_sub: dict[str, Expr]) -> Expr:
    """Deep-copy `e` with fresh eids, renaming Names per `rename`.

    `param_sub` substitutes whole expressions for helper parameter names;
    substituted subtrees are themselves cloned so ids stay unique.
    """
    loc = e.loc
    if isinstance(e, Name):
        if e.name in param_sub:
            return clone_expr(param_sub[e.name], fresh, {}, {})
        return Name(fresh(), loc, rename.get(e.name, e.name))
    if isinstance(e, (IntLit, FloatLit, StrLit, BoolLit)):
        return type(e)(fresh(), loc, e.value)
    if isinstance(e, ParamRef):
        return ParamRef(fresh(), loc, e.name)
    if isinstance(e, FieldAccess):
        return FieldAccess(fresh(), loc, clone_expr(e.base, fresh, rename, param_sub), e.name)
    if isinstance(e, Call):
        base = clone_expr(e.base, fresh, rename, param_sub) if e.base is not None else None
        args = [clone_expr(a, fresh, rename, param_sub) for a in e.args]
        kwargs = [(k, clone_expr(v, fresh, rename, param_sub)) for k, v in e.kwargs]
        return Call(fresh(), loc, base, e.name, args, kwargs)
    if isinstance(e, BinOp):
        return BinOp(fresh(), loc, e.op,
                     clone_expr(e.left, fresh, rename, param_sub),
                     clone_expr(e.right, fresh, rename, param_sub))
    if isinstance(e, UnOp):
        return UnOp(fresh(), loc, e.op, clone_expr(e.operand, fresh, rename, param_sub))
    raise TypeError(f"unknown expr {type(e).__name__}")


def clone_stmt(s: Stmt, fresh, rename: dict[str, str], param_sub: dict[str, Expr]) -> Stmt:
    loc = s.loc
    sid = fresh()
    loc = replace(loc, stmt=sid)

    def ce(e: Expr) -> Expr:
        return clone_expr(e, fresh, rename, param_sub)

    def cb(body: Body) -> Body:
        return [clone_stmt(x, fresh, rename, param_sub) for x in body]

    if isinstance(s, LetStmt):
        return LetStmt(sid, loc, rename.get(s.var, s.var), ce(s.value))
    if isinstance(s, AssignStmt):
        return AssignStmt(sid, loc, rename.get(s.target, s.target), s.field_name, ce(s.value))
    if isinstance(s, GlobalStmt):
        return GlobalStmt(sid, loc, s.name, ce(s.value))
    if isinstance(s, ForStmt):
        return ForStmt(sid, loc, rename.get(s.var, s.var), ce(s.source), cb(s.body))
    if isinstance(s, IfStmt):
        return IfStmt(sid, loc, ce(s.cond), cb(s.then_body), cb(s.else_body))
    if isinstance(s, RenderStmt):
        return RenderStmt(sid, loc, [ce(a) for a in s.args])
    if isinstance(s, LinkStmt):
        return LinkStmt(sid, loc, s.controller, s.action, [(k, ce(v)) for k, v in s.args])
    if isinstance(s, FormStmt):
        return FormStmt(sid, loc, s.controller, s.action, list(s.fields))
    if isinstance(s, ReturnStmt):
        return ReturnStmt(sid, loc, ce(s.value))
    if isinstance(s, ExprStmt):
        return ExprStmt(sid, loc, ce(s.value))
    raise TypeError(f"unknown stmt {type(s).__name__}")
