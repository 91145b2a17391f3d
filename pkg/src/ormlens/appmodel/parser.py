"""Recursive-descent parser for RailLite.

Grammar reference lives in docs/grammar.ebnf. Statements are self-delimiting
(no semicolons); expression statements must start with an identifier, which
keeps `x = 5 - 3` unambiguous.
"""

from __future__ import annotations

from ..errors import (
    DuplicateDeclarationError,
    ParseError,
    UnresolvedReferenceError,
)
from .ast_nodes import (
    AssignStmt, BinOp, BoolLit, Call, Expr, ExprStmt, FieldAccess, FloatLit,
    ForStmt, FormStmt, GlobalStmt, IfStmt, IntLit, LetStmt, LinkStmt, Loc,
    Name, ParamRef, RenderStmt, ReturnStmt, Stmt, StrLit, UnOp,
)
from .ir import (
    ActionDecl, AppIR, Association, ControllerDecl, FieldDecl, HelperDecl,
    ModelDecl, ParamDecl, Route,
)
from .lexer import Token, tokenize
from .validate import validate, raise_on_errors

_FIELD_KINDS = ("int", "float", "bool", "datetime", "text", "string")
_ASSOC_KINDS = ("belongs_to", "has_one", "has_many")
_CMP_OPS = ("==", "!=", "<", ">")


class _Parser:
    def __init__(self, source: str):
        self.toks: list[Token] = tokenize(source)
        self.pos = 0
        self._next_id = 0

    # -- token plumbing ----------------------------------------------------

    def peek(self, ahead: int = 0) -> Token:
        return self.toks[min(self.pos + ahead, len(self.toks) - 1)]

    def advance(self) -> Token:
        t = self.toks[self.pos]
        if t.kind != "EOF":
            self.pos += 1
        return t

    def at(self, kind: str, text: str | None = None) -> bool:
        t = self.peek()
        return t.kind == kind and (text is None or t.text == text)

    def expect(self, kind: str, text: str | None = None) -> Token:
        t = self.peek()
        if not self.at(kind, text):
            raise ParseError(t.line, t.col, text or kind, t.text or "end of input")
        return self.advance()

    def expect_kw(self, word: str) -> Token:
        return self.expect("KW", word)

    def fresh(self) -> int:
        self._next_id += 1
        return self._next_id

    def loc(self, t: Token, sid: int = -1) -> Loc:
        return Loc(t.line, t.col, sid)

    # -- declarations -------------------------------------------------------

    def parse_app(self) -> AppIR:
        models: list[ModelDecl] = []
        controllers: list[ControllerDecl] = []
        helpers: list[HelperDecl] = []
        while not self.at("EOF"):
            t = self.peek()
            if self.at("KW", "model"):
                models.append(self.model_decl())
            elif self.at("KW", "controller"):
                controllers.append(self.controller_decl())
            elif self.at("KW", "def"):
                helpers.append(self.helper_decl())
            else:
                raise ParseError(t.line, t.col, "model, controller, or def", t.text)
        routes = [Route(a.controller, a.name, a.method)
                  for c in controllers for a in c.actions]
        ir = AppIR(models, controllers, helpers, routes, max_node_id=self._next_id)
        _finish_ir(ir)
        return ir

    def model_decl(self) -> ModelDecl:
        t = self.expect_kw("model")
        name = self.expect("IDENT").text
        self.expect("{")
        fields: list[FieldDecl] = []
        assocs: list[Association] = []
        while not self.at("}"):
            if self.at("KW", "field"):
                self.advance()
                ftok = self.expect("IDENT")
                self.expect(":")
                fields.append(self.field_type(ftok.text))
            elif self.peek().kind == "IDENT" and self.peek().text in _ASSOC_KINDS:
                kind = self.advance().text
                aname = self.expect("IDENT").text
                target = None
                fk = None
                if self.at(":"):
                    self.advance()
                    target = self.expect("IDENT").text
                if self.peek().kind == "IDENT" and self.peek().text == "by":
                    self.advance()
                    fk = self.expect("IDENT").text
                if target is None:
                    target = aname[0].upper() + aname[1:]
                if fk is None:
                    fk = (aname + "_id") if kind == "belongs_to" else (name.lower() + "_id")
                assocs.append(Association(kind, aname, name, target, fk))
            else:
                tk = self.peek()
                raise ParseError(tk.line, tk.col, "field or association", tk.text)
        self.expect("}")
        return ModelDecl(name, fields, assocs, self.loc(t))

    def field_type(self, fname: str) -> FieldDecl:
        t = self.peek()
        if t.kind == "IDENT" and t.text in _FIELD_KINDS:
            self.advance()
            if t.text == "string":
                self.expect("(")
                n = int(self.expect("INT").text)
                self.expect(")")
                return FieldDecl(fname, "string", n)
            return FieldDecl(fname, t.text)
        raise ParseError(t.line, t.col, "a field type", t.text)

    def controller_decl(self) -> ControllerDecl:
        t = self.expect_kw("controller")
        name = self.expect("IDENT").text
        self.expect("{")
        actions: list[ActionDecl] = []
        while not self.at("}"):
            actions.append(self.action_decl(name))
        self.expect("}")
        return ControllerDecl(name, actions, self.loc(t))

    def action_decl(self, controller: str) -> ActionDecl:
        t = self.expect_kw("action")
        name = self.expect("IDENT").text
        mtok = self.expect("IDENT")
        if mtok.text not in ("GET", "POST"):
            raise ParseError(mtok.line, mtok.col, "GET or POST", mtok.text)
        params = self.param_list() if self.at("(") else []
        body = self.block()
        return ActionDecl(controller, name, mtok.text, params, body, self.loc(t))

    def helper_decl(self) -> HelperDecl:
        t = self.expect_kw("def")
        name = self.expect("IDENT").text
        params = self.param_list()
        body = self.block()
        return HelperDecl(name, params, body, self.loc(t))

    def param_list(self) -> list[ParamDecl]:
        self.expect("(")
        out: list[ParamDecl] = []
        while not self.at(")"):
            pname = self.expect("IDENT").text
            ptype = "int"
            if self.at(":"):
                self.advance()
                ttok = self.expect("IDENT")
                ptype = ttok.text
                if ptype == "string" and self.at("("):
                    self.advance()
                    self.expect("INT")
                    self.expect(")")
            out.append(ParamDecl(pname, ptype))
            if self.at(","):
                self.advance()
        self.expect(")")
        return out

    # -- statements ---------------------------------------------------------

    def block(self) -> list[Stmt]:
        self.expect("{")
        body: list[Stmt] = []
        while not self.at("}"):
            body.append(self.statement())
        self.expect("}")
        return body

    def statement(self) -> Stmt:
        t = self.peek()
        if self.at("KW", "let"):
            self.advance()
            var = self.expect("IDENT").text
            self.expect("=")
            sid = self.fresh()
            return LetStmt(sid, self.loc(t, sid), var, self.expression())
        if self.at("KW", "global"):
            self.advance()
            gname = self.expect("IDENT").text
            self.expect("=")
            sid = self.fresh()
            return GlobalStmt(sid, self.loc(t, sid), gname, self.expression())
        if self.at("KW", "for"):
            self.advance()
            var = self.expect("IDENT").text
            self.expect_kw("in")
            source = self.expression()
            body = self.block()
            sid = self.fresh()
            return ForStmt(sid, self.loc(t, sid), var, source, body)
        if self.at("KW", "if"):
            self.advance()
            cond = self.expression()
            then_body = self.block()
            else_body: list[Stmt] = []
            if self.at("KW", "else"):
                self.advance()
                else_body = self.block()
            sid = self.fresh()
            return IfStmt(sid, self.loc(t, sid), cond, then_body, else_body)
        if self.at("KW", "render"):
            self.advance()
            self.expect("(")
            args: list[Expr] = []
            while not self.at(")"):
                args.append(self.expression())
                if self.at(","):
                    self.advance()
            self.expect(")")
            sid = self.fresh()
            return RenderStmt(sid, self.loc(t, sid), args)
        if self.at("KW", "link_to"):
            self.advance()
            ctrl = self.expect("IDENT").text
            self.expect(".")
            act = self.expect("IDENT").text
            self.expect("(")
            args: list[tuple[str, Expr]] = []
            while not self.at(")"):
                key = self.expect("IDENT").text
                self.expect(":")
                args.append((key, self.expression()))
                if self.at(","):
                    self.advance()
            self.expect(")")
            sid = self.fresh()
            return LinkStmt(sid, self.loc(t, sid), ctrl, act, args)
        if self.at("KW", "form_to"):
            self.advance()
            ctrl = self.expect("IDENT").text
            self.expect(".")
            act = self.expect("IDENT").text
            self.expect("(")
            fields: list[str] = []
            while not self.at(")"):
                fields.append(self.expect("IDENT").text)
                if self.at(","):
                    self.advance()
            self.expect(")")
            sid = self.fresh()
            return FormStmt(sid, self.loc(t, sid), ctrl, act, fields)
        if self.peek().kind == "IDENT" and self.peek().text == "return":
            self.advance()
            sid = self.fresh()
            return ReturnStmt(sid, self.loc(t, sid), self.expression())
        if t.kind == "IDENT":
            # assignment (x = e, x.f = e) or expression statement
            if self.peek(1).kind == "=":
                target = self.advance().text
                self.advance()
                sid = self.fresh()
                return AssignStmt(sid, self.loc(t, sid), target, None, self.expression())
            if (self.peek(1).kind == "." and self.peek(2).kind == "IDENT"
                    and self.peek(3).kind == "="):
                target = self.advance().text
                self.advance()
                fname = self.advance().text
                self.advance()
                sid = self.fresh()
                return AssignStmt(sid, self.loc(t, sid), target, fname, self.expression())
            sid = self.fresh()
            expr = self.expression()
            return ExprStmt(sid, self.loc(t, sid), expr)
        raise ParseError(t.line, t.col, "a statement", t.text or "end of input")

    # -- expressions ----------------------------------------------------------

    def expression(self) -> Expr:
        return self.or_expr()

    def or_expr(self) -> Expr:
        left = self.and_expr()
        while self.at("||"):
            t = self.advance()
            right = self.and_expr()
            left = BinOp(self.fresh(), self.loc(t), "||", left, right)
        return left

    def and_expr(self) -> Expr:
        left = self.cmp_expr()
        while self.at("&&"):
            t = self.advance()
            right = self.cmp_expr()
            left = BinOp(self.fresh(), self.loc(t), "&&", left, right)
        return left

    def cmp_expr(self) -> Expr:
        left = self.add_expr()
        t = self.peek()
        if t.kind in _CMP_OPS or (t.kind == "KW" and t.text == "in"):
            op = "in" if t.kind == "KW" else t.kind
            self.advance()
            right = self.add_expr()
            return BinOp(self.fresh(), self.loc(t), op, left, right)
        return left

    def add_expr(self) -> Expr:
        left = self.mul_expr()
        while self.peek().kind in ("+", "-"):
            t = self.advance()
            right = self.mul_expr()
            left = BinOp(self.fresh(), self.loc(t), t.kind, left, right)
        return left

    def mul_expr(self) -> Expr:
        left = self.unary()
        while self.peek().kind in ("*", "/"):
            t = self.advance()
            right = self.unary()
            left = BinOp(self.fresh(), self.loc(t), t.kind, left, right)
        return left

    def unary(self) -> Expr:
        t = self.peek()
        if t.kind == "!":
            self.advance()
            return UnOp(self.fresh(), self.loc(t), "!", self.unary())
        if t.kind == "-":
            self.advance()
            return UnOp(self.fresh(), self.loc(t), "-", self.unary())
        return self.postfix()

    def postfix(self) -> Expr:
        e = self.primary()
        while self.at("."):
            self.advance()
            ntok = self.expect("IDENT")
            if self.at("("):
                args, kwargs = self.call_args()
                e = Call(self.fresh(), self.loc(ntok), e, ntok.text, args, kwargs)
            else:
                e = FieldAccess(self.fresh(), self.loc(ntok), e, ntok.text)
        return e

    def call_args(self) -> tuple[list[Expr], list[tuple[str, Expr]]]:
        self.expect("(")
        args: list[Expr] = []
        kwargs: list[tuple[str, Expr]] = []
        while not self.at(")"):
            if (self.peek().kind == "IDENT" and self.peek(1).kind == ":"):
                key = self.advance().text
                self.advance()
                kwargs.append((key, self.expression()))
            else:
                args.append(self.expression())
            if self.at(","):
                self.advance()
        self.expect(")")
        return args, kwargs

    def primary(self) -> Expr:
        t = self.peek()
        if t.kind == "INT":
            self.advance()
            return IntLit(self.fresh(), self.loc(t), int(t.text))
        if t.kind == "FLOAT":
            self.advance()
            return FloatLit(self.fresh(), self.loc(t), float(t.text))
        if t.kind == "STRING":
            self.advance()
            return StrLit(self.fresh(), self.loc(t), t.text)
        if t.kind == "KW" and t.text == "param":
            self.advance()
            self.expect("(")
            name = self.expect("IDENT").text
            self.expect(")")
            return ParamRef(self.fresh(), self.loc(t), name)
        if t.kind == "IDENT":
            if t.text in ("true", "false"):
                self.advance()
                return BoolLit(self.fresh(), self.loc(t), t.text == "true")
            if self.peek(1).kind == "(":
                self.advance()
                args, kwargs = self.call_args()
                return Call(self.fresh(), self.loc(t), None, t.text, args, kwargs)
            self.advance()
            return Name(self.fresh(), self.loc(t), t.text)
        if t.kind == "(":
            self.advance()
            e = self.expression()
            self.expect(")")
            return e
        raise ParseError(t.line, t.col, "an expression", t.text or "end of input")


def _finish_ir(ir: AppIR) -> None:
    """Add implicit pk columns and missing foreign-key fields in place."""
    for m in ir.models:
        names = {f.name for f in m.fields}
        if "id" not in names:
            m.fields.insert(0, FieldDecl("id", "int", auto=True))
    by_name = {m.name: m for m in ir.models}
    for m in ir.models:
        for a in m.associations:
            holder = m if a.kind == "belongs_to" else by_name.get(a.target)
            if holder is None:
                continue  # validate reports the unresolved target
            if a.foreign_key not in {f.name for f in holder.fields}:
                holder.fields.append(FieldDecl(a.foreign_key, "int", auto=True))


_RAISABLE = {
    "unresolved_reference": UnresolvedReferenceError,
    "duplicate_declaration": DuplicateDeclarationError,
}


def parse_app(source: str) -> AppIR:
    """Parse RailLite source into a validated AppIR.

    Raises ParseError on syntax errors and the matching reference error on
    the first validation diagnostic; use validate() directly for the full
    diagnostic list on hand-built IR.
    """
    ir = _Parser(source).parse_app()
    raise_on_errors(validate(ir))
    return ir
