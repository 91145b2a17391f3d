"""JSON interchange for AppIR, version-stamped with irVersion 1.

The document mirrors the IR field for field, including node ids and
locations, so deserialize(serialize(ir)) is structurally equal to ir.
"""

from __future__ import annotations

import json
from typing import Any

from ..errors import UnsupportedFormatError
from .ast_nodes import (
    AssignStmt, BinOp, BoolLit, Call, Expr, ExprStmt, FieldAccess, FloatLit,
    ForStmt, FormStmt, GlobalStmt, IfStmt, IntLit, LetStmt, LinkStmt, Loc,
    Name, ParamRef, RenderStmt, ReturnStmt, Stmt, StrLit, UnOp,
)
from .ir import (
    ActionDecl, AppIR, Association, ControllerDecl, FieldDecl, HelperDecl,
    ModelDecl, ParamDecl, Route,
)

IR_VERSION = 1


def _loc(loc: Loc) -> list:
    return [loc.line, loc.col, loc.stmt]


def _unloc(raw: list) -> Loc:
    return Loc(raw[0], raw[1], raw[2])


def _expr(e: Expr) -> dict[str, Any]:
    d: dict[str, Any] = {"eid": e.eid, "loc": _loc(e.loc)}
    if isinstance(e, (IntLit, FloatLit, StrLit, BoolLit)):
        d["k"] = {"IntLit": "int", "FloatLit": "float",
                  "StrLit": "str", "BoolLit": "bool"}[type(e).__name__]
        d["value"] = e.value
    elif isinstance(e, Name):
        d["k"] = "name"
        d["name"] = e.name
    elif isinstance(e, ParamRef):
        d["k"] = "param"
        d["name"] = e.name
    elif isinstance(e, FieldAccess):
        d["k"] = "field"
        d["base"] = _expr(e.base)
        d["name"] = e.name
    elif isinstance(e, Call):
        d["k"] = "call"
        d["base"] = _expr(e.base) if e.base is not None else None
        d["name"] = e.name
        d["args"] = [_expr(a) for a in e.args]
        d["kwargs"] = [[k, _expr(v)] for k, v in e.kwargs]
    elif isinstance(e, BinOp):
        d["k"] = "binop"
        d["op"] = e.op
        d["left"] = _expr(e.left)
        d["right"] = _expr(e.right)
    elif isinstance(e, UnOp):
        d["k"] = "unop"
        d["op"] = e.op
        d["operand"] = _expr(e.operand)
    else:
        raise TypeError(type(e).__name__)
    return d


def _unexpr(d: dict[str, Any]) -> Expr:
    k = d["k"]
    eid, loc = d["eid"], _unloc(d["loc"])
    if k == "int":
        return IntLit(eid, loc, int(d["value"]))
    if k == "float":
        return FloatLit(eid, loc, float(d["value"]))
    if k == "str":
        return StrLit(eid, loc, d["value"])
    if k == "bool":
        return BoolLit(eid, loc, bool(d["value"]))
    if k == "name":
        return Name(eid, loc, d["name"])
    if k == "param":
        return ParamRef(eid, loc, d["name"])
    if k == "field":
        return FieldAccess(eid, loc, _unexpr(d["base"]), d["name"])
    if k == "call":
        base = _unexpr(d["base"]) if d["base"] is not None else None
        return Call(eid, loc, base, d["name"],
                    [_unexpr(a) for a in d["args"]],
                    [(kk, _unexpr(v)) for kk, v in d["kwargs"]])
    if k == "binop":
        return BinOp(eid, loc, d["op"], _unexpr(d["left"]), _unexpr(d["right"]))
    if k == "unop":
        return UnOp(eid, loc, d["op"], _unexpr(d["operand"]))
    raise UnsupportedFormatError(f"expr kind {k}")


def _stmt(s: Stmt) -> dict[str, Any]:
    d: dict[str, Any] = {"sid": s.sid, "loc": _loc(s.loc)}
    if isinstance(s, LetStmt):
        d.update(k="let", var=s.var, value=_expr(s.value))
    elif isinstance(s, AssignStmt):
        d.update(k="assign", target=s.target, field=s.field_name, value=_expr(s.value))
    elif isinstance(s, GlobalStmt):
        d.update(k="global", name=s.name, value=_expr(s.value))
    elif isinstance(s, ForStmt):
        d.update(k="for", var=s.var, source=_expr(s.source),
                 body=[_stmt(x) for x in s.body])
    elif isinstance(s, IfStmt):
        d.update(k="if", cond=_expr(s.cond),
                 then=[_stmt(x) for x in s.then_body],
                 els=[_stmt(x) for x in s.else_body])
    elif isinstance(s, RenderStmt):
        d.update(k="render", args=[_expr(a) for a in s.args])
    elif isinstance(s, LinkStmt):
        d.update(k="link", controller=s.controller, action=s.action,
                 args=[[kk, _expr(v)] for kk, v in s.args])
    elif isinstance(s, FormStmt):
        d.update(k="form", controller=s.controller, action=s.action,
                 fields=list(s.fields))
    elif isinstance(s, ReturnStmt):
        d.update(k="return", value=_expr(s.value))
    elif isinstance(s, ExprStmt):
        d.update(k="expr", value=_expr(s.value))
    else:
        raise TypeError(type(s).__name__)
    return d


def _unstmt(d: dict[str, Any]) -> Stmt:
    k = d["k"]
    sid, loc = d["sid"], _unloc(d["loc"])
    if k == "let":
        return LetStmt(sid, loc, d["var"], _unexpr(d["value"]))
    if k == "assign":
        return AssignStmt(sid, loc, d["target"], d["field"], _unexpr(d["value"]))
    if k == "global":
        return GlobalStmt(sid, loc, d["name"], _unexpr(d["value"]))
    if k == "for":
        return ForStmt(sid, loc, d["var"], _unexpr(d["source"]),
                       [_unstmt(x) for x in d["body"]])
    if k == "if":
        return IfStmt(sid, loc, _unexpr(d["cond"]),
                      [_unstmt(x) for x in d["then"]],
                      [_unstmt(x) for x in d["els"]])
    if k == "render":
        return RenderStmt(sid, loc, [_unexpr(a) for a in d["args"]])
    if k == "link":
        return LinkStmt(sid, loc, d["controller"], d["action"],
                        [(kk, _unexpr(v)) for kk, v in d["args"]])
    if k == "form":
        return FormStmt(sid, loc, d["controller"], d["action"], list(d["fields"]))
    if k == "return":
        return ReturnStmt(sid, loc, _unexpr(d["value"]))
    if k == "expr":
        return ExprStmt(sid, loc, _unexpr(d["value"]))
    raise UnsupportedFormatError(f"stmt kind {k}")


def ir_to_dict(ir: AppIR) -> dict[str, Any]:
    return {
        "irVersion": IR_VERSION,
        "models": [
            {
                "name": m.name,
                "loc": _loc(m.loc),
                "fields": [
                    {"name": f.name, "kind": f.kind, "maxLen": f.max_len, "auto": f.auto}
                    for f in m.fields
                ],
                "associations": [
                    {"kind": a.kind, "name": a.name, "owner": a.owner,
                     "target": a.target, "foreignKey": a.foreign_key}
                    for a in m.associations
                ],
            }
            for m in ir.models
        ],
        "controllers": [
            {
                "name": c.name,
                "loc": _loc(c.loc),
                "actions": [
                    {
                        "name": a.name,
                        "method": a.method,
                        "loc": _loc(a.loc),
                        "params": [{"name": p.name, "type": p.type} for p in a.params],
                        "body": [_stmt(s) for s in a.body],
                    }
                    for a in c.actions
                ],
            }
            for c in ir.controllers
        ],
        "helpers": [
            {
                "name": h.name,
                "loc": _loc(h.loc),
                "params": [{"name": p.name, "type": p.type} for p in h.params],
                "body": [_stmt(s) for s in h.body],
            }
            for h in ir.helpers
        ],
        "routes": [
            {"controller": r.controller, "action": r.action, "method": r.method}
            for r in ir.routes
        ],
        "maxNodeId": ir.max_node_id,
    }


def ir_from_dict(doc: dict[str, Any]) -> AppIR:
    if doc.get("irVersion") != IR_VERSION:
        raise UnsupportedFormatError(f"irVersion {doc.get('irVersion')!r}")
    models = [
        ModelDecl(
            m["name"],
            [FieldDecl(f["name"], f["kind"], f["maxLen"], f.get("auto", False))
             for f in m["fields"]],
            [Association(a["kind"], a["name"], a["owner"], a["target"], a["foreignKey"])
             for a in m["associations"]],
            _unloc(m["loc"]),
        )
        for m in doc["models"]
    ]
    controllers = [
        ControllerDecl(
            c["name"],
            [ActionDecl(c["name"], a["name"], a["method"],
                        [ParamDecl(p["name"], p["type"]) for p in a["params"]],
                        [_unstmt(s) for s in a["body"]],
                        _unloc(a["loc"]))
             for a in c["actions"]],
            _unloc(c["loc"]),
        )
        for c in doc["controllers"]
    ]
    helpers = [
        HelperDecl(h["name"],
                   [ParamDecl(p["name"], p["type"]) for p in h["params"]],
                   [_unstmt(s) for s in h["body"]],
                   _unloc(h["loc"]))
        for h in doc["helpers"]
    ]
    routes = [Route(r["controller"], r["action"], r["method"]) for r in doc["routes"]]
    return AppIR(models, controllers, helpers, routes, doc.get("maxNodeId", 0))


def serialize_ir(ir: AppIR) -> str:
    return json.dumps(ir_to_dict(ir), indent=2, sort_keys=False) + "\n"


def deserialize_ir(text: str) -> AppIR:
    return ir_from_dict(json.loads(text))
