"""Application IR: models, associations, controllers/actions, helpers, routes.

The IR is what every later stage consumes. It is deliberately plain:
dataclasses with stable ordering, no behavior beyond lookups.

Invariants (enforced by construction in the parser, re-checked by validate):
  - every model has an implicit integer primary key `id`, first in field order;
  - belongs_to foreign keys are integer fields of the declaring model,
    has_one/has_many foreign keys integer fields of the target model
    (auto-added when not declared);
  - (controller, action) pairs are unique and each declares exactly one
    HTTP method, so the derived route table cannot conflict.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .ast_nodes import Body, Loc

PARAM_TYPES = ("int", "float", "bool", "datetime", "string", "text")


@dataclass(frozen=True)
class FieldDecl:
    name: str
    kind: str  # int | float | bool | datetime | text | string
    max_len: Optional[int] = None  # for string(n)
    auto: bool = False  # implicit pk / auto-added fk


@dataclass(frozen=True)
class Association:
    kind: str  # belongs_to | has_one | has_many
    name: str
    owner: str
    target: str
    foreign_key: str

    @property
    def single(self) -> bool:
        return self.kind in ("belongs_to", "has_one")


@dataclass
class ModelDecl:
    name: str
    fields: list[FieldDecl]
    associations: list[Association]
    loc: Loc

    def field_map(self) -> dict[str, FieldDecl]:
        return {f.name: f for f in self.fields}

    def assoc_map(self) -> dict[str, Association]:
        return {a.name: a for a in self.associations}

    def column_names(self) -> list[str]:
        return [f.name for f in self.fields]


@dataclass(frozen=True)
class ParamDecl:
    name: str
    type: str = "int"


@dataclass
class ActionDecl:
    controller: str
    name: str
    method: str  # GET | POST
    params: list[ParamDecl]
    body: Body
    loc: Loc

    @property
    def key(self) -> str:
        return f"{self.controller}.{self.name}"


@dataclass
class ControllerDecl:
    name: str
    actions: list[ActionDecl]
    loc: Loc


@dataclass
class HelperDecl:
    name: str
    params: list[ParamDecl]
    body: Body
    loc: Loc


@dataclass(frozen=True)
class Route:
    controller: str
    action: str
    method: str


@dataclass
class AppIR:
    models: list[ModelDecl]
    controllers: list[ControllerDecl]
    helpers: list[HelperDecl]
    routes: list[Route]
    max_node_id: int = 0  # parser high-water mark for sid/eid; inliner continues past it

    def model(self, name: str) -> Optional[ModelDecl]:
        for m in self.models:
            if m.name == name:
                return m
        return None

    def helper(self, name: str) -> Optional[HelperDecl]:
        for h in self.helpers:
            if h.name == name:
                return h
        return None

    def actions(self) -> list[ActionDecl]:
        return [a for c in self.controllers for a in c.actions]

    def action(self, controller: str, name: str) -> Optional[ActionDecl]:
        for c in self.controllers:
            if c.name == controller:
                for a in c.actions:
                    if a.name == name:
                        return a
        return None


_ZEROES = {"int": 0, "float": 0.0, "bool": False, "datetime": 0,
           "string": "", "text": ""}


def zero_value(kind: str):
    """The default a column or parameter of the given type starts from.

    Datetimes are integer epoch seconds throughout, so their zero is 0.
    """
    return _ZEROES.get(kind, 0)


def table_name(model: str) -> str:
    """Lowercased plural table name: Status->statuses, Story->stories, Post->posts."""
    base = model.lower()
    if base.endswith(("s", "x", "z", "ch", "sh")):
        return base + "es"
    if base.endswith("y") and len(base) > 1 and base[-2] not in "aeiou":
        return base[:-1] + "ies"
    return base + "s"
