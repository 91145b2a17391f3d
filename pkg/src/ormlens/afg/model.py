"""Action Flow Graph data model.

An AFG has one node per runtime event of interest inside a single action
(queries, assignments, branches, loop heads, renders, outgoing links and
forms) plus Entry/Exit bookends. Control edges give evaluation order; Data
edges connect definitions of symbols to their uses, computed by reaching
definitions over the control graph.

Symbols follow a small naming scheme: locals are bare names ("x"), action
parameters are "param:x", globals are "global:g", written object fields are
"x.f", and every Query node defines its own result symbol "%q<id>" (plus the
bound variable when the query materializes at a let).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Optional, Union

from ..appmodel.ast_nodes import Loc


class NodeKind(Enum):
    ENTRY = "entry"
    EXIT = "exit"
    PARAM_READ = "param_read"
    QUERY = "query"
    ASSIGN = "assign"
    GLOBAL_ASSIGN = "global_assign"
    BRANCH = "branch"
    LOOP_HEAD = "loop_head"
    LOOP_END = "loop_end"
    RENDER = "render"
    LINK = "link"
    FORM = "form"


class EdgeKind(Enum):
    CONTROL = "control"
    DATA = "data"


class SinkKind(Enum):
    """Where a query's result can end up."""

    QUERY_PARAM = "QueryParam"
    RENDERED_IN_VIEW = "RenderedInView"
    BRANCH_CONDITION = "BranchCondition"
    GLOBAL_VARIABLE = "GlobalVariable"


class SourceKind(Enum):
    """Where a written value can come from."""

    USER_INPUT = "UserInput"
    READ_QUERY = "ReadQuery"
    CONSTANT_VALUE = "ConstantValue"
    UTILITY_CALL = "UtilityCall"
    GLOBAL_VARIABLE = "GlobalVariable"


# ---------------------------------------------------------------------------
# Syntactic value sources (the leaves of bound expressions)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstSource:
    value: object


@dataclass(frozen=True)
class ParamSource:
    name: str


@dataclass(frozen=True)
class VarSource:
    """Value read from a local defined at `node` (optionally a column)."""

    node: int
    column: Optional[str] = None


@dataclass(frozen=True)
class QueryResultSource:
    """Value read from the result of the Query node `node`."""

    node: int
    column: Optional[str] = None


@dataclass(frozen=True)
class GlobalSource:
    name: str


@dataclass(frozen=True)
class UtilitySource:
    name: str


ValueSource = Union[ConstSource, ParamSource, VarSource, QueryResultSource,
                    GlobalSource, UtilitySource]


@dataclass(frozen=True)
class Leaf:
    source: ValueSource


@dataclass(frozen=True)
class BinExpr:
    op: str
    left: "ValueExpr"
    right: "ValueExpr"


ValueExpr = Union[Leaf, BinExpr]


def expr_leaves(e: ValueExpr) -> Iterator[ValueSource]:
    if isinstance(e, Leaf):
        yield e.source
    else:
        yield from expr_leaves(e.left)
        yield from expr_leaves(e.right)


# ---------------------------------------------------------------------------
# Query descriptors
# ---------------------------------------------------------------------------

AGG_COUNT = "COUNT"
AGG_ANY = "ANY"
AGG_FIND = "FIND_BY_PK"


@dataclass(frozen=True)
class Predicate:
    column: str  # "col" on the root model, or "assoc.col"
    op: str      # "==", "!=", "<", ">", "IN"
    source: ValueSource


@dataclass(frozen=True)
class QueryDescriptor:
    root_model: str
    predicates: tuple[Predicate, ...] = ()
    eager_loads: tuple[str, ...] = ()
    order_by: Optional[str] = None
    limit: Optional[ValueExpr] = None
    offset: Optional[ValueExpr] = None
    group_by: Optional[str] = None
    aggregate: Optional[str] = None  # AGG_COUNT | AGG_ANY | AGG_FIND | None
    projection: tuple[tuple[str, str], ...] = ()  # (model, column) pairs
    chain_prefix_of: Optional[int] = None  # node owning the chain this extends

    def all_sources(self) -> list[ValueSource]:
        out = [p.source for p in self.predicates]
        for ve in (self.limit, self.offset):
            if ve is not None:
                out.extend(expr_leaves(ve))
        return out

    def models(self) -> list[str]:
        seen = [self.root_model]
        for m, _ in self.projection:
            if m not in seen:
                seen.append(m)
        return seen


# ---------------------------------------------------------------------------
# Uses
# ---------------------------------------------------------------------------

class UseRole(Enum):
    VALUE = "value"              # feeds a local binding or arithmetic
    QUERY_PARAM = "query_param"  # bound into a query predicate/limit/offset
    CHAIN_BASE = "chain_base"    # a stored chain this query extends
    LOOP_SOURCE = "loop_source"  # collection a loop iterates
    RENDER_ARG = "render_arg"
    CONDITION = "condition"
    GLOBAL_WRITE = "global_write"
    LINK_ARG = "link_arg"
    WRITE_RHS = "write_rhs"      # value stored into a row column
    SAVE = "save"                # pending field writes flushed by save


@dataclass(frozen=True)
class Use:
    role: UseRole
    symbol: Optional[str] = None  # None for constant/utility leaves
    column: Optional[str] = None  # column read off the symbol's rows
    assoc: Optional[str] = None   # association traversed off the symbol
    model: Optional[str] = None   # model owning `column`/the accessed rows
    leaf: Optional[ValueSource] = None  # set when symbol is None
    wcol: Optional[str] = None    # column written (create kwargs / saves)


# ---------------------------------------------------------------------------
# Node payloads
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QueryPayload:
    descriptor: QueryDescriptor
    var: Optional[str] = None  # bound variable when materialized at a let


@dataclass(frozen=True)
class StoredChainPayload:
    var: str
    descriptor: QueryDescriptor


@dataclass(frozen=True)
class PlainAssignPayload:
    var: str


@dataclass(frozen=True)
class CreatePayload:
    var: str
    model: str
    writes: tuple[tuple[str, ValueExpr], ...]


@dataclass(frozen=True)
class FieldWritePayload:
    obj: str
    model: str
    column: str
    value: ValueExpr


@dataclass(frozen=True)
class SavePayload:
    obj: str
    model: str


@dataclass(frozen=True)
class LoopPayload:
    var: str
    model: Optional[str]


@dataclass(frozen=True)
class RenderPayload:
    arg_count: int


@dataclass(frozen=True)
class BranchPayload:
    pass


@dataclass(frozen=True)
class LinkPayload:
    controller: str
    action: str
    args: tuple[tuple[str, ValueExpr], ...]


@dataclass(frozen=True)
class FormPayload:
    controller: str
    action: str
    fields: tuple[str, ...]


@dataclass(frozen=True)
class ParamPayload:
    name: str
    type: str


# ---------------------------------------------------------------------------
# Graph
# ---------------------------------------------------------------------------

@dataclass
class AfgNode:
    id: int
    kind: NodeKind
    loc: Loc
    payload: object = None
    defs: tuple[str, ...] = ()
    uses: tuple[Use, ...] = ()
    loops: tuple[int, ...] = ()  # enclosing LoopHead ids, outermost first

    @property
    def result_symbol(self) -> str:
        return f"%q{self.id}"


@dataclass(frozen=True)
class AfgEdge:
    src: int
    dst: int
    kind: EdgeKind
    symbol: Optional[str] = None  # data edges carry the symbol they flow
    back: bool = False            # loop back edge (control only)


@dataclass
class Afg:
    action: str  # "Controller.action"
    method: str
    nodes: dict[int, AfgNode]
    edges: list[AfgEdge]
    entry: int
    exit: int
    site_nodes: dict[int, int] = field(default_factory=dict)  # expr eid -> Query node
    let_sites: dict[int, int] = field(default_factory=dict)   # let sid -> Query node
    loop_pairs: dict[int, int] = field(default_factory=dict)  # LoopHead -> LoopEnd
    carried_loops: set[int] = field(default_factory=set)
    carried_edges: set[tuple[int, int, str]] = field(default_factory=set)
    reach_in: dict[int, set[tuple[str, int]]] = field(default_factory=dict)

    def node(self, nid: int) -> AfgNode:
        return self.nodes[nid]

    def sorted_nodes(self) -> list[AfgNode]:
        return [self.nodes[k] for k in sorted(self.nodes)]

    def query_nodes(self) -> list[AfgNode]:
        return [n for n in self.sorted_nodes() if n.kind == NodeKind.QUERY]

    def write_nodes(self) -> list[AfgNode]:
        """Nodes that write the store: creates and saves."""
        out = []
        for n in self.sorted_nodes():
            if isinstance(n.payload, (CreatePayload, SavePayload)):
                out.append(n)
        return out

    def data_in(self, nid: int) -> list[AfgEdge]:
        return [e for e in self.edges
                if e.kind == EdgeKind.DATA and e.dst == nid]

    def data_out(self, nid: int) -> list[AfgEdge]:
        return [e for e in self.edges
                if e.kind == EdgeKind.DATA and e.src == nid]

    def control_succ(self, nid: int) -> list[int]:
        return [e.dst for e in self.edges
                if e.kind == EdgeKind.CONTROL and e.src == nid]

    def control_pred(self, nid: int) -> list[int]:
        return [e.src for e in self.edges
                if e.kind == EdgeKind.CONTROL and e.dst == nid]


@dataclass(frozen=True)
class NextActionEdge:
    src: str  # "Controller.action"
    dst: str
    trigger_node: int  # Link or Form node id in the source AFG
    method: str        # method of the destination action


@dataclass
class ActionGraph:
    afgs: dict[str, Afg]
    edges: list[NextActionEdge]

    def out_edges(self, action: str) -> list[NextActionEdge]:
        return [e for e in self.edges if e.src == action]
