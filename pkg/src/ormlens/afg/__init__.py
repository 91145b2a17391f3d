from .build import (
    BuildError, build_action_graph, build_afg, build_all, inline_action,
)
from .dataflow import (
    SourceSummary, assoc_traversals, condition_sources, node_input_sources,
    query_sinks, trace_sources, used_columns, value_sources,
)
from .dot import afg_to_dot, graph_to_dot
from .model import (
    AGG_ANY, AGG_COUNT, AGG_FIND, ActionGraph, Afg, AfgEdge, AfgNode,
    BinExpr, BranchPayload, ConstSource, CreatePayload, EdgeKind,
    FieldWritePayload, FormPayload, GlobalSource, Leaf, LinkPayload,
    LoopPayload, NextActionEdge, NodeKind, ParamPayload, ParamSource,
    PlainAssignPayload, Predicate, QueryDescriptor, QueryPayload,
    QueryResultSource, RenderPayload, SavePayload, SinkKind, SourceKind,
    StoredChainPayload, Use, UseRole, UtilitySource, ValueExpr, ValueSource,
    VarSource, expr_leaves,
)

__all__ = [
    "AGG_ANY", "AGG_COUNT", "AGG_FIND", "ActionGraph", "Afg", "AfgEdge",
    "AfgNode", "BinExpr", "BranchPayload", "BuildError", "ConstSource",
    "CreatePayload", "EdgeKind", "FieldWritePayload", "FormPayload",
    "GlobalSource", "Leaf", "LinkPayload", "LoopPayload", "NextActionEdge",
    "NodeKind", "ParamPayload", "ParamSource", "PlainAssignPayload",
    "Predicate", "QueryDescriptor", "QueryPayload", "QueryResultSource",
    "RenderPayload", "SavePayload", "SinkKind", "SourceKind",
    "SourceSummary", "StoredChainPayload", "Use", "UseRole",
    "UtilitySource", "ValueExpr", "ValueSource", "VarSource",
    "afg_to_dot", "assoc_traversals", "build_action_graph", "build_afg",
    "build_all", "condition_sources", "expr_leaves", "graph_to_dot",
    "inline_action", "node_input_sources", "query_sinks", "trace_sources",
    "used_columns", "value_sources",
]
