"""Graphviz export of AFGs, one cluster per action."""

from __future__ import annotations

from .model import (
    ActionGraph, Afg, CreatePayload, EdgeKind, FieldWritePayload,
    LinkPayload, LoopPayload, NodeKind, ParamPayload, PlainAssignPayload,
    QueryPayload, SavePayload, StoredChainPayload,
)

_SHAPES = {
    NodeKind.QUERY: "box",
    NodeKind.BRANCH: "diamond",
    NodeKind.LOOP_HEAD: "hexagon",
    NodeKind.LOOP_END: "hexagon",
    NodeKind.RENDER: "house",
    NodeKind.LINK: "cds",
    NodeKind.FORM: "cds",
    NodeKind.ENTRY: "circle",
    NodeKind.EXIT: "doublecircle",
}


def _label(node) -> str:
    p = node.payload
    if isinstance(p, QueryPayload):
        d = p.descriptor
        agg = f" {d.aggregate}" if d.aggregate else ""
        var = f" -> {p.var}" if p.var else ""
        return f"Q{node.id}: {d.root_model}{agg}{var}"
    if isinstance(p, StoredChainPayload):
        return f"chain {p.var} = {p.descriptor.root_model}..."
    if isinstance(p, CreatePayload):
        return f"create {p.model}" + (f" -> {p.var}" if p.var else "")
    if isinstance(p, FieldWritePayload):
        return f"{p.obj}.{p.column} = ..."
    if isinstance(p, SavePayload):
        return f"{p.obj}.save"
    if isinstance(p, PlainAssignPayload):
        return f"{p.var} = ..."
    if isinstance(p, LoopPayload):
        return f"for {p.var}"
    if isinstance(p, LinkPayload):
        return f"link {p.controller}.{p.action}"
    if isinstance(p, ParamPayload):
        return f"param {p.name}"
    return node.kind.value


def afg_to_dot(afg: Afg, indent: str = "") -> list[str]:
    lines = []
    prefix = afg.action.replace(".", "_")
    for n in afg.sorted_nodes():
        shape = _SHAPES.get(n.kind, "ellipse")
        label = _label(n).replace('"', "'")
        lines.append(f'{indent}{prefix}_{n.id} '
                     f'[label="{label}", shape={shape}];')
    for e in afg.edges:
        attrs = []
        if e.kind == EdgeKind.DATA:
            attrs.append("style=dashed")
            if e.symbol:
                attrs.append(f'label="{e.symbol}"')
        if e.back:
            attrs.append("constraint=false")
        if (e.src, e.dst, e.symbol or "") in {
                (a, b, s) for (a, b, s) in afg.carried_edges}:
            attrs.append("color=red")
        joined = f' [{", ".join(attrs)}]' if attrs else ""
        lines.append(f"{indent}{prefix}_{e.src} -> "
                     f"{prefix}_{e.dst}{joined};")
    return lines


def graph_to_dot(graph: ActionGraph) -> str:
    out = ["digraph app {", "  rankdir=TB;", "  node [fontsize=10];"]
    for i, (key, afg) in enumerate(graph.afgs.items()):
        out.append(f"  subgraph cluster_{i} {{")
        out.append(f'    label="{key} [{afg.method}]";')
        out.extend(afg_to_dot(afg, indent="    "))
        out.append("  }")
    for e in graph.edges:
        src = e.src.replace(".", "_")
        dst = graph.afgs[e.dst]
        dst_name = e.dst.replace(".", "_")
        out.append(f"  {src}_{e.trigger_node} -> {dst_name}_{dst.entry} "
                   f'[style=bold, color=blue, label="{e.method}"];')
    out.append("}")
    return "\n".join(out) + "\n"
