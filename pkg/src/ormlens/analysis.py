"""One-call bundle: parse, validate, inline, build all graphs."""

from __future__ import annotations

from dataclasses import dataclass

from .afg.build import build_action_graph, build_all
from .afg.model import ActionGraph, Afg
from .appmodel.ast_nodes import Body
from .appmodel.parser import parse_app
from .appmodel.ir import AppIR


@dataclass
class Analysis:
    ir: AppIR
    afgs: dict[str, Afg]
    graph: ActionGraph
    bodies: dict[str, Body]  # inlined action bodies, for the simulator


def analyze_ir(ir: AppIR) -> Analysis:
    afgs, bodies = build_all(ir)
    graph = build_action_graph(ir, afgs)
    return Analysis(ir, afgs, graph, bodies)


def analyze_source(text: str) -> Analysis:
    return analyze_ir(parse_app(text))
