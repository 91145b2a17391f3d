"""Loop-related detectors: queries issued per iteration and carried state.

A query node tagged with enclosing loops runs once per iteration (the N+1
shape when the predicate depends on the loop variable, a hoisting candidate
when it does not). A carried dependency is a variable whose definition
inside the loop body reaches a use on a later iteration; such loops cannot
be turned into a single set-oriented statement without extra care.
"""

from __future__ import annotations

from ..afg.model import Afg, NodeKind
from ..analysis import Analysis
from .findings import LOOP_CARRIED, LOOP_QUERY, Finding


def _loop_vars(afg: Afg, loops: tuple[int, ...]) -> set[str]:
    return {afg.nodes[h].payload.var for h in loops}


def detect_loop_queries(an: Analysis) -> list[Finding]:
    out: list[Finding] = []
    for key, afg in an.afgs.items():
        for q in afg.query_nodes():
            if not q.loops:
                continue
            enclosing = _loop_vars(afg, q.loops)
            dependent = sorted(
                u.symbol.split(".")[0]
                for u in q.uses
                if u.symbol is not None
                and u.symbol.split(".")[0] in enclosing)
            d = q.payload.descriptor
            shape = ("issued per iteration with loop-dependent arguments"
                     if dependent else
                     "loop-invariant, could be hoisted out of the loop")
            out.append(Finding(
                LOOP_QUERY, key, q.loc.line, q.loc.col,
                f"query on {d.root_model} inside a loop: {shape}",
                {
                    "node": q.id,
                    "model": d.root_model,
                    "depth": len(q.loops),
                    "loopDependent": bool(dependent),
                    "dependsOn": dependent,
                }))
    return out


def detect_loop_carried(an: Analysis) -> list[Finding]:
    out: list[Finding] = []
    for key, afg in an.afgs.items():
        for head in sorted(afg.carried_loops):
            node = afg.nodes[head]
            syms = sorted({
                sym for (d, _u, sym) in afg.carried_edges
                if d == head or head in afg.nodes[d].loops})
            out.append(Finding(
                LOOP_CARRIED, key, node.loc.line, node.loc.col,
                "loop carries state between iterations: "
                + ", ".join(syms),
                {"loopVar": node.payload.var, "symbols": syms}))
    return out
