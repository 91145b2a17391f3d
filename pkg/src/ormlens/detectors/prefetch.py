"""Static prefetchability of next-action database work.

While an action renders its page, every link and form on that page names
the action the user can trigger next. A statement in that next action is
prefetchable when everything it consumes is already known at render time:
all of it for a GET link (its arguments are computed now), and for a POST
form everything except the fields the user will type. Writes are never
prefetchable; issuing them early would change state before the user acted.

A prefetchable query additionally issued from the same source location the
current action already executed ("same template") needs no speculation at
all: its result is sitting in the renderer's hands.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..afg.dataflow import node_input_sources
from ..afg.model import FormPayload, NodeKind
from ..analysis import Analysis
from .findings import PREFETCHABLE, Finding


@dataclass
class PrefetchEntry:
    node: int
    kind: str  # "query" or "write"
    prefetchable: bool
    same_template: bool
    blocked_by: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, object]:
        return {
            "node": self.node,
            "kind": self.kind,
            "prefetchable": self.prefetchable,
            "sameTemplate": self.same_template,
            "blockedBy": self.blocked_by,
        }


@dataclass
class EdgePrefetch:
    src: str
    dst: str
    method: str
    trigger_node: int
    line: int
    col: int
    entries: list[PrefetchEntry] = field(default_factory=list)

    @property
    def fraction_prefetchable(self) -> float:
        if not self.entries:
            return 0.0
        return sum(e.prefetchable for e in self.entries) / len(self.entries)

    @property
    def fraction_same_template(self) -> float:
        if not self.entries:
            return 0.0
        return sum(e.same_template for e in self.entries) / len(self.entries)


def prefetch_edges(an: Analysis) -> list[EdgePrefetch]:
    out: list[EdgePrefetch] = []
    for edge in an.graph.edges:
        src_afg = an.afgs[edge.src]
        dst_afg = an.afgs[edge.dst]
        trigger = src_afg.nodes[edge.trigger_node]
        form_fields: set[str] = set()
        if isinstance(trigger.payload, FormPayload):
            form_fields = set(trigger.payload.fields)
        src_query_locs = [q.loc for q in src_afg.query_nodes()]
        ep = EdgePrefetch(edge.src, edge.dst, edge.method, edge.trigger_node,
                          trigger.loc.line, trigger.loc.col)
        domain = list(dst_afg.query_nodes()) + list(dst_afg.write_nodes())
        for node in sorted(domain, key=lambda n: n.id):
            is_query = node.kind == NodeKind.QUERY
            if not is_query:
                ep.entries.append(PrefetchEntry(
                    node.id, "write", False, False, ["side effect"]))
                continue
            blocked: list[str] = []
            if edge.method == "POST":
                needs = node_input_sources(dst_afg, node.id, ir=an.ir).params
                blocked = sorted(needs & form_fields)
            same = any(node.loc.same_template(loc) for loc in src_query_locs)
            ep.entries.append(PrefetchEntry(
                node.id, "query", not blocked, same, blocked))
        out.append(ep)
    return out


def detect_prefetchable(an: Analysis) -> list[Finding]:
    out: list[Finding] = []
    for ep in prefetch_edges(an):
        n_pre = sum(e.prefetchable for e in ep.entries)
        out.append(Finding(
            PREFETCHABLE, ep.src, ep.line, ep.col,
            f"{n_pre} of {len(ep.entries)} database statement(s) in "
            f"{ep.dst} could be issued while rendering this page",
            {
                "target": ep.dst,
                "method": ep.method,
                "triggerNode": ep.trigger_node,
                "entries": [e.to_dict() for e in ep.entries],
                "fractionPrefetchable": ep.fraction_prefetchable,
                "fractionSameTemplate": ep.fraction_same_template,
            }))
    return out
