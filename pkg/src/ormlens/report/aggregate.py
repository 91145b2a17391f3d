"""Application-level summary built from findings and graph facts.

Per-action ratios (unused projection columns, dead eager loads, loop
queries, sink-only queries) are averaged unweighted over the actions
that have a nonzero denominator, so one query-heavy action cannot drown
out the rest. Prefetch ratios average over next-action edges. Column
source ratios are app-global over the columns the application writes at
least once.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from ..analysis import Analysis
from ..detectors import run_detectors
from ..detectors.classify import (HAS_INPUT, ONLY_CONSTANT,
                                  ONLY_OTHER_QUERY, OTHER_WITHOUT_INPUT,
                                  classify_boundedness,
                                  classify_column_sources)
from ..detectors.findings import (ALL_KINDS, DB_SENSITIVE_BRANCH, LOOP_QUERY,
                                  QUERY_ONLY_SINK, UNUSED_COLUMNS,
                                  UNUSED_EAGER_LOAD, Finding)
from ..detectors.prefetch import prefetch_edges
from ..detectors.usage import shared_groups
from ..sim import SimReport

REPORT_VERSION = 1

_WRITTEN_KINDS = (HAS_INPUT, ONLY_CONSTANT, ONLY_OTHER_QUERY,
                  OTHER_WITHOUT_INPUT)


def _mean(vals: list[float]) -> float:
    return sum(vals) / len(vals) if vals else 0.0


@dataclass
class SimSummary:
    seed: int
    sessions: int
    rows_per_model: int
    total_queries: int
    cache_hit_fraction: float
    syntactic_equiv_fraction: float
    equiv_differing_fraction: float
    prefetchable_fraction: float
    same_template_fraction: float

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "sessions": self.sessions,
            "rowsPerModel": self.rows_per_model,
            "totalQueries": self.total_queries,
            "cacheHitFraction": self.cache_hit_fraction,
            "syntacticEquivFraction": self.syntactic_equiv_fraction,
            "equivDifferingFraction": self.equiv_differing_fraction,
            "prefetchableFraction": self.prefetchable_fraction,
            "sameTemplateFraction": self.same_template_fraction,
        }


@dataclass
class AppSummary:
    models: int
    actions: int
    query_nodes: int
    finding_counts: dict[str, int]
    unused_column_fraction: float
    unused_eager_fraction: float
    loop_query_fraction: float
    sink_only_fraction: float
    boundedness: dict[str, int]
    column_sources: dict[str, int]
    column_source_fractions: dict[str, float]
    prefetchable_fraction: float
    same_template_fraction: float
    db_sensitive_branches: int
    shared_groups: int
    simulation: Optional[SimSummary] = None

    def to_dict(self) -> dict:
        out = {
            "reportVersion": REPORT_VERSION,
            "models": self.models,
            "actions": self.actions,
            "queryNodes": self.query_nodes,
            "findingCounts": dict(self.finding_counts),
            "unusedColumnFraction": self.unused_column_fraction,
            "unusedEagerFraction": self.unused_eager_fraction,
            "loopQueryFraction": self.loop_query_fraction,
            "sinkOnlyFraction": self.sink_only_fraction,
            "boundedness": dict(self.boundedness),
            "columnSources": dict(self.column_sources),
            "columnSourceFractions": dict(self.column_source_fractions),
            "prefetchableFraction": self.prefetchable_fraction,
            "sameTemplateFraction": self.same_template_fraction,
            "dbSensitiveBranches": self.db_sensitive_branches,
            "sharedGroups": self.shared_groups,
        }
        if self.simulation is not None:
            out["simulation"] = self.simulation.to_dict()
        return out


def summarize_simulation(rep: SimReport) -> SimSummary:
    cache = [c for c in rep.cache if c.total]
    pre = [p for p in rep.prefetch if p.total]
    return SimSummary(
        seed=rep.seed,
        sessions=len(rep.sessions),
        rows_per_model=rep.rows_per_model,
        total_queries=rep.total_queries(),
        cache_hit_fraction=_mean([c.hit_fraction for c in cache]),
        syntactic_equiv_fraction=_mean(
            [c.syntactic_equiv / c.total for c in cache]),
        equiv_differing_fraction=_mean(
            [c.equiv_differing_results / c.total for c in cache]),
        prefetchable_fraction=_mean(
            [p.prefetchable_fraction for p in pre]),
        same_template_fraction=_mean(
            [p.same_template_fraction for p in pre]),
    )


def summarize(an: Analysis, findings: Optional[list[Finding]] = None,
              sim: Optional[SimReport] = None) -> AppSummary:
    if findings is None:
        findings = run_detectors(an)
    counts = {k: 0 for k in ALL_KINDS}
    for f in findings:
        counts[f.kind] += 1

    by_action_kind: dict[tuple[str, str], list[Finding]] = {}
    for f in findings:
        by_action_kind.setdefault((f.action, f.kind), []).append(f)

    unused_col, unused_eager, loop_frac, sink_frac = [], [], [], []
    total_query_nodes = 0
    bounded: dict[str, int] = {}
    for key in sorted(an.afgs):
        afg = an.afgs[key]
        qnodes = afg.query_nodes()
        total_query_nodes += len(qnodes)
        projected = sum(len(n.payload.descriptor.projection) for n in qnodes)
        eager = sum(len(n.payload.descriptor.eager_loads) for n in qnodes)
        if projected:
            dead = sum(len(f.data["columns"])
                       for f in by_action_kind.get((key, UNUSED_COLUMNS), []))
            unused_col.append(dead / projected)
        if eager:
            dead = sum(len(f.data["associations"])
                       for f in by_action_kind.get((key, UNUSED_EAGER_LOAD),
                                                   []))
            unused_eager.append(dead / eager)
        if qnodes:
            loops = len(by_action_kind.get((key, LOOP_QUERY), []))
            sinks = len(by_action_kind.get((key, QUERY_ONLY_SINK), []))
            loop_frac.append(loops / len(qnodes))
            sink_frac.append(sinks / len(qnodes))
        for n in qnodes:
            b = classify_boundedness(n.payload.descriptor)
            bounded[b] = bounded.get(b, 0) + 1

    sources: dict[str, int] = {}
    for c in classify_column_sources(an):
        sources[c.classification] = sources.get(c.classification, 0) + 1
    written = sum(sources.get(k, 0) for k in _WRITTEN_KINDS)
    source_fractions = {
        k: (sources.get(k, 0) / written if written else 0.0)
        for k in _WRITTEN_KINDS}

    edges = prefetch_edges(an)
    pre = _mean([e.fraction_prefetchable for e in edges if e.entries])
    same = _mean([e.fraction_same_template for e in edges if e.entries])

    groups = sum(len(shared_groups(an.afgs[k])) for k in sorted(an.afgs))

    return AppSummary(
        models=len(an.ir.models),
        actions=len(an.afgs),
        query_nodes=total_query_nodes,
        finding_counts=counts,
        unused_column_fraction=_mean(unused_col),
        unused_eager_fraction=_mean(unused_eager),
        loop_query_fraction=_mean(loop_frac),
        sink_only_fraction=_mean(sink_frac),
        boundedness={k: bounded[k] for k in sorted(bounded)},
        column_sources={k: sources[k] for k in sorted(sources)},
        column_source_fractions=source_fractions,
        prefetchable_fraction=pre,
        same_template_fraction=same,
        db_sensitive_branches=counts[DB_SENSITIVE_BRANCH],
        shared_groups=groups,
        simulation=summarize_simulation(sim) if sim is not None else None,
    )


def corpus_mean(summaries: list[AppSummary]) -> dict:
    """Unweighted mean of every numeric summary field across a corpus."""
    if not summaries:
        return {"reportVersion": REPORT_VERSION, "files": 0}
    out: dict = {"reportVersion": REPORT_VERSION, "files": len(summaries)}
    numeric = [
        "unusedColumnFraction", "unusedEagerFraction", "loopQueryFraction",
        "sinkOnlyFraction", "prefetchableFraction", "sameTemplateFraction",
    ]
    dicts = [s.to_dict() for s in summaries]
    for k in numeric:
        out[k] = _mean([d[k] for d in dicts])
    for k in _WRITTEN_KINDS:
        out.setdefault("columnSourceFractions", {})[k] = _mean(
            [d["columnSourceFractions"][k] for d in dicts])
    sims = [d["simulation"] for d in dicts if "simulation" in d]
    if sims:
        agg: dict = {}
        for k in ("cacheHitFraction", "syntacticEquivFraction",
                  "equivDifferingFraction", "prefetchableFraction",
                  "sameTemplateFraction"):
            agg[k] = _mean([s[k] for s in sims])
        agg["totalQueries"] = sum(s["totalQueries"] for s in sims)
        out["simulation"] = agg
    return out
