"""Rendering findings and summaries as JSON, CSV, or terminal text.

Output is deterministic: findings arrive pre-sorted, JSON preserves the
summary's logical key order, and color is off unless ORMLENS_COLOR=1 is
set in the environment, so piping the same input twice gives the same
bytes.
"""

from __future__ import annotations

import json
import os
from typing import Optional

from ..detectors.findings import Finding
from ..errors import UnsupportedFormatError
from .aggregate import REPORT_VERSION, AppSummary

_BOLD = "\x1b[1m"
_CYAN = "\x1b[36m"
_DIM = "\x1b[2m"
_RESET = "\x1b[0m"

FORMATS = ("json", "csv", "text")


def _use_color(color: Optional[bool]) -> bool:
    if color is not None:
        return color
    return os.environ.get("ORMLENS_COLOR", "0") == "1"


def findings_payload(findings: list[Finding],
                     summary: Optional[AppSummary] = None) -> dict:
    out: dict = {
        "reportVersion": REPORT_VERSION,
        "findings": [f.to_dict() for f in findings],
    }
    if summary is not None:
        out["summary"] = summary.to_dict()
    return out


def render_json(payload: dict) -> str:
    return json.dumps(payload, indent=2) + "\n"


def render_csv(findings: list[Finding]) -> str:
    """One row per (action, detector) with the number of findings."""
    counts: dict[tuple[str, str], int] = {}
    for f in findings:
        k = (f.action, f.kind)
        counts[k] = counts.get(k, 0) + 1
    lines = ["action,detector,count"]
    for (action, kind) in sorted(counts):
        lines.append(f"{action},{kind},{counts[(action, kind)]}")
    return "\n".join(lines) + "\n"


def _fmt_fraction(v: float) -> str:
    return f"{v:.3f}"


def render_text(findings: list[Finding],
                summary: Optional[AppSummary] = None,
                color: Optional[bool] = None) -> str:
    on = _use_color(color)
    bold = (lambda s: f"{_BOLD}{s}{_RESET}") if on else (lambda s: s)
    tag = (lambda s: f"{_CYAN}{s}{_RESET}") if on else (lambda s: s)
    dim = (lambda s: f"{_DIM}{s}{_RESET}") if on else (lambda s: s)

    lines: list[str] = []
    by_action: dict[str, list[Finding]] = {}
    for f in findings:
        by_action.setdefault(f.action or "(application)", []).append(f)
    for action in sorted(by_action):
        lines.append(bold(f"== {action} =="))
        for f in by_action[action]:
            where = f"{f.line}:{f.col}" if f.line else "-"
            lines.append(f"  [{tag(f.kind)}] {dim(where)} {f.message}")
        lines.append("")
    if not findings:
        lines.append("no findings")
        lines.append("")
    if summary is not None:
        s = summary
        lines.append(bold("== summary =="))
        lines.append(f"  models {s.models}, actions {s.actions}, "
                     f"query nodes {s.query_nodes}")
        lines.append("  unused projection columns "
                     + _fmt_fraction(s.unused_column_fraction)
                     + ", dead eager loads "
                     + _fmt_fraction(s.unused_eager_fraction))
        lines.append("  loop queries " + _fmt_fraction(s.loop_query_fraction)
                     + ", sink-only queries "
                     + _fmt_fraction(s.sink_only_fraction))
        lines.append("  prefetchable "
                     + _fmt_fraction(s.prefetchable_fraction)
                     + ", same template "
                     + _fmt_fraction(s.same_template_fraction))
        if s.boundedness:
            parts = [f"{k} {v}" for k, v in sorted(s.boundedness.items())]
            lines.append("  boundedness: " + ", ".join(parts))
        if s.column_sources:
            parts = [f"{k} {v}" for k, v in sorted(s.column_sources.items())]
            lines.append("  column sources: " + ", ".join(parts))
        if s.simulation is not None:
            sim = s.simulation
            lines.append(f"  simulation ({sim.sessions} sessions, seed "
                         f"{sim.seed}): {sim.total_queries} queries, "
                         "cacheable "
                         + _fmt_fraction(sim.cache_hit_fraction)
                         + ", repeated sql "
                         + _fmt_fraction(sim.syntactic_equiv_fraction)
                         + " (stale "
                         + _fmt_fraction(sim.equiv_differing_fraction)
                         + "), prefetchable "
                         + _fmt_fraction(sim.prefetchable_fraction))
        lines.append("")
    return "\n".join(lines)


def render(fmt: str, findings: list[Finding],
           summary: Optional[AppSummary] = None,
           color: Optional[bool] = None) -> str:
    if fmt == "json":
        return render_json(findings_payload(findings, summary))
    if fmt == "csv":
        return render_csv(findings)
    if fmt == "text":
        return render_text(findings, summary, color)
    raise UnsupportedFormatError(fmt)
