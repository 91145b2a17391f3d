"""Result-size classification and column value-provenance classification.

Boundedness is a property of the query descriptor alone. Column sources
need the whole app: every write site that can store into a column is
traced backward, and the union of reachable source kinds decides whether
the column can ever hold user input, only constants, or only values read
from other queries.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..afg.dataflow import condition_sources, value_sources
from ..afg.model import (
    AGG_ANY, AGG_COUNT, AGG_FIND, CreatePayload, FieldWritePayload,
    NodeKind, QueryDescriptor, SourceKind,
)
from ..analysis import Analysis
from .findings import BOUNDEDNESS, COLUMN_SOURCE, DB_SENSITIVE_BRANCH, Finding

BOUNDED_SINGLE_VALUE = "BoundedSingleValue"
BOUNDED_SINGLE_RECORD = "BoundedSingleRecord"
BOUNDED_LIMITED = "BoundedLimited"
UNBOUNDED = "Unbounded"

HAS_INPUT = "has_input"
ONLY_CONSTANT = "only_constant"
ONLY_OTHER_QUERY = "only_other_query"
OTHER_WITHOUT_INPUT = "other_without_input"
NEVER_WRITTEN = "never_written"


def classify_boundedness(desc: QueryDescriptor) -> str:
    """How large can this result get as the table grows.

    Aggregates return one scalar regardless of data volume; a pk-equality
    lookup returns at most one row; an explicit limit caps the row count;
    everything else (including order/group/offset alone) scales with the
    table.
    """
    if desc.aggregate in (AGG_COUNT, AGG_ANY):
        return BOUNDED_SINGLE_VALUE
    if desc.aggregate == AGG_FIND:
        return BOUNDED_SINGLE_RECORD
    if any(p.column == "id" and p.op == "==" for p in desc.predicates):
        return BOUNDED_SINGLE_RECORD
    if desc.limit is not None:
        return BOUNDED_LIMITED
    return UNBOUNDED


def detect_boundedness(an: Analysis) -> list[Finding]:
    out: list[Finding] = []
    for key, afg in an.afgs.items():
        for q in afg.query_nodes():
            desc = q.payload.descriptor
            cls = classify_boundedness(desc)
            out.append(Finding(
                BOUNDEDNESS, key, q.loc.line, q.loc.col,
                f"query on {desc.root_model} is {cls}",
                {"node": q.id, "model": desc.root_model, "class": cls}))
    return out


@dataclass
class ColumnClassification:
    model: str
    column: str
    classification: str
    kinds: list[str] = field(default_factory=list)
    domain: list[object] = field(default_factory=list)
    query_columns: list[str] = field(default_factory=list)
    params: list[str] = field(default_factory=list)
    write_sites: int = 0

    def to_dict(self) -> dict[str, object]:
        return {
            "model": self.model,
            "column": self.column,
            "classification": self.classification,
            "kinds": self.kinds,
            "domain": self.domain,
            "queryColumns": self.query_columns,
            "params": self.params,
            "writeSites": self.write_sites,
        }


def _classify(kinds: set[SourceKind]) -> str:
    if not kinds:
        return NEVER_WRITTEN
    if SourceKind.USER_INPUT in kinds:
        return HAS_INPUT
    if kinds <= {SourceKind.CONSTANT_VALUE}:
        return ONLY_CONSTANT
    if kinds <= {SourceKind.READ_QUERY}:
        return ONLY_OTHER_QUERY
    return OTHER_WITHOUT_INPUT


def classify_column_sources(an: Analysis) -> list[ColumnClassification]:
    """One record per model column, from every write site in the app.

    Write sites are field assignments and explicit create() keywords; the
    defaults create() fills in are engine behaviour, not app writes, so an
    untouched column keeps its observed domain. The engine-assigned pk is
    skipped entirely.
    """
    sites: dict[tuple[str, str], list[tuple]] = {}
    for m in an.ir.models:
        for f in m.fields:
            if f.name != "id":
                sites[(m.name, f.name)] = []
    for afg in an.afgs.values():
        for node in afg.sorted_nodes():
            p = node.payload
            if isinstance(p, FieldWritePayload):
                sites.setdefault((p.model, p.column), []).append(
                    (afg, node, None))
            elif isinstance(p, CreatePayload):
                for (col, _vexpr) in p.writes:
                    sites.setdefault((p.model, col), []).append(
                        (afg, node, col))

    out: list[ColumnClassification] = []
    for (model, column) in sorted(sites):
        kinds: set[SourceKind] = set()
        consts: set[object] = set()
        qcols: set[str] = set()
        params: set[str] = set()
        for (afg, node, col) in sites[(model, column)]:
            s = value_sources(afg, node.id, column=col, ir=an.ir)
            kinds |= s.kinds
            consts.update(s.consts)
            qcols.update(f"{m or '?'}.{c or '*'}" for (m, c) in s.query_columns)
            params |= s.params
        cls = _classify(kinds)
        out.append(ColumnClassification(
            model, column, cls,
            kinds=sorted(k.value for k in kinds),
            domain=sorted(consts, key=repr) if cls == ONLY_CONSTANT else [],
            query_columns=sorted(qcols),
            params=sorted(params),
            write_sites=len(sites[(model, column)])))
    return out


def detect_column_sources(an: Analysis) -> list[Finding]:
    """Findings for the actionable classes: enumerable and derived columns."""
    out: list[Finding] = []
    for rec in classify_column_sources(an):
        if rec.classification == ONLY_CONSTANT:
            out.append(Finding(
                COLUMN_SOURCE, "", 0, 0,
                f"{rec.model}.{rec.column} only ever holds "
                + ", ".join(repr(v) for v in rec.domain),
                rec.to_dict()))
        elif rec.classification == ONLY_OTHER_QUERY:
            out.append(Finding(
                COLUMN_SOURCE, "", 0, 0,
                f"{rec.model}.{rec.column} is always copied from "
                + (", ".join(rec.query_columns) or "another query"),
                rec.to_dict()))
    return out


def detect_db_sensitive_branches(an: Analysis) -> list[Finding]:
    out: list[Finding] = []
    for key, afg in an.afgs.items():
        for node in afg.sorted_nodes():
            if node.kind != NodeKind.BRANCH:
                continue
            s = condition_sources(afg, node.id, ir=an.ir)
            if SourceKind.READ_QUERY not in s.kinds:
                continue
            out.append(Finding(
                DB_SENSITIVE_BRANCH, key, node.loc.line, node.loc.col,
                "branch outcome depends on query results",
                {
                    "node": node.id,
                    "queryNodes": sorted(s.query_nodes),
                    "queryColumns": sorted(
                        f"{m or '?'}.{c or '*'}"
                        for (m, c) in s.query_columns),
                }))
    return out
