"""Statistics over one session's query log.

Cacheability asks, for each read, whether an earlier action in the same
session already transferred every row the read returned, column for
column, with no write to any of those rows in between. Reads that return
nothing are vacuously cacheable. The companion counters track reads whose
bound SQL text already appeared earlier in the session, and the subset of
those whose result rows nevertheless differ, which is the trap a cache
keyed on query text alone would fall into.

Prefetchability asks, for each read in a step the user reached through a
link or form, whether the query's inputs were already known when the
previous page rendered: reads reached by GET always qualify, reads
reached by POST qualify unless they consumed one of the submitted form
fields. A read is additionally same-template when the immediately
previous step executed a read from the same source location.
"""

from __future__ import annotations

from dataclasses import dataclass

from .session import QueryLogEntry, SessionLog


@dataclass
class CacheStats:
    total: int
    hits: int
    syntactic_equiv: int
    equiv_differing_results: int

    @property
    def hit_fraction(self) -> float:
        return self.hits / self.total if self.total else 0.0


@dataclass
class PrefetchStats:
    total: int
    prefetchable: int
    same_template: int

    @property
    def prefetchable_fraction(self) -> float:
        return self.prefetchable / self.total if self.total else 0.0

    @property
    def same_template_fraction(self) -> float:
        return self.same_template / self.total if self.total else 0.0


def _covered(entry: QueryLogEntry, seq: list[QueryLogEntry], pos: int,
             identity: tuple[str, int]) -> bool:
    """Did an earlier action fetch this row with at least these columns?"""
    model = identity[0]
    need = set(entry.columns.get(model, ()))
    for fpos in range(pos - 1, -1, -1):
        f = seq[fpos]
        if f.kind != "read" or f.step >= entry.step:
            continue
        if identity not in f.identities:
            continue
        if not need <= set(f.columns.get(model, ())):
            continue
        stale = any(seq[w].kind == "write"
                    and identity in seq[w].identities
                    for w in range(fpos + 1, pos))
        if not stale:
            return True
    return False


def cache_stats(log: SessionLog) -> CacheStats:
    seq = log.entries()
    total = hits = syntactic = differing = 0
    for pos, e in enumerate(seq):
        if e.kind != "read":
            continue
        total += 1
        earlier_same = next(
            (seq[j] for j in range(pos - 1, -1, -1)
             if seq[j].kind == "read" and seq[j].sql == e.sql), None)
        if earlier_same is not None:
            syntactic += 1
            if earlier_same.identities != e.identities:
                differing += 1
        if all(_covered(e, seq, pos, ident) for ident in e.identities):
            hits += 1
    return CacheStats(total, hits, syntactic, differing)


def prefetch_stats(log: SessionLog) -> PrefetchStats:
    total = prefetchable = same_template = 0
    for i, step in enumerate(log.steps):
        if step.method is None:
            continue
        prev_locs = {(e.line, e.col) for e in log.steps[i - 1].entries
                     if e.kind == "read"} if i else set()
        fields = set(step.form_fields)
        for e in step.entries:
            if e.kind != "read":
                continue
            total += 1
            if step.method == "GET" or not (set(e.params_used) & fields):
                prefetchable += 1
            if (e.line, e.col) in prev_locs:
                same_template += 1
    return PrefetchStats(total, prefetchable, same_template)
