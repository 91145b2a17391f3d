"""Synthetic database population.

Each table gets `rows_per_model` rows with ids 1..N. Foreign key columns
point at a uniformly random id in the referenced table, so associations
are dense and every join has work to do. All values for one table come
from the substream `table:<Model>`, which keeps a table's contents stable
when other tables are added or resized.

Datetimes are integer epoch seconds drawn from calendar year 2016, the
same window the simulated clock sits in.
"""

from __future__ import annotations

from typing import Optional

from ..appmodel.ir import AppIR, FieldDecl
from .rng import Rng

Store = dict[str, list[dict]]

EPOCH_2016_START = 1451606400  # 2016-01-01 00:00:00 UTC
EPOCH_2016_END = 1483142400    # 2016-12-31 00:00:00 UTC

_ALNUM = "abcdefghijklmnopqrstuvwxyz0123456789"

Domains = dict[tuple[str, str], list]


def _foreign_keys(ir: AppIR) -> dict[tuple[str, str], str]:
    """Map (model, column) to the model the column's ids refer to."""
    out: dict[tuple[str, str], str] = {}
    for m in ir.models:
        for a in m.associations:
            if a.kind == "belongs_to":
                out[(a.owner, a.foreign_key)] = a.target
            else:
                out[(a.target, a.foreign_key)] = a.owner
    return out


def _string(rng: Rng, length: int) -> str:
    return "".join(_ALNUM[rng.randint(0, len(_ALNUM) - 1)]
                   for _ in range(length))


def _value(rng: Rng, field: FieldDecl):
    if field.kind == "int":
        return rng.randint(0, 999)
    if field.kind == "float":
        return rng.random()
    if field.kind == "bool":
        return rng.randint(0, 1) == 1
    if field.kind == "datetime":
        return rng.randint(EPOCH_2016_START, EPOCH_2016_END)
    if field.kind == "text":
        return _string(rng, 32)
    length = min(field.max_len or 12, 12)
    return _string(rng, length)


def generate_data(ir: AppIR, seed: int, rows_per_model: int,
                  domains: Optional[Domains] = None) -> Store:
    """Build a store keyed by model name.

    `domains` optionally pins (model, column) pairs to a closed set of
    values; columns that the application only ever writes constants to
    should be generated from those constants or filters on them never
    match anything.
    """
    fks = _foreign_keys(ir)
    store: Store = {}
    for m in ir.models:
        rng = Rng(seed).derive(f"table:{m.name}")
        rows = []
        for i in range(1, rows_per_model + 1):
            row: dict = {}
            for f in m.fields:
                if f.name == "id":
                    row["id"] = i
                elif (m.name, f.name) in fks:
                    row[f.name] = rng.randint(1, rows_per_model)
                elif domains and (m.name, f.name) in domains:
                    row[f.name] = rng.choice(domains[(m.name, f.name)])
                else:
                    row[f.name] = _value(rng, f)
            rows.append(row)
        store[m.name] = rows
    return store
