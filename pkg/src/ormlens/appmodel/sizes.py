"""Per-column byte size model used for wasted-byte accounting.

int 4, float 8, bool 1, datetime 8, string(n) n. Text columns are sized by
a case-insensitive name heuristic, checked in this order: a name containing
"comment" costs 200 bytes; then one containing "name", "email", or "url"
costs 128; anything else costs the blob default of 2450.
"""

from __future__ import annotations

from .ir import FieldDecl, ModelDecl

_FIXED = {"int": 4, "float": 8, "bool": 1, "datetime": 8}

TEXT_COMMENT_BYTES = 200
TEXT_SHORT_BYTES = 128
TEXT_DEFAULT_BYTES = 2450


def column_byte_size(field: FieldDecl) -> int:
    if field.kind in _FIXED:
        return _FIXED[field.kind]
    if field.kind == "string":
        return int(field.max_len or 0)
    if field.kind == "text":
        lowered = field.name.lower()
        if "comment" in lowered:
            return TEXT_COMMENT_BYTES
        if any(tag in lowered for tag in ("name", "email", "url")):
            return TEXT_SHORT_BYTES
        return TEXT_DEFAULT_BYTES
    raise ValueError(f"unknown field kind {field.kind!r}")


def row_byte_size(model: ModelDecl) -> int:
    return sum(column_byte_size(f) for f in model.fields)
