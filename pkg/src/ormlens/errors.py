"""Errors and diagnostics shared across the package.

Parsing raises; validation returns. `parse_app` promotes the first
validation diagnostic of severity ``error`` to the matching exception so
callers that only ever feed it source text never see half-built IR.
"""

from __future__ import annotations

from dataclasses import dataclass


class OrmLensError(Exception):
    """Base class for every error raised by this package."""


class ParseError(OrmLensError):
    """Syntax error with position and the token class that was expected."""

    def __init__(self, line: int, col: int, expected: str, found: str = ""):
        self.line = line
        self.col = col
        self.expected = expected
        self.found = found
        where = f"line {line}, col {col}"
        msg = f"syntax error at {where}: expected {expected}"
        if found:
            msg += f", found {found!r}"
        super().__init__(msg)


class UnresolvedReferenceError(OrmLensError):
    def __init__(self, name: str, location=None):
        self.name = name
        self.location = location
        at = f" at {location}" if location is not None else ""
        super().__init__(f"unresolved reference {name!r}{at}")


class DuplicateDeclarationError(OrmLensError):
    def __init__(self, name: str, location=None):
        self.name = name
        self.location = location
        super().__init__(f"duplicate declaration of {name!r}")


class UnknownActionError(OrmLensError):
    def __init__(self, controller: str, action: str):
        self.controller = controller
        self.action = action
        super().__init__(f"unknown action {controller}.{action}")


class UnroutedTargetError(OrmLensError):
    def __init__(self, controller: str, action: str, location=None):
        self.controller = controller
        self.action = action
        self.location = location
        super().__init__(f"link/form target {controller}.{action} has no route")


class UnknownColumnError(OrmLensError):
    def __init__(self, model: str, column: str, location=None):
        self.model = model
        self.column = column
        self.location = location
        super().__init__(f"model {model} has no column {column!r}")


class UnboundParameterError(OrmLensError):
    def __init__(self, what: str):
        self.what = what
        super().__init__(f"unbound parameter: {what}")


class NothingToPruneError(OrmLensError):
    def __init__(self, reason: str = "projection already minimal"):
        super().__init__(reason)


class NotCombinableError(OrmLensError):
    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(f"queries not combinable: {reason}")


class UnsupportedFormatError(OrmLensError):
    def __init__(self, fmt: str):
        self.fmt = fmt
        super().__init__(f"unsupported output format {fmt!r}")


@dataclass(frozen=True)
class Diagnostic:
    """A validation finding. ``kind`` is a stable machine-readable tag."""

    kind: str
    name: str
    message: str
    line: int = 0
    col: int = 0

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        pos = f" (line {self.line})" if self.line else ""
        return f"{self.kind}: {self.message}{pos}"


# Diagnostic kind tags used by validate().
UNRESOLVED_REFERENCE = "unresolved_reference"
DUPLICATE_DECLARATION = "duplicate_declaration"
BAD_FOREIGN_KEY = "bad_foreign_key"
BAD_ROUTE = "bad_route"
BAD_PARAM = "bad_param"
BAD_HELPER = "bad_helper"
BAD_COLUMN = "bad_column"
