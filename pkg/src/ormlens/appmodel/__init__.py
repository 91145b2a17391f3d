"""RailLite front end: lexer, parser, IR, validation, sizes, interchange."""

from .ast_nodes import Loc
from .ir import (
    ActionDecl, AppIR, Association, ControllerDecl, FieldDecl, HelperDecl,
    ModelDecl, ParamDecl, Route, table_name,
)
from .lexer import tokenize
from .parser import parse_app
from .serialize import deserialize_ir, ir_from_dict, ir_to_dict, serialize_ir
from .sizes import column_byte_size, row_byte_size
from .validate import validate

__all__ = [
    "ActionDecl", "AppIR", "Association", "ControllerDecl", "FieldDecl",
    "HelperDecl", "Loc", "ModelDecl", "ParamDecl", "Route", "column_byte_size",
    "deserialize_ir", "ir_from_dict", "ir_to_dict", "parse_app",
    "row_byte_size", "serialize_ir", "table_name", "tokenize", "validate",
]
