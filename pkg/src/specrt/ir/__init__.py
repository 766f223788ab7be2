"""Kernel IR: the small typed language handler code is written in."""

from .nodes import *  # noqa: F401,F403
from .nodes import Program, FunctionDef, SpecPointDecl
from .parser import IRSyntaxError, ValidationError, parse_forms, parse_program
from .printer import format_expr, format_function, pretty_print
from .validate import Diagnostic, always_returns, return_type, validate

__all__ = [
    "Program",
    "FunctionDef",
    "SpecPointDecl",
    "IRSyntaxError",
    "ValidationError",
    "Diagnostic",
    "parse_forms",
    "parse_program",
    "pretty_print",
    "format_expr",
    "format_function",
    "validate",
    "always_returns",
    "return_type",
]
