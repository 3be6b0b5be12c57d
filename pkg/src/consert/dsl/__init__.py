"""Text language for catalogs, system manifests and scenarios."""

from consert.dsl.canonical import format_canonical, format_demand, format_guarantee, format_properties
from consert.dsl.diagnostics import Diagnostic, DslError, Severity, has_errors
from consert.dsl.parser import (
    EXTENSIONS,
    ParseResult,
    SourceDocument,
    load_document,
    parse,
    parse_guarantee_spec,
)
from consert.dsl.validate import validate

__all__ = [
    "Diagnostic",
    "DslError",
    "EXTENSIONS",
    "ParseResult",
    "Severity",
    "SourceDocument",
    "format_canonical",
    "format_demand",
    "format_guarantee",
    "format_properties",
    "has_errors",
    "load_document",
    "parse",
    "parse_guarantee_spec",
    "validate",
]
