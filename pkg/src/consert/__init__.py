"""Conditional safety certificates: parse, validate and evaluate at runtime."""

from consert.evaluation import (
    Assignment,
    EvaluationResult,
    best_guarantee,
    evaluate_composition,
    evaluate_function,
    explain,
    match_demand,
)
from consert.model import (
    Catalog,
    CompositionGraph,
    ConditionFunction,
    ConSert,
    Demand,
    Guarantee,
    IntegrityLevel,
    Mode,
    PropertyGuarantee,
    PropertyParams,
    RuntimeEvidence,
    SystemManifest,
    Tri,
    compare_levels,
    params_dominate,
)

__version__ = "0.1.0"

__all__ = [
    "Assignment",
    "Catalog",
    "CompositionGraph",
    "ConSert",
    "ConditionFunction",
    "Demand",
    "EvaluationResult",
    "Guarantee",
    "IntegrityLevel",
    "Mode",
    "PropertyGuarantee",
    "PropertyParams",
    "RuntimeEvidence",
    "SystemManifest",
    "Tri",
    "best_guarantee",
    "compare_levels",
    "evaluate_composition",
    "evaluate_function",
    "explain",
    "match_demand",
    "params_dominate",
]
