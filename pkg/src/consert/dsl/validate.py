"""Cross-checks of parsed models against a catalog (and each other)."""

from __future__ import annotations

from pathlib import Path
from typing import Optional

from consert.dsl.diagnostics import Diagnostic, Severity
from consert.events import Load, Scenario
from consert.model import (
    Catalog,
    ConditionFunction,
    Loc,
    SystemManifest,
    structural_problems,
)

_TOP = Loc(1, 1)


class _Collector:
    def __init__(self, path: str, fallback: Optional[Loc]):
        self.path = path
        self.fallback = fallback or _TOP
        self.out: list[Diagnostic] = []

    def add(self, severity: Severity, code: str, message: str, loc: Optional[Loc]) -> None:
        loc = loc or self.fallback
        self.out.append(Diagnostic(self.path, loc.line, loc.col, severity, code, message))

    def error(self, code: str, message: str, loc: Optional[Loc] = None) -> None:
        self.add(Severity.ERROR, code, message, loc)

    def warning(self, code: str, message: str, loc: Optional[Loc] = None) -> None:
        self.add(Severity.WARNING, code, message, loc)


def validate(model, catalog: Optional[Catalog] = None, path: str = "<string>", base_dir=None) -> list[Diagnostic]:
    """Return all findings for ``model``; an empty list means well-formed.

    Manifests need ``catalog``. Scenarios are checked for resolvable
    ``load`` paths relative to ``base_dir`` when it is given.
    """
    if isinstance(model, SystemManifest):
        diags = validate_manifest(model, catalog, path)
    elif isinstance(model, Catalog):
        diags = validate_catalog(model, path)
    elif isinstance(model, Scenario):
        diags = validate_scenario(model, path, base_dir)
    else:
        raise TypeError(f"cannot validate {type(model).__name__}")
    return sorted(diags)


def validate_catalog(cat: Catalog, path: str = "<string>") -> list[Diagnostic]:
    c = _Collector(path, cat.loc)
    names = [st.name for st in cat.service_types]
    for st in cat.service_types:
        if names.count(st.name) > 1:
            c.error("DUPLICATE_LABEL", f"service type {st.name!r} declared twice", st.loc)
        pnames = [p.name for p in st.properties]
        for p in st.properties:
            if pnames.count(p.name) > 1:
                c.error("DUPLICATE_LABEL", f"property {p.name!r} declared twice in {st.name}", p.loc)
        if not st.properties:
            c.warning("EMPTY_SERVICE_TYPE", f"service type {st.name!r} has no properties", st.loc)
    return c.out


def _check_function(c: _Collector, m: SystemManifest, f: ConditionFunction, loc: Optional[Loc]) -> None:
    for code, msg in structural_problems(f):
        c.error(code, f"condition of {f.output}: {msg}", f.loc or loc)
    for label in sorted(f.demands):
        if m.demand(label) is None:
            c.error("UNDECLARED_DEMAND", f"condition of {f.output} uses undeclared demand {label!r}", f.loc or loc)
    for label in sorted(f.rtes):
        if m.rte(label) is None:
            c.error("UNDECLARED_RTE", f"condition of {f.output} uses undeclared runtime evidence {label!r}", f.loc or loc)


def _check_properties(c: _Collector, cat: Catalog, service_type: str, props, owner: str) -> None:
    if cat.service_type(service_type) is None:
        return
    for p in props:
        if not cat.has_property(service_type, p.property_type):
            c.error(
                "UNKNOWN_PROPERTY",
                f"{owner}: property {p.property_type!r} is not defined for service type {service_type}",
                p.loc,
            )


def validate_manifest(m: SystemManifest, cat: Optional[Catalog], path: str = "<string>") -> list[Diagnostic]:
    c = _Collector(path, m.loc)
    if cat is None:
        c.error("NO_CATALOG", f"system {m.system_id} cannot be checked without a catalog")
        return c.out

    for st in m.provided:
        if cat.service_type(st) is None:
            c.error("UNKNOWN_SERVICE_TYPE", f"provided service type {st!r} is not in catalog {cat.name}")
    for slot in m.required:
        if cat.service_type(slot.service_type) is None:
            c.error(
                "UNKNOWN_SERVICE_TYPE",
                f"slot {slot.name!r} expects unknown service type {slot.service_type!r}",
                slot.loc,
            )

    used_demands: set[str] = set()
    used_rtes: set[str] = set()
    for d in m.demands:
        slot = m.slot(d.required_service)
        if slot is None:
            c.error("UNDECLARED_SLOT", f"demand {d.label} is on undeclared slot {d.required_service!r}", d.loc)
        elif slot.service_type != d.service_type:
            c.error(
                "DEMAND_TYPE_MISMATCH",
                f"demand {d.label} asks for {d.service_type} but slot {slot.name} carries {slot.service_type}",
                d.loc,
            )
        if cat.service_type(d.service_type) is None:
            c.error("UNKNOWN_SERVICE_TYPE", f"demand {d.label} names unknown service type {d.service_type!r}", d.loc)
        _check_properties(c, cat, d.service_type, d.properties, f"demand {d.label}")

    for svc in m.consert.services:
        levels = svc.levels
        first_loc = levels[0][0].loc if levels else None
        if svc.service_type not in m.provided:
            c.error(
                "SERVICE_NOT_PROVIDED",
                f"guarantees given for {svc.service_type!r}, which {m.system_id} does not provide",
                first_loc,
            )
        if cat.service_type(svc.service_type) is None:
            c.error("UNKNOWN_SERVICE_TYPE", f"guarantee service type {svc.service_type!r} is not in catalog", first_loc)
        orders = [g.order for g, _ in levels]
        dup = sorted({o for o in orders if orders.count(o) > 1})
        for o in dup:
            c.error("DUPLICATE_ORDER", f"order {o} used more than once for {svc.service_type}", first_loc)
        if sorted(set(orders)) != list(range(1, len(set(orders)) + 1)):
            c.error(
                "ORDER_GAP",
                f"orders for {svc.service_type} must be contiguous from 1, found {sorted(set(orders))}",
                first_loc,
            )
        for g, f in levels:
            if f.output != g.label:
                c.error("OUTPUT_MISMATCH", f"condition output {f.output!r} does not gate guarantee {g.label!r}", g.loc)
            _check_properties(c, cat, g.service_type, g.properties, f"guarantee {g.label}")
            _check_function(c, m, f, g.loc)
            used_demands |= f.demands
            used_rtes |= f.rtes
        if levels and not levels[-1][1].is_constant_true:
            c.warning(
                "NO_DEFAULT",
                f"lowest guarantee of {svc.service_type} is conditional; the service may end up with none",
                levels[-1][0].loc,
            )

    for st in m.provided:
        if not m.consert.for_service(st):
            c.warning("NO_GUARANTEE", f"provided service {st!r} has no guarantees")
    for d in m.demands:
        if d.label not in used_demands:
            c.warning("UNUSED_DEMAND", f"demand {d.label} is not used by any condition", d.loc)
    for r in m.rtes:
        if r.label not in used_rtes:
            c.warning("UNUSED_RTE", f"runtime evidence {r.label} is not used by any condition", r.loc)
    return c.out


def validate_scenario(sc: Scenario, path: str = "<string>", base_dir=None) -> list[Diagnostic]:
    c = _Collector(path, sc.loc)
    if base_dir is None:
        return c.out
    for step in sc.steps:
        if isinstance(step, Load) and not (Path(base_dir) / step.path).is_file():
            c.error("MISSING_FILE", f"cannot find {step.path!r}", step.loc)
    return c.out
