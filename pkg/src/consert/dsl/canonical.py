"""Canonical text form; ``parse(format_canonical(m)) == m`` for well-formed models."""

from __future__ import annotations

import re

from consert.events import Load, Root, Scenario, Step
from consert.model import Catalog, Demand, Guarantee, SystemManifest

_BARE_PATH = re.compile(r"[^\s\"#]+")


def format_properties(g: Guarantee) -> str:
    """The part of a guarantee string after ``Type(order):``."""
    parts = []
    if g.service_level is not None:
        parts.append(f"AgPL = {g.service_level}")
    parts.extend(str(p) for p in g.properties)
    return ", ".join(parts)


def format_guarantee(g: Guarantee) -> str:
    head = f"{g.service_type}({g.order}):"
    body = format_properties(g)
    return f"{head} {body}" if body else head


def format_demand(d: Demand) -> str:
    head = f"{d.service_type}:"
    if not d.properties:
        return head
    return f"{head} {', '.join(str(p) for p in d.properties)}"


def _catalog(c: Catalog) -> list[str]:
    out = [f"catalog {c.name}"]
    for st in c.service_types:
        out.append("")
        out.append(f"servicetype {st.name} {{")
        for p in st.properties:
            window = "" if p.params.window is None else f"{p.params.window}s"
            out.append(f"    property {p.name}({window},{p.params.mode})")
        out.append("}")
    return out


def _manifest(m: SystemManifest) -> list[str]:
    out = [f"system {m.system_id}", ""]
    out += [f"provides {p}" for p in m.provided]
    out += [f"requires {s.name}: {s.service_type}" for s in m.required]
    out += [f"rte {r.label} kind {r.kind}" for r in m.rtes]
    out += [f'demand {d.label} = "{format_demand(d)}" on {d.required_service}' for d in m.demands]
    for g, f in m.consert.pairs():
        out.append(f'guarantee {g.label} = "{format_guarantee(g)}" when {f}')
    return out


def _scenario(sc: Scenario) -> list[str]:
    out = [f"scenario {sc.name}"]
    if sc.steps:
        out.append("")
    for step in sc.steps:
        if isinstance(step, Load):
            path = step.path if _BARE_PATH.fullmatch(step.path) else f'"{step.path}"'
            out.append(f"load {path}")
        elif isinstance(step, Root):
            out.append(f"root {step.system_id}.{step.service_type}")
        elif isinstance(step, Step):
            out.append(f"event {step.action}")
        else:
            raise TypeError(f"unexpected scenario step {step!r}")
    return out


def format_canonical(model) -> str:
    """Deterministic text for a catalog, manifest or scenario (newline-terminated)."""
    if isinstance(model, Catalog):
        lines = _catalog(model)
    elif isinstance(model, SystemManifest):
        lines = _manifest(model)
    elif isinstance(model, Scenario):
        lines = _scenario(model)
    else:
        raise TypeError(f"cannot format {type(model).__name__}")
    return "\n".join(lines) + "\n"
