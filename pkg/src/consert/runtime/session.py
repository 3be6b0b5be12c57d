"""Live composition session driven by a totally ordered event stream.

Every accepted event triggers a full re-evaluation of the composition; the
caller gets back the new session plus the per-service change in achieved
guarantee order (the degradation delta). Rejected events leave the session
untouched.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from types import MappingProxyType
from typing import Mapping, Optional, Union

from consert.dsl import has_errors, validate
from consert.evaluation import CompositionError, EvaluationResult, evaluate_composition
from consert.events import Bind, Event, Join, Leave, LoggedEvent, SetRte
from consert.model import Catalog, CompositionGraph, ServiceKey, Tri
from consert.runtime.registry import Registry, RegistryError

ABSENT = "absent"


class SessionError(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code

    def __str__(self) -> str:
        return f"{self.code}: {self.args[0]}"


class UnresolvableManifest(SessionError):
    pass


OrderState = Union[int, None, str]  # order, None = no guarantee, ABSENT = service not live


def _fmt_state(v: OrderState) -> str:
    if v is None:
        return "none"
    return str(v)


@dataclass(frozen=True, order=True)
class Change:
    system_id: str
    service_type: str
    old: OrderState = field(compare=False)
    new: OrderState = field(compare=False)

    def __str__(self) -> str:
        return f"{self.system_id}.{self.service_type} {_fmt_state(self.old)}->{_fmt_state(self.new)}"


def diff_results(old: EvaluationResult, new: EvaluationResult) -> tuple[Change, ...]:
    keys = sorted(set(old.services) | set(new.services))
    out = []
    for k in keys:
        a = old[k].order if k in old else ABSENT
        b = new[k].order if k in new else ABSENT
        if a != b:
            out.append(Change(k[0], k[1], a, b))
    return tuple(out)


def format_delta(delta) -> str:
    return ", ".join(str(c) for c in delta) if delta else "-"


@dataclass(frozen=True)
class Session:
    catalog: Catalog
    graph: CompositionGraph
    rte_values: Mapping[tuple[str, str], Tri]
    log: tuple[LoggedEvent, ...]
    result: EvaluationResult
    root: Optional[ServiceKey] = None
    registry: Optional[Registry] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "rte_values", MappingProxyType(dict(sorted(self.rte_values.items()))))

    @classmethod
    def start(cls, catalog: Catalog, registry: Registry, root: Optional[ServiceKey] = None) -> "Session":
        graph = CompositionGraph({})
        return cls(catalog, graph, {}, (), evaluate_composition(graph, catalog), root, registry)

    @property
    def live(self) -> list[str]:
        return list(self.graph.systems)

    def with_root(self, root: Optional[ServiceKey]) -> "Session":
        graph = _graph(self.graph.systems, self.graph.bindings, root)
        return replace(self, root=root, graph=graph)

    def state(self):
        """Everything that defines the session, for structural comparison."""
        return (self.catalog, self.graph, dict(self.rte_values), self.log, self.result, self.root)


def _graph(systems, bindings, root) -> CompositionGraph:
    live_root = None
    if root is not None and root[0] in systems and root[1] in systems[root[0]].provided:
        live_root = root
    return CompositionGraph(dict(systems), dict(bindings), live_root)


def _require_live(s: Session, system_id: str) -> None:
    if system_id not in s.graph.systems:
        raise SessionError("UNKNOWN_SYSTEM", f"system {system_id!r} is not part of the composition")


def apply_event(s: Session, e: Event) -> tuple[Session, tuple[Change, ...]]:
    """Apply ``e`` and re-evaluate; raise SessionError (state unchanged) on rejection."""
    systems = dict(s.graph.systems)
    bindings = dict(s.graph.bindings)
    rtes = dict(s.rte_values)

    if isinstance(e, Join):
        if e.system_id in systems:
            raise SessionError("ALREADY_LIVE", f"system {e.system_id!r} has already joined")
        if s.registry is None:
            raise UnresolvableManifest("UNRESOLVABLE", "session has no registry to resolve manifests from")
        try:
            m = s.registry.manifest(e.system_id)
        except RegistryError as exc:
            raise UnresolvableManifest("UNRESOLVABLE", f"cannot resolve {e.system_id!r}: {exc}") from None
        if has_errors(validate(m, s.catalog)):
            raise SessionError("INVALID_MANIFEST", f"manifest of {e.system_id!r} does not validate against the catalog")
        systems[e.system_id] = m
    elif isinstance(e, Leave):
        _require_live(s, e.system_id)
        if s.root is not None and s.root[0] == e.system_id:
            raise SessionError("ROOT_LEAVE", f"{e.system_id} hosts the application service and cannot leave")
        del systems[e.system_id]
        bindings = {k: v for k, v in bindings.items() if k[0] != e.system_id and v[0] != e.system_id}
        rtes = {k: v for k, v in rtes.items() if k[0] != e.system_id}
    elif isinstance(e, Bind):
        _require_live(s, e.consumer)
        _require_live(s, e.provider)
        bindings[(e.consumer, e.slot)] = (e.provider, e.service_type)
    elif isinstance(e, SetRte):
        _require_live(s, e.system_id)
        if systems[e.system_id].rte(e.label) is None:
            raise SessionError("UNKNOWN_RTE", f"{e.system_id} declares no runtime evidence {e.label!r}")
        rtes[(e.system_id, e.label)] = e.value
    else:
        raise TypeError(f"not an event: {e!r}")

    graph = _graph(systems, bindings, s.root)
    try:
        result = evaluate_composition(graph, s.catalog, rtes)
    except CompositionError as exc:
        raise SessionError(exc.code, str(exc.args[0])) from None
    logged = LoggedEvent(len(s.log) + 1, e)
    new = Session(s.catalog, graph, rtes, s.log + (logged,), result, s.root, s.registry)
    return new, diff_results(s.result, result)


def replay_log(
    catalog: Catalog,
    registry: Registry,
    log,
    root: Optional[ServiceKey] = None,
) -> Session:
    """Rebuild a session from its event log."""
    s = Session.start(catalog, registry, root)
    for entry in log:
        event = entry.event if isinstance(entry, LoggedEvent) else entry
        s, _ = apply_event(s, event)
    return s
