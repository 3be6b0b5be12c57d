"""Demand matching, condition evaluation and leaf-first composition evaluation."""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping, Optional, Sequence

from consert.model import (
    Catalog,
    CompositionGraph,
    ConditionFunction,
    ConSert,
    Demand,
    GateOp,
    Guarantee,
    ModelError,
    ServiceKey,
    SystemManifest,
    Tri,
    params_dominate,
)


class EvaluationError(Exception):
    """Raised when inputs violate an evaluation precondition."""


class CompositionError(EvaluationError):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code

    def __str__(self) -> str:
        return f"{self.code}: {self.args[0]}"


@dataclass(frozen=True)
class Assignment:
    demand_values: Mapping[str, bool] = field(default_factory=dict)
    rte_values: Mapping[str, bool] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "demand_values", MappingProxyType(dict(sorted(self.demand_values.items()))))
        object.__setattr__(self, "rte_values", MappingProxyType(dict(sorted(self.rte_values.items()))))

    def restrict(self, f: ConditionFunction) -> "Assignment":
        return Assignment(
            {k: self.demand_values[k] for k in f.demands if k in self.demand_values},
            {k: self.rte_values[k] for k in f.rtes if k in self.rte_values},
        )


# --- matching ------------------------------------------------------------

def match_demand(d: Demand, g: Guarantee, catalog: Catalog) -> bool:
    """Does guarantee ``g`` (shortcut expanded via ``catalog``) meet demand ``d``?"""
    if d.service_type != g.service_type:
        return False
    for p in d.properties:
        if not catalog.has_property(d.service_type, p.property_type):
            raise EvaluationError(
                f"demand {d.label}: property {p.property_type!r} is unknown for {d.service_type}"
            )
    try:
        offered = g.expand(catalog).properties
    except ModelError as exc:
        raise EvaluationError(str(exc)) from None
    for q in offered:
        if not catalog.has_property(g.service_type, q.property_type):
            raise EvaluationError(f"guarantee {g.label}: property {q.property_type!r} is unknown for {g.service_type}")
    return all(
        any(
            q.property_type == p.property_type and params_dominate(q.params, p.params) and q.level >= p.level
            for q in offered
        )
        for p in d.properties
    )


# --- condition functions ---------------------------------------------------

@functools.lru_cache(maxsize=4096)
def _plan(f: ConditionFunction):
    """Flatten the DAG to (node, op, input-indices) in topological order."""
    try:
        order = f.topological_nodes()
    except ModelError as exc:
        raise EvaluationError(str(exc)) from None
    index = {n: i for i, n in enumerate(order)}
    preds = f.predecessors()
    ops = dict(f.gates)
    steps = []
    for n in order:
        kind, name = n
        ins = tuple(index[p] for p in preds.get(n, ()))
        if kind == "gate":
            if not ins:
                raise EvaluationError(f"gate {name} has no inputs")
            steps.append((kind, name, ops[name], ins))
        elif kind == "out":
            if len(ins) > 1:
                raise EvaluationError(f"output {name} has {len(ins)} incoming edges")
            steps.append((kind, name, None, ins))
        else:
            steps.append((kind, name, None, ins))
    return tuple(steps)


def evaluate_function(f: ConditionFunction, a: Assignment) -> bool:
    """Evaluate ``f`` under ``a`` (extra labels in ``a`` are ignored)."""
    vals: list[bool] = []
    result = True
    for kind, name, op, ins in _plan(f):
        if kind == "demand":
            try:
                v = bool(a.demand_values[name])
            except KeyError:
                raise EvaluationError(f"assignment has no value for demand {name!r}") from None
        elif kind == "rte":
            try:
                v = bool(a.rte_values[name])
            except KeyError:
                raise EvaluationError(f"assignment has no value for runtime evidence {name!r}") from None
        elif kind == "gate":
            if op is GateOp.AND:
                v = all(vals[i] for i in ins)
            else:
                v = any(vals[i] for i in ins)
        else:
            v = vals[ins[0]] if ins else True
            result = v
        vals.append(v)
    return result


def best_guarantee(c: ConSert, service: str, a: Assignment) -> Optional[Guarantee]:
    """Lowest-order guarantee of ``service`` whose condition holds under ``a``."""
    for g, f in c.for_service(service):
        if evaluate_function(f, a):
            return g
    return None


# --- composition ---------------------------------------------------------

@dataclass(frozen=True)
class ProviderRef:
    system_id: str
    service_type: str
    order: int
    label: str

    def __str__(self) -> str:
        return f"{self.system_id}.{self.service_type}({self.order}) {self.label}"


@dataclass(frozen=True)
class Trace:
    """Why a service got what it got.

    ``assignment`` holds the input values of the achieved guarantee's
    condition; ``providers`` names, per satisfied demand among them, the
    provider guarantee that matched it.
    """

    assignment: Assignment = Assignment()
    providers: Mapping[str, ProviderRef] = field(default_factory=dict)
    reason: str = ""

    def __post_init__(self):
        object.__setattr__(self, "providers", MappingProxyType(dict(sorted(self.providers.items()))))


NO_FUNCTION_SATISFIED = "no function satisfied"


@dataclass(frozen=True)
class ServiceResult:
    system_id: str
    service_type: str
    achieved: Optional[Guarantee]
    trace: Trace
    expanded: Optional[Guarantee] = None

    @property
    def order(self) -> Optional[int]:
        return None if self.achieved is None else self.achieved.order


@dataclass(frozen=True)
class EvaluationResult:
    services: Mapping[ServiceKey, ServiceResult]

    def __post_init__(self):
        object.__setattr__(self, "services", MappingProxyType(dict(sorted(self.services.items()))))

    def __getitem__(self, key: ServiceKey) -> ServiceResult:
        return self.services[key]

    def __contains__(self, key) -> bool:
        return key in self.services

    def orders(self) -> dict[ServiceKey, Optional[int]]:
        return {k: r.order for k, r in self.services.items()}


def check_graph(graph: CompositionGraph) -> None:
    """Raise CompositionError unless bindings are well-typed and acyclic."""
    systems = graph.systems
    for (consumer, slot_name), (provider, service) in graph.bindings.items():
        if consumer not in systems:
            raise CompositionError("UNKNOWN_SYSTEM", f"binding from unknown system {consumer!r}")
        if provider not in systems:
            raise CompositionError("UNKNOWN_SYSTEM", f"binding to unknown system {provider!r}")
        slot = systems[consumer].slot(slot_name)
        if slot is None:
            raise CompositionError("UNKNOWN_SLOT", f"{consumer} has no required slot {slot_name!r}")
        if service not in systems[provider].provided:
            raise CompositionError("UNKNOWN_SERVICE", f"{provider} does not provide {service!r}")
        if slot.service_type != service:
            raise CompositionError(
                "TYPE_MISMATCH",
                f"{consumer}.{slot_name} expects {slot.service_type}, {provider} offers {service}",
            )
    if graph.root is not None:
        rs, rsvc = graph.root
        if rs not in systems or rsvc not in systems[rs].provided:
            raise CompositionError("UNKNOWN_ROOT", f"root {rs}.{rsvc} is not a live provided service")
    topological_order(graph)


def topological_order(graph: CompositionGraph) -> list[str]:
    """Providers before consumers; ties broken lexicographically."""
    deps = {s: set(graph.providers_of(s)) for s in graph.systems}
    done: list[str] = []
    placed: set[str] = set()
    remaining = set(deps)
    while remaining:
        ready = sorted(s for s in remaining if deps[s] <= placed)
        if not ready:
            raise CompositionError("CYCLE", "dependency cycle among " + ", ".join(sorted(remaining)))
        s = ready[0]
        done.append(s)
        placed.add(s)
        remaining.discard(s)
    return done


def _check_order(graph: CompositionGraph, order: Sequence[str]) -> None:
    if sorted(order) != sorted(graph.systems):
        raise EvaluationError("evaluation order must list every system exactly once")
    pos = {s: i for i, s in enumerate(order)}
    for s in graph.systems:
        for p in graph.providers_of(s):
            if pos[p] > pos[s]:
                raise EvaluationError(f"evaluation order puts {s} before its provider {p}")


def _rte_inputs(m: SystemManifest, rte_values: Mapping[tuple[str, str], Tri]) -> dict[str, bool]:
    return {r.label: rte_values.get((m.system_id, r.label), r.value).as_bool() for r in m.rtes}


def evaluate_composition(
    graph: CompositionGraph,
    catalog: Catalog,
    rte_values: Optional[Mapping[tuple[str, str], Tri]] = None,
    order: Optional[Iterable[str]] = None,
) -> EvaluationResult:
    """Evaluate every provided service, leaves first.

    A demand holds iff its slot is bound and the provider's achieved
    guarantee on the bound service matches it. RtEs missing from
    ``rte_values`` fall back to the declared value (unknown, hence false).
    ``order`` forces a particular valid topological order.
    """
    check_graph(graph)
    if order is None:
        order = topological_order(graph)
    else:
        order = list(order)
        _check_order(graph, order)
    rte_values = rte_values or {}
    results: dict[ServiceKey, ServiceResult] = {}

    for sid in order:
        m = graph.systems[sid]
        demand_vals: dict[str, bool] = {}
        matched: dict[str, ProviderRef] = {}
        for d in m.demands:
            binding = graph.bindings.get((sid, d.required_service))
            ok = False
            if binding is not None:
                prov = results[binding].achieved
                if prov is not None and match_demand(d, prov, catalog):
                    ok = True
                    matched[d.label] = ProviderRef(binding[0], binding[1], prov.order, prov.label)
            demand_vals[d.label] = ok
        assignment = Assignment(demand_vals, _rte_inputs(m, rte_values))

        for svc in m.provided:
            achieved = None
            for g, f in m.consert.for_service(svc):
                if evaluate_function(f, assignment):
                    achieved = (g, f)
                    break
            if achieved is None:
                trace = Trace(reason=NO_FUNCTION_SATISFIED)
                results[(sid, svc)] = ServiceResult(sid, svc, None, trace)
                continue
            g, f = achieved
            trace = Trace(
                assignment.restrict(f),
                {k: v for k, v in matched.items() if k in f.demands},
            )
            results[(sid, svc)] = ServiceResult(sid, svc, g, trace, g.expand(catalog))
    return EvaluationResult(results)


# --- explanation -----------------------------------------------------------

@dataclass(frozen=True)
class TraceNode:
    kind: str  # guarantee | demand | rte | none
    text: str
    children: tuple["TraceNode", ...] = ()

    def leaves(self) -> list["TraceNode"]:
        if not self.children:
            return [self]
        return [leaf for c in self.children for leaf in c.leaves()]

    def render(self, indent: int = 0) -> list[str]:
        lines = ["  " * indent + self.text]
        for c in self.children:
            lines += c.render(indent + 1)
        return lines


def explain(result: EvaluationResult, service: ServiceKey, graph: Optional[CompositionGraph] = None) -> TraceNode:
    """Substantiation tree for ``service``: guarantee <- demands <- provider guarantees <- ... <- RtEs.

    Only inputs that were true are shown. A constant-TRUE guarantee is a
    single node. ``graph`` is only needed to print the condition text.
    """
    if service not in result:
        raise EvaluationError(f"no result for {service[0]}.{service[1]}")

    def node(key: ServiceKey, seen: frozenset) -> TraceNode:
        r = result[key]
        head = f"{key[0]}.{key[1]}"
        if r.achieved is None:
            return TraceNode("none", f"{head}: no guarantee ({r.trace.reason})")
        g = r.achieved
        cond = ""
        if graph is not None and key[0] in graph.systems:
            for gg, f in graph.systems[key[0]].consert.for_service(key[1]):
                if gg.order == g.order:
                    cond = f" when {f}"
        kids: list[TraceNode] = []
        for label, v in r.trace.assignment.demand_values.items():
            if not v:
                continue
            prov = r.trace.providers[label]
            pkey = (prov.system_id, prov.service_type)
            sub = node(pkey, seen | {key}) if pkey not in seen else TraceNode("guarantee", f"{pkey[0]}.{pkey[1]} ...")
            kids.append(TraceNode("demand", f"demand {label} <- {prov}", (sub,)))
        for label, v in r.trace.assignment.rte_values.items():
            if v:
                kids.append(TraceNode("rte", f"rte {label} = true"))
        if not kids:
            cond = cond or " when TRUE"
        return TraceNode("guarantee", f"{head}: order {g.order} {g.label}{cond}", tuple(kids))

    return node(service, frozenset())
