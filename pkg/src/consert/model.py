"""Core value types: integrity levels, guarantees, demands, condition functions.

Everything here is an immutable value. Collections that are semantically
sets (provided services, slots, labels) are normalised to sorted tuples at
construction so that equality does not depend on declaration order.
"""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping, Optional, Union


class ModelError(ValueError):
    """Raised when a value violates a structural invariant."""


@dataclass(frozen=True)
class Loc:
    line: int
    col: int


def _loc() -> Optional[Loc]:
    return field(default=None, compare=False, repr=False)


class Ordering(enum.Enum):
    LESS = "less"
    EQUAL = "equal"
    GREATER = "greater"


@functools.total_ordering
class IntegrityLevel(enum.Enum):
    """Agricultural performance level, QM (no safety relevance) up to e."""

    QM = "QM"
    a = "a"
    b = "b"
    c = "c"
    d = "d"
    e = "e"

    @property
    def rank(self) -> int:
        return _LEVEL_RANK[self]

    def __lt__(self, other):
        if not isinstance(other, IntegrityLevel):
            return NotImplemented
        return self.rank < other.rank

    def __str__(self) -> str:
        return self.value

    @classmethod
    def parse(cls, text: str) -> "IntegrityLevel":
        try:
            return cls(text)
        except ValueError:
            raise ModelError(f"unknown integrity level {text!r}") from None


_LEVEL_RANK = {lvl: i for i, lvl in enumerate(IntegrityLevel)}


def compare_levels(x: IntegrityLevel, y: IntegrityLevel) -> Ordering:
    if x.rank < y.rank:
        return Ordering.LESS
    if x.rank > y.rank:
        return Ordering.GREATER
    return Ordering.EQUAL


class Mode(enum.Enum):
    STANDSTILL = "Standstill"
    MOVING = "Moving"
    ANY = "Any"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class PropertyParams:
    """Refinement parameters of a safety property.

    ``window`` is a detection/tolerance window in whole seconds; ``None``
    stands for an unbounded window (the empty first slot in ``{,Standstill}``).
    """

    window: Optional[int]
    mode: Mode

    def __post_init__(self):
        if self.window is not None and self.window < 0:
            raise ModelError("window must be non-negative")

    def __str__(self) -> str:
        slot = "" if self.window is None else f"{self.window}s"
        return f"{{{slot},{self.mode}}}"


def params_dominate(offered: PropertyParams, demanded: PropertyParams) -> bool:
    """True iff ``offered`` parameters are at least as strong as ``demanded``.

    Mode must match exactly unless the demand accepts ``Any``. A smaller
    window is stronger; an unbounded offer covers everything, an unbounded
    demand is only met by an unbounded offer.
    """
    if demanded.mode is not Mode.ANY and offered.mode is not demanded.mode:
        return False
    if offered.window is None:
        return True
    if demanded.window is None:
        return False
    return offered.window <= demanded.window


@dataclass(frozen=True)
class PropertyGuarantee:
    property_type: str
    params: PropertyParams
    level: IntegrityLevel
    loc: Optional[Loc] = _loc()

    def __str__(self) -> str:
        return f"{self.property_type}{self.params}.AgPL = {self.level}"


@dataclass(frozen=True)
class CatalogProperty:
    name: str
    params: PropertyParams
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class ServiceType:
    name: str
    properties: tuple[CatalogProperty, ...] = ()
    loc: Optional[Loc] = _loc()

    def __post_init__(self):
        object.__setattr__(
            self, "properties", tuple(sorted(self.properties, key=lambda p: p.name))
        )

    def property(self, name: str) -> Optional[CatalogProperty]:
        for p in self.properties:
            if p.name == name:
                return p
        return None


@dataclass(frozen=True)
class Catalog:
    """Service types and the safety property types each one carries."""

    name: str
    service_types: tuple[ServiceType, ...] = ()
    loc: Optional[Loc] = _loc()

    def __post_init__(self):
        object.__setattr__(
            self, "service_types", tuple(sorted(self.service_types, key=lambda s: s.name))
        )

    def service_type(self, name: str) -> Optional[ServiceType]:
        for st in self.service_types:
            if st.name == name:
                return st
        return None

    def has_property(self, service_type: str, prop: str) -> bool:
        st = self.service_type(service_type)
        return st is not None and st.property(prop) is not None


@dataclass(frozen=True)
class Guarantee:
    service_type: str
    order: int
    service_level: Optional[IntegrityLevel] = None
    properties: tuple[PropertyGuarantee, ...] = ()
    label: str = ""
    loc: Optional[Loc] = _loc()

    def __post_init__(self):
        object.__setattr__(self, "properties", tuple(self.properties))

    @property
    def key(self) -> tuple[str, int]:
        return (self.service_type, self.order)

    def expand(self, catalog: Catalog) -> "Guarantee":
        """Apply the service-level shortcut against ``catalog``.

        Each cataloged property of the service type that is not already
        stated explicitly (same type and parameters) is added at the service
        level. Explicit statements win. Idempotent.
        """
        if self.service_level is None:
            return self
        st = catalog.service_type(self.service_type)
        if st is None:
            raise ModelError(f"service type {self.service_type!r} not in catalog")
        present = {(p.property_type, p.params) for p in self.properties}
        extra = tuple(
            PropertyGuarantee(cp.name, cp.params, self.service_level)
            for cp in st.properties
            if (cp.name, cp.params) not in present
        )
        if not extra:
            return self
        return Guarantee(
            self.service_type,
            self.order,
            self.service_level,
            self.properties + extra,
            self.label,
            self.loc,
        )


@dataclass(frozen=True)
class Demand:
    label: str
    required_service: str
    service_type: str
    properties: tuple[PropertyGuarantee, ...] = ()
    loc: Optional[Loc] = _loc()

    def __post_init__(self):
        object.__setattr__(self, "properties", tuple(self.properties))


class RteKind(enum.Enum):
    INTRA = "intra-device"
    INTER = "inter-device"

    def __str__(self) -> str:
        return self.value


class Tri(enum.Enum):
    TRUE = "true"
    FALSE = "false"
    UNKNOWN = "unknown"

    def __str__(self) -> str:
        return self.value

    def as_bool(self) -> bool:
        # unknown is treated as not established
        return self is Tri.TRUE


@dataclass(frozen=True)
class RuntimeEvidence:
    label: str
    kind: RteKind
    value: Tri = Tri.UNKNOWN
    loc: Optional[Loc] = _loc()


# --- condition functions -------------------------------------------------

class GateOp(enum.Enum):
    AND = "AND"
    OR = "OR"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Const:
    """Literal ``TRUE``."""

    def __str__(self) -> str:
        return "TRUE"


@dataclass(frozen=True)
class DemandRef:
    label: str

    def __str__(self) -> str:
        return f"demand {self.label}"


@dataclass(frozen=True)
class RteRef:
    label: str

    def __str__(self) -> str:
        return f"rte {self.label}"


@dataclass(frozen=True)
class GateExpr:
    op: GateOp
    inputs: tuple["Expr", ...]

    def __str__(self) -> str:
        return f"{self.op}({', '.join(str(i) for i in self.inputs)})"


Expr = Union[Const, DemandRef, RteRef, GateExpr]

TRUE = Const()


def canonical_expr(expr):
    """Normal form: gate inputs sorted and deduplicated, TRUE folded away.

    TRUE is neutral under AND and absorbing under OR.
    """
    if not isinstance(expr, GateExpr):
        return expr
    kids = {}
    for k in (canonical_expr(i) for i in expr.inputs):
        if isinstance(k, Const):
            if expr.op is GateOp.OR:
                return TRUE
            continue
        kids[str(k)] = k
    if not kids:
        return TRUE
    return GateExpr(expr.op, tuple(kids[t] for t in sorted(kids)))


# Graph nodes are (kind, name) pairs; kind in {"demand", "rte", "gate", "out"}.
Node = tuple[str, str]


@dataclass(frozen=True)
class ConditionFunction:
    """Boolean DAG gating one guarantee.

    ``demands`` and ``rtes`` are the input variables, ``gates`` maps gate ids
    to AND/OR, ``edges`` run from inputs/gates to gates or to the single
    output node ``("out", output)``. No edge into the output means constant
    TRUE.
    """

    demands: frozenset[str]
    rtes: frozenset[str]
    gates: tuple[tuple[str, GateOp], ...]
    edges: frozenset[tuple[Node, Node]]
    output: str
    loc: Optional[Loc] = _loc()

    def __post_init__(self):
        object.__setattr__(self, "demands", frozenset(self.demands))
        object.__setattr__(self, "rtes", frozenset(self.rtes))
        object.__setattr__(self, "gates", tuple(sorted(self.gates)))
        object.__setattr__(self, "edges", frozenset(self.edges))

    @classmethod
    def constant_true(cls, output: str, loc: Optional[Loc] = None) -> "ConditionFunction":
        return cls(frozenset(), frozenset(), (), frozenset(), output, loc)

    @classmethod
    def from_expr(cls, expr, output: str, loc: Optional[Loc] = None) -> "ConditionFunction":
        """Build the DAG for a prefix expression.

        Structurally identical subexpressions collapse to one node, and gate
        ids are assigned in post-order over the canonical expression, so the
        result depends only on the expression's meaning up to input order.
        """
        expr = canonical_expr(expr)
        demands: set[str] = set()
        rtes: set[str] = set()
        gates: dict[GateExpr, str] = {}
        edges: set[tuple[Node, Node]] = set()

        def visit(e) -> Optional[Node]:
            if isinstance(e, Const):
                return None
            if isinstance(e, DemandRef):
                demands.add(e.label)
                return ("demand", e.label)
            if isinstance(e, RteRef):
                rtes.add(e.label)
                return ("rte", e.label)
            if e in gates:
                return ("gate", gates[e])
            kids = [visit(i) for i in e.inputs]
            gid = f"g{len(gates) + 1}"
            gates[e] = gid
            node = ("gate", gid)
            for k in kids:
                edges.add((k, node))
            return node

        top = visit(expr)
        if top is not None:
            edges.add((top, ("out", output)))
        return cls(
            frozenset(demands),
            frozenset(rtes),
            tuple((gid, g.op) for g, gid in gates.items()),
            frozenset(edges),
            output,
            loc,
        )

    @property
    def out_node(self) -> Node:
        return ("out", self.output)

    @property
    def is_constant_true(self) -> bool:
        return not self.edges and not self.demands and not self.rtes and not self.gates

    @property
    def gate_ops(self) -> Mapping[str, GateOp]:
        return MappingProxyType(dict(self.gates))

    def predecessors(self) -> dict[Node, list[Node]]:
        preds: dict[Node, list[Node]] = {}
        for src, dst in sorted(self.edges):
            preds.setdefault(dst, []).append(src)
        return preds

    def nodes(self) -> list[Node]:
        out = [("demand", d) for d in sorted(self.demands)]
        out += [("rte", r) for r in sorted(self.rtes)]
        out += [("gate", g) for g, _ in self.gates]
        out.append(self.out_node)
        return out

    def topological_nodes(self) -> tuple[Node, ...]:
        """Nodes in evaluation order; raises ModelError on a cycle."""
        return _topo_nodes(self)

    def to_expr(self):
        """Recover the (canonical) prefix expression; requires acyclicity."""
        self.topological_nodes()
        preds = self.predecessors()
        ops = dict(self.gates)

        def build(n: Node):
            kind, name = n
            if kind == "demand":
                return DemandRef(name)
            if kind == "rte":
                return RteRef(name)
            return GateExpr(ops[name], tuple(build(p) for p in preds.get(n, [])))

        ins = preds.get(self.out_node, [])
        if not ins:
            return TRUE
        if len(ins) > 1:
            raise ModelError("output has more than one incoming edge")
        return canonical_expr(build(ins[0]))

    def __str__(self) -> str:
        return str(self.to_expr())


@functools.lru_cache(maxsize=4096)
def _topo_nodes(f: ConditionFunction) -> tuple[Node, ...]:
    nodes = f.nodes()
    known = set(nodes)
    indeg = {n: 0 for n in nodes}
    succ: dict[Node, list[Node]] = {n: [] for n in nodes}
    for src, dst in f.edges:
        if src not in known or dst not in known:
            raise ModelError(f"edge {src}->{dst} references an undeclared node")
        succ[src].append(dst)
        indeg[dst] += 1
    ready = sorted(n for n in nodes if indeg[n] == 0)
    order: list[Node] = []
    while ready:
        n = ready.pop()
        order.append(n)
        for m in succ[n]:
            indeg[m] -= 1
            if indeg[m] == 0:
                ready.append(m)
    if len(order) != len(nodes):
        stuck = sorted(n[1] for n in nodes if indeg[n] > 0 and n[0] == "gate")
        raise ModelError(f"condition graph has a cycle through gates {', '.join(stuck)}")
    return tuple(order)


def structural_problems(f: ConditionFunction) -> list[tuple[str, str]]:
    """(code, message) pairs for every violated condition-graph invariant."""
    problems: list[tuple[str, str]] = []
    known = set(f.nodes())
    for src, dst in sorted(f.edges):
        if src not in known or dst not in known:
            problems.append(("DANGLING_EDGE", f"edge {src[1]} -> {dst[1]} references an undeclared node"))
        if src == f.out_node:
            problems.append(("OUTPUT_HAS_SUCCESSOR", "the output node must not feed other nodes"))
        if dst[0] in ("demand", "rte"):
            problems.append(("EDGE_INTO_INPUT", f"edge into input {dst[0]} {dst[1]}"))
    if problems:
        return problems
    preds = f.predecessors()
    for gid, op in f.gates:
        if not isinstance(op, GateOp):
            problems.append(("UNKNOWN_GATE", f"gate {gid} has unsupported operator {op!r}"))
        if not preds.get(("gate", gid)):
            problems.append(("GATE_ARITY", f"gate {gid} has no inputs"))
    if len(preds.get(f.out_node, [])) > 1:
        problems.append(("MULTIPLE_OUTPUTS", f"output {f.output} has more than one incoming edge"))
    try:
        f.topological_nodes()
    except ModelError as exc:
        problems.append(("CYCLIC_CONDITION", str(exc)))
        return problems
    # every node must reach the output
    succ: dict[Node, list[Node]] = {}
    for src, dst in f.edges:
        succ.setdefault(src, []).append(dst)
    reaches = {f.out_node}
    for n in reversed(f.topological_nodes()):
        if any(m in reaches for m in succ.get(n, [])):
            reaches.add(n)
    for n in f.nodes():
        if n not in reaches:
            problems.append(("UNREACHABLE_INPUT", f"{n[0]} {n[1]} does not reach the output"))
    return problems


@dataclass(frozen=True)
class ServiceConSert:
    service_type: str
    levels: tuple[tuple[Guarantee, ConditionFunction], ...]

    def __post_init__(self):
        object.__setattr__(
            self, "levels", tuple(sorted(self.levels, key=lambda gf: (gf[0].order, gf[0].label)))
        )

    @property
    def guarantees(self) -> tuple[Guarantee, ...]:
        return tuple(g for g, _ in self.levels)


@dataclass(frozen=True)
class ConSert:
    """Per provided service, guarantees in order 1..n with their condition functions."""

    services: tuple[ServiceConSert, ...] = ()

    def __post_init__(self):
        object.__setattr__(
            self, "services", tuple(sorted(self.services, key=lambda s: s.service_type))
        )

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[Guarantee, ConditionFunction]]) -> "ConSert":
        grouped: dict[str, list[tuple[Guarantee, ConditionFunction]]] = {}
        for g, f in pairs:
            grouped.setdefault(g.service_type, []).append((g, f))
        return cls(tuple(ServiceConSert(st, tuple(v)) for st, v in grouped.items()))

    def for_service(self, service_type: str) -> tuple[tuple[Guarantee, ConditionFunction], ...]:
        for s in self.services:
            if s.service_type == service_type:
                return s.levels
        return ()

    def pairs(self) -> list[tuple[Guarantee, ConditionFunction]]:
        return [gf for s in self.services for gf in s.levels]


@dataclass(frozen=True)
class RequiredSlot:
    name: str
    service_type: str
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class SystemManifest:
    """A system's dependability identity: what it offers, needs and observes."""

    system_id: str
    provided: tuple[str, ...] = ()
    required: tuple[RequiredSlot, ...] = ()
    rtes: tuple[RuntimeEvidence, ...] = ()
    demands: tuple[Demand, ...] = ()
    consert: ConSert = ConSert()
    loc: Optional[Loc] = _loc()

    def __post_init__(self):
        object.__setattr__(self, "provided", tuple(sorted(self.provided)))
        object.__setattr__(self, "required", tuple(sorted(self.required, key=lambda s: s.name)))
        object.__setattr__(self, "rtes", tuple(sorted(self.rtes, key=lambda r: r.label)))
        object.__setattr__(self, "demands", tuple(sorted(self.demands, key=lambda d: d.label)))

    def slot(self, name: str) -> Optional[RequiredSlot]:
        for s in self.required:
            if s.name == name:
                return s
        return None

    def demand(self, label: str) -> Optional[Demand]:
        for d in self.demands:
            if d.label == label:
                return d
        return None

    def rte(self, label: str) -> Optional[RuntimeEvidence]:
        for r in self.rtes:
            if r.label == label:
                return r
        return None


ServiceKey = tuple[str, str]  # (system_id, service_type)
SlotKey = tuple[str, str]  # (system_id, slot name)


@dataclass(frozen=True)
class CompositionGraph:
    """Live systems, slot bindings and the application (root) service.

    Invariants are checked by :func:`consert.evaluation.check_graph`, not at
    construction, so that a broken graph can still be reported on.
    """

    systems: Mapping[str, SystemManifest]
    bindings: Mapping[SlotKey, ServiceKey] = field(default_factory=dict)
    root: Optional[ServiceKey] = None

    def __post_init__(self):
        object.__setattr__(self, "systems", MappingProxyType(dict(sorted(self.systems.items()))))
        object.__setattr__(self, "bindings", MappingProxyType(dict(sorted(self.bindings.items()))))

    @classmethod
    def of(cls, systems: Iterable[SystemManifest], bindings=None, root=None) -> "CompositionGraph":
        return cls({m.system_id: m for m in systems}, dict(bindings or {}), root)

    def providers_of(self, system_id: str) -> list[str]:
        """Distinct systems that ``system_id`` directly depends on."""
        return sorted({p for (c, _), (p, _) in self.bindings.items() if c == system_id})

    def dependents_of(self, system_id: str) -> list[str]:
        return sorted({c for (c, _), (p, _) in self.bindings.items() if p == system_id})
