"""Seeded random generators for condition functions, compositions and sessions."""

from __future__ import annotations

import random

from consert.events import Bind, Join, Leave, SetRte
from consert.model import (
    Catalog,
    CatalogProperty,
    CompositionGraph,
    ConditionFunction,
    ConSert,
    Demand,
    DemandRef,
    GateExpr,
    GateOp,
    Guarantee,
    IntegrityLevel,
    Mode,
    PropertyGuarantee,
    PropertyParams,
    RequiredSlot,
    RteKind,
    RteRef,
    RuntimeEvidence,
    ServiceType,
    SystemManifest,
    Tri,
    TRUE,
)

LEVELS = list(IntegrityLevel)
MODES = list(Mode)
WINDOWS = [None, 1, 5, 10, 30]


def random_function(rng: random.Random, demands, rtes, max_gates: int = 8, output: str = "G") -> ConditionFunction:
    """Random condition DAG over the given labels, with shared sub-graphs.

    Every input and gate reaches the output. No inputs gives constant TRUE.
    """
    inputs = [("demand", d) for d in demands] + [("rte", r) for r in rtes]
    out = ("out", output)
    if not inputs:
        return ConditionFunction.constant_true(output)
    if len(inputs) == 1 and rng.random() < 0.5:
        return ConditionFunction(frozenset(demands), frozenset(rtes), (), {(inputs[0], out)}, output)
    n_gates = rng.randint(1, max(1, max_gates))
    gates = [(f"g{i + 1}", rng.choice([GateOp.AND, GateOp.OR])) for i in range(n_gates)]
    edges = set()
    pool = list(inputs)
    for gid, _ in gates:
        node = ("gate", gid)
        for src in rng.sample(pool, rng.randint(1, min(4, len(pool)))):
            edges.add((src, node))
        pool.append(node)
    used = {src for src, _ in edges}
    gate_nodes = [("gate", g) for g, _ in gates]
    for idx, node in enumerate(pool[:-1]):
        if node not in used:
            first_later = max(0, idx - len(inputs) + 1)
            edges.add((node, rng.choice(gate_nodes[first_later:])))
    edges.add((gate_nodes[-1], out))
    return ConditionFunction(frozenset(demands), frozenset(rtes), tuple(gates), edges, output)


def random_expr(rng: random.Random, demands, rtes, depth: int = 3):
    leaves = [DemandRef(d) for d in demands] + [RteRef(r) for r in rtes]
    if not leaves:
        return TRUE
    if depth == 0 or rng.random() < 0.3:
        return rng.choice(leaves)
    n = rng.randint(1, 3)
    return GateExpr(rng.choice([GateOp.AND, GateOp.OR]), tuple(random_expr(rng, demands, rtes, depth - 1) for _ in range(n)))


def random_params(rng: random.Random) -> PropertyParams:
    return PropertyParams(rng.choice(WINDOWS), rng.choice(MODES))


# --- compositions ----------------------------------------------------------

def random_catalog(rng: random.Random, n_types: int = 3) -> Catalog:
    types = []
    for i in range(n_types):
        props = tuple(CatalogProperty(f"P{j}", random_params(rng)) for j in range(rng.randint(1, 3)))
        types.append(ServiceType(f"T{i}", props))
    return Catalog("Rand", tuple(types))


def _random_props(rng, catalog: Catalog, st: str, k: int):
    names = [p.name for p in catalog.service_type(st).properties]
    return tuple(
        PropertyGuarantee(rng.choice(names), random_params(rng), rng.choice(LEVELS)) for _ in range(k)
    )


def random_manifest(rng: random.Random, catalog: Catalog, system_id: str, default_prob: float = 0.6) -> SystemManifest:
    types = [st.name for st in catalog.service_types]
    provided = sorted(rng.sample(types, rng.randint(1, 2)))
    slots = [RequiredSlot(f"s{i}", rng.choice(types)) for i in range(rng.randint(0, 3))]
    demands = [
        Demand(f"D{i}", slot.name, slot.service_type, _random_props(rng, catalog, slot.service_type, rng.randint(0, 2)))
        for i, slot in enumerate(slots)
    ]
    rtes = [RuntimeEvidence(f"R{i}", rng.choice(list(RteKind))) for i in range(rng.randint(0, 3))]
    dlabels = [d.label for d in demands]
    rlabels = [r.label for r in rtes]
    pairs = []
    for st in provided:
        n = rng.randint(1, 3)
        for order in range(1, n + 1):
            label = f"G_{st}_{order}"
            g = Guarantee(
                st, order, rng.choice([None] + LEVELS), _random_props(rng, catalog, st, rng.randint(0, 2)), label
            )
            if order == n and rng.random() < default_prob:
                f = ConditionFunction.constant_true(label)
            else:
                ds = rng.sample(dlabels, rng.randint(0, len(dlabels)))
                rs = rng.sample(rlabels, rng.randint(0, len(rlabels)))
                f = random_function(rng, ds, rs, max_gates=4, output=label)
            pairs.append((g, f))
    return SystemManifest(system_id, tuple(provided), tuple(slots), tuple(rtes), tuple(demands), ConSert.from_pairs(pairs))


def random_composition(rng: random.Random, max_systems: int = 10):
    """(graph, catalog, rte_values) with a random acyclic binding structure."""
    catalog = random_catalog(rng)
    n = rng.randint(1, max_systems)
    ids = [f"S{i}" for i in range(n)]
    manifests = [random_manifest(rng, catalog, sid) for sid in ids]
    rank = list(range(n))
    rng.shuffle(rank)  # system i may only depend on systems of lower rank
    bindings = {}
    for i, m in enumerate(manifests):
        for slot in m.required:
            cands = [
                (manifests[j].system_id, slot.service_type)
                for j in range(n)
                if rank[j] < rank[i] and slot.service_type in manifests[j].provided
            ]
            if cands and rng.random() < 0.85:
                bindings[(m.system_id, slot.name)] = rng.choice(cands)
    rte_values = {
        (m.system_id, r.label): rng.choice(list(Tri)) for m in manifests for r in m.rtes
    }
    return CompositionGraph.of(manifests, bindings), catalog, rte_values


def random_topological_order(rng: random.Random, graph: CompositionGraph) -> list[str]:
    deps = {s: set(graph.providers_of(s)) for s in graph.systems}
    placed: set[str] = set()
    order = []
    while len(order) < len(deps):
        ready = [s for s in deps if s not in placed and deps[s] <= placed]
        s = rng.choice(sorted(ready))
        order.append(s)
        placed.add(s)
    return order


def random_events(rng: random.Random, manifests, n_events: int):
    """Event sequence over ``manifests``; some events will be rejected."""
    ids = [m.system_id for m in manifests]
    by_id = {m.system_id: m for m in manifests}
    events = []
    for _ in range(n_events):
        kind = rng.choices(["join", "leave", "bind", "rte"], weights=[3, 1, 4, 4])[0]
        sid = rng.choice(ids)
        m = by_id[sid]
        if kind == "join":
            events.append(Join(sid))
        elif kind == "leave":
            events.append(Leave(sid))
        elif kind == "bind" and m.required:
            slot = rng.choice(m.required)
            prov = by_id[rng.choice(ids)]
            svc = slot.service_type if slot.service_type in prov.provided or rng.random() < 0.7 else rng.choice(prov.provided)
            events.append(Bind(sid, slot.name, prov.system_id, svc))
        elif kind == "rte" and m.rtes:
            events.append(SetRte(sid, rng.choice(m.rtes).label, rng.choice(list(Tri))))
        else:
            events.append(Join(sid))
    return events
