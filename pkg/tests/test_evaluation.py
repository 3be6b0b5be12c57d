import random

import pytest
from hypothesis import given, settings, strategies as st

from consert.dsl import parse_guarantee_spec
from consert.evaluation import (
    NO_FUNCTION_SATISFIED,
    Assignment,
    CompositionError,
    EvaluationError,
    best_guarantee,
    evaluate_composition,
    evaluate_function,
    explain,
    match_demand,
)
from consert.model import (
    CompositionGraph,
    ConditionFunction,
    ConSert,
    Demand,
    DemandRef,
    GateExpr,
    GateOp,
    Guarantee,
    IntegrityLevel as L,
    PropertyGuarantee,
    PropertyParams,
    RteRef,
    SystemManifest,
    Tri,
)
from conftest import ROOT, all_rtes_true, tim_graph
from gen import LEVELS, random_composition, random_function, random_topological_order
from oracles import assignments, compile_source, graph_source


def demand(spec: str, label="D", slot="tractor") -> Demand:
    g = parse_guarantee_spec(spec.replace(":", "(1):", 1))
    return Demand(label, slot, g.service_type, g.properties)


def offer(spec: str, label="G") -> Guarantee:
    return parse_guarantee_spec(spec, label)


# --- match_demand -----------------------------------------------------------

def test_match_same_level(catalog):
    d = demand("TractorCtrl: SelfAcc{,Standstill}.AgPL = d")
    assert match_demand(d, offer("TractorCtrl(1): SelfAcc{,Standstill}.AgPL = d"), catalog)


def test_level_c_does_not_meet_level_d(catalog):
    d = demand("TractorCtrl: SelfAcc{,Standstill}.AgPL = d")
    assert not match_demand(d, offer("TractorCtrl(1): SelfAcc{,Standstill}.AgPL = c"), catalog)


def test_zero_property_demand_is_vacuous(catalog):
    d = Demand("D", "tractor", "TractorCtrl")
    assert match_demand(d, offer("TractorCtrl(3): AgPL = QM"), catalog)
    assert not match_demand(d, offer("Positioning(1): AgPL = QM"), catalog)


def test_shortcut_covers_demands(catalog):
    d = demand("TractorCtrl: SteerDev{,Moving}.AgPL = c")
    assert match_demand(d, offer("TractorCtrl(1): AgPL = c"), catalog)
    assert not match_demand(d, offer("TractorCtrl(1): AgPL = b"), catalog)


def test_window_dominance(catalog):
    d = demand("TractorCtrl: LateAcc{30s,Standstill}.AgPL = c")
    assert match_demand(d, offer("TractorCtrl(1): LateAcc{10s,Standstill}.AgPL = c"), catalog)
    assert not match_demand(d, offer("TractorCtrl(1): LateAcc{60s,Standstill}.AgPL = c"), catalog)
    assert not match_demand(d, offer("TractorCtrl(1): LateAcc{10s,Moving}.AgPL = c"), catalog)


def test_unknown_property_is_an_error(catalog):
    with pytest.raises(EvaluationError):
        match_demand(demand("TractorCtrl: SelfSteer{,Standstill}.AgPL = d"), offer("TractorCtrl(1): AgPL = d"), catalog)
    with pytest.raises(EvaluationError):
        match_demand(demand("TractorCtrl:"), offer("TractorCtrl(1): SelfSteer{,Moving}.AgPL = d"), catalog)


@settings(max_examples=300, deadline=None)
@given(st.data())
def test_match_is_monotone_in_guarantee(catalog, data):
    props = [(p.name, p.params) for p in catalog.service_type("TractorCtrl").properties]
    pick = st.sampled_from(props)
    lvl = st.sampled_from(LEVELS)
    d_props = data.draw(st.lists(st.tuples(pick, lvl), max_size=3))
    g_props = data.draw(st.lists(st.tuples(pick, lvl), min_size=1, max_size=3))
    d = Demand("D", "s", "TractorCtrl", tuple(PropertyGuarantee(n, p, l) for (n, p), l in d_props))
    base = tuple(PropertyGuarantee(n, p, l) for (n, p), l in g_props)
    shortcut = data.draw(st.one_of(st.none(), lvl))
    g = Guarantee("TractorCtrl", 1, shortcut, base)
    if not match_demand(d, g, catalog):
        return
    i = data.draw(st.integers(0, len(base) - 1))
    q = base[i]
    raised = PropertyGuarantee(q.property_type, q.params, max(q.level, data.draw(lvl)))
    window = q.params.window
    tighter = PropertyParams(None if window is None else data.draw(st.integers(0, window)), q.params.mode)
    tightened = PropertyGuarantee(q.property_type, tighter, q.level)
    for better in (raised, tightened):
        props2 = base[:i] + (better,) + base[i + 1:]
        assert match_demand(d, Guarantee("TractorCtrl", 1, shortcut, props2), catalog)


# --- evaluate_function ------------------------------------------------------

AND_D1_R1 = ConditionFunction.from_expr(GateExpr(GateOp.AND, (DemandRef("D1"), RteRef("R1"))), "G")


def test_conjunction_examples():
    assert evaluate_function(AND_D1_R1, Assignment({"D1": True}, {"R1": True}))
    assert not evaluate_function(AND_D1_R1, Assignment({"D1": True}, {"R1": False}))


def test_constant_true_on_empty_assignment():
    assert evaluate_function(ConditionFunction.constant_true("G"), Assignment())


def test_missing_label_raises():
    with pytest.raises(EvaluationError):
        evaluate_function(AND_D1_R1, Assignment({"D1": True}))


def test_extra_labels_are_ignored():
    assert evaluate_function(AND_D1_R1, Assignment({"D1": True, "X": False}, {"R1": True, "Y": False}))


def test_fixture_functions_match_oracle(manifests):
    for m in manifests.values():
        for _, f in m.consert.pairs():
            fn = compile_source(graph_source(f))
            for d, r in assignments(f.demands, f.rtes):
                assert evaluate_function(f, Assignment(d, r)) == fn(d, r)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32))
def test_random_functions_match_oracle(seed):
    rng = random.Random(seed)
    n = rng.randint(0, 8)
    labels = [f"x{i}" for i in range(n)]
    k = rng.randint(0, n)
    f = random_function(rng, labels[:k], labels[k:])
    fn = compile_source(graph_source(f))
    for d, r in assignments(f.demands, f.rtes):
        assert evaluate_function(f, Assignment(d, r)) == fn(d, r)


# --- best_guarantee ---------------------------------------------------------

def _consert(truths):
    pairs = []
    for order, val in enumerate(truths, 1):
        label = f"G{order}"
        f = ConditionFunction.from_expr(RteRef(f"R{order}"), label)
        pairs.append((Guarantee("Svc", order, L.a, (), label), f))
    rtes = {f"R{i}": v for i, v in enumerate(truths, 1)}
    return ConSert.from_pairs(pairs), Assignment({}, rtes)


def test_best_guarantee_first_true():
    c, a = _consert([False, True, True])
    assert best_guarantee(c, "Svc", a).order == 2
    c, a = _consert([False, False, False])
    assert best_guarantee(c, "Svc", a) is None


def test_default_tier_never_absent(manifests):
    m = manifests["Baler"]
    a = Assignment({d.label: False for d in m.demands}, {r.label: False for r in m.rtes})
    assert best_guarantee(m.consert, "TIMBalingSwSc", a).order == 3


# --- composition ------------------------------------------------------------

def test_tim_three_tiers(catalog):
    g = tim_graph()
    rtes = all_rtes_true(g)
    assert evaluate_composition(g, catalog, rtes)[ROOT].order == 1
    rtes[("Tractor", "GpsSafeArea")] = Tri.FALSE
    res = evaluate_composition(g, catalog, rtes)
    assert res[("Tractor", "TractorCtrl")].order == 2
    assert res[ROOT].order == 2
    g = tim_graph(["Baler", "Tractor", "Terminal"])
    assert evaluate_composition(g, catalog, all_rtes_true(g))[ROOT].order == 3


def test_unknown_rte_counts_as_false(catalog):
    g = tim_graph()
    rtes = all_rtes_true(g)
    rtes[("Tractor", "GpsSafeArea")] = Tri.UNKNOWN
    assert evaluate_composition(g, catalog, rtes)[ROOT].order == 2
    assert evaluate_composition(g, catalog)[ROOT].order == 3


def test_cycle_and_type_errors(manifests, catalog):
    bad = CompositionGraph.of(
        [manifests["Baler"], manifests["Terminal"]], {("Baler", "tractor"): ("Terminal", "VirtualTerminal")}
    )
    with pytest.raises(CompositionError) as info:
        evaluate_composition(bad, catalog)
    assert info.value.code == "TYPE_MISMATCH"

    loop = SystemManifest("Loop", ("TractorCtrl",), manifests["Baler"].required[2:], consert=ConSert.from_pairs(
        [(Guarantee("TractorCtrl", 1, label="L1"), ConditionFunction.constant_true("L1"))]))
    g = CompositionGraph.of(
        [manifests["Baler"], loop],
        {("Baler", "tractor"): ("Loop", "TractorCtrl"), ("Loop", "tractor"): ("Loop", "TractorCtrl")},
    )
    with pytest.raises(CompositionError) as info:
        evaluate_composition(g, catalog)
    assert info.value.code == "CYCLE"


def test_explicit_order_must_be_topological(catalog):
    g = tim_graph()
    with pytest.raises(EvaluationError):
        evaluate_composition(g, catalog, order=["Baler", "Tractor", "Terminal", "SwathScanner"])


def test_trace_records_providers(catalog):
    g = tim_graph()
    res = evaluate_composition(g, catalog, all_rtes_true(g))
    trace = res[ROOT].trace
    assert trace.providers["D_tractor_d"].label == "T_high"
    assert dict(trace.assignment.demand_values) == {"D_swath": True, "D_terminal": True, "D_tractor_d": True}


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32))
def test_order_invariance(seed):
    rng = random.Random(seed)
    graph, cat, rtes = random_composition(rng)
    base = evaluate_composition(graph, cat, rtes)
    for _ in range(5):
        assert evaluate_composition(graph, cat, rtes, order=random_topological_order(rng, graph)) == base


def _dependents(graph, sid):
    out, todo = set(), [sid]
    while todo:
        for d in graph.dependents_of(todo.pop()):
            if d not in out:
                out.add(d)
                todo.append(d)
    return out


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32))
def test_locality(seed):
    rng = random.Random(seed)
    graph, cat, rtes = random_composition(rng)
    base = evaluate_composition(graph, cat, rtes)
    target = rng.choice(sorted(graph.systems))
    m = graph.systems[target]
    # swap in a ConSert that always grants its worst guarantee
    pairs = []
    for svc in m.provided:
        levels = m.consert.for_service(svc)
        for g, _ in levels:
            pairs.append((g, ConditionFunction.constant_true(g.label)))
    changed = SystemManifest(m.system_id, m.provided, m.required, m.rtes, m.demands, ConSert.from_pairs(pairs))
    systems = dict(graph.systems)
    systems[target] = changed
    new = evaluate_composition(CompositionGraph(systems, dict(graph.bindings)), cat, rtes)
    affected = _dependents(graph, target) | {target}
    for key, r in base.services.items():
        if key[0] not in affected:
            assert new[key] == r


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32))
def test_single_flip_never_degrades(seed):
    rng = random.Random(seed)
    m_labels = [f"x{i}" for i in range(rng.randint(1, 6))]
    pairs = []
    for order in (1, 2, 3):
        label = f"G{order}"
        f = random_function(rng, [], rng.sample(m_labels, rng.randint(1, len(m_labels))), output=label)
        pairs.append((Guarantee("Svc", order, label=label), f))
    c = ConSert.from_pairs(pairs)
    vals = {x: rng.random() < 0.5 for x in m_labels}
    before = best_guarantee(c, "Svc", Assignment({}, vals))
    for x in [k for k, v in vals.items() if not v]:
        after = best_guarantee(c, "Svc", Assignment({}, {**vals, x: True}))
        if before is not None:
            assert after is not None and after.order <= before.order


# --- explain ----------------------------------------------------------------

def test_explain_full_tier(catalog):
    g = tim_graph()
    res = evaluate_composition(g, catalog, all_rtes_true(g))
    tree = explain(res, ROOT, g)
    assert tree.text.startswith("Baler.TIMBalingSwSc: order 1 G_full when AND(")
    for leaf in tree.leaves():
        assert leaf.kind == "rte" or leaf.text.endswith(" when TRUE"), leaf.text
    assert {l.text for l in tree.leaves() if l.kind == "rte"} >= {"rte GpsSafeArea = true", "rte BrakeMonitor = true"}


def test_explain_default_tier_is_single_node(catalog):
    g = tim_graph(["Baler"])
    res = evaluate_composition(g, catalog)
    tree = explain(res, ROOT, g)
    assert tree.children == ()
    assert tree.text == "Baler.TIMBalingSwSc: order 3 G_default when TRUE"


def test_explain_absent_guarantee(catalog, manifests):
    m = manifests["Terminal"]
    only_checked = ConSert.from_pairs(m.consert.pairs()[:1])
    t = SystemManifest(m.system_id, m.provided, m.required, m.rtes, m.demands, only_checked)
    g = CompositionGraph.of([t])
    res = evaluate_composition(g, catalog)
    key = ("Terminal", "VirtualTerminal")
    assert res[key].achieved is None and res[key].trace.reason == NO_FUNCTION_SATISFIED
    tree = explain(res, key)
    assert tree.kind == "none" and NO_FUNCTION_SATISFIED in tree.text
    with pytest.raises(EvaluationError):
        explain(res, ("Nope", "X"))
