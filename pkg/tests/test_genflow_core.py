"""Residual graphs, augmenting structures, and single augmentations."""

from fractions import Fraction

import pytest

from gainflow.errors import CapacityViolation
from gainflow.genflow import (CYCLE_THROUGH_SOURCE, LOLLIPOP, PATH_TO_SINK,
                              FlowNetwork, FlowState, INF, augment,
                              lp_cheapest_structure, max_step,
                              residual_adjacency, residual_edges,
                              solve_heights, structure_from_policy)

SINK = "t"


def bare_net(**kw):
    kw.setdefault("add_dummies", False)
    return FlowNetwork(SINK, **kw)


def test_residual_empty_flow():
    net = bare_net()
    net.add_vertex("u")
    net.add_vertex("v")
    e = net.add_edge("u", "v", cap=5.0, cost=3.0, gain=2.0)
    state = FlowState(net)
    res = residual_edges(net, state)
    assert len(res) == 1
    fwd = res[0]
    assert fwd.forward and fwd.tail == "u" and fwd.head == "v"
    assert fwd.cap == 5.0 and fwd.cost == 3.0 and fwd.gain == 2.0
    assert fwd.eid == e.eid


def test_residual_saturated_edge():
    net = bare_net()
    net.add_vertex("u")
    net.add_vertex("v")
    net.add_edge("u", "v", cap=5.0, cost=3.0, gain=2.0)
    state = FlowState(net)
    state.x[0] = 5.0
    res = residual_edges(net, state)
    assert len(res) == 1
    bwd = res[0]
    assert not bwd.forward and bwd.tail == "v" and bwd.head == "u"
    assert bwd.cap == pytest.approx(10.0)  # gain * x
    assert bwd.cost == 0.0
    assert bwd.gain == pytest.approx(0.5)


def test_residual_interior_flow_has_both_directions():
    net = bare_net()
    net.add_vertex("u")
    net.add_vertex("v")
    net.add_edge("u", "v", cap=5.0, cost=3.0, gain=2.0)
    state = FlowState(net)
    state.x[0] = 2.0
    res = {(r.forward): r for r in residual_edges(net, state)}
    assert res[True].cap == pytest.approx(3.0)
    assert res[False].cap == pytest.approx(4.0)


def test_residual_rejects_capacity_violation():
    net = bare_net()
    net.add_vertex("u")
    net.add_vertex("v")
    net.add_edge("u", "v", cap=5.0)
    state = FlowState(net)
    state.x[0] = 5.1
    with pytest.raises(CapacityViolation):
        residual_edges(net, state)


def test_single_path_structure_with_gain_composition():
    net = bare_net()
    net.add_vertex("a")
    net.add_source("s", [("a", INF, 1.0, 0.5)])
    net.add_edge("a", SINK, cap=1.0, cost=0.0, gain=1.0)
    state = FlowState(net)
    adj = residual_adjacency(residual_edges(net, state), sink=SINK)
    h, policy, ok = solve_heights(adj, net.vertices, SINK)
    assert ok
    f = structure_from_policy("s", policy, SINK)
    assert f.kind == PATH_TO_SINK
    assert f.cost == pytest.approx(1.0)
    mult = {net.edges[k[0]].head: v for k, v in f.flows.items()}
    assert mult["a"] == pytest.approx(1.0)
    assert mult[SINK] == pytest.approx(0.5)  # one unit out of s arrives halved


def lollipop_net():
    net = bare_net()
    net.add_vertex("a")
    net.add_vertex("b")
    net.add_source("s", [("a", INF, 1.0, 1.0)])
    net.add_edge("a", "b", cap=INF, cost=0.0, gain=0.5)
    net.add_edge("b", "a", cap=INF, cost=0.0, gain=0.5)
    return net


def lollipop_expected():
    # Independent oracle: unit excess at s, conservation at a and b, solved
    # exactly. f_ab = 1 + (1/2) f_ba and f_ba = (1/2) f_ab.
    f_ab = Fraction(1) / (1 - Fraction(1, 4))
    f_ba = f_ab / 2
    return f_ab, f_ba


def test_lollipop_structure_multipliers():
    net = lollipop_net()
    state = FlowState(net)
    adj = residual_adjacency(residual_edges(net, state), sink=SINK)
    h, policy, ok = solve_heights(adj, net.vertices, SINK)
    assert ok
    f = structure_from_policy("s", policy, SINK)
    assert f.kind == LOLLIPOP
    f_ab, f_ba = lollipop_expected()
    by_edge = {(net.edges[k[0]].tail, net.edges[k[0]].head): v for k, v in f.flows.items()}
    assert by_edge[("s", "a")] == pytest.approx(1.0)
    assert by_edge[("a", "b")] == pytest.approx(float(f_ab))
    assert by_edge[("b", "a")] == pytest.approx(float(f_ba))
    assert f.cost == pytest.approx(1.0)
    ex = f.excess()
    assert ex["s"] == pytest.approx(1.0)
    assert ex["a"] == pytest.approx(0.0, abs=1e-12)
    assert ex["b"] == pytest.approx(0.0, abs=1e-12)


def test_lollipop_matches_lp_route():
    net = lollipop_net()
    state = FlowState(net)
    res = residual_edges(net, state)
    cost, flows = lp_cheapest_structure(res, SINK, "s")
    assert cost == pytest.approx(1.0)


def test_zero_cost_direct_edge_gives_zero_structure():
    net = bare_net()
    net.add_source("s", [(SINK, INF, 0.0, 1.0)])
    state = FlowState(net)
    adj = residual_adjacency(residual_edges(net, state), sink=SINK)
    h, policy, ok = solve_heights(adj, net.vertices, SINK)
    assert ok and h["s"] == pytest.approx(0.0)


def test_cycle_through_source_kind():
    # The source's unit returns to it along backward residual edges of its
    # own prior out-flow, forming an absorbing cycle through the source.
    net = bare_net()
    net.add_vertex("a")
    net.add_vertex("b")
    net.add_edge("a", "b", cap=INF, cost=0.0, gain=1.0)
    net.add_edge("b", SINK, cap=1.0, cost=10.0, gain=1.0)
    net.add_source("s", [("a", INF, 1.0, 0.4), ("b", INF, 0.0, 1.0)])
    state = FlowState(net)
    by_pair = {(e.tail, e.head): e.eid for e in net.edges}
    state.x[by_pair[("s", "b")]] = 1.0  # prior unit: s -> b -> t
    state.x[by_pair[("b", SINK)]] = 1.0
    state.check_conservation()

    adj = residual_adjacency(residual_edges(net, state), sink=SINK)
    h, policy, ok = solve_heights(adj, net.vertices, SINK)
    assert ok
    f = structure_from_policy("s", policy, SINK)
    assert f.kind == CYCLE_THROUGH_SOURCE
    # cycle s -> a -> b -> (backward) s has gain 0.4, multiplier 1/0.6,
    # and only the first hop costs anything (c = 1).
    assert f.cost == pytest.approx(1.0 / 0.6)
    ex = f.excess()
    assert ex["s"] == pytest.approx(1.0)
    assert ex["a"] == pytest.approx(0.0, abs=1e-12)
    assert ex["b"] == pytest.approx(0.0, abs=1e-12)


def test_max_step_and_augment_roundtrip():
    net = bare_net()
    net.add_vertex("a")
    net.add_source("s", [("a", INF, 1.0, 0.5)])
    net.add_edge("a", SINK, cap=1.0, cost=0.0, gain=1.0)
    state = FlowState(net)
    adj = residual_adjacency(residual_edges(net, state), sink=SINK)
    _, policy, _ = solve_heights(adj, net.vertices, SINK)
    f = structure_from_policy("s", policy, SINK)

    # Unconstrained: supply binds.
    assert max_step(net, state, f, 1.0) == pytest.approx(1.0)
    # Supply smaller than capacities: supply binds.
    assert max_step(net, state, f, 0.3) == pytest.approx(0.3)

    paid = augment(net, state, f, 1.0)
    assert paid == pytest.approx(1.0)
    sent = state.source_sent("s")
    assert sent == pytest.approx(1.0)
    state.check_conservation()

    # The a->t edge now carries 0.5 of its unit capacity.
    loads = state.machine_like_loads()
    assert loads["a"] == pytest.approx(0.5)


def test_max_step_binding_capacity():
    net = bare_net()
    net.add_vertex("a")
    net.add_source("s", [("a", INF, 1.0, 1.0)])
    net.add_edge("a", SINK, cap=0.5, cost=0.0, gain=1.0)
    state = FlowState(net)
    adj = residual_adjacency(residual_edges(net, state), sink=SINK)
    _, policy, _ = solve_heights(adj, net.vertices, SINK)
    f = structure_from_policy("s", policy, SINK)
    assert max_step(net, state, f, 1.0) == pytest.approx(0.5)


def test_augment_zero_is_identity():
    net = lollipop_net()
    state = FlowState(net)
    adj = residual_adjacency(residual_edges(net, state), sink=SINK)
    _, policy, _ = solve_heights(adj, net.vertices, SINK)
    f = structure_from_policy("s", policy, SINK)
    before = state.copy_x()
    paid = augment(net, state, f, 0.0)
    assert paid == 0.0
    assert state.x == before


def test_lollipop_augment_full_unit():
    net = lollipop_net()
    state = FlowState(net)
    adj = residual_adjacency(residual_edges(net, state), sink=SINK)
    _, policy, _ = solve_heights(adj, net.vertices, SINK)
    f = structure_from_policy("s", policy, SINK)
    paid = augment(net, state, f, 1.0)
    f_ab, f_ba = lollipop_expected()
    by_edge = {(e.tail, e.head): state.x[e.eid] for e in net.edges}
    assert by_edge[("s", "a")] == pytest.approx(1.0)
    assert by_edge[("a", "b")] == pytest.approx(float(f_ab))
    assert by_edge[("b", "a")] == pytest.approx(float(f_ba))
    assert paid == pytest.approx(1.0)
    state.check_conservation()


def test_augment_then_reverse_restores_state():
    net = bare_net()
    net.add_vertex("a")
    net.add_source("s", [("a", INF, 1.0, 2.0)])
    net.add_edge("a", SINK, cap=10.0, cost=0.5, gain=1.0)
    state = FlowState(net)
    adj = residual_adjacency(residual_edges(net, state), sink=SINK)
    _, policy, _ = solve_heights(adj, net.vertices, SINK)
    f = structure_from_policy("s", policy, SINK)
    augment(net, state, f, 1.0)
    x_mid = state.copy_x()
    assert any(v > 0 for v in x_mid)

    # Reverse along the created backward edges: push the received amount back.
    res = residual_edges(net, state)
    back = [r for r in res if not r.forward]
    assert back
    from gainflow.genflow import apply_residual_flows
    flows = {}
    # Undo in reverse topological order of the path s->a->t; quantities are
    # the received amounts on each hop.
    for r in back:
        flows[r.key] = r.cap  # full undo
    apply_residual_flows(net, state, flows)
    assert all(abs(v) <= 1e-9 for v in state.x)


def test_split_structure_decomposes_lollipop():
    from gainflow.genflow import split_structure
    net = lollipop_net()
    state = FlowState(net)
    adj = residual_adjacency(residual_edges(net, state), sink=SINK)
    _, policy, _ = solve_heights(adj, net.vertices, SINK)
    f = structure_from_policy("s", policy, SINK)
    prefix, arriving, tail = split_structure(f, "a")
    assert [e.tail for e in prefix] == ["s"]
    assert arriving == pytest.approx(1.0)  # gain of s->a is 1
    assert tail.kind == "cycle_through_source"
    assert tail.source == "a"
    # flows recompose: f = prefix multipliers + arriving * tail multipliers
    prefix_keys = {e.key for e in prefix}
    for e in f.edges:
        expected = arriving * tail.flows.get(e.key, 0.0)
        if e.key in prefix_keys:
            expected = f.flows[e.key]
        assert f.flows[e.key] == pytest.approx(expected)
    assert f.cost == pytest.approx(
        sum(e.cost * f.flows[e.key] for e in prefix) + arriving * tail.cost)
    ex = tail.excess()
    assert ex["a"] == pytest.approx(1.0)


def test_split_structure_on_path():
    from gainflow.genflow import split_structure
    net = bare_net()
    net.add_vertex("a")
    net.add_source("s", [("a", INF, 1.0, 0.5)])
    net.add_edge("a", SINK, cap=INF, cost=2.0, gain=1.0)
    state = FlowState(net)
    adj = residual_adjacency(residual_edges(net, state), sink=SINK)
    _, policy, _ = solve_heights(adj, net.vertices, SINK)
    f = structure_from_policy("s", policy, SINK)
    prefix, arriving, tail = split_structure(f, "a")
    assert arriving == pytest.approx(0.5)
    assert tail.kind == "path_to_sink"
    assert tail.cost == pytest.approx(2.0)  # unit cost out of a
    assert f.cost == pytest.approx(1.0 + 0.5 * 2.0)
