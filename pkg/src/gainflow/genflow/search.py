"""Cheapest augmenting structures in a residual graph with gains.

A unit of excess leaves a vertex either along a simple path to the sink, or
into a flow-absorbing cycle (gain product < 1), possibly reached through an
access path. The cost of the cheapest such structure from v is the vertex's
*height*. Heights satisfy the one-step recursion

    h(sink) = 0,     h(v) = min over residual edges vu of  cost + gain * h(u)

with absorbing cycles supplying finite fixed points of their own. Two
solvers are provided:

* :func:`solve_heights` — policy iteration over out-edge choices, with exact
  cycle evaluation in closed form. Each vertex needs at least one escape
  route to the sink (the engine's dummy edges guarantee one); a safeguarded
  improvement step reverts switches that would create non-absorbing cycles,
  and the result is certified against the recursion before use.
* :func:`lp_cheapest_structure` — the same optimum as a small LP, used as an
  independent route and as a fallback when certification fails.

Both return genuinely optimal structures; ties are broken deterministically
(policy iteration prefers the smallest residual-edge key).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..errors import Infeasible
from ..simplex import solve_lp

INF = math.inf

PATH_TO_SINK = "path_to_sink"
CYCLE_THROUGH_SOURCE = "cycle_through_source"
LOLLIPOP = "lollipop"

# Gain products this close to 1 cannot absorb flow at sane multipliers.
_ABSORB_TOL = 1e-12


@dataclass
class AugmentingStructure:
    kind: str
    source: object
    cost: float
    flows: dict = field(default_factory=dict)  # residual key -> multiplier
    edges: list = field(default_factory=list)  # traversal order, path then cycle

    def excess(self):
        """Net out-excess per vertex implied by the multipliers (test hook)."""
        ex = {}
        for re, f in ((e, self.flows[e.key]) for e in self.edges):
            ex[re.tail] = ex.get(re.tail, 0.0) + f
            ex[re.head] = ex.get(re.head, 0.0) - re.gain * f
        return ex


def _evaluate(policy, sink, vertices):
    """Exact value of one policy: chase chains, solving cycles in closed form."""
    h = {sink: 0.0}
    for start in vertices:
        if start in h:
            continue
        visiting = {}
        stack = []
        u = start
        while True:
            if u in h:
                val = h[u]
                for w in reversed(stack):
                    e = policy[w]
                    val = e.cost + e.gain * val if val != INF else INF
                    h[w] = val
                break
            if u in visiting:
                ci = visiting[u]
                cycle = stack[ci:]
                g, cost = 1.0, 0.0
                for w in cycle:
                    e = policy[w]
                    cost += g * e.cost
                    g *= e.gain
                h[u] = cost / (1.0 - g) if g < 1.0 - _ABSORB_TOL else INF
                for w in reversed(cycle[1:]):
                    e = policy[w]
                    nxt = h[e.head]
                    h[w] = e.cost + e.gain * nxt if nxt != INF else INF
                val = h[u]
                for w in reversed(stack[:ci]):
                    e = policy[w]
                    nxt = h[e.head]
                    h[w] = e.cost + e.gain * nxt if nxt != INF else INF
                break
            e = policy.get(u)
            if e is None:
                h[u] = INF
                for w in reversed(stack):
                    h[w] = INF
                break
            visiting[u] = len(stack)
            stack.append(u)
            u = e.head
    return h


def _one_step(adj, h):
    """Greedy lookahead: best (value, edge) per vertex, smallest key on ties."""
    best = {}
    for v, edges in adj.items():
        bv, be = INF, None
        for e in edges:
            hu = h.get(e.head, INF)
            val = e.cost + e.gain * hu if hu != INF else INF
            if val < bv:
                bv, be = val, e
        best[v] = (bv, be)
    return best


def solve_heights(adj, vertices, sink, *, tol=1e-10, max_rounds=None):
    """Heights of every vertex plus the optimal out-edge policy.

    Returns (heights, policy, certified). ``certified`` is False when the
    safeguarded iteration hit its round cap or the final values fail the
    one-step recursion; callers should then fall back to the LP route.
    """
    verts = [v for v in vertices if v != sink]
    if max_rounds is None:
        max_rounds = 10 * max(len(verts), 1) + 60

    policy = {}
    for v in verts:
        edges = adj.get(v)
        if not edges:
            continue
        to_sink = [e for e in edges if e.head == sink]
        policy[v] = min(to_sink, key=lambda e: (e.cost, e.key)) if to_sink else edges[0]
    h = _evaluate(policy, sink, verts)

    certified = False
    for _ in range(max_rounds):
        best = _one_step(adj, h)
        switched = []
        for v in verts:
            bv, be = best.get(v, (INF, None))
            if be is not None and bv < h.get(v, INF) - tol * max(1.0, abs(bv)):
                switched.append((v, be))
        if not switched:
            certified = True
            break
        trial = dict(policy)
        for v, e in switched:
            trial[v] = e
        h2 = _evaluate(trial, sink, verts)
        while True:
            worse = [v for v, _ in switched
                     if h2.get(v, INF) > h.get(v, INF) + tol * max(1.0, abs(h.get(v, 0.0)))
                     and not (h2.get(v, INF) == INF and h.get(v, INF) == INF)]
            if not worse:
                break
            for v in worse:
                if v in policy:
                    trial[v] = policy[v]
                else:
                    del trial[v]
            switched = [(v, e) for v, e in switched if v not in worse]
            h2 = _evaluate(trial, sink, verts)
            if not switched:
                break
        if not switched:
            certified = True  # no safe improvement; verify below
            break
        policy, h = trial, h2

    if certified:
        best = _one_step(adj, h)
        for v in verts:
            hv = h.get(v, INF)
            bv = best.get(v, (INF, None))[0]
            if bv < hv - 1e-6 * max(1.0, abs(hv)) or (bv == INF) != (hv == INF):
                certified = False
                break
    return h, policy, certified


def structure_from_policy(source, policy, sink, heights=None):
    """Trace the optimal policy from ``source`` into a path / cycle /
    lollipop and solve its multipliers in closed form."""
    seen = {}
    walk = []
    u = source
    while True:
        if u == sink:
            return _build(PATH_TO_SINK, source, walk, len(walk))
        if u in seen:
            split = seen[u]
            kind = CYCLE_THROUGH_SOURCE if split == 0 else LOLLIPOP
            return _build(kind, source, walk, split)
        e = policy.get(u)
        if e is None:
            raise Infeasible(f"no augmenting structure from {source!r}")
        seen[u] = len(walk)
        walk.append(e)
        u = e.head


def _build(kind, source, walk, split):
    path, cycle = walk[:split], walk[split:]
    flows = {}
    carry = 1.0
    for e in path:
        flows[e.key] = carry
        carry *= e.gain
    if cycle:
        g = 1.0
        for e in cycle:
            g *= e.gain
        if g >= 1.0 - _ABSORB_TOL:
            raise Infeasible("policy walk ended in a non-absorbing cycle")
        f = carry / (1.0 - g)
        for e in cycle:
            flows[e.key] = f
            f *= e.gain
    cost = sum(e.cost * flows[e.key] for e in walk)
    return AugmentingStructure(kind, source, cost, flows, list(walk))


def split_structure(f: AugmentingStructure, v):
    """Break a structure at an interior vertex: a unit flow path from the
    source to ``v`` plus the remaining structure from ``v`` scaled by the
    amount arriving there. Returns (prefix_edges, arriving, tail_structure)
    with flows(f) = flows(prefix) + arriving * flows(tail_structure) and the
    same cost split. Test hook for the height-monotonicity argument."""
    if v == f.source:
        raise ValueError("split point must be interior")
    arriving = 1.0
    prefix = []
    for idx, e in enumerate(f.edges):
        if e.tail == v:
            break
        prefix.append(e)
        arriving *= e.gain
    else:
        raise ValueError(f"{v!r} is not on the structure's walk")
    tail = f.edges[idx:]
    tail_flows = {e.key: f.flows[e.key] / arriving for e in tail}
    # classify the tail: it ends at the sink or closes a cycle within itself
    seen = {}
    for i, e in enumerate(tail):
        seen[e.tail] = i
    last_head = tail[-1].head
    if last_head in seen:
        kind = CYCLE_THROUGH_SOURCE if seen[last_head] == 0 else LOLLIPOP
    else:
        kind = PATH_TO_SINK
    cost = sum(e.cost * tail_flows[e.key] for e in tail)
    structure = AugmentingStructure(kind, v, cost, tail_flows, list(tail))
    return prefix, arriving, structure


def cheapest_structure(adj, vertices, sink, source, *, tol=1e-10):
    """Cheapest augmenting structure from ``source`` via policy iteration,
    falling back to the LP solver when certification fails."""
    h, policy, ok = solve_heights(adj, vertices, sink, tol=tol)
    if ok and h.get(source, INF) != INF:
        return structure_from_policy(source, policy, sink, h)
    res = [e for edges in adj.values() for e in edges]
    return lp_cheapest_structure(res, sink, source)


def lp_cheapest_structure(res_edges, sink, source, *, exact=False, capacitated=False,
                          supply=1.0):
    """Cheapest fractional unit-excess flow from ``source`` as an LP.

    Uncapacitated by default (the structure definition ignores residual
    capacities); with ``capacitated=True`` the residual capacities bound the
    variables, which yields the cheapest *applicable-at-once* augmentation.
    Returns (cost, flows keyed by residual key).
    """
    res = [e for e in res_edges if e.tail != sink]
    if not res:
        raise Infeasible(f"no residual edges out of {source!r}")
    verts = sorted({v for e in res for v in (e.tail, e.head)} - {sink}, key=repr)
    if source not in verts:
        raise Infeasible(f"{source!r} has no residual out-edges")
    vid = {v: i for i, v in enumerate(verts)}
    n = len(res)
    a_eq = [[0.0] * n for _ in verts]
    for j, e in enumerate(res):
        a_eq[vid[e.tail]][j] += 1.0
        if e.head != sink:
            a_eq[vid[e.head]][j] -= e.gain
    b_eq = [0.0] * len(verts)
    b_eq[vid[source]] = float(supply)
    a_ub = b_ub = None
    if capacitated:
        rows = [(j, e.cap) for j, e in enumerate(res) if e.cap != INF]
        a_ub = [[0.0] * n for _ in rows]
        b_ub = [cap for _, cap in rows]
        for i, (j, _) in enumerate(rows):
            a_ub[i][j] = 1.0
    sol = solve_lp([e.cost for e in res], a_eq, b_eq, a_ub, b_ub, exact=exact)
    if sol.status != "optimal":
        raise Infeasible(f"augmenting LP is {sol.status} from {source!r}")
    flows = {e.key: float(sol.x[j]) for j, e in enumerate(res) if sol.x[j] > 1e-12}
    return float(sol.objective), flows
