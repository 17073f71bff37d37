"""Ground-truth computations used to judge the online algorithms.

Everything here is offline and independent of the engine's search code: the
optimal fractional makespan, the offline generalized-flow optimum at scaled
capacities, brute-force makespan, and a brute-force enumerator of augmenting
structures for small residual graphs.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

from .errors import Infeasible, TooLarge
from .genflow.network import INF
from .genflow.search import CYCLE_THROUGH_SOURCE, LOLLIPOP, PATH_TO_SINK
from .simplex import solve_lp

BRUTE_CAP = 10 ** 7


def _min_makespan_lp(jobs, edges, exact=False):
    """min lambda s.t. each job fully assigned over ``edges`` and every
    machine load <= lambda. Returns (lambda, x dict) or raises Infeasible.

    A greedy placement (each job whole onto its currently best machine)
    gives an obvious feasible basis — jobs' placement columns, lambda on the
    peak-load machine row, slacks elsewhere — so phase 1 is skipped."""
    jobs = list(jobs)
    machines = sorted({m for _, m in edges})
    eidx = {e: k for k, e in enumerate(sorted(edges))}
    n = len(eidx) + 1  # + lambda
    lam = len(eidx)
    jid = {j.id: i for i, j in enumerate(jobs)}
    a_eq = [[0.0] * n for _ in jobs]
    for (j, m), k in eidx.items():
        a_eq[jid[j]][k] = 1.0
    b_eq = [1.0] * len(jobs)
    a_ub = [[0.0] * n for _ in machines]
    midx = {m: i for i, m in enumerate(machines)}
    pmap = {j.id: j.procs for j in jobs}
    for (j, m), k in eidx.items():
        a_ub[midx[m]][k] = pmap[j][m]
    for row in a_ub:
        row[lam] = -1.0
    b_ub = [0.0] * len(machines)
    c = [0.0] * n
    c[lam] = 1.0

    allowed = {}
    for (j, m) in eidx:
        allowed.setdefault(j, []).append(m)
    if len(allowed) < len(jobs):
        raise Infeasible("a job has no admissible machine at this threshold")
    loads = {m: 0.0 for m in machines}
    basis = [None] * len(jobs)
    for j in sorted(allowed):
        best = min(allowed[j], key=lambda m: (loads[m] + pmap[j][m], m))
        loads[best] += pmap[j][best]
        basis[jid[j]] = eidx[(j, best)]
    peak = max(machines, key=lambda m: (loads[m], m))
    for m in machines:
        basis.append(lam if m == peak else n + midx[m])

    sol = solve_lp(c, a_eq, b_eq, a_ub, b_ub, exact=exact, start_basis=basis)
    if sol.status != "optimal":
        raise Infeasible("assignment LP infeasible")
    x = {e: float(sol.x[k]) for e, k in eidx.items() if sol.x[k] > 1e-12}
    return float(sol.objective), x


def compute_T_star(jobs, machines=None, exact=False, with_solution=False):
    """Optimal fractional makespan: the least T for which every job can be
    fractionally assigned over edges with p_ij <= T at machine loads <= T.

    Feasibility only changes structure at the critical values {p_ij}; within
    an interval the binding quantity is the min-makespan LP value of the
    fixed edge set, so T* = min over critical values a of
    max(a, lp_value(edges with p <= a)), located by bisection over the
    monotone predicate lp_value <= a.
    """
    jobs = [j for j in jobs]
    if not jobs:
        return (0.0, {}) if with_solution else 0.0
    for j in jobs:
        if not j.procs:
            raise Infeasible(f"job {j.id} allows no machine")
    crit = sorted({p for j in jobs for p in j.procs.values()})
    # The first candidate must allow every job at least one machine.
    min_need = max(min(j.procs.values()) for j in jobs)
    crit = [a for a in crit if a >= min_need - 1e-15]

    def edges_at(a):
        return {(j.id, m) for j in jobs for m, p in j.procs.items() if p <= a * (1 + 1e-12)}

    cache = {}

    def lam(idx):
        if idx not in cache:
            cache[idx] = _min_makespan_lp(jobs, edges_at(crit[idx]), exact=exact)
        return cache[idx]

    lo, hi = 0, len(crit) - 1
    if lam(hi)[0] > crit[hi]:  # even the full edge set needs more than max p
        best_idx = hi
    else:
        while lo < hi:  # least index whose interval already contains its LP value
            mid = (lo + hi) // 2
            if lam(mid)[0] <= crit[mid] * (1 + 1e-9):
                hi = mid
            else:
                lo = mid + 1
        best_idx = lo
    value, x = lam(best_idx)
    t_star = max(crit[best_idx], value)
    if best_idx > 0:
        prev_value, prev_x = lam(best_idx - 1)
        if prev_value < t_star:  # optimum interior to the previous interval
            t_star, x = prev_value, prev_x
    if with_solution:
        return t_star, x
    return t_star


def offline_genflow_opt(net, scale=1.0, exact=False):
    """Optimum of the flow LP with every finite capacity scaled by
    ``scale``; sources must all be present."""
    edges = net.edges
    n = len(edges)
    verts = [v for v in net.vertices if v != net.sink]
    vid = {v: i for i, v in enumerate(verts)}
    a_eq = [[0.0] * n for _ in verts]
    b_eq = [0.0] * len(verts)
    for e in edges:
        a_eq[vid[e.tail]][e.eid] += 1.0
        if e.head != net.sink:
            a_eq[vid[e.head]][e.eid] -= e.gain
    for s in net.sources:
        b_eq[vid[s]] = 1.0
    rows = [(e.eid, e.cap * scale) for e in edges if e.cap != INF]
    a_ub = [[0.0] * n for _ in rows]
    b_ub = [cap for _, cap in rows]
    for i, (k, _) in enumerate(rows):
        a_ub[i][k] = 1.0
    sol = solve_lp([e.cost for e in edges], a_eq, b_eq, a_ub, b_ub, exact=exact)
    if sol.status != "optimal":
        raise Infeasible(f"offline flow LP is {sol.status}")
    return float(sol.objective)


def brute_makespan(jobs, machines=None):
    """Exhaustive optimal integral makespan; refuses instances beyond
    ``BRUTE_CAP`` assignments."""
    jobs = list(jobs)
    if not jobs:
        return 0.0
    options = [sorted(j.procs.items()) for j in jobs]
    total = 1
    for opt in options:
        total *= len(opt)
        if total > BRUTE_CAP:
            raise TooLarge(f"{total} assignments exceed the cap {BRUTE_CAP}")
    best = math.inf
    loads = {}
    for combo in itertools.product(*options):
        loads.clear()
        worst = 0.0
        for m, p in combo:
            loads[m] = loads.get(m, 0.0) + p
            if loads[m] > worst:
                worst = loads[m]
            if worst >= best:
                break
        if worst < best:
            best = worst
    return best


# -- structure enumeration ---------------------------------------------------

@dataclass
class EnumeratedStructure:
    kind: str
    edges: tuple
    cost: float
    flows: dict


def _path_multipliers(edges):
    flows, carry = {}, 1.0
    for e in edges:
        flows[e.key] = carry
        carry *= e.gain
    return flows, carry


def _with_cycle(path_edges, cycle_edges):
    flows, carry = _path_multipliers(path_edges)
    g = 1.0
    for e in cycle_edges:
        g *= e.gain
    if g >= 1.0 - 1e-12:
        return None
    f = carry / (1.0 - g)
    for e in cycle_edges:
        flows[e.key] = flows.get(e.key, 0.0) + f
        f *= e.gain
    return flows


def enumerate_structures(res_edges, source, sink, vertex_cap=12):
    """Every augmenting structure from ``source``: simple sink paths, simple
    absorbing cycles through the source, and lollipops (access path plus an
    absorbing cycle). Multipliers are solved in closed form. Returns
    (structures, min_cost); min_cost is None when nothing exists."""
    adj = {}
    verts = set()
    for e in res_edges:
        verts.update((e.tail, e.head))
        if e.tail != sink:
            adj.setdefault(e.tail, []).append(e)
    for lst in adj.values():
        lst.sort(key=lambda e: e.key)
    if len(verts) > vertex_cap:
        raise TooLarge(f"{len(verts)} vertices exceed the enumeration cap {vertex_cap}")

    out = []

    def paths(frm, goal, banned):
        """Vertex-simple paths frm -> goal avoiding ``banned`` internally."""
        found = []

        def dfs(u, used, acc):
            for e in adj.get(u, ()):
                v = e.head
                if v == goal:
                    found.append(acc + [e])
                elif v not in used and v not in banned and v != sink:
                    used.add(v)
                    dfs(v, used, acc + [e])
                    used.discard(v)

        dfs(frm, {frm}, [])
        return found

    for p in paths(source, sink, set()):
        flows, _ = _path_multipliers(p)
        cost = sum(e.cost * flows[e.key] for e in p)
        out.append(EnumeratedStructure(PATH_TO_SINK, tuple(p), cost, flows))

    def cycles_through(w, banned):
        found = []

        def dfs(u, used, acc):
            for e in adj.get(u, ()):
                v = e.head
                if v == w and acc:
                    found.append(acc + [e])
                elif v not in used and v not in banned and v != sink and v != w:
                    used.add(v)
                    dfs(v, used, acc + [e])
                    used.discard(v)

        dfs(w, {w}, [])
        return found

    for cyc in cycles_through(source, set()):
        flows = _with_cycle([], cyc)
        if flows is None:
            continue
        cost = sum(e.cost * flows[e.key] for e in cyc)
        out.append(EnumeratedStructure(CYCLE_THROUGH_SOURCE, tuple(cyc), cost, flows))

    for w in sorted(verts - {source, sink}, key=repr):
        for p in paths(source, w, set()):
            internal = {e.tail for e in p} - {w}
            for cyc in cycles_through(w, internal):
                flows = _with_cycle(p, cyc)
                if flows is None:
                    continue
                edges = tuple(p) + tuple(cyc)
                cost = sum(e.cost * flows[k] for k, e in
                           {e.key: e for e in edges}.items())
                out.append(EnumeratedStructure(LOLLIPOP, edges, cost, flows))

    if not out:
        return [], None
    min_cost = min(s.cost for s in out)
    return out, min_cost
