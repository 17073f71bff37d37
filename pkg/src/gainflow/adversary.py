"""Fully-dynamic lower-bound instances on a recursive binary tree.

A perfect binary tree with L levels of edges has two machines at each of
its 2^L leaves. Every vertex v at level l(v) owns a unit-size job template
assignable to any machine under v, with reassignment cost P^l(v). The trace
interleaves arrivals and departures recursively: visiting v first brings in
2^l(v) copies of its job, then runs P rounds over both children, then
retires the copies. At every moment the active jobs are exactly the copies
along one root-leaf path of the recursion, so a makespan-1 schedule always
exists (each vertex parks its copies on the leaf machines of the child
*not* on the path). Any strategy that keeps the fractional makespan low,
however, must keep removing expensive mass: with per-leaf congestion capped
at 2(L+1)/3 the total weighted recourse is at least P^(L+1) (L+1) 2^L / 3.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import LogGapError, ParameterError, SupportError, ValidationError
from .traces import ARRIVE, DEPART, Event, EventTrace


@dataclass(frozen=True)
class TreeVertex:
    level: int
    path: tuple  # left/right choices from the root, '' at the root

    @property
    def name(self):
        return "r" + "".join(self.path)


class LBTree:
    """Vertex/leaf bookkeeping for the recursive construction."""

    def __init__(self, levels, period):
        if levels < 1:
            raise ParameterError("need at least one level")
        if period < 2 ** levels:
            raise ParameterError(f"period {period} must be at least 2^L = {2 ** levels}")
        self.L = levels
        self.P = period
        self.vertices = []
        self._build(TreeVertex(levels, ()))

    def _build(self, v):
        self.vertices.append(v)
        if v.level > 0:
            self._build(TreeVertex(v.level - 1, v.path + ("0",)))
            self._build(TreeVertex(v.level - 1, v.path + ("1",)))

    def leaves_under(self, v: TreeVertex):
        depth = v.level
        out = []

        def walk(path, lvl):
            if lvl == 0:
                out.append(path)
                return
            walk(path + ("0",), lvl - 1)
            walk(path + ("1",), lvl - 1)

        walk(v.path, depth)
        return out

    def machines_under(self, v: TreeVertex):
        return [self.machine(leaf, side) for leaf in self.leaves_under(v) for side in (0, 1)]

    @staticmethod
    def machine(leaf_path, side):
        return f"u{''.join(leaf_path) or 'r'}_{side}"

    @property
    def machine_count(self):
        return 2 ** (self.L + 1)

    def all_machines(self):
        root = TreeVertex(self.L, ())
        return self.machines_under(root)

    def cost_of(self, v: TreeVertex):
        return float(self.P ** v.level)

    def arrivals_per_vertex(self, v: TreeVertex):
        """copies per execution x number of executions."""
        return 2 ** v.level * self.P ** (self.L - v.level)

    def total_arrivals(self):
        return sum(self.arrivals_per_vertex(v) for v in self.vertices)

    def total_cost(self):
        """Closed form P^L (L+1) 2^L, cross-checkable by summation."""
        return float(self.P ** self.L * (self.L + 1) * 2 ** self.L)


def build_trace(levels, period) -> EventTrace:
    """The exact recursive event order; arrive records carry the copy's
    reassignment cost. Every job id arrives and departs exactly once."""
    tree = LBTree(levels, period)
    machines = tuple(tree.all_machines())
    events = []
    counter = [0]

    def construct(v: TreeVertex):
        procs = {m: 1.0 for m in tree.machines_under(v)}
        copies = []
        for _ in range(2 ** v.level):
            jid = counter[0]
            counter[0] += 1
            copies.append(jid)
            events.append(Event(ARRIVE, jid, dict(procs), cost=tree.cost_of(v)))
        if v.level > 0:
            left = TreeVertex(v.level - 1, v.path + ("0",))
            right = TreeVertex(v.level - 1, v.path + ("1",))
            for _ in range(period):
                construct(left)
                construct(right)
        for jid in copies:
            events.append(Event(DEPART, jid))

    construct(TreeVertex(levels, ()))
    return EventTrace(machines, tuple(events)).validate()


def vertex_of_active_job(tree: LBTree, procs):
    """The owning tree vertex is recoverable from the allowed machine set."""
    count = len(procs)
    level = int(math.log2(count)) - 1
    sample = sorted(procs)[0]
    leaf = sample[1:].split("_")[0]
    path = () if leaf == "r" else tuple(leaf)
    prefix = path[:len(path) - level] if level else path
    return TreeVertex(level, tuple(prefix))


def witness_schedule(tree: LBTree, active):
    """Explicit makespan-1 assignment for any prefix of the trace: active
    jobs sit on one recursion stack; every strict ancestor parks its copies
    in the sibling subtree of the next stack vertex, the deepest vertex
    parks inside its own subtree, one job per machine."""
    by_vertex = {}
    for jid, job in active.items():
        v = vertex_of_active_job(tree, job.procs)
        by_vertex.setdefault((v.level, v.path), []).append(jid)
    stack = sorted(by_vertex, key=lambda lv: -lv[0])
    for (lva, pa), (lvb, pb) in zip(stack, stack[1:]):
        if pa != pb[:len(pa)]:
            raise ValidationError("active jobs do not form one recursion stack")
    sigma = {}
    for idx, (level, path) in enumerate(stack):
        v = TreeVertex(level, path)
        jobs = sorted(by_vertex[(level, path)])
        if idx + 1 < len(stack):
            child_path = stack[idx + 1][1][:len(path) + 1]
            sibling = child_path[:-1] + ("1" if child_path[-1] == "0" else "0",)
            slots = tree.machines_under(TreeVertex(level - 1, sibling))
        else:
            if level > 0:
                slots = tree.machines_under(TreeVertex(level - 1, path + ("0",)))
            else:
                slots = tree.machines_under(v)
        assert len(slots) >= len(jobs), "sibling subtree must fit the copies"
        for jid, m in zip(jobs, slots):
            sigma[jid] = m
    return sigma


def audit(trace: EventTrace, schedules) -> float:
    """Cost-weighted removal recourse of a fractional schedule log.

    ``schedules[t]`` is the fractional assignment {(job, machine): weight}
    after event t; movement of a live job is charged on its decrease side at
    the job's reassignment cost; arrivals place for free; departures drop
    the job without charge."""
    if len(schedules) != len(trace.events):
        raise LogGapError(f"{len(schedules)} schedule rows for "
                          f"{len(trace.events)} events")
    cost_of = {}
    total = 0.0
    prev = {}
    alive = set()
    for ev, sched in zip(trace.events, schedules):
        if ev.kind == ARRIVE:
            cost_of[ev.job_id] = ev.cost if ev.cost is not None else 1.0
            alive.add(ev.job_id)
        else:
            alive.discard(ev.job_id)
        for (j, m), before in prev.items():
            if j not in alive:
                continue
            after = sched.get((j, m), 0.0)
            if before > after:
                total += cost_of[j] * (before - after)
        prev = dict(sched)
    return total


def lower_bound_value(levels, period):
    """The proven recourse floor and its companion quantities."""
    tree = LBTree(levels, period)
    floor = period ** (levels + 1) * (levels + 1) * 2 ** levels / 3.0
    total_cost = tree.total_cost()
    unit_jobs = (levels + 1) * (2 * period) ** levels
    return {
        "recourse_floor": floor,
        "sum_costs": total_cost,
        "amortized_ratio": floor / total_cost,   # = P / 3
        "unit_cost_job_count": unit_jobs,
        "period": period,
    }


def strategy_cost(levels, period, f):
    """Recourse and peak leaf congestion of a stationary strategy.

    ``f[vertex.name]`` maps leaf names to the fractional copies of that
    vertex's job kept on the leaf's machine pair per round; weight outside
    the vertex's subtree or exceeding its copy count is rejected."""
    tree = LBTree(levels, period)
    recourse = 0.0
    congestion = {}
    leaf_names = {"".join(path) or "r": path for path in tree.leaves_under(TreeVertex(levels, ()))}
    for v in tree.vertices:
        fv = f.get(v.name, {})
        allowed = {"".join(p) or "r" for p in tree.leaves_under(v)}
        placed = 0.0
        for leaf, w in fv.items():
            if w < 0 or leaf not in allowed:
                raise SupportError(f"weight on {leaf} outside the subtree of {v.name}")
            placed += w
            congestion[leaf] = congestion.get(leaf, 0.0) + w
        if placed > 2 ** v.level + 1e-9:
            raise SupportError(f"{v.name} places {placed} > {2 ** v.level} copies")
        executions_times_rounds = period ** (tree.L - v.level + 1)
        recourse += executions_times_rounds * tree.cost_of(v) * (2 ** v.level - placed)
    max_congestion = max(congestion.values()) if congestion else 0.0
    return recourse, max_congestion
