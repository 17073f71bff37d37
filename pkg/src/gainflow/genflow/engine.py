"""Online generalized-flow engine.

Each arriving source must send one unit of flow on top of the existing
solution; a step is charged only for flow *increases* (decrements are free).
The faithful mode repeatedly augments along the cheapest augmenting
structure until the unit is sent, capped at ``loop_cap_factor * |E|``
iterations per arrival; on a degenerate step or a cap hit it falls over to
the one-shot mode, which routes the remaining supply in a single
capacitated min-cost LP over the residual graph (never costlier than the
loop it replaces; the event is recorded on the step report).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

from ..errors import DegenerateStep, DummyUsedWarning
from .network import FlowNetwork, FlowState, residual_adjacency, residual_edges
from .search import (AugmentingStructure, cheapest_structure,
                     lp_cheapest_structure, solve_heights)

INF = math.inf

FAITHFUL = "faithful"
ONESHOT = "oneshot"


@dataclass
class StepReport:
    source: object
    cost: float
    iterations: int
    used_fallback: bool
    dummy_used: bool
    height_after: float | None = None


@dataclass
class DualReport:
    feasible: bool
    violations: list
    objective: float
    sum_source_heights: float
    eps: float
    y: dict = field(default_factory=dict)

    @property
    def objective_lower_ok(self):
        e = self.eps
        return self.objective >= self.sum_source_heights * e / (1.0 + e) - 1e-6


def max_step(net: FlowNetwork, state: FlowState, f: AugmentingStructure, cap_remaining):
    """Largest augmentation amount that keeps every flow within its bounds
    and the source's total sent within its supply."""
    theta = float(cap_remaining)
    for (eid, forward), mult in f.flows.items():
        if mult <= 0:
            continue
        e = net.edges[eid]
        xe = state.x[eid]
        if forward:
            if e.cap != INF:
                theta = min(theta, (e.cap - xe) / mult)
        else:
            # pushing mult along the reversal lowers x by mult/gain
            theta = min(theta, xe * e.gain / mult)
    if theta <= 1e-12:
        raise DegenerateStep(f"step size {theta} from {f.source!r}")
    return theta


def augment(net: FlowNetwork, state: FlowState, f: AugmentingStructure, theta):
    """Apply ``theta`` units of the structure; returns the paid (forward
    increase) cost."""
    paid = 0.0
    for (eid, forward), mult in f.flows.items():
        if mult <= 0:
            continue
        e = net.edges[eid]
        if forward:
            state.x[eid] += theta * mult
            paid += e.cost * theta * mult
        else:
            state.x[eid] -= theta * mult / e.gain
        _snap(state, e)
    return paid


def apply_residual_flows(net, state, flows):
    """Apply a residual flow vector (keyed like structure multipliers) at
    unit scale; used by the one-shot LP route."""
    paid = 0.0
    for (eid, forward), val in flows.items():
        if val <= 0:
            continue
        e = net.edges[eid]
        if forward:
            state.x[eid] += val
            paid += e.cost * val
        else:
            state.x[eid] -= val / e.gain
        _snap(state, e)
    return paid


def _snap(state, e, tol=1e-11):
    xe = state.x[e.eid]
    if abs(xe) <= tol:
        state.x[e.eid] = 0.0
    elif e.cap != INF and abs(e.cap - xe) <= tol:
        state.x[e.eid] = e.cap


def step_cost(net, x_before, x_after):
    """The online cost model: sum of cost * (increase)+ over all edges."""
    total = 0.0
    for e in net.edges:
        before = x_before[e.eid] if e.eid < len(x_before) else 0.0
        delta = x_after[e.eid] - before
        if delta > 0:
            total += e.cost * delta
    return total


class OnlineGenFlow:
    """One replay session; owns its network and flow state."""

    def __init__(self, net: FlowNetwork, mode=FAITHFUL, loop_cap_factor=10,
                 track_heights=False):
        self.net = net
        self.state = FlowState(net)
        self.mode = mode
        self.loop_cap_factor = loop_cap_factor
        self.track_heights = track_heights
        self.reports: list[StepReport] = []
        self.height_history: list[dict] = []

    # -- structure search --------------------------------------------------

    def residual(self):
        return residual_edges(self.net, self.state)

    def _adjacency(self):
        return residual_adjacency(self.residual(), sink=self.net.sink)

    def cheapest_augmentation(self, s, method="auto"):
        """Minimum-cost augmenting structure from ``s``.

        ``method``: "policy" (certified policy iteration, LP on failure),
        "lp" (uncapacitated LP; flows only, no structure classification).
        """
        if method in ("auto", "policy"):
            return cheapest_structure(self._adjacency(), self.net.vertices,
                                      self.net.sink, s)
        cost, flows = lp_cheapest_structure(self.residual(), self.net.sink, s)
        return AugmentingStructure("lp", s, cost, flows, [])

    def heights(self):
        """Height of every vertex under the current flow."""
        adj = self._adjacency()
        h, policy, ok = solve_heights(adj, self.net.vertices, self.net.sink)
        if not ok:
            res = self.residual()
            h = {self.net.sink: 0.0}
            for v in self.net.vertices:
                if v != self.net.sink:
                    h[v] = lp_cheapest_structure(res, self.net.sink, v)[0]
        return h

    def height(self, v):
        if v == self.net.sink:
            return 0.0
        return self.heights()[v]

    # -- the online loop ----------------------------------------------------

    def arrive_source(self, key, out_edges, mode=None) -> StepReport:
        mode = mode or self.mode
        self.net.add_source(key, out_edges)
        self.state.sync()
        x_before = self.state.copy_x()

        iters = 0
        fallback = False
        if mode == FAITHFUL:
            cap = self.loop_cap_factor * len(self.net.edges)
            while True:
                sent = self.state.source_sent(key)
                remaining = 1.0 - sent
                if remaining <= 1e-12:
                    break
                iters += 1
                if iters > cap:
                    fallback = True
                    break
                f = self.cheapest_augmentation(key)
                try:
                    theta = max_step(self.net, self.state, f, remaining)
                except DegenerateStep:
                    fallback = True
                    break
                augment(self.net, self.state, f, theta)
        remaining = 1.0 - self.state.source_sent(key)
        if mode == ONESHOT or (fallback and remaining > 1e-12):
            _, flows = lp_cheapest_structure(self.residual(), self.net.sink, key,
                                             capacitated=True, supply=remaining)
            apply_residual_flows(self.net, self.state, flows)
            fallback = fallback or mode != ONESHOT

        cost = step_cost(self.net, x_before, self.state.x)
        dummy_used = self.state.dummy_flow() > 1e-9
        if dummy_used:
            warnings.warn(f"dummy escape carries flow after {key!r}: instance "
                          "infeasible at the configured capacities", DummyUsedWarning)
        height_after = None
        if self.track_heights:
            table = self.heights()
            self.height_history.append(table)
            height_after = table[key]
        report = StepReport(key, cost, iters, fallback, dummy_used, height_after)
        self.reports.append(report)
        return report

    @property
    def total_cost(self):
        return sum(r.cost for r in self.reports)

    def dual_certificate(self, eps, heights=None, tol=1e-6) -> DualReport:
        return dual_certificate(self.net, self.state, heights or self.heights(), eps, tol=tol)


def dual_certificate(net, state, heights, eps, tol=1e-6) -> DualReport:
    """Build the dual solution implied by the final heights and check it.

    y_v is the final height (0 at the sink); z_uv = (y_u - gain*y_v - c)+.
    Feasibility of (y, z) in the capacity-scaled dual is by construction;
    the structural facts that make its objective large are checked edge by
    edge: saturated edges satisfy y_v <= y_u / gain, unsaturated edges
    satisfy y_u <= gain*y_v + c, and infinite-capacity edges carry no dual
    weight. The report's objective is  sum_t y_{s_t} - sum_e cap_e z_e/(1+eps).
    """
    y = dict(heights)
    y[net.sink] = 0.0
    violations = []
    z_total = 0.0
    for e in net.edges:
        yu, yv = y[e.tail], y[e.head]
        z = max(yu - e.gain * yv - e.cost, 0.0)
        xe = state.x[e.eid]
        if e.cap == INF:
            if z > tol:
                violations.append((e.eid, "infinite-capacity edge with positive dual", z))
            continue
        if xe < e.cap - 1e-9 and z > tol:
            violations.append((e.eid, "unsaturated edge violates y_u <= gain*y_v + c", z))
        if xe > 1e-9 and yv > yu / e.gain + tol:
            violations.append((e.eid, "flow-carrying edge violates y_v <= y_u/gain",
                               yv - yu / e.gain))
        z_total += e.cap * z
    sum_sources = sum(y[s] for s in net.sources)
    objective = sum_sources - z_total / (1.0 + eps)
    return DualReport(not violations, violations, objective, sum_sources, eps, y)
