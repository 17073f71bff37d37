"""Flow networks with per-edge capacity, cost, and gain, plus residual graphs.

Conventions, shared by the whole engine:

* Flow ``x_e`` on edge ``e = uv`` is measured on the sender's side; the head
  receives ``gain_e * x_e`` units. Capacity and cost are also sender-side.
* Sources have no incoming edges and the sink has no outgoing edges.
  Residual edges are keyed by (edge id, direction), so parallel and
  anti-parallel original edges are both handled as a multigraph.
* Every non-sink vertex carries a dummy escape edge to the sink (gain 1,
  infinite capacity, cost B). A feasible instance never needs them; any flow
  they carry is reported, never silently accepted.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import NamedTuple

from ..errors import CapacityViolation, DuplicateVertex, ParameterError

INF = math.inf

# Gain-product estimates explode exponentially; past this point a larger B
# only hurts float conditioning without changing which routes are usable.
_DUMMY_COST_CAP = 1e12


@dataclass(frozen=True)
class Edge:
    eid: int
    tail: object
    head: object
    cap: float
    cost: float
    gain: float
    dummy: bool = False


class ResEdge(NamedTuple):
    key: tuple      # (eid, is_forward)
    tail: object
    head: object
    cap: float
    cost: float
    gain: float
    eid: int
    forward: bool


def default_dummy_cost(size_bound, cost_bound, gain_bound):
    est = max(1.0, float(gain_bound)) ** min(int(size_bound), 64)
    return 1.0 + min(size_bound * max(cost_bound, 1.0) * min(est, _DUMMY_COST_CAP), _DUMMY_COST_CAP)


class FlowNetwork:
    """Directed network with one sink and a growing source set."""

    def __init__(self, sink, *, size_bound=64, cost_bound=10.0, gain_bound=2.0,
                 dummy_cost=None, add_dummies=True):
        self.sink = sink
        self.cost_bound = float(cost_bound)
        self.gain_bound = float(gain_bound)
        self.dummy_cost = float(dummy_cost) if dummy_cost is not None else \
            default_dummy_cost(size_bound, cost_bound, gain_bound)
        self.add_dummies = add_dummies
        self.edges: list[Edge] = []
        self.vertices = [sink]
        self.sources = []
        self._vset = {sink}
        self._sset = set()
        self._out = {sink: []}
        self._in = {sink: []}
        self._dummy_eid = {}

    # -- construction ------------------------------------------------------

    def add_vertex(self, key):
        if key in self._vset:
            raise DuplicateVertex(f"vertex {key!r} already present")
        self._vset.add(key)
        self.vertices.append(key)
        self._out[key] = []
        self._in[key] = []
        if self.add_dummies:
            self._add_edge(key, self.sink, INF, self.dummy_cost, 1.0, dummy=True)

    def add_edge(self, tail, head, cap=INF, cost=0.0, gain=1.0):
        if tail not in self._vset or head not in self._vset:
            raise ParameterError(f"unknown endpoint on edge {tail!r}->{head!r}")
        if tail == self.sink:
            raise ParameterError("the sink cannot have outgoing edges")
        if head in self._sset:
            raise ParameterError(f"sources cannot have incoming edges ({head!r})")
        if not (cap > 0):
            raise ParameterError(f"capacity must be positive, got {cap}")
        if cost < 0:
            raise ParameterError(f"costs must be non-negative, got {cost}")
        if not (gain > 0):
            raise ParameterError(f"gains must be positive, got {gain}")
        if cost > self.dummy_cost:
            raise ParameterError("edge cost exceeds the dummy escape cost; "
                                 "raise cost_bound at construction")
        return self._add_edge(tail, head, float(cap), float(cost), float(gain))

    def _add_edge(self, tail, head, cap, cost, gain, dummy=False):
        e = Edge(len(self.edges), tail, head, cap, cost, gain, dummy)
        self.edges.append(e)
        self._out[tail].append(e)
        self._in[head].append(e)
        if dummy:
            self._dummy_eid[tail] = e.eid
        return e

    def add_source(self, key, out_edges):
        """Register an arriving source together with its outgoing edges
        (an iterable of (head, cap, cost, gain))."""
        self.add_vertex(key)
        self._sset.add(key)
        self.sources.append(key)
        for head, cap, cost, gain in out_edges:
            self.add_edge(key, head, cap, cost, gain)

    # -- queries -----------------------------------------------------------

    def out_edges(self, v):
        return self._out[v]

    def in_edges(self, v):
        return self._in[v]

    def is_source(self, v):
        return v in self._sset

    def dummy_edge_of(self, v):
        return self._dummy_eid.get(v)

    def export_snapshot(self, state=None) -> str:
        """Line-record dump of the network (and flow, when given) for
        debugging; mirrors the trace format style."""
        lines = [json.dumps({"sink": str(self.sink), "vertices": [str(v) for v in self.vertices]})]
        for e in self.edges:
            rec = {"edge": e.eid, "tail": str(e.tail), "head": str(e.head),
                   "cap": e.cap if e.cap != INF else "inf", "cost": e.cost,
                   "gain": e.gain, "dummy": e.dummy}
            if state is not None:
                rec["flow"] = state.x[e.eid]
            lines.append(json.dumps(rec, sort_keys=True))
        return "\n".join(lines) + "\n"


class FlowState:
    """Mutable flow vector plus per-source bookkeeping for one network."""

    def __init__(self, net: FlowNetwork):
        self.net = net
        self.x = [0.0] * len(net.edges)

    def sync(self):
        while len(self.x) < len(self.net.edges):
            self.x.append(0.0)

    def copy_x(self):
        return list(self.x)

    def source_sent(self, s):
        self.sync()
        return sum(self.x[e.eid] for e in self.net.out_edges(s))

    def excess(self, v):
        self.sync()
        out = sum(self.x[e.eid] for e in self.net.out_edges(v))
        into = sum(e.gain * self.x[e.eid] for e in self.net.in_edges(v))
        return out - into

    def dummy_flow(self):
        return sum(self.x[e.eid] for e in self.net.edges if e.dummy)

    def machine_like_loads(self):
        """Received flow per sink-incoming edge tail; handy for reductions."""
        return {e.tail: e.gain * self.x[e.eid] for e in self.net.in_edges(self.net.sink)}

    def check_conservation(self, tol=1e-7):
        """Every non-source, non-sink vertex balances; each source's net
        out-flow equals what it has sent."""
        for v in self.net.vertices:
            if v == self.net.sink:
                continue
            ex = self.excess(v)
            if self.net.is_source(v):
                continue
            if abs(ex) > tol:
                raise CapacityViolation(f"conservation violated at {v!r}: excess {ex}")
        return True


def residual_edges(net: FlowNetwork, state: FlowState, *, tol=1e-12, cap_tol=1e-9):
    """Residual multigraph of the current flow.

    Forward copy while x < cap (residual cap = cap - x, same cost and gain);
    backward copy while x > 0 (residual cap = gain*x, cost 0, gain 1/gain).
    """
    state.sync()
    out = []
    for e in net.edges:
        xe = state.x[e.eid]
        if xe > e.cap + cap_tol:
            raise CapacityViolation(f"x[{e.eid}] = {xe} exceeds cap {e.cap}")
        if e.cap - xe > tol or e.cap == INF:
            out.append(ResEdge((e.eid, True), e.tail, e.head, e.cap - xe, e.cost, e.gain, e.eid, True))
        if xe > tol:
            out.append(ResEdge((e.eid, False), e.head, e.tail, e.gain * xe, 0.0, 1.0 / e.gain, e.eid, False))
    return out


def residual_adjacency(res, *, sink=None):
    """Tail-indexed adjacency, deterministic order. The sink's outgoing
    residual edges are dropped when ``sink`` is given: with non-negative
    costs no cheapest augmenting structure leaves the sink, and the search
    treats it as absorbing."""
    adj = {}
    for re in res:
        if sink is not None and re.tail == sink:
            continue
        adj.setdefault(re.tail, []).append(re)
    for lst in adj.values():
        lst.sort(key=lambda r: r.key)
    return adj
