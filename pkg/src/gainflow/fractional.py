"""Fractional schedules maintained online through the flow reduction.

Each machine i becomes a vertex with an edge to the sink of capacity
(1+eps)*T, cost 0, gain 1; an arriving job j becomes a source with an edge
to every admissible machine (p_ij <= T) of infinite capacity, cost 1, and
gain p_ij. A valid flow in which every arrived source sends one unit *is* a
fractional assignment of makespan at most (1+eps)*T, read off the job-edge
flows, and the engine's guarantee caps the L1 movement of those flows.

``FractionalBalancer`` assumes the makespan target T is known.
``AutoBalancer`` removes that assumption with stages (target grows by 1/eps)
and phases (target grows by 1+eps): each phase rebuilds the network at the
new target and re-routes all unfrozen jobs; two stages back, jobs are frozen
onto an offline rounded assignment and never move again.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import Infeasible
from .genflow import FAITHFUL, FlowNetwork, INF, OnlineGenFlow
from .oracle import compute_T_star
from .traces import Job

SINK = "__sink__"


@dataclass
class FractionalStep:
    t: int
    job_id: int
    makespan: float
    recourse: float          # L1 movement of the job-edge flows this step
    flow_cost: float
    dummy_used: bool
    events: list = field(default_factory=list)  # ("stage"|"phase", detail)


def _job_key(job_id):
    return ("job", job_id)


class FractionalBalancer:
    """Known-target fractional scheduler; one instance per replay."""

    def __init__(self, machines, t_star, eps, mode=FAITHFUL, p_bound=None):
        if eps <= 0:
            raise ValueError("eps must be positive")
        if t_star < 0:
            raise ValueError("t_star must be non-negative")
        self.machines = list(machines)
        self.t_star = float(t_star)
        self.eps = float(eps)
        gain_bound = max(p_bound or 0.0, t_star, 1.0)
        net = FlowNetwork(SINK, size_bound=4096, cost_bound=1.0, gain_bound=gain_bound)
        for m in self.machines:
            net.add_vertex(m)
            net.add_edge(m, SINK, cap=(1.0 + eps) * self.t_star, cost=0.0, gain=1.0)
        self.engine = OnlineGenFlow(net, mode=mode)
        self.jobs = {}
        self._edge_of = {}   # (job_id, machine) -> eid
        self._x_prev = {}
        self.t = 0
        self.steps: list[FractionalStep] = []

    def admissible(self, job: Job):
        return {m: p for m, p in job.procs.items() if p <= self.t_star * (1 + 1e-9)}

    def arrive(self, job: Job) -> FractionalStep:
        procs = self.admissible(job)
        if not procs:
            raise Infeasible(f"job {job.id} has no machine with p <= {self.t_star}")
        self.jobs[job.id] = job
        self.t += 1
        outs = [(m, INF, 1.0, p) for m, p in sorted(procs.items())]
        rep = self.engine.arrive_source(_job_key(job.id), outs)
        for e in self.engine.net.out_edges(_job_key(job.id)):
            if not e.dummy:
                self._edge_of[(job.id, e.head)] = e.eid
        x_now = self.snapshot()
        moved = _l1(self._x_prev, x_now)
        self._x_prev = x_now
        step = FractionalStep(self.t, job.id, self.makespan(), moved,
                              rep.cost, rep.dummy_used)
        self.steps.append(step)
        return step

    def snapshot(self):
        x = {}
        for (j, m), eid in self._edge_of.items():
            v = self.engine.state.x[eid]
            if v > 1e-12:
                x[(j, m)] = v
        return x

    def assignment_of(self, job_id):
        return {m: self.engine.state.x[eid]
                for (j, m), eid in self._edge_of.items() if j == job_id}

    def loads(self):
        load = {m: 0.0 for m in self.machines}
        for (j, m), eid in self._edge_of.items():
            load[m] += self.jobs[j].procs[m] * self.engine.state.x[eid]
        return load

    def makespan(self):
        loads = self.loads()
        return max(loads.values()) if loads else 0.0

    @property
    def cumulative_recourse(self):
        return sum(s.recourse for s in self.steps)


def _l1(a, b):
    keys = set(a) | set(b)
    return sum(abs(a.get(k, 0.0) - b.get(k, 0.0)) for k in keys)


class AutoBalancer:
    """Guess-and-double wrapper for an unknown makespan target.

    Stage boundary (optimum grew by >= 1/eps): jobs from two stages back are
    rounded offline at a small target and frozen for good. Phase boundary
    (optimum grew by >= 1+eps): the flow network is rebuilt and every
    unfrozen job is re-routed, paying its full movement again.

    Within a phase that opened at optimum T0, the inner balancer runs with
    the phase ceiling (1+eps) * T0 as its known target: the optimum stays
    below the ceiling until the next boundary, so admissible edges and
    capacities always cover it, at the price of one extra (1+eps) factor in
    the makespan guarantee ((1+eps)^2 against the running optimum).
    """

    def __init__(self, machines, eps, mode=FAITHFUL, freeze_eps=0.125):
        if not (0 < eps < 1):
            raise ValueError("guess-and-double needs eps in (0, 1)")
        self.machines = list(machines)
        self.eps = float(eps)
        self.mode = mode
        self.freeze_eps = freeze_eps
        self.stage = 0
        self.phase = 0
        self.stage_base = None   # target at the current stage's start
        self.phase_base = None
        self.inner: FractionalBalancer | None = None
        self.jobs_in_order = []
        self.stage_of_job = {}
        self.frozen = {}         # job id -> machine
        self.frozen_stage_cut = -1   # stages <= cut are frozen
        self._x_prev = {}
        self.t = 0
        self.steps = []
        self.reintroductions = {}  # job id -> times re-routed by phase rebuilds

    def _frozen_loads(self):
        load = {m: 0.0 for m in self.machines}
        for j, m in self.frozen.items():
            load[m] += self._job_by_id[j].procs[m]
        return load

    def arrive(self, job: Job) -> FractionalStep:
        self.t += 1
        events = []
        t_opt = compute_T_star(self.jobs_in_order + [job])
        slack = 1 + 1e-9
        if self.stage_base is None:
            self.stage_base = self.phase_base = max(t_opt, 1e-12)
            self._rebuild(t_opt, kind=None)
        elif t_opt >= self.stage_base / self.eps / slack:
            while t_opt >= self.stage_base / self.eps / slack:
                self.stage += 1
                self.stage_base /= self.eps
            self.stage_base = t_opt
            events.append(("stage", self.stage))
            self._freeze_old_stages(events)
            self.phase += 1
            self.phase_base = t_opt
            events.append(("phase", self.phase))
            self._rebuild(t_opt, kind="stage")
        elif t_opt >= self.phase_base * (1 + self.eps) / slack:
            self.phase += 1
            self.phase_base = t_opt
            events.append(("phase", self.phase))
            self._rebuild(t_opt, kind="phase")
        self.jobs_in_order.append(job)
        self.stage_of_job[job.id] = self.stage
        step_inner = self.inner.arrive(job)

        x_now = self._full_snapshot()
        moved = _l1(self._x_prev, x_now)
        self._x_prev = x_now
        step = FractionalStep(self.t, job.id, self.makespan(), moved,
                              step_inner.flow_cost, step_inner.dummy_used, events)
        self.steps.append(step)
        return step

    @property
    def _job_by_id(self):
        return {j.id: j for j in self.jobs_in_order}

    def _unfrozen_jobs(self):
        return [j for j in self.jobs_in_order if j.id not in self.frozen]

    def _rebuild(self, t_opt, kind):
        ceiling = (1.0 + self.eps) * max(t_opt, 1e-12)
        self.inner = FractionalBalancer(self.machines, ceiling, self.eps, mode=self.mode)
        for j in self._unfrozen_jobs():
            self.inner.arrive(j)
            if kind is not None:
                self.reintroductions[j.id] = self.reintroductions.get(j.id, 0) + 1

    def _freeze_old_stages(self, events):
        """Round and freeze every job from stages <= current-2."""
        cut = self.stage - 2
        if cut <= self.frozen_stage_cut:
            return
        batch = [j for j in self.jobs_in_order
                 if j.id not in self.frozen and self.stage_of_job[j.id] is not None
                 and self.stage_of_job[j.id] <= cut]
        self.frozen_stage_cut = cut
        if not batch:
            return
        from .round_two_eps import offline_round  # local import to avoid a cycle
        t_batch, x_batch = compute_T_star(batch, with_solution=True)
        sigma = offline_round(batch, x_batch, self.freeze_eps)
        for j in batch:
            self.frozen[j.id] = sigma[j.id]
        events.append(("freeze", len(batch)))

    def _full_snapshot(self):
        x = dict(self.inner.snapshot()) if self.inner else {}
        for j, m in self.frozen.items():
            x[(j, m)] = 1.0
        return x

    def loads(self):
        load = self._frozen_loads()
        if self.inner:
            for m, v in self.inner.loads().items():
                load[m] += v
        return load

    def makespan(self):
        loads = self.loads()
        return max(loads.values()) if loads else 0.0

    def frozen_load_bound_report(self, t_opt=None):
        """Frozen jobs should weigh at most ~8 * eps * current target per
        machine; violations are reported, not fatal (the constant sums a
        geometric series whose head depends on stage history)."""
        if t_opt is None:
            t_opt = compute_T_star(self.jobs_in_order)
        bound = 8 * self.eps * t_opt
        loads = self._frozen_loads()
        worst = max(loads.values()) if loads else 0.0
        return {"bound": bound, "worst_frozen_load": worst, "ok": worst <= bound + 1e-9}

    @property
    def cumulative_recourse(self):
        return sum(s.recourse for s in self.steps)

    def snapshot(self):
        return self._full_snapshot()
