"""Randomized rounding with coupled schedules and O(1)-style recourse.

All randomness is drawn once per replay from a master seed and reused at
every time step, which couples consecutive rounded schedules: when the
fractional input does not move, neither does the output. Per step the full
pipeline is recomputed from the seeds and the fractional snapshot:

* classification — an edge is big when p_ij >= T / log(n); a job is big
  when more than a beta-fraction of it rides on big edges (beta uniform in
  [1/2, 3/4]).
* step (s) — small jobs accept/reject down their personal (machine, toss)
  sequence using the fractional weights on small edges.
* step (b1) — big-job weights below 1/log(n) are sparsified to 0 or
  1/log(n) by per-edge thresholds, unbiased coordinate-wise.
* step (b2) — big jobs accept/reject down the same sequences against the
  sparsified weights; machines whose tentative load exceeds
  c * loglog(n)/logloglog(n) * T are marked and all their jobs fail.
* step (b3) — failed jobs are rounded component by component in the
  sparsified support graph by the deterministic bucket/segment rounder.

Recourse between consecutive steps is diffed from the final assignments and
split into the four disjoint causes: class switches, small-small moves,
big-big tentative-target moves, and component churn among failed jobs.
"""

from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass, field

from .errors import BoundViolation, SeedExhaustion
from .round_two_eps import offline_round
from .traces import Job

SEED_SCAN_CAP = 10 ** 6


def lg(z):
    """Base-2 log clamped below at 4 so iterated logs stay positive."""
    return math.log2(max(z, 4.0))


def loglog_ratio(n):
    """loglog(n) / logloglog(n) with the same clamping at every level."""
    return lg(lg(n)) / lg(lg(lg(n)))


def _derived_rng(master_seed, *key):
    payload = repr((master_seed,) + key).encode()
    return random.Random(int.from_bytes(hashlib.sha256(payload).digest()[:8], "big"))


class GlobalSeeds:
    """Replay-wide randomness, lazily materialized and cached so every time
    step sees identical values."""

    def __init__(self, master_seed, n, machines):
        self.master_seed = master_seed
        self.n = n
        self.log_n = lg(n)
        self.machines = sorted(machines)
        self.beta = _derived_rng(master_seed, "beta").uniform(0.5, 0.75)
        self._delta = {}
        self._seq = {}

    def delta(self, i, j):
        key = (i, j)
        if key not in self._delta:
            self._delta[key] = _derived_rng(self.master_seed, "delta", i, j) \
                .uniform(0.0, 1.0 / self.log_n)
        return self._delta[key]

    def sequence(self, job_id, neighborhood, upto):
        """First ``upto`` (machine, toss) pairs for the job; the neighborhood
        must be stable across calls (it is: a job's edges are fixed)."""
        seq = self._seq.get(job_id)
        if seq is None:
            seq = {"rng": _derived_rng(self.master_seed, "seq", job_id),
                   "items": [], "hood": sorted(neighborhood)}
            self._seq[job_id] = seq
        hood = seq["hood"]
        items = seq["items"]
        rng = seq["rng"]
        while len(items) < upto:
            items.append((hood[rng.randrange(len(hood))], rng.random()))
        return items


@dataclass
class LogLogStep:
    t: int
    assignment: dict
    recourse: dict            # type-1..type-4 counters
    makespan: float
    marked: list
    failed: list
    component_sizes: list
    small_load: float
    big_ok_load: float
    failed_load: float
    notes: list = field(default_factory=list)


class LogLogRounder:
    """Per-replay session; feed it the fractional snapshot each step."""

    def __init__(self, machines, t_star, n_total, master_seed=0, mark_c=10.0):
        self.machines = sorted(machines)
        self.t_star = float(t_star)
        self.n = max(int(n_total), 1)
        self.seeds = GlobalSeeds(master_seed, self.n, machines)
        self.mark_c = float(mark_c)
        self.procs = {}
        self._splits = {}
        self.prev = None   # previous pipeline snapshot
        self.steps: list[LogLogStep] = []

    # -- thresholds ------------------------------------------------------------

    @property
    def big_edge_cut(self):
        return self.t_star / self.seeds.log_n

    @property
    def mark_threshold(self):
        return self.mark_c * loglog_ratio(self.n) * self.t_star

    def makespan_cap(self):
        """Asserted decomposition bound: marked budget + one job for the
        successful big jobs, 8T for small jobs, 200T for failed ones."""
        return (self.mark_c * loglog_ratio(self.n) + 220.0) * self.t_star

    # -- per-job machinery -------------------------------------------------------

    def admit(self, job: Job):
        procs = {m: p for m, p in job.procs.items()
                 if p <= self.t_star * (1 + 1e-9)}
        self.procs[job.id] = procs
        big, small = [], []
        for m, p in procs.items():
            (big if p >= self.big_edge_cut else small).append(m)
        self._splits[job.id] = (sorted(big), sorted(small))

    def _split_edges(self, j):
        return self._splits[j]

    def classify(self, x_of, j):
        big, small = self._split_edges(j)
        big_mass = sum(x_of.get((j, m), 0.0) for m in big)
        return "big" if big_mass > self.seeds.beta else "small", big, small

    def _accept(self, j, allowed, weight_of):
        scanned, upto = 0, 64
        while scanned < SEED_SCAN_CAP:
            items = self.seeds.sequence(j, self.procs[j], upto)
            for o in range(scanned, upto):
                h, theta = items[o]
                if h in allowed and theta <= weight_of(h):
                    return h
            scanned, upto = upto, min(upto * 4, SEED_SCAN_CAP)
        raise SeedExhaustion(f"no acceptance for job {j} within {SEED_SCAN_CAP} tosses")

    def sparsify(self, x_of, j, big):
        cut = 1.0 / self.seeds.log_n
        out = {}
        for m in big:
            v = x_of.get((j, m), 0.0)
            if v >= cut:
                out[m] = v
            elif v > 0 and self.seeds.delta(m, j) <= v:
                out[m] = cut
        return out

    # -- the pipeline ---------------------------------------------------------------

    def _pipeline(self, t, x_of):
        jobs = sorted(self.procs)
        classes, small_sigma, big_target = {}, {}, {}
        xprime = {}
        notes = []
        for j in jobs:
            cls, big, small = self.classify(x_of, j)
            classes[j] = cls
            if cls == "small":
                small_sigma[j] = self._accept(j, set(small),
                                              lambda m: x_of.get((j, m), 0.0))
            else:
                xp = self.sparsify(x_of, j, big)
                xprime[j] = xp
                if sum(xp.values()) < 0.1 - 1e-12:
                    notes.append(("sparse-support-below-tenth", j))
                    big_target[j] = None  # straight to the failed pool
                else:
                    big_target[j] = self._accept(j, set(xp), lambda m: xp.get(m, 0.0))

        loads = {}
        for j, m in big_target.items():
            if m is not None:
                loads[m] = loads.get(m, 0.0) + self.procs[j][m]
        marked = sorted(m for m, v in loads.items() if v > self.mark_threshold + 1e-12)
        marked_set = set(marked)
        failed = sorted(j for j, m in big_target.items()
                        if m is None or m in marked_set)

        sigma = dict(small_sigma)
        for j, m in big_target.items():
            if j not in set(failed) and m is not None:
                sigma[j] = m

        comp_sizes, comp_assign = self._fix_failed(failed, xprime, x_of, notes)
        sigma.update(comp_assign)
        return {
            "t": t, "classes": classes, "small_sigma": small_sigma,
            "big_target": big_target, "xprime": xprime, "marked": marked,
            "failed": failed, "sigma": sigma, "component_sizes": comp_sizes,
            "notes": notes,
        }

    def _fix_failed(self, failed, xprime, x_of, notes):
        if not failed:
            return [], {}
        adj = {}
        for j in failed:
            for m in xprime.get(j, {}):
                adj.setdefault(j, set()).add(m)
                adj.setdefault(m, set()).add(j)
        comps = []
        seen = set()
        for j in failed:
            if j in seen:
                continue
            comp, frontier = {j}, [j]
            seen.add(j)
            while frontier:
                node = frontier.pop()
                for nxt in sorted(adj.get(node, ()), key=repr):
                    if nxt not in comp:
                        comp.add(nxt)
                        seen.add(nxt)
                        frontier.append(nxt)
            comps.append(comp)
        sizes = []
        assign = {}
        failed_set = set(failed)
        machine_set = set(self.machines)
        for comp in comps:
            comp_jobs = sorted(v for v in comp if v in failed_set)
            comp_machines = [v for v in comp if v in machine_set]
            sizes.append(len(comp_machines))
            batch, x_batch = [], {}
            for j in sorted(comp_jobs):
                support = xprime.get(j, {})
                total = sum(support.values())
                if total <= 1e-12:
                    # every sparsified weight rounded away: place the job on
                    # its heaviest fractional big machine and report it
                    big, _ = self._split_edges(j)
                    best = max(big, key=lambda m: (x_of.get((j, m), 0.0), m))
                    assign[j] = best
                    notes.append(("zero-sparse-support", j))
                    continue
                batch.append(Job(j, dict(self.procs[j])))
                for m, v in support.items():
                    x_batch[(j, m)] = v / total
            if batch:
                assign.update(offline_round(batch, x_batch, eps=0.125))
        return sizes, assign

    # -- public stepping ---------------------------------------------------------------

    def step(self, t, x_of, new_job=None) -> LogLogStep:
        if new_job is not None:
            self.admit(new_job)
        snap = self._pipeline(t, x_of)
        recourse = {"type1": 0, "type2": 0, "type3": 0, "type4": 0}
        if self.prev is not None:
            for j in sorted(self.prev["sigma"]):
                if j not in snap["sigma"]:
                    continue
                before, after = self.prev["sigma"][j], snap["sigma"][j]
                if before == after:
                    continue
                c0, c1 = self.prev["classes"][j], snap["classes"][j]
                if c0 != c1:
                    recourse["type1"] += 1
                elif c0 == "small":
                    recourse["type2"] += 1
                elif self.prev["big_target"].get(j) != snap["big_target"].get(j):
                    recourse["type3"] += 1
                else:
                    recourse["type4"] += 1
        self.prev = snap

        loads = {"small": {}, "big": {}, "fail": {}}
        failed = set(snap["failed"])
        for j, m in snap["sigma"].items():
            p = self.procs[j][m]
            kind = ("small" if snap["classes"][j] == "small"
                    else "fail" if j in failed else "big")
            loads[kind][m] = loads[kind].get(m, 0.0) + p
        small_load = max(loads["small"].values(), default=0.0)
        big_ok = max(loads["big"].values(), default=0.0)
        fail_load = max(loads["fail"].values(), default=0.0)
        total = {}
        for part in loads.values():
            for m, v in part.items():
                total[m] = total.get(m, 0.0) + v
        makespan = max(total.values(), default=0.0)

        step = LogLogStep(t, dict(snap["sigma"]), recourse, makespan,
                          snap["marked"], snap["failed"], snap["component_sizes"],
                          small_load, big_ok, fail_load, snap["notes"])
        self.steps.append(step)
        return step

    def check_decomposition(self, step: LogLogStep, strict_total=True):
        report = {
            "small": (step.small_load, 8.0 * self.t_star),
            "big_ok": (step.big_ok_load, self.mark_threshold + self.t_star),
            "failed": (step.failed_load, 200.0 * self.t_star),
            "total": (step.makespan, self.makespan_cap()),
        }
        soft = [k for k, (got, cap) in report.items()
                if k != "total" and got > cap + 1e-9]
        if strict_total and step.makespan > self.makespan_cap() + 1e-9:
            raise BoundViolation("decomposition bound exceeded", report)
        return report, soft
