"""Instance model: jobs, arrival/departure event traces, and seeded generators.

The trace wire format is newline-delimited JSON. The first line is a header
``{"machines": ["m0", ...]}`` (optionally with a ``"t_star"`` hint); each
following line is either

    {"op": "arrive", "job": 7, "procs": {"m0": 1.5, "m2": 0.25}}
    {"op": "depart", "job": 7}

An arrive record may carry an optional ``"cost"`` field (per-job reassignment
cost, used by adversarial traces). Machines absent from ``procs`` are
forbidden assignments; there is no infinity sentinel.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field

from .errors import ParseError, ValidationError

ARRIVE = "arrive"
DEPART = "depart"


@dataclass(frozen=True)
class Job:
    id: int
    procs: dict  # machine id -> processing time, strictly positive

    def __post_init__(self):
        if not self.procs:
            raise ValidationError("job allows no machine", job=self.id)
        for m, p in self.procs.items():
            if not (p > 0):
                raise ValidationError(f"p[{m}] = {p} is not positive", job=self.id)


@dataclass(frozen=True)
class Event:
    kind: str  # ARRIVE or DEPART
    job_id: int
    procs: dict | None = None  # departures carry only the id
    cost: float | None = None


@dataclass(frozen=True)
class EventTrace:
    machines: tuple
    events: tuple
    metadata: dict = field(default_factory=dict, compare=True)

    def job(self, event: Event) -> Job:
        return Job(event.job_id, dict(event.procs))

    @property
    def arrival_count(self):
        return sum(1 for e in self.events if e.kind == ARRIVE)

    def replay(self):
        """Yield (event, active_jobs) where active_jobs maps id -> Job after
        the event is applied."""
        active = {}
        for ev in self.events:
            if ev.kind == ARRIVE:
                active[ev.job_id] = Job(ev.job_id, dict(ev.procs))
            else:
                del active[ev.job_id]
            yield ev, active

    def validate(self):
        machines = set(self.machines)
        if len(machines) != len(self.machines):
            raise ValidationError("duplicate machine ids in header")
        seen, alive = set(), set()
        for ev in self.events:
            if ev.kind == ARRIVE:
                if ev.job_id in seen:
                    raise ValidationError("arrives more than once", job=ev.job_id)
                seen.add(ev.job_id)
                alive.add(ev.job_id)
                if ev.job_id < 0:
                    raise ValidationError("job ids must be non-negative", job=ev.job_id)
                if not ev.procs:
                    raise ValidationError("arrival with empty procs", job=ev.job_id)
                for m, p in ev.procs.items():
                    if m not in machines:
                        raise ValidationError(f"unknown machine {m!r}", job=ev.job_id)
                    if not (isinstance(p, (int, float)) and p > 0):
                        raise ValidationError(f"p[{m}] = {p} is not positive", job=ev.job_id)
            elif ev.kind == DEPART:
                if ev.job_id not in alive:
                    raise ValidationError("departs before arriving", job=ev.job_id)
                alive.discard(ev.job_id)
            else:
                raise ValidationError(f"unknown event kind {ev.kind!r}", job=ev.job_id)
        return self

    def serialize(self) -> str:
        header = {"machines": list(self.machines)}
        if "t_star" in self.metadata:
            header["t_star"] = self.metadata["t_star"]
        lines = [json.dumps(header, sort_keys=True)]
        for ev in self.events:
            if ev.kind == ARRIVE:
                rec = {"op": ARRIVE, "job": ev.job_id, "procs": dict(sorted(ev.procs.items()))}
                if ev.cost is not None:
                    rec["cost"] = ev.cost
            else:
                rec = {"op": DEPART, "job": ev.job_id}
            lines.append(json.dumps(rec, sort_keys=True))
        return "\n".join(lines) + "\n"


def parse_trace(data) -> EventTrace:
    """Parse and validate a trace from bytes or text."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    lines = [ln for ln in data.splitlines()]
    if not lines or not lines[0].strip():
        raise ParseError("missing header line", line=1)
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise ParseError(f"bad JSON in header: {exc}", line=1) from exc
    if not isinstance(header, dict) or "machines" not in header:
        raise ParseError('header must be {"machines": [...]}', line=1)
    machines = tuple(header["machines"])
    metadata = {}
    if "t_star" in header:
        metadata["t_star"] = header["t_star"]

    events = []
    for no, ln in enumerate(lines[1:], start=2):
        if not ln.strip():
            continue
        try:
            rec = json.loads(ln)
        except json.JSONDecodeError as exc:
            raise ParseError(f"bad JSON: {exc}", line=no) from exc
        op = rec.get("op")
        if op == ARRIVE:
            try:
                procs = {str(m): float(p) for m, p in rec["procs"].items()}
                job_id = int(rec["job"])
            except (KeyError, TypeError, AttributeError) as exc:
                raise ParseError(f"malformed arrive record: {exc}", line=no) from exc
            cost = float(rec["cost"]) if "cost" in rec else None
            events.append(Event(ARRIVE, job_id, procs, cost))
        elif op == DEPART:
            try:
                events.append(Event(DEPART, int(rec["job"])))
            except (KeyError, TypeError) as exc:
                raise ParseError(f"malformed depart record: {exc}", line=no) from exc
        else:
            raise ParseError(f"unknown op {op!r}", line=no)

    trace = EventTrace(machines, tuple(events), metadata)
    trace.validate()
    return trace


def validate_assignment(sigma, jobs):
    """Integral assignment sanity: every job placed on one allowed machine."""
    for job in jobs:
        m = sigma.get(job.id)
        if m is None:
            raise ValidationError("missing from the assignment", job=job.id)
        if m not in job.procs:
            raise ValidationError(f"assigned to forbidden machine {m!r}", job=job.id)
    return True


def validate_fractional_assignment(x, jobs, tol=1e-9):
    """Fractional weights live in [0, 1] on allowed machines and sum to one
    per job."""
    totals = {job.id: 0.0 for job in jobs}
    allowed = {job.id: job.procs for job in jobs}
    for (j, m), w in x.items():
        if j not in totals:
            raise ValidationError("weight for an unknown job", job=j)
        if m not in allowed[j]:
            raise ValidationError(f"weight on forbidden machine {m!r}", job=j)
        if w < -tol or w > 1 + tol:
            raise ValidationError(f"weight {w} outside [0, 1]", job=j)
        totals[j] += w
    for j, tot in totals.items():
        if abs(tot - 1.0) > tol:
            raise ValidationError(f"weights sum to {tot}", job=j)
    return True


def _machine_ids(m):
    return tuple(f"m{i}" for i in range(m))


def gen_random_unrelated(n, m, seed, p_range=(1.0, 10.0), subset_bound=None) -> EventTrace:
    """Arrivals-only unrelated-machine trace, deterministic in the seed.

    Every job draws a uniformly random nonempty machine subset and an
    independent uniform processing time per allowed machine.
    ``subset_bound`` optionally caps the subset size (still nonempty).
    """
    if n < 1 or m < 1:
        raise ValueError("n and m must be at least 1")
    lo, hi = p_range
    if not (0 < lo <= hi):
        raise ValueError(f"p_range must be positive, got {p_range}")
    rng = random.Random(seed)
    machines = _machine_ids(m)
    events = []
    for j in range(n):
        while True:
            subset = [mk for mk in machines if rng.random() < 0.5]
            if subset_bound is not None:
                subset = subset[:subset_bound]
            if subset:
                break
        procs = {mk: rng.uniform(lo, hi) for mk in subset}
        events.append(Event(ARRIVE, j, procs))
    return EventTrace(machines, tuple(events)).validate()


def gen_restricted(n, m, seed, p_range=(1.0, 10.0)) -> EventTrace:
    """Like :func:`gen_random_unrelated` but each job has one size on all of
    its allowed machines (restricted assignment)."""
    lo, hi = p_range
    if not (0 < lo <= hi):
        raise ValueError(f"p_range must be positive, got {p_range}")
    rng = random.Random(seed)
    machines = _machine_ids(m)
    events = []
    for j in range(n):
        while True:
            subset = [mk for mk in machines if rng.random() < 0.5]
            if subset:
                break
        p = rng.uniform(lo, hi)
        events.append(Event(ARRIVE, j, {mk: p for mk in subset}))
    return EventTrace(machines, tuple(events)).validate()
