"""O(1)-competitive rounding via capacitated matching on size classes.

Every machine i splits into sub-machines (i, k), k = 0..K with
K = ceil(2*log2(n)): class k serves the jobs whose size on i lies in
(T/2^(k+1), T/2^k]. Sizes below the last class boundary are clamped into
class K; their total weight is at most n * T/2^K <= T/n, one extra T of
load in the bound. Each step recomputes the fractional weight f_ik entering
every sub-machine and sets its capacity to ceil(2*f_ik + rho) with a random
offset rho drawn once per replay: the factor 2 sustains expansion alpha = 2
for the matching, and the offset makes the expected capacity churn track
the fractional movement instead of chattering on half-integral boundaries.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from .errors import BoundViolation, ParameterError
from .matching import CapacitatedMatcher


def class_count(n):
    return math.ceil(2 * math.log2(max(n, 2)))


def size_class(p, t_star, k_max):
    """k with T/2^(k+1) < p <= T/2^k, clamped into [0, k_max]."""
    if p > t_star * (1 + 1e-9):
        raise ParameterError(f"size {p} exceeds the target {t_star}")
    if p <= 0:
        raise ParameterError("sizes must be positive")
    k = int(math.floor(math.log2(t_star / p)))
    while k > 0 and p > t_star / 2 ** k:
        k -= 1
    while p <= t_star / 2 ** (k + 1):
        k += 1
        if k >= k_max:
            return k_max
    return min(max(k, 0), k_max)


def offset_capacity(f, rho):
    """ceil(2 f + rho), with dust snapped off the flooring boundary."""
    v = 2.0 * f + rho
    snapped = round(v)
    if abs(v - snapped) < 1e-9:
        v = snapped
    return int(math.ceil(v))


@dataclass
class SimpleStep:
    t: int
    assignment: dict
    reassignments: int
    capacity_change: int
    makespan: float


class SimpleRounder:
    """Online rounding of a fractional schedule at a known target.

    ``n_hint`` sizes the class ladder; in streaming mode (n_hint omitted)
    the ladder is re-indexed whenever arrivals outgrow the current estimate,
    with the churn charged like any other capacity change.
    """

    def __init__(self, machines, t_star, n_hint=None, rho=None, seed=0):
        self.machines = sorted(machines)
        self.t_star = float(t_star)
        self.streaming = n_hint is None
        self.n_est = max(4, n_hint or 4)
        self.k_max = class_count(self.n_est)
        self.rho = random.Random(seed).random() if rho is None else float(rho)
        if not (0 <= self.rho < 1):
            raise ParameterError("rho must lie in [0, 1)")
        self.matcher = CapacitatedMatcher()
        base = offset_capacity(0.0, self.rho)  # the t = 0 baseline, not churn
        for m in self.machines:
            for k in range(self.k_max + 1):
                self.matcher.add_right((m, k), capacity=base)
        self.procs = {}
        self.t = 0
        self.steps: list[SimpleStep] = []

    # -- bookkeeping -------------------------------------------------------

    def _classes_of(self, job_id):
        return {m: size_class(p, self.t_star, self.k_max)
                for m, p in self.procs[job_id].items()}

    def _weights(self, x):
        f = {}
        for (j, m), v in x.items():
            k = size_class(self.procs[j][m], self.t_star, self.k_max)
            f[(m, k)] = f.get((m, k), 0.0) + v
        return f

    def _grow_ladder(self, n_new):
        """Streaming re-index: extend the ladder and rebucket everything."""
        self.n_est = max(self.n_est * 4, n_new)
        new_k = class_count(self.n_est)
        base = offset_capacity(0.0, self.rho)
        for m in self.machines:
            for k in range(self.k_max + 1, new_k + 1):
                self.matcher.add_right((m, k), capacity=base)
        self.k_max = new_k

    def step(self, t, x_new, new_job=None) -> SimpleStep:
        self.t = t
        if new_job is not None:
            admissible = {m: p for m, p in new_job.procs.items()
                          if p <= self.t_star * (1 + 1e-9)}
            self.procs[new_job.id] = admissible
        if self.streaming and len(self.procs) > self.n_est:
            self._grow_ladder(len(self.procs))

        f = self._weights(x_new)
        targets = {}
        for m in self.machines:
            for k in range(self.k_max + 1):
                targets[(m, k)] = offset_capacity(f.get((m, k), 0.0), self.rho)

        moved = 0
        cap_before = self.matcher.capacity_change_total
        ups = [(v, b) for v, b in sorted(targets.items()) if b > self.matcher.capacity[v]]
        downs = [(v, b) for v, b in sorted(targets.items()) if b < self.matcher.capacity[v]]
        for v, b in ups:
            moved += self.matcher.set_capacity(v, b)
        for v, b in downs:
            moved += self.matcher.set_capacity(v, b)

        if new_job is not None:
            classes = self._classes_of(new_job.id)
            neighbors = [(m, k) for m, k in sorted(classes.items())]
            moved += self.matcher.add_left(new_job.id, neighbors)

        sigma = self.assignment()
        step = SimpleStep(t, sigma, moved,
                          self.matcher.capacity_change_total - cap_before,
                          self.makespan(sigma))
        self.steps.append(step)
        return step

    def assignment(self):
        return {u: key[0] for u, key in self.matcher.assignment().items()}

    def makespan(self, sigma=None):
        sigma = sigma if sigma is not None else self.assignment()
        loads = {}
        for j, m in sigma.items():
            loads[m] = loads.get(m, 0.0) + self.procs[j][m]
        return max(loads.values()) if loads else 0.0

    def load_report(self, eps_frac):
        """Per-machine loads against the guaranteed (4*eps + 9) * T bound."""
        bound = (4.0 * eps_frac + 9.0) * self.t_star
        loads = {}
        sigma = self.matcher.assignment()
        for j, (m, k) in sigma.items():
            loads[m] = loads.get(m, 0.0) + self.procs[j][m]
        worst = max(loads.values()) if loads else 0.0
        return {"bound": bound, "makespan": worst, "loads": loads,
                "ok": worst <= bound + 1e-9}

    def check_makespan(self, eps_frac):
        rep = self.load_report(eps_frac)
        if not rep["ok"]:
            raise BoundViolation("rounded load exceeds the guarantee", rep)
        return rep["makespan"]


def expected_offset_change(f, f_prime, draws, seed=0):
    """Monte-Carlo mean of |ceil(f+rho) - ceil(f'+rho)| over uniform rho;
    converges to |f - f'|."""
    rng = random.Random(seed)
    total = 0
    for _ in range(draws):
        rho = rng.random()
        total += abs(math.ceil(f + rho) - math.ceil(f_prime + rho))
    return total / draws
