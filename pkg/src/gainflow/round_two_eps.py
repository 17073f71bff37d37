"""(2+O(eps))-competitive rounding via per-machine bucket/segment partitions.

For one machine, the admissible jobs are laid out on [0, X] as contiguous
*job intervals* of length x_ij, sorted by non-increasing size. A two-level
partition tiles the same range: *buckets* of length in [1/eps, 4/eps] (a
sole bucket may be shorter), each cut into *segments* of length at most
1-eps, all but the last at least 1-3eps. Every segment is one right vertex
of a bipartite matching instance; a job connects to every segment its
interval touches (single-point touches count), with fractional weight equal
to the overlap length. Since each segment carries at most 1-eps of weight,
the graph expands by 1/(1-eps) and short augmenting paths exist.

Mass changes grow or shrink the first segment that internally intersects
the affected job interval, at the same rate. A segment reaching 1-eps
re-divides its bucket into fresh segments of exactly 1-2eps (a short last
one allowed); a bucket reaching 4/eps splits into two of 2/eps; a non-last
segment dropping to 1-3eps re-divides; a non-sole bucket dropping to 1/eps
merges into a neighbour (the previous one when both exist), and a merge
beyond 3/eps splits into equal halves. Only these events create or destroy
segments, so the matching instance only changes when they fire.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass

from .errors import BoundViolation, ParameterError
from .matching import BipartiteMatcher

_TOL = 1e-12


class MachinePartition:
    """Job intervals plus the two-level bucket/segment partition for one
    machine. Mutators return (removed_segment_ids, added_segment_ids)."""

    def __init__(self, machine, eps):
        if not (0 < eps <= 0.125):
            raise ParameterError("eps must lie in (0, 1/8]")
        self.machine = machine
        self.eps = eps
        self.jobs: list = []     # job ids ordered by (-p, id)
        self.p = {}
        self.x = {}
        self._next_seg = 1
        self.seg_len = {0: 0.0}
        self.buckets: list[list] = [[0]]  # bucket -> ordered seg ids

    # -- geometry ------------------------------------------------------------

    def insert_job(self, job_id, p):
        if job_id in self.p:
            return
        key = (-p, job_id)
        keys = [(-self.p[j], j) for j in self.jobs]
        self.jobs.insert(bisect.bisect_left(keys, key), job_id)
        self.p[job_id] = p
        self.x[job_id] = 0.0

    def job_bounds(self, job_id):
        start = 0.0
        for j in self.jobs:
            if j == job_id:
                return start, start + self.x[j]
            start += self.x[j]
        raise KeyError(job_id)

    def segment_order(self):
        return [s for bucket in self.buckets for s in bucket]

    def segment_positions(self):
        """[(seg_id, start, end, bucket_index)] in geometric order."""
        out = []
        pos = 0.0
        for bi, bucket in enumerate(self.buckets):
            for s in bucket:
                out.append((s, pos, pos + self.seg_len[s], bi))
                pos += self.seg_len[s]
        return out

    @property
    def total(self):
        return sum(self.seg_len.values())

    def bucket_len(self, bi):
        return sum(self.seg_len[s] for s in self.buckets[bi])

    # -- events ----------------------------------------------------------------

    def _fresh(self):
        s = self._next_seg
        self._next_seg += 1
        return s

    def _segment_lengths_for(self, length):
        unit = 1 - 2 * self.eps
        n_full = int((length + _TOL) / unit)
        rem = length - n_full * unit
        if rem < _TOL:
            rem = 0.0
        lens = [unit] * n_full
        if rem > 0.0 or not lens:
            lens.append(max(rem, 0.0))
        return lens

    def _redivide(self, bi, removed, added):
        length = self.bucket_len(bi)
        for s in self.buckets[bi]:
            removed.append(s)
            del self.seg_len[s]
        fresh = []
        for ln in self._segment_lengths_for(length):
            s = self._fresh()
            self.seg_len[s] = ln
            fresh.append(s)
            added.append(s)
        self.buckets[bi] = fresh

    def _split_bucket(self, bi, removed, added):
        """Equal halves, then re-divide both."""
        length = self.bucket_len(bi)
        for s in self.buckets[bi]:
            removed.append(s)
            del self.seg_len[s]
        half = length / 2.0
        left, right = [], []
        for target, locs in ((half, left), (half, right)):
            for ln in self._segment_lengths_for(target):
                s = self._fresh()
                self.seg_len[s] = ln
                locs.append(s)
                added.append(s)
        self.buckets[bi:bi + 1] = [left, right]

    def _merge_bucket(self, bi, removed, added):
        other = bi - 1 if bi > 0 else bi + 1
        lo, hi = min(bi, other), max(bi, other)
        merged_len = self.bucket_len(lo) + self.bucket_len(hi)
        for s in self.buckets[lo] + self.buckets[hi]:
            removed.append(s)
            del self.seg_len[s]
        self.buckets[lo:hi + 1] = [[]]
        if merged_len > 3.0 / self.eps + _TOL:
            self.buckets[lo] = [self._keep(added, ln)
                                for ln in self._segment_lengths_for(merged_len / 2.0)]
            right = [self._keep(added, ln)
                     for ln in self._segment_lengths_for(merged_len / 2.0)]
            self.buckets.insert(lo + 1, right)
        else:
            self.buckets[lo] = [self._keep(added, ln)
                                for ln in self._segment_lengths_for(merged_len)]

    def _keep(self, added, ln):
        s = self._fresh()
        self.seg_len[s] = ln
        added.append(s)
        return s

    # -- the two mutators --------------------------------------------------------

    def increase(self, job_id, delta):
        if delta <= 0:
            return [], []
        removed, added = [], []
        guard = 0
        while delta > 1e-13:
            guard += 1
            if guard > 10_000_000:
                raise RuntimeError("increase failed to terminate")
            jstart, jend = self.job_bounds(job_id)
            target = None
            for s, a, b, bi in self.segment_positions():
                if self.x[job_id] <= _TOL:
                    if b >= jstart - _TOL:
                        target = (s, bi)
                        break
                elif b > jstart + _TOL and a < jend - _TOL:
                    target = (s, bi)
                    break
            assert target is not None, "tiling must cover the job interval"
            s, bi = target
            room_seg = (1 - self.eps) - self.seg_len[s]
            room_buc = 4.0 / self.eps - self.bucket_len(bi)
            m = max(min(delta, room_seg, room_buc), 0.0)
            self.seg_len[s] += m
            self.x[job_id] += m
            delta -= m
            if room_buc <= m + _TOL:
                self._split_bucket(bi, removed, added)
            elif room_seg <= m + _TOL:
                self._redivide(bi, removed, added)
        return removed, added

    def decrease(self, job_id, delta):
        if delta <= 0:
            return [], []
        if delta > self.x[job_id] + 1e-9:
            raise ParameterError(f"cannot remove {delta} from x = {self.x[job_id]}")
        removed, added = [], []
        guard = 0
        while delta > 1e-13 and self.x[job_id] > _TOL:
            guard += 1
            if guard > 10_000_000:
                raise RuntimeError("decrease failed to terminate")
            jstart, jend = self.job_bounds(job_id)
            target = None
            for s, a, b, bi in self.segment_positions():
                if b > jstart + _TOL and a < jend - _TOL and self.seg_len[s] > _TOL:
                    overlap = min(b, jend) - max(a, jstart)
                    if overlap > _TOL:
                        target = (s, bi, overlap)
                        break
            assert target is not None, "positive mass must overlap a segment"
            s, bi, overlap = target
            last_in_bucket = self.buckets[bi][-1] == s
            sole_bucket = len(self.buckets) == 1
            room_seg = math.inf if last_in_bucket else self.seg_len[s] - (1 - 3 * self.eps)
            room_buc = math.inf if sole_bucket else self.bucket_len(bi) - 1.0 / self.eps
            m = max(min(delta, overlap, room_seg, room_buc), 0.0)
            self.seg_len[s] -= m
            self.x[job_id] -= m
            delta -= m
            if room_buc <= m + _TOL:
                self._merge_bucket(bi, removed, added)
            elif room_seg <= m + _TOL:
                self._redivide(bi, removed, added)
            # otherwise the overlap was the binder; loop to the next segment
        return removed, added

    # -- derived matching data ------------------------------------------------------

    def touching(self, job_id):
        """Segments whose closed interval meets the job's (single points
        count), with overlap weights y."""
        jstart, jend = self.job_bounds(job_id)
        out = []
        for s, a, b, _ in self.segment_positions():
            if b >= jstart - _TOL and a <= jend + _TOL:
                y = max(0.0, min(b, jend) - max(a, jstart))
                out.append((s, y))
        return out

    def check_invariants(self):
        eps = self.eps
        x_total = sum(self.x.values())
        if abs(self.total - x_total) > 1e-9:
            raise BoundViolation(f"tiling broken: segments {self.total} vs x {x_total}")
        for bi in range(len(self.buckets)):
            blen = self.bucket_len(bi)
            if blen > 4.0 / eps + 1e-9:
                raise BoundViolation(f"bucket {bi} too long: {blen}")
            if len(self.buckets) > 1 and blen < 1.0 / eps - 1e-9:
                raise BoundViolation(f"bucket {bi} too short: {blen}")
            for s in self.buckets[bi][:-1]:
                if not (1 - 3 * eps - 1e-9 <= self.seg_len[s] <= 1 - eps + 1e-9):
                    raise BoundViolation(f"non-last segment length {self.seg_len[s]}")
            last = self.buckets[bi][-1]
            if self.seg_len[last] > 1 - eps + 1e-9:
                raise BoundViolation(f"last segment too long: {self.seg_len[last]}")
        # weights reconstruct x exactly: one merged sweep over segments and
        # job intervals (both tile [0, X] in order)
        seg_pos = self.segment_positions()
        n_seg = len(seg_pos)
        pos = 0.0
        k = 0
        for j in self.jobs:
            xj = self.x[j]
            jend = pos + xj
            got = 0.0
            kk = k
            while kk < n_seg:
                _, a, b, _ = seg_pos[kk]
                if a > jend + 1e-12:
                    break
                got += max(0.0, min(b, jend) - max(a, pos))
                if b > jend + 1e-12:
                    break
                kk += 1
            if abs(got - xj) > 1e-9:
                raise BoundViolation(f"sum of overlaps {got} != x {xj} for job {j}")
            while k < n_seg and seg_pos[k][2] < jend - 1e-12:
                k += 1
            pos = jend
        return True


@dataclass
class TwoEpsStep:
    t: int
    assignment: dict
    reassignments: int
    vertex_updates: int
    makespan: float


class TwoEpsRounder:
    """Online rounding of a fractional schedule sequence at a known target.

    Call :meth:`step` once per time step with the full fractional snapshot
    {(job, machine): weight}; arrivals carry their Job so admissible edges
    (p_ij <= target) get intervals even at weight zero.
    """

    def __init__(self, machines, t_star, eps):
        if not (0 < eps <= 0.125):
            raise ParameterError("eps must lie in (0, 1/8]")
        self.machines = sorted(machines)
        self.t_star = float(t_star)
        self.eps = float(eps)
        self.partitions = {m: MachinePartition(m, eps) for m in self.machines}
        self.matcher = BipartiteMatcher()
        for m in self.machines:
            for s in self.partitions[m].segment_order():
                self.matcher.add_right((m, s))
        self.alpha = 1.0 / (1.0 - eps)
        self.procs = {}
        self.x = {}
        self.vertex_update_total = 0
        self.steps: list[TwoEpsStep] = []

    def _seg_key(self, machine, seg):
        return (machine, seg)

    def step(self, t, x_new, new_job=None) -> TwoEpsStep:
        reassigned = 0
        if new_job is not None:
            self.procs[new_job.id] = {m: p for m, p in new_job.procs.items()
                                      if p <= self.t_star * (1 + 1e-9)}
            for m in sorted(self.procs[new_job.id]):
                self.partitions[m].insert_job(new_job.id, self.procs[new_job.id][m])

        removed, added = [], []
        pairs = sorted(set(self.x) | set(x_new))
        for (j, m) in pairs:
            cur = self.x.get((j, m), 0.0)
            new = x_new.get((j, m), 0.0)
            part = self.partitions[m]
            if new > cur + 1e-13:
                r, a = part.increase(j, new - cur)
            elif cur > new + 1e-13:
                r, a = part.decrease(j, cur - new)
            else:
                continue
            removed.extend((m, s) for s in r)
            added.extend((m, s) for s in a)
        self.x = {k: v for k, v in x_new.items() if v > 1e-13}

        churn = set(removed) & set(added)
        dead = [k for k in removed if k not in churn and k in self.matcher.right]
        born = [k for k in added if k not in churn]
        born = [k for k in born if k[1] in self.partitions[k[0]].seg_len]
        self.vertex_update_total += len(dead) + len(born)

        for key in born:
            self.matcher.add_right(key)
        # Fresh segments pick up edges to every live job that touches them;
        # surviving segments keep their edges (touches never detach).
        born_set = set(born)
        for m in sorted({k[0] for k in born}):
            part = self.partitions[m]
            for j in part.jobs:
                if j in self.matcher.left:
                    for s, _ in part.touching(j):
                        if (m, s) in born_set:
                            self.matcher.add_edge(j, (m, s))
        for key in dead:
            reassigned += self.matcher.remove_right(key)

        if new_job is not None:
            neighbors = []
            for m in sorted(self.procs[new_job.id]):
                for s, _ in self.partitions[m].touching(new_job.id):
                    neighbors.append((m, s))
            self.matcher.add_left(new_job.id, neighbors)

        sigma = self.assignment()
        step = TwoEpsStep(t, sigma, reassigned, len(dead) + len(born), self.makespan(sigma))
        self.steps.append(step)
        return step

    def assignment(self):
        return {u: key[0] for u, key in self.matcher.match_left.items()}

    def makespan(self, sigma=None):
        sigma = sigma or self.assignment()
        loads = {}
        for j, m in sigma.items():
            loads[m] = loads.get(m, 0.0) + self.procs[j][m]
        return max(loads.values()) if loads else 0.0

    def makespan_bound(self, c_two_eps=16.0):
        return (2.0 + c_two_eps * self.eps) * self.t_star

    def check_makespan(self, c_two_eps=16.0):
        got = self.makespan()
        bound = self.makespan_bound(c_two_eps)
        if got > bound + 1e-9:
            raise BoundViolation(f"load {got} exceeds {bound}",
                                 {"makespan": got, "bound": bound})
        return got

    def check_partitions(self):
        for part in self.partitions.values():
            part.check_invariants()
        return True


def offline_round(jobs, x, eps=0.125) -> dict:
    """One-shot batch rounding: build the partitions from a fractional
    assignment {(job, machine): weight} and match from scratch.

    Each job must be (close to) fully assigned; the result maps job ids to
    machines with per-machine load at most (1+O(eps)) * fractional load
    plus one largest job."""
    jobs = list(jobs)
    by_id = {j.id: j for j in jobs}
    machines = sorted({m for (_, m) in x})
    parts = {m: MachinePartition(m, eps) for m in machines}
    for (j, m), v in sorted(x.items()):
        parts[m].insert_job(j, by_id[j].procs[m])
    for (j, m), v in sorted(x.items()):
        if v > 0:
            parts[m].increase(j, v)
    matcher = BipartiteMatcher()
    for m in machines:
        for s in parts[m].segment_order():
            matcher.add_right((m, s))
    for j in sorted(by_id):
        neighbors = []
        for m in machines:
            if (j, m) in x:
                neighbors.extend((m, s) for s, _ in parts[m].touching(j))
        matcher.add_left(j, neighbors)
    return {j: key[0] for j, key in matcher.match_left.items()}
