"""Online bipartite matching with left arrivals and right-side updates.

The matching always covers the left side, given the caller's promise that
the graph expands: |N(A)| >= alpha * |A| for every left subset A. Under that
promise a BFS augmenting path has at most 2*(floor(log_alpha |L|) + 1) + 1
edges; every search's length is recorded so replays can audit the bound.

The capacitated wrapper gives each right vertex b(v) interchangeable copies.
Capacity decreases prefer unmatched copies, then the most recently matched
one; each removal of a matched copy triggers one augmenting-path repair.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

from .errors import DuplicateVertex, NoAugmentingPath


@dataclass
class PathRecord:
    length: int
    left_size: int
    op: str


class BipartiteMatcher:
    """Maintains a matching covering L under left arrivals and right
    insert/delete. Deterministic: BFS scans each left vertex's adjacency
    list in insertion order, so callers control tie-breaking by the order
    in which they list neighbors."""

    def __init__(self):
        self.left = {}    # u -> list of right neighbours (ordered)
        self.right = {}   # v -> set of left neighbours
        self.match_left = {}
        self.match_right = {}
        self.reassignments = 0
        self.path_log: list[PathRecord] = []
        self._clock = 0
        self.matched_at = {}  # right vertex -> time of last matching change

    # -- structure updates ---------------------------------------------------

    def add_right(self, v, neighbors=()):
        if v in self.right:
            raise DuplicateVertex(f"right vertex {v!r} already present")
        self.right[v] = set()
        for u in neighbors:
            self.add_edge(u, v)

    def add_edge(self, u, v):
        """Edge insertion between existing vertices; never invalidates the
        matching, so no repair is needed."""
        if v not in self.left[u]:
            self.left[u].append(v)
            self.right[v].add(u)

    def add_left(self, u, neighbors) -> int:
        """Insert u and match it via a shortest augmenting path. Returns the
        number of previously matched left vertices whose partner changed."""
        if u in self.left:
            raise DuplicateVertex(f"left vertex {u!r} already present")
        self.left[u] = []
        for v in neighbors:
            if v in self.right:
                self.left[u].append(v)
                self.right[v].add(u)
        return self._repair(u, op="add_left")

    def remove_right(self, v) -> int:
        """Delete v; its matched partner (if any) is rematched. Returns the
        number of left vertices whose partner changed (the orphan counts)."""
        orphan = self.match_right.pop(v, None)
        for u in self.right.pop(v):
            self.left[u] = [w for w in self.left[u] if w != v]
        self.matched_at.pop(v, None)
        if orphan is None:
            return 0
        del self.match_left[orphan]
        return self._repair(orphan, op="remove_right") + 1

    # -- augmenting search ----------------------------------------------------

    def _repair(self, u, op) -> int:
        path = self._shortest_augmenting_path(u)
        if path is None:
            raise NoAugmentingPath(f"no augmenting path for {u!r}; "
                                   "the expansion promise is violated")
        self.path_log.append(PathRecord(len(path) - 1, len(self.left), op))
        # path alternates u, v1, u1, v2, ..., vk with vk free
        flipped = 0
        self._clock += 1
        for i in range(0, len(path), 2):
            lu, rv = path[i], path[i + 1]
            if lu in self.match_left:
                flipped += 1
            self.match_left[lu] = rv
            self.match_right[rv] = lu
            self.matched_at[rv] = (self._clock, i)
        self.reassignments += flipped
        return flipped

    def _shortest_augmenting_path(self, root):
        """BFS over alternating paths from ``root`` to the first free right
        vertex; returns the edge list as [u0, v1, u1, v2, ...]."""
        parent = {}
        seen_r, seen_l = set(), {root}
        queue = deque([root])
        target = None
        while queue and target is None:
            u = queue.popleft()
            for v in self.left[u]:
                if v in seen_r:
                    continue
                seen_r.add(v)
                parent[v] = u
                w = self.match_right.get(v)
                if w is None:
                    target = v
                    break
                if w not in seen_l:
                    seen_l.add(w)
                    parent[w] = v
                    queue.append(w)
        if target is None:
            return None
        path = [target]
        node = target
        while node != root:
            node = parent[node]
            path.append(node)
        path.reverse()
        return path

    # -- diagnostics -----------------------------------------------------------

    def assert_cover(self):
        for u in self.left:
            assert u in self.match_left, f"left vertex {u!r} unmatched"
            v = self.match_left[u]
            assert self.match_right.get(v) == u
        return True

    def check_expansion(self, alpha, cap=16):
        """Exhaustive Hall-style audit, debug only (exponential in |L|)."""
        lefts = sorted(self.left, key=repr)
        if len(lefts) > cap:
            raise ValueError(f"|L| = {len(lefts)} exceeds the audit cap {cap}")
        for mask in range(1, 1 << len(lefts)):
            subset = [lefts[i] for i in range(len(lefts)) if mask >> i & 1]
            hood = set()
            for u in subset:
                hood.update(self.left[u])
            if len(hood) < alpha * len(subset) - 1e-9:
                return False
        return True


def path_length_bound(alpha, left_size):
    """Edges on a shortest augmenting path under expansion alpha."""
    if left_size <= 0:
        return 1
    depth = math.floor(math.log(left_size, alpha)) + 1
    return 2 * depth + 1


class CapacitatedMatcher:
    """b-matching via copies: right vertex v with capacity b(v) appears as
    copies (v, 0), (v, 1), ...; left vertices match to copies.

    Declared adjacency (which v's each u may use) is kept independently of
    the live copies, so a vertex whose capacity was 0 on a job's arrival
    still connects to that job once its capacity grows."""

    def __init__(self):
        self.core = BipartiteMatcher()
        self.capacity = {}
        self.copies = {}       # v -> list of live copy ids
        self.adj_of_left = {}  # u -> ordered list of declared v's
        self.adj_of_right = {}  # v -> ordered list of declared u's
        self._fresh = {}
        self.capacity_change_total = 0

    def _copy_key(self, v):
        k = self._fresh.get(v, 0)
        self._fresh[v] = k + 1
        return (v, k)

    def add_right(self, v, capacity=0):
        if v in self.capacity:
            raise DuplicateVertex(f"right vertex {v!r} already present")
        self.capacity[v] = 0
        self.copies[v] = []
        self.adj_of_right[v] = []
        self.set_capacity(v, capacity, _count=False)

    def add_edge(self, u, v):
        """Declare u-v adjacency after the fact; existing copies of v pick
        up the edge immediately."""
        if v not in self.adj_of_left[u]:
            self.adj_of_left[u].append(v)
            self.adj_of_right[v].append(u)
            for ck in self.copies[v]:
                self.core.add_edge(u, ck)

    def add_left(self, u, neighbor_vs) -> int:
        if u in self.adj_of_left:
            raise DuplicateVertex(f"left vertex {u!r} already present")
        self.adj_of_left[u] = []
        copies = []
        for v in neighbor_vs:
            if v not in self.capacity:
                raise KeyError(f"unknown right vertex {v!r}")
            self.adj_of_left[u].append(v)
            self.adj_of_right[v].append(u)
            copies.extend(self.copies[v])
        return self.core.add_left(u, copies)

    def set_capacity(self, v, b_new, _count=True) -> int:
        """Returns the number of reassignments triggered. Adding copies never
        rematches; removing prefers unmatched copies, then the most recently
        matched one."""
        if b_new < 0:
            raise ValueError("capacities must be non-negative")
        b_old = self.capacity[v]
        if _count:
            self.capacity_change_total += abs(b_new - b_old)
        moved = 0
        while self.capacity[v] < b_new:
            ck = self._copy_key(v)
            self.core.add_right(ck, [u for u in self.adj_of_right[v]
                                     if u in self.core.left])
            self.copies[v].append(ck)
            self.capacity[v] += 1
        while self.capacity[v] > b_new:
            ck = self._pick_removal(v)
            self.copies[v].remove(ck)
            moved += self.core.remove_right(ck)
            self.capacity[v] -= 1
        return moved

    def _pick_removal(self, v):
        unmatched = [ck for ck in self.copies[v] if ck not in self.core.match_right]
        if unmatched:
            return unmatched[-1]
        return max(self.copies[v], key=lambda ck: self.core.matched_at.get(ck, (0, 0)))

    def assignment(self):
        return {u: ck[0] for u, ck in self.core.match_left.items()}

    @property
    def reassignments(self):
        return self.core.reassignments

    @property
    def path_log(self):
        return self.core.path_log
