"""Fixed trader network with tunable belief homophily."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

MIN_DEGREE = 2


class NetworkConstructionError(ValueError):
    pass


@dataclass(frozen=True)
class Network:
    n: int
    edges: frozenset

    def __post_init__(self):
        adj = [[] for _ in range(self.n)]
        for a, b in self.edges:
            adj[a].append(b)
            adj[b].append(a)
        object.__setattr__(self, "_adjacency", tuple(tuple(sorted(x)) for x in adj))

    def neighbors(self, i: int) -> tuple[int, ...]:
        return self._adjacency[i]

    def degree(self, i: int) -> int:
        return len(self._adjacency[i])

    def cross_fraction(self, beliefs: Sequence) -> float:
        """Share of edges joining traders whose entries in ``beliefs`` differ."""
        if not self.edges:
            return 0.0
        cross = sum(1 for a, b in self.edges if beliefs[a] != beliefs[b])
        return cross / len(self.edges)


class _Builder:
    def __init__(self, n, seg, groups, rng):
        self.n = n
        self.seg = seg
        self.groups = groups
        self.rng = rng
        self.adj = [set() for _ in range(n)]
        self.edges: set = set()
        members: dict = {}
        for i, g in enumerate(groups):
            members.setdefault(g, []).append(i)
        self.members = {g: np.array(m) for g, m in members.items()}
        self.everyone = np.arange(n)

    def add(self, a, b):
        self.adj[a].add(b)
        self.adj[b].add(a)
        self.edges.add((min(a, b), max(a, b)))

    def remove(self, a, b):
        self.adj[a].discard(b)
        self.adj[b].discard(a)
        self.edges.discard((min(a, b), max(a, b)))

    def pools(self, i):
        """Candidate pools in preference order for one link draw by ``i``."""
        same = self.members[self.groups[i]]
        if self.seg >= 1.0:
            return [same]
        if self.rng.random() < self.seg:
            return [same, self.everyone]
        return [self.everyone, same]

    def draw_partner(self, i, eligible):
        for pool in self.pools(i):
            cands = [j for j in pool if j != i and j not in self.adj[i] and eligible(j)]
            if cands:
                return int(cands[self.rng.integers(len(cands))])
        return None

    def allowed(self, a, b):
        return self.seg < 1.0 or self.groups[a] == self.groups[b]

    def shuffled_edges(self):
        edges = sorted(self.edges)
        return [edges[k] for k in self.rng.permutation(len(edges))]

    def splice(self, i, j):
        """Give ``i`` and ``j`` one extra link each by splitting an existing edge.

        With ``i == j`` the split edge's two ends both attach to ``i``.
        Degrees of the split edge's endpoints are unchanged.
        """
        for u, v in self.shuffled_edges():
            for a, b in ((u, v), (v, u)):
                if i in (a, b) or j in (a, b):
                    continue
                if a in self.adj[i] or b in self.adj[j]:
                    continue
                if not (self.allowed(i, a) and self.allowed(j, b)):
                    continue
                self.remove(u, v)
                self.add(i, a)
                self.add(j, b)
                return True
        return False


def generate_network(
    n: int,
    n_edges: int,
    seg: float,
    initial_beliefs: Sequence,
    rng: np.random.Generator,
) -> Network:
    """Random graph with exactly ``n_edges`` edges and minimum degree 2.

    Phase 1 walks the traders in random order and links each one until it
    has two partners, drawing only from traders that still need links, so
    it ends with exactly ``n`` edges. Phase 2 adds random edges up to
    ``n_edges``. Every partner draw uses the trader's own initial-belief
    group with probability ``seg`` and the whole population otherwise;
    at ``seg == 1`` links across belief groups are never made.
    """
    if n < 4:
        raise NetworkConstructionError("need at least 4 traders")
    if not 0.0 <= seg <= 1.0:
        raise NetworkConstructionError("seg must lie in [0, 1]")
    if len(initial_beliefs) != n:
        raise NetworkConstructionError("one initial belief per trader required")
    if n_edges < n:
        raise NetworkConstructionError(
            f"n_edges={n_edges} < n={n}: minimum degree {MIN_DEGREE} is unreachable"
        )
    if n_edges > n * (n - 1) // 2:
        raise NetworkConstructionError(f"n_edges={n_edges} exceeds a simple graph on {n} nodes")
    groups = list(initial_beliefs)
    if seg >= 1.0:
        sizes: dict = {}
        for g in groups:
            sizes[g] = sizes.get(g, 0) + 1
        if any(s < 3 for s in sizes.values()):
            raise NetworkConstructionError("seg=1 needs every belief group to have at least 3 traders")
        capacity = sum(s * (s - 1) // 2 for s in sizes.values())
        if n_edges > capacity:
            raise NetworkConstructionError(f"seg=1 allows at most {capacity} edges")

    b = _Builder(n, seg, groups, rng)

    for i in rng.permutation(n):
        i = int(i)
        while len(b.adj[i]) < MIN_DEGREE:
            j = b.draw_partner(i, lambda j: len(b.adj[j]) < MIN_DEGREE)
            if j is not None:
                b.add(i, j)
                continue
            if MIN_DEGREE - len(b.adj[i]) >= 2:
                ok = b.splice(i, i)
            else:
                others = [
                    j for j in range(n)
                    if j != i and len(b.adj[j]) < MIN_DEGREE and b.allowed(i, j)
                ]
                ok = any(b.splice(i, j) for j in others)
            if not ok:
                raise NetworkConstructionError("could not reach minimum degree 2")

    max_draws = 50 * n_edges
    draws = 0
    while len(b.edges) < n_edges:
        i = int(rng.integers(n))
        j = b.draw_partner(i, lambda j: True)
        draws += 1
        if j is not None:
            b.add(i, j)
            continue
        if draws > max_draws:
            free = [
                (x, y) for x in range(n) for y in range(x + 1, n)
                if y not in b.adj[x] and b.allowed(x, y)
            ]
            if not free:
                raise NetworkConstructionError("no room for further edges")
            x, y = free[int(rng.integers(len(free)))]
            b.add(x, y)

    return Network(n=n, edges=frozenset(b.edges))


def richest_neighbor(net: Network, trader_id: int, wealth: Sequence[float]) -> int:
    """Neighbour with the most wealth; ties go to the lowest id."""
    neighbors = net.neighbors(trader_id)
    if not neighbors:
        raise ValueError(f"trader {trader_id} has no neighbours")
    best = neighbors[0]
    for j in neighbors[1:]:
        if wealth[j] > wealth[best]:
            best = j
    return best


EDGE_COLUMNS = ("trader_a", "trader_b")


def write_edge_list(net: Network, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(EDGE_COLUMNS)
        writer.writerows(sorted(net.edges))


def read_edge_list(path, n: int) -> Network:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != EDGE_COLUMNS:
            raise ValueError(f"{path}: expected header {','.join(EDGE_COLUMNS)}")
        edges = frozenset((int(r["trader_a"]), int(r["trader_b"])) for r in reader)
    return Network(n=n, edges=edges)
