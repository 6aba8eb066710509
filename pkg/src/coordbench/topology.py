"""Communication graph construction: random families, structural rewrites, round budgets.

Graphs are undirected, simple, and connected, with agents labelled 0..n-1.
Generation is deterministic for a fixed (family, n, seed, params) tuple;
disconnected draws are retried with a derived sub-seed so the family's
distribution is preserved.
"""

from __future__ import annotations

import enum
import hashlib
import random
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, TextIO

import numpy as np
from scipy.spatial import Delaunay as _SciPyDelaunay
from scipy.spatial import QhullError

if TYPE_CHECKING:
    from .tasks import TaskKind

MAX_SEED = 2**64 - 1
CONNECT_RETRIES = 64

Edge = tuple[int, int]


class ParameterError(ValueError):
    """A graph spec violates its family's parameter constraints."""


class ConnectivityError(RuntimeError):
    """No connected draw within the retry bound (degenerate parameters)."""


class DisconnectedGraphError(ValueError):
    """The operation requires a connected graph."""


class Family(enum.Enum):
    SMALL_WORLD = "smallworld"
    SCALE_FREE = "scalefree"
    DELAUNAY = "delaunay"

    @classmethod
    def parse(cls, name: str) -> "Family":
        key = name.strip().lower().replace("-", "").replace("_", "")
        for fam in cls:
            if fam.value == key:
                return fam
        raise ParameterError(f"unknown graph family: {name!r}")


class Variant(enum.Enum):
    """Interaction structure derived from a base graph.

    STAR is realized as the complete graph: every agent talks to a shared hub
    position, which is behaviorally a fully connected topology.
    """

    BASE = "base"
    SEQUENTIAL = "sequential"
    HIERARCHICAL = "hierarchical"
    STAR = "star"

    @classmethod
    def parse(cls, name: str) -> "Variant":
        key = name.strip().lower()
        for var in cls:
            if var.value == key:
                return var
        raise ParameterError(f"unknown topology variant: {name!r}")


def mix_seed(seed: int, *salts: object) -> int:
    """Derive a stable 64-bit sub-seed from a seed and salt values."""
    h = hashlib.sha256(str(seed).encode())
    for salt in salts:
        h.update(b"/")
        h.update(str(salt).encode())
    return int.from_bytes(h.digest()[:8], "big")


def default_params(family: Family, n: int) -> dict:
    """Family parameters used when a spec does not override them.

    Small-world ring degree clamps to 2 at n=4 to honor k < n.
    """
    if family is Family.SMALL_WORLD:
        return {"k": 4 if n > 4 else 2, "p": 0.1}
    if family is Family.SCALE_FREE:
        return {"m": min(2, n - 1)}
    return {}


@dataclass(frozen=True)
class GraphSpec:
    """Recipe for one random graph draw."""

    family: Family
    n: int
    seed: int
    params: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ParameterError(f"need n >= 2 agents, got {self.n}")
        if not 0 <= self.seed <= MAX_SEED:
            raise ParameterError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if not self.params:
            object.__setattr__(self, "params", default_params(self.family, self.n))
        self._validate_params()

    def _validate_params(self) -> None:
        params = dict(self.params)
        if self.family is Family.SMALL_WORLD:
            k = params.pop("k", None)
            p = params.pop("p", None)
            if k is None or p is None:
                raise ParameterError("small-world requires params k and p")
            if k % 2 != 0 or not 2 <= k < self.n:
                raise ParameterError(f"small-world needs even k with 2 <= k < n, got k={k}, n={self.n}")
            if not 0.0 <= p <= 1.0:
                raise ParameterError(f"rewiring probability must be in [0, 1], got {p}")
        elif self.family is Family.SCALE_FREE:
            m = params.pop("m", None)
            if m is None:
                raise ParameterError("scale-free requires param m")
            if not 1 <= m < self.n:
                raise ParameterError(f"scale-free needs 1 <= m < n, got m={m}, n={self.n}")
        if params:
            raise ParameterError(f"unknown params for {self.family.value}: {sorted(params)}")


class Graph:
    """Undirected simple graph over agent IDs 0..n-1.

    Edges are stored as sorted (u, v) pairs with u < v; adjacency is the
    per-node view of the same edge set, with neighbor lists kept sorted so
    traversal order is deterministic.
    """

    __slots__ = ("n", "edges", "adjacency")

    def __init__(self, n: int, edges: Iterable[Edge]):
        if n < 2:
            raise ParameterError(f"need n >= 2 agents, got {n}")
        normalized = set()
        for u, v in edges:
            if u == v:
                raise ParameterError(f"self-loop on node {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise ParameterError(f"edge ({u}, {v}) out of range for n={n}")
            normalized.add((u, v) if u < v else (v, u))
        self.n = n
        self.edges: tuple[Edge, ...] = tuple(sorted(normalized))
        adj: list[list[int]] = [[] for _ in range(n)]
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        self.adjacency: tuple[tuple[int, ...], ...] = tuple(tuple(sorted(a)) for a in adj)

    def neighbors(self, u: int) -> tuple[int, ...]:
        return self.adjacency[u]

    def degree(self, u: int) -> int:
        return len(self.adjacency[u])

    def max_degree(self) -> int:
        return max(len(a) for a in self.adjacency)

    def has_edge(self, u: int, v: int) -> bool:
        return v in self.adjacency[u]

    def is_connected(self) -> bool:
        seen = {0}
        queue = deque([0])
        while queue:
            u = queue.popleft()
            for v in self.adjacency[u]:
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
        return len(seen) == self.n

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return self.n == other.n and self.edges == other.edges

    def __hash__(self) -> int:
        return hash((self.n, self.edges))

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, edges={len(self.edges)})"


def _small_world_edges(n: int, params: dict, rng: random.Random) -> set[Edge]:
    # Ring lattice: node i linked to i+-1 .. i+-k/2 (mod n), then each lattice
    # edge's far endpoint is rewired with probability p.
    k, p = params["k"], params["p"]
    edges: set[Edge] = set()
    lattice: list[Edge] = []
    for j in range(1, k // 2 + 1):
        for i in range(n):
            u, v = i, (i + j) % n
            lattice.append((u, v))
            edges.add((min(u, v), max(u, v)))
    if p <= 0.0:
        return edges
    for u, v in lattice:
        if rng.random() >= p:
            continue
        choices = [w for w in range(n) if w != u and (min(u, w), max(u, w)) not in edges]
        if not choices:
            continue  # u saturated, keep the lattice edge
        w = rng.choice(choices)
        edges.discard((min(u, v), max(u, v)))
        edges.add((min(u, w), max(u, w)))
    return edges


def _scale_free_edges(n: int, params: dict, rng: random.Random) -> set[Edge]:
    # Preferential attachment seeded with a complete graph on the first m
    # nodes; each later node attaches to m distinct degree-weighted targets.
    m = params["m"]
    edges: set[Edge] = {(u, v) for u in range(m) for v in range(u + 1, m)}
    weighted: list[int] = [u for u in range(m) for _ in range(m - 1)]
    for new in range(m, n):
        targets: set[int] = set()
        while len(targets) < m:
            if weighted:
                pick = weighted[rng.randrange(len(weighted))]
            else:
                pick = rng.randrange(new)
            targets.add(pick)
        for t in sorted(targets):
            edges.add((min(new, t), max(new, t)))
            weighted.append(t)
        weighted.extend([new] * m)
    return edges


def delaunay_points(n: int, rng: random.Random) -> list[tuple[float, float]]:
    """Draw n points uniformly in the unit square, with a tiny jitter so
    degenerate (collinear/cocircular) layouts cannot occur at small n."""
    eps = 1e-9
    return [
        (rng.random() + eps * rng.random(), rng.random() + eps * rng.random())
        for _ in range(n)
    ]


def _delaunay_edges(n: int, params: dict, rng: random.Random) -> set[Edge]:
    points = delaunay_points(n, rng)
    if n == 2:
        return {(0, 1)}
    try:
        tri = _SciPyDelaunay(np.asarray(points))
    except QhullError:
        return set()  # degenerate layout: fail connectivity, retry with new points
    edges: set[Edge] = set()
    for simplex in tri.simplices:
        a, b, c = (int(x) for x in simplex)
        for u, v in ((a, b), (b, c), (a, c)):
            edges.add((min(u, v), max(u, v)))
    return edges


_BUILDERS = {
    Family.SMALL_WORLD: _small_world_edges,
    Family.SCALE_FREE: _scale_free_edges,
    Family.DELAUNAY: _delaunay_edges,
}


def generate(spec: GraphSpec) -> Graph:
    """Draw a simple connected graph of the requested family.

    Deterministic for a fixed spec. A disconnected draw is retried with an
    incremented sub-seed up to CONNECT_RETRIES times before giving up.
    """
    build = _BUILDERS[spec.family]
    for attempt in range(CONNECT_RETRIES):
        rng = random.Random(mix_seed(spec.seed, spec.family.value, attempt))
        g = Graph(spec.n, build(spec.n, spec.params, rng))
        if g.is_connected():
            return g
    raise ConnectivityError(
        f"no connected {spec.family.value} graph in {CONNECT_RETRIES} draws "
        f"(n={spec.n}, params={spec.params}); parameters look degenerate"
    )


def bfs_order(g: Graph, root: int) -> list[int]:
    """Nodes in BFS discovery order from root, neighbors visited in ID order."""
    order = [root]
    seen = {root}
    queue = deque([root])
    while queue:
        u = queue.popleft()
        for v in g.adjacency[u]:
            if v not in seen:
                seen.add(v)
                order.append(v)
                queue.append(v)
    if len(order) != g.n:
        raise DisconnectedGraphError(f"graph is disconnected: reached {len(order)} of {g.n} nodes")
    return order


def bfs_tree_edges(g: Graph, root: int) -> list[Edge]:
    """Parent-child edges of the BFS spanning tree rooted at root."""
    parent: dict[int, int] = {root: root}
    queue = deque([root])
    edges: list[Edge] = []
    while queue:
        u = queue.popleft()
        for v in g.adjacency[u]:
            if v not in parent:
                parent[v] = u
                edges.append((min(u, v), max(u, v)))
                queue.append(v)
    if len(parent) != g.n:
        raise DisconnectedGraphError(f"graph is disconnected: reached {len(parent)} of {g.n} nodes")
    return edges


def rewrite(base: Graph, variant: Variant) -> Graph:
    """Derive an interaction structure from a base graph, keeping the node set.

    SEQUENTIAL is a path over the base's BFS discovery order from node 0,
    HIERARCHICAL the BFS spanning tree rooted at the max-degree node (lowest
    ID on ties), and STAR the complete graph.
    """
    if variant is Variant.BASE:
        return base
    n = base.n
    if variant is Variant.STAR:
        return Graph(n, ((u, v) for u in range(n) for v in range(u + 1, n)))
    if variant is Variant.SEQUENTIAL:
        order = bfs_order(base, 0)
        return Graph(n, (tuple(sorted((order[i], order[i + 1]))) for i in range(n - 1)))
    # HIERARCHICAL: root at the busiest node so the tree stays shallow
    root = max(range(n), key=lambda u: (base.degree(u), -u))
    return Graph(n, bfs_tree_edges(base, root))


def diameter(g: Graph) -> int:
    """Exact diameter via BFS from every node."""
    best = 0
    for src in range(g.n):
        dist = {src: 0}
        queue = deque([src])
        while queue:
            u = queue.popleft()
            for v in g.adjacency[u]:
                if v not in dist:
                    dist[v] = dist[u] + 1
                    queue.append(v)
        if len(dist) != g.n:
            raise DisconnectedGraphError(f"graph is disconnected: node {src} cannot reach all nodes")
        best = max(best, max(dist.values()))
    return best


class BudgetRule(enum.Enum):
    GLOBAL_TASK = "global"
    LOCAL_TASK_SMALL_N = "local_small"
    LOCAL_TASK_LARGE_N = "local_large"


@dataclass(frozen=True)
class RoundBudget:
    """Synchronous round horizon for one episode."""

    T: int
    D: int
    rule: BudgetRule

    def __post_init__(self) -> None:
        if self.T < 1:
            raise ParameterError(f"round budget must be positive, got {self.T}")


def round_budget(g: Graph, task: "TaskKind", n: int | None = None) -> RoundBudget:
    """Round horizon for a task on a graph.

    Global agreement tasks run 2D+1 rounds, enough for information from any
    node to reach any other and return. Local tasks get a flat 8-round floor,
    switching to max(8, 2D+1) past 16 agents.
    """
    n = g.n if n is None else n
    d = diameter(g)
    if task.is_global:
        return RoundBudget(T=2 * d + 1, D=d, rule=BudgetRule.GLOBAL_TASK)
    if n <= 16:
        return RoundBudget(T=8, D=d, rule=BudgetRule.LOCAL_TASK_SMALL_N)
    return RoundBudget(T=max(8, 2 * d + 1), D=d, rule=BudgetRule.LOCAL_TASK_LARGE_N)


def write_edgelist(g: Graph, fp: TextIO) -> None:
    """Edge-list text format: header "n <count>", then one sorted "u v" per line."""
    fp.write(f"n {g.n}\n")
    for u, v in g.edges:
        fp.write(f"{u} {v}\n")


def read_edgelist(fp: TextIO) -> Graph:
    header = fp.readline().split()
    if len(header) != 2 or header[0] != "n":
        raise ParameterError(f"bad edge-list header: {' '.join(header)!r}")
    n = int(header[1])
    edges = []
    for line in fp:
        line = line.strip()
        if not line:
            continue
        u, v = line.split()
        edges.append((int(u), int(v)))
    return Graph(n, edges)


def save_edgelist(g: Graph, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fp:
        write_edgelist(g, fp)


def load_edgelist(path: str | Path) -> Graph:
    with open(path, "r", encoding="utf-8") as fp:
        return read_edgelist(fp)
