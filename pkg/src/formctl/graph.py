"""Multi-layer d+1-rooted leader-follower graphs.

Agents are 1-indexed and leaders occupy ``1..m``. An edge ``(i, j)`` means
agent ``i`` obtains information from agent ``j``, so information flows from
``j`` to ``i``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .errors import UnassignableFollowers


@dataclass(frozen=True)
class FormationGraph:
    """Directed sensing/communication graph with designated neighbor sets.

    Attributes:
        n: number of agents.
        m: number of leaders (agents ``1..m``).
        d: ambient dimension.
        edges: directed pairs ``(i, j)``; ``i`` receives from ``j``.
        neighbor_sets: follower -> ordered designated neighbors ``N_i``.
        layers: optional explicit layer map. When omitted it is computed by
            :func:`compute_layers` on first use.
    """

    n: int
    m: int
    d: int
    edges: frozenset
    neighbor_sets: Mapping[int, tuple]
    layers: Mapping[int, int] | None = None
    _computed_layers: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "edges", frozenset((int(a), int(b)) for a, b in self.edges))
        object.__setattr__(
            self,
            "neighbor_sets",
            {int(k): tuple(int(j) for j in v) for k, v in self.neighbor_sets.items()},
        )
        if self.layers is not None:
            object.__setattr__(self, "layers", {int(k): int(v) for k, v in self.layers.items()})

    @property
    def leaders(self) -> range:
        return range(1, self.m + 1)

    @property
    def followers(self) -> range:
        return range(self.m + 1, self.n + 1)

    def is_leader(self, i: int) -> bool:
        return 1 <= i <= self.m

    def out_neighbors(self, i: int) -> list[int]:
        return sorted(j for a, j in self.edges if a == i)

    def layer_map(self) -> dict[int, int]:
        """Supplied layer map, or the greedy-peeling one (cached)."""
        if self.layers is not None:
            return dict(self.layers)
        if self._computed_layers is None:
            object.__setattr__(self, "_computed_layers", compute_layers(self.edges, self.m, self.d, self.n))
        return dict(self._computed_layers)

    def without_edge(self, edge: tuple[int, int]) -> "FormationGraph":
        """Copy of the graph with one edge removed (designated sets pruned)."""
        i, j = edge
        nbrs = {k: tuple(x for x in v if not (k == i and x == j)) for k, v in self.neighbor_sets.items()}
        return FormationGraph(self.n, self.m, self.d, self.edges - {(i, j)}, nbrs, self.layers)


def compute_layers(
    edges: Iterable[tuple[int, int]], m: int, d: int, n: int | None = None
) -> dict[int, int]:
    """Assign every agent to a layer by synchronous greedy peeling.

    Layer 1 holds the leaders. In round ``g >= 2`` every still-unassigned
    follower with at least ``d+1`` smaller-index out-neighbors among the
    agents assigned in earlier rounds joins layer ``g``.

    Raises:
        UnassignableFollowers: if peeling stalls before covering all followers.
    """
    edges = {(int(a), int(b)) for a, b in edges}
    if n is None:
        n = max([m] + [max(e) for e in edges])
    out = {i: set() for i in range(1, n + 1)}
    for a, b in edges:
        if b < a:
            out[a].add(b)
    layers = {i: 1 for i in range(1, m + 1)}
    pending = set(range(m + 1, n + 1))
    g = 1
    while pending:
        g += 1
        joined = {i for i in pending if len(out[i] & layers.keys()) >= d + 1}
        if not joined:
            raise UnassignableFollowers(pending)
        for i in joined:
            layers[i] = g
        pending -= joined
    return layers


def _max_flow_unit(adj: dict, source, sink) -> int:
    """Edmonds-Karp on a unit-capacity residual map ``adj[u][v] -> cap``."""
    flow = 0
    while True:
        parent = {source: None}
        queue = deque([source])
        while queue and sink not in parent:
            u = queue.popleft()
            for v, cap in adj[u].items():
                if cap > 0 and v not in parent:
                    parent[v] = u
                    queue.append(v)
        if sink not in parent:
            return flow
        v = sink
        while parent[v] is not None:
            u = parent[v]
            adj[u][v] -= 1
            adj[v][u] = adj[v].get(u, 0) + 1
            v = u
        flow += 1


def disjoint_path_count(graph: FormationGraph, i: int) -> int:
    """Number of internally vertex-disjoint paths from the leader set to ``i``.

    Every agent other than ``i`` is split into an in/out pair joined by a
    unit-capacity arc; a super-source feeds all leaders.
    """
    adj: dict = {"S": {}}
    for v in range(1, graph.n + 1):
        adj[(v, 0)] = {}
        adj[(v, 1)] = {}
        if v != i:
            adj[(v, 0)][(v, 1)] = 1
    for v in graph.leaders:
        adj["S"][(v, 0)] = 1
    for a, b in graph.edges:
        # information travels b -> a
        if a == b or b == i:
            continue
        adj[(b, 1)][(a, 0)] = 1
    return _max_flow_unit(adj, "S", (i, 0))


@dataclass
class Violation:
    invariant: str
    agent: int | None
    detail: str

    def __str__(self) -> str:
        who = f"agent {self.agent}: " if self.agent is not None else ""
        return f"{self.invariant}: {who}{self.detail}"


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)
    layers: dict[int, int] | None = None

    @property
    def ok(self) -> bool:
        return not self.violations

    def agents(self) -> set[int]:
        return {v.agent for v in self.violations if v.agent is not None}

    def __str__(self) -> str:
        if self.ok:
            return "graph valid"
        return "graph invalid:\n" + "\n".join(f"  - {v}" for v in self.violations)


def validate_graph(graph: FormationGraph) -> ValidationReport:
    """Check every :class:`FormationGraph` invariant and collect violations."""
    report = ValidationReport()
    bad = report.violations
    d = graph.d
    if d < 2:
        bad.append(Violation("dimension", None, f"d={d} must be >= 2"))
    if not 1 <= graph.m <= graph.n:
        bad.append(Violation("leader-count", None, f"m={graph.m}, n={graph.n}"))
    for a, b in sorted(graph.edges):
        if not (1 <= a <= graph.n and 1 <= b <= graph.n) or a == b:
            bad.append(Violation("edge", a, f"invalid edge ({a},{b})"))

    if graph.layers is not None:
        layers = dict(graph.layers)
        for i in graph.leaders:
            if layers.get(i) != 1:
                bad.append(Violation("layer-1-is-leaders", i, "leader not in layer 1"))
        for i in graph.followers:
            if layers.get(i, 0) < 2:
                bad.append(Violation("follower-layer", i, "follower must sit in a layer >= 2"))
    else:
        try:
            layers = compute_layers(graph.edges, graph.m, d, graph.n)
        except UnassignableFollowers as exc:
            layers = None
            for i in exc.followers:
                bad.append(Violation("layer-assignment", i, "cannot be placed in any layer"))
    report.layers = layers

    for i in graph.followers:
        nbrs = graph.neighbor_sets.get(i)
        if nbrs is None:
            bad.append(Violation("neighbor-set", i, "no designated neighbors"))
            continue
        if len(set(nbrs)) != len(nbrs):
            bad.append(Violation("neighbor-set", i, f"duplicate neighbors {list(nbrs)}"))
        if len(nbrs) < d + 1:
            bad.append(Violation("neighbor-count", i, f"|N_{i}|={len(nbrs)} < d+1={d + 1}"))
        for j in nbrs:
            if j >= i:
                bad.append(Violation("neighbor-index", i, f"neighbor {j} does not precede {i}"))
            if (i, j) not in graph.edges:
                bad.append(Violation("neighbor-edge", i, f"edge ({i},{j}) missing"))
            if layers is not None and layers.get(j, 0) > layers.get(i, 0):
                bad.append(Violation("neighbor-layer", i, f"neighbor {j} lies in a higher layer"))
        k = disjoint_path_count(graph, i)
        if k < d + 1:
            bad.append(Violation("reachability", i, f"only {k} disjoint leader paths, need {d + 1}"))
    return report


def fig1_graph() -> FormationGraph:
    """Six-agent planar example with three leaders and three followers."""
    edges = {(4, 1), (4, 2), (4, 3), (5, 1), (5, 2), (5, 3), (5, 4), (6, 3), (6, 4), (6, 5)}
    return FormationGraph(6, 3, 2, frozenset(edges), {4: (1, 2, 3), 5: (2, 3, 4), 6: (3, 4, 5)})


def passage_graph() -> FormationGraph:
    """Five-agent planar graph used by the bundled narrow-passage scenario."""
    nbrs = {4: (1, 2, 3), 5: (2, 3, 4)}
    edges = {(i, j) for i, js in nbrs.items() for j in js}
    return FormationGraph(5, 3, 2, frozenset(edges), nbrs)
