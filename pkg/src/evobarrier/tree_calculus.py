"""Tree calculus on cost graphs.

Everything combinatorial lives here: rooted in-trees (each non-root state
has exactly one successor and all paths lead to the root), the potential
obtained from minimum-cost in-trees, edge potentials, elevations computed
as minimax path values, the energy barrier, and the resistance/coradius
quantities of the limit kernel.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .cost_graph import CostGraph, check_admissible, recurrent_classes
from .errors import EnumerationCapError, InadmissibleGraphError

DEFAULT_TREE_CAP = 10**7
COST_TOL = 1e-9


@dataclass(frozen=True)
class Arborescence:
    """An in-tree: one outgoing edge per non-root state, no cycles."""

    root: str
    edges: tuple[tuple[str, str], ...]
    cost: float


@dataclass
class PotentialReport:
    """Potential-level summary of a cost graph.

    ``quasi_potential`` fills the first four result fields; ``full_report``
    also computes the tree-optimality gap, edge potentials, elevations and
    the energy barrier with its maximizing pair.
    """

    states: tuple[str, ...]
    tilde_V: np.ndarray
    V: np.ndarray
    c0: float
    S0: frozenset[str]
    theta: float | None = None
    energy_barrier: float | None = None
    W: np.ndarray | None = None
    elevation_values: np.ndarray | None = None
    elevation_paths: dict = field(default_factory=dict)
    barrier_witness: tuple[str, str] | None = None


def _require_admissible(graph: CostGraph):
    if not check_admissible(graph):
        raise InadmissibleGraphError(
            "cost graph is not strongly connected through finite-cost edges"
        )


def _successor_lists(graph: CostGraph) -> list[list[int]]:
    cost = graph.cost
    n = graph.n
    return [
        [j for j in range(n) if j != i and math.isfinite(cost[i, j])]
        for i in range(n)
    ]


# ---------------------------------------------------------------------------
# enumeration


def enumerate_trees(graph: CostGraph, root: str, cap: int = DEFAULT_TREE_CAP) -> list[Arborescence]:
    """All finite-cost in-trees rooted at ``root``, in lexicographic order of
    their successor assignment (states scanned in declared order)."""
    if cap < 1:
        raise ValueError("cap must be >= 1")
    _require_admissible(graph)
    r = graph.index(root)
    n = graph.n
    succs = _successor_lists(graph)
    others = [i for i in range(n) if i != r]

    candidates = 1.0
    for i in others:
        candidates *= max(len(succs[i]), 1)
        if candidates > cap:
            raise EnumerationCapError(
                f"state space too large for enumeration: more than cap={cap} "
                "candidate trees"
            )

    cost = graph.cost
    states = graph.states
    out: list[Arborescence] = []
    assigned = np.full(n, -1, dtype=int)

    def creates_cycle(i: int, j: int) -> bool:
        u = j
        while u != r and assigned[u] != -1:
            u = assigned[u]
            if u == i:
                return True
        return False

    def rec(pos: int):
        if pos == len(others):
            edges = tuple((states[i], states[assigned[i]]) for i in others)
            total = float(sum(cost[i, assigned[i]] for i in others))
            out.append(Arborescence(states[r], edges, total))
            if len(out) > cap:
                raise EnumerationCapError(
                    f"state space too large for enumeration: more than cap={cap} trees"
                )
            return
        i = others[pos]
        for j in succs[i]:
            if creates_cycle(i, j):
                continue
            assigned[i] = j
            rec(pos + 1)
            assigned[i] = -1

    rec(0)
    return out


# ---------------------------------------------------------------------------
# minimum-cost in-tree (Chu-Liu/Edmonds on the reversed graph)


def _edmonds_min_arborescence(n: int, edges: list[tuple[int, int, float]], root: int) -> float:
    """Minimum total weight over spanning out-arborescences rooted at ``root``.

    ``edges`` are (u, v, w) with finite w.  Returns math.inf when some
    vertex is unreachable.
    """
    if n == 1:
        return 0.0
    INF = math.inf
    in_w = [INF] * n
    in_u = [-1] * n
    for u, v, w in edges:
        if v != root and u != v and w < in_w[v]:
            in_w[v] = w
            in_u[v] = u
    for v in range(n):
        if v != root and in_u[v] == -1:
            return INF

    # find a cycle in the parent pointers
    comp = [-1] * n
    mark = [-1] * n
    cycle = None
    for v in range(n):
        if v == root or mark[v] != -1:
            continue
        path = []
        u = v
        while u != root and mark[u] == -1:
            mark[u] = v
            path.append(u)
            u = in_u[u]
        if u != root and mark[u] == v:
            start = path.index(u)
            cycle = path[start:]
            break
    if cycle is None:
        return sum(in_w[v] for v in range(n) if v != root)

    cyc_set = set(cycle)
    cyc_weight = sum(in_w[v] for v in cycle)
    new_id = [0] * n
    nid = 0
    for v in range(n):
        if v not in cyc_set:
            new_id[v] = nid
            nid += 1
    c_id = nid
    for v in cycle:
        new_id[v] = c_id
    new_edges = []
    for u, v, w in edges:
        nu, nv = new_id[u], new_id[v]
        if nu == nv:
            continue
        if v in cyc_set:
            new_edges.append((nu, nv, w - in_w[v]))
        else:
            new_edges.append((nu, nv, w))
    sub = _edmonds_min_arborescence(nid + 1, new_edges, new_id[root])
    return sub + cyc_weight


def _min_in_tree_cost(graph: CostGraph, root_idx: int) -> float:
    """Cheapest in-tree rooted at ``root_idx``: out-arborescence of the
    reversed graph."""
    cost = graph.cost
    n = graph.n
    edges = [
        (j, i, float(cost[i, j]))
        for i in range(n)
        for j in range(n)
        if i != j and math.isfinite(cost[i, j])
    ]
    return _edmonds_min_arborescence(n, edges, root_idx)


def quasi_potential(graph: CostGraph) -> PotentialReport:
    """Per-state minimum in-tree costs, shifted so the minimum is exactly 0."""
    _require_admissible(graph)
    n = graph.n
    tilde = np.array([_min_in_tree_cost(graph, r) for r in range(n)])
    c0 = float(tilde.min())
    V = tilde - c0
    tol = 0.0 if graph.integer_costs() else COST_TOL
    S0 = frozenset(graph.states[i] for i in range(n) if V[i] <= tol)
    return PotentialReport(graph.states, tilde, V, c0, S0)


def tree_gap(graph: CostGraph, cap: int = DEFAULT_TREE_CAP) -> float:
    """Cost difference between the cheapest non-optimal tree and the optimal
    tree cost; +inf when every finite-cost tree is optimal."""
    _require_admissible(graph)
    costs: list[float] = []
    for s in graph.states:
        costs.extend(t.cost for t in enumerate_trees(graph, s, cap=cap))
    c0 = min(costs)
    tol = 0.0 if graph.integer_costs() else COST_TOL
    above = [c for c in costs if c > c0 + tol]
    if not above:
        return math.inf
    return min(above) - c0


# ---------------------------------------------------------------------------
# edge potential, elevation, energy barrier


def _w_matrix(graph: CostGraph, V: np.ndarray) -> np.ndarray:
    forward = V[:, None] + graph.cost
    W = np.minimum(forward, forward.T)
    np.fill_diagonal(W, math.inf)
    return W


def edge_potential(report: PotentialReport, graph: CostGraph, x: str, y: str) -> float:
    """min{V(x)+c(x,y), V(y)+c(y,x)}; symmetric, +inf when both costs are."""
    i, j = graph.index(x), graph.index(y)
    if i == j:
        raise ValueError("edge potential needs two distinct states")
    return float(
        min(report.V[i] + graph.cost[i, j], report.V[j] + graph.cost[j, i])
    )


def _minimax_from(W: np.ndarray, src: int) -> tuple[np.ndarray, list[int]]:
    """Minimax path values from src over the symmetric weight table W.

    Returns (values, predecessor).  values[src] = -inf (empty path).
    """
    n = W.shape[0]
    val = np.full(n, math.inf)
    val[src] = -math.inf
    pred = [-1] * n
    done = [False] * n
    heap = [(-math.inf, src)]
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        for v in range(n):
            if done[v] or not math.isfinite(W[u, v]):
                continue
            cand = max(d, W[u, v])
            if cand < val[v]:
                val[v] = cand
                pred[v] = u
                heapq.heappush(heap, (cand, v))
    return val, pred


def _path_from_pred(pred: list[int], src: int, dst: int) -> tuple[int, ...]:
    path = [dst]
    while path[-1] != src:
        path.append(pred[path[-1]])
    return tuple(reversed(path))


def elevation(graph: CostGraph, x: str, y: str, report: PotentialReport | None = None) -> tuple[float, tuple[str, ...]]:
    """Minimax of edge potentials over paths from x to y, with a witness path."""
    if x == y:
        raise ValueError("elevation needs two distinct states")
    if report is None:
        report = quasi_potential(graph)
    W = _w_matrix(graph, report.V)
    i, j = graph.index(x), graph.index(y)
    val, pred = _minimax_from(W, i)
    path = _path_from_pred(pred, i, j)
    return float(val[j]), tuple(graph.states[u] for u in path)


def _all_elevations(graph: CostGraph, V: np.ndarray):
    n = graph.n
    W = _w_matrix(graph, V)
    values = np.full((n, n), -math.inf)
    paths: dict[tuple[int, int], tuple[int, ...]] = {}
    for i in range(n):
        val, pred = _minimax_from(W, i)
        for j in range(n):
            if j == i:
                continue
            values[i, j] = val[j]
            paths[(i, j)] = _path_from_pred(pred, i, j)
    return W, values, paths


def energy_barrier(graph: CostGraph, with_witness: bool = False, report: PotentialReport | None = None):
    """max over pairs x != y of Elev(x,y) - V(x) - V(y); 0 for a single state."""
    if report is None:
        report = quasi_potential(graph)
    n = graph.n
    if n == 1:
        return (0.0, None) if with_witness else 0.0
    _, elev, _ = _all_elevations(graph, report.V)
    best = -math.inf
    witness = None
    for i in range(n):
        for j in range(i + 1, n):
            val = elev[i, j] - report.V[i] - report.V[j]
            if val > best:
                best = val
                witness = (graph.states[i], graph.states[j])
    best = float(best)
    return (best, witness) if with_witness else best


def full_report(graph: CostGraph, cap: int = DEFAULT_TREE_CAP) -> PotentialReport:
    """Potential report with gap, edge potentials, elevations and barrier."""
    report = quasi_potential(graph)
    W, elev, paths = _all_elevations(graph, report.V)
    report.W = W
    report.elevation_values = elev
    report.elevation_paths = paths
    barrier, witness = energy_barrier(graph, with_witness=True, report=report)
    report.energy_barrier = barrier
    report.barrier_witness = witness
    report.theta = tree_gap(graph, cap=cap)
    return report


# ---------------------------------------------------------------------------
# resistance, coradius


def _dijkstra_into(graph: CostGraph, targets: set[int]) -> np.ndarray:
    """Cheapest directed path cost into the target set, from every state."""
    cost = graph.cost
    n = graph.n
    dist = np.full(n, math.inf)
    heap = []
    for t in targets:
        dist[t] = 0.0
        heap.append((0.0, t))
    heapq.heapify(heap)
    done = [False] * n
    while heap:
        d, v = heapq.heappop(heap)
        if done[v]:
            continue
        done[v] = True
        for u in range(n):  # relax reversed edges u -> v
            if u == v or done[u] or not math.isfinite(cost[u, v]):
                continue
            cand = d + cost[u, v]
            if cand < dist[u]:
                dist[u] = cand
                heapq.heappush(heap, (cand, u))
    return dist


def resistance(graph: CostGraph, x: str, target) -> float:
    """Minimum path cost from x into the target set (0 when x is inside)."""
    targets = {graph.index(s) for s in target}
    if not targets:
        raise ValueError("target set is empty")
    i = graph.index(x)
    if i in targets:
        return 0.0
    return float(_dijkstra_into(graph, targets)[i])


def coradius(graph: CostGraph, target) -> float:
    """Maximal resistance into the target set from outside it."""
    targets = {graph.index(s) for s in target}
    if not targets:
        raise ValueError("target set is empty")
    outside = [i for i in range(graph.n) if i not in targets]
    if not outside:
        return 0.0
    dist = _dijkstra_into(graph, targets)
    return float(max(dist[i] for i in outside))


def min_coradius(graph: CostGraph) -> float:
    """Minimum singleton coradius over states recurrent for the limit kernel.

    The coradius is constant on each recurrent class; this is checked.
    """
    _require_admissible(graph)
    decomp = recurrent_classes(graph)
    if not decomp.classes:
        raise InadmissibleGraphError("limit kernel has no recurrent class")
    tol = 0.0 if graph.integer_costs() else COST_TOL
    best = math.inf
    for cls in decomp.classes:
        values = [coradius(graph, {s}) for s in sorted(cls)]
        if max(values) - min(values) > tol:
            raise RuntimeError(
                f"coradius is not constant on recurrent class {sorted(cls)}"
            )
        best = min(best, values[0])
    return float(best)
