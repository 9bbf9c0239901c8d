"""Finite-state evolution models with rare-transition cost structure.

A model couples a cost graph (finite states, directed costs in [0, inf],
strongly connected through finite-cost edges) with prefactors k(x,y) > 0
and polynomial corrections h_xy with h(0) = 0.  For eps in (0, eps_max]
the kernel has off-diagonal entries k(x,y) * eps**c(x,y) * (1 + h_xy(eps))
and is completed to a stochastic matrix either through the diagonal
("diagonal" mode) or by dividing each row by its sum ("normalize" mode).

Model files are UTF-8 JSON with top-level keys "states", "mode", "edges";
each edge is {"from", "to", "cost", "k", "h"} where cost is a number or
"inf" (an "inf" edge is the same as an absent one), "k" defaults to 1.0
and "h" to [] (coefficients of eps, eps^2, ..., up to degree 8).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    InadmissibleGraphError,
    ModelSchemaError,
    StochasticityError,
)

MAX_H_DEGREE = 8
EPS_MAX_PRECISION = 1e-10
MODES = ("diagonal", "normalize")

_TOP_KEYS = {"states", "mode", "edges"}
_EDGE_KEYS = {"from", "to", "cost", "k", "h"}


@dataclass(frozen=True)
class CostGraph:
    """Finite state set with a square table of transition costs in [0, inf]."""

    states: tuple[str, ...]
    cost: np.ndarray

    def __post_init__(self):
        states = tuple(str(s) for s in self.states)
        if not states:
            raise ModelSchemaError("state set is empty")
        if len(set(states)) != len(states):
            raise ModelSchemaError("duplicate state names")
        cost = np.array(self.cost, dtype=float)
        n = len(states)
        if cost.shape != (n, n):
            raise ModelSchemaError(f"cost table must be {n}x{n}, got {cost.shape}")
        if np.isnan(cost).any():
            raise ModelSchemaError("cost table contains NaN")
        if (cost < 0).any():
            raise ModelSchemaError("costs must be nonnegative")
        if not np.isfinite(np.diag(cost)).all():
            raise ModelSchemaError("diagonal costs must be finite")
        cost.setflags(write=False)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "cost", cost)

    @property
    def n(self) -> int:
        return len(self.states)

    def index(self, state: str) -> int:
        try:
            return self.states.index(state)
        except ValueError:
            raise KeyError(f"unknown state {state!r}") from None

    def integer_costs(self) -> bool:
        finite = np.isfinite(self.cost)
        vals = self.cost[finite]
        return bool(np.all(vals == np.round(vals)))


@dataclass(frozen=True)
class EvolutionModel:
    """Validated model: cost graph, prefactors, corrections, completion mode.

    ``k`` and ``hcoef`` are aligned with ``graph.cost``; entries outside the
    declared edge set are placeholders and never read.  ``eps_max`` is the
    largest eps in (0, 1] for which the assembled kernel is stochastic,
    bisected to absolute precision 1e-10.
    """

    graph: CostGraph
    k: np.ndarray
    hcoef: np.ndarray
    mode: str
    eps_max: float

    def __post_init__(self):
        k = np.array(self.k, dtype=float)
        hcoef = np.array(self.hcoef, dtype=float)
        k.setflags(write=False)
        hcoef.setflags(write=False)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "hcoef", hcoef)

    @property
    def states(self) -> tuple[str, ...]:
        return self.graph.states

    @property
    def n(self) -> int:
        return self.graph.n

    def has_corrections(self) -> bool:
        return bool(np.any(self.hcoef != 0.0))


@dataclass(frozen=True)
class ClassDecomposition:
    """Transient states and closed communicating classes of the limit kernel."""

    transient: frozenset[str]
    classes: tuple[frozenset[str], ...]
    periodic_flags: tuple[bool, ...]

    def recurrent_states(self) -> frozenset[str]:
        out: set[str] = set()
        for c in self.classes:
            out |= c
        return frozenset(out)


# ---------------------------------------------------------------------------
# admissibility


def _finite_adjacency(cost: np.ndarray) -> list[list[int]]:
    n = cost.shape[0]
    return [
        [j for j in range(n) if j != i and math.isfinite(cost[i, j])]
        for i in range(n)
    ]


def _reachable(adj: list[list[int]], src: int) -> set[int]:
    seen = {src}
    stack = [src]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return seen


def check_admissible(graph: CostGraph) -> bool:
    """True iff every ordered pair is joined by a finite-cost directed path."""
    n = graph.n
    if n == 1:
        return True
    adj = _finite_adjacency(graph.cost)
    if len(_reachable(adj, 0)) != n:
        return False
    radj = [[] for _ in range(n)]
    for u, nbrs in enumerate(adj):
        for v in nbrs:
            radj[v].append(u)
    return len(_reachable(radj, 0)) == n


def witness_path(graph: CostGraph, x: str, y: str) -> tuple[str, ...]:
    """A finite-cost directed path from x to y (BFS, fewest edges)."""
    i, j = graph.index(x), graph.index(y)
    if i == j:
        return (x,)
    adj = _finite_adjacency(graph.cost)
    pred = {i: None}
    queue = [i]
    while queue:
        nxt = []
        for u in queue:
            for v in adj[u]:
                if v not in pred:
                    pred[v] = u
                    nxt.append(v)
        queue = nxt
    if j not in pred:
        raise InadmissibleGraphError(f"no finite-cost path from {x!r} to {y!r}")
    path = [j]
    while path[-1] != i:
        path.append(pred[path[-1]])
    return tuple(graph.states[u] for u in reversed(path))


# ---------------------------------------------------------------------------
# recurrent-class decomposition of the limit kernel


def _zero_cost_adjacency(cost: np.ndarray) -> list[list[int]]:
    """Support digraph of the limit kernel.

    Edges are the zero-cost pairs.  A state with no zero-cost transition at
    all keeps its limit mass on the diagonal, so it carries a self-loop.
    """
    n = cost.shape[0]
    adj = []
    for i in range(n):
        nbrs = [j for j in range(n) if cost[i, j] == 0.0]
        if not nbrs:
            nbrs = [i]
        adj.append(nbrs)
    return adj


def _sccs(adj: list[list[int]]) -> list[list[int]]:
    """Strongly connected components (iterative Tarjan), sorted by least member."""
    n = len(adj)
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    comps: list[list[int]] = []
    counter = 0
    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        while work:
            u, pi = work[-1]
            if pi == 0:
                index[u] = low[u] = counter
                counter += 1
                stack.append(u)
                on_stack[u] = True
            advanced = False
            for k in range(pi, len(adj[u])):
                v = adj[u][k]
                if index[v] == -1:
                    work[-1] = (u, k + 1)
                    work.append((v, 0))
                    advanced = True
                    break
                if on_stack[v]:
                    low[u] = min(low[u], index[v])
            if advanced:
                continue
            work.pop()
            if low[u] == index[u]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == u:
                        break
                comps.append(sorted(comp))
            if work:
                p, _ = work[-1]
                low[p] = min(low[p], low[u])
    comps.sort(key=min)
    return comps


def _class_period(members: list[int], adj: list[list[int]]) -> int:
    """gcd of cycle lengths within one strongly connected class."""
    mem = set(members)
    root = members[0]
    level = {root: 0}
    queue = [root]
    edges = []
    while queue:
        nxt = []
        for u in queue:
            for v in adj[u]:
                if v not in mem:
                    continue
                edges.append((u, v))
                if v not in level:
                    level[v] = level[u] + 1
                    nxt.append(v)
        queue = nxt
    g = 0
    for u, v in edges:
        g = math.gcd(g, level[u] + 1 - level[v])
    return abs(g) if g != 0 else 1


def recurrent_classes(graph: CostGraph) -> ClassDecomposition:
    """Decompose the zero-cost support digraph into transient states and
    closed communicating classes, with a periodicity flag per class."""
    adj = _zero_cost_adjacency(graph.cost)
    comps = _sccs(adj)
    classes = []
    flags = []
    transient: set[str] = set()
    for comp in comps:
        mem = set(comp)
        closed = all(v in mem for u in comp for v in adj[u])
        if closed:
            classes.append(frozenset(graph.states[u] for u in comp))
            flags.append(_class_period(comp, adj) > 1)
        else:
            transient.update(graph.states[u] for u in comp)
    return ClassDecomposition(frozenset(transient), tuple(classes), tuple(flags))


# ---------------------------------------------------------------------------
# kernel assembly


def _eval_h(hcoef: np.ndarray, eps: float) -> np.ndarray:
    """Evaluate h(eps) = sum_d hcoef[..., d-1] * eps**d by Horner's rule."""
    out = np.zeros(hcoef.shape[:2])
    for d in range(hcoef.shape[2] - 1, -1, -1):
        out = (out + hcoef[:, :, d]) * eps
    return out


def offdiag_weights(model: EvolutionModel, eps: float) -> np.ndarray:
    """k(x,y) * eps**c(x,y) * (1 + h_xy(eps)) on finite-cost off-diagonal pairs."""
    cost = model.graph.cost
    finite = np.isfinite(cost)
    w = np.zeros_like(cost)
    factors = np.ones_like(cost)
    if model.has_corrections():
        factors = factors + _eval_h(model.hcoef, eps)
    w[finite] = model.k[finite] * np.power(eps, cost[finite]) * factors[finite]
    np.fill_diagonal(w, 0.0)
    return w


def assemble_kernel(model: EvolutionModel, eps: float) -> np.ndarray:
    """The transition matrix P_eps.  Requires 0 < eps <= eps_max."""
    if not (0.0 < eps <= model.eps_max + 1e-15):
        raise StochasticityError(
            f"eps={eps!r} outside (0, eps_max={model.eps_max!r}]"
        )
    w = offdiag_weights(model, eps)
    if model.mode == "diagonal":
        resid = 1.0 - w.sum(axis=1)
        if (resid < -1e-9).any():
            raise StochasticityError(
                f"off-diagonal mass exceeds 1 at eps={eps!r}"
            )
        P = w
        np.fill_diagonal(P, np.maximum(resid, 0.0))
    else:
        cost = model.graph.cost
        diag = np.diag(model.k) * np.power(eps, np.diag(cost))
        if model.has_corrections():
            diag = diag * (1.0 + np.diag(_eval_h(model.hcoef, eps)))
        P = w
        P[np.arange(model.n), np.arange(model.n)] = diag
        P = P / P.sum(axis=1, keepdims=True)
    P.setflags(write=False)
    return P


def limit_kernel(model: EvolutionModel) -> np.ndarray:
    """P_0, the entrywise limit of P_eps as eps -> 0."""
    cost = model.graph.cost
    zero = cost == 0.0
    w = np.where(zero, model.k, 0.0)
    if model.mode == "diagonal":
        np.fill_diagonal(w, 0.0)
        resid = 1.0 - w.sum(axis=1)
        P = w
        np.fill_diagonal(P, np.maximum(resid, 0.0))
    else:
        P = w / w.sum(axis=1, keepdims=True)
    P.setflags(write=False)
    return P


def _diagonal_margin(graph: CostGraph, k, hcoef, eps: float) -> float:
    cost = graph.cost
    finite = np.isfinite(cost)
    factors = 1.0 + _eval_h(hcoef, eps)
    w = np.zeros_like(cost)
    w[finite] = k[finite] * np.power(eps, cost[finite]) * factors[finite]
    np.fill_diagonal(w, 0.0)
    return float(1.0 - w.sum(axis=1).max())


def _bisect_eps_max(graph: CostGraph, k, hcoef) -> float:
    if _diagonal_margin(graph, k, hcoef, 1.0) >= 0.0:
        return 1.0
    lo = 1e-12
    if _diagonal_margin(graph, k, hcoef, lo) <= 0.0:
        raise StochasticityError("eps_max is not strictly positive")
    hi = 1.0
    while hi - lo > EPS_MAX_PRECISION:
        mid = 0.5 * (lo + hi)
        if _diagonal_margin(graph, k, hcoef, mid) >= 0.0:
            lo = mid
        else:
            hi = mid
    return lo


# ---------------------------------------------------------------------------
# model construction and file parsing


def make_model(graph: CostGraph, k: np.ndarray, hcoef: np.ndarray, mode: str) -> EvolutionModel:
    """Validate the pieces and compute eps_max."""
    if mode not in MODES:
        raise ModelSchemaError(f"mode must be one of {MODES}, got {mode!r}")
    n = graph.n
    k = np.asarray(k, dtype=float)
    hcoef = np.asarray(hcoef, dtype=float)
    if k.shape != (n, n) or hcoef.shape != (n, n, MAX_H_DEGREE):
        raise ModelSchemaError("k or h table has the wrong shape")
    finite = np.isfinite(graph.cost)
    offdiag = finite.copy()
    np.fill_diagonal(offdiag, False)
    if (k[offdiag] <= 0.0).any():
        raise ModelSchemaError("k must be strictly positive on finite-cost pairs")
    if (np.abs(hcoef).sum(axis=2) > 0.5 + 1e-15).any():
        raise ModelSchemaError(
            "h coefficients must satisfy sum |c_d| <= 1/2 (interval bound on [0,1])"
        )
    if not check_admissible(graph):
        raise InadmissibleGraphError(
            "cost graph is not strongly connected through finite-cost edges"
        )
    if mode == "normalize":
        if (np.diag(k) <= 0.0).any():
            raise ModelSchemaError("normalize mode needs positive diagonal k")
        row_min = graph.cost.min(axis=1)
        if (row_min != 0.0).any():
            bad = graph.states[int(np.argmax(row_min != 0.0))]
            raise ModelSchemaError(
                f"state {bad!r}: smallest cost in each row must be 0 in normalize mode"
            )
        eps_max = 1.0
    else:
        if (np.diag(graph.cost) != 0.0).any():
            raise ModelSchemaError("diagonal costs must be 0 in diagonal mode")
        eps_max = _bisect_eps_max(graph, k, hcoef)
    return EvolutionModel(graph, k, hcoef, mode, eps_max)


def _parse_cost(value, where: str) -> float:
    if value == "inf":
        return math.inf
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ModelSchemaError(f"{where}: cost must be a number or \"inf\"")
    c = float(value)
    if math.isnan(c) or c < 0:
        raise ModelSchemaError(f"{where}: cost must be nonnegative")
    return c


def model_from_dict(doc: dict) -> EvolutionModel:
    if not isinstance(doc, dict):
        raise ModelSchemaError("model document must be a JSON object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ModelSchemaError(f"unknown top-level keys: {sorted(unknown)}")
    missing = _TOP_KEYS - set(doc)
    if missing:
        raise ModelSchemaError(f"missing top-level keys: {sorted(missing)}")
    states = doc["states"]
    if (
        not isinstance(states, list)
        or not states
        or not all(isinstance(s, str) and s for s in states)
    ):
        raise ModelSchemaError("states must be a nonempty array of nonempty strings")
    if len(set(states)) != len(states):
        raise ModelSchemaError("duplicate state names")
    mode = doc["mode"]
    if mode not in MODES:
        raise ModelSchemaError(f"mode must be one of {MODES}, got {mode!r}")
    if not isinstance(doc["edges"], list):
        raise ModelSchemaError("edges must be an array")

    n = len(states)
    idx = {s: i for i, s in enumerate(states)}
    cost = np.full((n, n), math.inf)
    k = np.ones((n, n))
    hcoef = np.zeros((n, n, MAX_H_DEGREE))
    seen: set[tuple[int, int]] = set()
    for e_no, e in enumerate(doc["edges"]):
        where = f"edges[{e_no}]"
        if not isinstance(e, dict):
            raise ModelSchemaError(f"{where}: edge must be an object")
        unknown = set(e) - _EDGE_KEYS
        if unknown:
            raise ModelSchemaError(f"{where}: unknown keys {sorted(unknown)}")
        for req in ("from", "to", "cost"):
            if req not in e:
                raise ModelSchemaError(f"{where}: missing key {req!r}")
        if e["from"] not in idx or e["to"] not in idx:
            raise ModelSchemaError(f"{where}: endpoint not in states")
        i, j = idx[e["from"]], idx[e["to"]]
        if (i, j) in seen:
            raise ModelSchemaError(f"{where}: duplicate edge {e['from']}->{e['to']}")
        seen.add((i, j))
        c = _parse_cost(e["cost"], where)
        if math.isinf(c):
            continue  # same as an absent edge
        if i == j and mode == "diagonal":
            raise ModelSchemaError(
                f"{where}: explicit self-edges are only allowed in normalize mode"
            )
        kv = e.get("k", 1.0)
        if isinstance(kv, bool) or not isinstance(kv, (int, float)) or float(kv) <= 0:
            raise ModelSchemaError(f"{where}: k must be a strictly positive number")
        hv = e.get("h", [])
        if not isinstance(hv, list) or not all(
            isinstance(cv, (int, float)) and not isinstance(cv, bool) for cv in hv
        ):
            raise ModelSchemaError(f"{where}: h must be an array of numbers")
        if len(hv) > MAX_H_DEGREE:
            raise ModelSchemaError(
                f"{where}: h has more than {MAX_H_DEGREE} coefficients"
            )
        cost[i, j] = c
        k[i, j] = float(kv)
        hcoef[i, j, : len(hv)] = [float(cv) for cv in hv]

    if mode == "diagonal":
        np.fill_diagonal(cost, 0.0)
    else:
        for i in range(n):
            if not math.isfinite(cost[i, i]):
                cost[i, i] = 0.0  # implicit zero-cost self-loop, k = 1, h = 0
                k[i, i] = 1.0
    graph = CostGraph(tuple(states), cost)
    return make_model(graph, k, hcoef, mode)


def parse_model(path) -> EvolutionModel:
    """Read, validate and build a model from a JSON file."""
    p = Path(path)
    if not p.exists():
        raise ModelSchemaError(f"file not found: {p}")
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ModelSchemaError(f"invalid JSON in {p}: {exc}") from exc
    return model_to_validated(doc)


def model_to_validated(doc: dict) -> EvolutionModel:
    return model_from_dict(doc)


def model_to_dict(model: EvolutionModel) -> dict:
    """Canonical document form; parse(serialize(m)) reproduces m bit-exactly."""
    cost = model.graph.cost
    edges = []
    for i in range(model.n):
        for j in range(model.n):
            if i == j and model.mode == "diagonal":
                continue
            c = cost[i, j]
            if not math.isfinite(c):
                continue
            h = list(model.hcoef[i, j])
            while h and h[-1] == 0.0:
                h.pop()
            edges.append(
                {
                    "from": model.states[i],
                    "to": model.states[j],
                    "cost": c,
                    "k": float(model.k[i, j]),
                    "h": h,
                }
            )
    return {"states": list(model.states), "mode": model.mode, "edges": edges}


def serialize_model(model: EvolutionModel, path=None) -> str:
    text = json.dumps(model_to_dict(model), indent=2) + "\n"
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text
