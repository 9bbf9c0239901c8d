"""Shared test utilities: seeded random graphs and models."""

import math

import numpy as np

import evobarrier as eb


def random_graph(rng, n, p_absent=0.35, costs=(0, 1, 2, 3, 4)):
    """A seeded admissible cost graph with integer costs."""
    states = tuple(f"s{i}" for i in range(n))
    while True:
        cost = rng.choice(costs, size=(n, n)).astype(float)
        cost[rng.random((n, n)) < p_absent] = math.inf
        np.fill_diagonal(cost, 0.0)
        graph = eb.CostGraph(states, cost)
        if eb.check_admissible(graph):
            return graph


def random_model(rng, n, mode=None, with_h=True):
    """A seeded validated model on a random admissible graph."""
    while True:
        graph = random_graph(rng, n)
        k = np.ones((n, n))
        finite = np.isfinite(graph.cost)
        k[finite] = rng.uniform(0.5, 2.0, size=int(finite.sum()))
        hcoef = np.zeros((n, n, 8))
        if with_h and rng.random() < 0.5:
            raw = rng.normal(size=(n, n, 3)) * 0.05
            total = np.abs(raw).sum(axis=2, keepdims=True)
            scale = np.minimum(1.0, 0.4 / np.maximum(total, 1e-12))
            hcoef[:, :, :3] = raw * scale
        chosen = mode or ("diagonal" if rng.random() < 0.7 else "normalize")
        if chosen == "diagonal":
            np.fill_diagonal(k, 1.0)
            hcoef[np.arange(n), np.arange(n), :] = 0.0
        try:
            model = eb.make_model(graph, k, hcoef, chosen)
        except eb.EvobarrierError:
            continue
        if model.eps_max >= 1e-3:
            return model


def brute_force_elevation(graph, V, x, y):
    """Minimax of edge potentials over all simple paths (reference oracle)."""
    n = graph.n
    cost = graph.cost
    W = np.minimum(V[:, None] + cost, (V[:, None] + cost).T)
    i0, j0 = graph.index(x), graph.index(y)
    best = math.inf

    def rec(u, visited, running_max):
        nonlocal best
        if u == j0:
            best = min(best, running_max)
            return
        for v in range(n):
            if v in visited or not math.isfinite(W[u, v]) or v == u:
                continue
            rec(v, visited | {v}, max(running_max, W[u, v]))

    rec(i0, {i0}, -math.inf)
    return best


def brute_force_trees(graph, root):
    """All in-trees by scanning every successor assignment (reference oracle)."""
    n = graph.n
    cost = graph.cost
    r = graph.index(root)
    others = [i for i in range(n) if i != r]
    found = []

    def ok(assign):
        for start in others:
            seen = set()
            u = start
            while u != r:
                if u in seen:
                    return False
                seen.add(u)
                u = assign[u]
        return True

    def rec(pos, assign):
        if pos == len(others):
            if ok(assign):
                edges = tuple(
                    (graph.states[i], graph.states[assign[i]]) for i in others
                )
                total = sum(cost[i, assign[i]] for i in others)
                found.append((edges, total))
            return
        i = others[pos]
        for j in range(n):
            if j == i or not math.isfinite(cost[i, j]):
                continue
            assign[i] = j
            rec(pos + 1, assign)
            del assign[i]

    rec(0, {})
    return found
