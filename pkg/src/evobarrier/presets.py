"""Builtin models used by the command line and the test suite.

example1(a, b, N)  birth-death chain on {-N..N}: stepping away from 0
                   costs a, stepping toward 0 costs b.
example2()         4-state coordination-game model with asymmetric
                   experimentation rates (normalize mode).
example3(N, k)     complete graph, every transition costs 1 with a common
                   prefactor k.
cloez(N, kappa)    complete cost-1 graph with k = 1/N; kappa parameterizes
                   the oscillating kernel perturbation of the schedule.
"""

from __future__ import annotations

import math

import numpy as np

from .cost_graph import CostGraph, EvolutionModel, make_model, serialize_model
from .errors import ModelSchemaError

MAX_H_DEGREE = 8


def _empty_h(n: int) -> np.ndarray:
    return np.zeros((n, n, MAX_H_DEGREE))


def example1(a: float = 2.0, b: float = 1.0, N: int = 3) -> EvolutionModel:
    if not (a > 0 and b > 0):
        raise ModelSchemaError("example1 needs a > 0 and b > 0")
    if N < 1:
        raise ModelSchemaError("example1 needs N >= 1")
    states = tuple(str(x) for x in range(-N, N + 1))
    n = len(states)
    cost = np.full((n, n), math.inf)
    np.fill_diagonal(cost, 0.0)
    idx = {int(s): i for i, s in enumerate(states)}
    for x in range(0, N):
        cost[idx[x], idx[x + 1]] = a
        cost[idx[-x], idx[-x - 1]] = a
        cost[idx[x + 1], idx[x]] = b
        cost[idx[-x - 1], idx[-x]] = b
    graph = CostGraph(states, cost)
    return make_model(graph, np.ones((n, n)), _empty_h(n), "diagonal")


_EXAMPLE2_COSTS = [
    # TL  TR  BL  BR
    [0.0, 1.0, 2.0, 3.0],  # TL
    [2.0, 4.0, 0.0, 2.0],  # TR
    [2.0, 0.0, 4.0, 2.0],  # BL
    [3.0, 2.0, 1.0, 0.0],  # BR
]


def example2() -> EvolutionModel:
    states = ("TL", "TR", "BL", "BR")
    cost = np.array(_EXAMPLE2_COSTS)
    graph = CostGraph(states, cost)
    return make_model(graph, np.ones((4, 4)), _empty_h(4), "normalize")


def example3(N: int = 4, k: float = 1.0) -> EvolutionModel:
    if N < 2:
        raise ModelSchemaError("example3 needs N >= 2")
    if not k > 0:
        raise ModelSchemaError("example3 needs k > 0")
    states = tuple(str(x) for x in range(1, N + 1))
    cost = np.ones((N, N))
    np.fill_diagonal(cost, 0.0)
    graph = CostGraph(states, cost)
    return make_model(graph, np.full((N, N), float(k)), _empty_h(N), "diagonal")


def cloez(N: int = 4, kappa: float = 0.1) -> EvolutionModel:
    """Kernel part of the drifting-uniform chain; kappa itself belongs to
    the schedule (see make_schedule) and must stay below 1/N."""
    if N < 2:
        raise ModelSchemaError("cloez needs N >= 2")
    if not (0 <= kappa < 1.0 / N):
        raise ModelSchemaError(f"cloez needs 0 <= kappa < 1/N = {1.0 / N}")
    states = tuple(str(x) for x in range(1, N + 1))
    cost = np.ones((N, N))
    np.fill_diagonal(cost, 0.0)
    graph = CostGraph(states, cost)
    return make_model(graph, np.full((N, N), 1.0 / N), _empty_h(N), "diagonal")


_BUILDERS = {
    "example1": (example1, ("a", "b", "N")),
    "example2": (example2, ()),
    "example3": (example3, ("N", "k")),
    "cloez": (cloez, ("N", "kappa")),
}

BUILTIN_NAMES = tuple(_BUILDERS)


def make_builtin(name: str, **params) -> EvolutionModel:
    if name not in _BUILDERS:
        raise ModelSchemaError(
            f"unknown builtin {name!r}; choose from {sorted(_BUILDERS)}"
        )
    builder, accepted = _BUILDERS[name]
    kwargs = {k: v for k, v in params.items() if v is not None}
    unknown = set(kwargs) - set(accepted)
    if unknown:
        raise ModelSchemaError(f"{name} does not take parameters {sorted(unknown)}")
    if "N" in kwargs:
        kwargs["N"] = int(kwargs["N"])
    return builder(**kwargs)


def emit_builtin(name: str, params: dict, path) -> EvolutionModel:
    """Write a schema-conformant model file for a builtin; returns the model."""
    model = make_builtin(name, **params)
    serialize_model(model, path)
    return model
