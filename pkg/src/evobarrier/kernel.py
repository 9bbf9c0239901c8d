"""Fixed-eps numerical analysis of an evolution model.

For a chosen eps this assembles the kernel, solves the stationary
distribution two independent ways (dense linear solve and the spanning
in-tree formula), computes the additive symmetrization M = (P + P*)/2,
the exact spectral gap through a Jacobi eigensolver on the pi-weighted
similarity transform, a routing-function lower bound on the gap, and the
zero-row-sum pseudo-inverse solving the Poisson equation
Q(I - P) = (I - P)Q = I - Pi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cost_graph import EvolutionModel, assemble_kernel, limit_kernel  # noqa: F401
from .errors import NumericalError
from .fit import SlopeFit, fit_loglog
from .tree_calculus import (
    DEFAULT_TREE_CAP,
    _all_elevations,
    energy_barrier,
    enumerate_trees,
    quasi_potential,
)

JACOBI_MAX_SWEEPS = 100
JACOBI_OFF_TOL = 1e-13

STATIONARY_RESIDUAL_TOL = 1e-12
POISSON_RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class RoutingFunction:
    """One witness path per ordered pair of distinct states (index tuples)."""

    paths: dict

    def path(self, i: int, j: int) -> tuple[int, ...]:
        return self.paths[(i, j)]


@dataclass(frozen=True)
class KernelAnalysis:
    eps: float
    P: np.ndarray
    pi: np.ndarray
    M: np.ndarray
    gap: float
    gap_lower_bound: float
    Q: np.ndarray
    Pi_matrix: np.ndarray
    poisson_residuals: tuple[float, float]


def build_kernel(model: EvolutionModel, eps: float) -> np.ndarray:
    """The transition matrix P_eps (row-stochastic for eps in (0, eps_max])."""
    return assemble_kernel(model, eps)


# ---------------------------------------------------------------------------
# stationary distributions


def stationary_solve(P: np.ndarray) -> np.ndarray:
    """Solve pi P = pi, sum pi = 1 by dense LU on the augmented system."""
    P = np.asarray(P, dtype=float)
    n = P.shape[0]
    A = P.T - np.eye(n)
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    try:
        pi = np.linalg.solve(A, b)
        pi = pi - np.linalg.solve(A, A @ pi - b)  # one refinement step
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            "singular stationary system (kernel not irreducible?)"
        ) from exc
    residual = float(np.abs(pi @ P - pi).max())
    if residual > STATIONARY_RESIDUAL_TOL:
        raise NumericalError(
            f"stationary residual {residual:.3e} exceeds {STATIONARY_RESIDUAL_TOL}"
        )
    if pi.min() <= 0.0:
        raise NumericalError("stationary vector is not strictly positive")
    return pi / pi.sum()


def _tree_product_sums(model: EvolutionModel, weight: np.ndarray, cap: int):
    """Per-root sums of edge-weight products over all finite-cost in-trees."""
    graph = model.graph
    sums = np.zeros(model.n)
    for r, s in enumerate(graph.states):
        total = 0.0
        for t in enumerate_trees(graph, s, cap=cap):
            prod = 1.0
            for a, b in t.edges:
                prod *= weight[graph.index(a), graph.index(b)]
            total += prod
        sums[r] = total
    return sums


def stationary_tree_formula(model: EvolutionModel, eps: float, cap: int = DEFAULT_TREE_CAP) -> np.ndarray:
    """Stationary vector from the spanning in-tree products of P_eps."""
    P = build_kernel(model, eps)
    sums = _tree_product_sums(model, P, cap)
    total = sums.sum()
    if total <= 0.0:
        raise NumericalError("tree-formula normalizer vanished")
    return sums / total


def limit_distribution(model: EvolutionModel, cap: int = DEFAULT_TREE_CAP) -> np.ndarray:
    """Zero-mutation limit of the stationary vectors.

    Supported on the states whose cheapest in-tree attains the global
    optimum; weights are prefactor products over the optimal trees.
    """
    graph = model.graph
    tol = 0.0 if graph.integer_costs() else 1e-9
    tilde = np.empty(model.n)
    best_products = np.zeros(model.n)
    all_trees = []
    for r, s in enumerate(graph.states):
        trees = enumerate_trees(graph, s, cap=cap)
        tilde[r] = min(t.cost for t in trees)
        all_trees.append(trees)
    c0 = tilde.min()
    for r in range(model.n):
        if tilde[r] > c0 + tol:
            continue
        total = 0.0
        for t in all_trees[r]:
            if t.cost <= tilde[r] + tol:
                prod = 1.0
                for a, b in t.edges:
                    prod *= model.k[graph.index(a), graph.index(b)]
                total += prod
        best_products[r] = total
    return best_products / best_products.sum()


# ---------------------------------------------------------------------------
# spectral gap


def jacobi_eigenvalues(sym: np.ndarray, max_sweeps: int = JACOBI_MAX_SWEEPS, off_tol: float = JACOBI_OFF_TOL) -> np.ndarray:
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations,
    sorted in decreasing order."""
    A = np.array(sym, dtype=float)
    n = A.shape[0]
    if n == 1:
        return A[0, :1].copy()
    for _ in range(max_sweeps):
        offdiag = A - np.diag(np.diag(A))
        off = math.sqrt(float((offdiag**2).sum()))
        if off <= off_tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) < 1e-300:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta  # asymptotic root; avoids theta**2 overflow
                else:
                    t = math.copysign(1.0, theta) / (
                        abs(theta) + math.sqrt(theta * theta + 1.0)
                    )
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                rp = A[p, :].copy()
                rq = A[q, :].copy()
                A[p, :] = c * rp - s * rq
                A[q, :] = s * rp + c * rq
                cp = A[:, p].copy()
                cq = A[:, q].copy()
                A[:, p] = c * cp - s * cq
                A[:, q] = s * cp + c * cq
                A[p, q] = 0.0
                A[q, p] = 0.0
    else:
        raise NumericalError(
            f"Jacobi eigensolver did not converge in {max_sweeps} sweeps"
        )
    return np.sort(np.diag(A))[::-1]


def adjoint_kernel(P: np.ndarray, pi: np.ndarray) -> np.ndarray:
    """Adjoint of P in L2(pi): P*(x,y) = pi(y) P(y,x) / pi(x)."""
    return (pi[None, :] * P.T) / pi[:, None]


def spectral_gap(P: np.ndarray, pi: np.ndarray) -> tuple[float, np.ndarray]:
    """Exact gap of P (equals the gap of M = (P+P*)/2) and the matrix M."""
    M = 0.5 * (P + adjoint_kernel(P, pi))
    n = P.shape[0]
    if n == 1:
        return 1.0, M
    root = np.sqrt(pi)
    N = M * root[:, None] / root[None, :]
    N = 0.5 * (N + N.T)
    eigs = jacobi_eigenvalues(N)
    return float(1.0 - eigs[1]), M


# ---------------------------------------------------------------------------
# routing functions and the Poincare-type bound


def elevation_routing(graph, report=None) -> RoutingFunction:
    """Witness paths attaining the elevation minimax, one per ordered pair;
    the reverse pair uses the reversed path."""
    if report is None:
        report = quasi_potential(graph)
    _, _, paths = _all_elevations(graph, report.V)
    full = {}
    n = graph.n
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            if (i, j) in paths:
                full[(i, j)] = paths[(i, j)]
            else:
                full[(i, j)] = tuple(reversed(paths[(j, i)]))
    return RoutingFunction(full)


def poincare_bound(analysis_or_pi, M_or_routing=None, routing=None) -> float:
    """Routing-function lower bound on the spectral gap.

    Accepts either (KernelAnalysis, routing) or (pi, M, routing).
    """
    if isinstance(analysis_or_pi, KernelAnalysis):
        pi = analysis_or_pi.pi
        M = analysis_or_pi.M
        routing = M_or_routing
    else:
        pi = analysis_or_pi
        M = M_or_routing
    if routing is None:
        raise ValueError("routing function required")
    n = M.shape[0]
    if n == 1:
        return 1.0
    load = {}
    for (i, j), path in routing.paths.items():
        if i == j:
            continue
        if path[0] != i or path[-1] != j:
            raise ValueError(f"routing path for ({i},{j}) has wrong endpoints")
        length = len(path) - 1
        mass = length * pi[i] * pi[j]
        for a, b in zip(path[:-1], path[1:]):
            if a == b or M[a, b] <= 0.0:
                raise ValueError(
                    f"routing path for ({i},{j}) uses non-admissible edge ({a},{b})"
                )
            load[(a, b)] = load.get((a, b), 0.0) + mass
    kappa = 0.0
    for (a, b), mass in load.items():
        kappa = max(kappa, mass / (pi[a] * M[a, b]))
    if kappa <= 0.0:
        raise NumericalError("empty routing function")
    return 1.0 / kappa


# ---------------------------------------------------------------------------
# pseudo-inverse and the full per-eps analysis


def pseudo_inverse(P: np.ndarray, pi: np.ndarray) -> tuple[np.ndarray, np.ndarray, tuple[float, float]]:
    """Zero-row-sum solution Q of the Poisson equation, via the fundamental
    matrix (I - P + Pi)^{-1} - Pi.  Returns (Q, Pi, residuals)."""
    n = P.shape[0]
    Pi = np.tile(pi, (n, 1))
    eye = np.eye(n)
    try:
        Z = np.linalg.solve(eye - P + Pi, eye)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("fundamental matrix is singular") from exc
    Q = Z - Pi
    target = eye - Pi
    r1 = float(np.abs(Q @ (eye - P) - target).sum(axis=1).max())
    r2 = float(np.abs((eye - P) @ Q - target).sum(axis=1).max())
    return Q, Pi, (r1, r2)


def analyze_kernel(model: EvolutionModel, eps: float, routing: RoutingFunction | None = None) -> KernelAnalysis:
    """Assemble P_eps and compute the full kernel-level snapshot."""
    P = build_kernel(model, eps)
    pi = stationary_solve(P)
    if float(np.abs(pi @ P - pi).max()) > 1e-10:
        raise NumericalError("stationarity residual above 1e-10")
    gap, M = spectral_gap(P, pi)
    rev = np.abs(pi[:, None] * M - (pi[:, None] * M).T).max()
    if rev > 1e-12:
        raise NumericalError(f"symmetrization not reversible: {rev:.3e}")
    Q, Pi, residuals = pseudo_inverse(P, pi)
    if max(residuals) > POISSON_RESIDUAL_TOL:
        raise NumericalError(
            f"Poisson residuals {residuals} exceed {POISSON_RESIDUAL_TOL}"
        )
    row_sums = float(np.abs(Q.sum(axis=1)).max())
    if row_sums > 1e-12:
        raise NumericalError(f"pseudo-inverse row sums {row_sums:.3e} not 0")
    if routing is None:
        routing = elevation_routing(model.graph)
    bound = poincare_bound(pi, M, routing)
    if model.n > 1 and bound > gap + 1e-9:
        raise NumericalError(
            f"routing bound {bound} exceeds exact gap {gap} at eps={eps}"
        )
    return KernelAnalysis(eps, P, pi, M, gap, bound, Q, Pi, residuals)


# ---------------------------------------------------------------------------
# scaling of the gap in eps


def default_eps_grid(model: EvolutionModel) -> np.ndarray:
    """Geometric grid 2^-3 ... 2^-10, clipped to (0, eps_max]."""
    grid = np.array([2.0**-j for j in range(3, 11)])
    return grid[grid <= model.eps_max]


@dataclass(frozen=True)
class SpectralScaling:
    eps: np.ndarray
    gaps: np.ndarray
    bounds: np.ndarray
    gap_fit: SlopeFit
    bound_fit: SlopeFit
    barrier: float
    min_constant: float

    @property
    def slope_ok(self) -> bool:
        return self.gap_fit.slope <= self.barrier + 0.05 and self.min_constant > 0


def spectral_scaling_check(model: EvolutionModel, eps_grid=None) -> SpectralScaling:
    """Fit log gap against log eps across a grid and compare with the
    energy-barrier exponent."""
    if eps_grid is None:
        eps_grid = default_eps_grid(model)
    eps_grid = np.asarray(sorted(eps_grid, reverse=True), dtype=float)
    if eps_grid.size < 6:
        raise NumericalError("need a grid of at least 6 eps values")
    routing = elevation_routing(model.graph)
    gaps = []
    bounds = []
    for eps in eps_grid:
        analysis = analyze_kernel(model, eps, routing=routing)
        gaps.append(analysis.gap)
        bounds.append(analysis.gap_lower_bound)
    gaps = np.array(gaps)
    bounds = np.array(bounds)
    barrier = energy_barrier(model.graph)
    gap_fit = fit_loglog(eps_grid, gaps)
    bound_fit = fit_loglog(eps_grid, bounds)
    min_constant = float((gaps / eps_grid**barrier).min()) if barrier > 0 else float(gaps.min())
    return SpectralScaling(eps_grid, gaps, bounds, gap_fit, bound_fit, barrier, min_constant)
