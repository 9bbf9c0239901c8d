"""Analysis of finite-state evolution models with vanishing mutation rates.

The package is organized around five layers: model definition and parsing
(cost_graph), the combinatorial tree calculus (tree_calculus), fixed-eps
kernel numerics (kernel), inhomogeneous-chain simulation (simulate), and
a command-line front end (cli, installed as ``evobarrier``).
"""

from .cost_graph import (
    ClassDecomposition,
    CostGraph,
    EvolutionModel,
    assemble_kernel,
    check_admissible,
    limit_kernel,
    make_model,
    model_from_dict,
    model_to_dict,
    parse_model,
    recurrent_classes,
    serialize_model,
    witness_path,
)
from .errors import (
    EnumerationCapError,
    EvobarrierError,
    InadmissibleGraphError,
    ModelSchemaError,
    NumericalError,
    ScheduleError,
    StochasticityError,
)
from .fit import SlopeFit, fit_loglog, fit_slope
from .kernel import (
    KernelAnalysis,
    RoutingFunction,
    SpectralScaling,
    analyze_kernel,
    build_kernel,
    default_eps_grid,
    elevation_routing,
    jacobi_eigenvalues,
    limit_distribution,
    poincare_bound,
    pseudo_inverse,
    spectral_scaling_check,
    stationary_solve,
    stationary_tree_formula,
)
from .presets import (
    BUILTIN_NAMES,
    cloez,
    emit_builtin,
    example1,
    example2,
    example3,
    make_builtin,
)
from .simulate import (
    MutationSchedule,
    NoiseDecomposition,
    OccupationSeries,
    Q2Diagnostics,
    RateEstimate,
    checkpoint_grid,
    estimate_rate,
    make_schedule,
    noise_decomposition,
    q2_diagnostics,
    rate_from_runs,
    rep_seed,
    simulate_batch,
    simulate_chain,
)
from .tree_calculus import (
    Arborescence,
    PotentialReport,
    coradius,
    edge_potential,
    elevation,
    energy_barrier,
    enumerate_trees,
    full_report,
    min_coradius,
    quasi_potential,
    resistance,
    tree_gap,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
