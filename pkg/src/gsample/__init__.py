"""Sampling allocation for graph-filter-based signal recovery."""

from .costs import (
    CostKind,
    a_design_cost,
    bcrb,
    bmse,
    cost_value,
    e_design_cost,
    gradient,
    lr_design_cost,
    wc_bmse,
    wc_mse,
)
from .estimator import (
    EstimatorState,
    analytic_mse,
    bias,
    build_state,
    estimate,
    estimate_bandlimited,
    measurement_matrix,
    measurement_rank,
)
from .exceptions import InfeasibleError, ObservabilityError, RankError
from .graphs import (
    WeightedGraph,
    build_laplacian,
    delete_node,
    is_connected,
    read_edge_list,
    write_edge_list,
)
from .greedy import GreedyConfig, GreedyResult, greedy_select, greedy_step_fast
from .harness import (
    ExperimentConfig,
    ResultRecord,
    SweepRecord,
    emit_results,
    emit_sweep_results,
    empirical_mse,
    generate_er_graph,
    load_config,
    read_results,
    run_monte_carlo,
    run_robustness_sweep,
)
from .model import (
    BandlimitedSpec,
    ProblemInstance,
    SamplingVector,
    as_sampling_vector,
    perturb_topology,
    sample_measurement,
    sample_prior,
)
from .pgd import PGDConfig, PGDResult, pgd_solve, project_ball, project_binary, project_box
from .spectral import (
    FilterSpec,
    SpectralDecomposition,
    apply_filter,
    filter_matrix,
    gft,
    igft,
    spectral_decompose,
    total_variation,
)

__version__ = "0.1.0"
