"""Multi-task Gaussian processes over the intervention functions of a causal DAG.

The package models every intervention function of a structural causal
model jointly: a prior over the shared base function is propagated through
each intervention set's integrating measure, giving cross-task covariances
that let sparse experiments on one set inform all others.  On top of the
joint model sit greedy information-gain experiment design, expected-
improvement optimization, and a benchmark harness over three built-in
structural models.
"""

from .bench import (
    ExperimentConfig,
    Report,
    run_al_experiment,
    run_bo_experiment,
    run_experiment,
    run_fit_experiment,
)
from .causal_prior import (
    BasePoint,
    CausalPriorParams,
    causal_kernel,
    causal_mean,
    estimate_do_effect,
    make_causal_prior,
    make_standard_prior,
)
from .dag_gp import (
    IndependentTaskModels,
    MultiTaskGP,
    Prediction,
    SingleTaskGP,
    TaskPoint,
    build_gram,
    build_independent_models,
    build_multitask_model,
    condition,
    do_baseline,
    fit_single_task,
    load_snapshot,
    posterior,
    posterior_mean,
    prior_cov,
    prior_mean_ts,
    rmse,
    save_snapshot,
)
from .decision import (
    CandidateGrid,
    DesignTrace,
    TraceStep,
    al_greedy_mi,
    al_uniform_random,
    bo_step,
    expected_improvement,
    make_candidate_grid,
    mi_gain,
)
from .density_models import (
    ConditionalGaussian,
    FeatureMapConditional,
    FittedDAGDensity,
    IntegratingMeasure,
    build_integrating_measure,
    fit_conditional_gaussian,
    fit_conditional_rff_gaussian,
    fit_dag_density,
    sample_measure,
)
from .errors import (
    DegenerateDataError,
    GraphStructureError,
    InterventionError,
    NumericalError,
    TransferError,
)
from .graph_analysis import (
    BaseSets,
    SetPartition,
    TransferConditions,
    TransferReport,
    base_function_exists,
    base_sets,
    d_separated,
    deduplicated_sets,
    directed_ancestors,
    effective_set,
    intervention_sets,
    partition_for_set,
    transfer_conditions,
    transferable_subset,
)
from .scm_core import (
    SCM,
    CausalGraph,
    Dataset,
    InterventionAssignment,
    McEstimate,
    NoiseLaw,
    ScmBundle,
    apply_do,
    builtin_scm,
    manifest_hash,
    sample,
    scm_manifest,
    topological_order,
    true_function_grid,
    true_intervention_function,
    validate_domains,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # structural models
    "CausalGraph",
    "SCM",
    "NoiseLaw",
    "InterventionAssignment",
    "Dataset",
    "McEstimate",
    "ScmBundle",
    "topological_order",
    "sample",
    "apply_do",
    "true_intervention_function",
    "true_function_grid",
    "validate_domains",
    "builtin_scm",
    "scm_manifest",
    "manifest_hash",
    # graph analysis
    "BaseSets",
    "SetPartition",
    "TransferConditions",
    "TransferReport",
    "intervention_sets",
    "effective_set",
    "deduplicated_sets",
    "base_sets",
    "partition_for_set",
    "d_separated",
    "directed_ancestors",
    "transfer_conditions",
    "base_function_exists",
    "transferable_subset",
    # densities and measures
    "ConditionalGaussian",
    "FeatureMapConditional",
    "FittedDAGDensity",
    "IntegratingMeasure",
    "fit_conditional_gaussian",
    "fit_conditional_rff_gaussian",
    "fit_dag_density",
    "build_integrating_measure",
    "sample_measure",
    # causal prior
    "BasePoint",
    "CausalPriorParams",
    "estimate_do_effect",
    "make_causal_prior",
    "make_standard_prior",
    "causal_mean",
    "causal_kernel",
    # joint model
    "TaskPoint",
    "Prediction",
    "MultiTaskGP",
    "SingleTaskGP",
    "IndependentTaskModels",
    "build_multitask_model",
    "build_independent_models",
    "prior_mean_ts",
    "prior_cov",
    "build_gram",
    "posterior",
    "posterior_mean",
    "condition",
    "fit_single_task",
    "do_baseline",
    "rmse",
    "save_snapshot",
    "load_snapshot",
    # experiment design
    "CandidateGrid",
    "TraceStep",
    "DesignTrace",
    "make_candidate_grid",
    "mi_gain",
    "al_greedy_mi",
    "al_uniform_random",
    "expected_improvement",
    "bo_step",
    # benchmark harness
    "ExperimentConfig",
    "Report",
    "run_fit_experiment",
    "run_al_experiment",
    "run_bo_experiment",
    "run_experiment",
    # errors
    "GraphStructureError",
    "InterventionError",
    "DegenerateDataError",
    "TransferError",
    "NumericalError",
]
