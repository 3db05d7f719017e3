"""textelicit: truthful scoring of free-text reviews against ground truth.

Reviews are reduced to ternary reports over extracted summary points, then
scored by proper scoring rules; a constrained least-squares fit aligns the
rule with a reference score (instructor or judge model) while keeping it
provably truthful.
"""

from importlib import resources

from .alignment import (
    AlignmentProblem,
    AlignmentSample,
    FitError,
    FitResult,
    SolverConfig,
    fit_aligned_rule,
    grid_oracle,
    importance,
    objective,
    project_feasible,
)
from .evaluation import (
    EvaluationReport,
    evaluate_methods,
    no_information_gap,
    properness_report,
    truthfulness_worst_gap,
)
from .metrics import constant_baseline, mse, ols_fit, pearson, spearman
from .pipeline import (
    ClusterDataset,
    ElicitationError,
    ElicitedMatrix,
    SummaryPoint,
    build_problem,
    compute_priors,
    elicit_cluster,
    load_dataset,
    score_review,
)
from .rules import (
    Aggregation,
    Belief,
    SeparateRule,
    SingleDimRule,
    Ternary,
    best_response,
    clamp_prior,
    eval_single,
    expected_score,
    is_proper_single,
    score_max_over_separate,
    score_separate,
    v_shaped,
)

__version__ = "0.1.0"


def toy_dataset_path() -> str:
    """Filesystem path of the bundled two-cluster example dataset."""
    return str(resources.files("textelicit").joinpath("data/toy_dataset.json"))
