"""Evaluation harness: method predictions, baselines, splits, and reports.

Four methods are compared on identical rows, pooled across clusters:

- aligned: the fitted sum-mode rule, rescaled to [0, 10];
- constant: the training-mean reference score (weakly truthful);
- vshape_avg: the average of per-dimension V-shaped rules;
- vshape_max: the max-over-dimensions V-shaped rule.

The default split is in-sample; leave-one-submission-out refits the aligned
rule per fold (and re-means the constant) while the V-shape baselines need
no training.  Priors and summary points stay fixed across folds: they are
mechanism parameters read off the instructor reviews, not fitted values.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from itertools import product
from typing import Mapping, Sequence

import numpy as np

from .alignment import SolverConfig, fit_aligned_rule, importance
from .metrics import constant_baseline, mse, ols_fit, pearson, spearman
from .pipeline import ElicitedMatrix, build_problem, score_review
from .rules import (
    Aggregation,
    Belief,
    RuleDimension,
    SeparateRule,
    Ternary,
    expected_score,
    score_max_over_separate,
    v_shaped,
)

logger = logging.getLogger(__name__)

__all__ = [
    "METHODS",
    "PredictionRow",
    "MethodMetrics",
    "EvaluationReport",
    "vshape_mean_rule",
    "evaluate_methods",
    "PropernessRow",
    "properness_report",
    "no_information_gap",
    "truthfulness_worst_gap",
    "report_to_csv",
    "scatter_to_csv",
    "rule_lines_to_csv",
    "importance_to_csv",
]

METHOD_ALIGNED = "aligned"
METHOD_CONSTANT = "constant"
METHOD_VSHAPE_AVG = "vshape_avg"
METHOD_VSHAPE_MAX = "vshape_max"
METHODS = (METHOD_ALIGNED, METHOD_CONSTANT, METHOD_VSHAPE_AVG, METHOD_VSHAPE_MAX)

SCALE = 10.0


@dataclass(frozen=True)
class PredictionRow:
    cluster_id: str
    submission_id: str
    reviewer_id: str
    method: str
    predicted: float
    reference: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.predicted) and math.isfinite(self.reference)):
            raise ValueError("prediction rows must be finite")


@dataclass(frozen=True)
class MethodMetrics:
    squared_loss: float
    pearson: float | None
    spearman: float | None


@dataclass(frozen=True)
class EvaluationReport:
    methods: dict[str, MethodMetrics]
    ols: dict[str, float]
    n: int
    split: str
    reference_name: str

    def to_json_dict(self) -> dict:
        return {
            "split": self.split,
            "reference": self.reference_name,
            "n": self.n,
            "ols": self.ols,
            "methods": {
                name: {
                    "squared_loss": metric.squared_loss,
                    "pearson": metric.pearson,
                    "spearman": metric.spearman,
                }
                for name, metric in self.methods.items()
            },
        }


def vshape_mean_rule(matrix: ElicitedMatrix) -> SeparateRule:
    """The untrained baseline: equal-weight average of V-shaped rules."""
    dims = tuple(
        RuleDimension(rule=v_shaped(p, label=point.id), prior=p, point_id=point.id)
        for p, point in zip(matrix.priors, matrix.points)
    )
    return SeparateRule(dims=dims, aggregation=Aggregation.MEAN)


def _vshape_max_prediction(matrix: ElicitedMatrix, report_row) -> float:
    dims = [
        (v_shaped(p, label=point.id), p)
        for p, point in zip(matrix.priors, matrix.points)
    ]
    state = matrix.gt_row(report_row.submission_id)
    score, _ = score_max_over_separate(dims, report_row.values, state)
    return score * SCALE


def _in_sample_rows(
    matrices: Sequence[ElicitedMatrix],
    fitted_rules: Mapping[str, SeparateRule],
    references: Mapping[str, Mapping[tuple[str, str], float]],
) -> list[PredictionRow]:
    all_refs = [
        references[matrix.cluster_id][(r.submission_id, r.reviewer_id)]
        for matrix in matrices
        for r in matrix.reports
    ]
    constant = constant_baseline(all_refs)
    rows: list[PredictionRow] = []
    for matrix in matrices:
        fitted = fitted_rules[matrix.cluster_id]
        refs = references[matrix.cluster_id]
        mean_rule = vshape_mean_rule(matrix)
        for report in matrix.reports:
            key = (report.submission_id, report.reviewer_id)
            reference = refs[key]
            predictions = {
                METHOD_ALIGNED: score_review(matrix, fitted, *key),
                METHOD_CONSTANT: constant,
                METHOD_VSHAPE_AVG: matrix_score(matrix, mean_rule, *key),
                METHOD_VSHAPE_MAX: _vshape_max_prediction(matrix, report),
            }
            rows.extend(
                PredictionRow(matrix.cluster_id, *key, method, value, reference)
                for method, value in predictions.items()
            )
    return rows


def matrix_score(
    matrix: ElicitedMatrix, rule: SeparateRule, submission_id: str, reviewer_id: str
) -> float:
    """Score any separate rule (either aggregation) on the [0, 10] scale."""
    report = matrix.report_for(submission_id, reviewer_id)
    return rule.score(report.values, matrix.gt_row(submission_id)) * SCALE


def _loso_rows(
    matrices: Sequence[ElicitedMatrix],
    references: Mapping[str, Mapping[tuple[str, str], float]],
    solver_config: SolverConfig | None,
) -> list[PredictionRow]:
    """Leave one submission out: refit on the cluster's other submissions."""
    rows: list[PredictionRow] = []
    ref_items = [
        (matrix.cluster_id, key, references[matrix.cluster_id][key])
        for matrix in matrices
        for key in [(r.submission_id, r.reviewer_id) for r in matrix.reports]
    ]
    for matrix in matrices:
        refs = references[matrix.cluster_id]
        mean_rule = vshape_mean_rule(matrix)
        for held_out in matrix.submission_ids:
            train_reports = [r for r in matrix.reports if r.submission_id != held_out]
            test_reports = [r for r in matrix.reports if r.submission_id == held_out]
            if not test_reports:
                continue
            if not train_reports:
                logger.warning(
                    "cluster %s: no training rows when holding out %s; skipping fold",
                    matrix.cluster_id,
                    held_out,
                )
                continue
            problem = build_problem(
                _submatrix(matrix, train_reports), {k: refs[k] for k in _keys(train_reports)}
            )
            fitted = fit_aligned_rule(problem, solver_config).rule
            fold_constant = constant_baseline(
                [
                    value
                    for cluster_id, key, value in ref_items
                    if not (cluster_id == matrix.cluster_id and key[0] == held_out)
                ]
            )
            for report in test_reports:
                key = (report.submission_id, report.reviewer_id)
                reference = refs[key]
                predictions = {
                    METHOD_ALIGNED: score_review(matrix, fitted, *key),
                    METHOD_CONSTANT: fold_constant,
                    METHOD_VSHAPE_AVG: matrix_score(matrix, mean_rule, *key),
                    METHOD_VSHAPE_MAX: _vshape_max_prediction(matrix, report),
                }
                rows.extend(
                    PredictionRow(matrix.cluster_id, *key, method, value, reference)
                    for method, value in predictions.items()
                )
    return rows


def _keys(reports) -> list[tuple[str, str]]:
    return [(r.submission_id, r.reviewer_id) for r in reports]


def _submatrix(matrix: ElicitedMatrix, reports) -> ElicitedMatrix:
    return ElicitedMatrix(
        cluster_id=matrix.cluster_id,
        points=matrix.points,
        gt_states=matrix.gt_states,
        submission_ids=matrix.submission_ids,
        reports=tuple(reports),
        priors=matrix.priors,
        content_hash=matrix.content_hash,
        oracle_identity=matrix.oracle_identity,
    )


def evaluate_methods(
    matrices: Sequence[ElicitedMatrix],
    fitted_rules: Mapping[str, SeparateRule],
    references: Mapping[str, Mapping[tuple[str, str], float]],
    split: str = "in_sample",
    solver_config: SolverConfig | None = None,
    reference_name: str = "",
) -> tuple[EvaluationReport, list[PredictionRow]]:
    """Pooled metrics for every method, plus the per-review prediction rows.

    All methods are scored on identical rows.  Correlations of a constant
    predictor are reported as None (rendered "NA").
    """
    if split == "in_sample":
        rows = _in_sample_rows(matrices, fitted_rules, references)
    elif split == "loso_cv":
        rows = _loso_rows(matrices, references, solver_config)
    else:
        raise ValueError(f"unknown split {split!r}; use 'in_sample' or 'loso_cv'")
    by_method: dict[str, list[PredictionRow]] = {name: [] for name in METHODS}
    for row in rows:
        by_method[row.method].append(row)
    counts = {len(v) for v in by_method.values()}
    if len(counts) != 1:
        raise ValueError(f"methods scored on different row counts: {counts}")
    metrics: dict[str, MethodMetrics] = {}
    for name in METHODS:
        preds = [r.predicted for r in by_method[name]]
        refs = [r.reference for r in by_method[name]]
        metrics[name] = MethodMetrics(
            squared_loss=mse(preds, refs),
            pearson=pearson(preds, refs),
            spearman=spearman(preds, refs),
        )
    aligned = by_method[METHOD_ALIGNED]
    ols = ols_fit([r.predicted for r in aligned], [r.reference for r in aligned])
    return (
        EvaluationReport(
            methods=metrics,
            ols=ols,
            n=len(aligned),
            split=split,
            reference_name=reference_name,
        ),
        rows,
    )


# ---------------------------------------------------------------------------
# Truthfulness reporting
# ---------------------------------------------------------------------------

_BELIEFS = (Belief.POINT_ZERO, Belief.POINT_ONE, Belief.AT_PRIOR)
_REPORTS = (Ternary.ZERO, Ternary.ONE, Ternary.BOT)


@dataclass(frozen=True)
class PropernessRow:
    dim_index: int
    prior: float
    belief: str
    deviation: str
    exact_gap: float
    mc_gap: float
    mc_se: float


def _channel_expected(rule, prior, belief, report, flip_prob) -> float:
    """Expected score when the channel may invert a non-bot report."""
    clean = expected_score(rule, prior, belief, report)
    if report.is_bot or flip_prob == 0.0:
        return clean
    flipped = expected_score(rule, prior, belief, report.flip())
    return (1.0 - flip_prob) * clean + flip_prob * flipped


def properness_report(
    rule: SeparateRule,
    flip_prob: float = 0.0,
    trials: int = 10_000,
    seed: int = 0,
) -> list[PropernessRow]:
    """Truthful-versus-deviation gaps per dimension, exact and simulated.

    The exact gap is the clean-channel expected-score difference; the
    Monte-Carlo gap pushes both the truthful report and the deviation
    through a channel that flips non-bot reports with probability
    ``flip_prob`` (which must stay below 1/2, the non-inverting regime),
    using paired state draws and reporting the standard error.
    """
    if not 0.0 <= flip_prob < 0.5:
        raise ValueError(f"flip probability must lie in [0, 0.5), got {flip_prob}")
    if trials < 1:
        raise ValueError("trials must be positive")
    rng = np.random.default_rng(seed)
    rows: list[PropernessRow] = []
    for index, dim in enumerate(rule.dims):
        cells = np.array(
            [
                [dim.rule.s00, dim.rule.s01],
                [dim.rule.s10, dim.rule.s11],
                [dim.rule.sb0, dim.rule.sb1],
            ]
        )
        for belief in _BELIEFS:
            truthful = belief.truthful_report
            mu = belief.mean(dim.prior)
            states = (rng.random(trials) < mu).astype(np.intp)
            for deviation in _REPORTS:
                if deviation is truthful:
                    continue
                exact_gap = expected_score(
                    dim.rule, dim.prior, belief, truthful
                ) - expected_score(dim.rule, dim.prior, belief, deviation)
                truth_idx = _channel_indices(truthful, flip_prob, trials, rng)
                dev_idx = _channel_indices(deviation, flip_prob, trials, rng)
                diffs = cells[truth_idx, states] - cells[dev_idx, states]
                mc_gap = float(diffs.mean())
                mc_se = float(diffs.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
                rows.append(
                    PropernessRow(
                        dim_index=index,
                        prior=dim.prior,
                        belief=belief.value,
                        deviation=str(deviation),
                        exact_gap=exact_gap,
                        mc_gap=mc_gap,
                        mc_se=mc_se,
                    )
                )
    return rows


def _channel_indices(report: Ternary, flip_prob: float, trials: int, rng) -> np.ndarray:
    """Row indices into the (report x state) cell table after channel noise."""
    base = {Ternary.ZERO: 0, Ternary.ONE: 1, Ternary.BOT: 2}[report]
    if report.is_bot or flip_prob == 0.0:
        return np.full(trials, base, dtype=np.intp)
    flips = rng.random(trials) < flip_prob
    return np.where(flips, 1 - base, base).astype(np.intp)


def _prior_line_value(dim: RuleDimension, report: Ternary) -> float:
    return expected_score(dim.rule, dim.prior, Belief.AT_PRIOR, report)


def no_information_gap(rule: SeparateRule, exhaustive: bool = True) -> float:
    """Best-report advantage over all-bot for an agent with prior beliefs.

    Nonnegative by construction and zero (up to tolerance) for proper
    rules: saying "I don't know" everywhere is already optimal without
    information.  Separability makes the per-dimension maxima exact;
    ``exhaustive`` additionally enumerates every report vector (small m).
    """
    per_dim_best = [
        max(_prior_line_value(dim, report) for report in _REPORTS) for dim in rule.dims
    ]
    per_dim_bot = [_prior_line_value(dim, Ternary.BOT) for dim in rule.dims]
    scale = 1.0 / len(rule.dims) if rule.aggregation is Aggregation.MEAN else 1.0
    best = sum(per_dim_best) * scale
    all_bot = sum(per_dim_bot) * scale
    if exhaustive:
        if len(rule.dims) > 8:
            raise ValueError("exhaustive enumeration is limited to m <= 8")
        best_enum = max(
            sum(
                _prior_line_value(dim, report)
                for dim, report in zip(rule.dims, combo)
            )
            * scale
            for combo in product(_REPORTS, repeat=len(rule.dims))
        )
        best = max(best, best_enum)
    return best - all_bot


def truthfulness_worst_gap(rule: SeparateRule, exhaustive: bool = True) -> float:
    """Smallest truthful-minus-deviation expected-score gap (>= 0 if proper).

    Separability reduces the check to one dimension at a time; with
    ``exhaustive`` every belief profile and every deviating report vector
    is enumerated outright (3^m by 3^m, so keep m small).
    """
    scale = 1.0 / len(rule.dims) if rule.aggregation is Aggregation.MEAN else 1.0
    worst = math.inf
    for dim in rule.dims:
        for belief in _BELIEFS:
            truthful_value = expected_score(
                dim.rule, dim.prior, belief, belief.truthful_report
            )
            for deviation in _REPORTS:
                worst = min(
                    worst,
                    truthful_value
                    - expected_score(dim.rule, dim.prior, belief, deviation),
                )
    if exhaustive:
        if len(rule.dims) > 4:
            raise ValueError("exhaustive enumeration is limited to m <= 4")
        for profile in product(_BELIEFS, repeat=len(rule.dims)):
            truthful_vector = tuple(b.truthful_report for b in profile)
            expected = {
                report_vector: sum(
                    expected_score(dim.rule, dim.prior, belief, report)
                    for dim, belief, report in zip(rule.dims, profile, report_vector)
                )
                * scale
                for report_vector in product(_REPORTS, repeat=len(rule.dims))
            }
            truthful_value = expected[truthful_vector]
            worst = min(
                worst, min(truthful_value - value for value in expected.values())
            )
    return worst


# ---------------------------------------------------------------------------
# CSV emitters (plot data; rendering itself is out of scope)
# ---------------------------------------------------------------------------


def _csv(value) -> str:
    if value is None:
        return "NA"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _csv_text(field: str) -> str:
    if any(ch in field for ch in ",\"\n"):
        return '"' + field.replace('"', '""') + '"'
    return field


def report_to_csv(report: EvaluationReport) -> str:
    lines = ["method,squared_loss,pearson,spearman"]
    for name in METHODS:
        metric = report.methods[name]
        lines.append(
            ",".join(
                [name, _csv(metric.squared_loss), _csv(metric.pearson), _csv(metric.spearman)]
            )
        )
    return "\n".join(lines) + "\n"


def scatter_to_csv(rows: Sequence[PredictionRow]) -> str:
    lines = ["cluster_id,submission_id,reviewer_id,method,predicted,reference"]
    for row in rows:
        lines.append(
            ",".join(
                [
                    _csv_text(row.cluster_id),
                    _csv_text(row.submission_id),
                    _csv_text(row.reviewer_id),
                    row.method,
                    _csv(row.predicted),
                    _csv(row.reference),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def rule_lines_to_csv(rules: Mapping[str, SeparateRule]) -> str:
    """Per-dimension score lines with the bot line shifted to zero."""
    lines = ["cluster_id,dim_index,summary_point,prior,line,state0,state1"]
    for cluster_id in sorted(rules):
        rule = rules[cluster_id]
        for index, dim in enumerate(rule.dims):
            shift0, shift1 = dim.rule.sb0, dim.rule.sb1
            segments = {
                "report_0": (dim.rule.s00 - shift0, dim.rule.s01 - shift1),
                "report_1": (dim.rule.s10 - shift0, dim.rule.s11 - shift1),
                "bot": (0.0, 0.0),
            }
            for line_name, (at0, at1) in segments.items():
                lines.append(
                    ",".join(
                        [
                            _csv_text(cluster_id),
                            str(index),
                            _csv_text(dim.point_id),
                            _csv(dim.prior),
                            line_name,
                            _csv(at0),
                            _csv(at1),
                        ]
                    )
                )
    return "\n".join(lines) + "\n"


def importance_to_csv(rules: Mapping[str, SeparateRule]) -> str:
    header = "cluster_id,dim_index,summary_point,prior,s00,s01,s10,s11,sb0,sb1,importance"
    lines = [header]
    for cluster_id in sorted(rules):
        rule = rules[cluster_id]
        for index, dim in enumerate(rule.dims):
            lines.append(
                ",".join(
                    [
                        _csv_text(cluster_id),
                        str(index),
                        _csv_text(dim.point_id),
                        _csv(dim.prior),
                        *(_csv(c) for c in dim.rule.cells()),
                        _csv(importance(dim.rule, dim.prior)),
                    ]
                )
            )
    return "\n".join(lines) + "\n"
