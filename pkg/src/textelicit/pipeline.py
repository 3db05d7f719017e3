"""Reduction from review text to ternary matrices, priors, and scores.

A cluster is one assignment: several submissions, each with an instructor
review (the ground truth) and peer reviews carrying reference scores.  The
oracle turns the instructor reviews into summary points (summarize, build
positive/negative pairs, cluster), then question-answering maps every
review onto the points as a ternary vector.  Priors are the empirical
frequency of each point across the instructor rows; bot entries carry no
frequency information and are excluded, and columns that are bot everywhere
are dropped together with their point.

Summary points come from instructor reviews only.  Summarization mistakes
cannot break truthfulness, but letting peer text shape the rubric could.
"""

from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .alignment import AlignmentProblem, AlignmentSample
from .oracles.client import OracleError
from .rules import SeparateRule, Ternary, clamp_prior

logger = logging.getLogger(__name__)

__all__ = [
    "PeerReview",
    "Submission",
    "ClusterDataset",
    "SummaryPoint",
    "ReportRow",
    "ElicitedMatrix",
    "ElicitationError",
    "load_dataset",
    "compute_priors",
    "elicit_cluster",
    "score_review",
    "build_problem",
    "instructor_references",
    "judge_references",
]

REFERENCE_SCALE = 10.0  # reference scores live on [0, 10]


class ElicitationError(RuntimeError):
    """A cluster failed to elicit; partial matrices are never emitted."""

    def __init__(self, message: str, cluster_id: str, request_id: str | None = None):
        super().__init__(message)
        self.cluster_id = cluster_id
        self.request_id = request_id


@dataclass(frozen=True)
class PeerReview:
    reviewer_id: str
    text: str
    reference_scores: dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name, score in self.reference_scores.items():
            if not 0.0 <= score <= REFERENCE_SCALE:
                raise ValueError(
                    f"reference score {name}={score} for reviewer "
                    f"{self.reviewer_id} is outside [0, {REFERENCE_SCALE}]"
                )


@dataclass(frozen=True)
class Submission:
    submission_id: str
    instructor_review: str
    peer_reviews: tuple[PeerReview, ...]

    def __post_init__(self) -> None:
        if not self.instructor_review.strip():
            raise ValueError(f"submission {self.submission_id} has an empty instructor review")
        reviewers = [p.reviewer_id for p in self.peer_reviews]
        if len(set(reviewers)) != len(reviewers):
            raise ValueError(f"duplicate reviewer ids on submission {self.submission_id}")


@dataclass(frozen=True)
class ClusterDataset:
    """One assignment's submissions; priors need at least two ground truths."""

    cluster_id: str
    submissions: tuple[Submission, ...]

    def __post_init__(self) -> None:
        if len(self.submissions) < 2:
            raise ValueError(
                f"cluster {self.cluster_id} needs at least 2 submissions, "
                f"got {len(self.submissions)}"
            )
        ids = [s.submission_id for s in self.submissions]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate submission ids in cluster {self.cluster_id}")

    def to_json_dict(self) -> dict:
        return {
            "cluster_id": self.cluster_id,
            "submissions": [
                {
                    "submission_id": s.submission_id,
                    "instructor_review": s.instructor_review,
                    "peer_reviews": [
                        {
                            "reviewer_id": p.reviewer_id,
                            "text": p.text,
                            "reference_scores": dict(p.reference_scores),
                        }
                        for p in s.peer_reviews
                    ],
                }
                for s in self.submissions
            ],
        }

    @classmethod
    def from_json_dict(cls, raw: dict) -> "ClusterDataset":
        submissions = tuple(
            Submission(
                submission_id=str(sub["submission_id"]),
                instructor_review=str(sub["instructor_review"]),
                peer_reviews=tuple(
                    PeerReview(
                        reviewer_id=str(p["reviewer_id"]),
                        text=str(p["text"]),
                        reference_scores={
                            str(k): float(v)
                            for k, v in p.get("reference_scores", {}).items()
                        },
                    )
                    for p in sub.get("peer_reviews", [])
                ),
            )
            for sub in raw["submissions"]
        )
        return cls(cluster_id=str(raw["cluster_id"]), submissions=submissions)

    def content_hash(self, oracle_identity: Mapping[str, str]) -> str:
        payload = json.dumps(
            {"cluster": self.to_json_dict(), "oracle": dict(oracle_identity)},
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def load_dataset(path: str | Path) -> list[ClusterDataset]:
    """Read the documented dataset JSON: {"clusters": [...]}."""
    raw = json.loads(Path(path).read_text())
    clusters = [ClusterDataset.from_json_dict(entry) for entry in raw["clusters"]]
    if not clusters:
        raise ValueError(f"dataset {path} contains no clusters")
    return clusters


@dataclass(frozen=True)
class SummaryPoint:
    """One rubric dimension as a positive/negative statement pair."""

    id: str
    positive_text: str
    negative_text: str
    description: str

    def __post_init__(self) -> None:
        if not self.positive_text.strip() or not self.negative_text.strip():
            raise ValueError(f"summary point {self.id} has an empty statement")
        if self.positive_text == self.negative_text:
            raise ValueError(f"summary point {self.id} has identical statements")

    @property
    def pair(self) -> tuple[str, str]:
        return (self.positive_text, self.negative_text)


@dataclass(frozen=True)
class ReportRow:
    submission_id: str
    reviewer_id: str
    values: tuple[Ternary, ...]


@dataclass(frozen=True)
class ElicitedMatrix:
    """Ternary states and reports of one cluster over its summary points."""

    cluster_id: str
    points: tuple[SummaryPoint, ...]
    gt_states: tuple[tuple[Ternary, ...], ...]  # one row per submission
    submission_ids: tuple[str, ...]
    reports: tuple[ReportRow, ...]
    priors: tuple[float, ...]
    content_hash: str = ""
    oracle_identity: tuple[tuple[str, str], ...] = ()

    def __post_init__(self) -> None:
        m = len(self.points)
        if m < 1:
            raise ValueError("an elicited matrix needs at least one summary point")
        if len(self.priors) != m:
            raise ValueError(f"expected {m} priors, got {len(self.priors)}")
        if len(self.gt_states) != len(self.submission_ids):
            raise ValueError("one ground-truth row per submission required")
        for row in self.gt_states:
            if len(row) != m:
                raise ValueError("ground-truth row length does not match points")
        for report in self.reports:
            if len(report.values) != m:
                raise ValueError(
                    f"report by {report.reviewer_id} has length {len(report.values)}, "
                    f"expected {m}"
                )
        expected, kept = compute_priors(self.gt_states)
        if len(kept) != m:
            raise ValueError("matrix contains all-bot summary point columns")
        for have, want in zip(self.priors, expected):
            if abs(have - want) > 1e-12:
                raise ValueError("priors do not match ground-truth column means")

    @property
    def m(self) -> int:
        return len(self.points)

    def gt_row(self, submission_id: str) -> tuple[Ternary, ...]:
        try:
            return self.gt_states[self.submission_ids.index(submission_id)]
        except ValueError:
            raise KeyError(
                f"unknown submission {submission_id!r} in cluster {self.cluster_id}"
            ) from None

    def report_for(self, submission_id: str, reviewer_id: str) -> ReportRow:
        for report in self.reports:
            if (report.submission_id, report.reviewer_id) == (submission_id, reviewer_id):
                return report
        raise KeyError(
            f"no report by {reviewer_id!r} on {submission_id!r} "
            f"in cluster {self.cluster_id}"
        )

    def to_json_dict(self) -> dict:
        return {
            "cluster_id": self.cluster_id,
            "content_hash": self.content_hash,
            "oracle_identity": dict(self.oracle_identity),
            "points": [
                {
                    "id": p.id,
                    "positive_text": p.positive_text,
                    "negative_text": p.negative_text,
                    "description": p.description,
                }
                for p in self.points
            ],
            "priors": list(self.priors),
            "gt_states": [
                {"submission_id": sid, "values": [v.to_json() for v in row]}
                for sid, row in zip(self.submission_ids, self.gt_states)
            ],
            "reports": [
                {
                    "submission_id": r.submission_id,
                    "reviewer_id": r.reviewer_id,
                    "values": [v.to_json() for v in r.values],
                }
                for r in self.reports
            ],
        }

    @classmethod
    def from_json_dict(cls, raw: dict) -> "ElicitedMatrix":
        return cls(
            cluster_id=str(raw["cluster_id"]),
            points=tuple(
                SummaryPoint(
                    id=str(p["id"]),
                    positive_text=str(p["positive_text"]),
                    negative_text=str(p["negative_text"]),
                    description=str(p["description"]),
                )
                for p in raw["points"]
            ),
            gt_states=tuple(
                tuple(Ternary.from_json(v) for v in entry["values"])
                for entry in raw["gt_states"]
            ),
            submission_ids=tuple(str(e["submission_id"]) for e in raw["gt_states"]),
            reports=tuple(
                ReportRow(
                    submission_id=str(e["submission_id"]),
                    reviewer_id=str(e["reviewer_id"]),
                    values=tuple(Ternary.from_json(v) for v in e["values"]),
                )
                for e in raw["reports"]
            ),
            priors=tuple(float(p) for p in raw["priors"]),
            content_hash=str(raw.get("content_hash", "")),
            oracle_identity=tuple(sorted(raw.get("oracle_identity", {}).items())),
        )


def compute_priors(
    gt_states: Sequence[Sequence[Ternary]],
) -> tuple[tuple[float, ...], tuple[int, ...]]:
    """Column means of the ground-truth matrix over the non-bot entries.

    Returns (clamped priors, kept column indices).  Columns that are bot in
    every row carry no frequency information; they are dropped and logged.
    """
    if not gt_states:
        raise ValueError("cannot compute priors from an empty ground-truth matrix")
    width = len(gt_states[0])
    priors: list[float] = []
    kept: list[int] = []
    for col in range(width):
        values = [row[col] for row in gt_states]
        known = [v.value for v in values if not v.is_bot]
        if not known:
            logger.warning("dropping summary point column %d: bot in every row", col)
            continue
        priors.append(clamp_prior(sum(known) / len(known)))
        kept.append(col)
    return tuple(priors), tuple(kept)


def elicit_cluster(
    cluster: ClusterDataset, oracle, max_in_flight: int | None = None
) -> ElicitedMatrix:
    """Run the full reduction for one cluster.

    Summarization (three oracle stages over instructor reviews only) fixes
    the summary points, then question-answering maps every instructor and
    peer review onto them; question-answering calls run concurrently up to
    the oracle's in-flight bound.  Any oracle failure aborts the whole
    cluster; responses are cached by the client, so a rerun replays offline.
    """
    try:
        statements: list[str] = []
        for submission in cluster.submissions:
            statements.extend(oracle.summarize_review(submission.instructor_review))
        if len(statements) < 2:
            raise ElicitationError(
                f"cluster {cluster.cluster_id}: need at least 2 evaluative statements "
                f"to build summary points, got {len(statements)}",
                cluster.cluster_id,
            )
        pairs = oracle.make_opposites(statements)
        clusters = oracle.cluster_pairs(pairs)
        points = tuple(
            SummaryPoint(
                id=f"{cluster.cluster_id}.p{i}",
                positive_text=positive,
                negative_text=negative,
                description=description,
            )
            for i, (description, positive, negative) in enumerate(clusters, 1)
        )
        point_pairs = [p.pair for p in points]

        review_texts = [s.instructor_review for s in cluster.submissions]
        review_texts += [
            p.text for s in cluster.submissions for p in s.peer_reviews
        ]
        workers = max_in_flight or oracle.config_for("qa").max_in_flight
        with ThreadPoolExecutor(max_workers=workers) as pool:
            answers = list(
                pool.map(lambda text: oracle.answer(text, point_pairs), review_texts)
            )
    except OracleError as exc:
        raise ElicitationError(
            f"cluster {cluster.cluster_id} failed: {exc}",
            cluster.cluster_id,
            request_id=exc.request_id,
        ) from exc

    n_subs = len(cluster.submissions)
    gt_full = [tuple(row) for row in answers[:n_subs]]
    priors, kept = compute_priors(gt_full)
    if not kept:
        raise ElicitationError(
            f"cluster {cluster.cluster_id}: every summary point column is bot",
            cluster.cluster_id,
        )
    if len(kept) < len(points):
        dropped = [p.id for i, p in enumerate(points) if i not in kept]
        logger.warning(
            "cluster %s: dropped all-bot summary points %s", cluster.cluster_id, dropped
        )

    def keep(row: Sequence[Ternary]) -> tuple[Ternary, ...]:
        return tuple(row[i] for i in kept)

    reports = []
    cursor = n_subs
    for submission in cluster.submissions:
        for peer in submission.peer_reviews:
            reports.append(
                ReportRow(
                    submission_id=submission.submission_id,
                    reviewer_id=peer.reviewer_id,
                    values=keep(answers[cursor]),
                )
            )
            cursor += 1

    identity = tuple(sorted(oracle.identity().items()))
    return ElicitedMatrix(
        cluster_id=cluster.cluster_id,
        points=tuple(points[i] for i in kept),
        gt_states=tuple(keep(row) for row in gt_full),
        submission_ids=tuple(s.submission_id for s in cluster.submissions),
        reports=tuple(reports),
        priors=priors,
        content_hash=cluster.content_hash(dict(identity)),
        oracle_identity=identity,
    )


def score_review(
    matrix: ElicitedMatrix,
    fitted: SeparateRule,
    submission_id: str,
    reviewer_id: str,
) -> float:
    """Score one peer review on the [0, 10] scale.

    The review's report vector is scored against its own submission's
    ground-truth row and rescaled from the normalized fitting scale.
    """
    if len(fitted.dims) != matrix.m:
        raise ValueError(
            f"rule has {len(fitted.dims)} dimensions, matrix has {matrix.m}"
        )
    report = matrix.report_for(submission_id, reviewer_id)
    state = matrix.gt_row(submission_id)
    return fitted.score(report.values, state) * REFERENCE_SCALE


def instructor_references(
    cluster: ClusterDataset, name: str = "instructor"
) -> dict[tuple[str, str], float]:
    """Reference scores stored on the dataset, keyed (submission, reviewer)."""
    refs: dict[tuple[str, str], float] = {}
    for submission in cluster.submissions:
        for peer in submission.peer_reviews:
            if name not in peer.reference_scores:
                raise KeyError(
                    f"peer review {peer.reviewer_id} on {submission.submission_id} "
                    f"has no reference score named {name!r}"
                )
            refs[(submission.submission_id, peer.reviewer_id)] = peer.reference_scores[name]
    return refs


def judge_references(cluster: ClusterDataset, oracle) -> dict[tuple[str, str], float]:
    """Judge-model scores of every peer review against its instructor review."""
    refs: dict[tuple[str, str], float] = {}
    for submission in cluster.submissions:
        for peer in submission.peer_reviews:
            refs[(submission.submission_id, peer.reviewer_id)] = oracle.judge_score(
                submission.instructor_review, peer.text
            )
    return refs


def build_problem(
    matrix: ElicitedMatrix, references: Mapping[tuple[str, str], float]
) -> AlignmentProblem:
    """Assemble the least-squares instance for one cluster.

    Each peer review becomes one sample: its report vector, its submission's
    ground-truth row, and the reference score normalized to [0, 1].
    """
    samples = []
    for report in matrix.reports:
        key = (report.submission_id, report.reviewer_id)
        if key not in references:
            raise KeyError(f"no reference score for {key}")
        samples.append(
            AlignmentSample(
                report=report.values,
                state=matrix.gt_row(report.submission_id),
                ref_score=references[key] / REFERENCE_SCALE,
            )
        )
    return AlignmentProblem(
        m=matrix.m,
        priors=matrix.priors,
        samples=tuple(samples),
        cluster_id=matrix.cluster_id,
        point_ids=tuple(p.id for p in matrix.points),
    )
