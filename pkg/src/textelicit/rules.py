"""Proper scoring rules for ternary "know it or not" reports.

A report on one summary point is 0 (disagree), 1 (agree), or bot (no
information, rendered "⊥").  The ground-truth state for a point is binary,
but bot is also allowed on the state side when the truth itself is silent;
such states are scored in expectation under the point's prior.

A single-dimensional rule is six numbers S(report, state) stored as cells
s00, s01, s10, s11, sb0, sb1 (report first, then state, "b" for bot).
Properness means that under every belief in the know-it-or-not family
(point mass at 0, point mass at 1, or the prior) the truthful report
maximizes the expected score, with ties allowed.

Multi-dimensional rules aggregate per-dimension rules either by summation
(fitted rules, whose cell magnitudes absorb the weights) or by plain
averaging (the V-shape baseline).  A separate max-over-dimensions
aggregation scores only the dimension the report is most confident about.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterator, Sequence

__all__ = [
    "PRIOR_EPS",
    "PROPERNESS_TOL",
    "Ternary",
    "Belief",
    "Aggregation",
    "SingleDimRule",
    "RuleDimension",
    "SeparateRule",
    "clamp_prior",
    "require_prior",
    "v_shaped",
    "eval_single",
    "expected_score",
    "is_proper_single",
    "properness_residual",
    "best_response",
    "score_separate",
    "score_max_over_separate",
]

# Priors are clamped away from 0 and 1 so the V-shape construction stays
# finite while near-deterministic priors keep their incentives.
PRIOR_EPS = 0.01

# Default slack when checking the six properness inequalities.
PROPERNESS_TOL = 1e-9

# Cells may carry projection residue of this size and still count as [0, 1].
_CELL_SLACK = 1e-9


class Ternary(Enum):
    """Report / state value: 0, 1, or bot ("I don't know" / not mentioned)."""

    ZERO = 0
    ONE = 1
    BOT = 2

    @property
    def is_bot(self) -> bool:
        return self is Ternary.BOT

    def flip(self) -> "Ternary":
        """Sign inversion: 0 <-> 1, bot stays bot."""
        if self is Ternary.ZERO:
            return Ternary.ONE
        if self is Ternary.ONE:
            return Ternary.ZERO
        return Ternary.BOT

    def to_json(self) -> int | str:
        """Serialize as 0, 1, or "NA"."""
        return "NA" if self.is_bot else self.value

    @classmethod
    def from_json(cls, raw: object) -> "Ternary":
        if raw == 0:
            return cls.ZERO
        if raw == 1:
            return cls.ONE
        if raw == "NA":
            return cls.BOT
        raise ValueError(f"ternary value must be 0, 1 or 'NA', got {raw!r}")

    def __str__(self) -> str:
        return "⊥" if self.is_bot else str(self.value)


class Belief(Enum):
    """The know-it-or-not posterior family: point mass at 0 or 1, or the prior."""

    POINT_ZERO = "point_zero"
    POINT_ONE = "point_one"
    AT_PRIOR = "at_prior"

    def mean(self, prior: float) -> float:
        if self is Belief.POINT_ZERO:
            return 0.0
        if self is Belief.POINT_ONE:
            return 1.0
        return prior

    @property
    def truthful_report(self) -> Ternary:
        if self is Belief.POINT_ZERO:
            return Ternary.ZERO
        if self is Belief.POINT_ONE:
            return Ternary.ONE
        return Ternary.BOT


class Aggregation(Enum):
    """How a multi-dimensional rule combines its per-dimension scores."""

    SUM = "sum"
    MEAN = "mean"


def require_prior(p: float, label: str | None = None) -> float:
    """Validate that ``p`` is a finite probability in [0, 1]."""
    name = f"prior for {label}" if label else "prior"
    if not isinstance(p, (int, float)) or isinstance(p, bool) or not math.isfinite(p):
        raise ValueError(f"{name} must be a finite number, got {p!r}")
    if p < 0.0 or p > 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {p}")
    return float(p)


def clamp_prior(p: float, label: str | None = None) -> float:
    """Validate ``p`` and clamp it into [PRIOR_EPS, 1 - PRIOR_EPS]."""
    p = require_prior(p, label)
    return min(max(p, PRIOR_EPS), 1.0 - PRIOR_EPS)


@dataclass(frozen=True)
class SingleDimRule:
    """Six score cells S(report, state), each finite and in [0, 1].

    Cell naming is report-then-state: ``s10`` is the score for reporting 1
    when the realized state is 0; ``sb0``/``sb1`` are the bot-report scores.
    """

    s00: float
    s01: float
    s10: float
    s11: float
    sb0: float
    sb1: float

    def __post_init__(self) -> None:
        for key, value in zip(CELL_KEYS, self.cells()):
            if not math.isfinite(value):
                raise ValueError(f"cell {key} must be finite, got {value!r}")
            if value < -_CELL_SLACK or value > 1.0 + _CELL_SLACK:
                raise ValueError(f"cell {key} must lie in [0, 1], got {value}")

    def cells(self) -> tuple[float, float, float, float, float, float]:
        return (self.s00, self.s01, self.s10, self.s11, self.sb0, self.sb1)

    def score(self, report: Ternary, state: int) -> float:
        """Table lookup S(report, state) for a binary realized state."""
        if state not in (0, 1):
            raise ValueError(f"state must be 0 or 1, got {state!r}")
        pair = _REPORT_CELLS[report]
        return pair[1](self) if state else pair[0](self)

    def max_cell(self) -> float:
        return max(self.cells())

    def min_cell(self) -> float:
        return min(self.cells())

    def scaled(self, factor: float) -> "SingleDimRule":
        """Multiply every cell by ``factor`` (properness is scale-invariant)."""
        if factor < 0:
            raise ValueError("scale factor must be nonnegative")
        return SingleDimRule(*(factor * c for c in self.cells()))

    @classmethod
    def constant(cls, value: float) -> "SingleDimRule":
        return cls(value, value, value, value, value, value)

    @classmethod
    def from_cells(cls, cells: Sequence[float]) -> "SingleDimRule":
        if len(cells) != 6:
            raise ValueError(f"expected 6 cells, got {len(cells)}")
        return cls(*(float(c) for c in cells))

    def to_json_dict(self) -> dict[str, float]:
        return {key: value for key, value in zip(CELL_KEYS, self.cells())}

    @classmethod
    def from_json_dict(cls, raw: dict) -> "SingleDimRule":
        try:
            return cls(*(float(raw[key]) for key in CELL_KEYS))
        except KeyError as exc:
            raise ValueError(f"rule dict is missing cell {exc.args[0]!r}") from None


CELL_KEYS = ("s00", "s01", "s10", "s11", "sb0", "sb1")

_REPORT_CELLS = {
    Ternary.ZERO: (lambda r: r.s00, lambda r: r.s01),
    Ternary.ONE: (lambda r: r.s10, lambda r: r.s11),
    Ternary.BOT: (lambda r: r.sb0, lambda r: r.sb1),
}


def v_shaped(prior: float, label: str | None = None) -> SingleDimRule:
    """Construct the V-shaped rule for a prior (clamped to [0.01, 0.99]).

    For p <= 1/2 the three report lines are: agree runs from (1-2p)/(2(1-p))
    at state 0 up to 1 at state 1, disagree is its mirror through 1/2, and
    bot scores 1/2 regardless of the state.  For p > 1/2 the rule is the
    symmetric reflection, swapping both the report and the state.
    """
    p = clamp_prior(prior, label)
    if p <= 0.5:
        half_slope = 0.5 * p / (1.0 - p)
        return SingleDimRule(
            s00=0.5 + half_slope,
            s01=0.0,
            s10=0.5 - half_slope,
            s11=1.0,
            sb0=0.5,
            sb1=0.5,
        )
    mirror = v_shaped(1.0 - p)
    return SingleDimRule(
        s00=mirror.s11,
        s01=mirror.s10,
        s10=mirror.s01,
        s11=mirror.s00,
        sb0=mirror.sb1,
        sb1=mirror.sb0,
    )


def eval_single(rule: SingleDimRule, report: Ternary, state: int) -> float:
    """Score one dimension against a binary realized state."""
    return rule.score(report, state)


def expected_score(
    rule: SingleDimRule, prior: float, belief: Belief, report: Ternary
) -> float:
    """Expected score of ``report`` when the state follows ``belief``."""
    mu = belief.mean(require_prior(prior))
    return (1.0 - mu) * rule.score(report, 0) + mu * rule.score(report, 1)


def _properness_gaps(rule: SingleDimRule, prior: float) -> Iterator[float]:
    """Slack of each properness inequality; negative means violated."""
    p = require_prior(prior)
    yield rule.s00 - rule.s10
    yield rule.s00 - rule.sb0
    yield rule.s11 - rule.s01
    yield rule.s11 - rule.sb1
    bot_line = (1.0 - p) * rule.sb0 + p * rule.sb1
    yield bot_line - ((1.0 - p) * rule.s00 + p * rule.s01)
    yield bot_line - ((1.0 - p) * rule.s10 + p * rule.s11)


def properness_residual(rule: SingleDimRule, prior: float) -> float:
    """Largest violation of the six properness inequalities (0 if proper)."""
    return max(0.0, -min(_properness_gaps(rule, prior)))


_INEQUALITY_NAMES = (
    "s00 >= s10",
    "s00 >= sb0",
    "s11 >= s01",
    "s11 >= sb1",
    "bot line >= report-0 line at the prior",
    "bot line >= report-1 line at the prior",
)


def properness_failures(
    rule: SingleDimRule, prior: float, tol: float = PROPERNESS_TOL
) -> list[str]:
    """Names of the violated properness inequalities, with their slack."""
    return [
        f"{name} (violated by {-gap:.3e})"
        for name, gap in zip(_INEQUALITY_NAMES, _properness_gaps(rule, prior))
        if gap < -tol
    ]


def is_proper_single(
    rule: SingleDimRule, prior: float, tol: float = PROPERNESS_TOL
) -> bool:
    """Weak properness check: all six inequalities hold within ``tol``."""
    if tol < 0:
        raise ValueError(f"tolerance must be nonnegative, got {tol}")
    return all(gap >= -tol for gap in _properness_gaps(rule, prior))


def best_response(rule: SingleDimRule, prior: float, belief: Belief) -> Ternary:
    """Report maximizing the expected score.

    Ties go to the truthful report first, then to 0, 1, bot in that order,
    so the output is deterministic.
    """
    truthful = belief.truthful_report
    best = truthful
    best_score = expected_score(rule, prior, belief, truthful)
    for report in (Ternary.ZERO, Ternary.ONE, Ternary.BOT):
        if report is truthful:
            continue
        score = expected_score(rule, prior, belief, report)
        if score > best_score:
            best, best_score = report, score
    return best


@dataclass(frozen=True)
class RuleDimension:
    """One dimension of a separate rule: its cells, prior, and point id."""

    rule: SingleDimRule
    prior: float
    point_id: str

    def __post_init__(self) -> None:
        require_prior(self.prior, self.point_id)


@dataclass(frozen=True)
class SeparateRule:
    """Ordered per-dimension rules aggregated by summation or averaging.

    Sum mode carries the boundedness invariant of fitted rules: the largest
    possible total lies in [0, 1] (per-dimension maxima sum to at most 1 and
    minima to at least 0).  Mean mode is the equal-weight baseline and only
    needs each dimension's cells inside [0, 1], which SingleDimRule enforces.
    """

    dims: tuple[RuleDimension, ...]
    aggregation: Aggregation = Aggregation.SUM

    def __post_init__(self) -> None:
        if not self.dims:
            raise ValueError("a separate rule needs at least one dimension")
        if self.aggregation is Aggregation.SUM:
            top = sum(d.rule.max_cell() for d in self.dims)
            bottom = sum(d.rule.min_cell() for d in self.dims)
            if top > 1.0 + _CELL_SLACK:
                raise ValueError(f"sum-mode maxima add up to {top}, above 1")
            if bottom < -_CELL_SLACK:
                raise ValueError(f"sum-mode minima add up to {bottom}, below 0")

    def __len__(self) -> int:
        return len(self.dims)

    @property
    def priors(self) -> tuple[float, ...]:
        return tuple(d.prior for d in self.dims)

    def score(
        self, report: Sequence[Ternary], state: Sequence[Ternary]
    ) -> float:
        return score_separate(self, report, state)

    def to_json_dict(self) -> dict:
        return {
            "aggregation": self.aggregation.value,
            "dimensions": [
                {
                    **d.rule.to_json_dict(),
                    "prior": d.prior,
                    "summary_point": d.point_id,
                }
                for d in self.dims
            ],
        }

    @classmethod
    def from_json_dict(cls, raw: dict) -> "SeparateRule":
        dims = tuple(
            RuleDimension(
                rule=SingleDimRule.from_json_dict(entry),
                prior=float(entry["prior"]),
                point_id=str(entry["summary_point"]),
            )
            for entry in raw["dimensions"]
        )
        return cls(dims=dims, aggregation=Aggregation(raw["aggregation"]))


def _dim_score(
    rule: SingleDimRule, prior: float, report: Ternary, state: Ternary
) -> float:
    """Per-dimension score, taking the prior expectation on a bot state."""
    if state.is_bot:
        return (1.0 - prior) * rule.score(report, 0) + prior * rule.score(report, 1)
    return rule.score(report, state.value)


def _check_lengths(kind: str, expected: int, got: int) -> None:
    if expected != got:
        raise ValueError(f"{kind} length {got} does not match rule dimension {expected}")


def score_separate(
    rule: SeparateRule, report: Sequence[Ternary], state: Sequence[Ternary]
) -> float:
    """Aggregate score of a report vector against a state vector.

    Bot states are scored in expectation under the dimension's prior; the
    aggregation is a plain sum in SUM mode and the average in MEAN mode.
    """
    _check_lengths("report", len(rule.dims), len(report))
    _check_lengths("state", len(rule.dims), len(state))
    total = sum(
        _dim_score(d.rule, d.prior, r, th)
        for d, r, th in zip(rule.dims, report, state)
    )
    if rule.aggregation is Aggregation.MEAN:
        return total / len(rule.dims)
    return total


def score_max_over_separate(
    dims: Sequence[tuple[SingleDimRule, float]],
    report: Sequence[Ternary],
    state: Sequence[Ternary],
) -> tuple[float, int]:
    """Score only the report's favourite dimension.

    The favourite is the dimension whose report promises the highest
    expected score under the belief the report itself induces (0 and 1 are
    point beliefs, bot stands for the prior); ties break to the lowest
    index.  Returns (score, chosen index), scoring bot states in prior
    expectation like ``score_separate``.
    """
    if not dims:
        raise ValueError("max-over-separate needs at least one dimension")
    _check_lengths("report", len(dims), len(report))
    _check_lengths("state", len(dims), len(state))
    best_index = 0
    best_value = -math.inf
    for i, ((rule, prior), rep) in enumerate(zip(dims, report)):
        induced = {
            Ternary.ZERO: Belief.POINT_ZERO,
            Ternary.ONE: Belief.POINT_ONE,
            Ternary.BOT: Belief.AT_PRIOR,
        }[rep]
        value = expected_score(rule, prior, induced, rep)
        if value > best_value:
            best_index, best_value = i, value
    rule, prior = dims[best_index]
    return _dim_score(rule, prior, report[best_index], state[best_index]), best_index
