"""Agreement metrics between predicted and reference scores.

Correlations return None ("not applicable") instead of a number when an
input is constant, which is how the constant baseline shows up in reports.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "mse",
    "pearson",
    "spearman",
    "average_ranks",
    "ols_fit",
    "constant_baseline",
]


def _pair(x, y) -> tuple[np.ndarray, np.ndarray]:
    xv = np.asarray(x, dtype=float)
    yv = np.asarray(y, dtype=float)
    if xv.shape != yv.shape or xv.ndim != 1:
        raise ValueError(f"expected equal-length vectors, got {xv.shape} and {yv.shape}")
    if not (np.all(np.isfinite(xv)) and np.all(np.isfinite(yv))):
        raise ValueError("metric inputs must be finite")
    return xv, yv


def mse(pred, ref) -> float:
    """Mean squared error (on whatever scale the inputs share)."""
    p, r = _pair(pred, ref)
    if p.size == 0:
        raise ValueError("mse needs at least one element")
    return float(np.mean((p - r) ** 2))


def pearson(x, y) -> float | None:
    """Sample linear correlation; None when either vector is constant."""
    xv, yv = _pair(x, y)
    if xv.size < 2:
        raise ValueError("correlation needs at least two points")
    dx = xv - xv.mean()
    dy = yv - yv.mean()
    sx = float(dx @ dx)
    sy = float(dy @ dy)
    if sx == 0.0 or sy == 0.0:
        return None
    return float((dx @ dy) / np.sqrt(sx * sy))


def average_ranks(x) -> np.ndarray:
    """1-based ranks; ties share the mean of the ranks they span."""
    xv = np.asarray(x, dtype=float)
    order = np.argsort(xv, kind="stable")
    ranks = np.empty(xv.size, dtype=float)
    i = 0
    while i < xv.size:
        j = i
        while j + 1 < xv.size and xv[order[j + 1]] == xv[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(x, y) -> float | None:
    """Rank correlation: pearson over average ranks."""
    xv, yv = _pair(x, y)
    if xv.size < 2:
        raise ValueError("correlation needs at least two points")
    return pearson(average_ranks(xv), average_ranks(yv))


def ols_fit(x, y) -> dict[str, float]:
    """Least-squares line predicting y from x: {"slope", "intercept"}."""
    xv, yv = _pair(x, y)
    if xv.size < 2:
        raise ValueError("regression needs at least two points")
    dx = xv - xv.mean()
    var = float(dx @ dx)
    if var == 0.0:
        raise ValueError("regression predictor is constant")
    slope = float(dx @ (yv - yv.mean())) / var
    return {"slope": slope, "intercept": float(yv.mean() - slope * xv.mean())}


def constant_baseline(train_refs) -> float:
    """The squared-loss-optimal constant: the training mean."""
    refs = np.asarray(train_refs, dtype=float)
    if refs.size == 0:
        raise ValueError("constant baseline needs at least one reference score")
    return float(refs.mean())
