"""Correlation coefficients, estimator evaluation, and subsample significance tests."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import stats as sps

from .metrics import EvaluationError, QualityScore


def _t_pvalue(r: float, n: int) -> float:
    """Two-tailed p for H0: r = 0 using t = r sqrt((n-2)/(1-r^2)) on n-2 dof."""
    if abs(r) >= 1.0:
        return 0.0
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    return float(min(1.0, 2.0 * sps.t.sf(abs(t), n - 2)))


def _check(xs: Sequence[float], ys: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise EvaluationError("correlation inputs must be equal-length vectors")
    if len(x) < 3:
        raise EvaluationError("correlation needs at least 3 observations")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise EvaluationError("correlation undefined for constant input")
    return x, y


def _product_moment(x: np.ndarray, y: np.ndarray) -> float:
    dx = x - x.mean()
    dy = y - y.mean()
    r = float(np.dot(dx, dy) / math.sqrt(float(np.dot(dx, dx)) * float(np.dot(dy, dy))))
    return max(-1.0, min(1.0, r))


def pearson(xs: Sequence[float], ys: Sequence[float]) -> tuple[float, float]:
    x, y = _check(xs, ys)
    r = _product_moment(x, y)
    return r, _t_pvalue(r, len(x))


def spearman(xs: Sequence[float], ys: Sequence[float]) -> tuple[float, float]:
    """Pearson on average ranks (ties share their mean rank)."""
    x, y = _check(xs, ys)
    rho = _product_moment(sps.rankdata(x), sps.rankdata(y))
    return rho, _t_pvalue(rho, len(x))


CORRELATIONS = {"spearman": spearman, "pearson": pearson}


@dataclass(frozen=True)
class CorrelationResult:
    estimator_name: str
    ranker_name: str
    coefficient_type: str
    value: float
    p_value: float
    n: int


def _quality_values(q: Mapping[str, float | QualityScore]) -> dict[str, float]:
    return {k: (v.mean_ap if isinstance(v, QualityScore) else float(v)) for k, v in q.items()}


def aligned(estimates: Mapping[str, float], quality: Mapping[str, float | QualityScore]) -> tuple[list[str], list[float], list[float]]:
    qv = _quality_values(quality)
    missing = sorted(set(estimates) ^ set(qv))
    if missing:
        raise EvaluationError(f"estimates and qualities cover different reviews: {', '.join(missing)}")
    ids = sorted(qv)
    return ids, [float(estimates[i]) for i in ids], [qv[i] for i in ids]


def evaluate_estimator(
    estimator_name: str,
    estimates: Mapping[str, float],
    qualities: Mapping[str, Mapping[str, float | QualityScore]],
) -> list[CorrelationResult]:
    """Spearman and Pearson of one estimator against each ranker's per-review quality."""
    out = []
    for ranker_name, quality in qualities.items():
        _, x, y = aligned(estimates, quality)
        for kind, fn in CORRELATIONS.items():
            value, p = fn(x, y)
            out.append(CorrelationResult(estimator_name, ranker_name, kind, value, p, len(x)))
    return out


def subsample_groups(sr_ids: Iterable[str], n_groups: int = 30, group_size: int = 30, rng_seed: int = 0) -> list[tuple[str, ...]]:
    ids = sorted(sr_ids)
    if group_size > len(ids):
        raise EvaluationError(f"group size {group_size} exceeds the {len(ids)} available reviews")
    rng = np.random.default_rng(rng_seed)
    return [tuple(ids[i] for i in np.sort(rng.choice(len(ids), size=group_size, replace=False))) for _ in range(n_groups)]


def group_coefficients(
    estimates: Mapping[str, float],
    quality: Mapping[str, float | QualityScore],
    groups: Sequence[Sequence[str]],
    kind: str = "spearman",
) -> list[float]:
    """Coefficient per subsample group; NaN where the coefficient is undefined (constant input)."""
    qv = _quality_values(quality)
    fn = CORRELATIONS[kind]
    out = []
    for group in groups:
        try:
            out.append(fn([estimates[i] for i in group], [qv[i] for i in group])[0])
        except EvaluationError:
            out.append(math.nan)
    return out


def significance_test(coeffs_a: Sequence[float], coeffs_b: Sequence[float]) -> float:
    """Paired two-tailed t-test p-value on per-group coefficient differences.

    Groups where either coefficient is NaN are dropped.
    """
    if len(coeffs_a) != len(coeffs_b):
        raise EvaluationError(f"group count mismatch: {len(coeffs_a)} vs {len(coeffs_b)}")
    a = np.asarray(coeffs_a, dtype=np.float64)
    b = np.asarray(coeffs_b, dtype=np.float64)
    keep = ~(np.isnan(a) | np.isnan(b))
    d = a[keep] - b[keep]
    n = len(d)
    if n < 2:
        raise EvaluationError("need at least 2 paired groups")
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    if sd == 0.0:
        return 1.0 if mean == 0.0 else 0.0
    t = mean / (sd / math.sqrt(n))
    return float(min(1.0, 2.0 * sps.t.sf(abs(t), n - 1)))
