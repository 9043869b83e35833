"""Cross-ranker comparison of per-review ranking quality."""

from __future__ import annotations

import itertools
import math
from typing import Mapping

import numpy as np

from .correlation import _quality_values, spearman
from .metrics import EvaluationError, QualityScore


def _extremes(values: Mapping[str, float], k: int) -> tuple[list[str], list[str]]:
    # ties resolved by review id so the lists are reproducible
    ordered = sorted(values, key=lambda s: (values[s], s))
    return list(reversed(ordered[-k:])), ordered[:k]


def compare_models(qualities: Mapping[str, Mapping[str, float | QualityScore]], k: int = 5) -> dict:
    """Summarise how much ranking quality moves between rankers.

    Returns a JSON-ready dict with the mean and stdev (over reviews) of the
    per-review mean absolute quality difference across ranker pairs, the
    max-min quality gap per ranker, the Spearman correlation of review
    orderings per ranker pair, and the top/bottom ``k`` reviews per ranker
    with a flag for reviews that are also extreme under another ranker.
    """
    q = {name: _quality_values(v) for name, v in qualities.items()}
    names = list(q)
    if len(names) < 2:
        raise EvaluationError("need at least two rankers to compare")
    ids = sorted(q[names[0]])
    for name in names[1:]:
        if sorted(q[name]) != ids:
            diff = sorted(set(q[name]) ^ set(ids))
            raise EvaluationError(f"ranker {name} covers different reviews: {', '.join(diff)}")
    pairs = list(itertools.combinations(names, 2))

    per_sr = {
        s: float(np.mean([abs(q[a][s] - q[b][s]) for a, b in pairs])) for s in ids
    }
    diffs = np.array([per_sr[s] for s in ids])

    cross = {}
    for a, b in pairs:
        x = [q[a][s] for s in ids]
        y = [q[b][s] for s in ids]
        if x == y:
            rho, p = 1.0, 0.0
        else:
            rho, p = spearman(x, y)
        cross[f"{a}|{b}"] = {"rho": rho, "p": p}

    extremes = {name: _extremes(q[name], k) for name in names}
    fig = {}
    for name in names:
        top, bottom = extremes[name]
        others = [o for o in names if o != name]
        fig[name] = {
            "top": [{"sr_id": s, "quality": q[name][s], "shared": any(s in extremes[o][0] for o in others)} for s in top],
            "bottom": [{"sr_id": s, "quality": q[name][s], "shared": any(s in extremes[o][1] for o in others)} for s in bottom],
        }

    return {
        "n_reviews": len(ids),
        "rankers": names,
        "mean_quality": {n: math.fsum(q[n].values()) / len(ids) for n in names},
        "mean_abs_difference": float(diffs.mean()),
        "std_abs_difference": float(diffs.std()),
        "per_review_abs_difference": per_sr,
        "max_min_gap": {n: max(q[n].values()) - min(q[n].values()) for n in names},
        "cross_model_spearman": cross,
        "extremes": fig,
    }
