"""Average precision and per-review ranking quality."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import AbstractSet, Iterable, Sequence

from ..ingest import SystematicReview
from ..rankers import Ranker, Ranking


class EvaluationError(ValueError):
    pass


def average_precision(ranking: Ranking | Sequence[str], relevant: AbstractSet[str] | Iterable[str]) -> float:
    """Mean of precision@k over the ranks k holding a relevant document."""
    ids = ranking.doc_ids if isinstance(ranking, Ranking) else list(ranking)
    relevant = set(relevant)
    hits = 0
    total = 0.0
    for k, doc_id in enumerate(ids, start=1):
        if doc_id in relevant:
            hits += 1
            total += hits / k
    if hits == 0:
        raise EvaluationError("no relevant document in the ranking")
    return total / hits


@dataclass
class QualityScore:
    sr_id: str
    ranker_name: str
    per_seed_ap: dict[str, float] = field(default_factory=dict)

    @property
    def mean_ap(self) -> float:
        return math.fsum(self.per_seed_ap.values()) / len(self.per_seed_ap)


def sr_quality(sr: SystematicReview, ranker: Ranker, ranker_name: str = "") -> QualityScore:
    """Rank with every relevant document as the seed and average the APs.

    The seed is left out of its own ranking and of the relevant set scored
    against it.
    """
    relevant = sr.relevant_ids
    if len(relevant) < 2:
        raise EvaluationError(f"{sr.sr_id}: needs at least 2 relevant documents, has {len(relevant)}")
    score = QualityScore(sr.sr_id, ranker_name)
    for seed_id in sorted(relevant):
        ranking = ranker(sr.candidates[seed_id], sr.candidates)
        score.per_seed_ap[seed_id] = average_precision(ranking, relevant - {seed_id})
    return score
