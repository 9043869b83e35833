"""Ranking-quality estimators: topic broadness and the pre-retrieval / collection baselines.

Every estimator maps one review (seed documents plus candidate collection)
to a single real number. Topic broadness is negative; its negation is the
quality estimate.
"""

from __future__ import annotations

import csv
import io
import itertools
import logging
import math
import zlib
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from sklearn.cluster import KMeans
from sklearn.metrics import silhouette_score

from .corpus import CandidateCollection, Document, LanguageModel, build_lm, overlap_sim
from .ingest import EmbeddingTable
from .rankers import embedding_matrix

log = logging.getLogger(__name__)

QPP_MEASURES = ("QLen", "avgIDF", "sumIDF", "maxIDF", "stdevIDF", "SCS", "avgICTF", "SCQ", "nSCQ", "maxSCQ")
COLLECTION_MEASURES = ("collSize", "numClusters", "collClarity", "avgDocSim", "sumDocSim", "maxDocSim", "stdevDocSim")
ALL_ESTIMATORS = ("TB",) + QPP_MEASURES + COLLECTION_MEASURES
ABLATIONS = ("drop_sc", "drop_ss")

PAIR_CAP = 30


class EstimatorError(ValueError):
    pass


# ---------------------------------------------------------------- topic broadness


def candidate_mass(seed: Document, coll: CandidateCollection, exclude: Iterable[str] = ()) -> int:
    """Sum of overlap_sim(seed, c) over candidates c, skipping ``exclude``.

    Uses sum_c sum_{w in seed and c} (tf(w,s) + tf(w,c)) = sum_w tf(w,s) df(w) + cf(w),
    then subtracts the excluded documents.
    """
    df, cf = coll.stats.df, coll.stats.cf
    total = sum(tf * df[w] + cf[w] for w, tf in seed.tf.items() if w in df)
    for doc_id in set(exclude):
        if doc_id in coll:
            total -= overlap_sim(seed, coll[doc_id])
    return total


def _check_pair(s1: Document, s2: Document) -> None:
    if s1.id == s2.id:
        raise EstimatorError("seed documents must differ")


def tb_parts(s1: Document, s2: Document, coll: CandidateCollection) -> tuple[int, int]:
    """(seed-seed similarity, seed-candidate mass) with both seeds left out of the candidates."""
    _check_pair(s1, s2)
    seeds = (s1.id, s2.id)
    denom = candidate_mass(s1, coll, seeds) + candidate_mass(s2, coll, seeds)
    return overlap_sim(s1, s2), denom


def topic_broadness(s1: Document, s2: Document, coll: CandidateCollection) -> float:
    sim, denom = tb_parts(s1, s2, coll)
    if denom <= 0:
        raise EstimatorError(f"seeds {s1.id}, {s2.id} share no term with any candidate in {coll.sr_id!r}")
    return -2.0 * sim / denom


def tb_ablation(variant: str, s1: Document, s2: Document, coll: CandidateCollection) -> float:
    """Score with one component of topic broadness held constant.

    ``drop_ss`` replaces the seed-seed term 2*sim(s1,s2) by 2, giving -2/denominator.
    ``drop_sc`` replaces the candidate sum by 2, giving -sim(s1,s2)/2.
    Both are negative or zero like the full score.
    """
    sim, denom = tb_parts(s1, s2, coll)
    if variant == "drop_ss":
        if denom <= 0:
            raise EstimatorError(f"seeds {s1.id}, {s2.id} share no term with any candidate in {coll.sr_id!r}")
        return -2.0 / denom
    if variant == "drop_sc":
        return -sim / 2.0
    raise EstimatorError(f"unknown ablation {variant!r}")


@dataclass
class EstimateRecord:
    sr_id: str
    estimator_name: str
    per_pair_values: list[float]
    rng_seed: int
    groups: list[tuple[str, ...]] = field(default_factory=list, repr=False)

    @property
    def n_pairs(self) -> int:
        return len(self.per_pair_values)

    @property
    def mean(self) -> float:
        return math.fsum(self.per_pair_values) / len(self.per_pair_values)

    @property
    def variance(self) -> float:
        m = self.mean
        return math.fsum((v - m) ** 2 for v in self.per_pair_values) / len(self.per_pair_values)


def derive_seed(master_seed: int, sr_id: str) -> int:
    """Per-review RNG seed, independent of processing order."""
    ss = np.random.SeedSequence([master_seed, zlib.crc32(sr_id.encode("utf-8"))])
    return int(ss.generate_state(1)[0])


def sample_groups(seeds: Sequence[Document], size: int, cap: int, rng_seed: int) -> list[tuple[Document, ...]]:
    """All ``size``-subsets of the seeds in id order, or ``cap`` of them drawn without replacement."""
    ordered = sorted(seeds, key=lambda d: d.id)
    if len({d.id for d in ordered}) != len(ordered):
        raise EstimatorError("duplicate seed documents")
    if len(ordered) < size:
        raise EstimatorError(f"need at least {size} seed documents, got {len(ordered)}")
    combos = list(itertools.combinations(ordered, size))
    if len(combos) > cap:
        rng = np.random.default_rng(rng_seed)
        picked = np.sort(rng.choice(len(combos), size=cap, replace=False))
        combos = [combos[i] for i in picked]
    return combos


GroupScore = Callable[[tuple[Document, ...], CandidateCollection], float]


def _pair_tb(group: tuple[Document, ...], coll: CandidateCollection) -> float:
    return topic_broadness(group[0], group[1], coll)


def _triple_min_tb(group: tuple[Document, ...], coll: CandidateCollection) -> float:
    # broadest pair is the most negative value
    return min(topic_broadness(a, b, coll) for a, b in itertools.combinations(group, 2))


def estimate_over_groups(
    name: str, score: GroupScore, seeds: Sequence[Document], coll: CandidateCollection,
    size: int, cap: int, rng_seed: int,
) -> EstimateRecord:
    groups = sample_groups(seeds, size, cap, rng_seed)
    values = [score(g, coll) for g in groups]
    return EstimateRecord(coll.sr_id, name, values, rng_seed, [tuple(d.id for d in g) for g in groups])


def tb_pairs_mean(seeds: Sequence[Document], coll: CandidateCollection, cap: int = PAIR_CAP, rng_seed: int = 0) -> EstimateRecord:
    return estimate_over_groups("TB", _pair_tb, seeds, coll, 2, cap, rng_seed)


def tb_triples_min(seeds: Sequence[Document], coll: CandidateCollection, cap: int = PAIR_CAP, rng_seed: int = 0) -> EstimateRecord:
    return estimate_over_groups("TB", _triple_min_tb, seeds, coll, 3, cap, rng_seed)


# ---------------------------------------------------------------- pre-retrieval QPP


def _idf(w: str, coll: CandidateCollection) -> float:
    return math.log(coll.stats.n_docs / coll.stats.df[w])


def _scq(w: str, coll: CandidateCollection) -> float:
    st = coll.stats
    return (1.0 + math.log(st.cf[w])) * math.log(1.0 + st.n_docs / st.df[w])


def _mean(values: Sequence[float]) -> float:
    # rounding must not push a mean of equal values past their max
    return min(max(math.fsum(values) / len(values), min(values)), max(values))


def qpp_measure(name: str, query: Document, coll: CandidateCollection, coll_lm: LanguageModel | None = None) -> float:
    """One pre-retrieval predictor for a single seed used as the query."""
    if query.length == 0:
        raise EstimatorError(f"query {query.id} is empty")
    if name == "QLen":
        return float(query.length)
    st = coll.stats
    terms = sorted(w for w in query.tf if w in st.df)
    if not terms:
        raise EstimatorError(f"query {query.id} shares no term with collection {coll.sr_id!r}")
    if name in ("avgIDF", "sumIDF", "maxIDF", "stdevIDF"):
        idfs = np.array([_idf(w, coll) for w in terms])
        if name == "avgIDF":
            return _mean(idfs.tolist())
        if name == "sumIDF":
            return float(idfs.sum())
        if name == "maxIDF":
            return float(idfs.max())
        return float(idfs.std())
    if name == "SCS":
        lm = coll_lm or build_lm(st)
        total = 0.0
        for w in terms:
            p_q = query.tf[w] / query.length
            total += p_q * math.log2(p_q / lm.prob(w))
        return total
    if name == "avgICTF":
        return math.fsum(math.log2(st.total_tokens / st.cf[w]) for w in terms) / len(terms)
    if name in ("SCQ", "nSCQ", "maxSCQ"):
        scq = [_scq(w, coll) for w in terms]
        if name == "SCQ":
            return math.fsum(scq)
        if name == "nSCQ":
            return _mean(scq)
        return max(scq)
    raise EstimatorError(f"unknown QPP measure {name!r}")


def qpp_group_average(name: str, group: Sequence[Document], coll: CandidateCollection, coll_lm: LanguageModel | None = None) -> float:
    """Each seed is a query; the group's estimate is the mean over its seeds."""
    return math.fsum(qpp_measure(name, d, coll, coll_lm) for d in group) / len(group)


# ---------------------------------------------------------------- collection baselines


def coll_clarity(coll: CandidateCollection | LanguageModel, background: LanguageModel) -> float:
    """KL divergence (bits) of the collection unigram model from the background model."""
    coll_lm = coll if isinstance(coll, LanguageModel) else build_lm(coll.stats)
    bg = background.with_support(coll_lm.probs)
    return math.fsum(p * math.log2(p / bg.prob(w)) for w, p in coll_lm.probs.items())


def _embeddable(coll: CandidateCollection, table: EmbeddingTable) -> np.ndarray:
    mat, empty = embedding_matrix(coll, table)
    if empty.any():
        log.info("%s: %d documents have no embeddable token and are skipped", coll.sr_id, int(empty.sum()))
    return mat[~empty]


def num_clusters(
    coll: CandidateCollection | np.ndarray,
    table: EmbeddingTable | None = None,
    k_range: tuple[int, int] = (2, 100),
    rng_seed: int = 0,
    n_init: int = 3,
    silhouette_sample: int | None = 10_000,
) -> int:
    """k with the best mean silhouette among k-means fits for k in ``k_range``."""
    X = coll if isinstance(coll, np.ndarray) else _embeddable(coll, table)
    n = X.shape[0]
    if n < 3:
        raise EstimatorError("need at least 3 embeddable documents to choose a cluster count")
    lo, hi = k_range
    # k beyond the number of distinct vectors only splits identical points
    hi = min(hi, n - 1, len(np.unique(X, axis=0)))
    if lo > hi:
        raise EstimatorError(f"empty k range {k_range} for {n} documents")
    sample = silhouette_sample if silhouette_sample and n > silhouette_sample else None
    best_k, best_score = lo, -math.inf
    for k in range(lo, hi + 1):
        km = KMeans(n_clusters=k, n_init=n_init, random_state=rng_seed).fit(X)
        if len(set(km.labels_)) < 2:
            continue
        score = silhouette_score(X, km.labels_, sample_size=sample, random_state=rng_seed)
        if score > best_score:
            best_k, best_score = k, score
    return best_k


DOCSIM_EXACT_LIMIT = 2000
DOCSIM_SAMPLE_PAIRS = 1_000_000


def docsim_family(
    coll: CandidateCollection | np.ndarray,
    table: EmbeddingTable | None = None,
    exact_limit: int | None = DOCSIM_EXACT_LIMIT,
    n_samples: int = DOCSIM_SAMPLE_PAIRS,
    rng_seed: int = 0,
) -> dict[str, float]:
    """avg/sum/max/stdev of pairwise cosine between document embeddings.

    Above ``exact_limit`` documents a uniform sample of pairs is used and
    ``sumDocSim`` is the sample mean scaled to the full pair count.
    ``exact_limit=None`` always enumerates every pair.
    """
    X = coll if isinstance(coll, np.ndarray) else _embeddable(coll, table)
    n = X.shape[0]
    if n < 2:
        raise EstimatorError("need at least 2 documents for pairwise similarity")
    U = X / np.linalg.norm(X, axis=1, keepdims=True)
    n_pairs = n * (n - 1) // 2
    if exact_limit is None or n <= exact_limit:
        i, j = np.triu_indices(n, k=1)
        sims = np.einsum("ij,ij->i", U[i], U[j]) if n_pairs < 50_000 else (U @ U.T)[i, j]
    else:
        log.info("%d documents: sampling %d document pairs", n, n_samples)
        rng = np.random.default_rng(rng_seed)
        i = rng.integers(0, n, size=n_samples)
        j = rng.integers(0, n - 1, size=n_samples)
        j = j + (j >= i)
        sims = np.einsum("ij,ij->i", U[i], U[j])
    sims = np.clip(sims, -1.0, 1.0)
    avg = float(sims.mean())
    return {
        "avgDocSim": avg,
        "sumDocSim": avg * n_pairs,
        "maxDocSim": float(sims.max()),
        "stdevDocSim": float(sims.std()),
    }


def coll_size(coll: CandidateCollection) -> int:
    return len(coll)


# ---------------------------------------------------------------- CSV


ESTIMATE_FIELDS = ("sr_id", "estimator", "mean", "variance", "n_pairs", "rng_seed")


def estimates_to_csv(records: Iterable[EstimateRecord], header_comment: str | None = None) -> str:
    buf = io.StringIO()
    if header_comment:
        buf.write(f"# {header_comment}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ESTIMATE_FIELDS)
    for r in records:
        w.writerow([r.sr_id, r.estimator_name, repr(r.mean), repr(r.variance), r.n_pairs, r.rng_seed])
    return buf.getvalue()
