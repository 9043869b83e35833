"""Seed-driven rankers: BM25, average embedding similarity, and query likelihood."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import partial
from pathlib import Path
from typing import Callable, Iterable, Mapping

import numpy as np

from .corpus import CandidateCollection, CollectionStats, Document
from .ingest import EmbeddingTable


class RankingError(ValueError):
    pass


@dataclass(frozen=True)
class Ranking:
    sr_id: str
    seed_id: str
    entries: tuple[tuple[str, float], ...]

    @property
    def doc_ids(self) -> list[str]:
        return [d for d, _ in self.entries]

    def __len__(self) -> int:
        return len(self.entries)


def _make_ranking(seed: Document, coll: CandidateCollection, scores: np.ndarray) -> Ranking:
    # collection ids are ascending, so a stable sort on -score gives the id tie-break
    order = np.argsort(-scores, kind="stable")
    entries = tuple((coll.ids[i], float(scores[i])) for i in order if coll.ids[i] != seed.id)
    if not entries:
        raise RankingError(f"nothing to rank in {coll.sr_id!r} besides the seed")
    return Ranking(coll.sr_id, seed.id, entries)


def _query_terms(seed: Document, coll: CandidateCollection) -> list[str]:
    return sorted(t for t in seed.tf if t in coll.stats.df)


def bm25_rank(seed: Document, coll: CandidateCollection, k1: float = 1.2, b: float = 0.75) -> Ranking:
    if len(coll) == 0:
        raise RankingError("empty collection")
    n = coll.stats.n_docs
    lengths = coll.lengths
    norm = k1 * (1.0 - b + b * lengths / lengths.mean())
    scores = np.zeros(len(coll))
    for term in _query_terms(seed, coll):
        df = coll.stats.df[term]
        idf = math.log(1.0 + (n - df + 0.5) / (df + 0.5))
        post = coll.postings[term]
        tf = post.tf
        # the whole seed token multiset is the query; repeated terms count per occurrence
        scores[post.doc_idx] += seed.tf[term] * idf * tf * (k1 + 1.0) / (tf + norm[post.doc_idx])
    return _make_ranking(seed, coll, scores)


@dataclass(frozen=True)
class DocVector:
    doc_id: str
    vector: np.ndarray
    empty: bool = False


def doc_embedding(doc: Document, table: EmbeddingTable) -> DocVector:
    """tf-weighted mean of the embeddings of in-vocabulary tokens."""
    total = np.zeros(table.dim, dtype=np.float64)
    count = 0
    for term, tf in sorted(doc.tf.items()):
        idx = table.index.get(term)
        if idx is not None:
            total += tf * table.matrix[idx].astype(np.float64)
            count += tf
    if count == 0:
        return DocVector(doc.id, total, empty=True)
    return DocVector(doc.id, total / count)


def embedding_matrix(coll: CandidateCollection, table: EmbeddingTable) -> tuple[np.ndarray, np.ndarray]:
    """Document vectors in collection order plus a mask of docs with no embeddable token."""

    def build():
        vecs = [doc_embedding(d, table) for d in coll]
        return np.vstack([v.vector for v in vecs]), np.array([v.empty for v in vecs])

    return coll.cached(("embedding", id(table)), build)


def aes_rank(seed: Document, coll: CandidateCollection, table: EmbeddingTable) -> Ranking:
    query = doc_embedding(seed, table)
    if query.empty:
        raise RankingError(f"seed {seed.id} has no token in the embedding table")
    mat, empty = embedding_matrix(coll, table)
    norms = np.linalg.norm(mat, axis=1)
    q = query.vector / np.linalg.norm(query.vector)
    with np.errstate(invalid="ignore", divide="ignore"):
        scores = (mat @ q) / norms
    scores[empty] = -1.0
    scores = np.clip(scores, -1.0, 1.0)
    return _make_ranking(seed, coll, scores)


TermWeightHook = Callable[[str, Document, CollectionStats], float]


def idf_weight(term: str, seed: Document, stats: CollectionStats) -> float:
    """Default query term weight: tf in the seed times ln(N/df)."""
    return seed.tf[term] * math.log(stats.n_docs / stats.df[term])


def uniform_weight(term: str, seed: Document, stats: CollectionStats) -> float:
    return 1.0


def ql_rank(
    seed: Document,
    coll: CandidateCollection,
    weights: TermWeightHook = idf_weight,
    mu: float = 1000.0,
) -> Ranking:
    """Weighted query likelihood with Dirichlet smoothing.

    ``mu = inf`` collapses every document model onto the collection model,
    so all scores tie.
    """
    stats = coll.stats
    lengths = coll.lengths
    scores = np.zeros(len(coll))
    for term in _query_terms(seed, coll):
        w = weights(term, seed, stats)
        p_coll = stats.cf[term] / stats.total_tokens
        if math.isinf(mu):
            scores += w * math.log(p_coll)
            continue
        post = coll.postings[term]
        prior = mu * p_coll
        scores += w * np.log(prior / (lengths + mu))
        scores[post.doc_idx] += w * (np.log(post.tf + prior) - math.log(prior))
    return _make_ranking(seed, coll, scores)


Ranker = Callable[[Document, CandidateCollection], Ranking]

RANKER_NAMES = ("BM25", "SDR", "AES")


def make_ranker(name: str, table: EmbeddingTable | None = None, *, k1: float = 1.2, b: float = 0.75,
                mu: float = 1000.0, weights: TermWeightHook = idf_weight) -> Ranker:
    """Bind parameters; ``SDR`` is the query-likelihood ranker with a term weight hook."""
    if name == "BM25":
        return partial(bm25_rank, k1=k1, b=b)
    if name == "SDR":
        return partial(ql_rank, weights=weights, mu=mu)
    if name == "AES":
        if table is None:
            raise RankingError("AES needs an embedding table")
        return partial(aes_rank, table=table)
    raise RankingError(f"unknown ranker {name!r}")


def write_trec_run(path: str | Path, rankings: Iterable[Ranking], run_tag: str) -> None:
    """One ``sr_id Q0 doc_id rank score run_tag`` line per entry."""
    with open(path, "w", encoding="utf-8") as fh:
        for ranking in rankings:
            for rank, (doc_id, score) in enumerate(ranking.entries, start=1):
                fh.write(f"{ranking.sr_id} Q0 {doc_id} {rank} {score:.10g} {run_tag}\n")


def read_trec_run(path: str | Path) -> dict[str, list[tuple[str, float]]]:
    runs: dict[str, list[tuple[str, float]]] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if len(parts) == 6:
                runs.setdefault(parts[0], []).append((parts[2], float(parts[4])))
    return runs


def score_map(ranking: Ranking) -> Mapping[str, float]:
    return dict(ranking.entries)
