"""Synthetic reviews with controllable topic broadness.

Each review has a topic made of a core term distribution and several
disjoint sub-topic distributions. A relevant document draws its topical
tokens from ``overlap * core + (1 - overlap) * subtopic_k``: with overlap 1
every relevant document shares one model (narrow topic), with overlap 0
each sub-topic group has its own vocabulary (broad topic). Non-relevant
documents are background text with a review-specific share of topical
"distractor" tokens.

Per-review nuisance parameters (collection size, document length,
distractor share, relevant count, which ids are relevant) come from a
stream that ignores ``overlap``, so two configs differing only in overlap
produce paired reviews.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..corpus import CandidateCollection, Document
from ..ingest import EmbeddingTable, SystematicReview
from .metrics import EvaluationError


@dataclass(frozen=True)
class SynthConfig:
    n_srs: int = 20
    docs_per_sr: int = 64
    vocab_size: int = 2000
    overlap: float = 0.5
    seed: int = 0
    id_prefix: str = "SYN"
    # (lo, hi) inclusive; None keeps every collection at docs_per_sr
    size_range: tuple[int, int] | None = None
    n_relevant: tuple[int, int] = (4, 8)
    doc_length: tuple[int, int] = (80, 120)
    distractor: tuple[float, float] = (0.1, 0.6)
    topic_share: float = 0.25
    n_subtopics: int = 4
    topic_terms: int = 30
    zipf_exponent: float = 1.05

    def validate(self) -> None:
        if not 0.0 <= self.overlap <= 1.0:
            raise EvaluationError("overlap must lie in [0, 1]")
        needed = self.topic_terms * (self.n_subtopics + 1)
        if self.vocab_size < 2 * needed:
            raise EvaluationError(f"vocabulary of {self.vocab_size} terms is too small for {needed} topical terms")
        if self.n_srs < 1 or self.docs_per_sr < 2:
            raise EvaluationError("need at least one review with two documents")
        lo, hi = self.size_range or (self.docs_per_sr, self.docs_per_sr)
        if lo < self.n_relevant[1] + 1 or hi < lo:
            raise EvaluationError("collection size must exceed the relevant-document count")


NARROW_OVERLAP = 0.6
BROAD_OVERLAP = 0.3


def broadness_families(n_per_family: int, seed: int, size_range: tuple[int, int] | None = (60, 2000),
                       **overrides) -> tuple[list[SystematicReview], list[SystematicReview]]:
    """Paired narrow and broad families sharing every nuisance draw."""
    base = dict(n_srs=n_per_family, seed=seed, size_range=size_range, **overrides)
    narrow = synth_generate(SynthConfig(overlap=NARROW_OVERLAP, id_prefix="N", **base))
    broad = synth_generate(SynthConfig(overlap=BROAD_OVERLAP, id_prefix="B", **base))
    return narrow, broad


def vocabulary(config: SynthConfig) -> list[str]:
    width = len(str(config.vocab_size - 1))
    return [f"w{i:0{width}d}" for i in range(config.vocab_size)]


def background_distribution(config: SynthConfig) -> np.ndarray:
    ranks = np.arange(1, config.vocab_size + 1, dtype=np.float64)
    p = ranks ** -config.zipf_exponent
    return p / p.sum()


class _Sampler:
    """Inverse-CDF sampler over a fixed set of term ids."""

    def __init__(self, terms: np.ndarray, probs: np.ndarray):
        self.terms = np.asarray(terms)
        self.cdf = np.cumsum(probs)
        self.cdf /= self.cdf[-1]

    def __call__(self, rng: np.random.Generator, n: int) -> np.ndarray:
        idx = np.searchsorted(self.cdf, rng.random(n), side="right")
        return self.terms[np.minimum(idx, len(self.terms) - 1)]


def _peaked(rng: np.random.Generator, terms: np.ndarray) -> _Sampler:
    return _Sampler(terms, rng.dirichlet(np.full(len(terms), 0.8)))


@dataclass
class TopicBlueprint:
    """Review-level draws that do not depend on ``overlap``."""

    sr_id: str
    n_docs: int
    n_relevant: int
    mean_length: float
    distractor: float
    core: _Sampler
    subtopics: list[_Sampler]
    relevant_slots: np.ndarray

    def sample_relevant(self, rng, background: _Sampler, overlap: float, subtopic: int,
                        topic_share: float, length: int) -> np.ndarray:
        n_topic = rng.binomial(length, topic_share)
        n_core = rng.binomial(n_topic, overlap)
        return np.concatenate([
            self.core(rng, n_core),
            self.subtopics[subtopic](rng, n_topic - n_core),
            background(rng, length - n_topic),
        ])

    def sample_nonrelevant(self, rng, background: _Sampler, length: int) -> np.ndarray:
        n_topic = rng.binomial(length, self.distractor)
        # distractor tokens come evenly from the core and every sub-topic
        pools = [self.core] + self.subtopics
        counts = rng.multinomial(n_topic, np.full(len(pools), 1.0 / len(pools)))
        parts = [pool(rng, int(c)) for pool, c in zip(pools, counts)]
        return np.concatenate(parts + [background(rng, length - n_topic)])


def topic_blueprint(config: SynthConfig, index: int) -> TopicBlueprint:
    rng = np.random.default_rng([config.seed, index, 0])
    if config.size_range is None:
        n_docs = config.docs_per_sr
    else:
        lo, hi = config.size_range
        # log-uniform: candidate counts of real reviews are heavily skewed
        n_docs = int(min(hi, round(math.exp(rng.uniform(math.log(lo), math.log(hi + 1))))))
    n_rel = int(rng.integers(config.n_relevant[0], config.n_relevant[1] + 1))
    mean_length = float(rng.uniform(*config.doc_length))
    distractor = float(rng.uniform(*config.distractor))
    # topical vocabulary avoids the most frequent background terms
    pool = rng.permutation(np.arange(config.vocab_size // 10, config.vocab_size))
    t = config.topic_terms
    core = _peaked(rng, pool[:t])
    subs = [_peaked(rng, pool[t * (i + 1) : t * (i + 2)]) for i in range(config.n_subtopics)]
    return TopicBlueprint(
        sr_id=f"{config.id_prefix}{index:04d}",
        n_docs=n_docs,
        n_relevant=n_rel,
        mean_length=mean_length,
        distractor=distractor,
        core=core,
        subtopics=subs,
        relevant_slots=np.sort(rng.choice(n_docs, size=n_rel, replace=False)),
    )


def synth_generate(config: SynthConfig) -> list[SystematicReview]:
    config.validate()
    vocab = vocabulary(config)
    background = _Sampler(np.arange(config.vocab_size), background_distribution(config))
    out = []
    for index in range(config.n_srs):
        bp = topic_blueprint(config, index)
        rng = np.random.default_rng([config.seed, index, 1])
        lengths = np.maximum(5, rng.poisson(bp.mean_length, size=bp.n_docs))
        relevant = set(bp.relevant_slots.tolist())
        docs, labels = [], {}
        rel_rank = 0
        for j in range(bp.n_docs):
            doc_id = f"{bp.sr_id}-{j:05d}"
            if j in relevant:
                term_ids = bp.sample_relevant(rng, background, config.overlap, rel_rank % config.n_subtopics,
                                              config.topic_share, int(lengths[j]))
                rel_rank += 1
            else:
                term_ids = bp.sample_nonrelevant(rng, background, int(lengths[j]))
            tokens = [vocab[i] for i in term_ids]
            docs.append(Document.from_tokens(doc_id, tokens, abstract=" ".join(tokens)))
            labels[doc_id] = int(j in relevant)
        out.append(SystematicReview(
            sr_id=bp.sr_id,
            candidates=CandidateCollection(bp.sr_id, docs),
            abstract_labels=dict(labels),
            fulldoc_labels=labels,
            title=f"synthetic review {bp.sr_id} (overlap={config.overlap})",
        ))
    return out


def synth_embeddings(config: SynthConfig, dim: int = 50) -> EmbeddingTable:
    rng = np.random.default_rng([config.seed, 2**31 - 1])
    return EmbeddingTable(vocabulary(config), rng.standard_normal((config.vocab_size, dim)).astype(np.float32))


def synth_background_counts(config: SynthConfig, total: int = 10_000_000) -> dict[str, int]:
    counts = np.maximum(1, np.round(background_distribution(config) * total)).astype(int)
    return dict(zip(vocabulary(config), counts.tolist()))
