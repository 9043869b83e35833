"""Documents, tokenization, collection statistics and the term-overlap similarity."""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Iterator, Mapping

import numpy as np
from sklearn.feature_extraction.text import ENGLISH_STOP_WORDS

_TOKEN_RE = re.compile(r"[^\W_]+")

DEFAULT_OOV_FLOOR = 1e-10


class CorpusError(ValueError):
    """Raised for unusable documents or collections."""


@dataclass(frozen=True)
class TokenizerConfig:
    lowercase: bool = True
    # "english", "none", or a comma separated list of words
    stopwords: str = "english"
    min_length: int = 1

    @cached_property
    def stopword_set(self) -> frozenset[str]:
        choice = self.stopwords.strip()
        if choice == "english":
            return frozenset(ENGLISH_STOP_WORDS)
        if choice in ("", "none"):
            return frozenset()
        return frozenset(w.strip().lower() for w in choice.split(",") if w.strip())

    def as_dict(self) -> dict:
        return {"lowercase": self.lowercase, "stopwords": self.stopwords, "min_length": self.min_length}

    @classmethod
    def from_text(cls, text: str) -> "TokenizerConfig":
        """Parse ``key = value`` lines; ``#`` starts a comment."""
        values: dict = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise CorpusError(f"tokenizer config line {lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            if key == "lowercase":
                values[key] = value.lower() in ("1", "true", "yes", "on")
            elif key == "stopwords":
                values[key] = value
            elif key == "min_length":
                values[key] = int(value)
            else:
                raise CorpusError(f"tokenizer config line {lineno}: unknown key {key!r}")
        return cls(**values)


def tokenize(text: str, config: TokenizerConfig | None = None) -> list[str]:
    config = config or TokenizerConfig()
    if config.lowercase:
        text = text.lower()
    stop = config.stopword_set
    return [t for t in _TOKEN_RE.findall(text) if len(t) >= config.min_length and t not in stop]


@dataclass(frozen=True)
class Document:
    id: str
    title: str
    abstract: str
    tokens: tuple[str, ...]
    tf: Mapping[str, int] = field(repr=False)
    length: int

    @classmethod
    def from_tokens(cls, doc_id: str, tokens: Iterable[str], title: str = "", abstract: str = "") -> "Document":
        tokens = tuple(tokens)
        return cls(str(doc_id), title, abstract, tokens, dict(Counter(tokens)), len(tokens))

    @classmethod
    def from_text(cls, doc_id: str, title: str, abstract: str, config: TokenizerConfig | None = None) -> "Document":
        # title and abstract are the whole document text
        tokens = tokenize(f"{title} {abstract}", config)
        return cls.from_tokens(doc_id, tokens, title=title, abstract=abstract)


@dataclass(frozen=True)
class CollectionStats:
    n_docs: int
    total_tokens: int
    df: Mapping[str, int] = field(repr=False)
    cf: Mapping[str, int] = field(repr=False)


def build_stats(docs: Iterable[Document]) -> CollectionStats:
    df: Counter = Counter()
    cf: Counter = Counter()
    seen: set[str] = set()
    total = 0
    for doc in docs:
        if doc.id in seen:
            raise CorpusError(f"duplicate document id {doc.id!r}")
        seen.add(doc.id)
        df.update(doc.tf.keys())
        cf.update(doc.tf)
        total += doc.length
    if not seen:
        raise CorpusError("cannot build statistics for an empty collection")
    # sorted keys keep the mappings identical regardless of insertion order
    return CollectionStats(
        n_docs=len(seen),
        total_tokens=total,
        df={t: df[t] for t in sorted(df)},
        cf={t: cf[t] for t in sorted(cf)},
    )


@dataclass(frozen=True)
class Postings:
    doc_idx: np.ndarray
    tf: np.ndarray


class CandidateCollection:
    """Candidate documents of one review, kept in ascending id order."""

    def __init__(self, sr_id: str, docs: Iterable[Document]):
        docs = list(docs)
        self.stats = build_stats(docs)
        self.sr_id = sr_id
        self.docs: dict[str, Document] = {d.id: d for d in sorted(docs, key=lambda d: d.id)}
        self.ids: tuple[str, ...] = tuple(self.docs)

    def __len__(self) -> int:
        return len(self.docs)

    def __iter__(self) -> Iterator[Document]:
        return iter(self.docs.values())

    def __contains__(self, doc_id: object) -> bool:
        return doc_id in self.docs

    def __getitem__(self, doc_id: str) -> Document:
        return self.docs[doc_id]

    def __repr__(self) -> str:
        return f"CandidateCollection(sr_id={self.sr_id!r}, n_docs={len(self)})"

    def cached(self, key, factory):
        """Memoise derived data (e.g. embedding matrices) on the collection."""
        store = self.__dict__.setdefault("_derived", {})
        if key not in store:
            store[key] = factory()
        return store[key]

    @cached_property
    def position(self) -> dict[str, int]:
        return {doc_id: i for i, doc_id in enumerate(self.ids)}

    @cached_property
    def lengths(self) -> np.ndarray:
        return np.array([d.length for d in self.docs.values()], dtype=np.float64)

    @cached_property
    def postings(self) -> dict[str, Postings]:
        rows: dict[str, tuple[list[int], list[int]]] = {}
        for i, doc in enumerate(self.docs.values()):
            for term, count in doc.tf.items():
                idx, tfs = rows.setdefault(term, ([], []))
                idx.append(i)
                tfs.append(count)
        return {
            t: Postings(np.array(idx, dtype=np.intp), np.array(tfs, dtype=np.float64))
            for t, (idx, tfs) in rows.items()
        }


class LanguageModel:
    """Unigram model; unseen terms get ``oov_floor`` before normalisation.

    ``norm`` is the total mass over the support the model was renormalised
    to, so ``prob`` always reads from a proper distribution on that support.
    """

    def __init__(self, probs: Mapping[str, float], oov_floor: float = DEFAULT_OOV_FLOOR, norm: float = 1.0):
        if oov_floor <= 0:
            raise CorpusError("oov_floor must be positive")
        self.probs = probs
        self.oov_floor = oov_floor
        self.norm = norm

    def prob(self, term: str) -> float:
        return self.probs.get(term, self.oov_floor) / self.norm

    def __contains__(self, term: object) -> bool:
        return term in self.probs

    def __len__(self) -> int:
        return len(self.probs)

    @cached_property
    def in_vocab_mass(self) -> float:
        return float(sum(self.probs.values()))

    def with_support(self, vocab: Iterable[str]) -> "LanguageModel":
        """Renormalise over this model's vocabulary plus ``vocab``."""
        n_unseen = sum(1 for t in set(vocab) if t not in self.probs)
        return LanguageModel(self.probs, self.oov_floor, self.in_vocab_mass + n_unseen * self.oov_floor)


def build_lm(source: CollectionStats | Mapping[str, int], oov_floor: float = DEFAULT_OOV_FLOOR) -> LanguageModel:
    """Maximum-likelihood unigram model from collection stats or raw term counts."""
    counts = source.cf if isinstance(source, CollectionStats) else source
    total = sum(counts.values())
    if total <= 0:
        raise CorpusError("language model needs at least one token")
    return LanguageModel({t: c / total for t, c in counts.items() if c > 0}, oov_floor)


def overlap_sim(d1: Document, d2: Document) -> int:
    """Sum of tf(w, d1) + tf(w, d2) over the terms the two documents share."""
    a, b = (d1.tf, d2.tf) if len(d1.tf) <= len(d2.tf) else (d2.tf, d1.tf)
    return sum(count + b[term] for term, count in a.items() if term in b)


def read_documents_jsonl(path: str | Path, config: TokenizerConfig | None = None) -> list[Document]:
    docs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                docs.append(Document.from_text(str(rec["id"]), rec.get("title", ""), rec.get("abstract", ""), config))
            except (json.JSONDecodeError, KeyError) as exc:
                raise CorpusError(f"{path}:{lineno}: bad document record ({exc})") from exc
    return docs


def write_documents_jsonl(path: str | Path, docs: Iterable[Document]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for d in docs:
            fh.write(json.dumps({"id": d.id, "title": d.title, "abstract": d.abstract}, ensure_ascii=False) + "\n")
