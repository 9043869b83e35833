"""Loading CLEF TAR topics and qrels, PubMed abstracts, embeddings and background counts."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Callable, Iterable, Mapping, Protocol

import numpy as np

from .corpus import CandidateCollection, Document, TokenizerConfig, read_documents_jsonl, write_documents_jsonl

log = logging.getLogger(__name__)

RELEVANT = 1
NONRELEVANT = 0

EUTILS_EFETCH = "https://eutils.ncbi.nlm.nih.gov/entrez/eutils/efetch.fcgi"
API_KEY_ENV = "NCBI_API_KEY"


class IngestError(ValueError):
    pass


class CacheCorruptError(IngestError):
    pass


class FetchError(RuntimeError):
    """Network failure after retries; carries whatever was fetched before it."""

    def __init__(self, message: str, fetched: list[Document], missing: list[str]):
        super().__init__(message)
        self.fetched = fetched
        self.missing = missing


# ---------------------------------------------------------------- qrels / topics


def parse_qrels(lines: Iterable[str] | str) -> dict[tuple[str, str], int]:
    if isinstance(lines, str):
        lines = lines.splitlines()
    out: dict[tuple[str, str], int] = {}
    for lineno, line in enumerate(lines, start=1):
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 4:
            raise IngestError(f"qrels line {lineno}: expected 4 fields, got {len(parts)}")
        topic, _, doc_id, label = parts
        if label not in ("0", "1"):
            raise IngestError(f"qrels line {lineno}: non-binary label {label!r}")
        out[(topic, doc_id)] = int(label)
    return out


def read_qrels(path: str | Path) -> dict[tuple[str, str], int]:
    with open(path, encoding="utf-8") as fh:
        return parse_qrels(fh)


@dataclass(frozen=True)
class TopicDescriptor:
    sr_id: str
    title: str
    pmids: tuple[str, ...]


_SECTIONS = ("Topic", "Title", "Query", "Pids")


def parse_topic(text: str) -> TopicDescriptor:
    """Parse one CLEF TAR topic file (``Topic:``, ``Title:``, ``Query:``, ``Pids:`` sections)."""
    sections: dict[str, list[str]] = {}
    current = None
    for raw in text.splitlines():
        line = raw.strip()
        head = line.split(":", 1)[0]
        if head in _SECTIONS and ":" in line and not raw[:1].isspace():
            current = head
            rest = line.split(":", 1)[1].strip()
            sections[current] = [rest] if rest else []
        elif current is not None and line:
            sections[current].append(line)
    for name in ("Topic", "Title", "Pids"):
        if name not in sections:
            raise IngestError(f"missing {name}")
    topic = " ".join(sections["Topic"]).strip()
    if not topic:
        raise IngestError("missing Topic")
    pmids = tuple(tok for line in sections["Pids"] for tok in line.split())
    return TopicDescriptor(topic, " ".join(sections["Title"]).strip(), pmids)


def parse_topics(paths: Iterable[str | Path]) -> list[TopicDescriptor]:
    return [parse_topic(Path(p).read_text(encoding="utf-8")) for p in sorted(map(str, paths))]


def topic_files(directory: str | Path) -> list[Path]:
    return sorted(p for p in Path(directory).iterdir() if p.is_file() and not p.name.startswith("."))


# ---------------------------------------------------------------- fetching


class DocumentCache:
    """PMID-keyed record store.

    Records live in ``records/<sha[:2]>/<pmid>.json``; ``index.tsv`` is an
    append-only list of ``pmid<TAB>sha256`` lines used to detect corruption.
    A record with ``missing: true`` remembers that PubMed had no abstract.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        (self.root / "records").mkdir(parents=True, exist_ok=True)
        self.index_path = self.root / "index.tsv"
        self._lock = threading.Lock()
        self._index: dict[str, str] = {}
        if self.index_path.exists():
            for lineno, line in enumerate(self.index_path.read_text(encoding="utf-8").splitlines(), 1):
                parts = line.split("\t")
                if len(parts) != 2:
                    raise CacheCorruptError(f"{self.index_path}:{lineno}: malformed index line")
                self._index[parts[0]] = parts[1]

    def _path(self, pmid: str) -> Path:
        shard = hashlib.sha1(pmid.encode()).hexdigest()[:2]
        return self.root / "records" / shard / f"{pmid}.json"

    def __contains__(self, pmid: object) -> bool:
        return pmid in self._index

    def get(self, pmid: str) -> dict | None:
        digest = self._index.get(pmid)
        if digest is None:
            return None
        path = self._path(pmid)
        try:
            data = path.read_bytes()
        except FileNotFoundError as exc:
            raise CacheCorruptError(f"cache record for {pmid} listed in index but absent") from exc
        if hashlib.sha256(data).hexdigest() != digest:
            raise CacheCorruptError(f"cache record for {pmid} does not match its checksum")
        return json.loads(data)

    def put(self, pmid: str, title: str, abstract: str, missing: bool = False) -> None:
        data = json.dumps(
            {"id": pmid, "title": title, "abstract": abstract, "missing": missing}, ensure_ascii=False, sort_keys=True
        ).encode("utf-8")
        digest = hashlib.sha256(data).hexdigest()
        with self._lock:
            path = self._path(pmid)
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp = path.with_suffix(".tmp")
            tmp.write_bytes(data)
            os.replace(tmp, path)
            with open(self.index_path, "a", encoding="utf-8") as fh:
                fh.write(f"{pmid}\t{digest}\n")
            self._index[pmid] = digest


class RateLimiter:
    """Spaces calls at least ``1/rate`` seconds apart, starting from creation.

    The first call also waits one interval, so ``n`` calls never finish in
    under ``n / rate`` seconds.
    """

    def __init__(self, rate: float, clock: Callable[[], float] = time.monotonic, sleep: Callable[[float], None] = time.sleep):
        self.interval = 1.0 / rate
        self.clock = clock
        self.sleep = sleep
        self._next = clock() + self.interval

    def wait(self) -> None:
        now = self.clock()
        if now < self._next:
            self.sleep(self._next - now)
            now = self._next
        self._next = now + self.interval


class Fetcher(Protocol):
    def __call__(self, pmids: list[str]) -> Mapping[str, tuple[str, str]]: ...


@dataclass
class PubMedClient:
    """Fetch (title, abstract) for batches of PMIDs from E-utilities efetch."""

    endpoint: str = EUTILS_EFETCH
    api_key: str | None = field(default_factory=lambda: os.environ.get(API_KEY_ENV))
    timeout: float = 60.0

    def __call__(self, pmids: list[str]) -> dict[str, tuple[str, str]]:
        import requests

        params = {"db": "pubmed", "id": ",".join(pmids), "retmode": "xml", "rettype": "abstract"}
        if self.api_key:
            params["api_key"] = self.api_key
        resp = requests.post(self.endpoint, data=params, timeout=self.timeout)
        resp.raise_for_status()
        return parse_pubmed_xml(resp.content)


def _text(elem: ET.Element | None) -> str:
    return "".join(elem.itertext()).strip() if elem is not None else ""


def parse_pubmed_xml(payload: bytes | str) -> dict[str, tuple[str, str]]:
    root = ET.fromstring(payload)
    out = {}
    for article in root.iter("PubmedArticle"):
        pmid = _text(article.find("MedlineCitation/PMID"))
        title = _text(article.find(".//ArticleTitle"))
        parts = [_text(p) for p in article.findall(".//Abstract/AbstractText")]
        abstract = " ".join(p for p in parts if p)
        if pmid:
            out[pmid] = (title, abstract)
    return out


@dataclass
class FetchResult:
    documents: list[Document]
    missing: list[str]
    network_calls: int = 0


def fetch_documents(
    pmids: Iterable[str],
    cache: DocumentCache,
    client: Fetcher | None = None,
    *,
    config: TokenizerConfig | None = None,
    batch_size: int = 200,
    rate_limit: float = 3.0,
    retries: int = 3,
    backoff: float = 2.0,
    limiter: RateLimiter | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> FetchResult:
    """Resolve PMIDs from the cache, fetching and caching the rest.

    Records without an abstract are cached as missing and reported in
    ``missing``; they are never returned as documents.
    """
    pmids = list(dict.fromkeys(str(p) for p in pmids))
    todo = [p for p in pmids if p not in cache]
    calls = 0
    if todo:
        client = client or PubMedClient()
        limiter = limiter or RateLimiter(rate_limit)
        for start in range(0, len(todo), batch_size):
            batch = todo[start : start + batch_size]
            for attempt in range(retries + 1):
                limiter.wait()
                calls += 1
                try:
                    got = client(batch)
                    break
                except Exception as exc:  # network layer errors vary by client
                    if attempt == retries:
                        done = _resolve(pmids, cache, config)
                        raise FetchError(f"fetch failed after {retries + 1} attempts: {exc}", done.documents, done.missing) from exc
                    delay = backoff * 2**attempt
                    log.warning("fetch attempt %d failed (%s); retrying in %.1fs", attempt + 1, exc, delay)
                    sleep(delay)
            for pmid in batch:
                title, abstract = got.get(pmid, ("", ""))
                cache.put(pmid, title, abstract, missing=not abstract.strip())
    result = _resolve(pmids, cache, config)
    result.network_calls = calls
    return result


def _resolve(pmids: list[str], cache: DocumentCache, config: TokenizerConfig | None) -> FetchResult:
    docs, missing = [], []
    for pmid in pmids:
        rec = cache.get(pmid)
        if rec is None or rec["missing"]:
            missing.append(pmid)
        else:
            docs.append(Document.from_text(pmid, rec["title"], rec["abstract"], config))
    return FetchResult(docs, missing)


# ---------------------------------------------------------------- embeddings


class EmbeddingTable:
    """Word vectors stored as one float32 matrix with a word index."""

    def __init__(self, words: Iterable[str], matrix: np.ndarray):
        self.words = list(words)
        self.matrix = np.asarray(matrix, dtype=np.float32)
        if self.matrix.ndim != 2 or self.matrix.shape[0] != len(self.words):
            raise IngestError("embedding matrix shape does not match vocabulary")
        self.dim = self.matrix.shape[1]
        self.index = {w: i for i, w in enumerate(self.words)}

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: object) -> bool:
        return word in self.index

    def __getitem__(self, word: str) -> np.ndarray:
        return self.matrix[self.index[word]]

    @property
    def vectors(self) -> dict[str, np.ndarray]:
        return {w: self.matrix[i] for i, w in enumerate(self.words)}


def _read_word(stream: BinaryIO, offset: int) -> tuple[str, int]:
    buf = bytearray()
    while True:
        ch = stream.read(1)
        if not ch:
            raise IngestError(f"truncated embedding stream at byte {offset + len(buf)}: expected word")
        if ch == b" ":
            break
        if ch == b"\n" and not buf:
            offset += 1  # newline terminating the previous vector
            continue
        buf += ch
    return buf.decode("utf-8", errors="replace"), offset + len(buf) + 1


def load_embeddings(source: str | Path | BinaryIO, vocab: Iterable[str] | None = None) -> EmbeddingTable:
    """Read word2vec binary format; ``vocab`` restricts which words are kept."""
    if isinstance(source, (str, Path)):
        with open(source, "rb") as fh:
            return load_embeddings(fh, vocab)
    stream = source
    header = stream.readline()
    try:
        n_words, dim = (int(x) for x in header.split())
    except ValueError as exc:
        raise IngestError(f"bad embedding header at byte 0: {header[:40]!r}") from exc
    if n_words < 0 or dim <= 0:
        raise IngestError("bad embedding header at byte 0: non-positive sizes")
    keep = set(vocab) if vocab is not None else None
    offset = len(header)
    width = 4 * dim
    words, rows = [], []
    for _ in range(n_words):
        word, offset = _read_word(stream, offset)
        raw = stream.read(width)
        if len(raw) != width:
            raise IngestError(f"truncated embedding stream at byte {offset + len(raw)}: vector for {word!r} has {len(raw)} of {width} bytes")
        offset += width
        if keep is None or word in keep:
            words.append(word)
            rows.append(np.frombuffer(raw, dtype="<f4"))
    if keep is None and stream.read(64).strip():
        raise IngestError(f"header mismatch: data continues past {n_words} entries at byte {offset}")
    matrix = np.vstack(rows) if rows else np.zeros((0, dim), dtype=np.float32)
    return EmbeddingTable(words, matrix)


def write_embeddings(target: str | Path | BinaryIO, table: EmbeddingTable) -> None:
    if isinstance(target, (str, Path)):
        with open(target, "wb") as fh:
            return write_embeddings(fh, table)
    target.write(f"{len(table)} {table.dim}\n".encode())
    for word, row in zip(table.words, table.matrix):
        target.write(word.encode("utf-8") + b" ")
        target.write(np.asarray(row, dtype="<f4").tobytes())
        target.write(b"\n")


# ---------------------------------------------------------------- background LM counts


def read_term_counts(path: str | Path) -> dict[str, int]:
    counts: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise IngestError(f"{path}:{lineno}: expected term<TAB>count")
            try:
                counts[parts[0]] = counts.get(parts[0], 0) + int(parts[1])
            except ValueError as exc:
                raise IngestError(f"{path}:{lineno}: bad count {parts[1]!r}") from exc
    return counts


def write_term_counts(path: str | Path, counts: Mapping[str, int]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for term in sorted(counts):
            fh.write(f"{term}\t{counts[term]}\n")


# ---------------------------------------------------------------- reviews


@dataclass
class SystematicReview:
    sr_id: str
    candidates: CandidateCollection
    abstract_labels: dict[str, int]
    fulldoc_labels: dict[str, int]
    title: str = ""
    missing_docs: list[str] = field(default_factory=list)

    @property
    def relevant_ids(self) -> frozenset[str]:
        return frozenset(d for d, lab in self.fulldoc_labels.items() if lab == RELEVANT)

    def relevant_docs(self) -> list[Document]:
        return [self.candidates[d] for d in sorted(self.relevant_ids)]


def labels_for(qrels: Mapping[tuple[str, str], int], sr_id: str) -> dict[str, int]:
    return {doc: lab for (topic, doc), lab in qrels.items() if topic == sr_id}


def assemble_review(
    descriptor: TopicDescriptor,
    documents: Iterable[Document],
    abstract_qrels: Mapping[tuple[str, str], int],
    fulldoc_qrels: Mapping[tuple[str, str], int],
    missing: Iterable[str] = (),
) -> SystematicReview:
    """Build a review; labelled ids without fetched text are dropped and listed in ``missing_docs``."""
    docs = {d.id: d for d in documents}
    wanted = set(descriptor.pmids)
    coll = CandidateCollection(descriptor.sr_id, (d for d in docs.values() if d.id in wanted))
    abs_labels = labels_for(abstract_qrels, descriptor.sr_id)
    full_labels = labels_for(fulldoc_qrels, descriptor.sr_id)
    dropped = set(missing) | {p for p in wanted if p not in coll}
    dropped |= {d for d in set(abs_labels) | set(full_labels) if d not in coll}
    return SystematicReview(
        sr_id=descriptor.sr_id,
        candidates=coll,
        abstract_labels={d: lab for d, lab in abs_labels.items() if d in coll},
        fulldoc_labels={d: lab for d, lab in full_labels.items() if d in coll},
        title=descriptor.title,
        missing_docs=sorted(dropped),
    )


# ---------------------------------------------------------------- materialised corpus


def save_review(directory: str | Path, sr: SystematicReview) -> None:
    """Write ``<sr_id>.jsonl`` (documents) and ``<sr_id>.labels.json``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_documents_jsonl(directory / f"{sr.sr_id}.jsonl", sr.candidates)
    meta = {
        "sr_id": sr.sr_id,
        "title": sr.title,
        "abstract_labels": dict(sorted(sr.abstract_labels.items())),
        "fulldoc_labels": dict(sorted(sr.fulldoc_labels.items())),
        "missing_docs": sr.missing_docs,
    }
    (directory / f"{sr.sr_id}.labels.json").write_text(json.dumps(meta, indent=1, sort_keys=True), encoding="utf-8")


def load_review(directory: str | Path, sr_id: str, config: TokenizerConfig | None = None) -> SystematicReview:
    directory = Path(directory)
    meta_path = directory / f"{sr_id}.labels.json"
    if not meta_path.exists():
        raise IngestError(f"unknown review {sr_id!r} in {directory}")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    docs = read_documents_jsonl(directory / f"{sr_id}.jsonl", config)
    return SystematicReview(
        sr_id=sr_id,
        candidates=CandidateCollection(sr_id, docs),
        abstract_labels=meta["abstract_labels"],
        fulldoc_labels=meta["fulldoc_labels"],
        title=meta.get("title", ""),
        missing_docs=meta.get("missing_docs", []),
    )


def list_reviews(directory: str | Path) -> list[str]:
    return sorted(p.name[: -len(".labels.json")] for p in Path(directory).glob("*.labels.json"))


__all__ = [
    "CacheCorruptError",
    "DocumentCache",
    "EmbeddingTable",
    "FetchError",
    "FetchResult",
    "IngestError",
    "PubMedClient",
    "RateLimiter",
    "SystematicReview",
    "TopicDescriptor",
    "assemble_review",
    "fetch_documents",
    "list_reviews",
    "load_embeddings",
    "load_review",
    "parse_pubmed_xml",
    "parse_qrels",
    "parse_topic",
    "parse_topics",
    "read_qrels",
    "read_term_counts",
    "save_review",
    "write_embeddings",
    "write_term_counts",
]
