"""Command-line entry point: ``srq ingest|rank|estimate|evaluate|report``.

Exit codes: 0 success, 2 usage or validation error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .corpus import CorpusError, TokenizerConfig, build_lm
from .estimators import ABLATIONS, ALL_ESTIMATORS, EstimatorError, derive_seed, estimates_to_csv, tb_pairs_mean, tb_triples_min
from .evaluation.metrics import EvaluationError
from .evaluation.pipeline import EvalConfig, EvaluationReport, Resources, run_evaluation, table_csv, table_json
from .evaluation.synth import SynthConfig, broadness_families, synth_background_counts, synth_embeddings
from .ingest import (
    DocumentCache,
    FetchError,
    IngestError,
    PubMedClient,
    assemble_review,
    fetch_documents,
    load_embeddings,
    load_review,
    list_reviews,
    parse_topics,
    read_qrels,
    read_term_counts,
    save_review,
    topic_files,
    write_embeddings,
    write_term_counts,
)
from .rankers import RANKER_NAMES, RankingError, make_ranker, write_trec_run

log = logging.getLogger("srquality")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 2, 3

TOKENIZER_FILE = "tokenizer.conf"
EMBEDDINGS_FILE = "embeddings.bin"
BACKGROUND_FILE = "background.tsv"
MANIFEST_FILE = "manifest.json"
REFERENCE_FILE = "reference_estimates.json"
EMBEDDING_ESTIMATORS = ("numClusters", "avgDocSim", "sumDocSim", "maxDocSim", "stdevDocSim")


class UsageError(Exception):
    """Bad arguments or missing inputs; reported with exit code 2."""


@dataclass
class RunConfig:
    """Everything that determines a run's outputs.

    The output directory is deliberately not part of it: the same
    computation written to two places hashes identically.
    """

    command: str
    corpus_dir: str | None = None
    topics_dir: str | None = None
    abstract_qrels: str | None = None
    content_qrels: str | None = None
    cache_dir: str | None = None
    tokenizer: dict = field(default_factory=lambda: TokenizerConfig().as_dict())
    embeddings: str | None = None
    background: str | None = None
    synthetic: bool = False
    synthetic_per_family: int = 20
    synthetic_size_range: tuple[int, int] = (60, 600)
    rankers: tuple[str, ...] = RANKER_NAMES
    estimators: tuple[str, ...] = ALL_ESTIMATORS
    master_seed: int = 0
    k1: float = 1.2
    b: float = 0.75
    mu: float = 1000.0
    pair_cap: int = 30
    k_range: tuple[int, int] = (2, 100)
    n_groups: int = 30
    group_size: int = 30
    three_seed: bool = True
    docsim_exact_limit: int | None = 2000

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True, separators=(",", ":"))

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.to_json().encode("utf-8")).hexdigest()

    def eval_config(self) -> EvalConfig:
        return EvalConfig(
            estimators=tuple(self.estimators),
            rankers=tuple(self.rankers),
            master_seed=self.master_seed,
            pair_cap=self.pair_cap,
            k1=self.k1,
            b=self.b,
            mu=self.mu,
            k_range=tuple(self.k_range),
            docsim_exact_limit=self.docsim_exact_limit,
            n_groups=self.n_groups,
            group_size=self.group_size,
            three_seed=self.three_seed,
        )

    def synth_config(self) -> SynthConfig:
        return SynthConfig(n_srs=self.synthetic_per_family, seed=self.master_seed, size_range=tuple(self.synthetic_size_range))


# ---------------------------------------------------------------- output helpers


def write_atomic(path: Path, data: str | bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    raw = data.encode("utf-8") if isinstance(data, str) else data
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(raw)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _clean(obj):
    """JSON-safe copy: NaN becomes null, tuples become lists."""
    if isinstance(obj, float):
        return None if math.isnan(obj) or math.isinf(obj) else obj
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def write_json(path: Path, payload: dict, cfg: RunConfig) -> None:
    body = {"config_hash": cfg.hash, **payload}
    write_atomic(path, json.dumps(_clean(body), indent=1, sort_keys=True, allow_nan=False) + "\n")


def _require_file(path: str | None, what: str) -> Path:
    if not path:
        raise UsageError(f"missing {what}")
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{what} not found: {p}")
    return p


def _require_dir(path: str | None, what: str) -> Path:
    if not path:
        raise UsageError(f"missing {what}")
    p = Path(path)
    if not p.is_dir():
        raise UsageError(f"{what} not found: {p}")
    return p


def _names(text: str | None, allowed: Sequence[str], what: str) -> tuple[str, ...]:
    if text is None:
        return tuple(allowed)
    names = tuple(n.strip() for n in text.split(",") if n.strip())
    unknown = [n for n in names if n not in allowed]
    if unknown or not names:
        raise UsageError(f"unknown {what}: {', '.join(unknown) or '(empty)'}; choose from {', '.join(allowed)}")
    return names


def _tokenizer(path: str | None) -> tuple[TokenizerConfig, str]:
    """Config plus its source text, echoed verbatim into the corpus."""
    if path is None:
        text = "".join(f"{k} = {str(v).lower() if isinstance(v, bool) else v}\n" for k, v in TokenizerConfig().as_dict().items())
    else:
        text = _require_file(path, "tokenizer config").read_text(encoding="utf-8")
    try:
        return TokenizerConfig.from_text(text), text
    except CorpusError as exc:
        raise UsageError(str(exc)) from exc


def _corpus_tokenizer(corpus: Path) -> TokenizerConfig:
    conf = corpus / TOKENIZER_FILE
    return TokenizerConfig.from_text(conf.read_text(encoding="utf-8")) if conf.exists() else TokenizerConfig()


# ---------------------------------------------------------------- ingest


class _OfflineClient:
    def __call__(self, pmids):
        raise ConnectionError("offline: document is not in the cache")


def cmd_ingest(args) -> int:
    tok, tok_text = _tokenizer(args.tokenizer)
    out = Path(args.out)
    if args.synthetic:
        cfg = RunConfig("ingest", synthetic=True, synthetic_per_family=args.per_family,
                        synthetic_size_range=tuple(args.size_range), master_seed=args.seed, tokenizer=tok.as_dict())
        narrow, broad = broadness_families(cfg.synthetic_per_family, cfg.master_seed, tuple(cfg.synthetic_size_range))
        reviews = narrow + broad
        for sr in reviews:
            save_review(out, sr)
        sc = cfg.synth_config()
        write_embeddings(out / EMBEDDINGS_FILE, synth_embeddings(sc))
        write_term_counts(out / BACKGROUND_FILE, synth_background_counts(sc))
        write_atomic(out / TOKENIZER_FILE, tok_text)
        write_json(out / MANIFEST_FILE, _manifest(cfg, tok_text, reviews, "complete"), cfg)
        print(f"wrote {len(reviews)} synthetic reviews to {out}")
        return EXIT_OK

    topics = _require_dir(args.topics, "topics directory")
    abs_path = _require_file(args.abstract_qrels, "abstract qrels file")
    full_path = _require_file(args.content_qrels, "content qrels file")
    if not args.cache:
        raise UsageError("missing cache directory (--cache)")
    cfg = RunConfig("ingest", topics_dir=str(topics), abstract_qrels=str(abs_path), content_qrels=str(full_path),
                    cache_dir=str(args.cache), tokenizer=tok.as_dict())
    try:
        descriptors = parse_topics(topic_files(topics))
        abs_q, full_q = read_qrels(abs_path), read_qrels(full_path)
    except IngestError as exc:
        raise UsageError(str(exc)) from exc
    if not descriptors:
        raise UsageError(f"no topic files in {topics}")

    cache = DocumentCache(args.cache)
    client = _OfflineClient() if args.offline else PubMedClient()
    reviews, status = [], "complete"
    for desc in descriptors:
        try:
            res = fetch_documents(desc.pmids, cache, client, config=tok, batch_size=args.batch_size,
                                  rate_limit=args.rate, retries=0 if args.offline else args.retries)
            docs, missing = res.documents, res.missing
        except FetchError as exc:
            log.error("%s: %s", desc.sr_id, exc)
            docs, missing, status = exc.fetched, exc.missing, "partial"
        if not docs:
            log.warning("%s: no documents available", desc.sr_id)
            continue
        sr = assemble_review(desc, docs, abs_q, full_q, missing)
        save_review(out, sr)
        reviews.append(sr)
    write_atomic(out / TOKENIZER_FILE, tok_text)
    write_json(out / MANIFEST_FILE, _manifest(cfg, tok_text, reviews, status), cfg)
    print(f"ingested {len(reviews)} reviews into {out} ({status})")
    return EXIT_OK if status == "complete" else EXIT_RUNTIME


def _manifest(cfg: RunConfig, tok_text: str, reviews, status: str) -> dict:
    return {
        "status": status,
        "config": dataclasses.asdict(cfg),
        "tokenizer_config": tok_text,
        "n_reviews": len(reviews),
        "reviews": [
            {
                "sr_id": sr.sr_id,
                "n_candidates": len(sr.candidates),
                "n_relevant_abstract": sum(sr.abstract_labels.values()),
                "n_relevant_content": len(sr.relevant_ids),
                "n_missing": len(sr.missing_docs),
                "missing": sr.missing_docs,
            }
            for sr in reviews
        ],
    }


# ---------------------------------------------------------------- shared loading


def _resource_paths(args, corpus: Path | None) -> tuple[str | None, str | None]:
    emb, bg = args.embeddings, args.background
    if corpus is not None:
        if emb is None and (corpus / EMBEDDINGS_FILE).exists():
            emb = str(corpus / EMBEDDINGS_FILE)
        if bg is None and (corpus / BACKGROUND_FILE).exists():
            bg = str(corpus / BACKGROUND_FILE)
    return emb, bg


def _load_reviews(corpus: Path, sr_ids: Sequence[str] | None = None):
    tok = _corpus_tokenizer(corpus)
    ids = list_reviews(corpus) if sr_ids is None else sr_ids
    return [load_review(corpus, s, tok) for s in ids]


def _load_resources(reviews, emb_path: str | None, bg_path: str | None) -> Resources:
    vocab = {w for sr in reviews for d in sr.candidates for w in d.tf}
    embeddings = load_embeddings(emb_path, vocab=vocab) if emb_path else None
    background = build_lm(read_term_counts(bg_path)) if bg_path else None
    return Resources(embeddings, background)


# ---------------------------------------------------------------- rank


def cmd_rank(args) -> int:
    corpus = _require_dir(args.corpus, "corpus directory")
    ranker_name = _names(args.ranker, RANKER_NAMES, "ranker")[0]
    emb, _ = _resource_paths(args, corpus)
    if ranker_name == "AES":
        _require_file(emb, "embeddings file")
    known = list_reviews(corpus)
    sr_ids = args.sr or known
    unknown = [s for s in sr_ids if s not in known]
    if unknown:
        raise UsageError(f"unknown review(s): {', '.join(unknown)}")
    cfg = RunConfig("rank", corpus_dir=str(corpus), embeddings=emb, rankers=(ranker_name,), k1=args.k1, b=args.b, mu=args.mu,
                    tokenizer=_corpus_tokenizer(corpus).as_dict())
    reviews = _load_reviews(corpus, sr_ids)
    res = _load_resources(reviews, emb if ranker_name == "AES" else None, None)
    ranker = make_ranker(ranker_name, res.embeddings, k1=args.k1, b=args.b, mu=args.mu)
    runs = []
    for sr in reviews:
        seeds = args.seed or sorted(sr.relevant_ids)
        for seed in seeds:
            if seed not in sr.candidates:
                raise UsageError(f"{sr.sr_id}: unknown seed document {seed}")
            r = ranker(sr.candidates[seed], sr.candidates)
            # one TREC query per (review, seed)
            runs.append(dataclasses.replace(r, sr_id=f"{sr.sr_id}:{seed}"))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = out.with_name(f".{out.name}.tmp")
    write_trec_run(tmp, runs, f"{ranker_name}-{cfg.hash[:16]}")
    os.replace(tmp, out)
    print(f"wrote {len(runs)} rankings to {out}")
    return EXIT_OK


# ---------------------------------------------------------------- estimate


def cmd_estimate(args) -> int:
    if len(args.seeds) < 2:
        raise UsageError("topic broadness needs at least two seed documents (it compares seed pairs); got "
                         f"{len(args.seeds)}")
    if len(set(args.seeds)) != len(args.seeds):
        raise UsageError("seed documents must be distinct")
    corpus = _require_dir(args.corpus, "corpus directory")
    if args.sr not in list_reviews(corpus):
        raise UsageError(f"unknown review {args.sr!r} in {corpus}")
    sr = _load_reviews(corpus, [args.sr])[0]
    missing = [s for s in args.seeds if s not in sr.candidates]
    if missing:
        raise UsageError(f"{args.sr}: unknown seed document(s) {', '.join(missing)}")
    cfg = RunConfig("estimate", corpus_dir=str(corpus), estimators=("TB",), master_seed=args.master_seed,
                    pair_cap=args.pair_cap, tokenizer=_corpus_tokenizer(corpus).as_dict())
    seeds = [sr.candidates[s] for s in args.seeds]
    rng_seed = derive_seed(args.master_seed, sr.sr_id)
    triple = len(seeds) >= 3
    rec = (tb_triples_min if triple else tb_pairs_mean)(seeds, sr.candidates, cap=args.pair_cap, rng_seed=rng_seed)
    quality = -rec.mean
    payload = {
        "config_hash": cfg.hash,
        "sr_id": sr.sr_id,
        "seeds": list(args.seeds),
        "mode": "triple_min" if triple else "pair_mean",
        "n_groups": rec.n_pairs,
        "mean": rec.mean,
        "variance": rec.variance,
        "quality_estimate": quality,
        "percentile": None,
        "reference_size": 0,
    }
    ref_path = Path(args.reference) if args.reference else corpus / REFERENCE_FILE
    if ref_path.exists():
        ref = json.loads(ref_path.read_text(encoding="utf-8"))["quality_estimates"]
        values = [v for v in ref.values() if v is not None]
        if values:
            payload["percentile"] = 100.0 * sum(1 for v in values if v <= quality) / len(values)
            payload["reference_size"] = len(values)
    elif args.reference:
        raise UsageError(f"reference estimates not found: {ref_path}")
    print(json.dumps(_clean(payload), sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------- evaluate


def _evaluate_config(args) -> tuple[RunConfig, Path | None]:
    estimators = _names(args.estimators, ALL_ESTIMATORS, "estimator")
    rankers = _names(args.rankers, RANKER_NAMES, "ranker")
    common = dict(rankers=rankers, estimators=estimators, master_seed=args.seed, k1=args.k1, b=args.b, mu=args.mu,
                  pair_cap=args.pair_cap, n_groups=args.groups, group_size=args.group_size,
                  three_seed=not args.no_three_seed,
                  docsim_exact_limit=None if args.docsim_exact else 2000)
    if args.synthetic:
        if args.corpus:
            raise UsageError("--synthetic and --corpus are mutually exclusive")
        k_range = tuple(args.k_range) if args.k_range else (2, 10)
        cfg = RunConfig("evaluate", synthetic=True, synthetic_per_family=args.per_family,
                        synthetic_size_range=tuple(args.size_range), k_range=k_range, **common)
        return cfg, None
    corpus = _require_dir(args.corpus, "corpus directory (--corpus or --synthetic)")
    if not list_reviews(corpus):
        raise UsageError(f"no reviews in corpus directory {corpus}")
    emb, bg = _resource_paths(args, corpus)
    if "AES" in rankers or any(e in estimators for e in EMBEDDING_ESTIMATORS):
        _require_file(emb, "embeddings file (needed by AES and embedding-based estimators)")
    if "collClarity" in estimators:
        _require_file(bg, "background term counts (needed by collClarity)")
    k_range = tuple(args.k_range) if args.k_range else (2, 100)
    cfg = RunConfig("evaluate", corpus_dir=str(corpus), embeddings=emb, background=bg, k_range=k_range,
                    tokenizer=_corpus_tokenizer(corpus).as_dict(), **common)
    return cfg, corpus


def cmd_evaluate(args) -> int:
    cfg, corpus = _evaluate_config(args)
    out = Path(args.out)
    if cfg.synthetic:
        narrow, broad = broadness_families(cfg.synthetic_per_family, cfg.master_seed, tuple(cfg.synthetic_size_range))
        reviews = narrow + broad
        sc = cfg.synth_config()
        resources = Resources(synth_embeddings(sc), build_lm(synth_background_counts(sc)))
    else:
        reviews = _load_reviews(corpus)
        resources = _load_resources(reviews, cfg.embeddings, cfg.background)
    report = run_evaluation(reviews, resources, cfg.eval_config())
    write_report(out, report, cfg)
    print(f"evaluated {len(report.included)} reviews ({len(report.excluded)} excluded); reports in {out}")
    return EXIT_OK


def write_report(out: Path, report: EvaluationReport, cfg: RunConfig) -> None:
    header = f"config_hash {cfg.hash}"
    write_atomic(out / "run_config.json", json.dumps({"config_hash": cfg.hash, "config": json.loads(cfg.to_json())},
                                                      indent=1, sort_keys=True) + "\n")
    tables = {"table2": report.table_two, "table3": report.table_three, "ablation": report.ablation}
    for name, rows in tables.items():
        if not rows:
            continue
        write_atomic(out / f"{name}.csv", table_csv(rows, header))
        write_json(out / f"{name}.json", table_json(rows), cfg)
    write_json(out / "significance.json", {"test": "paired t on absolute per-group coefficients, proposed vs baseline",
                                           "groups": report.groups, "p_values": report.significance}, cfg)
    write_json(out / "model_comparison.json", report.comparison, cfg)
    two = [r for recs in report.estimates_two.values() for r in recs.values()]
    write_atomic(out / "estimates.csv", estimates_to_csv(two, header))
    if report.estimates_three:
        three = [r for recs in report.estimates_three.values() for r in recs.values()]
        write_atomic(out / "estimates_three.csv", estimates_to_csv(three, header))
    qualities = {rk: {s: {"mean_ap": q.mean_ap, "per_seed_ap": q.per_seed_ap} for s, q in v.items()}
                 for rk, v in report.qualities.items()}
    write_json(out / "qualities.json", {"qualities": qualities}, cfg)
    tb = report.estimates_two["TB"]
    write_json(out / REFERENCE_FILE, {"estimator": "TB", "quality_estimates": {s: -r.mean for s, r in tb.items()}}, cfg)
    write_json(out / "summary.json", {
        "included": report.included,
        "excluded": report.excluded,
        "n_included": len(report.included),
        "mean_tb_pair_variance": report.mean_pair_variance,
        "ablations": list(ABLATIONS),
    }, cfg)


# ---------------------------------------------------------------- report


REPORT_TABLES = ("table2", "table3", "ablation")


def cmd_report(args) -> int:
    reports = _require_dir(args.reports, "reports directory")
    names = [args.table] if args.table else list(REPORT_TABLES)
    found = False
    for name in names:
        path = reports / f"{name}.csv"
        if not path.exists():
            if args.table:
                raise UsageError(f"table not found: {path}")
            continue
        found = True
        print(f"== {name}")
        sys.stdout.write(path.read_text(encoding="utf-8"))
    if not found:
        raise UsageError(f"no report tables in {reports}")
    return EXIT_OK


# ---------------------------------------------------------------- argument parsing


def _add_ranker_params(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k1", type=float, default=1.2, help="BM25 k1")
    p.add_argument("--b", type=float, default=0.75, help="BM25 b")
    p.add_argument("--mu", type=float, default=1000.0, help="Dirichlet prior of the query-likelihood ranker")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="srq", description="Estimate ranking quality of systematic review screening.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="assemble review corpora from topics, qrels and PubMed")
    p.add_argument("--topics", help="directory of topic files")
    p.add_argument("--abstract-qrels", help="abstract-level qrels file")
    p.add_argument("--content-qrels", help="content-level qrels file")
    p.add_argument("--cache", help="document cache directory")
    p.add_argument("--out", required=True, help="corpus output directory")
    p.add_argument("--tokenizer", help="tokenizer config file (key = value lines)")
    p.add_argument("--offline", action="store_true", help="never contact the network; use the cache only")
    p.add_argument("--batch-size", type=int, default=200)
    p.add_argument("--rate", type=float, default=3.0, help="maximum requests per second")
    p.add_argument("--retries", type=int, default=3)
    p.add_argument("--synthetic", action="store_true", help="write generated narrow/broad reviews instead")
    p.add_argument("--per-family", type=int, default=20, help="synthetic reviews per family")
    p.add_argument("--size-range", type=int, nargs=2, default=(60, 600), metavar=("LO", "HI"))
    p.add_argument("--seed", type=int, default=0, help="generator seed")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("rank", help="write TREC runs with every relevant document (or --seed) as the query")
    p.add_argument("--corpus", required=True)
    p.add_argument("--ranker", required=True, help=", ".join(RANKER_NAMES))
    p.add_argument("--sr", nargs="*", help="review ids (default: all)")
    p.add_argument("--seed", nargs="*", help="seed document ids (default: every relevant document)")
    p.add_argument("--embeddings")
    p.add_argument("--out", required=True, help="run file")
    _add_ranker_params(p)
    p.set_defaults(func=cmd_rank, background=None)

    p = sub.add_parser("estimate", help="topic broadness estimate for one review and known seeds")
    p.add_argument("--corpus", required=True)
    p.add_argument("--sr", required=True)
    p.add_argument("--seeds", nargs="+", required=True, help="two seeds: pair mean; three or more: triple minimum")
    p.add_argument("--reference", help="reference_estimates.json from an evaluate run (default: corpus copy)")
    p.add_argument("--master-seed", type=int, default=0)
    p.add_argument("--pair-cap", type=int, default=30)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("evaluate", help="correlation tables, significance, ablation and model comparison")
    p.add_argument("--corpus", help="corpus directory written by ingest")
    p.add_argument("--synthetic", action="store_true", help="run on generated narrow/broad reviews")
    p.add_argument("--per-family", type=int, default=20)
    p.add_argument("--size-range", type=int, nargs=2, default=(60, 600), metavar=("LO", "HI"))
    p.add_argument("--out", required=True, help="report directory")
    p.add_argument("--estimators", help="comma separated subset of: " + ", ".join(ALL_ESTIMATORS))
    p.add_argument("--rankers", help="comma separated subset of: " + ", ".join(RANKER_NAMES))
    p.add_argument("--embeddings")
    p.add_argument("--background", help="background term counts (term<TAB>count)")
    p.add_argument("--seed", type=int, default=0, help="master RNG seed")
    p.add_argument("--pair-cap", type=int, default=30)
    p.add_argument("--groups", type=int, default=30, help="subsample groups for significance tests")
    p.add_argument("--group-size", type=int, default=30)
    p.add_argument("--k-range", type=int, nargs=2, metavar=("LO", "HI"), help="cluster counts tried by numClusters")
    p.add_argument("--no-three-seed", action="store_true")
    p.add_argument("--docsim-exact", action="store_true", help="never sample document pairs")
    _add_ranker_params(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="print stored correlation tables")
    p.add_argument("--reports", required=True)
    p.add_argument("--table", choices=REPORT_TABLES)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"srq {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CorpusError, IngestError, EstimatorError, EvaluationError, RankingError, OSError) as exc:
        print(f"srq {args.command}: failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
