"""End-to-end evaluation: qualities, estimates, correlation tables, significance, ablation."""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from ..corpus import LanguageModel, build_lm
from ..estimators import (
    ABLATIONS,
    ALL_ESTIMATORS,
    PAIR_CAP,
    QPP_MEASURES,
    EstimateRecord,
    coll_clarity,
    derive_seed,
    docsim_family,
    num_clusters,
    qpp_group_average,
    sample_groups,
    tb_ablation,
    topic_broadness,
)
from ..ingest import EmbeddingTable, SystematicReview
from ..rankers import RANKER_NAMES, Ranker, make_ranker
from .compare import compare_models
from .correlation import (
    CorrelationResult,
    EvaluationError,
    evaluate_estimator,
    group_coefficients,
    significance_test,
    subsample_groups,
)
from .metrics import QualityScore, sr_quality

log = logging.getLogger(__name__)

PROPOSED = "TB"
DOCSIM = ("avgDocSim", "sumDocSim", "maxDocSim", "stdevDocSim")


@dataclass
class EvalConfig:
    estimators: tuple[str, ...] = ALL_ESTIMATORS
    rankers: tuple[str, ...] = RANKER_NAMES
    master_seed: int = 0
    pair_cap: int = PAIR_CAP
    k1: float = 1.2
    b: float = 0.75
    mu: float = 1000.0
    k_range: tuple[int, int] = (2, 100)
    kmeans_n_init: int = 3
    docsim_exact_limit: int | None = 2000
    n_groups: int = 30
    group_size: int = 30
    three_seed: bool = True
    ablation: bool = True


@dataclass
class Resources:
    embeddings: EmbeddingTable | None = None
    background: LanguageModel | None = None


def split_eligible(srs: Iterable[SystematicReview], min_relevant: int = 2) -> tuple[list[SystematicReview], list[str]]:
    kept, excluded = [], []
    for sr in srs:
        if len(sr.relevant_ids) >= min_relevant:
            kept.append(sr)
        else:
            excluded.append(sr.sr_id)
    return kept, excluded


def build_rankers(config: EvalConfig, resources: Resources) -> dict[str, Ranker]:
    return {
        name: make_ranker(name, resources.embeddings, k1=config.k1, b=config.b, mu=config.mu)
        for name in config.rankers
    }


def compute_qualities(srs: Sequence[SystematicReview], rankers: Mapping[str, Ranker]) -> dict[str, dict[str, QualityScore]]:
    out: dict[str, dict[str, QualityScore]] = {name: {} for name in rankers}
    for sr in srs:
        for name, ranker in rankers.items():
            out[name][sr.sr_id] = sr_quality(sr, ranker, name)
    return out


def _needs(config: EvalConfig, name: str) -> bool:
    return name in config.estimators


def seed_estimates(
    sr: SystematicReview, group_size: int, config: EvalConfig, names: Iterable[str]
) -> dict[str, EstimateRecord]:
    """Per-group estimators (TB, ablations, QPP) over one shared sample of seed groups.

    With ``group_size=3`` each triple scores its broadest pair (minimum TB);
    reviews with only two relevant documents fall back to their single pair.
    """
    coll = sr.candidates
    seeds = sr.relevant_docs()
    rng_seed = derive_seed(config.master_seed, sr.sr_id)
    size = group_size if len(seeds) >= group_size else 2
    groups = sample_groups(seeds, size, config.pair_cap, rng_seed)
    ids = [tuple(d.id for d in g) for g in groups]
    pairs_of = [[(a, b) for i, a in enumerate(g) for b in g[i + 1 :]] for g in groups]
    coll_lm = build_lm(coll.stats)
    out: dict[str, EstimateRecord] = {}
    for name in names:
        if name == PROPOSED or name in ABLATIONS:
            def score(a, b, name=name):
                return topic_broadness(a, b, coll) if name == PROPOSED else tb_ablation(name, a, b, coll)
            values = [min(score(a, b) for a, b in pairs) for pairs in pairs_of]
        elif name in QPP_MEASURES:
            values = [qpp_group_average(name, g, coll, coll_lm) for g in groups]
        else:
            continue
        out[name] = EstimateRecord(sr.sr_id, name, values, rng_seed, ids)
    return out


def collection_estimates(sr: SystematicReview, config: EvalConfig, resources: Resources) -> dict[str, EstimateRecord]:
    coll = sr.candidates
    rng_seed = derive_seed(config.master_seed, sr.sr_id)
    values: dict[str, float] = {}
    if _needs(config, "collSize"):
        values["collSize"] = float(len(coll))
    if _needs(config, "collClarity"):
        if resources.background is None:
            raise EvaluationError("collClarity needs a background language model")
        values["collClarity"] = coll_clarity(coll, resources.background)
    if _needs(config, "numClusters"):
        if resources.embeddings is None:
            raise EvaluationError("numClusters needs word embeddings")
        values["numClusters"] = float(num_clusters(coll, resources.embeddings, config.k_range, rng_seed, config.kmeans_n_init))
    if any(_needs(config, n) for n in DOCSIM):
        if resources.embeddings is None:
            raise EvaluationError("document similarity baselines need word embeddings")
        fam = docsim_family(coll, resources.embeddings, config.docsim_exact_limit, rng_seed=rng_seed)
        values.update({n: fam[n] for n in DOCSIM if _needs(config, n)})
    return {n: EstimateRecord(sr.sr_id, n, [v], rng_seed) for n, v in values.items()}


def compute_estimates(
    srs: Sequence[SystematicReview], config: EvalConfig, resources: Resources, group_size: int = 2,
    collection_level: Mapping[str, Mapping[str, EstimateRecord]] | None = None,
) -> dict[str, dict[str, EstimateRecord]]:
    names = list(config.estimators)
    if config.ablation:
        names += [a for a in ABLATIONS if a not in names]
    out: dict[str, dict[str, EstimateRecord]] = {}
    for sr in srs:
        recs = seed_estimates(sr, group_size, config, names)
        if collection_level is None:
            recs.update(collection_estimates(sr, config, resources))
        else:
            recs.update({n: v[sr.sr_id] for n, v in collection_level.items()})
        for name, rec in recs.items():
            out.setdefault(name, {})[sr.sr_id] = rec
    order = [n for n in ALL_ESTIMATORS + ABLATIONS if n in out]
    return {n: out[n] for n in order}


def means(records: Mapping[str, EstimateRecord]) -> dict[str, float]:
    return {sr: rec.mean for sr, rec in records.items()}


def correlation_table(
    estimates: Mapping[str, Mapping[str, EstimateRecord]],
    qualities: Mapping[str, Mapping[str, QualityScore]],
    names: Iterable[str],
) -> list[CorrelationResult]:
    rows = []
    for name in names:
        try:
            rows.extend(evaluate_estimator(name, means(estimates[name]), qualities))
        except EvaluationError as exc:
            log.warning("%s: %s", name, exc)
            n = len(estimates[name])
            for ranker in qualities:
                for kind in ("spearman", "pearson"):
                    rows.append(CorrelationResult(name, ranker, kind, math.nan, math.nan, n))
    return rows


def significance_matrix(
    estimates: Mapping[str, Mapping[str, EstimateRecord]],
    qualities: Mapping[str, Mapping[str, QualityScore]],
    groups: Sequence[Sequence[str]],
    names: Iterable[str],
) -> dict:
    """p-values of proposed vs each baseline on absolute per-group coefficients."""
    out: dict = {}
    ref = means(estimates[PROPOSED])
    for ranker, quality in qualities.items():
        for kind in ("spearman", "pearson"):
            ref_c = [abs(c) for c in group_coefficients(ref, quality, groups, kind)]
            for name in names:
                if name == PROPOSED:
                    continue
                other = [abs(c) for c in group_coefficients(means(estimates[name]), quality, groups, kind)]
                try:
                    p = significance_test(ref_c, other)
                except EvaluationError:
                    p = math.nan
                out.setdefault(name, {})[f"{kind}:{ranker}"] = p
    return out


@dataclass
class EvaluationReport:
    included: list[str]
    excluded: list[str]
    qualities: dict[str, dict[str, QualityScore]]
    estimates_two: dict[str, dict[str, EstimateRecord]]
    estimates_three: dict[str, dict[str, EstimateRecord]] | None
    table_two: list[CorrelationResult]
    table_three: list[CorrelationResult] | None
    ablation: list[CorrelationResult]
    significance: dict
    comparison: dict
    groups: list[tuple[str, ...]] = field(default_factory=list)

    @property
    def mean_pair_variance(self) -> float:
        recs = self.estimates_two[PROPOSED].values()
        return math.fsum(r.variance for r in recs) / len(recs)


def run_evaluation(srs: Iterable[SystematicReview], resources: Resources, config: EvalConfig | None = None) -> EvaluationReport:
    config = config or EvalConfig()
    if PROPOSED not in config.estimators:
        config = EvalConfig(**{**config.__dict__, "estimators": (PROPOSED,) + tuple(config.estimators)})
        shown = [n for n in config.estimators if n != PROPOSED]
    else:
        shown = list(config.estimators)
    kept, excluded = split_eligible(srs)
    if len(kept) < 3:
        raise EvaluationError(f"only {len(kept)} reviews have two or more relevant documents")
    log.info("evaluating %d reviews (%d excluded)", len(kept), len(excluded))
    rankers = build_rankers(config, resources)
    qualities = compute_qualities(kept, rankers)
    est2 = compute_estimates(kept, config, resources, 2)
    coll_level = {n: v for n, v in est2.items() if n not in QPP_MEASURES and n != PROPOSED and n not in ABLATIONS}
    est3 = compute_estimates(kept, config, resources, 3, coll_level) if config.three_seed else None

    shown_with_tb = shown if PROPOSED in shown else shown + [PROPOSED]
    table2 = correlation_table(est2, qualities, [n for n in shown_with_tb if n in est2])
    table3 = correlation_table(est3, qualities, [n for n in shown_with_tb if n in est3]) if est3 else None
    ablation = correlation_table(est2, qualities, [a for a in ABLATIONS if a in est2] + [PROPOSED]) if config.ablation else []

    size = min(config.group_size, len(kept))
    groups = subsample_groups([s.sr_id for s in kept], config.n_groups, size, config.master_seed)
    sig = significance_matrix(est2, qualities, groups, [n for n in shown if n in est2])
    comparison = compare_models(qualities) if len(qualities) > 1 else {}
    return EvaluationReport(
        included=[s.sr_id for s in kept],
        excluded=excluded,
        qualities=qualities,
        estimates_two=est2,
        estimates_three=est3,
        table_two=table2,
        table_three=table3,
        ablation=ablation,
        significance=sig,
        comparison=comparison,
        groups=groups,
    )


# ---------------------------------------------------------------- tables


def _cell(value: float) -> float | None:
    return None if value is None or (isinstance(value, float) and math.isnan(value)) else value


def table_rows(results: Sequence[CorrelationResult]) -> tuple[list[str], list[dict]]:
    """Rows = estimators; columns = coefficient x ranker, each with a p-value."""
    rankers = list(dict.fromkeys(r.ranker_name for r in results))
    columns = [f"{kind}:{rk}" for kind in ("spearman", "pearson") for rk in rankers]
    rows: dict[str, dict] = {}
    for r in results:
        row = rows.setdefault(r.estimator_name, {"estimator": r.estimator_name})
        row[f"{r.coefficient_type}:{r.ranker_name}"] = {"value": _cell(r.value), "p": _cell(r.p_value), "n": r.n}
    return columns, list(rows.values())


def proposed_rank(results: Sequence[CorrelationResult], names: Iterable[str] | None = None) -> dict[str, int]:
    """Rank (1 = best) of the proposed measure by absolute coefficient in each column."""
    names = set(names) if names is not None else None
    out = {}
    for kind in ("spearman", "pearson"):
        for rk in dict.fromkeys(r.ranker_name for r in results):
            col = [r for r in results if r.coefficient_type == kind and r.ranker_name == rk
                   and (names is None or r.estimator_name in names) and not math.isnan(r.value)]
            ref = next((r for r in col if r.estimator_name == PROPOSED), None)
            if ref is None:
                continue
            out[f"{kind}:{rk}"] = 1 + sum(1 for r in col if abs(r.value) > abs(ref.value))
    return out


def table_csv(results: Sequence[CorrelationResult], header_comment: str | None = None) -> str:
    columns, rows = table_rows(results)
    buf = io.StringIO()
    if header_comment:
        buf.write(f"# {header_comment}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["estimator"] + [c for col in columns for c in (col, f"{col}:p")])
    for row in rows:
        out = [row["estimator"]]
        for col in columns:
            cell = row.get(col, {})
            out += [_fmt(cell.get("value")), _fmt(cell.get("p"))]
        w.writerow(out)
    return buf.getvalue()


def _fmt(v: float | None) -> str:
    return "nan" if v is None else f"{v:.6g}"


def table_json(results: Sequence[CorrelationResult]) -> dict:
    columns, rows = table_rows(results)
    baseline_names = [r["estimator"] for r in rows if r["estimator"] not in ABLATIONS]
    return {"columns": columns, "rows": rows, "proposed_rank": proposed_rank(results, baseline_names)}
