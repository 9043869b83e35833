import json
import time

import pytest

from srquality.cli import main
from srquality.ingest import DocumentCache, list_reviews, load_review


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


TOPIC = """Topic: CD0001

Title: Ultrasound for bile duct stones

Query:
bile duct

Pids:
    11
    12
    13
    14
    15
"""


@pytest.fixture
def clef_like(tmp_path):
    topics = tmp_path / "topics"
    topics.mkdir()
    (topics / "CD0001").write_text(TOPIC)
    (tmp_path / "abs.qrels").write_text("".join(f"CD0001 0 {p} {int(p in ('11', '12', '13'))}\n" for p in ("11", "12", "13", "14", "15")))
    (tmp_path / "content.qrels").write_text("".join(f"CD0001 0 {p} {int(p in ('11', '12'))}\n" for p in ("11", "12", "13", "14", "15")))
    cache = DocumentCache(tmp_path / "cache")
    texts = {
        "11": ("Ultrasound of bile duct stones", "Ultrasound detects common bile duct stones."),
        "12": ("Bile duct imaging", "Stones in the bile duct were imaged."),
        "13": ("Liver tests", "Liver function tests for duct obstruction."),
        "14": ("Heart valves", "Valve replacement outcomes."),
        "15": ("Title only", ""),
    }
    for pmid, (title, abstract) in texts.items():
        cache.put(pmid, title, abstract, missing=not abstract)
    (tmp_path / "tok.conf").write_text("# custom\nstopwords = english\nmin_length = 2\n")
    return tmp_path


def test_ingest_offline_from_cache(capsys, clef_like):
    d = clef_like
    args = ["ingest", "--topics", d / "topics", "--abstract-qrels", d / "abs.qrels", "--content-qrels", d / "content.qrels",
            "--cache", d / "cache", "--out", d / "corpus", "--tokenizer", d / "tok.conf", "--offline"]
    code, _, _ = run(capsys, *args)
    assert code == 0
    manifest = json.loads((d / "corpus" / "manifest.json").read_text())
    assert manifest["n_reviews"] == 1
    rec = manifest["reviews"][0]
    assert rec["n_candidates"] == 4 and rec["missing"] == ["15"] and rec["n_relevant_content"] == 2
    assert manifest["tokenizer_config"] == (d / "tok.conf").read_text()
    assert (d / "corpus" / "tokenizer.conf").read_text() == (d / "tok.conf").read_text()
    first = (d / "corpus" / "CD0001.jsonl").read_bytes()
    assert run(capsys, *args)[0] == 0
    assert (d / "corpus" / "CD0001.jsonl").read_bytes() == first
    sr = load_review(d / "corpus", "CD0001")
    assert sr.relevant_ids == {"11", "12"}


def test_ingest_missing_qrels(capsys, clef_like):
    d = clef_like
    missing = d / "nope.qrels"
    code, _, err = run(capsys, "ingest", "--topics", d / "topics", "--abstract-qrels", missing,
                       "--content-qrels", d / "content.qrels", "--cache", d / "cache", "--out", d / "corpus")
    assert code == 2 and str(missing) in err


def test_ingest_unreachable_gives_partial_manifest(capsys, clef_like, tmp_path):
    d = clef_like
    code, _, _ = run(capsys, "ingest", "--topics", d / "topics", "--abstract-qrels", d / "abs.qrels",
                     "--content-qrels", d / "content.qrels", "--cache", tmp_path / "empty_cache", "--out", tmp_path / "c2", "--offline")
    assert code == 3
    assert json.loads((tmp_path / "c2" / "manifest.json").read_text())["status"] == "partial"


@pytest.fixture(scope="module")
def synth_corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("syn")
    assert main(["ingest", "--synthetic", "--per-family", "5", "--size-range", "60", "120", "--out", str(root / "corpus")]) == 0
    return root / "corpus"


def test_synthetic_ingest(synth_corpus):
    assert len(list_reviews(synth_corpus)) == 10
    assert (synth_corpus / "embeddings.bin").exists() and (synth_corpus / "background.tsv").exists()


def test_evaluate_is_reproducible(capsys, synth_corpus, tmp_path):
    args = ["evaluate", "--corpus", synth_corpus, "--k-range", 2, 4]
    assert run(capsys, *args, "--out", tmp_path / "a")[0] == 0
    assert run(capsys, *args, "--out", tmp_path / "b")[0] == 0
    for name in ("table2.csv", "table3.csv", "ablation.csv", "estimates.csv", "significance.json", "model_comparison.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name
    cfg_hash = json.loads((tmp_path / "a" / "run_config.json").read_text())["config_hash"]
    for path in (tmp_path / "a").iterdir():
        assert cfg_hash in path.read_text(), path.name


def test_evaluate_subset(capsys, synth_corpus, tmp_path):
    assert run(capsys, "evaluate", "--corpus", synth_corpus, "--estimators", "TB", "--out", tmp_path)[0] == 0
    rows = [l for l in (tmp_path / "table2.csv").read_text().splitlines()[2:] if l]
    assert [r.split(",")[0] for r in rows] == ["TB"]
    assert len(json.loads((tmp_path / "table3.json").read_text())["rows"]) == 1


def test_evaluate_fail_fast(capsys, synth_corpus, tmp_path):
    missing = tmp_path / "none.bin"
    code, _, err = run(capsys, "evaluate", "--corpus", synth_corpus, "--embeddings", missing, "--out", tmp_path / "o")
    assert code == 2 and str(missing) in err
    assert not (tmp_path / "o").exists()
    code, _, err = run(capsys, "evaluate", "--corpus", tmp_path / "absent", "--out", tmp_path / "o")
    assert code == 2


def test_evaluate_synthetic_under_a_minute(capsys, tmp_path):
    start = time.perf_counter()
    code, _, _ = run(capsys, "evaluate", "--synthetic", "--out", tmp_path)
    assert code == 0 and time.perf_counter() - start < 60
    assert json.loads((tmp_path / "summary.json").read_text())["n_included"] == 40


def relevant(corpus, sr_id):
    return sorted(load_review(corpus, sr_id).relevant_ids)


def test_estimate(capsys, synth_corpus, tmp_path):
    rel = relevant(synth_corpus, "N0000")
    code, out, _ = run(capsys, "estimate", "--corpus", synth_corpus, "--sr", "N0000", "--seeds", *rel[:2])
    rec = json.loads(out)
    assert code == 0 and rec["mode"] == "pair_mean" and rec["n_groups"] == 1
    assert rec["quality_estimate"] == -rec["mean"] and rec["variance"] == 0 and rec["percentile"] is None

    run(capsys, "evaluate", "--corpus", synth_corpus, "--estimators", "TB", "--rankers", "BM25", "--out", tmp_path)
    code, out, _ = run(capsys, "estimate", "--corpus", synth_corpus, "--sr", "N0000", "--seeds", *rel[:3],
                       "--reference", tmp_path / "reference_estimates.json")
    rec = json.loads(out)
    assert rec["mode"] == "triple_min" and rec["reference_size"] == 10 and 0 <= rec["percentile"] <= 100


def test_estimate_one_seed(capsys, synth_corpus):
    code, _, err = run(capsys, "estimate", "--corpus", synth_corpus, "--sr", "N0000", "--seeds", "N0000-00001")
    assert code == 2 and "two seed" in err


def test_estimate_unknown_seed(capsys, synth_corpus):
    code, _, err = run(capsys, "estimate", "--corpus", synth_corpus, "--sr", "N0000", "--seeds", "x", "y")
    assert code == 2 and "x" in err


def test_rank_and_report(capsys, synth_corpus, tmp_path):
    code, _, _ = run(capsys, "rank", "--corpus", synth_corpus, "--ranker", "SDR", "--sr", "B0001", "--out", tmp_path / "run.txt")
    assert code == 0
    lines = (tmp_path / "run.txt").read_text().splitlines()
    n_rel = len(relevant(synth_corpus, "B0001"))
    assert len({l.split()[0] for l in lines}) == n_rel
    run(capsys, "evaluate", "--corpus", synth_corpus, "--estimators", "TB,avgIDF", "--rankers", "BM25", "--out", tmp_path / "rep")
    code, out, _ = run(capsys, "report", "--reports", tmp_path / "rep")
    assert code == 0 and "== table2" in out and "avgIDF" in out
    assert run(capsys, "report", "--reports", tmp_path / "nothing")[0] == 2


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as err:
        main(["evaluate"])
    assert err.value.code == 2
