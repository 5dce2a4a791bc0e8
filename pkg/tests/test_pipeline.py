import csv
import itertools
import json
import shutil

import numpy as np
import pytest

from recallscore.errors import ProviderUnavailable
from recallscore.manifest import parse_manifest, validate_manifest
from recallscore.matrix import SimilarityMatrix
from recallscore.metrics import SCALAR_METRICS, RecallMetrics, average_metrics, compute_metrics
from recallscore.pipeline import REPORT_NAME, run
from recallscore.plotdata import emit_plot_data
from recallscore.rater import ScriptedChatProvider
from recallscore.report import diff_reports, load_report
from recallscore.segmenter import segment

from conftest import GOLDEN_DIR


def _files(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture(scope="module")
def toy_run(tmp_path_factory):
    from conftest import TOY_MANIFEST

    out = tmp_path_factory.mktemp("toy")
    report = run(validate_manifest(TOY_MANIFEST), out)
    return out, report


def test_golden_report(toy_run):
    out, report = toy_run
    golden = load_report(GOLDEN_DIR / "toy_report.json")
    assert diff_reports(golden, report, tolerance=1e-12) == []


def test_report_shape(toy_run):
    _, report = toy_run
    assert report["schema_version"] == 1
    assert len(report["results"]) == 4
    assert {e["participant_id"] for e in report["results"]} == {"p01", "p02"}
    assert report["config"]["segment_counts"] == [10]
    for e in report["results"]:
        assert e["chance"] is not None and len(e["chance_matrices"]) == 1
    assert report["isc"] is not None
    # toy study: one listener per story/condition cell in each group
    for e in report["isc"]["per_story"]:
        assert e["own_count"] == 0 and e["other_count"] == 1 and e["own"] is None


def test_determinism_byte_identical(toy_manifest_path, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run(validate_manifest(toy_manifest_path), a)
    run(validate_manifest(toy_manifest_path), b)
    fa, fb = _files(a), _files(b)
    assert fa.keys() == fb.keys() and fa == fb


def test_metrics_recomputable_from_dumps(toy_run):
    out, report = toy_run
    for e in report["results"]:
        matrix = SimilarityMatrix.load(out / e["matrix"])
        fresh = json.loads(json.dumps(compute_metrics(matrix).to_dict()))
        stored = e["metrics"]
        for name in SCALAR_METRICS:
            assert stored[name] == pytest.approx(fresh[name], abs=1e-13)
        chance = average_metrics(compute_metrics(SimilarityMatrix.load(out / p)) for p in e["chance_matrices"])
        assert e["chance"]["max_recall"] == pytest.approx(chance.max_recall, abs=1e-13)


def test_matrix_matches_direct_scoring(toy_run, toy_manifest_path, stub_embedder):
    out, report = toy_run
    m = validate_manifest(toy_manifest_path)
    e = next(x for x in report["results"] if x["participant_id"] == "p02" and x["story_id"] == "garden")
    story = segment(m.story_text("garden", "de"), 10, 0.2).segments
    recall = segment(next(r.transcript for r in m.recalls if r.participant_id == "p02" and r.story_id == "garden"),
                     10, 0.2).segments
    from recallscore.matrix import build_matrix

    direct = build_matrix(stub_embedder.embed_batch(story), stub_embedder.embed_batch(recall))
    dumped = SimilarityMatrix.load(out / e["matrix"])
    assert np.allclose(direct.values, dumped.values, rtol=0, atol=1e-14)


def test_condition_averages_consistent(toy_run):
    _, report = toy_run
    for row in report["condition_averages"]:
        entries = [
            e for e in report["results"]
            if e["participant_id"] == row["participant_id"] and e["condition"] == row["condition"]
            and e["mode"] == row["mode"] and e["segment_count"] == row["segment_count"]
        ]
        assert sorted(e["story_id"] for e in entries) == row["stories"]
        for name in SCALAR_METRICS:
            assert row["metrics"][name] == pytest.approx(np.mean([e["metrics"][name] for e in entries]), abs=1e-13)


def test_group_summary_consistent(toy_run):
    _, report = toy_run
    rows = [r for r in report["group_summary"] if r["level"] == "group" and r["source"] == "metrics"
            and r["metric"] == "max_recall"]
    assert rows
    for r in rows:
        values = [a["metrics"]["max_recall"] for a in report["condition_averages"]
                  if a["group"] == r["label"] and a["condition"] == r["condition"]]
        assert r["count"] == len(values) and r["mean"] == pytest.approx(np.mean(values), abs=1e-13)


def test_sweep_and_independence(toy_manifest_path, tmp_path):
    sweep = run(validate_manifest(toy_manifest_path, {"segment_counts": [6, 10, 14, 18]}), tmp_path / "sweep")
    single = run(validate_manifest(toy_manifest_path, {"segment_counts": [14]}), tmp_path / "single")
    for n in (6, 10, 14, 18):
        entries = [e for e in sweep["results"] if e["segment_count"] == n]
        assert len(entries) == 4
        for e in entries:
            assert all(e["metrics"][k] is not None for k in SCALAR_METRICS)
            assert len(e["metrics"]["max_indices"]) == n
    a = [e for e in sweep["results"] if e["segment_count"] == 14]
    b = single["results"]
    assert diff_reports({"schema_version": 1, "r": a}, {"schema_version": 1, "r": b}) == []


def test_warm_cache_same_report(toy_manifest_path, tmp_path):
    providers = {"embedding": {"kind": "stub", "dim": 768, "cache_dir": str(tmp_path / "cache")}}
    cold = run(validate_manifest(toy_manifest_path, {"providers": providers}), tmp_path / "cold")
    assert list((tmp_path / "cache").rglob("*.npy"))
    warm = run(validate_manifest(toy_manifest_path, {"providers": providers}), tmp_path / "warm")
    plain = run(validate_manifest(toy_manifest_path), tmp_path / "plain")
    assert diff_reports(cold, warm) == []
    assert diff_reports(cold, plain) == []


def test_seed_changes_report(toy_manifest_path, tmp_path):
    a = run(validate_manifest(toy_manifest_path), tmp_path / "a")
    b = run(validate_manifest(toy_manifest_path, {"seed": 1}), tmp_path / "b")
    assert diff_reports(a, a) == []
    assert diff_reports(a, b)


def test_rating_mode(toy_manifest_path, tmp_path):
    provider = ScriptedChatProvider(lambda prompt, k: str(len(prompt) % 101))
    m = validate_manifest(toy_manifest_path, {"mode": "rating", "segment_counts": [6]})
    report = run(m, tmp_path, chat_provider=provider)
    assert report["isc"] is None
    assert provider.calls == 4 * 36 * 3
    for e in report["results"]:
        assert e["mode"] == "rating" and e["chance"] is None
        assert all(e["metrics"][k] is not None for k in SCALAR_METRICS)


def test_both_modes_with_rating_chance(toy_manifest_path, tmp_path):
    provider = ScriptedChatProvider(["50"])
    m = validate_manifest(toy_manifest_path, {"mode": "both", "segment_counts": [6], "rating_chance": True,
                                              "diagonal_only": True})
    report = run(m, tmp_path, chat_provider=provider)
    modes = sorted({e["mode"] for e in report["results"]})
    assert modes == ["embedding", "rating"]
    rating = [e for e in report["results"] if e["mode"] == "rating"]
    assert provider.calls == (4 + 4) * 6 * 3
    for e in rating:
        assert e["metrics"]["max_recall"] is None and e["metrics"]["original_order"] == 0.5
        assert e["chance"]["original_order"] == 0.5


def test_partial_results_on_failure(toy_manifest_path, tmp_path):
    counter = itertools.count()

    def script(prompt, k):
        # the first recall (36 cells x 3 replicates) completes, then the endpoint dies
        if next(counter) >= 108:
            raise ProviderUnavailable("endpoint down")
        return "40"

    m = validate_manifest(toy_manifest_path, {"mode": "rating", "segment_counts": [6], "workers": 1})
    with pytest.raises(ProviderUnavailable):
        run(m, tmp_path, chat_provider=ScriptedChatProvider(script))
    partial = load_report(tmp_path / "partial" / "results.json")
    resume = json.loads((tmp_path / "partial" / "RESUME.json").read_text())
    assert "ProviderUnavailable" in resume["error"]
    assert len(partial["results"]) == len(resume["completed_units"]) == 1
    assert resume["completed_units"][0] == ["rating", 6, "p01", "garden"]
    assert not (tmp_path / REPORT_NAME).exists()
    # a successful rerun clears the partial directory
    run(m, tmp_path, chat_provider=ScriptedChatProvider(["40"]))
    assert not (tmp_path / "partial").exists()


def test_isc_dumps(toy_manifest_path, tmp_path):
    report = run(validate_manifest(toy_manifest_path, {"isc_dumps": True}), tmp_path)
    paths = [p["matrix"] for e in report["isc"]["per_story"] for p in e["pairs"]]
    assert len(paths) == 4
    for e in report["isc"]["per_story"]:
        pair = e["pairs"][0]
        matrix = SimilarityMatrix.load(tmp_path / pair["matrix"])
        assert np.mean(np.diag(matrix.values)) == pytest.approx(pair["original_order"], abs=1e-13)


def test_emit_plot_data(toy_manifest_path, tmp_path):
    counts = [6, 10]
    report = run(validate_manifest(toy_manifest_path, {"segment_counts": counts}), tmp_path / "run")
    files = emit_plot_data(report, tmp_path / "plots", tmp_path / "run")
    for n in counts:
        assert len(list((tmp_path / "plots" / "embedding" / f"n{n}").glob("mean_*.json"))) == 4
        assert len(list((tmp_path / "plots" / "embedding" / f"n{n}").glob("*.png"))) == 5
    with (tmp_path / "plots" / "metrics_embedding.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 4 * 8 * len(counts)
    assert set(rows[0]) == {"participant", "group", "story", "condition", "segment_count", "metric", "value"}
    assert (tmp_path / "plots" / "isc.csv").exists()
    assert all(p.exists() for p in files)


def test_synthetic_corpus_run(tmp_path):
    from recallscore.synthetic import make_corpus

    corpus = make_corpus(seed=0, n_participants=8)
    report = run(parse_manifest(corpus.manifest(segment_counts=[10])), tmp_path)
    assert len(report["results"]) == 48
    for e in report["isc"]["per_story"]:
        # four listeners per story/condition cell, two from each group
        assert (e["own_count"], e["other_count"]) == (1, 2)
        assert e["own"] is not None and e["other"] is not None
