import copy
import json

import pytest

from recallscore.errors import ManifestError
from recallscore.manifest import parse_manifest, validate_manifest
from recallscore.synthetic import make_corpus


def _pointers(exc: ManifestError) -> set[str]:
    return {p for p, _ in exc.problems}


def test_toy_manifest_valid(toy_manifest_path):
    m = validate_manifest(toy_manifest_path)
    assert len(m.participants) == 2 and len(m.recalls) == 4
    assert m.story_ids == ["garden", "lighthouse"]
    assert m.analysis.embedding.kind == "stub"
    assert m.analysis.embedding.seed == 0


def test_overrides_applied(toy_manifest_path):
    m = validate_manifest(toy_manifest_path, {"segment_counts": [18, 6, 10, 6], "seed": 7})
    assert m.analysis.segment_counts == [6, 10, 18]
    assert m.analysis.embedding.seed == 7


def test_unknown_story_pointer(toy_manifest_path):
    data = json.loads(toy_manifest_path.read_text())
    data["recalls"][2]["story_id"] = "castle"
    with pytest.raises(ManifestError) as info:
        parse_manifest(data, toy_manifest_path.parent)
    assert "/recalls/2/story_id" in _pointers(info.value)
    assert "castle" in str(info.value)


def test_schema_errors_carry_pointers(toy_manifest_path):
    data = json.loads(toy_manifest_path.read_text())
    data["participants"][1]["group"] = "bilingual"
    data["recalls"][0]["condition"] = "noisy"
    with pytest.raises(ManifestError) as info:
        parse_manifest(data, toy_manifest_path.parent)
    assert {"/participants/1/group", "/recalls/0/condition"} <= _pointers(info.value)


def test_missing_file(toy_manifest_path, tmp_path):
    data = json.loads(toy_manifest_path.read_text())
    data["recalls"][1]["transcript_path"] = "recalls/nope.txt"
    with pytest.raises(ManifestError) as info:
        parse_manifest(data, toy_manifest_path.parent)
    assert "/recalls/1/transcript_path" in _pointers(info.value)


def test_language_mismatch(toy_manifest_path):
    data = json.loads(toy_manifest_path.read_text())
    data["participants"][1]["language"] = "fr"
    with pytest.raises(ManifestError) as info:
        parse_manifest(data, toy_manifest_path.parent)
    assert "/recalls/2/story_id" in _pointers(info.value)


def test_unbalanced_design(toy_manifest_path):
    data = json.loads(toy_manifest_path.read_text())
    data["recalls"][1]["condition"] = "clear"
    with pytest.raises(ManifestError) as info:
        parse_manifest(data, toy_manifest_path.parent)
    assert "/participants/0" in _pointers(info.value)
    # allowed once the balance requirement is switched off
    parse_manifest(data, toy_manifest_path.parent, {"require_balanced": False})


def test_text_too_short_for_segment_count(toy_manifest_path):
    with pytest.raises(ManifestError) as info:
        validate_manifest(toy_manifest_path, {"segment_counts": [80]})
    assert any(p.startswith("/stories/") for p in _pointers(info.value))


def test_duplicates(toy_manifest_path):
    data = json.loads(toy_manifest_path.read_text())
    data["participants"].append(copy.deepcopy(data["participants"][0]))
    data["recalls"].append(copy.deepcopy(data["recalls"][0]))
    with pytest.raises(ManifestError) as info:
        parse_manifest(data, toy_manifest_path.parent)
    assert "/participants/2/participant_id" in _pointers(info.value)
    assert "/recalls/4" in _pointers(info.value)


def test_chance_needs_two_recalls(toy_manifest_path):
    data = json.loads(toy_manifest_path.read_text())
    data["recalls"] = [r for r in data["recalls"] if r["participant_id"] == "p01"][:1]
    data["participants"] = data["participants"][:1]
    with pytest.raises(ManifestError):
        parse_manifest(data, toy_manifest_path.parent, {"require_balanced": False})
    parse_manifest(data, toy_manifest_path.parent, {"require_balanced": False, "chance": False})


def test_study_sized_layout_valid(tmp_path):
    # 55 listeners x 6 stories, the layout of a full listening study
    corpus = make_corpus(seed=1, n_stories=6, n_participants=55, story_words=200)
    path = corpus.write(tmp_path / "study", segment_counts=[6, 10, 14, 18])
    m = validate_manifest(path)
    assert len(m.participants) == 55 and len(m.recalls) == 330
    assert sum(p.group == "english" for p in m.participants.values()) == 28


def test_inline_texts():
    corpus = make_corpus(seed=0)
    m = parse_manifest(corpus.manifest(seed=3))
    assert len(m.recalls) == 24 and m.analysis.seed == 3


def test_unreadable_manifest(tmp_path):
    bad = tmp_path / "m.json"
    bad.write_text("{not json")
    with pytest.raises(ManifestError):
        validate_manifest(bad)
    with pytest.raises(ManifestError):
        validate_manifest(tmp_path / "missing.json")
