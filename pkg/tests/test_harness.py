from __future__ import annotations

import json

import pytest

from modalflow.errors import ConfigError
from modalflow.harness import load_manifest, run_task_eval, write_report
from modalflow.mock_backend import MockSettings
from modalflow.synthetic import (
    VqaCase,
    make_retrieval_fixture,
    make_s2st_fixture,
    make_vqa_fixture,
)


def write_manifest(tmp_path, doc, name="manifest.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc), encoding="utf-8")
    return path


def test_s2st_manifest_paths_resolve_relative_to_file(tmp_path):
    (tmp_path / "clips").mkdir()
    doc = {
        "task": "s2st",
        "items": [
            {
                "id": "u0",
                "audio": "clips/utt.wav",
                "source": "es",
                "target": "en",
                "reference": "hi",
            }
        ],
    }
    manifest = load_manifest(write_manifest(tmp_path, doc))
    assert manifest.task == "s2st"
    assert manifest.items[0].audio == str(tmp_path / "clips" / "utt.wav")


def test_retrieval_audio_defaults_to_video_path(tmp_path):
    doc = {
        "task": "retrieval",
        "captions": {"c0": "A dog.", "c1": "A cat."},
        "items": [
            {
                "id": "q0",
                "video": "v0.bin",
                "caption_pool_ids": ["c0", "c1"],
                "gold_caption_ids": ["c1"],
            }
        ],
    }
    manifest = load_manifest(write_manifest(tmp_path, doc))
    item = manifest.items[0]
    assert item.audio == item.video == str(tmp_path / "v0.bin")
    assert manifest.captions == {"c0": "A dog.", "c1": "A cat."}


@pytest.mark.parametrize(
    "mutate",
    [
        lambda d: d.update(task="ocr"),
        lambda d: d.update(items=[]),
        lambda d: d["items"][0].update(id="has space"),
        lambda d: d["items"].append(dict(d["items"][0])),  # duplicate id
        lambda d: d["items"][0].update(caption_pool_ids=["missing"]),
        lambda d: d["items"][0].update(gold_caption_ids=["c9"]),  # gold outside pool
        lambda d: d["items"][0].update(caption_pool_ids=[]),
        lambda d: d.update(captions={}),
        lambda d: d["items"][0].pop("video"),
    ],
)
def test_retrieval_manifest_validation(tmp_path, mutate):
    doc = {
        "task": "retrieval",
        "captions": {"c0": "A dog.", "c9": "A fox."},
        "items": [
            {
                "id": "q0",
                "video": "v.bin",
                "caption_pool_ids": ["c0"],
                "gold_caption_ids": ["c0"],
            }
        ],
    }
    mutate(doc)
    with pytest.raises(ConfigError):
        load_manifest(write_manifest(tmp_path, doc))


def test_manifest_must_be_json_object(tmp_path):
    path = tmp_path / "manifest.json"
    path.write_text("[1, 2, 3]", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_manifest(path)


def test_s2st_eval_scores_100_on_clean_fixture(no_sleep_registry_factory, tmp_path):
    manifest_path = make_s2st_fixture(
        tmp_path, ["Hola mundo esta manana.", "El gato duerme mucho hoy."]
    )
    manifest = load_manifest(manifest_path)
    report = run_task_eval(manifest, no_sleep_registry_factory())
    assert report.task == "s2st"
    assert report.metrics["bleu"] == 100.0
    assert report.item_count == 2
    assert report.per_item[0]["hypothesis"] == report.per_item[0]["reference"]


def test_vqa_eval_scores_1_on_scripted_fixture(no_sleep_registry_factory, tmp_path):
    fixture = make_vqa_fixture(
        tmp_path,
        [
            VqaCase("a red ball on grass", "What color is the ball?", "red", ("outdoor",), ("ball",)),
            VqaCase("two dogs running", "How many dogs?", "two", (), ("dog", "dog")),
        ],
    )
    manifest = load_manifest(fixture["manifest"])
    registry = no_sleep_registry_factory(MockSettings(llm_script=fixture["llm_script"]))
    report = run_task_eval(manifest, registry)
    assert report.metrics["accuracy"] == 1.0
    assert report.per_item[0]["prediction"] == "red"


def test_retrieval_eval_ranks_gold_first_on_noiseless_fixture(no_sleep_registry_factory, tmp_path):
    fixture = make_retrieval_fixture(tmp_path, n_items=4, n_captions=10)
    manifest = load_manifest(fixture["manifest"])
    registry = no_sleep_registry_factory(
        MockSettings(embed_vectors=fixture["embed_vectors"], embed_dim=fixture["dim"])
    )
    report = run_task_eval(manifest, registry)
    assert report.metrics["recall_at_1"] == 1.0
    assert report.metrics["recall_at_10"] == 1.0
    for entry in report.per_item:
        assert entry["ranking"][0] == entry["gold"][0]
        assert len(entry["ranking"]) == 10


def test_reports_are_byte_identical_across_runs(no_sleep_registry_factory, tmp_path):
    manifest_path = make_s2st_fixture(tmp_path / "fix", ["Una frase corta aqui."])
    manifest = load_manifest(manifest_path)

    first = run_task_eval(manifest, no_sleep_registry_factory())
    second = run_task_eval(manifest, no_sleep_registry_factory())
    a = write_report(first, tmp_path / "a.json")
    b = write_report(second, tmp_path / "b.json")
    assert a.read_bytes() == b.read_bytes()

    doc = json.loads(a.read_text(encoding="utf-8"))
    assert set(doc) == {"task", "item_count", "config_digest", "metrics", "per_item"}
    assert len(doc["config_digest"]) == 64
    assert a.read_text(encoding="utf-8").endswith("\n")


def test_report_config_digest_tracks_pipeline_shape(no_sleep_registry_factory, tmp_path):
    s2st = load_manifest(make_s2st_fixture(tmp_path / "s", ["Uno."]))
    vqa_fixture = make_vqa_fixture(tmp_path / "v", [VqaCase("a thing", "What?", "thing")])
    vqa = load_manifest(vqa_fixture["manifest"])
    registry = no_sleep_registry_factory(MockSettings(llm_script=vqa_fixture["llm_script"]))
    assert run_task_eval(s2st, registry).config_digest != run_task_eval(vqa, registry).config_digest
