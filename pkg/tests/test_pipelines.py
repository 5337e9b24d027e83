from __future__ import annotations

import json

from modalflow.executor import NodeState, execute
from modalflow.graph import build_graph, topological_order, validate_types
from modalflow.payload import Modality, Payload
from modalflow.pipelines import build_retrieval_config, build_s2st_config, build_vqa_config


def test_builtin_configs_validate_cleanly():
    for config in (
        build_s2st_config("es", "en"),
        build_vqa_config(),
        build_retrieval_config(["c1", "c0"]),
    ):
        json.dumps(config)  # plain documents, directly serializable
        graph = build_graph(config)
        assert validate_types(graph) == []


def test_s2st_order_and_audio_round_trip(mock_registry, tmp_path):
    wav = tmp_path / "in.wav"
    wav.write_bytes(b"RIFFfake")
    (tmp_path / "in.wav.txt").write_text("la reunion empieza pronto", encoding="utf-8")

    graph = build_graph(build_s2st_config("es", "en"))
    order = topological_order(graph)
    assert order.index("transcribe") < order.index("translate") < order.index("synthesize")

    result = execute(graph, {"src_audio": Payload.audio(path=str(wav))}, registry=mock_registry)
    text = result.outputs["text_out"]
    assert text.body.content == "la reunion empieza pronto |mt:es->en"
    clip = result.outputs["audio_out"]
    assert clip.modality is Modality.AUDIO_CLIP
    assert clip.body.language == "en"
    # the synthesized track transcribes back to exactly the translated text
    back = mock_registry.invoke("speech.transcribe", {"audio": clip})
    assert back.body.content == text.body.content


def test_vqa_pipeline_renders_question_prompt(mock_registry, tmp_path):
    img = tmp_path / "scene.png"
    img.write_bytes(b"\x89PNGfake")
    (tmp_path / "scene.png.vision.json").write_text(
        json.dumps(
            {
                "caption": "children playing football",
                "tags": ["outdoor", "sport"],
                "detections": [
                    {"label": "child", "box": [0, 0, 5, 5]},
                    {"label": "ball", "box": [5, 5, 8, 8]},
                ],
            }
        ),
        encoding="utf-8",
    )
    graph = build_graph(build_vqa_config())
    result = execute(
        graph,
        {"image": Payload.image(str(img)), "question": Payload.text("What sport is this?")},
        registry=mock_registry,
    )
    answer = result.outputs["answer"].body.content
    # the echo fallback exposes the head of the prompt the LLM received
    assert answer.startswith("ECHO: Image caption: children playing football")
    states = result.states()
    assert all(s is NodeState.SUCCEEDED for s in states.values())


def test_retrieval_config_uses_sorted_candidate_ids():
    config = build_retrieval_config(["c2", "c0", "c1"])
    nodes = {n["id"]: n for n in config["nodes"]}
    assert nodes["score_video"]["params"]["candidate_ids"] == ["c0", "c1", "c2"]
    assert nodes["score_text"]["params"]["candidate_ids"] == ["c0", "c1", "c2"]
    for cid in ("c0", "c1", "c2"):
        assert nodes[f"cap_{cid}"]["kind"] == "input"
        assert nodes[f"emb_{cid}"]["operation"] == "text.embed"
    # embeddings reach the scorers on the variadic port in caption-id order
    cand_edges = [
        e["from"] for e in config["edges"] if e["to"] == "score_video.candidates"
    ]
    assert cand_edges == ["emb_c0.out", "emb_c1.out", "emb_c2.out"]


def test_retrieval_pipeline_fuses_both_query_routes(mock_registry, tmp_path):
    video = tmp_path / "clip.bin"
    video.write_bytes(b"video-bytes")
    (tmp_path / "clip.bin.txt").write_text("a short recap", encoding="utf-8")
    config = build_retrieval_config(["c0", "c1"])
    graph = build_graph(config)
    bindings = {
        "video": Payload.video(str(video)),
        "speech": Payload.audio(path=str(video)),
        "cap_c0": Payload.text("first caption"),
        "cap_c1": Payload.text("second caption"),
    }
    result = execute(graph, bindings, registry=mock_registry)
    scores = result.outputs["scores"].body
    assert scores.candidate_ids == ("c0", "c1")
    assert all(s >= 0.0 for s in scores.scores)  # shift-half then product
