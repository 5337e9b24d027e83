"""Builders for the three task pipelines shipped with the engine.

Each builder returns a plain config document (the same JSON shape the CLI
accepts) so callers can dump it to disk, tweak it, or hand it straight to
``build_graph``. Keeping these as documents rather than pre-built graphs
makes every pipeline inspectable and replayable from its serialized form.
"""

from __future__ import annotations

from typing import Any, Iterable


def _node(node_id: str, kind: str, operation: str | None = None, params: dict | None = None,
          in_ports: list | None = None, out_ports: list | None = None) -> dict[str, Any]:
    doc: dict[str, Any] = {"id": node_id, "kind": kind}
    if operation is not None:
        doc["operation"] = operation
    if params:
        doc["params"] = params
    doc["in_ports"] = in_ports or []
    doc["out_ports"] = out_ports or []
    return doc


def _port(name: str, modality: str) -> dict[str, str]:
    return {"name": name, "modality": modality}


def _edge(src: str, dst: str) -> dict[str, str]:
    return {"from": src, "to": dst}


def build_s2st_config(source: str, target: str) -> dict[str, Any]:
    """Speech-to-speech translation: transcribe, translate, synthesize.

    Outputs both the translated text and the synthesized audio.
    """
    return {
        "version": 1,
        "nodes": [
            _node("src_audio", "input", out_ports=[_port("audio", "audio_clip")]),
            _node(
                "transcribe", "adapter", "speech.transcribe",
                in_ports=[_port("audio", "audio_clip")], out_ports=[_port("out", "text")],
            ),
            _node(
                "translate", "adapter", "language.translate",
                params={"source": source, "target": target},
                in_ports=[_port("text", "text")], out_ports=[_port("out", "text")],
            ),
            _node(
                "synthesize", "adapter", "speech.synthesize",
                params={"language": target},
                in_ports=[_port("text", "text")], out_ports=[_port("out", "audio_clip")],
            ),
            _node("text_out", "output", in_ports=[_port("text", "text")]),
            _node("audio_out", "output", in_ports=[_port("audio", "audio_clip")]),
        ],
        "edges": [
            _edge("src_audio.audio", "transcribe.audio"),
            _edge("transcribe.out", "translate.text"),
            _edge("translate.out", "synthesize.text"),
            _edge("translate.out", "text_out.text"),
            _edge("synthesize.out", "audio_out.audio"),
        ],
    }


def build_vqa_config() -> dict[str, Any]:
    """Visual question answering: describe the image, prompt the LLM with
    the description block plus the question, output the answer."""
    return {
        "version": 1,
        "nodes": [
            _node("image", "input", out_ports=[_port("image", "image_ref")]),
            _node("question", "input", out_ports=[_port("text", "text")]),
            _node(
                "describe", "adapter", "vision.describe",
                in_ports=[_port("image", "image_ref")],
                out_ports=[_port("out", "structured_vision")],
            ),
            _node(
                "prompt", "transform", "prompt_from_vision",
                in_ports=[_port("vision", "structured_vision"), _port("question", "text")],
                out_ports=[_port("out", "text")],
            ),
            _node(
                "llm", "adapter", "llm.chat",
                in_ports=[_port("prompt", "text")], out_ports=[_port("out", "text")],
            ),
            _node("answer", "output", in_ports=[_port("text", "text")]),
        ],
        "edges": [
            _edge("image.image", "describe.image"),
            _edge("describe.out", "prompt.vision"),
            _edge("question.text", "prompt.question"),
            _edge("prompt.out", "llm.prompt"),
            _edge("llm.out", "answer.text"),
        ],
    }


def build_retrieval_config(caption_ids: Iterable[str]) -> dict[str, Any]:
    """Dual-route video/text retrieval scoring for one query.

    Route one embeds the video directly. Route two transcribes the spoken
    track, summarizes it, and embeds the summary. Each route scores every
    caption embedding by cosine similarity mapped into [0, 1], and the two
    score vectors multiply into the final relevance per candidate.

    Caption embeddings arrive at the score nodes in ascending caption-id
    order, which is exactly how ``candidate_ids`` is recorded here.
    """
    ids = sorted(str(c) for c in caption_ids)
    if not ids:
        raise ValueError("retrieval needs at least one caption")
    nodes = [
        _node("video", "input", out_ports=[_port("video", "video_ref")]),
        _node("speech", "input", out_ports=[_port("audio", "audio_clip")]),
        _node(
            "embed_video", "adapter", "vision.embed_video",
            in_ports=[_port("video", "video_ref")], out_ports=[_port("out", "embedding")],
        ),
        _node(
            "transcribe", "adapter", "speech.transcribe",
            in_ports=[_port("audio", "audio_clip")], out_ports=[_port("out", "text")],
        ),
        _node(
            "summarize", "adapter", "llm.summarize",
            in_ports=[_port("text", "text")], out_ports=[_port("out", "text")],
        ),
        _node(
            "embed_summary", "adapter", "text.embed",
            in_ports=[_port("text", "text")], out_ports=[_port("out", "embedding")],
        ),
    ]
    edges = [
        _edge("video.video", "embed_video.video"),
        _edge("speech.audio", "transcribe.audio"),
        _edge("transcribe.out", "summarize.text"),
        _edge("summarize.out", "embed_summary.text"),
    ]
    score_params = {"candidate_ids": ids, "normalize": "shift_half"}
    for cid in ids:
        nodes.append(_node(f"cap_{cid}", "input", out_ports=[_port("text", "text")]))
        nodes.append(
            _node(
                f"emb_{cid}", "adapter", "text.embed",
                in_ports=[_port("text", "text")], out_ports=[_port("out", "embedding")],
            )
        )
        edges.append(_edge(f"cap_{cid}.text", f"emb_{cid}.text"))
        edges.append(_edge(f"emb_{cid}.out", "score_video.candidates"))
        edges.append(_edge(f"emb_{cid}.out", "score_text.candidates"))
    nodes.extend(
        [
            _node(
                "score_video", "transform", "score_matrix", params=dict(score_params),
                in_ports=[_port("query", "embedding"), _port("candidates", "embedding")],
                out_ports=[_port("out", "candidate_scores")],
            ),
            _node(
                "score_text", "transform", "score_matrix", params=dict(score_params),
                in_ports=[_port("query", "embedding"), _port("candidates", "embedding")],
                out_ports=[_port("out", "candidate_scores")],
            ),
            _node(
                "fuse", "transform", "fuse_scores",
                in_ports=[_port("a", "candidate_scores"), _port("b", "candidate_scores")],
                out_ports=[_port("out", "candidate_scores")],
            ),
            _node("scores", "output", in_ports=[_port("scores", "candidate_scores")]),
        ]
    )
    edges.extend(
        [
            _edge("embed_video.out", "score_video.query"),
            _edge("embed_summary.out", "score_text.query"),
            _edge("score_video.out", "fuse.a"),
            _edge("score_text.out", "fuse.b"),
            _edge("fuse.out", "scores.scores"),
        ]
    )
    return {"version": 1, "nodes": nodes, "edges": edges}
