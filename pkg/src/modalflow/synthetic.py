"""Deterministic fixture trees for offline runs, demos, and tests.

Everything here writes real files (media stubs, sidecars, manifests,
vector tables) under a caller-chosen directory, using a seeded RNG so the
same call always produces the same tree, byte for byte.

The retrieval factory plants the vectors the mock embedder will return: the
table is keyed by the content digests of exactly the payloads the built-in
retrieval pipeline produces (video ref, summary text, caption texts). With
``noise=0`` both query routes get the gold caption's own vector, so the
gold candidate scores 1.0 on both routes and must rank first.
"""

from __future__ import annotations

import json
import math
import random
import wave
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Sequence

from .mock_backend import escape_line
from .payload import Detection, Payload, StructuredVision, content_hash
from .transforms import prompt_from_vision


def write_wav(path: str | Path, *, seed: int, n_samples: int = 800) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rng = random.Random(seed)
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(16000)
        frames = bytearray()
        for _ in range(n_samples):
            frames += int(rng.randint(-32768, 32767)).to_bytes(2, "little", signed=True)
        w.writeframes(bytes(frames))
    return path


def _write_stub(path: Path, tag: str, seed: int) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(f"stub:{tag}:{seed}".encode("utf-8"))
    return path


def _unit(rng: random.Random, dim: int) -> list[float]:
    while True:
        vals = [rng.gauss(0.0, 1.0) for _ in range(dim)]
        norm = math.sqrt(sum(v * v for v in vals))
        if norm > 0.0:
            return [v / norm for v in vals]


def _perturb(base: Sequence[float], rng: random.Random, noise: float) -> list[float]:
    vals = [b + noise * rng.gauss(0.0, 1.0) for b in base]
    norm = math.sqrt(sum(v * v for v in vals))
    if norm == 0.0:
        return list(base)
    return [v / norm for v in vals]


def make_s2st_fixture(
    root: str | Path,
    utterances: Sequence[str],
    *,
    source: str = "es",
    target: str = "en",
    seed: int = 7,
) -> Path:
    """Audio files with transcript sidecars plus a manifest whose references
    match what the mock translator will emit, so a clean run scores BLEU 100."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    items = []
    for i, text in enumerate(utterances):
        wav = write_wav(root / f"utt{i}.wav", seed=seed + i)
        Path(str(wav) + ".txt").write_text(text, encoding="utf-8")
        items.append(
            {
                "id": f"u{i}",
                "audio": wav.name,
                "source": source,
                "target": target,
                "reference": f"{text} |mt:{source}->{target}",
            }
        )
    manifest = root / "manifest.json"
    manifest.write_text(
        json.dumps({"task": "s2st", "items": items}, ensure_ascii=False, indent=2), encoding="utf-8"
    )
    return manifest


@dataclass(frozen=True)
class VqaCase:
    caption: str
    question: str
    answer: str
    tags: tuple[str, ...] = ()
    objects: tuple[str, ...] = ()


def make_vqa_fixture(root: str | Path, cases: Sequence[VqaCase], *, seed: int = 11) -> dict[str, Any]:
    """Image stubs with vision sidecars, a scripted LLM fixture answering
    each rendered prompt, and the matching manifest."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    items = []
    llm_entries: dict[str, str] = {}
    script_lines: list[str] = []
    for i, case in enumerate(cases):
        image = _write_stub(root / f"img{i}.bin", f"image-{i}", seed)
        sv = StructuredVision(
            caption=case.caption,
            tags=tuple(case.tags),
            detections=tuple(Detection(label, (0.0, 0.0, 1.0, 1.0)) for label in case.objects),
        )
        sidecar = {
            "caption": sv.caption,
            "tags": list(sv.tags),
            "detections": [{"label": d.label, "box": list(d.box)} for d in sv.detections],
        }
        Path(str(image) + ".vision.json").write_text(
            json.dumps(sidecar, ensure_ascii=False, indent=2), encoding="utf-8"
        )
        prompt = prompt_from_vision(sv, case.question)
        key = escape_line(prompt)
        llm_entries[key] = case.answer
        script_lines.append(f"PROMPT: {key}")
        script_lines.append(f"REPLY: {escape_line(case.answer)}")
        items.append(
            {"id": f"v{i}", "image": image.name, "question": case.question, "answers": [case.answer]}
        )
    script = root / "llm_script.txt"
    script.write_text("\n".join(script_lines) + "\n", encoding="utf-8")
    manifest = root / "manifest.json"
    manifest.write_text(
        json.dumps({"task": "vqa", "items": items}, ensure_ascii=False, indent=2), encoding="utf-8"
    )
    return {"manifest": manifest, "llm_script": script, "llm_entries": llm_entries}


def make_retrieval_fixture(
    root: str | Path,
    *,
    n_items: int = 10,
    n_captions: int = 50,
    dim: int = 8,
    noise: float = 0.0,
    seed: int = 23,
) -> dict[str, Any]:
    """Video stubs, spoken-track sidecars, a caption pool, and the embedding
    table that routes both query paths toward each item's gold caption."""
    if n_captions < n_items:
        raise ValueError("need at least one caption per item")
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    rng = random.Random(seed)

    captions = {f"c{j:03d}": f"Caption {j} shows scene number {j}." for j in range(n_captions)}
    cap_ids = sorted(captions)
    cap_vec = {cid: _unit(rng, dim) for cid in cap_ids}

    vectors: dict[str, list[float]] = {}
    for cid in cap_ids:
        vectors[content_hash(Payload.text(captions[cid])).hex] = cap_vec[cid]

    items = []
    for i in range(n_items):
        gold = cap_ids[i]
        video = _write_stub(root / f"vid{i}.bin", f"video-{i}", seed)
        transcript = f"Spoken recap of scene number {i}."
        Path(str(video) + ".txt").write_text(transcript, encoding="utf-8")

        vectors[content_hash(Payload.video(str(video))).hex] = _perturb(cap_vec[gold], rng, noise)
        vectors[content_hash(Payload.text(transcript)).hex] = _perturb(cap_vec[gold], rng, noise)

        items.append(
            {
                "id": f"q{i}",
                "video": video.name,
                "caption_pool_ids": cap_ids,
                "gold_caption_ids": [gold],
            }
        )

    table = root / "embed_table.json"
    table.write_text(json.dumps(vectors, ensure_ascii=False, indent=2), encoding="utf-8")
    manifest = root / "manifest.json"
    manifest.write_text(
        json.dumps({"task": "retrieval", "captions": captions, "items": items}, ensure_ascii=False, indent=2),
        encoding="utf-8",
    )
    return {"manifest": manifest, "embed_table": table, "embed_vectors": vectors, "dim": dim}
