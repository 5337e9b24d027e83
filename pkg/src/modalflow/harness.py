"""Dataset manifests and the batch evaluation harness.

A manifest is a JSON file declaring a task plus its items; all media paths
inside it are resolved relative to the manifest's own directory so fixture
trees can move around freely.

Retrieval manifest::

    {"task": "retrieval",
     "captions": {"c0": "A dog runs.", "c1": "A cat sleeps."},
     "items": [{"id": "q0", "video": "clips/v0.mp4",
                "caption_pool_ids": ["c0", "c1"], "gold_caption_ids": ["c0"]}]}

Items may add ``"audio"`` for a separate spoken track; it defaults to the
video path. S2ST items carry ``audio``, ``source``, ``target`` and
``reference``; VQA items carry ``image``, ``question`` and ``answers``.

``run_task_eval`` executes the built-in pipeline for every item through the
normal executor (no shortcut scoring path) and folds the outputs into a
:class:`MetricReport`. Reports contain no timestamps or run ids on purpose:
re-running an eval over unchanged fixtures must produce byte-identical
report files.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

from .adapters import AdapterRegistry
from .errors import ConfigError
from .executor import execute
from .graph import build_graph
from .metrics import corpus_bleu, recall_at_k, vqa_accuracy
from .payload import Payload
from .pipelines import build_retrieval_config, build_s2st_config, build_vqa_config
from .transforms import rank_candidates

_ID_RE = re.compile(r"^[A-Za-z0-9_-]+$")

TASKS = ("retrieval", "s2st", "vqa")


@dataclass(frozen=True)
class RetrievalItem:
    id: str
    video: str
    audio: str
    caption_pool_ids: tuple[str, ...]
    gold_caption_ids: tuple[str, ...]


@dataclass(frozen=True)
class S2stItem:
    id: str
    audio: str
    source: str
    target: str
    reference: str


@dataclass(frozen=True)
class VqaItem:
    id: str
    image: str
    question: str
    answers: tuple[str, ...]


@dataclass(frozen=True)
class DatasetManifest:
    task: str
    items: tuple[Any, ...]
    captions: Mapping[str, str] = field(default_factory=dict)  # retrieval only


def _resolve(base: Path, rel: str) -> str:
    p = Path(rel)
    return str(p if p.is_absolute() else base / p)


def load_manifest(path: str | Path) -> DatasetManifest:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigError(f"cannot read manifest {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"manifest {path} is not valid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise ConfigError("manifest must be a JSON object")
    task = doc.get("task")
    if task not in TASKS:
        raise ConfigError(f"unknown task {task!r}; expected one of {', '.join(TASKS)}")
    raw_items = doc.get("items")
    if not isinstance(raw_items, list) or not raw_items:
        raise ConfigError("manifest needs a non-empty 'items' list")
    base = path.parent

    seen: set[str] = set()

    def item_id(raw: Mapping[str, Any]) -> str:
        iid = raw.get("id")
        if not isinstance(iid, str) or not _ID_RE.match(iid):
            raise ConfigError(f"bad item id {iid!r}")
        if iid in seen:
            raise ConfigError(f"duplicate item id {iid!r}")
        seen.add(iid)
        return iid

    if task == "retrieval":
        captions = doc.get("captions")
        if not isinstance(captions, dict) or not captions:
            raise ConfigError("retrieval manifests need a non-empty 'captions' object")
        for cid, text in captions.items():
            if not _ID_RE.match(cid):
                raise ConfigError(f"bad caption id {cid!r}")
            if not isinstance(text, str):
                raise ConfigError(f"caption {cid} must be a string")
        items = []
        for raw in raw_items:
            iid = item_id(raw)
            pool = tuple(str(c) for c in raw.get("caption_pool_ids", []))
            gold = tuple(str(c) for c in raw.get("gold_caption_ids", []))
            if not pool or not gold:
                raise ConfigError(f"item {iid}: caption_pool_ids and gold_caption_ids must be non-empty")
            unknown = [c for c in pool if c not in captions]
            if unknown:
                raise ConfigError(f"item {iid}: pool ids not in captions: {unknown}")
            stray = [c for c in gold if c not in pool]
            if stray:
                raise ConfigError(f"item {iid}: gold ids not in pool: {stray}")
            if "video" not in raw:
                raise ConfigError(f"item {iid}: missing field 'video'")
            video = _resolve(base, str(raw["video"]))
            audio = _resolve(base, str(raw["audio"])) if "audio" in raw else video
            items.append(RetrievalItem(iid, video, audio, pool, gold))
        return DatasetManifest(task, tuple(items), dict(captions))

    if task == "s2st":
        items = []
        for raw in raw_items:
            iid = item_id(raw)
            try:
                items.append(
                    S2stItem(
                        iid,
                        _resolve(base, str(raw["audio"])),
                        str(raw["source"]),
                        str(raw["target"]),
                        str(raw["reference"]),
                    )
                )
            except KeyError as e:
                raise ConfigError(f"item {iid}: missing field {e}") from None
        return DatasetManifest(task, tuple(items))

    items = []
    for raw in raw_items:
        iid = item_id(raw)
        answers = raw.get("answers")
        if not isinstance(answers, list) or not answers:
            raise ConfigError(f"item {iid}: 'answers' must be a non-empty list")
        try:
            items.append(
                VqaItem(iid, _resolve(base, str(raw["image"])), str(raw["question"]), tuple(map(str, answers)))
            )
        except KeyError as e:
            raise ConfigError(f"item {iid}: missing field {e}") from None
    return DatasetManifest(task, tuple(items))


# ---------------------------------------------------------------------------
# Reports


@dataclass(frozen=True)
class MetricReport:
    task: str
    metrics: Mapping[str, float]
    per_item: tuple[Mapping[str, Any], ...]
    config_digest: str
    item_count: int

    def to_json(self) -> dict[str, Any]:
        return {
            "task": self.task,
            "item_count": self.item_count,
            "config_digest": self.config_digest,
            "metrics": dict(self.metrics),
            "per_item": [dict(entry) for entry in self.per_item],
        }


def write_report(report: MetricReport, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    blob = json.dumps(report.to_json(), ensure_ascii=False, sort_keys=True, indent=2) + "\n"
    path.write_text(blob, encoding="utf-8")
    return path


def _config_digest(config: Mapping[str, Any]) -> str:
    blob = json.dumps(config, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# Task runners


def run_task_eval(
    manifest: DatasetManifest,
    registry: AdapterRegistry,
    *,
    max_parallel: int = 1,
    cache_dir: str | Path | None = None,
) -> MetricReport:
    """Run the built-in pipeline for every manifest item and score the lot."""
    runner = {"retrieval": _eval_retrieval, "s2st": _eval_s2st, "vqa": _eval_vqa}[manifest.task]
    return runner(manifest, registry, max_parallel, cache_dir)


def _eval_retrieval(manifest, registry, max_parallel, cache_dir) -> MetricReport:
    rankings: list[list[str]] = []
    golds: list[tuple[str, ...]] = []
    per_item = []
    digest = None
    for item in manifest.items:
        config = build_retrieval_config(item.caption_pool_ids)
        if digest is None:
            digest = _config_digest(config)
        graph = build_graph(config)
        bindings: dict[str, Payload] = {
            "video": Payload.video(item.video),
            "speech": Payload.audio(item.audio),
        }
        for cid in item.caption_pool_ids:
            bindings[f"cap_{cid}"] = Payload.text(manifest.captions[cid])
        result = execute(
            graph, bindings, registry=registry, max_parallel=max_parallel, cache_dir=cache_dir
        )
        ranking = rank_candidates(result.outputs["scores"].body)
        rankings.append(ranking)
        golds.append(item.gold_caption_ids)
        per_item.append({"id": item.id, "ranking": ranking, "gold": list(item.gold_caption_ids)})
    metrics = {
        "recall_at_1": recall_at_k(rankings, golds, 1),
        "recall_at_5": recall_at_k(rankings, golds, 5),
        "recall_at_10": recall_at_k(rankings, golds, 10),
    }
    return MetricReport("retrieval", metrics, tuple(per_item), digest, len(manifest.items))


def _eval_s2st(manifest, registry, max_parallel, cache_dir) -> MetricReport:
    hyps: list[str] = []
    refs: list[str] = []
    per_item = []
    digest = None
    for item in manifest.items:
        config = build_s2st_config(item.source, item.target)
        if digest is None:
            digest = _config_digest(config)
        graph = build_graph(config)
        result = execute(
            graph,
            {"src_audio": Payload.audio(item.audio)},
            registry=registry,
            max_parallel=max_parallel,
            cache_dir=cache_dir,
        )
        hyp = result.outputs["text_out"].body.content
        hyps.append(hyp)
        refs.append(item.reference)
        per_item.append({"id": item.id, "hypothesis": hyp, "reference": item.reference})
    metrics = {"bleu": corpus_bleu(hyps, refs)}
    return MetricReport("s2st", metrics, tuple(per_item), digest, len(manifest.items))


def _eval_vqa(manifest, registry, max_parallel, cache_dir) -> MetricReport:
    preds: list[str] = []
    golds: list[tuple[str, ...]] = []
    per_item = []
    config = build_vqa_config()
    digest = _config_digest(config)
    graph = build_graph(config)
    for item in manifest.items:
        result = execute(
            graph,
            {"image": Payload.image(item.image), "question": Payload.text(item.question)},
            registry=registry,
            max_parallel=max_parallel,
            cache_dir=cache_dir,
        )
        pred = result.outputs["answer"].body.content
        preds.append(pred)
        golds.append(item.answers)
        per_item.append({"id": item.id, "prediction": pred, "answers": list(item.answers)})
    metrics = {"accuracy": vqa_accuracy(preds, golds)}
    return MetricReport("vqa", metrics, tuple(per_item), digest, len(manifest.items))
