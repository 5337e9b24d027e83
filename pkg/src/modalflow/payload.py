"""Typed payloads, canonical serialization, and content hashing.

Every value that flows along a pipeline edge is a :class:`Payload`: a
modality tag plus an immutable body. Two serialized forms exist:

* the *wire form* (``to_wire``/``from_wire``): JSON-friendly dicts used by
  the remote adapter protocol, traces, and the CLI; file-backed bodies keep
  their path here.
* the *canonical form* used for content hashing: identical except that
  file-backed bodies contribute the sha256 of the file bytes instead of the
  path, so the digest follows content, not filesystem layout.

Canonical JSON is emitted with a fixed key order per modality, UTF-8, no
whitespace, and Python's shortest round-trip float repr. The content digest
is the sha256 hex of those bytes.

Coercions between modalities form a small closed table (no transitive
composition): structured vision renders to its canonical description block,
candidate scores to ``id:score`` lines sorted by descending score, and
embeddings to a comma-separated decimal list.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

from .errors import IoError, PayloadError, UnsupportedCoercionError


class Modality(str, Enum):
    TEXT = "text"
    IMAGE_REF = "image_ref"
    AUDIO_CLIP = "audio_clip"
    VIDEO_REF = "video_ref"
    EMBEDDING = "embedding"
    STRUCTURED_VISION = "structured_vision"
    CANDIDATE_SCORES = "candidate_scores"


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise PayloadError(msg)


def _finite(values, what: str) -> None:
    for v in values:
        _require(isinstance(v, (int, float)) and not isinstance(v, bool), f"{what} must be numeric")
        _require(math.isfinite(v), f"{what} must be finite")


@dataclass(frozen=True)
class Text:
    content: str
    language: str | None = None  # BCP-47 style tag, not verified against a registry

    def __post_init__(self) -> None:
        _require(isinstance(self.content, str), "text content must be a string")
        _require(self.language is None or isinstance(self.language, str), "language must be a string")


@dataclass(frozen=True)
class ImageRef:
    path: str
    media_type: str = "image/unknown"

    def __post_init__(self) -> None:
        _require(isinstance(self.path, str) and self.path != "", "image path must be a non-empty string")


@dataclass(frozen=True)
class AudioClip:
    """A clip is either file-backed (``path``) or inline (``samples``)."""

    sample_rate: int = 16000
    channels: int = 1
    path: str | None = None
    samples: tuple[int, ...] | None = None
    language: str | None = None

    def __post_init__(self) -> None:
        _require(isinstance(self.sample_rate, int) and self.sample_rate > 0, "sample_rate must be a positive int")
        _require(isinstance(self.channels, int) and self.channels >= 1, "channels must be >= 1")
        _require((self.path is None) != (self.samples is None), "exactly one of path or samples is required")
        if self.samples is not None:
            object.__setattr__(self, "samples", tuple(int(s) for s in self.samples))


@dataclass(frozen=True)
class VideoRef:
    path: str
    frame_count: int | None = None

    def __post_init__(self) -> None:
        _require(isinstance(self.path, str) and self.path != "", "video path must be a non-empty string")
        _require(
            self.frame_count is None or (isinstance(self.frame_count, int) and self.frame_count >= 0),
            "frame_count must be a non-negative int",
        )


@dataclass(frozen=True)
class Embedding:
    values: tuple[float, ...]
    dim: int = 0

    def __post_init__(self) -> None:
        vals = tuple(float(v) for v in self.values)
        _finite(vals, "embedding values")
        object.__setattr__(self, "values", vals)
        dim = self.dim or len(vals)
        _require(dim == len(vals), f"dim {dim} does not match {len(vals)} values")
        _require(dim > 0, "embedding must have at least one value")
        object.__setattr__(self, "dim", dim)


@dataclass(frozen=True)
class Detection:
    label: str
    box: tuple[float, float, float, float]  # x, y, w, h in image coordinates

    def __post_init__(self) -> None:
        _require(isinstance(self.label, str) and self.label != "", "detection label must be non-empty")
        box = tuple(float(v) for v in self.box)
        _require(len(box) == 4, "box needs exactly 4 numbers")
        _finite(box, "box coordinates")
        object.__setattr__(self, "box", box)


@dataclass(frozen=True)
class StructuredVision:
    caption: str
    tags: tuple[str, ...] = ()
    detections: tuple[Detection, ...] = ()
    confidences: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        _require(isinstance(self.caption, str), "caption must be a string")
        object.__setattr__(self, "tags", tuple(str(t) for t in self.tags))
        object.__setattr__(self, "detections", tuple(self.detections))
        for d in self.detections:
            _require(isinstance(d, Detection), "detections must be Detection instances")
        if self.confidences is not None:
            conf = tuple(float(c) for c in self.confidences)
            _finite(conf, "confidences")
            _require(len(conf) == len(self.detections), "confidences must parallel detections")
            object.__setattr__(self, "confidences", conf)


@dataclass(frozen=True)
class CandidateScores:
    candidate_ids: tuple[str, ...]
    scores: tuple[float, ...]

    def __post_init__(self) -> None:
        ids = tuple(str(i) for i in self.candidate_ids)
        _require(len(ids) > 0, "candidate set must be non-empty")
        _require(len(set(ids)) == len(ids), "candidate ids must be unique")
        scores = tuple(float(s) for s in self.scores)
        _require(len(scores) == len(ids), "scores must parallel candidate ids")
        _finite(scores, "scores")
        object.__setattr__(self, "candidate_ids", ids)
        object.__setattr__(self, "scores", scores)

    def as_mapping(self) -> dict[str, float]:
        return dict(zip(self.candidate_ids, self.scores))


_BODY_TYPES: dict[Modality, type] = {
    Modality.TEXT: Text,
    Modality.IMAGE_REF: ImageRef,
    Modality.AUDIO_CLIP: AudioClip,
    Modality.VIDEO_REF: VideoRef,
    Modality.EMBEDDING: Embedding,
    Modality.STRUCTURED_VISION: StructuredVision,
    Modality.CANDIDATE_SCORES: CandidateScores,
}


@dataclass(frozen=True)
class Payload:
    modality: Modality
    body: Any

    def __post_init__(self) -> None:
        expected = _BODY_TYPES[Modality(self.modality)]
        _require(isinstance(self.body, expected), f"{self.modality.value} payload needs a {expected.__name__} body")

    # Constructors kept short so pipeline code reads like data.
    @staticmethod
    def text(content: str, language: str | None = None) -> "Payload":
        return Payload(Modality.TEXT, Text(content, language))

    @staticmethod
    def image(path: str, media_type: str = "image/unknown") -> "Payload":
        return Payload(Modality.IMAGE_REF, ImageRef(path, media_type))

    @staticmethod
    def audio(
        path: str | None = None,
        *,
        samples: tuple[int, ...] | None = None,
        sample_rate: int = 16000,
        channels: int = 1,
        language: str | None = None,
    ) -> "Payload":
        return Payload(Modality.AUDIO_CLIP, AudioClip(sample_rate, channels, path, samples, language))

    @staticmethod
    def video(path: str, frame_count: int | None = None) -> "Payload":
        return Payload(Modality.VIDEO_REF, VideoRef(path, frame_count))

    @staticmethod
    def embedding(values, dim: int | None = None) -> "Payload":
        vals = tuple(float(v) for v in values)
        return Payload(Modality.EMBEDDING, Embedding(vals, dim or len(vals)))

    @staticmethod
    def vision(
        caption: str,
        tags=(),
        detections: tuple[Detection, ...] = (),
        confidences=None,
    ) -> "Payload":
        return Payload(Modality.STRUCTURED_VISION, StructuredVision(caption, tuple(tags), detections, confidences))

    @staticmethod
    def scores(candidate_ids, scores) -> "Payload":
        return Payload(Modality.CANDIDATE_SCORES, CandidateScores(tuple(candidate_ids), tuple(scores)))


# ---------------------------------------------------------------------------
# Serialization


def _float_list(values) -> list[float]:
    return [float(v) for v in values]


def _file_digest(path: str) -> str:
    try:
        h = hashlib.sha256()
        with open(path, "rb") as f:
            for chunk in iter(lambda: f.read(65536), b""):
                h.update(chunk)
        return h.hexdigest()
    except OSError as e:
        raise IoError(f"cannot read media file {path}: {e}") from e


def _body_dict(p: Payload, *, hash_media: bool) -> dict[str, Any]:
    b = p.body
    m = p.modality
    if m is Modality.TEXT:
        return {"modality": m.value, "content": b.content, "language": b.language}
    if m is Modality.IMAGE_REF:
        d: dict[str, Any] = {"modality": m.value}
        if hash_media:
            d["sha256"] = _file_digest(b.path)
        else:
            d["path"] = b.path
        d["media_type"] = b.media_type
        return d
    if m is Modality.AUDIO_CLIP:
        d = {"modality": m.value, "sample_rate": b.sample_rate, "channels": b.channels}
        if b.path is not None:
            if hash_media:
                d["sha256"] = _file_digest(b.path)
            else:
                d["path"] = b.path
        else:
            d["samples"] = list(b.samples)
        d["language"] = b.language
        return d
    if m is Modality.VIDEO_REF:
        d = {"modality": m.value}
        if hash_media:
            d["sha256"] = _file_digest(b.path)
        else:
            d["path"] = b.path
        d["frame_count"] = b.frame_count
        return d
    if m is Modality.EMBEDDING:
        return {"modality": m.value, "dim": b.dim, "values": _float_list(b.values)}
    if m is Modality.STRUCTURED_VISION:
        return {
            "modality": m.value,
            "caption": b.caption,
            "tags": list(b.tags),
            "detections": [{"label": d_.label, "box": _float_list(d_.box)} for d_ in b.detections],
            "confidences": None if b.confidences is None else _float_list(b.confidences),
        }
    if m is Modality.CANDIDATE_SCORES:
        return {
            "modality": m.value,
            "candidate_ids": list(b.candidate_ids),
            "scores": _float_list(b.scores),
        }
    raise PayloadError(f"unhandled modality {m}")  # pragma: no cover


def to_wire(p: Payload) -> dict[str, Any]:
    """JSON-friendly dict with file paths preserved."""
    return _body_dict(p, hash_media=False)


def from_wire(doc: dict[str, Any]) -> Payload:
    """Inverse of :func:`to_wire`; raises PayloadError on malformed docs."""
    if not isinstance(doc, dict) or "modality" not in doc:
        raise PayloadError("payload document must be an object with a modality field")
    try:
        m = Modality(doc["modality"])
    except ValueError:
        raise PayloadError(f"unknown modality: {doc.get('modality')!r}") from None
    try:
        if m is Modality.TEXT:
            return Payload.text(doc["content"], doc.get("language"))
        if m is Modality.IMAGE_REF:
            return Payload.image(doc["path"], doc.get("media_type", "image/unknown"))
        if m is Modality.AUDIO_CLIP:
            samples = doc.get("samples")
            return Payload.audio(
                doc.get("path"),
                samples=None if samples is None else tuple(samples),
                sample_rate=doc.get("sample_rate", 16000),
                channels=doc.get("channels", 1),
                language=doc.get("language"),
            )
        if m is Modality.VIDEO_REF:
            return Payload.video(doc["path"], doc.get("frame_count"))
        if m is Modality.EMBEDDING:
            return Payload.embedding(doc["values"], doc.get("dim"))
        if m is Modality.STRUCTURED_VISION:
            dets = tuple(Detection(d["label"], tuple(d["box"])) for d in doc.get("detections", []))
            return Payload.vision(doc["caption"], doc.get("tags", ()), dets, doc.get("confidences"))
        if m is Modality.CANDIDATE_SCORES:
            return Payload.scores(doc["candidate_ids"], doc["scores"])
    except KeyError as e:
        raise PayloadError(f"payload document missing field {e}") from None
    raise PayloadError(f"unhandled modality {m}")  # pragma: no cover


def canonical_json(p: Payload) -> bytes:
    """Hashing form: fixed key order, compact, file bytes hashed in place of paths."""
    doc = _body_dict(p, hash_media=True)
    return json.dumps(doc, ensure_ascii=False, separators=(",", ":"), allow_nan=False).encode("utf-8")


@dataclass(frozen=True)
class ContentDigest:
    hex: str

    def __post_init__(self) -> None:
        _require(len(self.hex) == 64 and all(c in "0123456789abcdef" for c in self.hex), "digest must be 64 lowercase hex chars")

    def __str__(self) -> str:
        return self.hex


def content_hash(p: Payload) -> ContentDigest:
    return ContentDigest(hashlib.sha256(canonical_json(p)).hexdigest())


# ---------------------------------------------------------------------------
# Coercions


def vision_description_block(v: StructuredVision) -> str:
    """Canonical text rendering of a structured vision result.

    Three labeled lines; object labels and tags joined with ", ".
    """
    objects = ", ".join(d.label for d in v.detections)
    tags = ", ".join(v.tags)
    return f"Image caption: {v.caption}\nObjects: {objects}\nTags: {tags}"


def _scores_as_text(cs: CandidateScores) -> str:
    # Descending score; ties broken by ascending candidate id.
    order = sorted(range(len(cs.candidate_ids)), key=lambda i: (-cs.scores[i], cs.candidate_ids[i]))
    return "\n".join(f"{cs.candidate_ids[i]}:{float(cs.scores[i])}" for i in order)


def _embedding_as_text(e: Embedding) -> str:
    return ", ".join(str(float(v)) for v in e.values)


# Closed table: pairs not listed do not coerce, and rules never chain.
COERCIONS: frozenset[tuple[Modality, Modality]] = frozenset(
    {
        (Modality.TEXT, Modality.TEXT),
        (Modality.STRUCTURED_VISION, Modality.TEXT),
        (Modality.CANDIDATE_SCORES, Modality.TEXT),
        (Modality.EMBEDDING, Modality.TEXT),
    }
)


def can_coerce(source: Modality, target: Modality) -> bool:
    return source == target or (source, target) in COERCIONS


def coerce(p: Payload, target: Modality) -> Payload:
    """Convert ``p`` to ``target`` using the closed rule table.

    Same-modality payloads pass through unchanged. Raises
    :class:`UnsupportedCoercionError` for any pair outside the table.
    """
    if p.modality == target:
        return p
    if (p.modality, target) not in COERCIONS:
        raise UnsupportedCoercionError(p.modality.value, target.value)
    if p.modality is Modality.STRUCTURED_VISION:
        return Payload.text(vision_description_block(p.body))
    if p.modality is Modality.CANDIDATE_SCORES:
        return Payload.text(_scores_as_text(p.body))
    if p.modality is Modality.EMBEDDING:
        return Payload.text(_embedding_as_text(p.body))
    raise UnsupportedCoercionError(p.modality.value, target.value)  # pragma: no cover
