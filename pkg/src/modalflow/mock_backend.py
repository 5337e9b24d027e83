"""Deterministic in-process backend for every cataloged operation.

Each operation follows a fixed rule so pipelines are testable offline and
every run of the same inputs produces byte-identical payloads:

* ``speech.transcribe``: return the exact contents of the sidecar file
  ``<audio-path>.txt``; fail with InvalidInput when the clip is inline or
  the sidecar is absent.
* ``speech.synthesize``: write a 16 kHz mono WAV whose pseudo-random
  samples are seeded by the input text's content digest (so distinct texts
  give distinct bytes), plus a sidecar transcript holding the exact input
  text. Synthesize then transcribe therefore round-trips any string.
* ``language.translate``: append ``" |mt:<source>-><target>"``.
* ``llm.complete`` / ``llm.chat``: look the prompt up in a scripted fixture
  and return its reply; otherwise reply ``"ECHO: "`` + the first 64
  characters of the prompt.
* ``llm.summarize``: return the first sentence (up to the first ``.``,
  ``!`` or ``?`` followed by whitespace or end; the whole text when no
  terminator exists).
* ``vision.describe``: parse the sidecar ``<image-path>.vision.json``.
* ``text.embed`` / ``vision.embed_image`` / ``vision.embed_video``: look the
  input payload's content digest up in a vector table; otherwise derive a
  unit-norm pseudo-random vector seeded by that digest (default dim 8).

Scripted LLM fixture format (text file)::

    # comment
    PROMPT: Question: what color?\\nAnswer:
    REPLY: blue

One PROMPT/REPLY line pair per entry; prompts and replies are stored in
single-line form with backslash then ``n`` standing for a newline (escape a
real backslash as two). Matching is exact on the single-line form.

Vector table format: JSON object mapping 64-hex content digests to float
lists.
"""

from __future__ import annotations

import json
import math
import random
import re
import tempfile
import threading
import wave
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

from .errors import AdapterError, AdapterErrorKind, ConfigError, IoError
from .payload import Detection, Modality, Payload, content_hash

_SENTENCE_RE = re.compile(r"^(.*?[.!?])(?:\s|$)", re.S)


def escape_line(text: str) -> str:
    """Single-line form used by the scripted LLM fixture."""
    return text.replace("\\", "\\\\").replace("\n", "\\n")


def unescape_line(line: str) -> str:
    out: list[str] = []
    i = 0
    while i < len(line):
        ch = line[i]
        if ch == "\\" and i + 1 < len(line):
            nxt = line[i + 1]
            if nxt == "n":
                out.append("\n")
                i += 2
                continue
            if nxt == "\\":
                out.append("\\")
                i += 2
                continue
        out.append(ch)
        i += 1
    return "".join(out)


def load_llm_script(path: str | Path) -> dict[str, str]:
    entries: dict[str, str] = {}
    pending: str | None = None
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise IoError(f"cannot read llm script {path}: {e}") from e
    for lineno, line in enumerate(lines, 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        if line.startswith("PROMPT: "):
            pending = line[len("PROMPT: "):]
        elif line.startswith("REPLY: "):
            if pending is None:
                raise ConfigError(f"{path}:{lineno}: REPLY without a preceding PROMPT")
            entries[pending] = unescape_line(line[len("REPLY: "):])
            pending = None
        else:
            raise ConfigError(f"{path}:{lineno}: expected PROMPT: or REPLY: line")
    if pending is not None:
        raise ConfigError(f"{path}: trailing PROMPT without REPLY")
    return entries


def load_embed_table(path: str | Path) -> dict[str, tuple[float, ...]]:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise IoError(f"cannot read embed table {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"embed table {path} is not valid JSON: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigError(f"embed table {path} must be a JSON object")
    return {str(k): tuple(float(v) for v in vs) for k, vs in raw.items()}


@dataclass
class MockSettings:
    """Fixture wiring for the mock backend; all fields optional."""

    llm_script: str | Path | None = None
    llm_entries: Mapping[str, str] | None = None  # single-line-form prompt -> reply
    embed_table: str | Path | None = None
    embed_vectors: Mapping[str, Sequence[float]] | None = None  # digest -> vector
    embed_dim: int = 8
    media_dir: str | Path | None = None  # where synthesized audio lands


class MockBackend:
    kind = "mock"

    def __init__(self, settings: MockSettings | None = None) -> None:
        self.settings = settings or MockSettings()
        self._llm: dict[str, str] = {}
        if self.settings.llm_script is not None:
            self._llm.update(load_llm_script(self.settings.llm_script))
        if self.settings.llm_entries:
            self._llm.update(self.settings.llm_entries)
        self._vectors: dict[str, tuple[float, ...]] = {}
        if self.settings.embed_table is not None:
            self._vectors.update(load_embed_table(self.settings.embed_table))
        if self.settings.embed_vectors:
            self._vectors.update(
                {k: tuple(float(v) for v in vs) for k, vs in self.settings.embed_vectors.items()}
            )
        self._media_dir: Path | None = Path(self.settings.media_dir) if self.settings.media_dir else None
        self._lock = threading.Lock()
        self.calls: Counter[str] = Counter()

    # One counter bump per backend call lets tests prove a cache hit made
    # zero new attempts.
    def _count(self, operation: str) -> None:
        with self._lock:
            self.calls[operation] += 1

    def call(self, operation: str, inputs: Mapping[str, Payload], params: Mapping[str, Any]) -> Payload:
        self._count(operation)
        handler = {
            "speech.transcribe": self._transcribe,
            "speech.synthesize": self._synthesize,
            "language.translate": self._translate,
            "llm.complete": self._llm_reply,
            "llm.chat": self._llm_reply,
            "llm.summarize": self._summarize,
            "vision.describe": self._describe,
            "vision.embed_image": self._embed,
            "vision.embed_video": self._embed,
            "text.embed": self._embed,
        }.get(operation)
        if handler is None:
            raise AdapterError(AdapterErrorKind.INVALID_INPUT, f"mock backend has no rule for {operation}")
        return handler(inputs, params)

    # -- speech ------------------------------------------------------------

    def _transcribe(self, inputs: Mapping[str, Payload], params: Mapping[str, Any]) -> Payload:
        clip = inputs["audio"].body
        if clip.path is None:
            raise AdapterError(
                AdapterErrorKind.INVALID_INPUT, "mock transcription needs a file-backed clip with a sidecar"
            )
        sidecar = Path(str(clip.path) + ".txt")
        if not sidecar.is_file():
            raise AdapterError(AdapterErrorKind.INVALID_INPUT, f"no transcript sidecar at {sidecar}")
        # newline="" keeps carriage returns byte-exact through the round trip
        with open(sidecar, encoding="utf-8", newline="") as fh:
            text = fh.read()
        return Payload.text(text, language=params.get("language") or clip.language)

    def media_dir(self) -> Path:
        with self._lock:
            if self._media_dir is None:
                self._media_dir = Path(tempfile.mkdtemp(prefix="modalflow-media-"))
            self._media_dir.mkdir(parents=True, exist_ok=True)
            return self._media_dir

    def _synthesize(self, inputs: Mapping[str, Payload], params: Mapping[str, Any]) -> Payload:
        text_payload = inputs["text"]
        text = text_payload.body.content
        digest = content_hash(text_payload).hex
        rng = random.Random(int(digest[:16], 16))
        n_samples = 160 * max(1, min(len(text), 4000))  # 10 ms per character, capped
        wav_path = self.media_dir() / f"tts-{digest[:16]}.wav"
        with wave.open(str(wav_path), "wb") as w:
            w.setnchannels(1)
            w.setsampwidth(2)
            w.setframerate(16000)
            frames = bytearray()
            for _ in range(n_samples):
                v = rng.randint(-32768, 32767)
                frames += int(v).to_bytes(2, "little", signed=True)
            w.writeframes(bytes(frames))
        with open(str(wav_path) + ".txt", "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        return Payload.audio(
            str(wav_path),
            sample_rate=16000,
            channels=1,
            language=params.get("language") or text_payload.body.language,
        )

    # -- text --------------------------------------------------------------

    def _translate(self, inputs: Mapping[str, Payload], params: Mapping[str, Any]) -> Payload:
        text = inputs["text"].body.content
        out = f"{text} |mt:{params['source']}->{params['target']}"
        return Payload.text(out, language=params["target"])

    def _llm_reply(self, inputs: Mapping[str, Payload], params: Mapping[str, Any]) -> Payload:
        prompt = inputs["prompt"].body.content
        key = escape_line(prompt)
        if key in self._llm:
            return Payload.text(self._llm[key])
        return Payload.text("ECHO: " + prompt[:64])

    def _summarize(self, inputs: Mapping[str, Payload], params: Mapping[str, Any]) -> Payload:
        text = inputs["text"].body.content
        m = _SENTENCE_RE.match(text)
        return Payload.text(m.group(1) if m else text, language=inputs["text"].body.language)

    # -- vision ------------------------------------------------------------

    def _describe(self, inputs: Mapping[str, Payload], params: Mapping[str, Any]) -> Payload:
        image = inputs["image"].body
        sidecar = Path(image.path + ".vision.json")
        if not sidecar.is_file():
            raise AdapterError(AdapterErrorKind.INVALID_INPUT, f"no vision sidecar at {sidecar}")
        try:
            doc = json.loads(sidecar.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise AdapterError(AdapterErrorKind.INVALID_INPUT, f"bad vision sidecar {sidecar}: {e}") from e
        try:
            detections = tuple(
                Detection(d["label"], tuple(d["box"])) for d in doc.get("detections", [])
            )
            return Payload.vision(
                doc["caption"], doc.get("tags", ()), detections, doc.get("confidences")
            )
        except (KeyError, TypeError, ValueError) as e:
            raise AdapterError(AdapterErrorKind.INVALID_INPUT, f"bad vision sidecar {sidecar}: {e}") from e

    # -- embeddings ---------------------------------------------------------

    def _embed(self, inputs: Mapping[str, Payload], params: Mapping[str, Any]) -> Payload:
        payload = next(iter(inputs.values()))
        try:
            digest = content_hash(payload).hex
        except IoError as e:
            raise AdapterError(AdapterErrorKind.INVALID_INPUT, str(e)) from e
        vec = self._vectors.get(digest)
        if vec is None:
            vec = pseudo_random_unit_vector(digest, self.settings.embed_dim)
        return Payload.embedding(vec)


def pseudo_random_unit_vector(digest_hex: str, dim: int) -> tuple[float, ...]:
    """Unit-norm vector fully determined by a content digest."""
    rng = random.Random(int(digest_hex, 16))
    while True:
        vals = [rng.gauss(0.0, 1.0) for _ in range(dim)]
        norm = math.sqrt(sum(v * v for v in vals))
        if norm > 0.0:
            return tuple(v / norm for v in vals)
