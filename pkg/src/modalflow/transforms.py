"""Pure transforms: templates, text assembly, and score math.

Two layers live here. The bottom layer is plain functions over plain values
(render, cosine_similarity, normalize_scores, fuse_scores, rank_candidates)
usable without any graph machinery. The top layer wraps a subset of them as
graph operations in :data:`TRANSFORM_OPS`, keyed by operation name, each with
a signature the validator checks and a function the executor calls.

Template engine rules: slots look like ``{name}``, substitution is a single
pass (a slot value containing ``{other}`` is emitted literally, never
re-expanded), there is no escaping and no nesting. Unknown slots in the
template raise :class:`MissingSlotError`; extra slot values are ignored.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

from .errors import (
    CandidateMismatchError,
    ConfigError,
    DimMismatchError,
    EmptyInputError,
    MissingSlotError,
    NegativeScoreError,
    ZeroVectorError,
)
from .ops import OperationSignature, ParamSpec, Port
from .payload import (
    CandidateScores,
    Modality,
    Payload,
    StructuredVision,
    vision_description_block,
)

_SLOT_RE = re.compile(r"\{([A-Za-z_][A-Za-z0-9_]*)\}")

# Vision description block followed by the question, primed for a short answer.
T1 = "Image caption: {caption}\nObjects: {objects}\nTags: {tags}"
T1Q = T1 + "\nQuestion: {question}\nAnswer:"

TEMPLATES: dict[str, str] = {"t1": T1, "t1q": T1Q}


def render(template: str, slots: Mapping[str, str]) -> str:
    """Single-pass slot substitution; raises MissingSlotError for unbound slots."""

    def sub(m: re.Match) -> str:
        name = m.group(1)
        if name not in slots:
            raise MissingSlotError(name)
        return str(slots[name])

    return _SLOT_RE.sub(sub, template)


def vision_slots(v: StructuredVision) -> dict[str, str]:
    return {
        "caption": v.caption,
        "objects": ", ".join(d.label for d in v.detections),
        "tags": ", ".join(v.tags),
    }


def prompt_from_vision(v: StructuredVision, question: str) -> str:
    """Render the question-answering prompt: description block + question."""
    slots = vision_slots(v)
    slots["question"] = question
    return render(T1Q, slots)


# ---------------------------------------------------------------------------
# Score math (plain floats on purpose: digests and rankings must not depend
# on BLAS rounding differences across machines)


def cosine_similarity(a: Sequence[float], b: Sequence[float]) -> float:
    if len(a) != len(b):
        raise DimMismatchError(f"vectors differ in dimension: {len(a)} vs {len(b)}")
    if len(a) == 0:
        raise EmptyInputError("cosine of empty vectors")
    dot = 0.0
    na = 0.0
    nb = 0.0
    for x, y in zip(a, b):
        x = float(x)
        y = float(y)
        dot += x * y
        na += x * x
        nb += y * y
    if na == 0.0 or nb == 0.0:
        raise ZeroVectorError("cosine undefined for zero-norm vector")
    value = dot / (math.sqrt(na) * math.sqrt(nb))
    # Clamp rounding spill so downstream normalization stays inside [0, 1].
    return max(-1.0, min(1.0, value))


_NORMALIZERS = {
    "shift_half": lambda x: (1.0 + x) / 2.0,
    "none": lambda x: x,
}


def normalize_scores(scores: CandidateScores, method: str = "shift_half") -> CandidateScores:
    """Map similarity scores into fusion range; shift_half sends [-1,1] to [0,1]."""
    try:
        f = _NORMALIZERS[method]
    except KeyError:
        raise ConfigError(f"unknown normalization method {method!r}") from None
    return CandidateScores(scores.candidate_ids, tuple(f(s) for s in scores.scores))


def fuse_scores(a: CandidateScores, b: CandidateScores) -> CandidateScores:
    """Elementwise product over a shared candidate set.

    Output is ordered by ascending candidate id, so fusion is exactly
    commutative. Inputs must be non-negative (normalize first).
    """
    if set(a.candidate_ids) != set(b.candidate_ids):
        raise CandidateMismatchError("score vectors cover different candidate sets")
    for cs in (a, b):
        if any(s < 0.0 for s in cs.scores):
            raise NegativeScoreError("fusion inputs must be non-negative; normalize scores first")
    am = a.as_mapping()
    bm = b.as_mapping()
    ids = sorted(am)
    return CandidateScores(tuple(ids), tuple(am[i] * bm[i] for i in ids))


def rank_candidates(scores: CandidateScores) -> list[str]:
    """Candidate ids by descending score; ties broken by ascending id."""
    if len(scores.candidate_ids) == 0:  # CandidateScores forbids this, belt and braces
        raise EmptyInputError("cannot rank an empty candidate set")
    pairs = sorted(zip(scores.candidate_ids, scores.scores), key=lambda p: (-p[1], p[0]))
    return [cid for cid, _ in pairs]


# ---------------------------------------------------------------------------
# Graph-facing wrappers

Inputs = Mapping[str, "Payload | list[Payload]"]


def _one(inputs: Inputs, port: str) -> Payload:
    v = inputs[port]
    assert isinstance(v, Payload)
    return v


def _many(inputs: Inputs, port: str) -> list[Payload]:
    v = inputs[port]
    return list(v) if isinstance(v, list) else [v]


def _op_concat(inputs: Inputs, params: Mapping) -> Payload:
    parts = _many(inputs, "parts")
    sep = params["separator"]
    return Payload.text(sep.join(p.body.content for p in parts))


def _op_render_template(inputs: Inputs, params: Mapping) -> Payload:
    if params["template"] is not None:
        template = params["template"]
    else:
        name = params["template_name"]
        if name not in TEMPLATES:
            raise ConfigError(f"unknown template name {name!r}")
        template = TEMPLATES[name]
    slots = {port: _one(inputs, port).body.content for port in inputs}
    return Payload.text(render(template, slots))


def _op_prompt_from_vision(inputs: Inputs, params: Mapping) -> Payload:
    vision = _one(inputs, "vision").body
    question = _one(inputs, "question").body.content
    return Payload.text(prompt_from_vision(vision, question))


def _op_score_matrix(inputs: Inputs, params: Mapping) -> Payload:
    query = _one(inputs, "query").body
    candidates = _many(inputs, "candidates")
    ids = [str(i) for i in params["candidate_ids"]]
    if len(ids) != len(candidates):
        raise CandidateMismatchError(
            f"candidate_ids lists {len(ids)} ids but {len(candidates)} candidate embeddings arrived"
        )
    sims = [cosine_similarity(query.values, c.body.values) for c in candidates]
    return Payload(
        Modality.CANDIDATE_SCORES,
        normalize_scores(CandidateScores(tuple(ids), tuple(sims)), params["normalize"]),
    )


def _op_normalize_scores(inputs: Inputs, params: Mapping) -> Payload:
    scores = _one(inputs, "scores").body
    return Payload(Modality.CANDIDATE_SCORES, normalize_scores(scores, params["method"]))


def _op_fuse_scores(inputs: Inputs, params: Mapping) -> Payload:
    a = _one(inputs, "a").body
    b = _one(inputs, "b").body
    return Payload(Modality.CANDIDATE_SCORES, fuse_scores(a, b))


@dataclass(frozen=True)
class TransformOp:
    signature: OperationSignature
    fn: Callable[[Inputs, Mapping], Payload]


def _sig(name, inputs, output, *, variadic=(), params=None) -> OperationSignature:
    return OperationSignature(
        name=name,
        inputs=inputs,
        output=output,
        variadic=frozenset(variadic),
        params=params or {},
    )


TRANSFORM_OPS: dict[str, TransformOp] = {
    "concat_text": TransformOp(
        _sig(
            "concat_text",
            (Port("parts", Modality.TEXT),),
            Modality.TEXT,
            variadic=("parts",),
            params={"separator": ParamSpec("str", default="\n")},
        ),
        _op_concat,
    ),
    "render_template": TransformOp(
        _sig(
            "render_template",
            None,  # any text in-ports; port names are slot names
            Modality.TEXT,
            params={
                "template": ParamSpec("str", default=None),
                "template_name": ParamSpec("str", default="t1"),
            },
        ),
        _op_render_template,
    ),
    "prompt_from_vision": TransformOp(
        _sig(
            "prompt_from_vision",
            (Port("vision", Modality.STRUCTURED_VISION), Port("question", Modality.TEXT)),
            Modality.TEXT,
        ),
        _op_prompt_from_vision,
    ),
    "score_matrix": TransformOp(
        _sig(
            "score_matrix",
            (Port("query", Modality.EMBEDDING), Port("candidates", Modality.EMBEDDING)),
            Modality.CANDIDATE_SCORES,
            variadic=("candidates",),
            params={
                "candidate_ids": ParamSpec("list", required=True),
                "normalize": ParamSpec("str", default="shift_half"),
            },
        ),
        _op_score_matrix,
    ),
    "normalize_scores": TransformOp(
        _sig(
            "normalize_scores",
            (Port("scores", Modality.CANDIDATE_SCORES),),
            Modality.CANDIDATE_SCORES,
            params={"method": ParamSpec("str", default="shift_half")},
        ),
        _op_normalize_scores,
    ),
    "fuse_scores": TransformOp(
        _sig(
            "fuse_scores",
            (Port("a", Modality.CANDIDATE_SCORES), Port("b", Modality.CANDIDATE_SCORES)),
            Modality.CANDIDATE_SCORES,
        ),
        _op_fuse_scores,
    ),
}
