"""Evaluation metrics: retrieval recall, corpus BLEU, and VQA accuracy.

The BLEU here is corpus-level with n-gram orders 1..4, geometric mean,
brevity penalty ``exp(1 - r/c)`` when the hypothesis stream is shorter than
the reference stream, scaled by 100, and deliberately unsmoothed: a zero
n-gram precision makes the whole score 0.0. Scoring is case-sensitive.
Tokenization separates every punctuation character from adjoining
non-punctuation with spaces and then splits on whitespace.
"""

from __future__ import annotations

import math
import string
from collections import Counter
from typing import Iterable, Sequence

from .errors import ConfigError, EmptyCorpusError, EmptyRankingError, LengthMismatchError

_PUNCT = set(string.punctuation)

MAX_NGRAM_ORDER = 4


def tokenize_for_bleu(text: str) -> list[str]:
    """Spaced-punctuation tokenization: "Hi, there!" -> Hi / , / there / !"""
    out: list[str] = []
    for ch in text:
        if ch in _PUNCT:
            out.append(f" {ch} ")
        else:
            out.append(ch)
    return "".join(out).split()


def _ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _closest_ref_len(hyp_len: int, ref_lens: Sequence[int]) -> int:
    best = ref_lens[0]
    for rl in ref_lens[1:]:
        if abs(rl - hyp_len) < abs(best - hyp_len) or (
            abs(rl - hyp_len) == abs(best - hyp_len) and rl < best
        ):
            best = rl
    return best


def corpus_bleu(hypotheses: Sequence[str], references: Sequence[str] | Sequence[Sequence[str]]) -> float:
    """Corpus BLEU in [0, 100]; one or several references per hypothesis."""
    if len(hypotheses) != len(references):
        raise LengthMismatchError(
            f"{len(hypotheses)} hypotheses vs {len(references)} reference entries"
        )
    if not hypotheses:
        raise EmptyCorpusError("BLEU needs at least one sentence pair")

    total = [0] * MAX_NGRAM_ORDER
    correct = [0] * MAX_NGRAM_ORDER
    hyp_len = 0
    ref_len = 0
    for hyp, refs in zip(hypotheses, references):
        if isinstance(refs, str):
            refs = [refs]
        if not refs:
            raise EmptyCorpusError("every hypothesis needs at least one reference")
        hyp_tokens = tokenize_for_bleu(hyp)
        ref_token_lists = [tokenize_for_bleu(r) for r in refs]
        hyp_len += len(hyp_tokens)
        ref_len += _closest_ref_len(len(hyp_tokens), [len(r) for r in ref_token_lists])
        for n in range(1, MAX_NGRAM_ORDER + 1):
            hyp_counts = _ngram_counts(hyp_tokens, n)
            if not hyp_counts:
                continue
            max_ref: Counter = Counter()
            for rt in ref_token_lists:
                for gram, count in _ngram_counts(rt, n).items():
                    if count > max_ref[gram]:
                        max_ref[gram] = count
            total[n - 1] += sum(hyp_counts.values())
            correct[n - 1] += sum(min(c, max_ref[g]) for g, c in hyp_counts.items())

    if hyp_len == 0:
        return 0.0
    log_sum = 0.0
    for n in range(MAX_NGRAM_ORDER):
        if total[n] == 0 or correct[n] == 0:
            return 0.0  # no smoothing by design
        log_sum += math.log(correct[n] / total[n])
    bp = 1.0 if hyp_len >= ref_len else math.exp(1.0 - ref_len / hyp_len)
    return 100.0 * bp * math.exp(log_sum / MAX_NGRAM_ORDER)


# ---------------------------------------------------------------------------
# Retrieval


def recall_at_k(rankings: Sequence[Sequence[str]], golds: Sequence[Iterable[str]], k: int) -> float:
    """Fraction of queries whose top-k ranking contains any gold id."""
    if k < 1:
        raise ConfigError("k must be >= 1")
    if len(rankings) != len(golds):
        raise LengthMismatchError(f"{len(rankings)} rankings vs {len(golds)} gold sets")
    if not rankings:
        raise EmptyCorpusError("recall needs at least one query")
    hits = 0
    for ranking, gold in zip(rankings, golds):
        if not ranking:
            raise EmptyRankingError("empty ranking")
        gold_set = set(gold)
        if gold_set & set(ranking[:k]):
            hits += 1
    return hits / len(rankings)


# ---------------------------------------------------------------------------
# VQA


_ARTICLES = {"a", "an", "the"}


def normalize_answer(text: str) -> str:
    """Lowercase, drop punctuation, collapse whitespace, strip a leading article."""
    lowered = text.lower()
    stripped = "".join(ch for ch in lowered if ch not in _PUNCT)
    tokens = stripped.split()
    if tokens and tokens[0] in _ARTICLES:
        tokens = tokens[1:]
    return " ".join(tokens)


def vqa_accuracy(predictions: Sequence[str], golds: Sequence[Sequence[str]]) -> float:
    """Exact match after normalization against any of the gold answers."""
    if len(predictions) != len(golds):
        raise LengthMismatchError(f"{len(predictions)} predictions vs {len(golds)} gold lists")
    if not predictions:
        raise EmptyCorpusError("VQA accuracy needs at least one item")
    hits = 0
    for pred, answers in zip(predictions, golds):
        if not answers:
            raise EmptyCorpusError("every question needs at least one gold answer")
        norm = normalize_answer(pred)
        if any(norm == normalize_answer(a) for a in answers):
            hits += 1
    return hits / len(predictions)
