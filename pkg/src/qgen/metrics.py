"""Corpus-level BLEU-1..4, ROUGE-L and an exact-match METEOR variant.

All matching is on lowercased tokens; METEOR here uses exact unigram
matches only (no stemming or synonym resources), so scores are
self-consistent within this package rather than comparable to external
toolkits bit-for-bit.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, asdict


class MetricError(ValueError):
    pass


def _norm(tokens: list[str]) -> list[str]:
    return [t.lower() for t in tokens]


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu_stats(pairs: list[tuple[list[str], list[str]]], n: int) -> tuple[list[int], list[int], int, int]:
    """Clipped n-gram match and total counts per order, plus corpus lengths."""
    matched = [0] * n
    total = [0] * n
    pred_len = 0
    ref_len = 0
    for pred, ref in pairs:
        pred, ref = _norm(pred), _norm(ref)
        pred_len += len(pred)
        ref_len += len(ref)
        for order in range(1, n + 1):
            pred_counts = _ngrams(pred, order)
            ref_counts = _ngrams(ref, order)
            matched[order - 1] += sum(min(c, ref_counts[g]) for g, c in pred_counts.items())
            total[order - 1] += max(len(pred) - order + 1, 0)
    return matched, total, pred_len, ref_len


def corpus_bleu(pairs: list[tuple[list[str], list[str]]], n: int = 4) -> float:
    """Corpus BLEU-n: clipped modified precisions, geometric mean, brevity
    penalty; no smoothing, so zero overlap at any order gives 0."""
    if not pairs:
        raise MetricError("corpus_bleu on empty corpus")
    matched, total, pred_len, ref_len = bleu_stats(pairs, n)
    if any(t == 0 for t in total) or any(m == 0 for m in matched):
        return 0.0
    log_precision = sum(math.log(m / t) for m, t in zip(matched, total)) / n
    bp = 1.0 if pred_len > ref_len else math.exp(1.0 - ref_len / max(pred_len, 1))
    return 100.0 * bp * math.exp(log_precision)


def _lcs_length(a: list[str], b: list[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0] * (len(b) + 1)
        for j, y in enumerate(b, start=1):
            cur[j] = prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1])
        prev = cur
    return prev[-1]


def rouge_l(pairs: list[tuple[list[str], list[str]]], beta: float = 1.2) -> float:
    """Mean LCS F-score: F = (1 + b^2) R P / (R + b^2 P), as a percentage."""
    if not pairs:
        raise MetricError("rouge_l on empty corpus")
    scores = []
    b2 = beta * beta
    for pred, ref in pairs:
        pred, ref = _norm(pred), _norm(ref)
        lcs = _lcs_length(pred, ref)
        r = lcs / len(ref) if ref else 0.0
        p = lcs / len(pred) if pred else 0.0
        f = (1 + b2) * r * p / (r + b2 * p) if (r + p) > 0 else 0.0
        scores.append(f)
    return 100.0 * sum(scores) / len(scores)


def _meteor_chunks(pred: list[str], ref: list[str]) -> tuple[int, int]:
    """Greedy longest-block matching.

    Repeatedly matches the longest contiguous common block of still-unmatched
    tokens; returns (matched token count, number of blocks).  Every common
    token eventually matches (length-1 blocks), so the match count equals the
    multiset intersection size.
    """
    pred_free = [True] * len(pred)
    ref_free = [True] * len(ref)
    matches = 0
    chunks = 0
    while True:
        best_len, best = 0, None
        for i in range(len(pred)):
            for j in range(len(ref)):
                k = 0
                while (i + k < len(pred) and j + k < len(ref)
                       and pred_free[i + k] and ref_free[j + k]
                       and pred[i + k] == ref[j + k]):
                    k += 1
                if k > best_len:
                    best_len, best = k, (i, j)
        if best_len == 0:
            break
        i, j = best
        for k in range(best_len):
            pred_free[i + k] = False
            ref_free[j + k] = False
        matches += best_len
        chunks += 1
    return matches, chunks


def meteor(pairs: list[tuple[list[str], list[str]]]) -> float:
    """Exact-match METEOR: F = 10PR/(R+9P), penalty 0.5 (chunks/matches)^3."""
    if not pairs:
        raise MetricError("meteor on empty corpus")
    scores = []
    for pred, ref in pairs:
        pred, ref = _norm(pred), _norm(ref)
        m, chunks = _meteor_chunks(pred, ref)
        if m == 0:
            scores.append(0.0)
            continue
        p = m / len(pred)
        r = m / len(ref)
        f = 10.0 * p * r / (r + 9.0 * p)
        penalty = 0.5 * (chunks / m) ** 3
        scores.append(f * (1.0 - penalty))
    return 100.0 * sum(scores) / len(scores)


@dataclass
class EvalReport:
    bleu1: float
    bleu2: float
    bleu3: float
    bleu4: float
    rougeL: float
    meteor: float
    pairs: int

    def to_dict(self) -> dict:
        return asdict(self)

    def table(self) -> str:
        rows = [("BLEU-1", self.bleu1), ("BLEU-2", self.bleu2), ("BLEU-3", self.bleu3),
                ("BLEU-4", self.bleu4), ("ROUGE-L", self.rougeL), ("METEOR", self.meteor)]
        lines = [f"pairs evaluated: {self.pairs}"]
        lines += [f"{name:<8} {value:7.2f}" for name, value in rows]
        return "\n".join(lines)


def evaluate_pairs(pairs: list[tuple[list[str], list[str]]]) -> EvalReport:
    return EvalReport(
        bleu1=corpus_bleu(pairs, 1),
        bleu2=corpus_bleu(pairs, 2),
        bleu3=corpus_bleu(pairs, 3),
        bleu4=corpus_bleu(pairs, 4),
        rougeL=rouge_l(pairs),
        meteor=meteor(pairs),
        pairs=len(pairs),
    )
