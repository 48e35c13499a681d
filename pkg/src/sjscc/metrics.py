"""Text-transmission metrics: BLEU, perplexity, similarity, word accuracy."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np


def _ngram_counts(tokens, n: int) -> Counter:
    return Counter(tuple(tokens[i: i + n]) for i in range(len(tokens) - n + 1))


def _words(seq):
    return seq.split() if isinstance(seq, str) else list(seq)


def bleu(candidate, reference, max_n: int = 4, smooth: bool = False) -> float:
    """Sentence BLEU: geometric mean of clipped n-gram precisions with a
    brevity penalty.  Without smoothing any zero precision zeroes the score;
    with ``smooth`` the n>=2 precisions get add-1 smoothing (useful on short
    sentences)."""
    if max_n < 1:
        raise ValueError(f"max_n must be >= 1, got {max_n}")
    candidate = _words(candidate)
    reference = _words(reference)
    if not candidate:
        return 0.0
    log_sum = 0.0
    for n in range(1, max_n + 1):
        cand = _ngram_counts(candidate, n)
        ref = _ngram_counts(reference, n)
        clipped = sum(min(c, ref[g]) for g, c in cand.items())
        total = max(len(candidate) - n + 1, 0)
        if smooth and n >= 2:
            clipped, total = clipped + 1, total + 1
        if clipped == 0 or total == 0:
            return 0.0
        log_sum += math.log(clipped / total)
    bp = 1.0
    if len(candidate) < len(reference):
        bp = math.exp(1.0 - len(reference) / len(candidate))
    return bp * math.exp(log_sum / max_n)


def perplexity(mean_cross_entropy: float) -> float:
    if mean_cross_entropy < 0:
        raise ValueError(f"cross-entropy must be >= 0, got {mean_cross_entropy}")
    return math.exp(mean_cross_entropy)


def word_accuracy(candidate, reference) -> float:
    """Position-aligned word accuracy against the reference length."""
    candidate = _words(candidate)
    reference = _words(reference)
    if not reference:
        return 1.0 if not candidate else 0.0
    hits = sum(1 for c, r in zip(candidate, reference) if c == r)
    return hits / len(reference)


def unigram_f1(candidate, reference) -> float:
    cand = Counter(_words(candidate))
    ref = Counter(_words(reference))
    overlap = sum(min(c, ref[w]) for w, c in cand.items())
    if overlap == 0:
        return 0.0
    precision = overlap / sum(cand.values())
    recall = overlap / sum(ref.values())
    return 2 * precision * recall / (precision + recall)


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.dot(u, v) / (nu * nv))


def similarity(sent_a: str, sent_b: str, model) -> float:
    """Cosine of mean-pooled encoder hidden states (the model's own
    representation serves as the semantic-similarity proxy)."""
    return cosine(model.sentence_embedding(sent_a), model.sentence_embedding(sent_b))


@dataclass
class EvalReport:
    channel: str
    pe: float
    bleu: float
    ppl: float
    similarity: float
    unigram_f1: float
    word_accuracy: float
    n_samples: int

    CSV_HEADER = "scheme,channel,pe,bleu,ppl,similarity,unigram_f1,word_accuracy,n_samples"

    def csv_row(self, scheme: str) -> str:
        return (f"{scheme},{self.channel},{self.pe:.4f},{self.bleu:.6f},"
                f"{self.ppl:.6f},{self.similarity:.6f},{self.unigram_f1:.6f},"
                f"{self.word_accuracy:.6f},{self.n_samples}")
