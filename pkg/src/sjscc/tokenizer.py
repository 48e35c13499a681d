"""Wordpiece tokenization: raw text <-> token-id sequences with specials.

Vocabulary training is frequency-greedy pair merging over character pieces
(continuations carry a ``##`` prefix).  Every single character seen during
training stays in the vocabulary, so in-corpus text never encodes to UNK.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path


class DataError(ValueError):
    """Empty or unusable input text/corpus."""


class VocabularyError(KeyError):
    """An id or token is not present in the vocabulary."""


SPECIAL_TOKENS = ["[PAD]", "[BOS]", "[EOS]", "[UNK]", "[SEP]", "[MASK]"]
PAD, BOS, EOS, UNK, SEP, MASK = range(6)

_KEEP = re.compile(r"[^a-z '.]+")


def normalize(text: str) -> str:
    """Lowercase, drop characters outside [a-z, space, apostrophe, period],
    collapse whitespace."""
    text = _KEEP.sub("", text.lower())
    return " ".join(text.split())


@dataclass
class Vocabulary:
    tokens: list[str]
    index: dict[str, int]

    @property
    def size(self) -> int:
        return len(self.tokens)

    def id_of(self, token: str) -> int:
        try:
            return self.index[token]
        except KeyError:
            raise VocabularyError(f"token not in vocabulary: {token!r}") from None

    def token_of(self, token_id: int) -> str:
        if not 0 <= token_id < len(self.tokens):
            raise VocabularyError(f"id out of range: {token_id} (size {len(self.tokens)})")
        return self.tokens[token_id]

    def save(self, path) -> None:
        Path(path).write_text("\n".join(self.tokens) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        if lines[:6] != SPECIAL_TOKENS:
            raise VocabularyError(f"{path}: lines 0-5 must be {SPECIAL_TOKENS}")
        if len(set(lines)) != len(lines):
            raise VocabularyError(f"{path}: duplicate tokens")
        return cls(tokens=list(lines), index={t: i for i, t in enumerate(lines)})

    @classmethod
    def from_tokens(cls, tokens: list[str]) -> "Vocabulary":
        return cls(tokens=list(tokens), index={t: i for i, t in enumerate(tokens)})


def _word_pieces(word: str) -> tuple[str, ...]:
    return tuple([word[0]] + ["##" + c for c in word[1:]])


def build_vocab(corpus_lines, target_size: int) -> Vocabulary:
    """Train a wordpiece vocabulary by greedy highest-frequency pair merging.

    The base vocabulary is specials + every single character (plain and
    ``##``-prefixed); merges add whole subword pieces until ``target_size``.
    """
    word_freq: Counter[str] = Counter()
    for line in corpus_lines:
        word_freq.update(normalize(line).split())
    if not word_freq:
        raise DataError("empty corpus: no words after normalization")

    chars = sorted({c for w in word_freq for c in w})
    base = SPECIAL_TOKENS + chars + ["##" + c for c in chars]
    if len(base) > target_size:
        raise DataError(
            f"target_size {target_size} below base vocabulary size {len(base)}")

    tokens = list(base)
    known = set(tokens)
    segmentation = {w: _word_pieces(w) for w in word_freq}

    while len(tokens) < target_size:
        pair_freq: Counter[tuple[str, str]] = Counter()
        for w, pieces in segmentation.items():
            f = word_freq[w]
            for a, b in zip(pieces, pieces[1:]):
                pair_freq[(a, b)] += f
        if not pair_freq:
            break
        best_count = max(pair_freq.values())
        a, b = min(p for p, c in pair_freq.items() if c == best_count)
        merged = a + b[2:]
        if merged not in known:
            tokens.append(merged)
            known.add(merged)
        for w, pieces in segmentation.items():
            if (a, b) not in zip(pieces, pieces[1:]):
                continue
            out = []
            i = 0
            while i < len(pieces):
                if i + 1 < len(pieces) and pieces[i] == a and pieces[i + 1] == b:
                    out.append(merged)
                    i += 2
                else:
                    out.append(pieces[i])
                    i += 1
            segmentation[w] = tuple(out)

    return Vocabulary.from_tokens(tokens)


def _encode_word(word: str, vocab: Vocabulary) -> list[int]:
    # greedy longest-match; single-character fallback guarantees coverage
    ids = []
    start = 0
    while start < len(word):
        end = len(word)
        piece_id = None
        while end > start:
            piece = word[start:end]
            if start > 0:
                piece = "##" + piece
            pid = vocab.index.get(piece)
            if pid is not None:
                piece_id = pid
                break
            end -= 1
        if piece_id is None:
            ids.append(UNK)
            start += 1
        else:
            ids.append(piece_id)
            start = end
    return ids


def encode(text: str, vocab: Vocabulary, max_len: int) -> list[int]:
    """Tokenize to ids with BOS/EOS, truncated to ``max_len`` keeping EOS."""
    norm = normalize(text)
    if not norm:
        raise DataError(f"text empty after normalization: {text!r}")
    ids = [BOS]
    for word in norm.split():
        ids.extend(_encode_word(word, vocab))
    ids.append(EOS)
    if len(ids) > max_len:
        ids = ids[: max_len - 1] + [EOS]
    return ids


def decode(ids, vocab: Vocabulary) -> str:
    """Strip specials, merge ``##`` continuations, stop at the first EOS."""
    words: list[str] = []
    for token_id in ids:
        token_id = int(token_id)
        if token_id == EOS:
            break
        if token_id in (PAD, BOS, SEP, MASK):
            continue
        piece = vocab.token_of(token_id)
        if piece.startswith("##") and words:
            words[-1] += piece[2:]
        else:
            words.append(piece)
    return " ".join(words)
