"""Corpus loading, synthetic toy-corpus generation, and batching.

Pairs are (source, target): target == source for auto-regressive pairs,
a rule-based paraphrase for semantic pairs.  The interchange format is
two-column UTF-8 TSV.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import tokenizer

log = logging.getLogger(__name__)


class ParseError(ValueError):
    """Malformed corpus file."""


@dataclass
class SentencePair:
    source: str
    target: str

    @property
    def is_paraphrase(self) -> bool:
        return self.source != self.target


@dataclass
class Corpus:
    pairs: list[SentencePair]
    train_idx: list[int]
    val_idx: list[int]
    test_idx: list[int]

    def split(self, name: str) -> list[SentencePair]:
        parts = {"train": self.train_idx, "val": self.val_idx, "test": self.test_idx}
        if name not in parts:
            raise ValueError(f"unknown split {name!r}, expected one of {sorted(parts)}")
        return [self.pairs[i] for i in parts[name]]


def _make_splits(n: int, seed: int, ratios=(0.8, 0.1, 0.1)):
    order = np.random.default_rng(seed).permutation(n)
    n_train = int(round(n * ratios[0]))
    n_val = int(round(n * ratios[1]))
    return (sorted(order[:n_train].tolist()),
            sorted(order[n_train: n_train + n_val].tolist()),
            sorted(order[n_train + n_val:].tolist()))


def load_pairs(path, split_seed: int = 0) -> Corpus:
    """One pair per line: source TAB target.  target == source marks the
    auto-regressive kind."""
    pairs = []
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        cols = line.split("\t")
        if len(cols) != 2:
            raise ParseError(f"{path}:{lineno}: expected 2 tab-separated columns, "
                             f"got {len(cols)}")
        src = tokenizer.normalize(cols[0])
        tgt = tokenizer.normalize(cols[1])
        if not src or not tgt:
            raise ParseError(f"{path}:{lineno}: empty sentence after normalization")
        pairs.append(SentencePair(src, tgt))
    if not pairs:
        raise ParseError(f"{path}: no pairs")
    train, val, test = _make_splits(len(pairs), split_seed)
    return Corpus(pairs, train, val, test)


def save_pairs(corpus_pairs, path) -> None:
    lines = [f"{p.source}\t{p.target}" for p in corpus_pairs]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# synthetic corpus: templated subject-verb-object grammar with paraphrases

_SYN_PAIRS = [
    # adjectives
    ("big", "large"), ("small", "little"), ("quick", "fast"),
    ("happy", "cheerful"), ("old", "ancient"), ("young", "sprightly"),
    ("bright", "shiny"), ("dark", "gloomy"), ("quiet", "silent"),
    ("loud", "noisy"), ("tall", "towering"), ("brave", "fearless"),
    ("tired", "weary"), ("clever", "smart"),
    # animate nouns
    ("dog", "hound"), ("cat", "kitten"), ("man", "fellow"),
    ("woman", "lady"), ("child", "kid"), ("bird", "sparrow"),
    ("horse", "pony"), ("teacher", "instructor"), ("farmer", "rancher"),
    ("singer", "vocalist"), ("runner", "jogger"), ("painter", "artist"),
    ("driver", "motorist"), ("sailor", "mariner"),
    # objects
    ("ball", "sphere"), ("book", "novel"), ("song", "tune"),
    ("letter", "note"), ("picture", "image"), ("wagon", "cart"),
    ("apple", "fruit"), ("guitar", "banjo"), ("basket", "hamper"),
    ("kite", "glider"),
    # intransitive verbs
    ("runs", "jogs"), ("sleeps", "rests"), ("jumps", "leaps"),
    ("sings", "hums"), ("walks", "strolls"), ("waits", "lingers"),
    ("dances", "twirls"), ("laughs", "giggles"),
    # transitive verbs
    ("carries", "hauls"), ("watches", "observes"), ("finds", "discovers"),
    ("paints", "sketches"), ("holds", "grips"), ("throws", "tosses"),
    ("reads", "studies"), ("makes", "builds"),
    # places
    ("park", "garden"), ("house", "cottage"), ("street", "road"),
    ("forest", "woods"), ("market", "plaza"), ("river", "stream"),
    ("school", "academy"), ("barn", "stable"), ("beach", "shore"),
    ("valley", "meadow"),
    # adverbs
    ("slowly", "gently"), ("quickly", "swiftly"), ("quietly", "calmly"),
    ("happily", "gladly"), ("carefully", "cautiously"),
]

SYNONYMS = {}
for _a, _b in _SYN_PAIRS:
    SYNONYMS[_a] = _b
    SYNONYMS[_b] = _a

_DETS = ["the", "a"]
_ADJS = [w for p in _SYN_PAIRS[:14] for w in p]
_NOUNS = [w for p in _SYN_PAIRS[14:28] for w in p]
_OBJS = [w for p in _SYN_PAIRS[28:38] for w in p]
_VERBS_I = [w for p in _SYN_PAIRS[38:46] for w in p]
_VERBS_T = [w for p in _SYN_PAIRS[46:54] for w in p]
_PLACES = [w for p in _SYN_PAIRS[54:64] for w in p]
_ADVS = [w for p in _SYN_PAIRS[64:] for w in p]

LEXICON = sorted(set(
    _DETS + _ADJS + _NOUNS + _OBJS + _VERBS_I + _VERBS_T + _PLACES + _ADVS
    + ["in", "near", "with", "while", "and"]))

_TEMPLATES = [
    "D N VI A",
    "D J N VI in D P",
    "D N VT D J O",
    "D J N VI A near D P",
    "D J N VT D O in D P",
    "D N VT D O while D N VI",
    "D J N near D P VT D J O",
    "D N VI in D J P with D J N",
]

_SLOT_POOLS = {"D": _DETS, "J": _ADJS, "N": _NOUNS, "O": _OBJS,
               "VI": _VERBS_I, "VT": _VERBS_T, "P": _PLACES, "A": _ADVS}


def _gen_sentence(rng: np.random.Generator) -> str:
    template = _TEMPLATES[rng.integers(len(_TEMPLATES))]
    words = []
    for slot in template.split():
        pool = _SLOT_POOLS.get(slot)
        words.append(slot if pool is None else pool[rng.integers(len(pool))])
    return " ".join(words)


def _paraphrase(sentence: str, rng: np.random.Generator) -> str:
    words = sentence.split()
    out = [SYNONYMS[w] if w in SYNONYMS and rng.random() < 0.5 else w
           for w in words]
    # occasionally front a trailing "in DET PLACE" phrase
    if rng.random() < 0.3 and len(out) >= 6 and out[-3] == "in":
        out = out[-3:] + out[:-3]
    return " ".join(out)


def synth_corpus(seed: int, size: int, paraphrase_fraction: float = 0.3,
                 split_seed: int | None = None) -> Corpus:
    """Deterministic templated corpus of short sentences (4-12 words) with
    a mix of auto-regressive and paraphrase pairs."""
    if size < 10:
        raise ValueError(f"corpus size must be >= 10, got {size}")
    rng = np.random.default_rng(seed)
    pairs = []
    for _ in range(size):
        src = _gen_sentence(rng)
        if rng.random() < paraphrase_fraction:
            tgt = _paraphrase(src, rng)
        else:
            tgt = src
        pairs.append(SentencePair(src, tgt))
    train, val, test = _make_splits(size, seed if split_seed is None else split_seed)
    return Corpus(pairs, train, val, test)


# ---------------------------------------------------------------------------
# batching


def batches(pairs, batch_size: int, vocab: tokenizer.Vocabulary, l_e: int,
            seed: int):
    """Shuffled, tokenized, PAD-padded batches.  Deterministic per seed.

    Yields lists of (source_ids, target_ids) tuples, every sequence exactly
    ``l_e`` long.
    """
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    order = np.random.default_rng(seed).permutation(len(pairs))
    n_truncated = 0

    def prep(text):
        nonlocal n_truncated
        ids = tokenizer.encode(text, vocab, max_len=l_e)
        if len(tokenizer.encode(text, vocab, max_len=10 ** 9)) > l_e:
            n_truncated += 1
        return ids + [tokenizer.PAD] * (l_e - len(ids))

    batch = []
    for i in order:
        p = pairs[i]
        batch.append((prep(p.source), prep(p.target)))
        if len(batch) == batch_size:
            yield batch
            batch = []
    if batch:
        yield batch
    if n_truncated:
        log.warning("%d sentences truncated to embedding length %d", n_truncated, l_e)
