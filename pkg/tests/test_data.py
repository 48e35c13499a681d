import math
from collections import Counter

import pytest

from sjscc import data, tokenizer


class TestPairsIO:
    def test_roundtrip(self, tmp_path):
        pairs = [data.SentencePair("a cat sleeps", "a cat sleeps"),
                 data.SentencePair("the dog runs", "the hound runs")]
        path = tmp_path / "pairs.tsv"
        data.save_pairs(pairs, path)
        assert data.load_pairs(path).pairs == pairs

    def test_malformed_line_reports_number(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("good src\tgood tgt\nonly one column\n")
        with pytest.raises(data.ParseError, match=":2"):
            data.load_pairs(path)

    def test_is_paraphrase(self):
        assert not data.SentencePair("x y", "x y").is_paraphrase
        assert data.SentencePair("x y", "x z").is_paraphrase


class TestSplits:
    def test_disjoint_and_exhaustive(self):
        corpus = data.synth_corpus(seed=3, size=500)
        idx = [corpus.train_idx, corpus.val_idx, corpus.test_idx]
        all_idx = sorted(i for part in idx for i in part)
        assert all_idx == list(range(500))
        assert len(set(all_idx)) == 500

    def test_ratios(self):
        corpus = data.synth_corpus(seed=3, size=1000)
        assert len(corpus.train_idx) == 800
        assert len(corpus.val_idx) == 100
        assert len(corpus.test_idx) == 100

    def test_split_accessor(self):
        corpus = data.synth_corpus(seed=3, size=100)
        assert corpus.split("train")[0] == corpus.pairs[corpus.train_idx[0]]
        with pytest.raises(ValueError):
            corpus.split("bogus")

    def test_deterministic(self):
        a = data.synth_corpus(seed=9, size=200)
        b = data.synth_corpus(seed=9, size=200)
        assert a.pairs == b.pairs
        assert a.train_idx == b.train_idx


class TestSynthCorpus:
    def test_size_and_seed_variation(self):
        a = data.synth_corpus(seed=1, size=300)
        b = data.synth_corpus(seed=2, size=300)
        assert len(a.pairs) == 300
        assert a.pairs != b.pairs

    def test_sentence_length_bounds(self):
        corpus = data.synth_corpus(seed=4, size=1000)
        for p in corpus.pairs:
            for side in (p.source, p.target):
                n = len(side.split())
                assert 3 <= n <= 12

    def test_alphabet(self):
        corpus = data.synth_corpus(seed=4, size=500)
        allowed = set("abcdefghijklmnopqrstuvwxyz '.")
        for p in corpus.pairs:
            assert set(p.source) <= allowed
            assert set(p.target) <= allowed

    def test_paraphrase_fraction(self):
        corpus = data.synth_corpus(seed=4, size=2000, paraphrase_fraction=0.3)
        frac = sum(p.is_paraphrase for p in corpus.pairs) / 2000
        assert 0.15 <= frac <= 0.45

    def test_letter_entropy_band(self):
        corpus = data.synth_corpus(seed=5, size=2000)
        counts = Counter()
        for p in corpus.pairs:
            counts.update(c for c in p.source if c.isalpha() or c == " ")
        total = sum(counts.values())
        h = -sum(c / total * math.log2(c / total) for c in counts.values())
        assert 3.9 <= h <= 4.2


class TestBatches:
    def test_shapes_and_padding(self):
        corpus = data.synth_corpus(seed=6, size=100)
        vocab = tokenizer.build_vocab([p.source for p in corpus.pairs], 256)
        got = list(data.batches(corpus.split("train"), 16, vocab, l_e=24, seed=0))
        assert sum(len(b) for b in got) == len(corpus.train_idx)
        for batch in got:
            assert len(batch) <= 16
            for src, tgt in batch:
                assert len(src) == 24 and len(tgt) == 24
                assert src[0] == tokenizer.BOS
                assert tokenizer.EOS in src

    def test_order_depends_on_seed(self):
        corpus = data.synth_corpus(seed=6, size=100)
        vocab = tokenizer.build_vocab([p.source for p in corpus.pairs], 256)
        a = list(data.batches(corpus.split("train"), 16, vocab, l_e=24, seed=0))
        b = list(data.batches(corpus.split("train"), 16, vocab, l_e=24, seed=1))
        c = list(data.batches(corpus.split("train"), 16, vocab, l_e=24, seed=0))
        assert a == c
        assert a != b
