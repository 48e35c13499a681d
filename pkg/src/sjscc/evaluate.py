"""End-to-end transmission evaluation: single sentences and P_e sweeps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import baseline, channels, metrics, tokenizer
from .model import JSCCModel


@dataclass
class SweepSpec:
    channel_kinds: tuple[str, ...]
    pe_grid: tuple[float, ...]
    n_samples: int
    seed: int
    checkpoint: str | None = None

    def __post_init__(self):
        if any(not 0.0 <= p <= 1.0 for p in self.pe_grid):
            raise ValueError(f"pe grid values must be in [0,1]: {self.pe_grid}")
        if any(b <= a for a, b in zip(self.pe_grid, self.pe_grid[1:])):
            raise ValueError(f"pe grid must be strictly increasing: {self.pe_grid}")
        if self.n_samples < 1:
            raise ValueError(f"sample count must be >= 1, got {self.n_samples}")


def point_seed(seed: int, kind: str, pe: float) -> int:
    """Independent per-point seed so sweep points can run in any order."""
    kind_key = int.from_bytes(kind.encode("utf-8"), "little")
    return int(np.random.default_rng((seed, kind_key, int(pe * 10 ** 6)))
               .integers(2 ** 62))


def transmit(model: JSCCModel, vocab, text: str, ccfg: channels.ChannelConfig,
             rng=None) -> str:
    ids = tokenizer.encode(text, vocab, model.cfg.l_e)
    _, hard = model.encode_semantic(ids)
    received = channels.apply(hard, ccfg, rng=rng)
    out_ids = model.generate(received.symbols)
    return tokenizer.decode(out_ids, vocab)


def _score(out_text: str, ref_text: str, model, vocab) -> dict:
    cand = out_text.split()
    ref = ref_text.split()
    return {
        "bleu": metrics.bleu(cand, ref),
        "similarity": metrics.cosine(
            model.sentence_embedding(out_text, vocab) if out_text else
            np.zeros(model.cfg.n_emb),
            model.sentence_embedding(ref_text, vocab)),
        "unigram_f1": metrics.unigram_f1(cand, ref),
        "word_accuracy": metrics.word_accuracy(cand, ref),
    }


def evaluate_point(model: JSCCModel, vocab, sentences, kind: str, pe: float,
                   seed: int) -> metrics.EvalReport:
    """Transmit each sentence once, scoring against the (normalized) source;
    PPL comes from teacher-forced loss through the same channel statistics."""
    rng = np.random.default_rng(point_seed(seed, kind, pe))
    ccfg = channels.ChannelConfig(kind, pe, seed=0)
    sums = {"bleu": 0.0, "similarity": 0.0, "unigram_f1": 0.0, "word_accuracy": 0.0}
    loss_sum = 0.0
    for text in sentences:
        ref = tokenizer.normalize(text)
        out = transmit(model, vocab, ref, ccfg, rng=rng)
        for k, v in _score(out, ref, model, vocab).items():
            sums[k] += v
        ids = tokenizer.encode(ref, vocab, model.cfg.l_e)
        loss_sum += model.forward_teacher_forced(
            ids, ids, ccfg if pe > 0 else None, rng=rng).item()
    n = len(sentences)
    return metrics.EvalReport(
        channel=kind, pe=pe,
        bleu=sums["bleu"] / n,
        ppl=metrics.perplexity(loss_sum / n),
        similarity=sums["similarity"] / n,
        unigram_f1=sums["unigram_f1"] / n,
        word_accuracy=sums["word_accuracy"] / n,
        n_samples=n)


def sweep(model: JSCCModel, vocab, sentences, spec: SweepSpec) -> list[metrics.EvalReport]:
    sentences = list(sentences)[: spec.n_samples]
    return [evaluate_point(model, vocab, sentences, kind, pe, spec.seed)
            for kind in spec.channel_kinds for pe in spec.pe_grid]


def baseline_point(code: baseline.HuffmanCode, sentences, kind: str, pe: float,
                   seed: int, model: JSCCModel | None = None, vocab=None,
                   conv_cfg: baseline.ConvCodeConfig | None = None) -> metrics.EvalReport:
    """Classical-chain counterpart of ``evaluate_point`` on the same CSV
    schema.  PPL is undefined for the baseline (reported as nan); similarity
    uses the trained model's embedding when one is supplied."""
    rng = np.random.default_rng(point_seed(seed, kind, pe))
    ccfg = channels.ChannelConfig(kind, pe, seed=0)
    conv_cfg = conv_cfg or baseline.ConvCodeConfig()
    sums = {"bleu": 0.0, "similarity": 0.0, "unigram_f1": 0.0, "word_accuracy": 0.0}
    n_sim = 0
    for text in sentences:
        ref = baseline.normalize_27(tokenizer.normalize(text))
        out = baseline.baseline_transmit(ref, ccfg, code, conv_cfg, rng=rng)
        cand = out.split()
        refw = ref.split()
        sums["bleu"] += metrics.bleu(cand, refw)
        sums["unigram_f1"] += metrics.unigram_f1(cand, refw)
        sums["word_accuracy"] += metrics.word_accuracy(cand, refw)
        if model is not None and vocab is not None and out.strip():
            sums["similarity"] += metrics.similarity(out, ref, _Bound(model, vocab))
            n_sim += 1
    n = len(sentences)
    return metrics.EvalReport(
        channel=kind, pe=pe,
        bleu=sums["bleu"] / n,
        ppl=float("nan"),
        similarity=sums["similarity"] / n_sim if n_sim else float("nan"),
        unigram_f1=sums["unigram_f1"] / n,
        word_accuracy=sums["word_accuracy"] / n,
        n_samples=n)


class _Bound:
    """Adapter giving metrics.similarity a vocabulary-closed embedding."""

    def __init__(self, model, vocab):
        self.model = model
        self.vocab = vocab

    def sentence_embedding(self, text):
        return self.model.sentence_embedding(text, self.vocab)


def baseline_sweep(code, sentences, spec: SweepSpec, model=None, vocab=None,
                   conv_cfg=None) -> list[metrics.EvalReport]:
    sentences = list(sentences)[: spec.n_samples]
    return [baseline_point(code, sentences, kind, pe, spec.seed, model, vocab, conv_cfg)
            for kind in spec.channel_kinds for pe in spec.pe_grid]


def reports_to_csv(reports, scheme: str) -> str:
    lines = [metrics.EvalReport.CSV_HEADER]
    lines += [r.csv_row(scheme) for r in reports]
    return "\n".join(lines) + "\n"


def gnuplot_script(csv_path: str, out_prefix: str) -> str:
    """Similarity-vs-P_e and BLEU-vs-P_e curves from a sweep CSV."""
    return f"""set datafile separator ','
set key autotitle columnhead
set xlabel 'P_e'
set terminal pngcairo size 800,600

set output '{out_prefix}_similarity.png'
set ylabel 'similarity'
plot for [ch in "bec bsc dc"] '{csv_path}' \\
    using 3:($0 >= 0 && strcol(2) eq ch ? $6 : 1/0) with linespoints title ch

set output '{out_prefix}_bleu.png'
set ylabel '4-gram BLEU'
plot for [ch in "bec bsc dc"] '{csv_path}' \\
    using 3:($0 >= 0 && strcol(2) eq ch ? $4 : 1/0) with linespoints title ch
"""
