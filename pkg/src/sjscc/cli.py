"""Command-line harness: train, sweep, transmit, baseline, stats, synth."""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from . import baseline, channels, data, evaluate, metrics, tokenizer, training
from .model import JSCCModel, ModelConfig

DEFAULT_PE_GRID = "0,0.05,0.1,0.2,0.3,0.5"
SEMANTIC_MATCH_THRESHOLD = 0.9


class CliError(RuntimeError):
    pass


def read_config(path) -> dict[str, str]:
    """Flat ``key = value`` file with ``#`` comments."""
    out: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def _build_configs(overrides: dict[str, str]) -> tuple[ModelConfig, training.TrainConfig, int]:
    model_fields = {f.name: f.type for f in dataclasses.fields(ModelConfig)}
    train_fields = {f.name: f.type for f in dataclasses.fields(training.TrainConfig)}
    model_kwargs: dict = {}
    train_kwargs: dict = {}
    vocab_size = 512
    for key, value in overrides.items():
        if key == "vocab_size":
            vocab_size = int(value)
        elif key in model_fields:
            model_kwargs[key] = _coerce(model_fields[key], value)
        elif key in train_fields:
            train_kwargs[key] = _coerce(train_fields[key], value)
        else:
            raise CliError(f"unknown config key: {key!r}")
    return ModelConfig(**model_kwargs), training.TrainConfig(**train_kwargs), vocab_size


def _coerce(field_type: str, value: str):
    if field_type == "int":
        return int(value)
    if field_type == "float":
        return float(value)
    if field_type == "bool":
        return value.lower() in ("true", "1", "yes")
    if field_type.startswith("tuple"):
        return tuple(v.strip() for v in value.split(","))
    return value


def _load_bundle(checkpoint: str):
    vocab_path = Path(checkpoint + ".vocab")
    if not Path(checkpoint).exists():
        raise CliError(f"checkpoint not found: {checkpoint}")
    if not vocab_path.exists():
        raise CliError(f"vocabulary not found: {vocab_path}")
    model = JSCCModel.load_checkpoint(checkpoint)
    vocab = tokenizer.Vocabulary.load(vocab_path)
    return model, vocab


def _parse_grid(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(","))


def _parse_kinds(text: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in text.split(","))


# ---------------------------------------------------------------------------
# subcommands


def cmd_synth(args, created) -> None:
    corpus = data.synth_corpus(args.seed, args.size,
                               paraphrase_fraction=args.paraphrase_fraction)
    created.append(args.out)
    data.save_pairs(corpus.pairs, args.out)
    print(f"wrote {args.size} pairs to {args.out}")


def cmd_stats(args, created) -> None:
    corpus = data.load_pairs(args.corpus)
    lines = [baseline.normalize_27(p.source) for p in corpus.pairs]
    vocab = tokenizer.build_vocab([p.source for p in corpus.pairs], args.vocab_size)
    stats = baseline.estimate_symbol_stats(lines, vocab)
    code = baseline.huffman_build(stats)
    report = baseline.overhead_report(stats, code)
    print(report.to_text())
    if args.out:
        created.append(args.out)
        Path(args.out).write_text(
            report.CSV_HEADER + "\n" + report.csv_row() + "\n")
        print(f"wrote {args.out}")


def cmd_train(args, created) -> None:
    overrides = read_config(args.config) if args.config else {}
    mcfg, tcfg, vocab_size = _build_configs(overrides)
    if args.seed is not None:
        tcfg.seed = args.seed
    if args.epochs is not None:
        tcfg.epochs = args.epochs
    corpus = data.load_pairs(args.corpus, split_seed=tcfg.seed)
    texts = [p.source for p in corpus.pairs] + [p.target for p in corpus.pairs]
    vocab = tokenizer.build_vocab(texts, vocab_size)
    mcfg = dataclasses.replace(mcfg, n_vocab=vocab.size)
    model = JSCCModel(mcfg, seed=tcfg.seed)
    created.extend([args.out, args.out + ".cfg", args.out + ".vocab",
                    args.out + ".final", args.out + ".final.cfg"])
    vocab.save(args.out + ".vocab")
    rows: list[str] = []
    training.train(model, corpus, vocab, tcfg, log_rows=rows,
                   checkpoint_path=args.out)
    if args.log:
        created.append(args.log)
        Path(args.log).write_text(
            training.EpochRecord.CSV_HEADER + "\n" + "\n".join(rows) + "\n")
    print(f"wrote checkpoint {args.out} (best validation) and {args.out}.final")


def cmd_sweep(args, created) -> None:
    model, vocab = _load_bundle(args.checkpoint)
    corpus = data.load_pairs(args.corpus, split_seed=args.split_seed)
    sentences = [p.source for p in corpus.split("test")]
    spec = evaluate.SweepSpec(_parse_kinds(args.channels), _parse_grid(args.pe_grid),
                              args.samples, args.seed, checkpoint=args.checkpoint)
    reports = evaluate.sweep(model, vocab, sentences, spec)
    created.append(args.out)
    Path(args.out).write_text(evaluate.reports_to_csv(reports, scheme="proposed"))
    plot_path = args.out + ".gp"
    created.append(plot_path)
    Path(plot_path).write_text(evaluate.gnuplot_script(args.out, args.out))
    print(f"wrote {args.out} and {plot_path}")


def cmd_transmit(args, created) -> None:
    model, vocab = _load_bundle(args.checkpoint)
    ref = tokenizer.normalize(args.sentence)
    print(f"source : {ref}")
    kinds = channels.KINDS if args.channel == "all" else (args.channel,)
    for kind in kinds:
        ccfg = channels.ChannelConfig(kind, args.pe, seed=args.seed)
        out = evaluate.transmit(model, vocab, ref, ccfg)
        if out == ref:
            flag = "exact"
        else:
            sim = (metrics.cosine(model.sentence_embedding(out, vocab),
                                  model.sentence_embedding(ref, vocab))
                   if out.strip() else 0.0)
            flag = "semantic" if sim > SEMANTIC_MATCH_THRESHOLD else "fail"
        print(f"{kind:3s} pe={args.pe:<5g}: {out}  [{flag}]")


def cmd_baseline(args, created) -> None:
    corpus = data.load_pairs(args.corpus, split_seed=args.split_seed)
    train_lines = [baseline.normalize_27(p.source) for p in corpus.split("train")]
    stats = baseline.estimate_symbol_stats(train_lines)
    code = baseline.huffman_build(stats)
    sentences = [p.source for p in corpus.split("test")]
    spec = evaluate.SweepSpec(_parse_kinds(args.channels), _parse_grid(args.pe_grid),
                              args.samples, args.seed)
    model = vocab = None
    if args.checkpoint:
        model, vocab = _load_bundle(args.checkpoint)
    reports = evaluate.baseline_sweep(code, sentences, spec, model, vocab)
    created.append(args.out)
    Path(args.out).write_text(evaluate.reports_to_csv(reports, scheme="baseline"))
    print(f"wrote {args.out}")


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sjscc",
        description="Transformer-based joint source-channel coding for short text")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic TSV pair corpus")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--size", type=int, default=2000)
    p.add_argument("--paraphrase-fraction", type=float, default=0.3)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("stats", help="coding-overhead report for a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--vocab-size", type=int, default=512)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_stats)

    p = sub.add_parser("train", help="train the semantic codec")
    p.add_argument("--corpus", required=True)
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--log", help="per-epoch loss CSV")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("sweep", help="evaluate the codec over a P_e grid")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--channels", default="bec,bsc,dc")
    p.add_argument("--pe-grid", default=DEFAULT_PE_GRID)
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("transmit", help="send one sentence through each channel")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--sentence", required=True)
    p.add_argument("--channel", choices=["bec", "bsc", "dc", "all"], default="all")
    p.add_argument("--pe", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_transmit)

    p = sub.add_parser("baseline", help="classical Huffman + conv-code sweep")
    p.add_argument("--corpus", required=True)
    p.add_argument("--channels", default="bec,bsc,dc")
    p.add_argument("--pe-grid", default=DEFAULT_PE_GRID)
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--checkpoint", help="trained model for the similarity column")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_baseline)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    created: list[str] = []
    try:
        args.fn(args, created)
    except Exception as e:  # one-line diagnostic, partial outputs removed
        for path in created:
            Path(path).unlink(missing_ok=True)
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
