"""Teacher-forced training loop with in-loop channel noise."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import data
from .channels import ChannelConfig
from .model import JSCCModel

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    epochs: int = 30
    batch_size: int = 32
    lr: float = 1e-3
    seed: int = 0
    channel_kinds: tuple[str, ...] = ("bec", "bsc", "dc")
    pe_max: float = 0.5
    clean_fraction: float = 0.25  # fraction of batches trained without noise
    min_lr_fraction: float = 0.05  # cosine decay floor; tames quantizer drift


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    seconds: float

    CSV_HEADER = "epoch,train_loss,val_loss,ppl,seconds"

    def csv_row(self) -> str:
        return (f"{self.epoch},{self.train_loss:.6f},{self.val_loss:.6f},"
                f"{np.exp(self.val_loss):.6f},{self.seconds:.3f}")


def _sample_channel(rng: np.random.Generator, tcfg: TrainConfig) -> ChannelConfig | None:
    # draw order is fixed so the run stays reproducible
    kind = tcfg.channel_kinds[rng.integers(len(tcfg.channel_kinds))]
    pe = float(rng.uniform(0.0, tcfg.pe_max))
    clean = rng.random() < tcfg.clean_fraction
    if clean or pe == 0.0:
        return None
    return ChannelConfig(kind, pe, seed=int(rng.integers(2 ** 62)))


def _batch_step(model: JSCCModel, batch, ccfg, rng, opt_state) -> float:
    grad_sums: dict[str, np.ndarray] = {}
    total = 0.0
    for src, tgt in batch:
        loss = model.forward_teacher_forced(src, tgt, ccfg, rng=rng)
        total += loss.item()
        ad.backward(loss)
        for name, p in model.params.items():
            if p.grad is None:
                continue
            if name in grad_sums:
                grad_sums[name] += p.grad
            else:
                grad_sums[name] = p.grad.copy()
    n = len(batch)
    grads = {name: g / n for name, g in grad_sums.items()}
    ad.optimizer_step(model.params, grads, opt_state)
    return total / n


def validation_loss(model: JSCCModel, pairs, vocab, seed: int = 0) -> float:
    """Clean-channel teacher-forced loss over a pair list."""
    from . import tokenizer
    total = 0.0
    n = 0
    for p in pairs:
        src = tokenizer.encode(p.source, vocab, model.cfg.l_e)
        tgt = tokenizer.encode(p.target, vocab, model.cfg.l_e)
        total += model.forward_teacher_forced(src, tgt, None).item()
        n += 1
    return total / max(n, 1)


def train(model: JSCCModel, corpus: data.Corpus, vocab, tcfg: TrainConfig,
          log_rows: list | None = None,
          checkpoint_path=None) -> list[EpochRecord]:
    """Runs the full loop; keeps the best-validation parameters on disk when
    ``checkpoint_path`` is given (final params land at ``<path>.final``)."""
    opt_state = ad.OptimizerState(lr=tcfg.lr)
    rng = np.random.default_rng(tcfg.seed)
    train_pairs = corpus.split("train")
    val_pairs = corpus.split("val")
    records: list[EpochRecord] = []
    best_val = np.inf
    for epoch in range(tcfg.epochs):
        t0 = time.time()
        # cosine decay: late-stage steps shrink so near-zero codeword logits
        # stop wandering across the quantizer threshold
        frac = epoch / max(tcfg.epochs - 1, 1)
        floor = tcfg.min_lr_fraction
        opt_state.lr = tcfg.lr * (floor + (1 - floor) * 0.5 * (1 + np.cos(np.pi * frac)))
        epoch_seed = int(np.random.default_rng((tcfg.seed, epoch)).integers(2 ** 62))
        losses = []
        for batch in data.batches(train_pairs, tcfg.batch_size, vocab,
                                  model.cfg.l_e, seed=epoch_seed):
            ccfg = _sample_channel(rng, tcfg)
            losses.append(_batch_step(model, batch, ccfg, rng, opt_state))
        val = validation_loss(model, val_pairs, vocab)
        rec = EpochRecord(epoch=epoch, train_loss=float(np.mean(losses)),
                          val_loss=val, seconds=time.time() - t0)
        records.append(rec)
        if log_rows is not None:
            log_rows.append(rec.csv_row())
        log.info("epoch %d: train %.4f val %.4f (%.1fs)",
                 epoch, rec.train_loss, val, rec.seconds)
        if checkpoint_path is not None and val < best_val:
            best_val = val
            model.save_checkpoint(checkpoint_path)
        if epoch == 2 and len(records) == 3:
            if records[2].train_loss >= records[0].train_loss:
                log.warning("training loss has not decreased over the first "
                            "3 epochs; check the learning rate")
    if checkpoint_path is not None:
        model.save_checkpoint(str(checkpoint_path) + ".final")
        if best_val == np.inf:
            model.save_checkpoint(checkpoint_path)
    return records
