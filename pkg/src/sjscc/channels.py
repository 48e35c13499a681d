"""Lossy binary channels: erasure (BEC), symmetric (BSC), deletion (DC).

All channels act elementwise/bitwise on {-1,+1} arrays of any shape and are
pure given (input, seed).  Randomness comes from a counter-based Philox
stream keyed by the seed, so results are reproducible across platforms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KINDS = ("bec", "bsc", "dc")


class ConfigError(ValueError):
    """Unknown channel kind or invalid probability."""


@dataclass(frozen=True)
class ChannelConfig:
    kind: str
    pe: float
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown channel kind: {self.kind!r} (expected one of {KINDS})")
        if not 0.0 <= self.pe <= 1.0:
            raise ConfigError(f"error probability out of [0,1]: {self.pe}")


@dataclass
class ReceivedCodeword:
    """Channel output, same shape as the input codeword.

    ``retained`` is the survivor count before padding (deletion channel
    only; equals ``symbols.size`` otherwise).  ``kept_indices`` lists the
    flat row-major positions of surviving bits for the deletion channel,
    which lets callers replay the channel as a linear gather.
    """

    symbols: np.ndarray
    retained: int
    kept_indices: np.ndarray | None = None


def _rng(cfg: ChannelConfig) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=cfg.seed))


def bec(c: np.ndarray, cfg: ChannelConfig, rng=None) -> ReceivedCodeword:
    """Each bit independently erased to 0 with probability ``pe``."""
    rng = rng or _rng(cfg)
    c = np.asarray(c, dtype=np.float64)
    keep = rng.random(c.shape) >= cfg.pe
    return ReceivedCodeword(symbols=c * keep, retained=c.size)


def bsc(c: np.ndarray, cfg: ChannelConfig, rng=None) -> ReceivedCodeword:
    """Each bit independently negated with probability ``pe``.

    Algebraically equal to 2*erase(c; pe) - c: an erased entry yields
    2*0 - x = -x, a kept entry 2x - x = x.
    """
    rng = rng or _rng(cfg)
    c = np.asarray(c, dtype=np.float64)
    keep = rng.random(c.shape) >= cfg.pe
    return ReceivedCodeword(symbols=2.0 * (c * keep) - c, retained=c.size)


def dc(c: np.ndarray, cfg: ChannelConfig, rng=None) -> ReceivedCodeword:
    """Delete each bit independently with probability ``pe``; survivors are
    packed in order (row-major) and the tail is zero-padded back to the
    original shape."""
    rng = rng or _rng(cfg)
    c = np.asarray(c, dtype=np.float64)
    keep = rng.random(c.size) >= cfg.pe
    kept_indices = np.nonzero(keep)[0]
    out = np.zeros(c.size)
    out[: kept_indices.size] = c.ravel()[kept_indices]
    return ReceivedCodeword(symbols=out.reshape(c.shape),
                            retained=int(kept_indices.size),
                            kept_indices=kept_indices)


_DISPATCH = {"bec": bec, "bsc": bsc, "dc": dc}


def apply(c: np.ndarray, cfg: ChannelConfig, rng=None) -> ReceivedCodeword:
    """Dispatch by channel kind; deterministic given ``cfg.seed`` when no
    explicit generator is supplied."""
    try:
        fn = _DISPATCH[cfg.kind]
    except KeyError:
        raise ConfigError(f"unknown channel kind: {cfg.kind!r}") from None
    return fn(c, cfg, rng=rng)
