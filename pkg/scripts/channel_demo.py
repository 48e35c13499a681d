#!/usr/bin/env python3
"""Library-level walkthrough: encode one sentence, damage the codeword on
each channel at increasing error rates, and print what the decoder recovers.

Usage: python3 scripts/channel_demo.py <checkpoint> ["a sentence to send"]
"""

import sys

import numpy as np

from sjscc import channels, evaluate, metrics, tokenizer
from sjscc.model import JSCCModel


def main() -> int:
    if len(sys.argv) < 2:
        print(__doc__)
        return 2
    model = JSCCModel.load_checkpoint(sys.argv[1])
    vocab = tokenizer.Vocabulary.load(sys.argv[1] + ".vocab")
    text = tokenizer.normalize(
        sys.argv[2] if len(sys.argv) > 2 else "the small dog sleeps near the river")

    ids = tokenizer.encode(text, vocab, model.cfg.l_e)
    _, codeword = model.encode_semantic(ids)
    print(f"source   : {text}")
    print(f"codeword : {codeword.shape[0]}x{codeword.shape[1]} bits, "
          f"{int((codeword > 0).sum())} ones")

    for pe in (0.0, 0.1, 0.2, 0.5):
        for kind in channels.KINDS:
            ccfg = channels.ChannelConfig(kind, pe, seed=42)
            out = evaluate.transmit(model, vocab, text, ccfg)
            score = metrics.bleu(out, text, smooth=True)
            print(f"  {kind} pe={pe:<4g} bleu={score:5.3f}  {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
