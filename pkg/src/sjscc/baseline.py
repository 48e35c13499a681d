"""Classical separate source/channel coding chain.

Symbol statistics over the 27-symbol alphabet (a-z plus space), Huffman
source coding, a rate-1/3 convolutional code with erasure-aware Viterbi
decoding, and the coding-overhead arithmetic report.
"""

from __future__ import annotations

import heapq
import math
import re
from collections import Counter
from dataclasses import dataclass

import numpy as np

from . import channels, tokenizer

ALPHABET = "abcdefghijklmnopqrstuvwxyz "

# paper-scale reference values for the overhead report
PAPER_ENTROPY = 4.059
PAPER_HUFFMAN_AVG = 4.093
PAPER_TOKEN_LEN = 4.588
PAPER_Q = 60


class NormalizationError(ValueError):
    """Input contains a symbol outside the 27-symbol alphabet."""


_NON_ALPHA = re.compile(r"[^a-z ]+")


def normalize_27(text: str) -> str:
    """Map text onto the 27-symbol alphabet: lowercase, drop everything that
    is not a letter or a space, collapse whitespace."""
    return " ".join(_NON_ALPHA.sub("", text.lower()).split())


@dataclass
class SymbolStats:
    probs: dict[str, float]
    entropy: float
    avg_token_len: float

    @classmethod
    def empty(cls):
        return cls({}, 0.0, 0.0)


def estimate_symbol_stats(lines, vocab: tokenizer.Vocabulary | None = None) -> SymbolStats:
    """Frequency counts -> probabilities -> entropy, plus average letters per
    token (wordpiece tokens when a vocabulary is given, else whitespace words)."""
    counts: Counter[str] = Counter()
    letters = 0
    n_tokens = 0
    for line in lines:
        for ch in line:
            if ch not in ALPHABET:
                raise NormalizationError(
                    f"symbol {ch!r} outside the 27-symbol alphabet")
            counts[ch] += 1
            if ch != " ":
                letters += 1
        if vocab is not None:
            ids = tokenizer.encode(line, vocab, max_len=10 ** 9)
            n_tokens += len(ids) - 2  # drop BOS/EOS
        else:
            n_tokens += len(line.split())
    total = sum(counts.values())
    if total == 0:
        raise NormalizationError("empty corpus")
    probs = {s: counts[s] / total for s in sorted(counts)}
    entropy = -sum(p * math.log2(p) for p in probs.values() if p > 0)
    avg_token_len = letters / n_tokens if n_tokens else 0.0
    return SymbolStats(probs=probs, entropy=entropy, avg_token_len=avg_token_len)


# ---------------------------------------------------------------------------
# Huffman coding


@dataclass
class HuffmanCode:
    table: dict[str, str]  # symbol -> bit string
    avg_length: float      # expected bits/symbol under the build distribution


def huffman_build(stats: SymbolStats) -> HuffmanCode:
    """Optimal prefix code by lowest-probability pair merging.  Ties are
    broken by the lexicographically smallest symbol set, so tables are
    reproducible across runs."""
    items = [(p, (s,), s) for s, p in stats.probs.items() if p > 0]
    if not items:
        raise NormalizationError("no symbols with positive probability")
    if len(items) == 1:
        sym = items[0][2]
        return HuffmanCode(table={sym: "0"}, avg_length=1.0)
    heap = [(p, syms, node) for p, syms, node in items]
    heapq.heapify(heap)
    while len(heap) > 1:
        p1, s1, n1 = heapq.heappop(heap)
        p2, s2, n2 = heapq.heappop(heap)
        heapq.heappush(heap, (p1 + p2, tuple(sorted(s1 + s2)), (n1, n2)))
    table: dict[str, str] = {}

    def assign(node, prefix):
        if isinstance(node, str):
            table[node] = prefix or "0"
        else:
            assign(node[0], prefix + "0")
            assign(node[1], prefix + "1")

    assign(heap[0][2], "")
    avg = sum(stats.probs[s] * len(code) for s, code in table.items())
    return HuffmanCode(table=table, avg_length=avg)


def huffman_encode(text: str, code: HuffmanCode) -> np.ndarray:
    try:
        bits = "".join(code.table[s] for s in text)
    except KeyError as e:
        raise NormalizationError(f"symbol {e.args[0]!r} not in Huffman table") from None
    return np.frombuffer(bits.encode(), dtype=np.uint8) - ord("0")


def huffman_decode(bits, code: HuffmanCode) -> tuple[str, bool]:
    """Prefix walk.  On corrupted streams this resynchronizes at whatever
    codeword aligns next, producing garbled but decodable text.  Returns
    (text, truncated) where ``truncated`` marks an undecodable tail."""
    tree: dict = {}
    for sym, word in code.table.items():
        node = tree
        for b in word[:-1]:
            node = node.setdefault(b, {})
        node[word[-1]] = sym
    out = []
    node = tree
    truncated = False
    for b in np.asarray(bits, dtype=np.uint8):
        node = node.get("1" if b else "0")
        if node is None:
            # dead branch (possible only for non-full trees): drop and resync
            node = tree
            continue
        if isinstance(node, str):
            out.append(node)
            node = tree
    if node is not tree:
        truncated = True
    return "".join(out), truncated


# ---------------------------------------------------------------------------
# rate-1/3 convolutional code + Viterbi


@dataclass(frozen=True)
class ConvCodeConfig:
    constraint_length: int = 3
    generators: tuple[int, int, int] = (0o7, 0o5, 0o7)

    def __post_init__(self):
        if any(g == 0 for g in self.generators):
            raise ValueError("generator polynomials must be nonzero")

    @property
    def rate(self) -> float:
        return 1.0 / 3.0


# a stronger K=7 option (generators in octal)
CONV_K7 = ConvCodeConfig(constraint_length=7, generators=(0o133, 0o171, 0o165))


def conv_encode(bits, cfg: ConvCodeConfig = ConvCodeConfig()) -> np.ndarray:
    """Zero-state terminated encoding: K-1 flush zeros are appended, so the
    output has 3*(len+K-1) bits."""
    bits = np.asarray(bits, dtype=np.uint8)
    k = cfg.constraint_length
    state = 0
    out = np.empty(3 * (bits.size + k - 1), dtype=np.uint8)
    pos = 0
    for b in list(bits) + [0] * (k - 1):
        window = (int(b) << (k - 1)) | state
        for g in cfg.generators:
            out[pos] = bin(window & g).count("1") & 1
            pos += 1
        state = window >> 1
    return out


def _trellis(cfg: ConvCodeConfig):
    k = cfg.constraint_length
    n_states = 1 << (k - 1)
    # expected channel symbols (bit b -> symbol 1-2b) per (state, input)
    exp = np.empty((n_states, 2, 3), dtype=np.float64)
    nxt = np.empty((n_states, 2), dtype=np.int64)
    for s in range(n_states):
        for b in (0, 1):
            window = (b << (k - 1)) | s
            exp[s, b] = [1.0 - 2.0 * (bin(window & g).count("1") & 1)
                         for g in cfg.generators]
            nxt[s, b] = window >> 1
    # predecessors: state ns is reached from {2m, 2m+1} (m = low bits of ns)
    # with the single input bit ns >> (k-2)
    pred = np.empty((n_states, 2), dtype=np.int64)
    pred_in = np.empty(n_states, dtype=np.int64)
    for ns in range(n_states):
        m = ns & ((1 << (k - 2)) - 1) if k > 2 else 0
        pred[ns] = (2 * m, 2 * m + 1)
        pred_in[ns] = ns >> (k - 2)
    return exp, nxt, pred, pred_in


def viterbi_decode(received, cfg: ConvCodeConfig = ConvCodeConfig()) -> np.ndarray:
    """Maximum-likelihood trellis decoding of {-1,0,+1} symbol streams.

    Branch metric is Hamming distance on hard symbols; erased symbols (0)
    cost nothing on every branch.  Accepts a single stream of 3T symbols or
    a (batch, 3T) matrix; the path is forced to end in the zero state
    (matching the encoder's flush termination).
    """
    r = np.asarray(received, dtype=np.float64)
    single = r.ndim == 1
    r = np.atleast_2d(r)
    if r.shape[1] % 3:
        raise ValueError(f"received length {r.shape[1]} not divisible by 3")
    k = cfg.constraint_length
    steps = r.shape[1] // 3
    if steps < k - 1:
        raise ValueError(f"stream too short for constraint length {k}")
    batch = r.shape[0]
    exp, _, pred, pred_in = _trellis(cfg)
    n_states = exp.shape[0]

    metric = np.full((batch, n_states), 1e18)
    metric[:, 0] = 0.0
    decisions = np.empty((steps, batch, n_states), dtype=np.uint8)
    for t in range(steps):
        rt = r[:, 3 * t: 3 * t + 3]  # (batch, 3)
        # cost of (state, input): count of outright sign flips
        cost = (rt[:, None, None, :] * exp[None, :, :, :] == -1.0).sum(axis=3)
        # candidates per next state: both predecessors, same forced input bit
        cand = metric[:, pred] + cost[:, pred, pred_in[:, None]]
        choice = cand.argmin(axis=2)
        decisions[t] = choice
        metric = np.take_along_axis(cand, choice[:, :, None], axis=2)[:, :, 0]

    bits = np.empty((batch, steps), dtype=np.uint8)
    state = np.zeros(batch, dtype=np.int64)
    rows = np.arange(batch)
    for t in range(steps - 1, -1, -1):
        choice = decisions[t, rows, state]
        bits[:, t] = pred_in[state]
        state = pred[state, choice]
    msg = bits[:, : steps - (k - 1)]
    return msg[0] if single else msg


# ---------------------------------------------------------------------------
# end-to-end chain and overhead arithmetic


def baseline_transmit(text: str, channel_cfg: channels.ChannelConfig,
                      code: HuffmanCode,
                      conv_cfg: ConvCodeConfig = ConvCodeConfig(),
                      rng=None) -> str:
    """Huffman encode -> convolutional encode -> channel -> Viterbi decode
    -> Huffman decode.  Degraded text is a valid outcome, not an error."""
    norm = normalize_27(text)
    bits = huffman_encode(norm, code)
    coded = conv_encode(bits, conv_cfg)
    symbols = 1.0 - 2.0 * coded.astype(np.float64)
    received = channels.apply(symbols, channel_cfg, rng=rng)
    decoded_bits = viterbi_decode(received.symbols.ravel(), conv_cfg)
    out, _ = huffman_decode(decoded_bits, code)
    return out


@dataclass
class OverheadReport:
    corpus_entropy: float
    corpus_huffman_avg: float
    corpus_token_len: float
    rate: float
    bits_per_symbol: float
    q_formula: int
    paper_entropy: float = PAPER_ENTROPY
    paper_huffman_avg: float = PAPER_HUFFMAN_AVG
    paper_token_len: float = PAPER_TOKEN_LEN
    paper_bits_per_symbol: float = PAPER_HUFFMAN_AVG * 3
    paper_q_formula: int = math.ceil(PAPER_TOKEN_LEN * PAPER_HUFFMAN_AVG * 3)
    paper_q: int = PAPER_Q

    CSV_HEADER = ("corpus_H,corpus_Hbar,corpus_Lbar,R,bits_per_symbol,"
                  "Q_formula,paper_H,paper_Hbar,paper_Lbar,paper_Q")

    def csv_row(self) -> str:
        return (f"{self.corpus_entropy:.6f},{self.corpus_huffman_avg:.6f},"
                f"{self.corpus_token_len:.6f},{self.rate:.6f},"
                f"{self.bits_per_symbol:.6f},{self.q_formula},"
                f"{self.paper_entropy},{self.paper_huffman_avg},"
                f"{self.paper_token_len},{self.paper_q}")

    def to_text(self) -> str:
        return "\n".join([
            "coding overhead report",
            f"  source entropy H            = {self.corpus_entropy:.4f} bits/symbol"
            f"  (published: {self.paper_entropy})",
            f"  Huffman average length Hbar = {self.corpus_huffman_avg:.4f} bits/symbol"
            f"  (published: {self.paper_huffman_avg})",
            f"  average token length Lbar   = {self.corpus_token_len:.4f} letters"
            f"  (published: {self.paper_token_len})",
            f"  channel code rate R         = {self.rate:.4f}",
            f"  bits per symbol Hbar/R      = {self.bits_per_symbol:.4f}"
            f"  (published: {self.paper_bits_per_symbol:.3f})",
            f"  Q = ceil(Lbar*Hbar/R)       = {self.q_formula}"
            f"  (published formula value: {self.paper_q_formula},"
            f" published Q: {self.paper_q})",
        ])


def overhead_report(stats: SymbolStats, code: HuffmanCode,
                    rate: float = 1.0 / 3.0) -> OverheadReport:
    bits_per_symbol = code.avg_length / rate
    q_formula = math.ceil(stats.avg_token_len * code.avg_length / rate)
    return OverheadReport(
        corpus_entropy=stats.entropy,
        corpus_huffman_avg=code.avg_length,
        corpus_token_len=stats.avg_token_len,
        rate=rate,
        bits_per_symbol=bits_per_symbol,
        q_formula=q_formula,
    )
