"""Semantic encoder/decoder: embedding -> attention layers -> binarized
codeword, and the generative decoder with teacher-forced training.

The decoder's cross-attention follows the unconventional role assignment
this architecture specifies (received-codeword states supply query and key,
generated-token states supply value); ``standard_cross_attention`` selects
the conventional assignment instead.  A causal mask constrains both the
self-attention and the cross-attention mixing weights so that teacher-forced
training and step-by-step generation compute identical rows.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from . import autodiff as ad
from . import channels
from .tokenizer import PAD, BOS, EOS


class CapacityError(ValueError):
    """A token sequence exceeds the embedding length."""


class ConfigMismatchError(ValueError):
    """Checkpoint configuration disagrees with the expected one."""


@dataclass
class ModelConfig:
    n_emb: int = 64
    n_heads: int = 4
    n_attn: int = 16
    m_enc: int = 2
    m_dec: int = 2
    q_bits: int = 16
    l_e: int = 24
    n_vocab: int = 512
    ffn_dim: int = 128
    activation: str = "relu"
    pre_norm: bool = False
    standard_cross_attention: bool = False
    encoder_residual: bool = False

    def __post_init__(self):
        if self.n_emb != self.n_attn * self.n_heads:
            raise ConfigMismatchError(
                f"n_emb ({self.n_emb}) must equal n_attn*n_heads "
                f"({self.n_attn}*{self.n_heads})")
        if self.q_bits < 1:
            raise ConfigMismatchError(f"q_bits must be >= 1, got {self.q_bits}")
        if self.l_e < 3:
            raise ConfigMismatchError(f"l_e must be >= 3, got {self.l_e}")

    def to_text(self) -> str:
        return "\n".join(f"{k} = {v}" for k, v in asdict(self).items())

    @classmethod
    def from_text(cls, text: str) -> "ModelConfig":
        kwargs = {}
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            field_type = cls.__dataclass_fields__[key].type
            if field_type == "bool":
                kwargs[key] = value.lower() in ("true", "1", "yes")
            elif field_type == "int":
                kwargs[key] = int(value)
            else:
                kwargs[key] = value
        return cls(**kwargs)


def binarize_ste(x: ad.Tensor) -> ad.Tensor:
    """Hard {-1,+1} forward (tanh then sign, ties to +1) with the tanh-path
    gradient passed straight through the quantizer."""
    t = np.tanh(x.data)
    hard = np.where(t >= 0.0, 1.0, -1.0)

    def bw(g):
        if x.requires_grad:
            ad._accum(x, g * (1.0 - t * t))

    return ad.Tensor(hard, _parents=(x,), _backward_fn=bw)


def _causal_mask(n: int) -> np.ndarray:
    mask = np.zeros((n, n))
    mask[np.triu_indices(n, k=1)] = -np.inf
    return mask


class JSCCModel:
    """Holds all learned parameters plus the forward/training/generation
    machinery.  Parameters live in an insertion-ordered name->Tensor dict,
    which also fixes the (deterministic) serialization order."""

    def __init__(self, cfg: ModelConfig, seed: int = 0):
        self.cfg = cfg
        self.params: dict[str, ad.Tensor] = {}
        rng = np.random.default_rng(seed)

        def par(name, rows, cols):
            self.params[name] = ad.parameter(ad.glorot_uniform(rng, rows, cols))

        c = cfg
        par("emb", c.n_vocab, c.n_emb)
        par("pos", c.l_e, c.n_emb)
        for i in range(c.m_enc):
            self._init_attn(par, f"enc{i}", c)
            self._init_ffn(par, f"enc{i}", c)
        par("w_out", c.n_emb, c.q_bits)
        par("w_up", c.q_bits, c.n_emb)
        for i in range(c.m_dec):
            self._init_attn(par, f"dec{i}.self", c)
            self._init_attn(par, f"dec{i}.cross", c)
            self._init_ffn(par, f"dec{i}", c)
        par("head", c.n_emb, c.n_vocab)
        self._scale = 1.0 / np.sqrt(c.n_attn)

    @staticmethod
    def _init_attn(par, prefix, c):
        for h in range(c.n_heads):
            par(f"{prefix}.wq{h}", c.n_emb, c.n_attn)
            par(f"{prefix}.wk{h}", c.n_emb, c.n_attn)
            par(f"{prefix}.wv{h}", c.n_emb, c.n_attn)
        par(f"{prefix}.wo", c.n_emb, c.n_emb)

    @staticmethod
    def _init_ffn(par, prefix, c):
        par(f"{prefix}.w1", c.n_emb, c.ffn_dim)
        par(f"{prefix}.b1", 1, c.ffn_dim)
        par(f"{prefix}.w2", c.ffn_dim, c.n_emb)
        par(f"{prefix}.b2", 1, c.n_emb)

    # -- building blocks ----------------------------------------------------

    def _mha(self, prefix: str, q_src: ad.Tensor, k_src: ad.Tensor,
             v_src: ad.Tensor, mask: np.ndarray | None) -> ad.Tensor:
        p = self.params
        heads = []
        for h in range(self.cfg.n_heads):
            q = ad.matmul(q_src, p[f"{prefix}.wq{h}"])
            k = ad.matmul(k_src, p[f"{prefix}.wk{h}"])
            v = ad.matmul(v_src, p[f"{prefix}.wv{h}"])
            logits = ad.matmul(q, ad.transpose(k))
            attn = ad.softmax_rows(logits, self._scale, mask)
            heads.append(ad.matmul(attn, v))
        return ad.matmul(ad.concat_cols(heads), p[f"{prefix}.wo"])

    def _ffn(self, prefix: str, o: ad.Tensor) -> ad.Tensor:
        # residual wraps the whole doubly-activated projection, as specified
        p = self.params
        x = o
        if self.cfg.pre_norm:
            x = ad.layer_norm_rows(x)
        h = ad.activation(ad.add(ad.matmul(x, p[f"{prefix}.w1"]), p[f"{prefix}.b1"]),
                          self.cfg.activation)
        h = ad.activation(ad.add(ad.matmul(h, p[f"{prefix}.w2"]), p[f"{prefix}.b2"]),
                          self.cfg.activation)
        return ad.add(h, o)

    def encoder_layer(self, x: ad.Tensor, layer: int,
                      mask: np.ndarray | None = None) -> ad.Tensor:
        if x.rows != self.cfg.l_e:
            raise ad.DimensionError(
                f"encoder layer expects {self.cfg.l_e} rows, got {x.rows}")
        xin = ad.layer_norm_rows(x) if self.cfg.pre_norm else x
        o = self._mha(f"enc{layer}", xin, xin, xin, mask)
        if self.cfg.encoder_residual:
            # conventional block: keep each row's own token content in the
            # output instead of routing it entirely through attention values
            o = ad.add(o, x)
        return self._ffn(f"enc{layer}", o)

    def decoder_layer(self, gen: ad.Tensor, memory: ad.Tensor,
                      layer: int) -> ad.Tensor:
        """One decoder layer on ``gen`` (t rows of generated states,
        zero-padded here to the embedding length) against ``memory``."""
        l_e = self.cfg.l_e
        t = gen.rows
        if t < 1:
            raise ad.UsageError("decoder layer needs at least one generated row")
        if t > l_e or memory.rows != l_e:
            raise ad.DimensionError(
                f"decoder shapes out of range: gen {gen.shape}, memory {memory.shape}")
        if t < l_e:
            pad = ad.constant(np.zeros((l_e - t, gen.cols)))
            g = ad.Tensor(np.concatenate([gen.data, pad.data]),
                          _parents=(gen,),
                          _backward_fn=lambda gr: ad._accum(gen, gr[:t])
                          if gen.requires_grad else None)
        else:
            g = gen
        return self._decoder_layer_padded(g, memory, layer)

    def _decoder_layer_padded(self, g: ad.Tensor, memory: ad.Tensor,
                              layer: int) -> ad.Tensor:
        causal = _causal_mask(self.cfg.l_e)
        gin = ad.layer_norm_rows(g) if self.cfg.pre_norm else g
        s = self._mha(f"dec{layer}.self", gin, gin, gin, causal)
        if self.cfg.standard_cross_attention:
            # conventional decoder block: residuals around both attention
            # sublayers so generated-token state reaches the output directly
            s = ad.add(s, g)
            c = ad.add(self._mha(f"dec{layer}.cross", s, memory, memory, None), s)
        else:
            # memory supplies query and key, generated states supply value;
            # the causal mask keeps row i from mixing value rows > i so that
            # training matches incremental generation
            c = self._mha(f"dec{layer}.cross", memory, memory, s, causal)
        return self._ffn(f"dec{layer}", c)

    # -- encoder pipeline ---------------------------------------------------

    def _pad_ids(self, ids) -> np.ndarray:
        ids = np.asarray(ids, dtype=np.int64)
        if ids.size > self.cfg.l_e:
            raise CapacityError(
                f"sequence length {ids.size} exceeds embedding length {self.cfg.l_e}")
        return np.concatenate([ids, np.full(self.cfg.l_e - ids.size, PAD, dtype=np.int64)])

    def _pad_mask(self, padded_ids: np.ndarray) -> np.ndarray:
        # PAD key columns excluded from encoder attention
        mask = np.zeros((self.cfg.l_e, self.cfg.l_e))
        mask[:, padded_ids == PAD] = -np.inf
        return mask

    def _embed(self, padded_ids: np.ndarray) -> ad.Tensor:
        return ad.add(ad.embedding_lookup(self.params["emb"], padded_ids),
                      self.params["pos"])

    def encode_hidden(self, ids) -> ad.Tensor:
        """Final encoder hidden states (pre-projection), l_e x n_emb."""
        padded = self._pad_ids(ids)
        mask = self._pad_mask(padded)
        x = self._embed(padded)
        for i in range(self.cfg.m_enc):
            x = self.encoder_layer(x, i, mask)
        return x

    def _codeword_logits(self, ids) -> ad.Tensor:
        return ad.matmul(self.encode_hidden(ids), self.params["w_out"])

    def encode_semantic(self, ids) -> tuple[ad.Tensor, np.ndarray]:
        """Returns (pre-quantization reals in (-1,1), hard {-1,+1} codeword),
        both l_e x q_bits."""
        z = self._codeword_logits(ids)
        real = ad.tanh(z)
        hard = np.where(real.data >= 0.0, 1.0, -1.0)
        return real, hard

    def sentence_embedding(self, text_or_ids, vocab=None) -> np.ndarray:
        """Mean-pooled non-PAD encoder hidden states; similarity proxy."""
        from . import tokenizer as tok
        if isinstance(text_or_ids, str):
            if vocab is None:
                raise ad.UsageError("sentence_embedding needs a vocabulary for raw text")
            ids = tok.encode(text_or_ids, vocab, self.cfg.l_e)
        else:
            ids = list(text_or_ids)
        hidden = self.encode_hidden(ids)
        return hidden.data[: len(ids)].mean(axis=0)

    # -- channel bridge -----------------------------------------------------

    def _apply_channel(self, codeword: ad.Tensor, ccfg: channels.ChannelConfig,
                       rng=None) -> ad.Tensor:
        """Replay a sampled channel realization as a differentiable linear
        map on the straight-through codeword tensor."""
        received = channels.apply(codeword.data, ccfg, rng=rng)
        if ccfg.kind == "bec":
            return ad.mul_const(codeword, (received.symbols != 0.0).astype(np.float64))
        if ccfg.kind == "bsc":
            return ad.mul_const(codeword, received.symbols * codeword.data)
        idx = received.kept_indices
        return ad.take_flat_pad(codeword, idx, codeword.shape)

    # -- training forward ---------------------------------------------------

    def _decode_logits(self, memory: ad.Tensor, teacher_ids) -> ad.Tensor:
        g = self._embed(self._pad_ids(teacher_ids))
        for i in range(self.cfg.m_dec):
            g = self._decoder_layer_padded(g, memory, i)
        return ad.matmul(g, self.params["head"])

    def forward_teacher_forced(self, src_ids, tgt_ids,
                               ccfg: channels.ChannelConfig | None,
                               rng=None) -> ad.Tensor:
        """Scalar cross-entropy loss, fully differentiable through the
        straight-through binarizer and the sampled channel realization."""
        hard = binarize_ste(self._codeword_logits(src_ids))
        if ccfg is not None:
            hard = self._apply_channel(hard, ccfg, rng=rng)
        memory = ad.matmul(hard, self.params["w_up"])
        teacher_in = list(tgt_ids[:-1])
        targets = self._pad_ids(list(tgt_ids[1:]))
        logits = self._decode_logits(memory, teacher_in)
        return ad.cross_entropy_logits(logits, targets, ignore_id=PAD)

    # -- generation ---------------------------------------------------------

    def generate(self, received_symbols: np.ndarray, max_len: int | None = None) -> list[int]:
        """Greedy decoding from a (zero-padded) received codeword; returns
        ids starting with BOS and ending with EOS or at ``max_len``."""
        received_symbols = np.asarray(received_symbols, dtype=np.float64)
        if received_symbols.shape != (self.cfg.l_e, self.cfg.q_bits):
            raise ad.DimensionError(
                f"received codeword must be {(self.cfg.l_e, self.cfg.q_bits)}, "
                f"got {received_symbols.shape}")
        if max_len is None:
            max_len = self.cfg.l_e
        memory = ad.matmul(ad.constant(received_symbols), self.params["w_up"])
        ids = [BOS]
        while len(ids) < max_len:
            logits = self._decode_logits(memory, ids)
            nxt = int(np.argmax(logits.data[len(ids) - 1]))
            ids.append(nxt)
            if nxt == EOS:
                break
        return ids

    # -- checkpointing ------------------------------------------------------

    def save_checkpoint(self, path) -> None:
        """Writes the tensor blob at ``path`` and the config as a key-value
        text sidecar at ``path.cfg``."""
        ad.save_tensors(path, {k: t.data for k, t in self.params.items()})
        Path(str(path) + ".cfg").write_text(self.cfg.to_text() + "\n", encoding="utf-8")

    @classmethod
    def load_checkpoint(cls, path, expected_cfg: ModelConfig | None = None) -> "JSCCModel":
        cfg_path = Path(str(path) + ".cfg")
        if not cfg_path.exists():
            raise ad.FormatError(f"missing config sidecar: {cfg_path}")
        cfg = ModelConfig.from_text(cfg_path.read_text(encoding="utf-8"))
        if expected_cfg is not None and cfg != expected_cfg:
            raise ConfigMismatchError(
                f"checkpoint config {cfg} != expected {expected_cfg}")
        tensors = ad.load_tensors(path)
        model = cls(cfg, seed=0)
        if set(tensors) != set(model.params):
            raise ConfigMismatchError(
                f"checkpoint tensor names do not match the architecture: "
                f"missing {sorted(set(model.params) - set(tensors))[:3]}, "
                f"extra {sorted(set(tensors) - set(model.params))[:3]}")
        for name, arr in tensors.items():
            if arr.shape != model.params[name].data.shape:
                raise ConfigMismatchError(
                    f"tensor {name}: checkpoint shape {arr.shape} != "
                    f"model shape {model.params[name].data.shape}")
            model.params[name].data = arr.copy()
        return model
