"""Encoder-decoder span-selection model.

The context (with trigger markers) is encoded once.  Two independent
decoder passes cross-attend into that encoding: one with the context
embeddings as queries (an event-aware context representation) and one
with the prompt embeddings as queries (a context-aware prompt
representation).  Context and prompt are never concatenated into a
single input.

Each prompt slot is mean-pooled into a feature vector, gated elementwise
by the shared start/end selector pair, and dotted against every context
row to produce per-position start/end logits for that slot.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .prompting import PromptLayout


class ModelError(ValueError):
    pass


@dataclass
class ModelConfig:
    hidden: int = 64
    enc_layers: int = 2
    dec_layers: int = 2
    heads: int = 4
    ffn_dim: int = 256
    max_positions: int = 128
    dropout: float = 0.0
    decoder_self_attention: str = "bidirectional"  # or "causal"
    context_via_decoder: bool = True
    seed: int = 0

    def validate(self) -> None:
        if self.hidden < 1 or self.heads < 1 or self.ffn_dim < 1 or self.max_positions < 1:
            raise ModelError("hidden, heads, ffn_dim and max_positions must be >= 1")
        if self.hidden % self.heads != 0:
            raise ModelError(f"hidden ({self.hidden}) must be divisible by heads ({self.heads})")
        if self.enc_layers < 0 or self.dec_layers < 0:
            raise ModelError("layer counts must be >= 0")
        if not 0.0 <= self.dropout < 1.0:
            raise ModelError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.decoder_self_attention not in ("bidirectional", "causal"):
            raise ModelError(f"unknown decoder_self_attention {self.decoder_self_attention!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        cfg = cls(**d)
        cfg.validate()
        return cfg


@dataclass
class ForwardOutputs:
    h_enc: Tensor
    h_x: Tensor
    h_pt: Tensor
    slot_features: list[Tensor]
    start_logits: list[Tensor]
    end_logits: list[Tensor]


class PassCounter:
    """Counts decoder prompt passes, for the one-pass-per-event bookkeeping."""

    def __init__(self):
        self.prompt_passes = 0


def _param_shapes(config: ModelConfig, vocab_size: int) -> dict[str, tuple[int, ...]]:
    h, f = config.hidden, config.ffn_dim
    shapes: dict[str, tuple[int, ...]] = {
        "tok_emb": (vocab_size, h),
        "pos_emb": (config.max_positions, h),
        "sel_start": (h,),
        "sel_end": (h,),
    }

    def attn_block(prefix: str):
        for name in ("wq", "wk", "wv", "wo"):
            shapes[f"{prefix}_{name}"] = (h, h)
        for name in ("bq", "bk", "bv", "bo"):
            shapes[f"{prefix}_{name}"] = (h,)

    def ln(prefix: str):
        shapes[f"{prefix}_g"] = (h,)
        shapes[f"{prefix}_b"] = (h,)

    def ffn(prefix: str):
        shapes[f"{prefix}_w1"] = (h, f)
        shapes[f"{prefix}_b1"] = (f,)
        shapes[f"{prefix}_w2"] = (f, h)
        shapes[f"{prefix}_b2"] = (h,)

    for i in range(config.enc_layers):
        ln(f"enc{i}_ln1")
        attn_block(f"enc{i}_attn")
        ln(f"enc{i}_ln2")
        ffn(f"enc{i}_ffn")
    if config.enc_layers:
        ln("enc_lnf")
    for i in range(config.dec_layers):
        ln(f"dec{i}_ln1")
        attn_block(f"dec{i}_self")
        ln(f"dec{i}_ln2")
        attn_block(f"dec{i}_cross")
        ln(f"dec{i}_ln3")
        ffn(f"dec{i}_ffn")
    if config.dec_layers:
        ln("dec_lnf")
    return shapes


def param_count(config: ModelConfig, vocab_size: int) -> int:
    """Total scalar parameter count — a pure function of config and vocab size."""
    return sum(int(np.prod(s)) for s in _param_shapes(config, vocab_size).values())


def init_params(config: ModelConfig, vocab_size: int, dtype=np.float32) -> dict[str, Tensor]:
    """Initialize parameters from the config seed.

    Weights and embeddings are N(0, 0.02); biases and layer-norm shifts
    are zero; layer-norm gains and the two selector vectors start at one,
    so the selectors begin as pass-through gates.
    """
    config.validate()
    rng = np.random.default_rng(config.seed)
    params: dict[str, Tensor] = {}
    for name, shape in _param_shapes(config, vocab_size).items():
        if name in ("sel_start", "sel_end") or name.endswith("_g"):
            data = np.ones(shape, dtype=dtype)
        elif name.endswith(("_b", "_bq", "_bk", "_bv", "_bo", "_b1", "_b2")):
            data = np.zeros(shape, dtype=dtype)
        else:
            data = rng.normal(0.0, 0.02, size=shape).astype(dtype)
        params[name] = Tensor(data, requires_grad=True)
    return params


def _attn_sublayer(params, prefix: str, x_q: Tensor, x_kv: Tensor, heads: int, causal: bool) -> Tensor:
    q = ad.linear(x_q, params[f"{prefix}_wq"], params[f"{prefix}_bq"])
    k = ad.linear(x_kv, params[f"{prefix}_wk"], params[f"{prefix}_bk"])
    v = ad.linear(x_kv, params[f"{prefix}_wv"], params[f"{prefix}_bv"])
    ctx = ad.attention(q, k, v, heads, causal=causal)
    return ad.linear(ctx, params[f"{prefix}_wo"], params[f"{prefix}_bo"])


def _ffn_sublayer(params, prefix: str, x: Tensor) -> Tensor:
    hidden = ad.gelu(ad.linear(x, params[f"{prefix}_w1"], params[f"{prefix}_b1"]))
    return ad.linear(hidden, params[f"{prefix}_w2"], params[f"{prefix}_b2"])


def _maybe_dropout(x: Tensor, rate: float, rng) -> Tensor:
    if rng is None or rate <= 0.0:
        return x
    return ad.dropout(x, rate, rng)


def embed_sequence(params, config: ModelConfig, ids: list[int], dropout_rng=None) -> Tensor:
    if len(ids) > config.max_positions:
        raise ModelError(f"sequence of {len(ids)} tokens exceeds max_positions {config.max_positions}")
    tok = ad.embedding(params["tok_emb"], ids)
    pos = ad.embedding(params["pos_emb"], list(range(len(ids))))
    return _maybe_dropout(ad.add(tok, pos), config.dropout, dropout_rng)


def encode(params, config: ModelConfig, x: Tensor, dropout_rng=None) -> Tensor:
    """Pre-norm self-attention encoder stack; zero layers = identity."""
    for i in range(config.enc_layers):
        normed = ad.layer_norm(x, params[f"enc{i}_ln1_g"], params[f"enc{i}_ln1_b"])
        attn_out = _attn_sublayer(params, f"enc{i}_attn", normed, normed, config.heads, causal=False)
        x = ad.add(x, _maybe_dropout(attn_out, config.dropout, dropout_rng))
        normed = ad.layer_norm(x, params[f"enc{i}_ln2_g"], params[f"enc{i}_ln2_b"])
        x = ad.add(x, _maybe_dropout(_ffn_sublayer(params, f"enc{i}_ffn", normed), config.dropout, dropout_rng))
    if config.enc_layers:
        x = ad.layer_norm(x, params["enc_lnf_g"], params["enc_lnf_b"])
    return x


def decode(params, config: ModelConfig, queries: Tensor, memory: Tensor, dropout_rng=None) -> Tensor:
    """Decoder stack: self-attention over queries, cross-attention into memory."""
    causal = config.decoder_self_attention == "causal"
    x = queries
    for i in range(config.dec_layers):
        normed = ad.layer_norm(x, params[f"dec{i}_ln1_g"], params[f"dec{i}_ln1_b"])
        self_out = _attn_sublayer(params, f"dec{i}_self", normed, normed, config.heads, causal=causal)
        x = ad.add(x, _maybe_dropout(self_out, config.dropout, dropout_rng))
        normed = ad.layer_norm(x, params[f"dec{i}_ln2_g"], params[f"dec{i}_ln2_b"])
        cross_out = _attn_sublayer(params, f"dec{i}_cross", normed, memory, config.heads, causal=False)
        x = ad.add(x, _maybe_dropout(cross_out, config.dropout, dropout_rng))
        normed = ad.layer_norm(x, params[f"dec{i}_ln3_g"], params[f"dec{i}_ln3_b"])
        x = ad.add(x, _maybe_dropout(_ffn_sublayer(params, f"dec{i}_ffn", normed), config.dropout, dropout_rng))
    if config.dec_layers:
        x = ad.layer_norm(x, params["dec_lnf_g"], params["dec_lnf_b"])
    return x


def slot_feature(h_pt: Tensor, token_range: tuple[int, int]) -> Tensor:
    """Mean-pool the prompt rows of one slot (inclusive range)."""
    return ad.mean_rows(h_pt, token_range[0], token_range[1])


def make_selector(psi: Tensor, sel_start: Tensor, sel_end: Tensor) -> tuple[Tensor, Tensor]:
    """Gate a slot feature with the shared start/end selector pair."""
    return ad.mul(psi, sel_start), ad.mul(psi, sel_end)


def span_logits(selector: Tensor, h_x: Tensor) -> Tensor:
    """Per-position scores: the selector dotted against every context row (no bias)."""
    return ad.matmul(h_x, selector)


def forward(
    params: dict[str, Tensor],
    config: ModelConfig,
    context_ids: list[int],
    layout: PromptLayout,
    dropout_rng=None,
    counter: PassCounter | None = None,
) -> ForwardOutputs:
    """Full forward pass for one event: one encoder pass, two decoder passes."""
    for slot in layout.slots:
        if slot.token_range[1] >= len(layout.tokens):
            raise ModelError(f"slot {slot} exceeds prompt length {len(layout.tokens)}")
    x_emb = embed_sequence(params, config, context_ids, dropout_rng)
    h_enc = encode(params, config, x_emb, dropout_rng)
    h_x = decode(params, config, x_emb, h_enc, dropout_rng) if config.context_via_decoder else h_enc
    p_emb = embed_sequence(params, config, list(layout.tokens), dropout_rng)
    h_pt = decode(params, config, p_emb, h_enc, dropout_rng)
    if counter is not None:
        counter.prompt_passes += 1
    features, starts, ends = [], [], []
    for slot in layout.slots:
        psi = slot_feature(h_pt, slot.token_range)
        sel_s, sel_e = make_selector(psi, params["sel_start"], params["sel_end"])
        features.append(psi)
        starts.append(span_logits(sel_s, h_x))
        ends.append(span_logits(sel_e, h_x))
    return ForwardOutputs(h_enc=h_enc, h_x=h_x, h_pt=h_pt, slot_features=features,
                          start_logits=starts, end_logits=ends)


def forward_sequential(
    params: dict[str, Tensor],
    config: ModelConfig,
    context_ids: list[int],
    layout: PromptLayout,
    counter: PassCounter | None = None,
) -> ForwardOutputs:
    """Benchmark-compatibility mode: one decoder prompt pass *per slot*.

    Numerically identical to :func:`forward` (the prompt pass does not
    depend on the slot), just wasteful on purpose so pass counts and
    timings of joint decoding can be compared against it.
    """
    x_emb = embed_sequence(params, config, context_ids)
    h_enc = encode(params, config, x_emb)
    h_x = decode(params, config, x_emb, h_enc) if config.context_via_decoder else h_enc
    p_emb = embed_sequence(params, config, list(layout.tokens))
    features, starts, ends = [], [], []
    h_pt = None
    for slot in layout.slots:
        h_pt = decode(params, config, p_emb, h_enc)
        if counter is not None:
            counter.prompt_passes += 1
        psi = slot_feature(h_pt, slot.token_range)
        sel_s, sel_e = make_selector(psi, params["sel_start"], params["sel_end"])
        features.append(psi)
        starts.append(span_logits(sel_s, h_x))
        ends.append(span_logits(sel_e, h_x))
    if h_pt is None:  # layout with no slots cannot occur, but keep shapes total
        h_pt = decode(params, config, p_emb, h_enc)
        if counter is not None:
            counter.prompt_passes += 1
    return ForwardOutputs(h_enc=h_enc, h_x=h_x, h_pt=h_pt, slot_features=features,
                          start_logits=starts, end_logits=ends)
