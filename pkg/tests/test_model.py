import numpy as np
import pytest

import argspan.autodiff as ad
from argspan.model import (
    ForwardOutputs,
    ModelConfig,
    ModelError,
    PassCounter,
    forward,
    forward_sequential,
    init_params,
    make_selector,
    param_count,
    span_logits,
)
from argspan.prompting import PromptLayout, Slot


def tiny_config(**kw):
    defaults = dict(hidden=8, enc_layers=1, dec_layers=1, heads=2, ffn_dim=16,
                    max_positions=32, dropout=0.0, seed=0)
    defaults.update(kw)
    return ModelConfig(**defaults)


def tiny_layout():
    return PromptLayout(
        event_type="attack",
        tokens=(5, 6, 7, 8),
        slots=(Slot("victim", 0, (0, 0)), Slot("place", 0, (2, 3))),
    )


def test_param_count_matches_manual_formula():
    cfg = tiny_config()
    v, h, f, p = 11, cfg.hidden, cfg.ffn_dim, cfg.max_positions
    attn = 4 * h * h + 4 * h
    ln = 2 * h
    ffn = h * f + f + f * h + h
    enc = cfg.enc_layers * (2 * ln + attn + ffn) + ln  # final norm
    dec = cfg.dec_layers * (3 * ln + 2 * attn + ffn) + ln
    expected = v * h + p * h + 2 * h + enc + dec
    assert param_count(cfg, vocab_size=v) == expected


def test_param_count_zero_layers_drops_final_norms():
    cfg = tiny_config(enc_layers=0, dec_layers=0)
    v, h, p = 11, cfg.hidden, cfg.max_positions
    assert param_count(cfg, vocab_size=v) == v * h + p * h + 2 * h


def test_init_deterministic_and_structured():
    cfg = tiny_config(seed=3)
    p1 = init_params(cfg, vocab_size=11)
    p2 = init_params(cfg, vocab_size=11)
    assert p1.keys() == p2.keys()
    for name in p1:
        np.testing.assert_array_equal(p1[name].data, p2[name].data)
        assert p1[name].requires_grad
    p3 = init_params(tiny_config(seed=4), vocab_size=11)
    assert not np.array_equal(p1["tok_emb"].data, p3["tok_emb"].data)
    # selectors and norm gains start at one, biases at zero
    np.testing.assert_array_equal(p1["sel_start"].data, np.ones(cfg.hidden, dtype=np.float32))
    np.testing.assert_array_equal(p1["sel_end"].data, np.ones(cfg.hidden, dtype=np.float32))
    np.testing.assert_array_equal(p1["enc0_ln1_g"].data, np.ones(cfg.hidden, dtype=np.float32))
    np.testing.assert_array_equal(p1["enc0_attn_bq"].data, np.zeros(cfg.hidden, dtype=np.float32))
    assert sum(p.data.size for p in p1.values()) == param_count(cfg, 11)


@pytest.mark.parametrize("bad", [
    dict(hidden=6, heads=4),
    dict(dropout=1.0),
    dict(dropout=-0.1),
    dict(enc_layers=-1),
    dict(decoder_self_attention="mystery"),
    dict(hidden=0),
])
def test_config_validation_rejects(bad):
    with pytest.raises(ModelError):
        tiny_config(**bad).validate()


def test_config_dict_round_trip():
    cfg = tiny_config(decoder_self_attention="causal", context_via_decoder=False)
    assert ModelConfig.from_dict(cfg.to_dict()) == cfg


def test_forward_shapes_and_determinism():
    cfg = tiny_config()
    params = init_params(cfg, vocab_size=11)
    ids = [0, 9, 3, 10, 4, 6]
    layout = tiny_layout()
    out = forward(params, cfg, ids, layout)
    assert isinstance(out, ForwardOutputs)
    assert out.h_enc.shape == (len(ids), cfg.hidden)
    assert out.h_x.shape == (len(ids), cfg.hidden)
    assert out.h_pt.shape == (len(layout.tokens), cfg.hidden)
    assert len(out.start_logits) == len(layout.slots) == len(out.end_logits)
    for s, e, psi in zip(out.start_logits, out.end_logits, out.slot_features):
        assert s.shape == (len(ids),) and e.shape == (len(ids),)
        assert psi.shape == (cfg.hidden,)
    again = forward(params, cfg, ids, layout)
    for a, b in zip(out.start_logits, again.start_logits):
        np.testing.assert_array_equal(a.data, b.data)


def test_zero_layer_stacks_are_identity():
    cfg = tiny_config(enc_layers=0, dec_layers=0)
    params = init_params(cfg, vocab_size=11)
    ids = [0, 9, 3]
    out = forward(params, cfg, ids, tiny_layout())
    emb = ad.embedding(params["tok_emb"], ids).data + ad.embedding(
        params["pos_emb"], [0, 1, 2]).data
    np.testing.assert_array_equal(out.h_enc.data, emb)
    np.testing.assert_array_equal(out.h_x.data, emb)


def test_context_skips_decoder_when_disabled():
    cfg = tiny_config(context_via_decoder=False)
    params = init_params(cfg, vocab_size=11)
    out = forward(params, cfg, [0, 9, 3], tiny_layout())
    assert out.h_x is out.h_enc
    cfg2 = tiny_config(context_via_decoder=True)
    out2 = forward(init_params(cfg2, vocab_size=11), cfg2, [0, 9, 3], tiny_layout())
    assert not np.array_equal(out2.h_x.data, out2.h_enc.data)


def test_slot_feature_pools_prompt_rows():
    cfg = tiny_config()
    params = init_params(cfg, vocab_size=11)
    out = forward(params, cfg, [0, 9, 3], tiny_layout())
    np.testing.assert_allclose(out.slot_features[0].data, out.h_pt.data[0], rtol=1e-6)
    np.testing.assert_allclose(
        out.slot_features[1].data, out.h_pt.data[2:4].mean(axis=0), rtol=1e-6)


def test_selector_is_pass_through_at_init():
    psi = ad.Tensor(np.arange(4.0))
    ones = ad.Tensor(np.ones(4))
    sel_s, sel_e = make_selector(psi, ones, ones)
    np.testing.assert_array_equal(sel_s.data, psi.data)
    np.testing.assert_array_equal(sel_e.data, psi.data)


def test_span_logits_is_plain_dot_product_no_bias():
    rng = np.random.default_rng(0)
    h_x = ad.Tensor(rng.standard_normal((5, 4)))
    sel = ad.Tensor(rng.standard_normal(4))
    np.testing.assert_allclose(span_logits(sel, h_x).data, h_x.data @ sel.data)


def test_joint_pass_counts_one_per_event():
    cfg = tiny_config()
    params = init_params(cfg, vocab_size=11)
    counter = PassCounter()
    for _ in range(3):
        forward(params, cfg, [0, 9, 3], tiny_layout(), counter=counter)
    assert counter.prompt_passes == 3


def test_sequential_pass_counts_one_per_slot():
    cfg = tiny_config()
    params = init_params(cfg, vocab_size=11)
    counter = PassCounter()
    forward_sequential(params, cfg, [0, 9, 3], tiny_layout(), counter=counter)
    assert counter.prompt_passes == len(tiny_layout().slots)


def test_sequential_matches_joint_exactly():
    cfg = tiny_config(enc_layers=2, dec_layers=2)
    params = init_params(cfg, vocab_size=11)
    ids = [0, 9, 3, 10, 4]
    joint = forward(params, cfg, ids, tiny_layout())
    seq = forward_sequential(params, cfg, ids, tiny_layout())
    for a, b in zip(joint.start_logits + joint.end_logits,
                    seq.start_logits + seq.end_logits):
        np.testing.assert_array_equal(a.data, b.data)


def test_forward_rejects_overlong_input_and_bad_slot():
    cfg = tiny_config(max_positions=4)
    params = init_params(cfg, vocab_size=11)
    with pytest.raises(ModelError, match="max_positions"):
        forward(params, cfg, [0, 1, 2, 3, 4], tiny_layout())
    bad_layout = PromptLayout("attack", (5, 6), slots=(Slot("victim", 0, (0, 3)),))
    with pytest.raises(ModelError, match="slot"):
        forward(params, cfg, [0, 1], bad_layout)


def test_backward_reaches_every_parameter_family():
    cfg = tiny_config()
    params = init_params(cfg, vocab_size=11, dtype=np.float64)
    out = forward(params, cfg, [0, 9, 3, 10], tiny_layout())
    loss = ad.add(ad.nll_of_index(out.start_logits[0], 1),
                  ad.nll_of_index(out.end_logits[1], 2))
    loss.backward()
    for name, t in params.items():
        assert t.grad is not None, f"no gradient reached {name}"
        assert np.all(np.isfinite(t.grad)), f"non-finite gradient in {name}"
    assert np.any(params["sel_start"].grad != 0)
    assert np.any(params["sel_end"].grad != 0)


def test_dropout_changes_training_forward_only():
    cfg = tiny_config(dropout=0.5)
    params = init_params(cfg, vocab_size=11)
    ids = [0, 9, 3]
    a = forward(params, cfg, ids, tiny_layout(), dropout_rng=np.random.default_rng(0))
    b = forward(params, cfg, ids, tiny_layout(), dropout_rng=np.random.default_rng(1))
    assert not np.array_equal(a.start_logits[0].data, b.start_logits[0].data)
    c = forward(params, cfg, ids, tiny_layout())  # no rng: dropout off
    d = forward(params, cfg, ids, tiny_layout())
    np.testing.assert_array_equal(c.start_logits[0].data, d.start_logits[0].data)


def test_causal_decoder_option_changes_outputs():
    base = tiny_config(dec_layers=2)
    causal = tiny_config(dec_layers=2, decoder_self_attention="causal")
    params = init_params(base, vocab_size=11)
    ids = [0, 9, 3]
    out_b = forward(params, base, ids, tiny_layout())
    out_c = forward(params, causal, ids, tiny_layout())
    assert not np.array_equal(out_b.h_pt.data, out_c.h_pt.data)
