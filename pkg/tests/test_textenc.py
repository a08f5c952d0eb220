import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from argspan.data import Argument
from argspan.textenc import (
    BOS,
    RESERVED,
    TRIG_CLOSE,
    TRIG_OPEN,
    UNK,
    Vocab,
    VocabError,
    build_vocab,
    mark_trigger,
    window_context,
)


def test_build_vocab_frequency_then_alphabetical():
    v = build_vocab([["b", "a", "b", "c", "a", "b"]])
    # b appears 3x, a 2x, c 1x
    assert [v.decode(i) for i in range(5, 8)] == ["b", "a", "c"]
    v2 = build_vocab([["x", "y"]])
    assert [v2.decode(5), v2.decode(6)] == ["x", "y"]  # tie broken alphabetically


def test_build_vocab_min_count_and_always_include():
    v = build_vocab([["rare", "common", "common"]], min_count=2, always_include=("kept",))
    assert "common" in v and "kept" in v
    assert "rare" not in v
    assert v.encode_word("rare") == UNK


def test_encode_lowercases_and_guards_reserved():
    v = build_vocab([["Word"]])
    assert v.encode_word("WORD") == v.id_of("word")
    # a literal marker string in running text can never produce a marker id
    assert v.encode(["<t>", "</t>", "<bos>"]) == [UNK, UNK, UNK]


def test_vocab_header_is_mandatory():
    with pytest.raises(VocabError):
        Vocab(["not", "reserved"])
    with pytest.raises(VocabError):
        Vocab(list(RESERVED) + ["dup", "dup"])


def test_add_special_and_hash(tmp_path):
    v = build_vocab([["a"]])
    h0 = v.content_hash()
    i = v.add_special("<left0>")
    assert v.add_special("<left0>") == i  # idempotent
    assert v.content_hash() != h0
    with pytest.raises(VocabError):
        v.add_special("has space")
    path = tmp_path / "vocab.txt"
    v.save(path)
    again = Vocab.load(path)
    assert again.content_hash() == v.content_hash()
    assert len(again) == len(v)


def test_mark_trigger_layout_and_shifts():
    # tokens a b c d, trigger (1,2)  ->  BOS a <t> b c </t> d
    ids = [10, 11, 12, 13]
    args = (Argument("L", 0, 0), Argument("R", 3, 3), Argument("T", 1, 2))
    m = mark_trigger(ids, (1, 2), args)
    assert m.ids == [BOS, 10, TRIG_OPEN, 11, 12, TRIG_CLOSE, 13]
    assert m.trigger_range == (2, 5)
    assert m.blocked_positions() == (0, 2, 5)
    by_role = {a.role: (a.start, a.end) for a in m.args}
    assert by_role == {"L": (1, 1), "R": (6, 6), "T": (3, 4)}
    assert m.to_original(1, 1) == (0, 0)
    assert m.to_original(6, 6) == (3, 3)
    assert m.to_original(3, 4) == (1, 2)


def test_mark_trigger_rejects_straddling_spans():
    with pytest.raises(ValueError, match="overlaps the trigger"):
        mark_trigger([1, 2, 3, 4], (1, 2), (Argument("X", 0, 1),))
    with pytest.raises(ValueError, match="overlaps the trigger"):
        mark_trigger([1, 2, 3, 4], (1, 2), (Argument("X", 2, 3),))


def test_mark_trigger_at_edges():
    m = mark_trigger([7, 8], (0, 0))
    assert m.ids == [BOS, TRIG_OPEN, 7, TRIG_CLOSE, 8]
    m = mark_trigger([7, 8], (1, 1))
    assert m.ids == [BOS, 7, TRIG_OPEN, 8, TRIG_CLOSE]
    with pytest.raises(ValueError):
        mark_trigger([7, 8], (1, 2))


def test_mark_trigger_sentence_tracking():
    ids = list(range(6))
    m = mark_trigger(ids, (4, 4), sent_starts=(0, 3))
    assert m.trigger_sentence == 1
    # content token 2 lives in sentence 0, token 5 in sentence 1
    pos2 = m.orig_index.index(2)
    pos5 = m.orig_index.index(5)
    assert m.sentence_index[pos2] == 0
    assert m.sentence_index[pos5] == 1


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_marked_coordinates_invert(data):
    n = data.draw(st.integers(3, 24))
    ts = data.draw(st.integers(0, n - 1))
    te = data.draw(st.integers(ts, min(n - 1, ts + 3)))
    m = mark_trigger(list(range(n)), (ts, te))
    for marked_pos, orig in enumerate(m.orig_index):
        if orig >= 0:
            assert m.to_original(marked_pos, marked_pos) == (orig, orig)
    # every original position appears exactly once
    content = sorted(o for o in m.orig_index if o >= 0)
    assert content == list(range(n))


def test_window_noop_when_short():
    m = mark_trigger(list(range(5)), (2, 2))
    assert window_context(m, 64) is m


def test_window_clamps_and_keeps_trigger():
    n = 40
    m = mark_trigger(list(range(n)), (20, 20), (Argument("near", 19, 19), Argument("far", 0, 1)))
    w = window_context(m, 16)
    assert len(w.ids) == 16
    assert w.ids[0] == BOS
    lo, hi = w.trigger_range
    assert w.ids[lo] == TRIG_OPEN and w.ids[hi] == TRIG_CLOSE
    roles = [a.role for a in w.args]
    assert roles == ["near"]
    assert w.dropped_args == 1
    # surviving span still maps back to the original position
    near = w.args[0]
    assert w.to_original(near.start, near.end) == (19, 19)


def test_window_edge_trigger_spills_budget():
    m = mark_trigger(list(range(30)), (0, 0))
    w = window_context(m, 10)
    assert len(w.ids) == 10
    # nothing exists left of the trigger, so the window extends right:
    # BOS + <t> tok0 </t> + six more content tokens
    assert w.orig_index[-1] == 6


def test_window_too_small_for_trigger_raises():
    m = mark_trigger(list(range(10)), (2, 7))
    with pytest.raises(ValueError):
        window_context(m, 6)


def test_windowed_ids_stay_consistent():
    rng = np.random.default_rng(0)
    for _ in range(50):
        n = int(rng.integers(10, 60))
        ts = int(rng.integers(0, n))
        te = min(n - 1, ts + int(rng.integers(0, 3)))
        m = mark_trigger(list(range(n)), (ts, te))
        max_len = int(rng.integers(te - ts + 4, 70))
        w = window_context(m, max_len)
        assert len(w.ids) <= max_len
        assert len(w.ids) == len(w.orig_index) == len(w.sentence_index)
        for pos, orig in enumerate(w.orig_index):
            if orig >= 0:
                assert w.ids[pos] == orig  # ids were identity in this corpus
