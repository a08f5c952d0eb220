import numpy as np
import pytest

from argspan.data import EventInstance
from argspan.inference import (
    ArgumentPrediction,
    EventPrediction,
    extract_event,
    greedy_span,
    load_predictions,
    prediction_for_instance,
    save_predictions,
)
from argspan.model import ForwardOutputs
from argspan.prompting import PromptLayout, Slot
from argspan.textenc import RESERVED, Vocab, mark_trigger
from oracles import exhaustive_best_span


def test_greedy_span_picks_best_pair_within_cap():
    start = np.array([0.0, 5.0, 1.0, 0.0])
    end = np.array([0.0, 1.0, 6.0, 0.0])
    assert greedy_span(start, end, max_span_len=10) == (1, 2)
    # a cap of one forces single-token spans: (2,2) scores 7, (1,1) only 6
    assert greedy_span(start, end, max_span_len=1) == (2, 2)


def test_greedy_span_no_answer_wins_ties_and_flat_inputs():
    zeros = np.zeros(6)
    assert greedy_span(zeros, zeros, 10) == (0, 0)
    start = np.array([3.0, 3.0, 0.0])
    end = np.array([3.0, 3.0, 0.0])
    # (1,1) ties the no-answer score of 6: no-answer keeps it
    assert greedy_span(start, end, 10) == (0, 0)


def test_greedy_span_cap_one_fixtures():
    assert greedy_span(np.array([0.0, 1.0, 9.0]), np.array([0.0, 9.0, 1.0]), 1) == (1, 1)
    assert greedy_span(np.array([0.0, 9.0, 1.0]), np.array([0.0, 1.0, 9.0]), 1) == (1, 1)


def test_greedy_span_ties_prefer_smallest_start_then_end():
    # spans (1,1), (1,2), (2,2) all score 4; (1,1) must win
    start = np.array([0.0, 2.0, 2.0])
    end = np.array([0.0, 2.0, 2.0])
    assert greedy_span(start, end, 10) == (1, 1)


def test_greedy_span_respects_blocked_positions():
    start = np.array([0.0, 1.0, 9.0, 1.0, 2.0])
    end = np.array([0.0, 1.0, 9.0, 1.0, 2.0])
    assert greedy_span(start, end, 10, blocked=(0,)) == (2, 2)
    # blocking the peak moves the choice elsewhere
    assert greedy_span(start, end, 10, blocked=(0, 2)) == (4, 4)
    # spans may not straddle a blocked position
    start2 = np.array([0.0, 5.0, 0.0, 5.0])
    end2 = np.array([0.0, 0.0, 0.0, 5.0])
    assert greedy_span(start2, end2, 10, blocked=(0, 2)) == (3, 3)


def test_greedy_span_never_starts_at_zero_unless_no_answer():
    start = np.array([10.0, 0.0, 0.0])
    end = np.array([0.0, 0.0, 11.0])
    # (0,2) would score 21, but index 0 is reserved for no-answer only
    assert greedy_span(start, end, 10) == (1, 2)
    # and an exact tie with the no-answer score goes to no-answer
    assert greedy_span(start, np.array([0.0, 0.0, 10.0]), 10) == (0, 0)


def test_greedy_span_input_validation():
    with pytest.raises(ValueError):
        greedy_span(np.zeros(0), np.zeros(0), 5)
    with pytest.raises(ValueError):
        greedy_span(np.zeros(3), np.zeros(3), 0)


def test_greedy_span_single_token_sequence():
    assert greedy_span(np.array([1.0]), np.array([1.0]), 5) == (0, 0)


@pytest.mark.parametrize("cap", [1, 5, 10, None])
def test_greedy_span_matches_exhaustive_oracle(cap):
    rng = np.random.default_rng(0 if cap is None else cap)
    for trial in range(300):
        length = int(rng.integers(1, 33))
        start = rng.standard_normal(length)
        end = rng.standard_normal(length)
        blocked = (0,) if trial % 2 == 0 else (0, int(rng.integers(0, length)))
        eff_cap = cap or length
        got = greedy_span(start, end, eff_cap, blocked)
        want = exhaustive_best_span(start, end, eff_cap, blocked)
        assert got == want, f"trial {trial}: len={length} cap={eff_cap} blocked={blocked}"


def test_greedy_span_matches_oracle_on_tied_integer_scores():
    rng = np.random.default_rng(99)
    for trial in range(200):
        length = int(rng.integers(2, 12))
        start = rng.integers(0, 3, size=length).astype(float)
        end = rng.integers(0, 3, size=length).astype(float)
        got = greedy_span(start, end, 4, (0,))
        want = exhaustive_best_span(start, end, 4, (0,))
        assert got == want, f"trial {trial}"


# -- event-level extraction -------------------------------------------------


def _marked_fixture():
    vocab = Vocab(list(RESERVED) + ["alpha", "bravo", "charlie", "delta", "echo"])
    inst = EventInstance(
        doc_id="d0",
        tokens=["alpha", "bravo", "charlie", "delta", "echo"],
        sent_starts=[0],
        event_type="attack",
        trigger=(2, 2),
        args=[],
    )
    ids = vocab.encode(inst.tokens)
    return inst, mark_trigger(ids, inst.trigger, (), inst.sent_starts)


def _outputs_for(marked, spans):
    """Build logits whose greedy decode yields exactly ``spans`` per slot."""
    length = len(marked.ids)
    starts, ends = [], []
    for span in spans:
        s = np.full(length, -5.0)
        e = np.full(length, -5.0)
        if span != (0, 0):
            s[span[0]] = 5.0
            e[span[1]] = 5.0
        else:
            s[0] = 5.0
            e[0] = 5.0
        starts.append(_T(s))
        ends.append(_T(e))
    return ForwardOutputs(None, None, None, [], starts, ends)


class _T:
    def __init__(self, data):
        self.data = data


def _layout(roles):
    return PromptLayout(
        event_type="attack",
        tokens=tuple(range(5, 5 + len(roles))),
        slots=tuple(Slot(r, i, (i, i)) for i, r in enumerate(roles)),
    )


def test_extract_event_maps_back_to_document_coordinates():
    inst, marked = _marked_fixture()
    # marked layout: [BOS, alpha, bravo, <t>, charlie, </t>, delta, echo]
    layout = _layout(["victim", "place"])
    outputs = _outputs_for(marked, [(1, 2), (6, 7)])
    preds = extract_event(outputs, layout, marked)
    assert [(p.role, p.start, p.end) for p in preds] == [
        ("victim", 0, 1), ("place", 3, 4)]
    assert all(p.score == pytest.approx(10.0) for p in preds)
    assert [p.slot_index for p in preds] == [0, 1]


def test_extract_event_drops_no_answer_slots():
    inst, marked = _marked_fixture()
    layout = _layout(["victim", "place"])
    outputs = _outputs_for(marked, [(0, 0), (4, 4)])
    preds = extract_event(outputs, layout, marked)
    assert [(p.role, p.start, p.end) for p in preds] == [("place", 2, 2)]
    outputs = _outputs_for(marked, [(0, 0), (0, 0)])
    assert extract_event(outputs, layout, marked) == []


def test_extract_event_keeps_duplicate_spans_from_sibling_slots():
    inst, marked = _marked_fixture()
    layout = PromptLayout(
        event_type="attack",
        tokens=(5, 6),
        slots=(Slot("victim", 0, (0, 0)), Slot("victim", 1, (1, 1))),
    )
    outputs = _outputs_for(marked, [(4, 4), (4, 4)])
    preds = extract_event(outputs, layout, marked)
    assert [(p.role, p.start, p.end) for p in preds] == [
        ("victim", 2, 2), ("victim", 2, 2)]


def test_extract_event_never_selects_marker_positions():
    inst, marked = _marked_fixture()
    layout = _layout(["victim"])
    length = len(marked.ids)
    s = np.full(length, -5.0)
    e = np.full(length, -5.0)
    s[3] = 50.0  # trigger-open marker: blocked
    e[3] = 50.0
    s[4] = 10.0  # the trigger word itself is allowed
    e[4] = 10.0
    outputs = ForwardOutputs(None, None, None, [], [_T(s)], [_T(e)])
    preds = extract_event(outputs, layout, marked)
    assert [(p.start, p.end) for p in preds] == [(2, 2)]


def test_prediction_for_instance_copies_event_identity():
    inst, marked = _marked_fixture()
    items = [ArgumentPrediction("victim", 0, 1, 3.5)]
    pred = prediction_for_instance(inst, items)
    assert pred.doc_id == "d0"
    assert pred.event_type == "attack"
    assert pred.trigger == (2, 2)
    assert pred.items == items
    assert pred.key == ("d0", 2, 2, "attack")


def test_predictions_round_trip_is_end_exclusive_on_disk(tmp_path):
    preds = [
        EventPrediction("d0", "attack", (2, 2),
                        [ArgumentPrediction("victim", 0, 1, 3.5)]),
        EventPrediction("d1", "meeting", (0, 1), []),
    ]
    path = tmp_path / "preds.jsonl"
    save_predictions(preds, path)
    lines = path.read_text().splitlines()
    assert len(lines) == 2
    import json
    first = json.loads(lines[0])
    assert first["trigger"] == {"start": 2, "end": 3}
    assert first["predictions"][0]["start"] == 0
    assert first["predictions"][0]["end"] == 2  # exclusive on disk
    loaded = load_predictions(path)
    assert [p.key for p in loaded] == [p.key for p in preds]
    assert (loaded[0].items[0].role, loaded[0].items[0].start,
            loaded[0].items[0].end) == ("victim", 0, 1)
    assert loaded[0].items[0].score == pytest.approx(3.5)
    assert loaded[1].items == []


def test_load_predictions_reports_bad_lines(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"doc_id": "d0"}\n')
    with pytest.raises(ValueError, match="line 1"):
        load_predictions(path)
    path.write_text("not json\n")
    with pytest.raises(ValueError, match="line 1"):
        load_predictions(path)
