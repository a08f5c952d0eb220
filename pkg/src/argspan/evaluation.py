"""Argument extraction scoring: span identification, role classification,
head-word classification, and the two diagnostic breakdowns.

Credit assignment is greedy one-to-one: within each event, predictions
are visited in descending score order and consume at most one unconsumed
gold argument satisfying the mode's criterion.  Duplicate predictions of
one gold therefore yield a single true positive.

Head-word scoring uses the first token of a span as its head — a stated
simplification (no syntactic parsing here); reports carry a note saying so.
"""

from __future__ import annotations

from dataclasses import dataclass

from .data import Argument, EventInstance
from .inference import ArgumentPrediction, EventPrediction

MODES = ("arg_i", "arg_c", "head_c")
HEAD_NOTE = "head_c uses the first token of each span as its head word"

DISTANCE_BUCKETS = (-2, -1, 0, 1, 2)
ARGNUM_BUCKETS = ("0", "1", "2", "3", ">=4")


class ScoringError(ValueError):
    pass


@dataclass(frozen=True)
class ScoreReport:
    mode: str
    tp: int
    num_pred: int
    num_gold: int
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_counts(cls, mode: str, tp: int, num_pred: int, num_gold: int) -> "ScoreReport":
        if num_pred == 0 and num_gold == 0:
            return cls(mode, 0, 0, 0, 1.0, 1.0, 1.0)
        p = tp / num_pred if num_pred else 0.0
        r = tp / num_gold if num_gold else 0.0
        f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
        return cls(mode, tp, num_pred, num_gold, p, r, f1)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "tp": self.tp,
            "num_pred": self.num_pred,
            "num_gold": self.num_gold,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }


def _criterion(mode: str):
    if mode == "arg_i":
        return lambda p, g, tokens: p.start == g.start and p.end == g.end
    if mode == "arg_c":
        return lambda p, g, tokens: p.start == g.start and p.end == g.end and p.role == g.role
    if mode == "head_c":
        return lambda p, g, tokens: p.role == g.role and tokens[p.start] == tokens[g.start]
    raise ScoringError(f"unknown scoring mode {mode!r}; expected one of {MODES}")


def align_events(
    preds: list[EventPrediction], gold: list[EventInstance]
) -> list[tuple[EventInstance, EventPrediction]]:
    """Pair prediction records with gold events by (doc, trigger, type) key.

    Both files must describe exactly the same event set; mismatches are
    reported with the offending keys.
    """

    def index(records, what):
        table = {}
        for r in records:
            if r.key in table:
                raise ScoringError(f"duplicate event in {what}: {r.key}")
            table[r.key] = r
        return table

    gold_by_key = index(gold, "gold")
    pred_by_key = index(preds, "predictions")
    extra = sorted(set(pred_by_key) - set(gold_by_key))
    missing = sorted(set(gold_by_key) - set(pred_by_key))
    if extra or missing:
        parts = []
        if extra:
            parts.append(f"events only in predictions: {extra[:5]}")
        if missing:
            parts.append(f"events only in gold: {missing[:5]}")
        raise ScoringError("prediction/gold files are not aligned; " + "; ".join(parts))
    return [(gold_by_key[k], pred_by_key[k]) for k in sorted(gold_by_key)]


def _match_event(
    pred_items: list[ArgumentPrediction], gold_args: tuple[Argument, ...], tokens, mode: str
) -> list[tuple[int, int]]:
    """Greedy one-to-one matching; returns (pred_index, gold_index) pairs."""
    ok = _criterion(mode)
    order = sorted(range(len(pred_items)), key=lambda i: (-pred_items[i].score, i))
    taken = [False] * len(gold_args)
    matches = []
    for i in order:
        for j, g in enumerate(gold_args):
            if not taken[j] and ok(pred_items[i], g, tokens):
                taken[j] = True
                matches.append((i, j))
                break
    return matches


def score(preds: list[EventPrediction], gold: list[EventInstance], mode: str) -> ScoreReport:
    _criterion(mode)  # validate early
    tp = num_pred = num_gold = 0
    for inst, pred in align_events(preds, gold):
        num_pred += len(pred.items)
        num_gold += len(inst.args)
        tp += len(_match_event(pred.items, inst.args, inst.tokens, mode))
    return ScoreReport.from_counts(mode, tp, num_pred, num_gold)


def _clip_distance(d: int) -> int:
    return max(DISTANCE_BUCKETS[0], min(DISTANCE_BUCKETS[-1], d))


def breakdown_distance(preds: list[EventPrediction], gold: list[EventInstance]) -> dict[int, ScoreReport]:
    """Role-classification scores bucketed by argument-trigger sentence offset.

    A matched prediction lands in its gold argument's bucket; an unmatched
    one is attributed by its own offset, so bucket counts always sum to the
    overall counts.
    """
    counts = {d: [0, 0, 0] for d in DISTANCE_BUCKETS}  # tp, num_pred, num_gold
    for inst, pred in align_events(preds, gold):
        trig_sent = inst.sentence_of(inst.trigger[0])

        def bucket_of(token_index: int) -> int:
            return _clip_distance(inst.sentence_of(token_index) - trig_sent)

        for g in inst.args:
            counts[bucket_of(g.start)][2] += 1
        matches = dict(_match_event(pred.items, inst.args, inst.tokens, "arg_c"))
        for i, item in enumerate(pred.items):
            if i in matches:
                b = bucket_of(inst.args[matches[i]].start)
                counts[b][0] += 1
            else:
                b = bucket_of(item.start)
            counts[b][1] += 1
    return {d: ScoreReport.from_counts("arg_c", *counts[d]) for d in DISTANCE_BUCKETS}


def _argnum_bucket(n: int) -> str:
    return ">=4" if n >= 4 else str(n)


def breakdown_argnum(preds: list[EventPrediction], gold: list[EventInstance]) -> dict[str, ScoreReport]:
    """Role-classification scores bucketed by each (event, role)'s gold count.

    Predictions for a role with no gold arguments fall into bucket "0"
    (pure false positives), keeping the buckets an exact partition of the
    overall counts.
    """
    counts = {b: [0, 0, 0] for b in ARGNUM_BUCKETS}
    for inst, pred in align_events(preds, gold):
        gold_n: dict[str, int] = {}
        for g in inst.args:
            gold_n[g.role] = gold_n.get(g.role, 0) + 1
        matches = dict(_match_event(pred.items, inst.args, inst.tokens, "arg_c"))
        for role, n in gold_n.items():
            counts[_argnum_bucket(n)][2] += n
        for i, item in enumerate(pred.items):
            b = _argnum_bucket(gold_n.get(item.role, 0))
            counts[b][1] += 1
            if i in matches:
                counts[b][0] += 1
    return {b: ScoreReport.from_counts("arg_c", *counts[b]) for b in ARGNUM_BUCKETS}


def full_report(preds: list[EventPrediction], gold: list[EventInstance], breakdowns: bool = True) -> dict:
    """All three modes plus optional breakdown tables, as a JSON-friendly dict."""
    report: dict = {
        "scores": {mode: score(preds, gold, mode).to_dict() for mode in MODES},
        "notes": [HEAD_NOTE],
    }
    if breakdowns:
        report["breakdown_distance"] = {
            str(d): r.to_dict() for d, r in breakdown_distance(preds, gold).items()
        }
        report["breakdown_argnum"] = {b: r.to_dict() for b, r in breakdown_argnum(preds, gold).items()}
    return report


def gold_as_predictions(gold: list[EventInstance]) -> list[EventPrediction]:
    """Convert gold annotations into prediction records (for protocol tests)."""
    out = []
    for inst in gold:
        items = [
            ArgumentPrediction(role=a.role, start=a.start, end=a.end, score=1.0, slot_index=k)
            for k, a in enumerate(inst.args)
        ]
        out.append(EventPrediction(doc_id=inst.doc_id, event_type=inst.event_type, trigger=inst.trigger, items=items))
    return out
