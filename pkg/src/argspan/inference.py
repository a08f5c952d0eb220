"""Greedy per-slot span decoding and event-level prediction assembly.

Decoding is threshold-free by design: each slot yields exactly the
argmax span under its start/end logits, and slots that prefer the
no-answer span (0,0) contribute nothing.  There is no tunable score
cutoff anywhere on this path.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .data import EventInstance
from .textenc import MarkedContext


@dataclass(frozen=True)
class ArgumentPrediction:
    role: str
    start: int        # inclusive, original document coordinates
    end: int          # inclusive
    score: float      # start+end logit sum
    slot_index: int = 0


@dataclass
class EventPrediction:
    doc_id: str
    event_type: str
    trigger: tuple[int, int]
    items: list[ArgumentPrediction] = field(default_factory=list)
    dropped_spans: int = 0  # spans that could not be mapped back (diagnostics)

    @property
    def key(self) -> tuple[str, int, int, str]:
        return (self.doc_id, self.trigger[0], self.trigger[1], self.event_type)


def greedy_span(start_logits, end_logits, max_span_len: int, blocked=(0,)) -> tuple[int, int]:
    """Best admissible span under additive start/end scores.

    Admissible pairs are (0,0) — the no-answer span — and every (i, j)
    with i <= j, span length <= ``max_span_len``, that avoids all
    ``blocked`` positions (sequence start and trigger markers).  Ties are
    broken toward the smallest i, then the smallest j, which makes (0,0)
    win any tie it participates in.
    """
    s = np.asarray(start_logits)
    e = np.asarray(end_logits)
    if not np.issubdtype(s.dtype, np.floating):
        s = s.astype(np.float64)
    if not np.issubdtype(e.dtype, np.floating):
        e = e.astype(np.float64)
    L = s.shape[0]
    if L < 1:
        raise ValueError("logits must be non-empty")
    if max_span_len < 1:
        raise ValueError(f"max_span_len must be >= 1, got {max_span_len}")
    cap = min(max_span_len, L)

    block_idx = np.unique([b for b in blocked if 0 <= b < L]).astype(np.intp)
    if len(block_idx):
        pos = np.searchsorted(block_idx, np.arange(L))
        next_blocked = np.where(pos < len(block_idx), block_idx[np.minimum(pos, len(block_idx) - 1)], L)
    else:
        next_blocked = np.full(L, L, dtype=np.intp)

    # scores[d, i] = score of span (i, i+d), -inf when inadmissible
    scores = np.full((cap, L), -np.inf, dtype=s.dtype)
    for d in range(cap):
        upper = L - d
        if upper <= 0:
            break
        row = scores[d, :upper]
        row[:] = s[:upper] + e[d:]
        ivec = np.arange(upper)
        row[(ivec < 1) | (next_blocked[:upper] <= ivec + d)] = -np.inf

    best = scores.max()
    no_answer = s[0] + e[0]
    if not np.isfinite(best) or no_answer >= best:
        return (0, 0)
    per_start = scores.max(axis=0)
    i = int(np.argmax(per_start == best))
    d = int(np.argmax(scores[:, i] == best))
    return (i, i + d)


def extract_event(outputs, layout, marked: MarkedContext, max_span_len: int = 10) -> list[ArgumentPrediction]:
    """Decode every slot of one event and map spans back to document coordinates.

    No-answer slots are dropped; duplicate spans from sibling slots are
    kept (deduplication is the scorer's business).
    """
    blocked = marked.blocked_positions()
    preds: list[ArgumentPrediction] = []
    for k, slot in enumerate(layout.slots):
        s = np.asarray(outputs.start_logits[k].data)
        e = np.asarray(outputs.end_logits[k].data)
        span = greedy_span(s, e, max_span_len, blocked)
        if span == (0, 0):
            continue
        os_, oe = marked.to_original(span[0], span[1])
        preds.append(
            ArgumentPrediction(
                role=slot.role,
                start=os_,
                end=oe,
                score=float(s[span[0]] + e[span[1]]),
                slot_index=k,
            )
        )
    return preds


def prediction_for_instance(inst: EventInstance, items: list[ArgumentPrediction]) -> EventPrediction:
    return EventPrediction(
        doc_id=inst.doc_id,
        event_type=inst.event_type,
        trigger=inst.trigger,
        items=list(items),
    )


def save_predictions(preds: list[EventPrediction], path) -> None:
    """One JSON object per event; spans are end-exclusive in the file."""
    with open(path, "w", encoding="utf-8") as fh:
        for p in preds:
            obj = {
                "doc_id": p.doc_id,
                "event_type": p.event_type,
                "trigger": {"start": p.trigger[0], "end": p.trigger[1] + 1},
                "predictions": [
                    {"role": a.role, "start": a.start, "end": a.end + 1, "score": a.score}
                    for a in p.items
                ],
            }
            fh.write(json.dumps(obj, sort_keys=True) + "\n")


def load_predictions(path) -> list[EventPrediction]:
    out: list[EventPrediction] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                trigger = (obj["trigger"]["start"], obj["trigger"]["end"] - 1)
                items = [
                    ArgumentPrediction(
                        role=a["role"], start=a["start"], end=a["end"] - 1, score=float(a.get("score", 0.0))
                    )
                    for a in obj["predictions"]
                ]
                out.append(
                    EventPrediction(
                        doc_id=obj["doc_id"],
                        event_type=obj["event_type"],
                        trigger=trigger,
                        items=items,
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ValueError(f"prediction file line {line_no}: {exc}") from exc
    return out
