"""Dataset structures and JSONL input/output.

A dataset file holds one document per line.  Each document carries its
tokens, sentence boundaries and a list of annotated events; every event
has a trigger span, an event type and a list of role-labelled argument
spans.  Spans in files are token ranges with an exclusive end; in memory
every span is inclusive on both ends.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, replace

import numpy as np

log = logging.getLogger(__name__)


class IngestionError(ValueError):
    """A dataset file is malformed or internally inconsistent."""


@dataclass(frozen=True)
class Argument:
    role: str
    start: int  # inclusive token index
    end: int    # inclusive token index


@dataclass(frozen=True)
class EventInstance:
    """One (document, event) pair: the unit the model consumes."""

    doc_id: str
    tokens: tuple[str, ...]
    sent_starts: tuple[int, ...]
    event_type: str
    trigger: tuple[int, int]          # inclusive span
    args: tuple[Argument, ...] = ()
    event_index: int = 0              # position of the event within its document

    @property
    def key(self) -> tuple[str, int, int, str]:
        """Alignment key used to pair predictions with gold events."""
        return (self.doc_id, self.trigger[0], self.trigger[1], self.event_type)

    def sentence_of(self, token_index: int) -> int:
        s = 0
        for k, start in enumerate(self.sent_starts):
            if start <= token_index:
                s = k
            else:
                break
        return s


def _check_span(start, end, n_tokens: int, what: str, doc_id: str, line_no: int):
    if not (isinstance(start, int) and isinstance(end, int)):
        raise IngestionError(f"line {line_no} (doc {doc_id!r}): {what} span must be integers, got ({start!r}, {end!r})")
    if not (0 <= start < end <= n_tokens):
        raise IngestionError(
            f"line {line_no} (doc {doc_id!r}): {what} span ({start}, {end}) out of range for {n_tokens} tokens"
        )


def load_jsonl(path) -> list[EventInstance]:
    """Read a dataset file into a flat list of event instances.

    File spans use exclusive ends and are converted to inclusive ones here.
    Malformed lines raise :class:`IngestionError` naming the offending
    document.  An empty file is legal but logged as a warning.
    """
    instances: list[EventInstance] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise IngestionError(f"line {line_no}: invalid JSON ({exc})") from exc
            try:
                doc_id = doc["doc_id"]
                tokens = tuple(doc["tokens"])
                sent_starts = tuple(doc.get("sent_starts", [0]))
                events = doc["events"]
            except (KeyError, TypeError) as exc:
                raise IngestionError(f"line {line_no}: missing field {exc}") from exc
            if not tokens:
                raise IngestionError(f"line {line_no} (doc {doc_id!r}): empty token list")
            if not sent_starts or sent_starts[0] != 0 or list(sent_starts) != sorted(set(sent_starts)):
                raise IngestionError(
                    f"line {line_no} (doc {doc_id!r}): sent_starts must be strictly increasing and begin at 0"
                )
            for ev_idx, ev in enumerate(events):
                try:
                    trig = ev["trigger"]
                    t_start, t_end = trig["start"], trig["end"]
                    ev_type = ev["event_type"]
                    raw_args = ev.get("arguments", [])
                except (KeyError, TypeError) as exc:
                    raise IngestionError(f"line {line_no} (doc {doc_id!r}): malformed event ({exc})") from exc
                _check_span(t_start, t_end, len(tokens), "trigger", doc_id, line_no)
                args = []
                for a in raw_args:
                    _check_span(a.get("start"), a.get("end"), len(tokens), f"argument {a.get('role')!r}", doc_id, line_no)
                    args.append(Argument(role=a["role"], start=a["start"], end=a["end"] - 1))
                instances.append(
                    EventInstance(
                        doc_id=doc_id,
                        tokens=tokens,
                        sent_starts=sent_starts,
                        event_type=ev_type,
                        trigger=(t_start, t_end - 1),
                        args=tuple(args),
                        event_index=ev_idx,
                    )
                )
    if not instances:
        log.warning("dataset %s contains no events", path)
    return instances


def save_jsonl(instances: list[EventInstance], path) -> None:
    """Write instances back to disk, regrouping events that share a document."""
    docs: list[dict] = []
    index: dict[tuple[str, tuple[str, ...]], dict] = {}
    for inst in instances:
        key = (inst.doc_id, inst.tokens)
        if key not in index:
            doc = {
                "doc_id": inst.doc_id,
                "tokens": list(inst.tokens),
                "sent_starts": list(inst.sent_starts),
                "events": [],
            }
            index[key] = doc
            docs.append(doc)
        index[key]["events"].append(
            {
                "event_type": inst.event_type,
                "trigger": {"start": inst.trigger[0], "end": inst.trigger[1] + 1},
                "arguments": [
                    {"role": a.role, "start": a.start, "end": a.end + 1} for a in inst.args
                ],
            }
        )
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(json.dumps(doc, sort_keys=True) + "\n")


def subsample(instances: list[EventInstance], ratio: float, seed: int) -> list[EventInstance]:
    """Keep a seeded random fraction of instances, preserving their order.

    The sample size is ``ceil(ratio * len(instances))``; ratio 1.0 returns
    the list unchanged.
    """
    if not 0.0 < ratio <= 1.0:
        raise ValueError(f"subsample ratio must be in (0, 1], got {ratio}")
    if ratio == 1.0:
        return list(instances)
    k = math.ceil(ratio * len(instances))
    rng = np.random.default_rng(seed)
    picked = sorted(rng.choice(len(instances), size=k, replace=False).tolist())
    return [instances[i] for i in picked]


def shuffle_argument_order(instances: list[EventInstance], seed: int) -> list[EventInstance]:
    """Randomly permute each event's argument list (used for order-sensitivity studies)."""
    rng = np.random.default_rng(seed)
    out = []
    for inst in instances:
        args = list(inst.args)
        perm = rng.permutation(len(args))
        out.append(replace(inst, args=tuple(args[i] for i in perm)))
    return out
