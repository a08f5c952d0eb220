"""Vocabulary and context preparation.

The encoder consumes a *marked* context: the document tokens with a BOS
token prepended and the trigger wrapped in a pair of marker tokens.  All
gold spans are remapped into those marked coordinates, and an inverse map
back to original token positions is kept so predictions can be reported
in document coordinates.
"""

from __future__ import annotations

import hashlib
from bisect import bisect_right
from dataclasses import dataclass, field

from .data import Argument

BOS, EOS, UNK, TRIG_OPEN, TRIG_CLOSE = 0, 1, 2, 3, 4
RESERVED = ("<bos>", "<eos>", "<unk>", "<t>", "</t>")


class VocabError(ValueError):
    pass


class Vocab:
    """Whitespace-token vocabulary with a fixed reserved header.

    Ids 0-4 are BOS, EOS, UNK and the two trigger markers, in that order.
    Corpus words are lowercased; unseen words encode to UNK.  Reserved
    token strings appearing in running text also encode to UNK so that
    marker ids can never be produced by tokenization.
    """

    def __init__(self, tokens: list[str]):
        if tuple(tokens[: len(RESERVED)]) != RESERVED:
            raise VocabError("vocabulary must start with the reserved header block")
        if len(set(tokens)) != len(tokens):
            raise VocabError("vocabulary contains duplicate tokens")
        self._tokens: list[str] = list(tokens)
        self._ids: dict[str, int] = {t: i for i, t in enumerate(tokens)}

    def __len__(self) -> int:
        return len(self._tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._ids

    def encode_word(self, word: str) -> int:
        w = word.lower()
        if w in RESERVED:
            return UNK
        return self._ids.get(w, UNK)

    def encode(self, words: list[str]) -> list[int]:
        return [self.encode_word(w) for w in words]

    def decode(self, token_id: int) -> str:
        return self._tokens[token_id]

    def id_of(self, token: str) -> int:
        """Exact lookup (no lowercasing, no UNK fallback) for known entries."""
        try:
            return self._ids[token]
        except KeyError:
            raise VocabError(f"token {token!r} not in vocabulary") from None

    def add_special(self, token: str) -> int:
        """Register an out-of-text token (e.g. a learnable prompt token)."""
        if token in self._ids:
            return self._ids[token]
        if any(ch.isspace() for ch in token):
            raise VocabError(f"special token {token!r} may not contain whitespace")
        self._tokens.append(token)
        self._ids[token] = len(self._tokens) - 1
        return self._ids[token]

    def content_hash(self) -> str:
        digest = hashlib.sha256("\n".join(self._tokens).encode("utf-8"))
        return digest.hexdigest()[:16]

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for tok in self._tokens:
                fh.write(tok + "\n")

    @classmethod
    def load(cls, path) -> "Vocab":
        with open(path, encoding="utf-8") as fh:
            tokens = [line.rstrip("\n") for line in fh if line.rstrip("\n")]
        return cls(tokens)


def build_vocab(corpora: list[list[str]], min_count: int = 1, always_include: tuple[str, ...] = ()) -> Vocab:
    """Build a vocabulary from token lists.

    Words are lowercased and kept when their corpus frequency reaches
    ``min_count``; ids are assigned by descending frequency with ties
    broken alphabetically.  ``always_include`` entries (prompt template
    words, role names) are admitted regardless of frequency.
    """
    counts: dict[str, int] = {}
    for tokens in corpora:
        for word in tokens:
            w = word.lower()
            if w in RESERVED:
                continue
            counts[w] = counts.get(w, 0) + 1
    keep = {w: n for w, n in counts.items() if n >= min_count}
    for word in always_include:
        w = word.lower()
        if w not in RESERVED:
            keep.setdefault(w, counts.get(w, 0))
    ordered = sorted(keep.items(), key=lambda kv: (-kv[1], kv[0]))
    return Vocab(list(RESERVED) + [w for w, _ in ordered])


@dataclass
class MarkedContext:
    """A trigger-marked, BOS-prefixed token-id sequence.

    ``orig_index[i]`` is the original document position of marked token i,
    or -1 for BOS and the two markers.  ``args`` carry gold spans already
    remapped into marked coordinates.
    """

    ids: list[int]
    trigger_range: tuple[int, int]          # inclusive, covers both markers
    args: tuple[Argument, ...] = ()
    orig_index: list[int] = field(default_factory=list)
    sentence_index: list[int] = field(default_factory=list)
    trigger_sentence: int = 0
    dropped_args: int = 0

    def __len__(self) -> int:
        return len(self.ids)

    def blocked_positions(self) -> tuple[int, int, int]:
        """Positions a predicted span may never cover: BOS and the markers."""
        return (0, self.trigger_range[0], self.trigger_range[1])

    def to_original(self, start: int, end: int) -> tuple[int, int]:
        os, oe = self.orig_index[start], self.orig_index[end]
        if os < 0 or oe < 0:
            raise ValueError(f"span ({start}, {end}) covers a non-content position")
        return os, oe


def mark_trigger(
    ids: list[int],
    trigger: tuple[int, int],
    args: tuple[Argument, ...] = (),
    sent_starts: tuple[int, ...] = (0,),
) -> MarkedContext:
    """Insert trigger markers and prepend BOS, remapping every gold span.

    An original position ``i`` moves to ``i + 1`` (BOS), plus one if it
    sits at or after the trigger start, plus one more if it sits after the
    trigger end.  Gold spans that straddle a marker boundary cannot be
    represented and raise ``ValueError``.
    """
    ts, te = trigger
    n = len(ids)
    if not (0 <= ts <= te < n):
        raise ValueError(f"trigger span ({ts}, {te}) out of bounds for {n} tokens")

    def shift(i: int) -> int:
        return i + 1 + (1 if i >= ts else 0) + (1 if i > te else 0)

    marked = [BOS] + ids[:ts] + [TRIG_OPEN] + ids[ts : te + 1] + [TRIG_CLOSE] + ids[te + 1 :]
    orig = [-1] + list(range(ts)) + [-1] + list(range(ts, te + 1)) + [-1] + list(range(te + 1, n))

    def sent_of(i: int) -> int:
        return bisect_right(sent_starts, i) - 1

    sent = [sent_of(max(o, 0)) for o in orig]
    new_args = []
    for a in args:
        covers_open = a.start < ts <= a.end
        covers_close = a.start <= te < a.end
        if covers_open or covers_close:
            # The remapped span would contain a marker token; spans strictly
            # inside or strictly outside the trigger are the only legal cases.
            raise ValueError(
                f"argument span ({a.start}, {a.end}) overlaps the trigger ({ts}, {te}) and cannot be marked"
            )
        new_args.append(Argument(role=a.role, start=shift(a.start), end=shift(a.end)))
    return MarkedContext(
        ids=marked,
        trigger_range=(ts + 1, te + 3),
        args=tuple(new_args),
        orig_index=orig,
        sentence_index=sent,
        trigger_sentence=sent_of(ts),
    )


def window_context(marked: MarkedContext, max_len: int) -> MarkedContext:
    """Clamp a marked context to ``max_len`` tokens around the trigger.

    BOS and the full trigger segment always survive; the remaining budget
    is split roughly evenly between the two sides, spilling over to
    whichever side has tokens left.  Gold spans falling (even partly)
    outside the window are dropped and counted in ``dropped_args``.
    """
    n = len(marked.ids)
    if n <= max_len:
        return marked
    lo_t, hi_t = marked.trigger_range
    seg = hi_t - lo_t + 1
    budget = max_len - 1 - seg  # everything except BOS and the trigger segment
    if budget < 0:
        raise ValueError(f"max_len {max_len} cannot hold the trigger segment ({seg} tokens)")
    left_avail = lo_t - 1
    right_avail = n - 1 - hi_t
    left = min(left_avail, budget // 2)
    right = min(right_avail, budget - left)
    left = min(left_avail, budget - right)  # spill unused right budget back to the left
    w_lo, w_hi = lo_t - left, hi_t + right

    keep = [0] + list(range(w_lo, w_hi + 1))
    remap = {old: new for new, old in enumerate(keep)}
    dropped = marked.dropped_args
    new_args = []
    for a in marked.args:
        if a.start in remap and a.end in remap:
            new_args.append(Argument(role=a.role, start=remap[a.start], end=remap[a.end]))
        else:
            dropped += 1
    return MarkedContext(
        ids=[marked.ids[i] for i in keep],
        trigger_range=(remap[lo_t], remap[hi_t]),
        args=tuple(new_args),
        orig_index=[marked.orig_index[i] for i in keep],
        sentence_index=[marked.sentence_index[i] for i in keep],
        trigger_sentence=marked.trigger_sentence,
        dropped_args=dropped,
    )
