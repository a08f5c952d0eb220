"""Prompt construction.

A prompt is a token sequence that names every role of an event type,
with one *slot* (a contiguous token range) per argument the model may
extract.  A role whose slot budget is m appears m times, so a single
prompt pass yields features for all slots of all roles at once.

Three renderers are provided:

- ``manual``: a hand-written natural-language template per event type,
  with ``{role}`` markers at the slot positions;
- ``concat``: the role names joined mechanically, extra occurrences
  wrapped in parentheses;
- ``soft``: like concat, but each role name is flanked by a pair of
  learnable tokens that exist only in the prompt vocabulary.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

from .ontology import Ontology
from .textenc import Vocab, VocabError

VARIANTS = ("manual", "concat", "soft")

_MARKER = re.compile(r"\{([^{}]+)\}")


class TemplateError(ValueError):
    pass


@dataclass(frozen=True)
class Slot:
    """One extraction slot: a role occurrence at a prompt token range (inclusive)."""

    role: str
    role_slot: int                 # 0-based occurrence index within the role
    token_range: tuple[int, int]


@dataclass(frozen=True)
class PromptLayout:
    event_type: str
    tokens: tuple[int, ...]
    slots: tuple[Slot, ...]

    def __len__(self) -> int:
        return len(self.tokens)

    def slots_for(self, role: str) -> tuple[Slot, ...]:
        return tuple(s for s in self.slots if s.role == role)

    def validate(self) -> None:
        prev_end = -1
        for slot in self.slots:
            lo, hi = slot.token_range
            if not (0 <= lo <= hi < len(self.tokens)):
                raise TemplateError(f"slot {slot} out of range for prompt of {len(self.tokens)} tokens")
            if lo <= prev_end:
                raise TemplateError(f"slot ranges overlap or are out of order at {slot}")
            prev_end = hi


def soft_token_names(role: str) -> tuple[str, str]:
    base = role.lower().replace(" ", "_")
    return f"<{base}_left0>", f"<{base}_right0>"


def register_soft_tokens(ont: Ontology, vocab: Vocab) -> None:
    """Add the per-role learnable prompt tokens to the vocabulary.

    Exactly two entries are created per distinct role name, shared across
    slots and across event types; registration order follows the sorted
    role names so vocabularies are reproducible.
    """
    for role in ont.all_role_names():
        left, right = soft_token_names(role)
        vocab.add_special(left)
        vocab.add_special(right)


def _role_word_ids(role: str, vocab: Vocab) -> list[int]:
    return [vocab.encode_word(w) for w in role.split()]


def parse_template(text: str) -> list[tuple[str, str]]:
    """Split template text into ("word", token) and ("slot", role) pieces."""
    pieces: list[tuple[str, str]] = []
    pos = 0
    for m in _MARKER.finditer(text):
        for word in text[pos : m.start()].split():
            pieces.append(("word", word))
        pieces.append(("slot", m.group(1)))
        pos = m.end()
    for word in text[pos:].split():
        pieces.append(("word", word))
    return pieces


def validate_template(event_type: str, text: str, ont: Ontology) -> None:
    """Check that marker multiplicities match the schema's slot budgets exactly."""
    counts: dict[str, int] = {}
    for kind, value in parse_template(text):
        if kind == "slot":
            counts[value] = counts.get(value, 0) + 1
    expected = {r.role: r.slot_count for r in ont.roles(event_type)}
    for role, n in sorted(counts.items()):
        if role not in expected:
            raise TemplateError(f"template for {event_type!r} uses unknown role {role!r}")
        if n != expected[role]:
            raise TemplateError(
                f"template for {event_type!r} has {n} slot(s) for role {role!r}, schema requires {expected[role]}"
            )
    missing = sorted(set(expected) - set(counts))
    if missing:
        raise TemplateError(f"template for {event_type!r} is missing roles: {', '.join(missing)}")


def load_templates(path, ont: Ontology) -> dict[str, str]:
    """Load a JSON mapping of event type to template text, validated against the schema."""
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise TemplateError(f"malformed template file: {exc}") from exc
    if not isinstance(raw, dict) or not all(isinstance(v, str) for v in raw.values()):
        raise TemplateError("template file must map event types to strings")
    for ev_type in ont.event_types:
        if ev_type not in raw:
            raise TemplateError(f"no template for event type {ev_type!r}")
        validate_template(ev_type, raw[ev_type], ont)
    return dict(raw)


def save_templates(templates: dict[str, str], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(templates, fh, sort_keys=True, indent=2)
        fh.write("\n")


def render_manual(event_type: str, text: str, vocab: Vocab) -> PromptLayout:
    """Render a validated hand-written template into token ids and slots."""
    tokens: list[int] = []
    slots: list[Slot] = []
    seen: dict[str, int] = {}
    for kind, value in parse_template(text):
        if kind == "word":
            tokens.append(vocab.encode_word(value))
        else:
            k = seen.get(value, 0)
            seen[value] = k + 1
            lo = len(tokens)
            ids = _role_word_ids(value, vocab)
            tokens.extend(ids)
            slots.append(Slot(role=value, role_slot=k, token_range=(lo, lo + len(ids) - 1)))
    layout = PromptLayout(event_type=event_type, tokens=tuple(tokens), slots=tuple(slots))
    layout.validate()
    return layout


def render_concat(event_type: str, ont: Ontology, vocab: Vocab) -> PromptLayout:
    """Render a prompt from the schema alone: role names in order, repeats parenthesised."""
    lparen, rparen = vocab.encode_word("("), vocab.encode_word(")")
    tokens: list[int] = []
    slots: list[Slot] = []
    for spec in ont.roles(event_type):
        ids = _role_word_ids(spec.role, vocab)
        for k in range(spec.slot_count):
            if k == 0:
                lo = len(tokens)
                tokens.extend(ids)
            else:
                tokens.append(lparen)
                lo = len(tokens)
                tokens.extend(ids)
            slots.append(Slot(role=spec.role, role_slot=k, token_range=(lo, lo + len(ids) - 1)))
            if k > 0:
                tokens.append(rparen)
    layout = PromptLayout(event_type=event_type, tokens=tuple(tokens), slots=tuple(slots))
    layout.validate()
    return layout


def render_soft(event_type: str, ont: Ontology, vocab: Vocab) -> PromptLayout:
    """Like ``concat`` but every role occurrence is flanked by its learnable tokens.

    The slot range covers only the role-name tokens, never the flanks, so
    slot features stay comparable across prompt variants.
    """
    lparen, rparen = vocab.encode_word("("), vocab.encode_word(")")
    tokens: list[int] = []
    slots: list[Slot] = []
    for spec in ont.roles(event_type):
        try:
            left, right = (vocab.id_of(t) for t in soft_token_names(spec.role))
        except VocabError:
            raise TemplateError(
                f"learnable prompt tokens for role {spec.role!r} are not registered; "
                "call register_soft_tokens() before rendering"
            ) from None
        ids = _role_word_ids(spec.role, vocab)
        for k in range(spec.slot_count):
            if k > 0:
                tokens.append(lparen)
            tokens.append(left)
            lo = len(tokens)
            tokens.extend(ids)
            slots.append(Slot(role=spec.role, role_slot=k, token_range=(lo, lo + len(ids) - 1)))
            tokens.append(right)
            if k > 0:
                tokens.append(rparen)
    layout = PromptLayout(event_type=event_type, tokens=tuple(tokens), slots=tuple(slots))
    layout.validate()
    return layout


def render_prompt(
    variant: str,
    event_type: str,
    ont: Ontology,
    vocab: Vocab,
    templates: dict[str, str] | None = None,
) -> PromptLayout:
    if variant == "manual":
        if templates is None or event_type not in templates:
            raise TemplateError(f"manual prompts need a template for {event_type!r}")
        layout = render_manual(event_type, templates[event_type], vocab)
        _check_against_schema(layout, ont)
        return layout
    if variant == "concat":
        return render_concat(event_type, ont, vocab)
    if variant == "soft":
        return render_soft(event_type, ont, vocab)
    raise TemplateError(f"unknown prompt variant {variant!r}; expected one of {VARIANTS}")


def _check_against_schema(layout: PromptLayout, ont: Ontology) -> None:
    got: dict[str, int] = {}
    for slot in layout.slots:
        got[slot.role] = got.get(slot.role, 0) + 1
    expected = {r.role: r.slot_count for r in ont.roles(layout.event_type)}
    if got != expected:
        raise TemplateError(
            f"prompt for {layout.event_type!r} provides slots {got}, schema requires {expected}"
        )
