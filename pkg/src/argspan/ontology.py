"""Event schema induction and validation.

The schema (event type -> roles, with a slot budget per role) is always
*computed* from an annotated corpus: a role's slot count is the largest
number of arguments that role ever takes in a single event.  Nothing here
is hand-configured, so regenerating from the same corpus is deterministic.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass

from .data import EventInstance


class SchemaError(ValueError):
    """The corpus cannot yield a usable schema, or a schema file is malformed."""


@dataclass(frozen=True)
class RoleSpec:
    role: str
    slot_count: int


class Ontology:
    """Mapping from event type to its roles, each with a slot budget.

    Role order is preserved as given: it fixes the order roles appear in
    rendered prompts, so a curated schema file controls prompt layout.
    Schemas induced by :func:`build_schema` list roles alphabetically.
    """

    def __init__(self, spec: dict[str, list[RoleSpec]]):
        self._spec: dict[str, tuple[RoleSpec, ...]] = {}
        for ev_type, roles in spec.items():
            names = [r.role for r in roles]
            if len(set(names)) != len(names):
                raise SchemaError(f"duplicate role in event type {ev_type!r}")
            for r in roles:
                if r.slot_count < 1:
                    raise SchemaError(f"{ev_type!r}/{r.role!r}: slot_count must be >= 1, got {r.slot_count}")
            self._spec[ev_type] = tuple(roles)

    @property
    def event_types(self) -> tuple[str, ...]:
        return tuple(sorted(self._spec))

    def __contains__(self, event_type: str) -> bool:
        return event_type in self._spec

    def roles(self, event_type: str) -> tuple[RoleSpec, ...]:
        try:
            return self._spec[event_type]
        except KeyError:
            raise SchemaError(f"unknown event type {event_type!r}") from None

    def slot_count(self, event_type: str, role: str) -> int:
        for spec in self.roles(event_type):
            if spec.role == role:
                return spec.slot_count
        raise SchemaError(f"unknown role {role!r} for event type {event_type!r}")

    def role_names(self, event_type: str) -> tuple[str, ...]:
        return tuple(r.role for r in self.roles(event_type))

    def all_role_names(self) -> tuple[str, ...]:
        names = {r.role for roles in self._spec.values() for r in roles}
        return tuple(sorted(names))

    def __eq__(self, other) -> bool:
        return isinstance(other, Ontology) and self._spec == other._spec

    def to_json(self) -> str:
        payload = {
            "event_types": {
                ev: [{"role": r.role, "slot_count": r.slot_count} for r in roles]
                for ev, roles in self._spec.items()
            }
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "Ontology":
        try:
            payload = json.loads(text)
            raw = payload["event_types"]
            spec = {
                ev: [RoleSpec(role=r["role"], slot_count=int(r["slot_count"])) for r in roles]
                for ev, roles in raw.items()
            }
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"malformed schema file: {exc}") from exc
        return cls(spec)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path) -> "Ontology":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())


def build_schema(corpus: list[EventInstance]) -> Ontology:
    """Induce the schema from an annotated corpus.

    Raises :class:`SchemaError` on an empty corpus — a schema with no event
    types would make every downstream prompt undefined.
    """
    if not corpus:
        raise SchemaError("cannot induce a schema from an empty corpus")
    seen: dict[str, dict[str, int]] = {}
    for inst in corpus:
        roles = seen.setdefault(inst.event_type, {})
        counts = Counter(a.role for a in inst.args)
        for role, n in counts.items():
            roles[role] = max(roles.get(role, 0), n)
    spec = {
        ev: [RoleSpec(role=role, slot_count=n) for role, n in sorted(roles.items())]
        for ev, roles in seen.items()
    }
    return Ontology(spec)


@dataclass(frozen=True)
class Finding:
    kind: str        # "unknown_event_type" | "unknown_role" | "role_overflow"
    detail: str


@dataclass
class ValidationReport:
    findings: list[Finding]

    @property
    def ok(self) -> bool:
        return not self.findings

    def render(self, limit: int = 20) -> str:
        lines = [f"{f.kind}: {f.detail}" for f in self.findings[:limit]]
        if len(self.findings) > limit:
            lines.append(f"... and {len(self.findings) - limit} more")
        return "\n".join(lines)


def validate_instance(inst: EventInstance, ont: Ontology) -> ValidationReport:
    """Check one instance against a schema.

    Flags unknown event types, unknown roles, and roles whose gold argument
    count exceeds the schema's slot budget (such events can never be fully
    recovered by the model).
    """
    findings: list[Finding] = []
    if inst.event_type not in ont:
        findings.append(Finding("unknown_event_type", f"{inst.doc_id}: event type {inst.event_type!r} not in schema"))
        return ValidationReport(findings)
    known = set(ont.role_names(inst.event_type))
    counts = Counter(a.role for a in inst.args)
    for role, n in sorted(counts.items()):
        if role not in known:
            findings.append(Finding("unknown_role", f"{inst.doc_id}: role {role!r} not in schema for {inst.event_type!r}"))
        elif n > ont.slot_count(inst.event_type, role):
            findings.append(
                Finding(
                    "role_overflow",
                    f"{inst.doc_id}: role {role!r} has {n} arguments but only "
                    f"{ont.slot_count(inst.event_type, role)} slot(s)",
                )
            )
    return ValidationReport(findings)


def validate_corpus(instances: list[EventInstance], ont: Ontology) -> ValidationReport:
    findings: list[Finding] = []
    for inst in instances:
        findings.extend(validate_instance(inst, ont).findings)
    return ValidationReport(findings)
