import pytest

from argspan.ontology import (
    Ontology,
    RoleSpec,
    SchemaError,
    build_schema,
    validate_corpus,
    validate_instance,
)

from conftest import make_event


def test_build_schema_takes_max_count_per_role():
    corpus = [
        make_event(event_type="E", args=[("A", 1, 1), ("A", 2, 2), ("B", 3, 3)]),
        make_event(event_type="E", args=[("A", 4, 4)]),
        make_event(event_type="F", args=[("C", 1, 2)]),
    ]
    ont = build_schema(corpus)
    assert ont.event_types == ("E", "F")
    assert ont.slot_count("E", "A") == 2
    assert ont.slot_count("E", "B") == 1
    assert ont.slot_count("F", "C") == 1


def test_build_schema_orders_roles_alphabetically_and_ignores_corpus_order():
    base = [
        make_event(event_type="E", args=[("Zed", 1, 1), ("Alpha", 2, 2)]),
        make_event(event_type="E", args=[("Mid", 3, 3)]),
    ]
    ont1 = build_schema(base)
    ont2 = build_schema(list(reversed(base)))
    assert ont1 == ont2
    assert ont1.role_names("E") == ("Alpha", "Mid", "Zed")


def test_build_schema_keeps_argless_event_types():
    ont = build_schema([make_event(event_type="Bare")])
    assert "Bare" in ont
    assert ont.roles("Bare") == ()


def test_ontology_preserves_curated_role_order():
    ont = Ontology({"E": [RoleSpec("Zed", 1), RoleSpec("Alpha", 2)]})
    assert ont.role_names("E") == ("Zed", "Alpha")
    assert ont.slot_count("E", "Alpha") == 2


def test_ontology_rejects_bad_slot_counts_and_duplicates():
    with pytest.raises(SchemaError):
        Ontology({"E": [RoleSpec("A", 0)]})
    with pytest.raises(SchemaError):
        Ontology({"E": [RoleSpec("A", 1), RoleSpec("A", 2)]})


def test_unknown_lookups_raise():
    ont = Ontology({"E": [RoleSpec("A", 1)]})
    with pytest.raises(SchemaError):
        ont.roles("nope")
    with pytest.raises(SchemaError):
        ont.slot_count("E", "nope")


def test_json_round_trip(tmp_path):
    ont = Ontology({"E": [RoleSpec("B", 2), RoleSpec("A", 1)], "F": []})
    again = Ontology.from_json(ont.to_json())
    assert again == ont
    path = tmp_path / "ont.json"
    ont.save(path)
    assert Ontology.load(path) == ont
    # serialization is stable
    ont.save(tmp_path / "ont2.json")
    assert (tmp_path / "ont.json").read_text() == (tmp_path / "ont2.json").read_text()


def test_validate_instance_flags():
    ont = Ontology({"E": [RoleSpec("A", 1)]})
    ok = validate_instance(make_event(event_type="E", args=[("A", 1, 1)]), ont)
    assert ok.ok

    unknown_type = validate_instance(make_event(event_type="X"), ont)
    assert [f.kind for f in unknown_type.findings] == ["unknown_event_type"]

    unknown_role = validate_instance(make_event(event_type="E", args=[("Z", 1, 1)]), ont)
    assert [f.kind for f in unknown_role.findings] == ["unknown_role"]

    overflow = validate_instance(
        make_event(event_type="E", args=[("A", 1, 1), ("A", 2, 2)]), ont
    )
    assert [f.kind for f in overflow.findings] == ["role_overflow"]
    assert "2 arguments" in overflow.findings[0].detail


def test_validate_corpus_aggregates_and_renders():
    ont = Ontology({"E": [RoleSpec("A", 1)]})
    report = validate_corpus(
        [make_event(doc_id="good", event_type="E"), make_event(doc_id="bad", event_type="X")],
        ont,
    )
    assert not report.ok
    assert "unknown_event_type" in report.render()
    assert "bad" in report.render()


def test_every_corpus_passes_its_own_schema(tiny_bundle):
    ont = tiny_bundle.ontology
    for split in (tiny_bundle.train, tiny_bundle.dev, tiny_bundle.test):
        assert validate_corpus(list(split), ont).ok
