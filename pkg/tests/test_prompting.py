import pytest

from argspan.ontology import Ontology, RoleSpec
from argspan.prompting import (
    PromptLayout,
    Slot,
    TemplateError,
    load_templates,
    parse_template,
    register_soft_tokens,
    render_prompt,
    save_templates,
    soft_token_names,
    validate_template,
)
from argspan.textenc import build_vocab


@pytest.fixture
def ont():
    return Ontology({"Clash": [RoleSpec("Victor", 2), RoleSpec("Place", 1)]})


@pytest.fixture
def vocab():
    words = ["victor", "place", "beat", "the", "crowd", "at", "(", ")", "and"]
    return build_vocab([words])


def test_parse_template_pieces():
    assert parse_template("{A} beat {B} at {Place}") == [
        ("slot", "A"),
        ("word", "beat"),
        ("slot", "B"),
        ("word", "at"),
        ("slot", "Place"),
    ]
    assert parse_template("no markers here") == [
        ("word", "no"),
        ("word", "markers"),
        ("word", "here"),
    ]


def test_validate_template_multiplicity(ont):
    validate_template("Clash", "{Victor} and {Victor} at {Place}", ont)
    with pytest.raises(TemplateError, match="missing roles"):
        validate_template("Clash", "{Victor} {Victor}", ont)
    with pytest.raises(TemplateError, match="schema requires 2"):
        validate_template("Clash", "{Victor} at {Place}", ont)
    with pytest.raises(TemplateError, match="unknown role"):
        validate_template("Clash", "{Victor} {Victor} {Place} {Loser}", ont)


def test_render_manual_layout(ont, vocab):
    tpl = {"Clash": "{Victor} beat {Victor} at {Place}"}
    layout = render_prompt("manual", "Clash", ont, vocab, tpl)
    assert layout.tokens == tuple(
        vocab.encode(["victor", "beat", "victor", "at", "place"])
    )
    assert [(s.role, s.role_slot, s.token_range) for s in layout.slots] == [
        ("Victor", 0, (0, 0)),
        ("Victor", 1, (2, 2)),
        ("Place", 0, (4, 4)),
    ]


def test_render_manual_checks_schema(ont, vocab):
    with pytest.raises(TemplateError):
        render_prompt("manual", "Clash", ont, vocab, {"Clash": "{Victor} at {Place}"})
    with pytest.raises(TemplateError, match="need a template"):
        render_prompt("manual", "Clash", ont, vocab, None)


def test_render_concat_parenthesises_repeats(ont, vocab):
    layout = render_prompt("concat", "Clash", ont, vocab)
    words = ["victor", "(", "victor", ")", "place"]
    assert layout.tokens == tuple(vocab.encode(words))
    assert [(s.role, s.token_range) for s in layout.slots] == [
        ("Victor", (0, 0)),
        ("Victor", (2, 2)),
        ("Place", (4, 4)),
    ]


def test_render_concat_respects_curated_role_order(vocab):
    ont = Ontology({"E": [RoleSpec("Place", 1), RoleSpec("Victor", 1)]})
    layout = render_prompt("concat", "E", ont, vocab)
    assert [s.role for s in layout.slots] == ["Place", "Victor"]


def test_render_soft_flanks_role_tokens(ont, vocab):
    with pytest.raises(TemplateError, match="not registered"):
        render_prompt("soft", "Clash", ont, vocab)
    register_soft_tokens(ont, vocab)
    layout = render_prompt("soft", "Clash", ont, vocab)
    left_v, right_v = (vocab.id_of(t) for t in soft_token_names("Victor"))
    left_p, right_p = (vocab.id_of(t) for t in soft_token_names("Place"))
    v, p = vocab.id_of("victor"), vocab.id_of("place")
    lp, rp = vocab.id_of("("), vocab.id_of(")")
    assert layout.tokens == (
        left_v, v, right_v,
        lp, left_v, v, right_v, rp,
        left_p, p, right_p,
    )
    # slots cover only the role word, never the learnable flanks
    for slot in layout.slots:
        lo, hi = slot.token_range
        assert layout.tokens[lo:hi + 1] == (v,) or layout.tokens[lo:hi + 1] == (p,)


def test_soft_tokens_shared_per_role(ont, vocab):
    register_soft_tokens(ont, vocab)
    n = len(vocab)
    register_soft_tokens(ont, vocab)  # idempotent
    assert len(vocab) == n


def test_multiword_role_spans_whole_name(vocab):
    ont = Ontology({"E": [RoleSpec("the crowd", 1)]})
    layout = render_prompt("concat", "E", ont, vocab)
    assert layout.tokens == tuple(vocab.encode(["the", "crowd"]))
    assert layout.slots[0].token_range == (0, 1)


def test_layout_validate_rejects_overlap():
    bad = PromptLayout(
        event_type="E",
        tokens=(5, 6, 7),
        slots=(Slot("A", 0, (0, 1)), Slot("B", 0, (1, 2))),
    )
    with pytest.raises(TemplateError, match="overlap"):
        bad.validate()
    out_of_range = PromptLayout(event_type="E", tokens=(5,), slots=(Slot("A", 0, (0, 3)),))
    with pytest.raises(TemplateError, match="out of range"):
        out_of_range.validate()


def test_template_file_round_trip(tmp_path, ont):
    path = tmp_path / "templates.json"
    templates = {"Clash": "{Victor} beat {Victor} at {Place}"}
    save_templates(templates, path)
    assert load_templates(path, ont) == templates

    save_templates({}, path)
    with pytest.raises(TemplateError, match="no template"):
        load_templates(path, ont)

    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(TemplateError, match="malformed"):
        load_templates(path, ont)


def test_unknown_variant(ont, vocab):
    with pytest.raises(TemplateError, match="unknown prompt variant"):
        render_prompt("frozen", "Clash", ont, vocab)
