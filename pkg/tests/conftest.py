import os

import pytest

from argspan import synth
from argspan.config import RunConfig
from argspan.data import Argument, EventInstance
from argspan.inference import ArgumentPrediction, EventPrediction
from argspan.prompting import save_templates
from argspan.train import build_pipeline, encode_corpus


def make_event(
    doc_id="d0",
    n_tokens=12,
    sent_starts=(0,),
    event_type="E",
    trigger=(0, 0),
    args=(),
) -> EventInstance:
    """Small gold-event builder: args are (role, start, end) triples."""
    return EventInstance(
        doc_id=doc_id,
        tokens=tuple(f"tok{i}" for i in range(n_tokens)),
        sent_starts=tuple(sent_starts),
        event_type=event_type,
        trigger=trigger,
        args=tuple(Argument(role=r, start=s, end=e) for r, s, e in args),
    )


def make_pred(inst: EventInstance, items=()) -> EventPrediction:
    """Prediction paired to ``inst``; items are (role, start, end[, score])."""
    preds = []
    for k, item in enumerate(items):
        role, start, end = item[:3]
        score = item[3] if len(item) > 3 else 1.0
        preds.append(ArgumentPrediction(role=role, start=start, end=end, score=score, slot_index=k))
    return EventPrediction(
        doc_id=inst.doc_id, event_type=inst.event_type, trigger=inst.trigger, items=preds
    )


@pytest.fixture(scope="session")
def tiny_bundle():
    spec = synth.default_spec()
    spec.train_docs, spec.dev_docs, spec.test_docs = 40, 12, 12
    return synth.gen_synthetic(spec, seed=7)


@pytest.fixture(scope="session")
def tiny_setup(tiny_bundle, tmp_path_factory):
    """A ready-to-train pipeline over the tiny synthetic bundle."""
    tmp = tmp_path_factory.mktemp("tiny")
    tpl = os.path.join(tmp, "templates.json")
    save_templates(tiny_bundle.templates, tpl)
    cfg = RunConfig()
    cfg.paths.templates = tpl
    cfg.model.hidden = 32
    cfg.model.ffn_dim = 64
    cfg.validate()
    pipeline = build_pipeline(cfg, tiny_bundle.train)
    train_events = encode_corpus(pipeline, tiny_bundle.train, strict=True)
    dev_events = encode_corpus(pipeline, tiny_bundle.dev)
    return cfg, pipeline, train_events, dev_events
