"""argspan: extractive event argument labeling with joint role prompts.

A small encoder/decoder model reads a trigger-marked context once, renders
all of an event's role slots from a single prompt pass, and selects one
span per slot with role-specific start/end selectors.  Training matches
each role's predicted spans to its gold spans with an optimal assignment;
decoding is a threshold-free greedy span search.
"""

__version__ = "0.1.0"

from .data import Argument, EventInstance, IngestionError, load_jsonl, save_jsonl
from .evaluation import MODES, ScoreReport, full_report, score
from .inference import ArgumentPrediction, EventPrediction, greedy_span
from .ontology import Ontology, RoleSpec, SchemaError, build_schema
from .prompting import PromptLayout, Slot, render_prompt
from .textenc import Vocab, build_vocab, mark_trigger, window_context

__all__ = [
    "__version__",
    "Argument",
    "ArgumentPrediction",
    "EventInstance",
    "EventPrediction",
    "IngestionError",
    "MODES",
    "Ontology",
    "PromptLayout",
    "RoleSpec",
    "SchemaError",
    "ScoreReport",
    "Slot",
    "Vocab",
    "build_schema",
    "build_vocab",
    "full_report",
    "greedy_span",
    "load_jsonl",
    "mark_trigger",
    "render_prompt",
    "save_jsonl",
    "score",
    "window_context",
]
