"""Training pipeline: corpus encoding, the optimisation loop, seed/LR sweeps,
checkpoints, and the prediction/benchmark helpers shared by the CLI."""

from __future__ import annotations

import dataclasses
import json
import os
import subprocess
import time
from dataclasses import dataclass, field

import numpy as np

from . import evaluation, inference
from .assignment import total_loss
from .autodiff import Tensor, no_grad
from .config import RunConfig, save_config
from .data import EventInstance, load_jsonl, shuffle_argument_order, subsample
from .model import (
    ModelConfig,
    PassCounter,
    forward,
    forward_sequential,
    init_params,
    param_count,
)
from .ontology import Ontology, build_schema, validate_corpus
from .optim import AdamW, LinearSchedule, clip_grad_norm
from .prompting import PromptLayout, load_templates, register_soft_tokens, render_prompt, save_templates
from .synth import template_words
from .textenc import MarkedContext, Vocab, build_vocab, mark_trigger, window_context


class TrainingError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Corpus preparation


@dataclass
class EncodedEvent:
    """One training/eval unit: a windowed marked context plus its prompt layout."""

    inst: EventInstance
    marked: MarkedContext
    layout: PromptLayout
    gold_by_role: dict[str, list[tuple[int, int]]]


@dataclass
class Pipeline:
    """Everything needed to turn raw instances into model inputs."""

    vocab: Vocab
    ontology: Ontology
    templates: dict[str, str] | None
    prompt_variant: str
    max_context_len: int
    layouts: dict[str, PromptLayout] = field(default_factory=dict)

    def layout_for(self, event_type: str) -> PromptLayout:
        if event_type not in self.layouts:
            self.layouts[event_type] = render_prompt(
                self.prompt_variant, event_type, self.ontology, self.vocab, self.templates
            )
        return self.layouts[event_type]

    def encode(self, inst: EventInstance) -> EncodedEvent:
        ids = self.vocab.encode(inst.tokens)
        marked = mark_trigger(ids, inst.trigger, inst.args, inst.sent_starts)
        marked = window_context(marked, self.max_context_len)
        layout = self.layout_for(inst.event_type)
        gold: dict[str, list[tuple[int, int]]] = {}
        for arg in marked.args:
            gold.setdefault(arg.role, []).append((arg.start, arg.end))
        return EncodedEvent(inst, marked, layout, gold)


def build_pipeline(
    cfg: RunConfig,
    train_insts: list[EventInstance],
    ontology: Ontology | None = None,
    vocab: Vocab | None = None,
) -> Pipeline:
    """Derive schema and vocabulary from the training corpus and load templates."""
    if ontology is None:
        ontology = build_schema(train_insts)
    templates = None
    if cfg.prompt_variant == "manual":
        templates = load_templates(cfg.paths.templates, ontology)
    if vocab is None:
        extra: list[str] = ["(", ")"]
        for role in ontology.all_role_names():
            extra.extend(role.lower().split())
        for ev_type in ontology.event_types:
            extra.extend(ev_type.lower().split())
        if templates:
            extra.extend(template_words(templates))
        vocab = build_vocab(
            [inst.tokens for inst in train_insts],
            min_count=cfg.data.min_count,
            always_include=tuple(extra),
        )
        if cfg.prompt_variant == "soft":
            register_soft_tokens(ontology, vocab)
    return Pipeline(vocab, ontology, templates, cfg.prompt_variant, cfg.data.max_context_len)


def encode_corpus(pipeline: Pipeline, instances: list[EventInstance], strict: bool = False) -> list[EncodedEvent]:
    """Encode every instance.  With ``strict``, schema violations (unknown
    types/roles, more gold arguments than slots) raise; otherwise the
    offending instances are kept and surplus golds simply have no slot."""
    report = validate_corpus(instances, pipeline.ontology)
    if strict and not report.ok:
        raise TrainingError("schema validation failed:\n" + report.render())
    return [pipeline.encode(inst) for inst in instances]


# ---------------------------------------------------------------------------
# Checkpoints


def save_checkpoint(path, params: dict[str, Tensor], model_cfg: ModelConfig, meta: dict) -> None:
    """Single-file .npz checkpoint; metadata rides along as a JSON byte array."""
    payload = dict(meta)
    payload["model"] = model_cfg.to_dict()
    blob = np.frombuffer(json.dumps(payload, sort_keys=True).encode("utf-8"), dtype=np.uint8)
    np.savez(path, __meta__=blob, **{k: v.data for k, v in params.items()})


def load_checkpoint(path, vocab: Vocab | None = None) -> tuple[dict[str, Tensor], ModelConfig, dict]:
    """Load parameters and config; refuses a checkpoint whose vocabulary hash
    disagrees with the supplied vocabulary."""
    with np.load(path) as archive:
        meta = json.loads(bytes(archive["__meta__"]))
        params = {
            k: Tensor(archive[k].copy(), requires_grad=True)
            for k in archive.files
            if k != "__meta__"
        }
    model_cfg = ModelConfig.from_dict(meta.pop("model"))
    if vocab is not None and meta.get("vocab_hash") != vocab.content_hash():
        raise TrainingError(
            f"checkpoint {path!r} was built with vocabulary {meta.get('vocab_hash')}, "
            f"but the supplied vocabulary hashes to {vocab.content_hash()}"
        )
    return params, model_cfg, meta


# ---------------------------------------------------------------------------
# Prediction / evaluation helpers


def predict_events(
    params: dict[str, Tensor],
    model_cfg: ModelConfig,
    events: list[EncodedEvent],
    max_span_len: int,
    sequential: bool = False,
    counter: PassCounter | None = None,
) -> list[inference.EventPrediction]:
    run = forward_sequential if sequential else forward
    preds = []
    with no_grad():
        for ev in events:
            out = run(params, model_cfg, ev.marked.ids, ev.layout, counter=counter)
            items = inference.extract_event(out, ev.layout, ev.marked, max_span_len)
            pred = inference.prediction_for_instance(ev.inst, items)
            pred.dropped_spans = ev.marked.dropped_args
            preds.append(pred)
    return preds


def evaluate_events(
    params: dict[str, Tensor],
    model_cfg: ModelConfig,
    events: list[EncodedEvent],
    max_span_len: int,
) -> dict[str, evaluation.ScoreReport]:
    preds = predict_events(params, model_cfg, events, max_span_len)
    gold = [ev.inst for ev in events]
    return {mode: evaluation.score(preds, gold, mode) for mode in evaluation.MODES}


# ---------------------------------------------------------------------------
# The optimisation loop


@dataclass
class TrainResult:
    params: dict[str, Tensor]
    model_cfg: ModelConfig
    seed: int
    base_lr: float
    best_step: int
    best_dev_f1: float
    final_loss: float
    log_rows: list[dict]


def _snapshot(params: dict[str, Tensor]) -> dict[str, Tensor]:
    return {k: Tensor(v.data.copy(), requires_grad=True) for k, v in params.items()}


def _emit(log_fn, rows: list[dict], row: dict) -> None:
    rows.append(row)
    if log_fn is not None:
        log_fn(row)


def train_single(
    cfg: RunConfig,
    vocab_size: int,
    train_events: list[EncodedEvent],
    dev_events: list[EncodedEvent],
    seed: int,
    base_lr: float,
    log_fn=None,
) -> TrainResult:
    """One optimisation run at a fixed seed and learning rate.

    Every ``eval_every`` steps (and at the final step) the dev split is
    scored in all three modes; the checkpoint with the best dev span+role
    F1 is retained.  A non-finite loss aborts the run with an error rather
    than silently continuing.  ``steps == 0`` emits the freshly initialised
    model together with a single zero-step log row.
    """
    if not train_events:
        raise TrainingError("no training events")
    tcfg = cfg.training
    model_cfg = dataclasses.replace(cfg.model, seed=seed)
    params = init_params(model_cfg, vocab_size)
    max_span = cfg.inference.max_span_len

    rows: list[dict] = []
    best = _snapshot(params)
    best_step, best_f1 = 0, -1.0

    def dev_scores() -> dict[str, float] | None:
        if not dev_events:
            return None
        reports = evaluate_events(params, model_cfg, dev_events, max_span)
        return {mode: reports[mode].f1 for mode in evaluation.MODES}

    if tcfg.steps == 0:
        scores = dev_scores()
        row = {"seed": seed, "base_lr": base_lr, "step": 0, "loss": None, "lr": 0.0}
        if scores is not None:
            row.update({f"dev_{m}": scores[m] for m in evaluation.MODES})
            best_f1 = scores["arg_c"]
        _emit(log_fn, rows, row)
        return TrainResult(best, model_cfg, seed, base_lr, 0, max(best_f1, 0.0), float("nan"), rows)

    schedule = LinearSchedule(base_lr, tcfg.steps, tcfg.warmup_frac)
    opt = AdamW(params, schedule, weight_decay=tcfg.weight_decay)
    batch_rng, dropout_rng = np.random.default_rng(seed).spawn(2)
    if model_cfg.dropout <= 0.0:
        dropout_rng = None

    order: list[int] = []
    final_loss = float("nan")
    for step in range(1, tcfg.steps + 1):
        batch: list[EncodedEvent] = []
        while len(batch) < min(tcfg.batch_size, len(train_events)):
            if not order:
                order = list(batch_rng.permutation(len(train_events)))
            batch.append(train_events[order.pop(0)])

        tuples = []
        for ev in batch:
            out = forward(params, model_cfg, ev.marked.ids, ev.layout, dropout_rng=dropout_rng)
            tuples.append((out, ev.layout, ev.gold_by_role, ev.marked.blocked_positions()))
        loss_t, _ = total_loss(tuples, mode=cfg.loss_mode, max_span_len=max_span)
        loss = float(loss_t.data) / len(batch)
        if not np.isfinite(loss):
            raise TrainingError(f"non-finite loss {loss!r} at step {step} (seed {seed}, lr {base_lr})")
        final_loss = loss

        opt.zero_grad()
        loss_t.backward()
        grad_norm = clip_grad_norm(params, tcfg.grad_clip)
        lr_used = opt.step()

        row = {
            "seed": seed,
            "base_lr": base_lr,
            "step": step,
            "loss": round(loss, 6),
            "lr": lr_used,
            "grad_norm": round(grad_norm, 6),
        }
        stop = False
        if step % tcfg.eval_every == 0 or step == tcfg.steps:
            scores = dev_scores()
            if scores is not None:
                row.update({f"dev_{m}": round(scores[m], 6) for m in evaluation.MODES})
                if scores["arg_c"] > best_f1:
                    best_f1 = scores["arg_c"]
                    best_step = step
                    best = _snapshot(params)
                if tcfg.early_stop_f1 > 0 and scores["arg_c"] >= tcfg.early_stop_f1:
                    stop = True
        _emit(log_fn, rows, row)
        if stop:
            break

    if best_f1 < 0.0:  # no dev split: keep the final parameters
        best, best_step, best_f1 = _snapshot(params), tcfg.steps, 0.0
    return TrainResult(best, model_cfg, seed, base_lr, best_step, best_f1, final_loss, rows)


def run_sweep(
    cfg: RunConfig,
    vocab_size: int,
    train_events: list[EncodedEvent],
    dev_events: list[EncodedEvent],
    log_fn=None,
) -> tuple[TrainResult, list[TrainResult]]:
    """Grid over seeds x learning rates; the winner has the best dev span+role
    F1, with ties resolved toward the earlier (seed, lr) grid position."""
    results: list[TrainResult] = []
    for seed in cfg.training.seeds:
        for lr in cfg.training.learning_rates:
            results.append(train_single(cfg, vocab_size, train_events, dev_events, seed, lr, log_fn))
    best = max(results, key=lambda r: r.best_dev_f1)  # max keeps the first on ties
    return best, results


# ---------------------------------------------------------------------------
# Orchestration for the command line


def _revision() -> str:
    try:
        proc = subprocess.run(
            ["git", "rev-parse", "HEAD"], capture_output=True, text=True, timeout=10
        )
        if proc.returncode == 0:
            return proc.stdout.strip()
    except OSError:
        pass
    return "unknown"


def run_training(cfg: RunConfig, quiet: bool = False) -> dict:
    """Full training entry point: load corpora, build the pipeline, sweep,
    and write every artifact (vocab, schema, checkpoint, metrics, manifest,
    training-curve figure) into ``cfg.paths.out_dir``.  Returns the manifest."""
    cfg.require_files("train", "dev")
    if cfg.prompt_variant == "manual":
        cfg.require_files("templates")

    train_insts = load_jsonl(cfg.paths.train)
    dev_insts = load_jsonl(cfg.paths.dev)
    if cfg.data.ratio < 1.0:
        train_insts = subsample(train_insts, cfg.data.ratio, seed=cfg.training.seeds[0])
    if cfg.data.shuffle_gold:
        train_insts = shuffle_argument_order(train_insts, seed=cfg.training.seeds[0])

    vocab = Vocab.load(cfg.paths.vocab) if cfg.paths.vocab else None
    pipeline = build_pipeline(cfg, train_insts, vocab=vocab)
    train_events = encode_corpus(pipeline, train_insts, strict=True)
    dev_events = encode_corpus(pipeline, dev_insts)

    out_dir = cfg.paths.out_dir
    os.makedirs(out_dir, exist_ok=True)
    metrics_path = os.path.join(out_dir, "metrics.jsonl")
    t0 = time.perf_counter()
    with open(metrics_path, "w", encoding="utf-8") as metrics_fh:

        def log_fn(row: dict) -> None:
            metrics_fh.write(json.dumps(row, sort_keys=True) + "\n")
            if not quiet and (row["step"] % cfg.training.eval_every == 0 or "dev_arg_c" in row):
                print(json.dumps(row, sort_keys=True), flush=True)

        best, results = run_sweep(cfg, len(pipeline.vocab), train_events, dev_events, log_fn)
    wall = time.perf_counter() - t0

    pipeline.vocab.save(os.path.join(out_dir, "vocab.txt"))
    pipeline.ontology.save(os.path.join(out_dir, "ontology.json"))
    if pipeline.templates is not None:
        save_templates(pipeline.templates, os.path.join(out_dir, "templates.json"))
    save_config(cfg, os.path.join(out_dir, "config.ini"))
    save_checkpoint(
        os.path.join(out_dir, "checkpoint.npz"),
        best.params,
        best.model_cfg,
        {
            "vocab_hash": pipeline.vocab.content_hash(),
            "prompt_variant": cfg.prompt_variant,
            "seed": best.seed,
            "base_lr": best.base_lr,
            "step": best.best_step,
            "dev_arg_c": best.best_dev_f1,
        },
    )

    manifest = {
        "config": cfg.to_dict(),
        "config_hash": cfg.content_hash(),
        "vocab_hash": pipeline.vocab.content_hash(),
        "revision": _revision(),
        "param_count": param_count(best.model_cfg, len(pipeline.vocab)),
        "data": {"train_events": len(train_events), "dev_events": len(dev_events)},
        "runs": [
            {
                "seed": r.seed,
                "base_lr": r.base_lr,
                "best_step": r.best_step,
                "dev_arg_c": r.best_dev_f1,
                "final_loss": None if np.isnan(r.final_loss) else r.final_loss,
            }
            for r in results
        ],
        "selected": {
            "seed": best.seed,
            "base_lr": best.base_lr,
            "best_step": best.best_step,
            "dev_arg_c": best.best_dev_f1,
        },
        "wall_seconds": round(wall, 3),
    }
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")

    from . import plots

    plots.training_curves(
        [r.log_rows for r in results], os.path.join(out_dir, "training_curve.png")
    )
    return manifest


# ---------------------------------------------------------------------------
# Benchmark: joint prompt decoding vs one pass per slot


def bench_decoding(
    params: dict[str, Tensor],
    model_cfg: ModelConfig,
    events: list[EncodedEvent],
    max_span_len: int,
    repeats: int = 1,
) -> dict:
    """Time the joint (one prompt pass per event) and sequential (one pass
    per slot) decoders over the same events and count the passes."""
    if not events:
        raise ValueError("no events to benchmark")
    n_slots = sum(len(ev.layout.slots) for ev in events)

    joint_counter, seq_counter = PassCounter(), PassCounter()
    t0 = time.perf_counter()
    for _ in range(repeats):
        joint_preds = predict_events(params, model_cfg, events, max_span_len, counter=joint_counter)
    joint_s = time.perf_counter() - t0
    t0 = time.perf_counter()
    for _ in range(repeats):
        seq_preds = predict_events(
            params, model_cfg, events, max_span_len, sequential=True, counter=seq_counter
        )
    seq_s = time.perf_counter() - t0

    same = all(a.items == b.items for a, b in zip(joint_preds, seq_preds))
    return {
        "events": len(events),
        "slots": n_slots,
        "repeats": repeats,
        "joint_prompt_passes": joint_counter.prompt_passes,
        "sequential_prompt_passes": seq_counter.prompt_passes,
        "joint_seconds": round(joint_s, 4),
        "sequential_seconds": round(seq_s, 4),
        "speedup": round(seq_s / joint_s, 3) if joint_s > 0 else float("inf"),
        "identical_predictions": same,
    }


# ---------------------------------------------------------------------------
# Ablation grid: matching loss x gold annotation order


def ablation_grid(cfg: RunConfig, quiet: bool = False) -> list[dict]:
    """Train the 2x2 grid {bipartite, fixed order} x {original, shuffled gold}
    with everything else held fixed, and report dev/test scores per cell."""
    cfg.require_files("train", "dev", "test")
    if cfg.prompt_variant == "manual":
        cfg.require_files("templates")
    train_insts = load_jsonl(cfg.paths.train)
    dev_insts = load_jsonl(cfg.paths.dev)
    test_insts = load_jsonl(cfg.paths.test)
    if cfg.data.ratio < 1.0:
        train_insts = subsample(train_insts, cfg.data.ratio, seed=cfg.training.seeds[0])

    pipeline = build_pipeline(cfg, train_insts)
    dev_events = encode_corpus(pipeline, dev_insts)
    test_events = encode_corpus(pipeline, test_insts)
    seed = cfg.training.seeds[0]
    base_lr = cfg.training.learning_rates[0]

    rows: list[dict] = []
    for loss_mode in ("bipartite", "fixed_order"):
        for shuffled in (False, True):
            insts = shuffle_argument_order(train_insts, seed + 17) if shuffled else train_insts
            train_events = encode_corpus(pipeline, insts, strict=True)
            cell_cfg = dataclasses.replace(cfg, loss_mode=loss_mode)
            result = train_single(cell_cfg, len(pipeline.vocab), train_events, dev_events, seed, base_lr)
            test_scores = evaluate_events(result.params, result.model_cfg, test_events, cfg.inference.max_span_len)
            row = {
                "loss_mode": loss_mode,
                "shuffled_gold": shuffled,
                "seed": seed,
                "base_lr": base_lr,
                "dev_arg_c": round(result.best_dev_f1, 6),
                "test_arg_i": round(test_scores["arg_i"].f1, 6),
                "test_arg_c": round(test_scores["arg_c"].f1, 6),
                "test_head_c": round(test_scores["head_c"].f1, 6),
            }
            rows.append(row)
            if not quiet:
                print(json.dumps(row, sort_keys=True), flush=True)
    return rows
