"""Command-line interface.

Subcommands cover the full workflow: generate a synthetic corpus, inspect
or induce a schema, train with a seed/learning-rate sweep, predict, score
predictions against gold (with figures and TSV next to the JSON), benchmark
joint vs per-slot decoding, and run the matching-loss ablation grid.

Exit codes: 0 on success, 1 for bad input or usage, 2 for runtime failures.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__, evaluation, inference, synth
from .config import RunConfig, load_config, save_config
from .data import load_jsonl
from .ontology import Ontology, build_schema
from .prompting import load_templates
from .textenc import Vocab
from .train import (
    Pipeline,
    ablation_grid,
    bench_decoding,
    encode_corpus,
    load_checkpoint,
    predict_events,
    run_training,
)


# ---------------------------------------------------------------------------
# Small output helpers


def _table(rows: list[dict], columns: list[str]) -> str:
    cells = [[str(r.get(c, "")) for c in columns] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in cells)) if cells else len(c) for i, c in enumerate(columns)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(columns, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    for row in cells:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
    return "\n".join(lines)


def _score_rows(report: dict) -> list[dict]:
    rows = []
    for mode, d in report["scores"].items():
        rows.append({"section": "overall", "key": mode, **d})
    for section in ("breakdown_distance", "breakdown_argnum"):
        for key, d in report.get(section, {}).items():
            row = {"section": section, "key": key, **d}
            row.pop("mode", None)
            rows.append(row)
    return rows


_TSV_COLUMNS = ["section", "key", "tp", "num_pred", "num_gold", "precision", "recall", "f1"]


def _write_tsv(rows: list[dict], columns: list[str], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(columns) + "\n")
        for r in rows:
            fh.write("\t".join(str(r.get(c, "")) for c in columns) + "\n")


def _load_run_dir(run_dir: str):
    """Reassemble a trained pipeline from the artifacts ``train`` wrote."""
    cfg = load_config(os.path.join(run_dir, "config.ini"))
    vocab = Vocab.load(os.path.join(run_dir, "vocab.txt"))
    ontology = Ontology.load(os.path.join(run_dir, "ontology.json"))
    templates = None
    tpl_path = os.path.join(run_dir, "templates.json")
    if os.path.exists(tpl_path):
        templates = load_templates(tpl_path, ontology)
    pipeline = Pipeline(vocab, ontology, templates, cfg.prompt_variant, cfg.data.max_context_len)
    params, model_cfg, meta = load_checkpoint(os.path.join(run_dir, "checkpoint.npz"), vocab)
    return cfg, pipeline, params, model_cfg, meta


# ---------------------------------------------------------------------------
# Subcommands


def cmd_gen_data(args) -> int:
    spec = synth.stress_spec() if args.stress else synth.default_spec()
    if args.docs:
        spec.train_docs, spec.dev_docs, spec.test_docs = args.docs
    spec.validate()
    bundle = synth.gen_synthetic(spec, seed=args.seed)
    paths = synth.write_bundle(bundle, args.out)
    cfg = RunConfig()
    cfg.paths.train = paths["train"]
    cfg.paths.dev = paths["dev"]
    cfg.paths.test = paths["test"]
    cfg.paths.templates = paths["templates"]
    cfg.paths.out_dir = os.path.join(args.out, "run")
    save_config(cfg, os.path.join(args.out, "config.ini"))
    counts = {
        "train": len(bundle.train),
        "dev": len(bundle.dev),
        "test": len(bundle.test),
        "event_types": len(bundle.ontology.event_types),
    }
    print(json.dumps({"out": args.out, "seed": args.seed, **counts}, sort_keys=True))
    return 0


def cmd_schema(args) -> int:
    ont = build_schema(load_jsonl(args.data))
    if args.out:
        ont.save(args.out)
    rows = [
        {"event_type": et, "role": rs.role, "slots": rs.slot_count}
        for et in ont.event_types
        for rs in ont.roles(et)
    ]
    if args.format == "json":
        print(ont.to_json())
    else:
        print(_table(rows, ["event_type", "role", "slots"]))
    return 0


def cmd_train(args) -> int:
    cfg = load_config(args.config, args.set or [])
    manifest = run_training(cfg, quiet=args.quiet)
    print(json.dumps({"out_dir": cfg.paths.out_dir, **manifest["selected"]}, sort_keys=True))
    return 0


def cmd_predict(args) -> int:
    cfg, pipeline, params, model_cfg, _meta = _load_run_dir(args.run_dir)
    max_span = args.max_span_len or cfg.inference.max_span_len
    events = encode_corpus(pipeline, load_jsonl(args.data))
    preds = predict_events(params, model_cfg, events, max_span, sequential=args.sequential)
    inference.save_predictions(preds, args.out)
    n_args = sum(len(p.items) for p in preds)
    print(json.dumps({"events": len(preds), "arguments": n_args, "out": args.out}, sort_keys=True))
    return 0


def cmd_eval(args) -> int:
    gold = load_jsonl(args.gold)
    preds = inference.load_predictions(args.pred)
    report = evaluation.full_report(preds, gold, breakdowns=not args.no_breakdowns)
    rows = _score_rows(report)
    if args.out_dir:
        os.makedirs(args.out_dir, exist_ok=True)
        with open(os.path.join(args.out_dir, "report.json"), "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
        _write_tsv(rows, _TSV_COLUMNS, os.path.join(args.out_dir, "report.tsv"))
        from . import plots

        plots.score_bars(report["scores"], os.path.join(args.out_dir, "scores.png"))
        if not args.no_breakdowns:
            plots.breakdown_bars(report, os.path.join(args.out_dir, "breakdowns.png"))
    if args.format == "json":
        print(json.dumps(report, indent=2, sort_keys=True))
    else:
        print(_table(rows, _TSV_COLUMNS))
        for note in report["notes"]:
            print(f"note: {note}")
    return 0


def cmd_bench(args) -> int:
    cfg, pipeline, params, model_cfg, _meta = _load_run_dir(args.run_dir)
    events = encode_corpus(pipeline, load_jsonl(args.data))
    result = bench_decoding(params, model_cfg, events, cfg.inference.max_span_len, repeats=args.repeats)
    if args.out_dir:
        os.makedirs(args.out_dir, exist_ok=True)
        with open(os.path.join(args.out_dir, "bench.json"), "w", encoding="utf-8") as fh:
            json.dump(result, fh, indent=2, sort_keys=True)
            fh.write("\n")
        _write_tsv([result], list(result), os.path.join(args.out_dir, "bench.tsv"))
        from . import plots

        plots.bench_bars(result, os.path.join(args.out_dir, "bench.png"))
    print(json.dumps(result, sort_keys=True))
    return 0


def cmd_ablation(args) -> int:
    cfg = load_config(args.config, args.set or [])
    rows = ablation_grid(cfg, quiet=args.quiet)
    out_dir = args.out_dir or os.path.join(cfg.paths.out_dir, "ablation")
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "ablation.json"), "w", encoding="utf-8") as fh:
        json.dump(rows, fh, indent=2, sort_keys=True)
        fh.write("\n")
    columns = ["loss_mode", "shuffled_gold", "seed", "base_lr", "dev_arg_c", "test_arg_i", "test_arg_c", "test_head_c"]
    _write_tsv(rows, columns, os.path.join(out_dir, "ablation.tsv"))
    from . import plots

    plots.ablation_bars(rows, os.path.join(out_dir, "ablation.png"))
    print(_table(rows, columns))
    return 0


# ---------------------------------------------------------------------------
# Parser


def _docs_triple(raw: str) -> tuple[int, int, int]:
    parts = [int(p) for p in raw.split(",")]
    if len(parts) != 3 or any(p < 1 for p in parts):
        raise argparse.ArgumentTypeError("expected three positive integers: train,dev,test")
    return tuple(parts)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="argspan",
        description="Prompt-driven extractive event argument labeling: train, predict, score.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write a synthetic corpus bundle")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stress", action="store_true", help="every role carries two arguments")
    p.add_argument("--docs", type=_docs_triple, default=None, metavar="TRAIN,DEV,TEST")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("schema", help="induce an event schema from a corpus")
    p.add_argument("--data", required=True)
    p.add_argument("--out", default=None, help="also write the schema as JSON")
    p.add_argument("--format", choices=("table", "json"), default="table")
    p.set_defaults(func=cmd_schema)

    p = sub.add_parser("train", help="train with a seed/learning-rate sweep")
    p.add_argument("--config", required=True, help="INI run configuration")
    p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE", help="override a config value")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="decode arguments with a trained run")
    p.add_argument("--run-dir", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--max-span-len", type=int, default=None)
    p.add_argument("--sequential", action="store_true", help="one decoder pass per slot")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="score a prediction file against gold")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--format", choices=("table", "json"), default="table")
    p.add_argument("--out-dir", default=None, help="write report.json/.tsv and figures here")
    p.add_argument("--no-breakdowns", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="joint vs per-slot decoding benchmark")
    p.add_argument("--run-dir", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("ablation", help="matching-loss x gold-order grid")
    p.add_argument("--config", required=True)
    p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE")
    p.add_argument("--out-dir", default=None)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_ablation)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
