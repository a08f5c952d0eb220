"""Figure rendering for the command-line reports.

Everything draws on the Agg backend and writes straight to disk, so the
CLI can emit figures next to its delimited output on headless machines.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _finish(fig, path) -> str:
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return str(path)


def training_curves(runs: list[list[dict]], path) -> str:
    """Loss per step for every sweep run, with dev span+role F1 overlaid."""
    fig, ax_loss = plt.subplots(figsize=(8, 4.5))
    ax_f1 = ax_loss.twinx()
    for rows in runs:
        steps = [r["step"] for r in rows if r.get("loss") is not None]
        losses = [r["loss"] for r in rows if r.get("loss") is not None]
        label = None
        if rows:
            label = f"seed {rows[0].get('seed', '?')} lr {rows[0].get('base_lr', '?')}"
        if steps:
            ax_loss.plot(steps, losses, alpha=0.8, label=label)
        ev_steps = [r["step"] for r in rows if "dev_arg_c" in r]
        ev_f1 = [r["dev_arg_c"] for r in rows if "dev_arg_c" in r]
        if ev_steps:
            ax_f1.plot(ev_steps, ev_f1, linestyle="--", marker="o", markersize=3, alpha=0.6)
    ax_loss.set_xlabel("step")
    ax_loss.set_ylabel("mean event loss")
    ax_f1.set_ylabel("dev span+role F1 (dashed)")
    ax_f1.set_ylim(0.0, 1.05)
    if any(rows for rows in runs):
        ax_loss.legend(fontsize=8, loc="upper right")
    ax_loss.set_title("training loss and dev F1")
    return _finish(fig, path)


def score_bars(scores: dict[str, dict], path) -> str:
    """Precision/recall/F1 bars for the three scoring modes."""
    modes = list(scores)
    fig, ax = plt.subplots(figsize=(7, 4))
    width = 0.25
    for k, metric in enumerate(("precision", "recall", "f1")):
        xs = [i + (k - 1) * width for i in range(len(modes))]
        ax.bar(xs, [scores[m][metric] for m in modes], width, label=metric)
    ax.set_xticks(range(len(modes)))
    ax.set_xticklabels(modes)
    ax.set_ylim(0.0, 1.05)
    ax.set_ylabel("score")
    ax.set_title("span detection and role classification")
    ax.legend(fontsize=8)
    return _finish(fig, path)


def breakdown_bars(report: dict, path) -> str:
    """Two-panel F1 breakdown: by sentence distance and by per-role gold count."""
    dist = report.get("breakdown_distance", {})
    argn = report.get("breakdown_argnum", {})
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))

    keys = sorted(dist, key=int)
    ax1.bar(range(len(keys)), [dist[k]["f1"] for k in keys], color="tab:blue")
    ax1.set_xticks(range(len(keys)))
    ax1.set_xticklabels(keys)
    ax1.set_xlabel("argument sentence minus trigger sentence (clipped)")
    ax1.set_ylabel("span+role F1")
    ax1.set_ylim(0.0, 1.05)
    ax1.set_title("by sentence distance")

    keys2 = list(argn)
    ax2.bar(range(len(keys2)), [argn[k]["f1"] for k in keys2], color="tab:orange")
    ax2.set_xticks(range(len(keys2)))
    ax2.set_xticklabels(keys2)
    ax2.set_xlabel("gold arguments for the role")
    ax2.set_ylim(0.0, 1.05)
    ax2.set_title("by per-role argument count")
    return _finish(fig, path)


def bench_bars(bench: dict, path) -> str:
    """Prompt passes and wall time for joint vs per-slot decoding."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    labels = ["joint", "per-slot"]
    ax1.bar(labels, [bench["joint_prompt_passes"], bench["sequential_prompt_passes"]], color=["tab:green", "tab:red"])
    ax1.set_ylabel("decoder prompt passes")
    ax1.set_title(f"{bench['events']} events, {bench['slots']} slots")
    ax2.bar(labels, [bench["joint_seconds"], bench["sequential_seconds"]], color=["tab:green", "tab:red"])
    ax2.set_ylabel("wall seconds")
    ax2.set_title(f"speedup x{bench['speedup']}")
    return _finish(fig, path)


def ablation_bars(rows: list[dict], path) -> str:
    """Test span+role F1 for the matching-loss x gold-order grid."""
    fig, ax = plt.subplots(figsize=(7, 4))
    labels = [
        f"{r['loss_mode']}\n{'shuffled' if r['shuffled_gold'] else 'original'}" for r in rows
    ]
    colors = ["tab:blue" if r["loss_mode"] == "bipartite" else "tab:orange" for r in rows]
    ax.bar(range(len(rows)), [r["test_arg_c"] for r in rows], color=colors)
    ax.set_xticks(range(len(rows)))
    ax.set_xticklabels(labels, fontsize=8)
    ax.set_ylabel("test span+role F1")
    ax.set_ylim(0.0, 1.05)
    ax.set_title("matching loss vs gold annotation order")
    return _finish(fig, path)
