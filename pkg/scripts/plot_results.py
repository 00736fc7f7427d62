#!/usr/bin/env python3
"""Render cvkit CSV outputs with matplotlib.

Usage:
    plot_results.py accuracy accuracy.csv [out.png]
    plot_results.py sweep sweep.csv [out.png]
    plot_results.py embed tsne.csv [more.csv ...] [out.png]
    plot_results.py history model.cvnn.history.csv [out.png]
"""

import csv
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def read_rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def plot_accuracy(paths, out):
    rows = read_rows(paths[0])
    fig, axes = plt.subplots(1, 3, figsize=(12, 3.5), sharey=True)
    for ax, key, title in zip(axes, ("acc_ppt", "acc_qfi1", "acc_qfi2"),
                              ("PPT", "QFI order 1", "QFI order 2")):
        for method, style in (("nn", "o-"), ("maxlik", "s--")):
            pts = [(int(r["n_samples"]), float(r[key]))
                   for r in rows if r["method"] == method]
            if pts:
                ax.plot(*zip(*pts), style, label=method)
        ax.set_xscale("log")
        ax.set_xlabel("samples per channel N")
        ax.set_title(title)
        ax.grid(alpha=0.3)
    axes[0].set_ylabel("label accuracy")
    axes[0].legend()
    fig.tight_layout()
    fig.savefig(out, dpi=150)


def plot_sweep(paths, out):
    rows = read_rows(paths[0])
    etas = [float(r["eta"]) for r in rows]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    for key, label in (("nn_sampled_ppt", "NN PPT"),
                       ("nn_sampled_qfi1", "NN QFI1"),
                       ("nn_sampled_qfi2", "NN QFI2")):
        ax1.plot(etas, [float(r[key]) for r in rows], "o-", label=label)
    ax1.axhline(0, color="k", lw=0.5)
    ax1.set_xlabel("loss fraction eta")
    ax1.set_ylabel("signed network score 2p-1")
    ax1.legend()
    ax1.grid(alpha=0.3)
    for key, label in (("witness_ppt", "PPT witness"),
                       ("witness_qfi1", "QFI1 witness"),
                       ("witness_qfi2", "QFI2 witness")):
        ax2.plot(etas, [float(r[key]) for r in rows], "s--", label=label)
    ax2.axhline(0, color="k", lw=0.5)
    ax2.set_xlabel("loss fraction eta")
    ax2.set_ylabel("theoretical witness value")
    ax2.set_yscale("symlog", linthresh=1e-3)
    ax2.legend()
    ax2.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out, dpi=150)


def plot_embed(paths, out):
    fig, axes = plt.subplots(len(paths), 3, figsize=(12, 3.6 * len(paths)),
                             squeeze=False)
    for row_i, path in enumerate(paths):
        rows = read_rows(path)
        xs = [float(r["x"]) for r in rows]
        ys = [float(r["y"]) for r in rows]
        for col, key, title in zip(range(3), ("e_ppt", "e_qfi1", "e_qfi2"),
                                   ("PPT", "QFI order 1", "QFI order 2")):
            ax = axes[row_i][col]
            colors = [int(r[key]) for r in rows]
            ax.scatter(xs, ys, c=colors, cmap="viridis", s=4, alpha=0.6)
            ax.set_title(f"{path}: {title}")
            ax.set_xticks([])
            ax.set_yticks([])
    fig.tight_layout()
    fig.savefig(out, dpi=150)


def plot_history(paths, out):
    rows = read_rows(paths[0])
    epochs = [int(r["epoch"]) for r in rows]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    ax1.plot(epochs, [float(r["train_loss"]) for r in rows], label="train")
    ax1.plot(epochs, [float(r["val_loss"]) for r in rows], label="validation")
    ax1.set_xlabel("epoch")
    ax1.set_ylabel("BCE loss")
    ax1.legend()
    ax1.grid(alpha=0.3)
    for key in ("acc_ppt", "acc_qfi1", "acc_qfi2"):
        ax2.plot(epochs, [float(r[key]) for r in rows], label=key)
    ax2.set_xlabel("epoch")
    ax2.set_ylabel("validation accuracy")
    ax2.legend()
    ax2.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out, dpi=150)


PLOTTERS = {
    "accuracy": plot_accuracy,
    "sweep": plot_sweep,
    "embed": plot_embed,
    "history": plot_history,
}


def main() -> int:
    if len(sys.argv) < 3 or sys.argv[1] not in PLOTTERS:
        print(__doc__)
        return 2
    kind = sys.argv[1]
    rest = sys.argv[2:]
    if len(rest) > 1 and rest[-1].endswith((".png", ".pdf", ".svg")):
        paths, out = rest[:-1], rest[-1]
    else:
        paths, out = rest, f"{kind}.png"
    PLOTTERS[kind](paths, out)
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
