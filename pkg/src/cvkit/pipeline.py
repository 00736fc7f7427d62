"""Experiment drivers and the cvkit command line.

Commands: generate (random labeled dataset), train (classifier + history),
evaluate (accuracy vs sampling budget, optionally against the MaxLik
baseline), loss-sweep (photon-subtracted robustness curves) and embed
(t-SNE coordinates of patterns or hidden features).  Every command is a
pure function of (seed, config): rerunning reproduces outputs byte for
byte.  Figures are emitted as CSV plot data only.

After sampling, the classifier path sees patterns alone; true states are
used only to produce ground-truth labels and the MaxLik comparison.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import dataset as ds
from . import homodyne, maxlik, mlp, stellar, tsne, witness
from .fock import FockCutoff, root_fidelity, fidelity
from .homodyne import DEFAULT_GRID

DEFAULT_CUTOFF = FockCutoff(9)
DEFAULT_N_LIST = (10, 100, 1000, 10_000, 100_000)
THREADS_ENV = "CVKIT_THREADS"


def worker_count(requested: int | None = None) -> int:
    if requested is not None:
        return max(1, requested)
    env = os.environ.get(THREADS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _generate_one(task) -> ds.DatasetRecord:
    index, master_seed, ranges, cutoff = task
    seed = np.random.SeedSequence((master_seed, index))
    state, circuit, core = stellar.synthesize_random_state(ranges, cutoff, seed)
    values, labels = witness.label_state(state)
    pattern = homodyne.pattern_from_pdf(state)
    return ds.DatasetRecord(
        state_id=index,
        core=core,
        circuit=circuit,
        witness_values=values,
        labels=labels,
        pattern=pattern.channels.astype(np.float32),
    )


def generate_dataset(count: int, ranges: stellar.GenerationRanges,
                     cutoff: FockCutoff, seed: int,
                     workers: int | None = None) -> list[ds.DatasetRecord]:
    """Synthesize, label and bin `count` states with per-index seeds.

    The per-index seed derivation makes the result independent of the
    worker count, so parallel and serial runs agree bitwise.
    """
    tasks = [(i, seed, ranges, cutoff) for i in range(count)]
    n_workers = min(worker_count(workers), count) or 1
    if n_workers <= 1:
        return [_generate_one(t) for t in tasks]
    chunk = max(1, count // (n_workers * 8))
    with ProcessPoolExecutor(max_workers=n_workers) as pool:
        return list(pool.map(_generate_one, tasks, chunksize=chunk))


def class_balance(records: list[ds.DatasetRecord]) -> np.ndarray:
    return np.mean([r.labels.as_array() for r in records], axis=0)


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".12g")
    return str(x)


def write_csv(path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def evaluate_sweep(model: mlp.MlpModel, test_seed: int, n_states: int,
                   n_list=DEFAULT_N_LIST, with_maxlik: bool = True,
                   ranges: stellar.GenerationRanges | None = None,
                   cutoff: FockCutoff = DEFAULT_CUTOFF,
                   grid=DEFAULT_GRID,
                   maxlik_iterations: int = 20) -> list[dict]:
    """Accuracy of NN (and optionally MaxLik) labels against truth, per N.

    Fresh unseen states are drawn from `test_seed`; for each state and
    each sampling budget the same Monte Carlo record feeds both methods.
    """
    ranges = ranges or stellar.GenerationRanges()
    truth = []
    nn_hits = {n: [] for n in n_list}
    ml_hits = {n: [] for n in n_list}
    ml_fid = {n: [] for n in n_list}
    for i in range(n_states):
        state, _, _ = stellar.synthesize_random_state(
            ranges, cutoff, np.random.SeedSequence((test_seed, i)))
        _, labels = witness.label_state(state)
        y = labels.as_array()
        truth.append(y)
        for n in n_list:
            samples = homodyne.sample_all_channels(
                state, n, np.random.SeedSequence((test_seed, i, n)), grid)
            pattern = homodyne.pattern_from_samples(samples, grid)
            probs, _ = mlp.forward(model, pattern)
            nn_hits[n].append((probs >= 0.5).astype(float) == y)
            if with_maxlik:
                rec = maxlik.reconstruct(samples, cutoff, maxlik_iterations,
                                         grid)
                _, ml_labels = witness.label_state(rec)
                ml_hits[n].append(ml_labels.as_array() == y)
                ml_fid[n].append((fidelity(rec, state),
                                  root_fidelity(rec, state)))
    rows = []
    for n in n_list:
        acc = np.mean(nn_hits[n], axis=0)
        rows.append({"n_samples": n, "method": "nn",
                     "acc_ppt": acc[0], "acc_qfi1": acc[1], "acc_qfi2": acc[2],
                     "mean_fidelity": "", "mean_root_fidelity": ""})
    if with_maxlik:
        for n in n_list:
            acc = np.mean(ml_hits[n], axis=0)
            fids = np.mean(ml_fid[n], axis=0)
            rows.append({"n_samples": n, "method": "maxlik",
                         "acc_ppt": acc[0], "acc_qfi1": acc[1],
                         "acc_qfi2": acc[2],
                         "mean_fidelity": fids[0],
                         "mean_root_fidelity": fids[1]})
    return rows


def loss_sweep(model: mlp.MlpModel, etas, sweep_seed: int = 0,
               n_samples: int = 100_000,
               r1_db: float = 2.0, r2_db: float = -3.0,
               omega1: float = 0.0, omega2: float = 0.0,
               gamma: float = np.pi / 4,
               cutoff: FockCutoff = DEFAULT_CUTOFF,
               grid=DEFAULT_GRID) -> list[dict]:
    """Photon-subtracted robustness curves.

    Per loss value: signed network scores 2p-1 on the theoretical and on a
    Monte Carlo sampled pattern, plus the three theoretical witnesses.
    """
    rows = []
    for eta in etas:
        state = stellar.photon_subtracted_state(
            r1_db, r2_db, omega1, omega2, gamma, float(eta), cutoff)
        values, _ = witness.label_state(state)
        theory = homodyne.pattern_from_pdf(state, grid)
        s_theory = mlp.signed_scores(model, theory)
        samples = homodyne.sample_all_channels(
            state, n_samples, np.random.SeedSequence((sweep_seed, int(eta * 1e9))),
            grid)
        sampled = homodyne.pattern_from_samples(samples, grid)
        s_sampled = mlp.signed_scores(model, sampled)
        rows.append({
            "eta": float(eta),
            "nn_theory_ppt": s_theory[0], "nn_theory_qfi1": s_theory[1],
            "nn_theory_qfi2": s_theory[2],
            "nn_sampled_ppt": s_sampled[0], "nn_sampled_qfi1": s_sampled[1],
            "nn_sampled_qfi2": s_sampled[2],
            "witness_ppt": values.ppt_min, "witness_qfi1": values.qfi1,
            "witness_qfi2": values.qfi2,
        })
    return rows


def embedding_rows(records: list[ds.DatasetRecord], which: str,
                   model: mlp.MlpModel | None,
                   config: tsne.TsneConfig) -> tuple[list[dict], tsne.Embedding]:
    """t-SNE coordinates of raw patterns or hidden features, with labels."""
    if which == "features":
        if model is None:
            raise ValueError("features mode needs a trained model")
        xs = np.stack([mlp.forward(model, r.pattern.astype(float).ravel())[1]
                       for r in records])
    elif which == "raw":
        xs = np.stack([r.pattern.astype(float).ravel() for r in records])
    else:
        raise ValueError(f"unknown embedding input {which!r}")
    emb = tsne.embed(xs, config)
    rows = [{"x": emb.points[i, 0], "y": emb.points[i, 1],
             "e_ppt": r.labels.e_ppt, "e_qfi1": r.labels.e_qfi1,
             "e_qfi2": r.labels.e_qfi2}
            for i, r in enumerate(records)]
    return rows, emb


# ---------------------------------------------------------------------------
# CLI


def parse_config_file(path) -> dict[str, str]:
    """key=value lines; blank lines and #-comments ignored."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def _cfg(args, key: str, cast, default):
    """Precedence: explicit CLI flag > config file > default."""
    cli_val = getattr(args, key.replace("-", "_"), None)
    if cli_val is not None:
        return cli_val
    if args.config_values and key in args.config_values:
        raw = args.config_values[key]
        if cast is bool:
            return raw.lower() in ("1", "true", "yes", "on")
        return cast(raw)
    return default


def cmd_generate(args) -> int:
    count = _cfg(args, "count", int, 15_000)
    ranges = stellar.GenerationRanges(
        r_max=_cfg(args, "r_max", float, 1.15),
        alpha_max=_cfg(args, "alpha_max", float, 1.0),
        eta_max=_cfg(args, "eta_max", float, 0.5),
        bs_prob=_cfg(args, "bs_prob", float, 0.5))
    cutoff = FockCutoff(_cfg(args, "n_max", int, 9))
    records = generate_dataset(count, ranges, cutoff, args.seed, args.workers)
    ds.write_dataset(args.out, records, cutoff)
    balance = class_balance(records)
    print(f"wrote {count} records to {args.out}")
    print(f"class balance  e_ppt={balance[0]:.3f}  e_qfi1={balance[1]:.3f}  "
          f"e_qfi2={balance[2]:.3f}")
    return 0


def cmd_train(args) -> int:
    records, meta = ds.read_dataset(args.dataset)
    config = mlp.TrainConfig(
        epochs=_cfg(args, "epochs", int, 3000),
        batch_size=_cfg(args, "batch_size", int, 64),
        learning_rate=_cfg(args, "learning_rate", float, 1e-3),
        dropout_rate=_cfg(args, "dropout_rate", float, 0.2),
        val_fraction=_cfg(args, "val_fraction", float, 0.3),
        seed=args.seed)
    model = mlp.init_model(args.seed)
    result = mlp.train(model, ds.training_pairs(records), config)
    mlp.save_model(result.best_model, args.out)
    final_path = str(args.out) + ".final"
    mlp.save_model(result.final_model, final_path)
    history_path = str(args.out) + ".history.csv"
    write_csv(history_path,
              ["epoch", "train_loss", "val_loss", "acc_ppt", "acc_qfi1",
               "acc_qfi2"],
              [[h["epoch"], h["train_loss"], h["val_loss"], h["acc_ppt"],
                h["acc_qfi1"], h["acc_qfi2"]] for h in result.history])
    last = result.history[-1]
    print(f"trained {config.epochs} epochs on {meta['count']} records")
    print(f"best epoch {result.best_epoch}; final val acc "
          f"ppt={last['acc_ppt']:.3f} qfi1={last['acc_qfi1']:.3f} "
          f"qfi2={last['acc_qfi2']:.3f}")
    print(f"checkpoints: {args.out} (best), {final_path} (final); "
          f"history: {history_path}")
    return 0


def _parse_n_list(text: str):
    return tuple(int(v) for v in text.split(",") if v.strip())


def cmd_evaluate(args) -> int:
    model = mlp.load_model(args.model)
    n_list = _parse_n_list(_cfg(args, "n_list", str, "10,100,1000,10000,100000"))
    rows = evaluate_sweep(
        model,
        test_seed=args.seed,
        n_states=_cfg(args, "n_states", int, 500),
        n_list=n_list,
        with_maxlik=not args.no_maxlik,
        cutoff=FockCutoff(_cfg(args, "n_max", int, 9)))
    header = ["n_samples", "method", "acc_ppt", "acc_qfi1", "acc_qfi2",
              "mean_fidelity", "mean_root_fidelity"]
    write_csv(args.out, header, [[r[k] for k in header] for r in rows])
    for r in rows:
        print(f"N={r['n_samples']:>7} {r['method']:>7}: "
              f"ppt={r['acc_ppt']:.3f} qfi1={r['acc_qfi1']:.3f} "
              f"qfi2={r['acc_qfi2']:.3f}")
    print(f"wrote {args.out}")
    return 0


def cmd_loss_sweep(args) -> int:
    model = mlp.load_model(args.model)
    eta_max = _cfg(args, "eta_max", float, 0.6)
    eta_count = _cfg(args, "eta_count", int, 13)
    etas = np.linspace(0.0, eta_max, eta_count)
    rows = loss_sweep(
        model, etas, sweep_seed=args.seed,
        n_samples=_cfg(args, "samples", int, 100_000),
        r1_db=_cfg(args, "r1_db", float, 2.0),
        r2_db=_cfg(args, "r2_db", float, -3.0),
        gamma=_cfg(args, "gamma", float, np.pi / 4),
        cutoff=FockCutoff(_cfg(args, "n_max", int, 9)))
    header = ["eta", "nn_theory_ppt", "nn_theory_qfi1", "nn_theory_qfi2",
              "nn_sampled_ppt", "nn_sampled_qfi1", "nn_sampled_qfi2",
              "witness_ppt", "witness_qfi1", "witness_qfi2"]
    write_csv(args.out, header, [[r[k] for k in header] for r in rows])
    print(f"wrote {args.out} ({len(rows)} loss values)")
    return 0


def cmd_embed(args) -> int:
    records, _ = ds.read_dataset(args.dataset)
    limit = _cfg(args, "limit", int, 2000)
    records = records[:limit]
    which = _cfg(args, "which", str, "features")
    model = mlp.load_model(args.model) if which == "features" else None
    config = tsne.TsneConfig(
        perplexity=_cfg(args, "perplexity", float, 30.0),
        iterations=_cfg(args, "iterations", int, 1000),
        seed=args.seed)
    rows, emb = embedding_rows(records, which, model, config)
    header = ["x", "y", "e_ppt", "e_qfi1", "e_qfi2"]
    write_csv(args.out, header, [[r[k] for k in header] for r in rows])
    print(f"embedded {len(rows)} states ({which}); "
          f"KL {emb.initial_kl:.4f} -> {emb.final_kl:.4f}")
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cvkit",
        description="Correlation-pattern entanglement detection toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--config", type=str, default=None,
                       help="key=value config file")
        p.add_argument("--out", type=str, required=True)

    p = sub.add_parser("generate", help="synthesize a labeled dataset")
    common(p)
    p.add_argument("--count", type=int, default=None)
    p.add_argument("--workers", type=int, default=None,
                   help=f"default: ${THREADS_ENV} or cpu count")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train the classifier on a dataset")
    common(p)
    p.add_argument("--dataset", type=str, required=True)
    p.add_argument("--epochs", type=int, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="accuracy vs sampling budget")
    common(p)
    p.add_argument("--model", type=str, required=True)
    p.add_argument("--n-states", type=int, default=None, dest="n_states")
    p.add_argument("--no-maxlik", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("loss-sweep",
                       help="photon-subtracted robustness curves")
    common(p)
    p.add_argument("--model", type=str, required=True)
    p.set_defaults(func=cmd_loss_sweep)

    p = sub.add_parser("embed", help="t-SNE coordinates of a dataset")
    common(p)
    p.add_argument("--dataset", type=str, required=True)
    p.add_argument("--model", type=str, default=None)
    p.add_argument("--which", type=str, default=None,
                   choices=("raw", "features"))
    p.add_argument("--limit", type=int, default=None)
    p.set_defaults(func=cmd_embed)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    args.config_values = parse_config_file(args.config) if args.config else {}
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
