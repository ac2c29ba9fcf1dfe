"""Command-line entry point: ``rare <command> [options]``.

Exit codes: 0 success, 1 failed gradient check, 2 bad configuration or
input files, 3 numerical failure during training.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .evaluation import linear_probe, pool_graph, robustness_run
from .exceptions import ConfigError, GraphFormatError, NumericalError
from .graph import generate_sbm, knn_graph, load_dataset, load_graph_dir, save_graph
from .model import RareConfig, embed, pretrain, pretrain_dataset

CONFIG_FLAGS = {
    "backbone": dict(choices=["gat", "gin"]),
    "mask_ratio": dict(type=float),
    "alpha": dict(type=float),
    "scale_t": dict(type=float),
    "momentum": dict(type=float),
    "layers": dict(type=int),
    "heads": dict(type=int),
    "hidden": dict(type=int),
    "latent_dim": dict(type=int),
    "lr": dict(type=float),
    "epochs": dict(type=int),
    "precision": dict(choices=["f32", "f64"]),
    "momentum_input": dict(choices=["masked", "full"]),
    "latent_loss": dict(choices=["mse", "mae", "isce"]),
    "raw_loss": dict(choices=["mse", "isce"]),
    "batch_size": dict(type=int),
    "gin_eps": dict(type=float),
}
CONFIG_SWITCHES = ("no_predictor", "no_momentum_encoder", "zero_tokens", "ema_swap")
DATA_KEYS = ("graph", "sbm", "p_in", "p_out", "feature_dim", "feature_shift", "knn", "k",
             "labels", "dataset")


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


class CliError(Exception):
    def __init__(self, message, code=2):
        super().__init__(message)
        self.code = code


# ---------------------------------------------------------------------------
# argument plumbing


def _add_config_args(p):
    p.add_argument("--config", help="flat JSON file; keys are flag names, flags win")
    for name, kw in CONFIG_FLAGS.items():
        p.add_argument(_flag(name), dest=name, default=None, **kw)
    for name in CONFIG_SWITCHES:
        p.add_argument(_flag(name), dest=name, action="store_true", default=None)
    _add_seed(p)


def _add_seed(p):
    p.add_argument("--seed", type=int, default=None, help="defaults to $RARE_SEED, then 0")


def _add_data_args(p):
    g = p.add_argument_group("data source (pick one)")
    g.add_argument("--graph", help="graph directory (attrs.csv, edges.tsv, labels.txt)")
    g.add_argument("--sbm", help="block sizes, e.g. 50,50")
    g.add_argument("--p-in", dest="p_in", type=float, default=None)
    g.add_argument("--p-out", dest="p_out", type=float, default=None)
    g.add_argument("--feature-dim", dest="feature_dim", type=int, default=None)
    g.add_argument("--feature-shift", dest="feature_shift", type=float, default=None)
    g.add_argument("--knn", help="CSV of points; nodes joined by a KNN graph")
    g.add_argument("--k", type=int, default=None)
    g.add_argument("--labels", help="label file for --knn points")
    g.add_argument("--dataset", help="directory of graph_XXXXX subdirectories")


def _load_config_file(path):
    if not path:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise CliError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise CliError(f"--config: invalid JSON in {path}: {exc}") from None
    if not isinstance(raw, dict):
        raise CliError("--config: expected a flat JSON object")
    return {k.replace("-", "_"): v for k, v in raw.items()}


def _resolve_seed(args, file_cfg):
    if args.seed is not None:
        return args.seed
    if "seed" in file_cfg:
        return int(file_cfg["seed"])
    env = os.environ.get("RARE_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise CliError(f"RARE_SEED must be an integer, got {env!r}") from None
    return 0


def _merged(args, file_cfg, key, default=None):
    v = getattr(args, key, None)
    if v is not None:
        return v
    return file_cfg.get(key, default)


def build_config(args, file_cfg) -> RareConfig:
    values = {}
    for name in list(CONFIG_FLAGS) + list(CONFIG_SWITCHES):
        v = _merged(args, file_cfg, name)
        if v is not None:
            values[name] = v
    unknown = set(file_cfg) - set(values) - set(CONFIG_FLAGS) - set(CONFIG_SWITCHES) \
        - set(DATA_KEYS) - {"seed", "outlier_fraction", "runs"}
    if unknown:
        raise CliError(f"--config: unknown keys {sorted(unknown)}")
    return RareConfig(**values).validate()


def _parse_blocks(text):
    try:
        blocks = [int(b) for b in str(text).split(",") if b.strip()]
    except ValueError:
        raise CliError(f"--sbm: expected comma-separated integers, got {text!r}") from None
    if not blocks:
        raise CliError("--sbm: at least one block size required")
    return blocks


def load_source(args, file_cfg, seed):
    """Return ``("graph", SparseGraph)`` or ``("dataset", GraphDataset)``."""
    get = lambda k, d=None: _merged(args, file_cfg, k, d)  # noqa: E731
    chosen = [k for k in ("graph", "sbm", "knn", "dataset") if get(k)]
    if len(chosen) != 1:
        raise CliError("exactly one of --graph, --sbm, --knn, --dataset is required")
    kind = chosen[0]
    if kind == "graph":
        return "graph", load_graph_dir(get("graph"))
    if kind == "dataset":
        return "dataset", load_dataset(get("dataset"))
    if kind == "sbm":
        return "graph", generate_sbm(_parse_blocks(get("sbm")), get("p_in", 0.2), get("p_out", 0.02),
                                     get("feature_dim", 16), get("feature_shift", 1.0), seed)
    points = np.loadtxt(get("knn"), delimiter=",", ndmin=2)
    labels = None
    if get("labels"):
        labels = np.loadtxt(get("labels"), dtype=np.int64, ndmin=1)
    return "graph", knn_graph(points, get("k", 10), labels=labels)


def _write_matrix(path, mat):
    np.savetxt(path, mat, fmt="%.17g", delimiter=",")


# ---------------------------------------------------------------------------
# commands


def cmd_pretrain(args):
    file_cfg = _load_config_file(args.config)
    seed = _resolve_seed(args, file_cfg)
    cfg = build_config(args, file_cfg)
    kind, data = load_source(args, file_cfg, seed)
    if kind == "dataset":
        model, report = pretrain_dataset(data, cfg, seed)
    else:
        model, report = pretrain(data, cfg, seed)
    os.makedirs(args.out, exist_ok=True)
    save_checkpoint(model, os.path.join(args.out, "model.rare"), extra={"seed": seed})
    report.to_csv(os.path.join(args.out, "metrics.csv"))
    if report.total:
        print(f"iterations={len(report)} first L={report.total[0]:.6f} last L={report.total[-1]:.6f}")
    print(f"wrote {os.path.join(args.out, 'model.rare')} and metrics.csv")
    return 0


def cmd_embed(args):
    model = load_checkpoint(args.checkpoint)
    g = load_graph_dir(args.graph)
    emb = embed(model, g)
    _write_matrix(args.out, emb)
    print(f"wrote {emb.shape[0]} x {emb.shape[1]} embeddings to {args.out}")
    return 0


def _parse_split(text):
    try:
        parts = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise CliError(f"--split: expected three comma-separated fractions, got {text!r}") from None
    return parts


def _report_probe(result, out):
    for i, (s, a) in enumerate(zip(result.seeds, result.accuracies)):
        print(f"run {i} seed {s} accuracy {a:.4f}")
    print(f"accuracy {result.mean:.4f} ± {result.std:.4f} over {len(result.accuracies)} runs")
    if out:
        result.to_csv(out)


def cmd_probe(args):
    seed = _resolve_seed(args, {})
    emb = np.loadtxt(args.embeddings, delimiter=",", ndmin=2)
    labels = np.loadtxt(args.labels, dtype=np.int64, ndmin=1)
    result = linear_probe(emb, labels, _parse_split(args.split), args.runs, seed, args.jobs)
    _report_probe(result, args.out)
    return 0


def cmd_graph_classify(args):
    seed = _resolve_seed(args, {})
    model = load_checkpoint(args.checkpoint)
    ds = load_dataset(args.dataset)
    if ds.labels is None:
        raise CliError(f"{args.dataset}: graph_labels.txt is required")
    feats = np.stack([pool_graph(embed(model, g), args.pool) for g in ds])
    result = linear_probe(feats, ds.labels, _parse_split(args.split), args.runs, seed, args.jobs)
    _report_probe(result, args.out)
    return 0


def cmd_robustness(args):
    file_cfg = _load_config_file(args.config)
    seed = _resolve_seed(args, file_cfg)
    cfg = build_config(args, file_cfg)
    kind, g = load_source(args, file_cfg, seed)
    if kind != "graph":
        raise CliError("robustness needs a single graph, not --dataset")
    os.makedirs(args.out, exist_ok=True)
    seeds = [seed + i for i in range(args.runs)]

    def one(s):
        return s, robustness_run(g, cfg, args.outlier_fraction, s, probe_runs=args.probe_runs,
                                 mode=args.outlier_mode)

    if args.jobs > 1:
        with ThreadPoolExecutor(args.jobs) as pool:
            traces = list(pool.map(one, seeds))
    else:
        traces = [one(s) for s in seeds]
    with open(os.path.join(args.out, "probe.csv"), "w", encoding="utf-8") as fh:
        fh.write("run,seed,graph,accuracy\n")
        for i, (s, tr) in enumerate(traces):
            tr.to_csv(os.path.join(args.out, f"trace_seed{s}.csv"))
            for name, res in (("adversarial", tr.adversarial_probe), ("clean", tr.clean_probe)):
                if res is not None:
                    fh.write(f"{i},{s},{name},{res.mean!r}\n")
            line = (f"seed {s}: outliers={len(tr.outlier_idx)} "
                    f"final-quartile L_R outlier={tr.final_quartile('raw_outlier'):.4f} "
                    f"normal={tr.final_quartile('raw_normal'):.4f} "
                    f"L_M outlier={tr.final_quartile('latent_outlier'):.4f} "
                    f"normal={tr.final_quartile('latent_normal'):.4f}")
            if tr.adversarial_probe is not None:
                line += (f" acc adversarial={tr.adversarial_probe.mean:.4f}"
                         f" clean={tr.clean_probe.mean:.4f}")
            print(line)
    return 0


def cmd_gradcheck(args):
    from .gradcheck import run_suite

    seed = _resolve_seed(args, {})
    worst = run_suite(seed, args.num_seeds)
    print(f"max relative error {worst:.3e} (tolerance {args.tol:.0e})")
    return 0 if worst < args.tol else 1


def cmd_gen_sbm(args):
    seed = _resolve_seed(args, {})
    g = generate_sbm(_parse_blocks(args.blocks), args.p_in, args.p_out, args.feature_dim,
                     args.feature_shift, seed)
    save_graph(g, args.out)
    print(f"wrote {g.num_nodes} nodes, {g.num_edges} edges to {args.out}")
    return 0


def cmd_knn_graph(args):
    points = np.loadtxt(args.points, delimiter=",", ndmin=2)
    labels = np.loadtxt(args.labels, dtype=np.int64, ndmin=1) if args.labels else None
    g = knn_graph(points, args.k, labels=labels)
    save_graph(g, args.out)
    print(f"wrote {g.num_nodes} nodes, {g.num_edges} edges to {args.out}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="rare", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pretrain", help="self-supervised pre-training")
    _add_config_args(p)
    _add_data_args(p)
    p.add_argument("--out", default="rare_run", help="output directory")
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("embed", help="backbone embeddings for a graph")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--graph", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("probe", help="linear-probe accuracy of embeddings")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--split", default="0.1,0.1,0.8")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", help="write run,seed,accuracy table here")
    _add_seed(p)
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("graph-classify", help="pooled embeddings + linear probe per graph")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--pool", choices=["mean", "max", "sum"], default="mean")
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--split", default="0.8,0.1,0.1")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out")
    _add_seed(p)
    p.set_defaults(func=cmd_graph_classify)

    p = sub.add_parser("robustness", help="training on row-shuffled outliers")
    _add_config_args(p)
    _add_data_args(p)
    p.add_argument("--outlier-fraction", dest="outlier_fraction", type=float, default=0.05)
    p.add_argument("--outlier-mode", dest="outlier_mode", default="within_row",
                   choices=["within_row", "across_rows"])
    p.add_argument("--runs", type=int, default=1, help="number of consecutive seeds")
    p.add_argument("--probe-runs", dest="probe_runs", type=int, default=5)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default="rare_robustness")
    p.set_defaults(func=cmd_robustness)

    p = sub.add_parser("gradcheck", help="finite-difference gradient suite")
    _add_seed(p)
    p.add_argument("--num-seeds", dest="num_seeds", type=int, default=10)
    p.add_argument("--tol", type=float, default=1e-4)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("gen-sbm", help="write a stochastic block model graph")
    p.add_argument("--blocks", required=True, help="e.g. 50,50")
    p.add_argument("--p-in", dest="p_in", type=float, default=0.2)
    p.add_argument("--p-out", dest="p_out", type=float, default=0.02)
    p.add_argument("--feature-dim", dest="feature_dim", type=int, default=16)
    p.add_argument("--feature-shift", dest="feature_shift", type=float, default=1.0)
    p.add_argument("--out", required=True)
    _add_seed(p)
    p.set_defaults(func=cmd_gen_sbm)

    p = sub.add_parser("knn-graph", help="KNN graph from a CSV of points")
    p.add_argument("--points", required=True)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--labels")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_knn_graph)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {_flag(exc.field)}: {exc.message}", file=sys.stderr)
        return 2
    except (CliError, GraphFormatError, CheckpointError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return getattr(exc, "code", 2)
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
