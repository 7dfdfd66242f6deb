"""Batch command-line interface.

Subcommands: gen, augment, train, assess, suite, report. Configs are JSON
files; command-line flags override config values. Progress goes to stderr,
machine-readable output to files or stdout. Exit codes: 0 success, 2
config/validation error, 3 runtime failure, 4 total suite failure.
"""

import argparse
import json
import os
import sys

from .assess import AssessConfig, report_dicts_csv, run_assessment, \
    run_suite, suite_csv
from .augment import (Node2vecConfig, append_features, laplacian_pe,
                      load_embedding_cache, node2vec_embed,
                      save_embedding_cache)
from .data_io import Dataset, DatasetFormatError, load_dataset, save_dataset
from .estimators import GNNNodeClassifier
from .generate import build_sbm_dataset, cluster_config, pattern_config


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _fail_config(msg):
    raise CliError(msg, 2)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="gnnbench",
        description="GNN node-classification benchmark toolkit")
    parser.add_argument("--seed", type=int, default=0,
                        help="base seed for all derived RNG streams")
    parser.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                        help="worker processes for assessment cells")
    parser.add_argument("--out", default=".",
                        help="output directory (created if absent)")
    parser.add_argument("--force", action="store_true",
                        help="overwrite existing outputs")
    parser.add_argument("--log", action="store_true",
                        help="write per-epoch JSON-lines training logs")
    parser.add_argument("--final-model", action="store_true",
                        help="keep the last epoch instead of the best-"
                             "validation snapshot")
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="generate an SBM dataset")
    p_gen.add_argument("kind", choices=["pattern", "cluster"])
    p_gen.add_argument("--config", help="SbmConfig JSON file")

    p_aug = sub.add_parser("augment", help="append positional/embedding "
                                           "features to a dataset")
    p_aug.add_argument("dataset", help="dataset directory")
    p_aug.add_argument("--method", choices=["lap-pe", "node2vec"],
                       required=True)
    p_aug.add_argument("--dims", type=int, default=64)
    p_aug.add_argument("--config", help="Node2vecConfig JSON file")

    p_train = sub.add_parser("train", help="train one model on a dataset")
    p_train.add_argument("dataset", help="dataset directory")
    p_train.add_argument("--config", help="model/train config JSON file")
    p_train.add_argument("--architecture", default=None)
    p_train.add_argument("--layers", type=int, default=None)
    p_train.add_argument("--budget", type=int, default=None)
    p_train.add_argument("--hidden", type=int, default=None)
    p_train.add_argument("--metric", default=None,
                         choices=["acc", "weighted_acc", "auc"])
    p_train.add_argument("--split-index", type=int, default=0,
                         help="which saved fold to train on")

    p_assess = sub.add_parser("assess", help="k-fold or holdout assessment "
                                             "of one model")
    p_assess.add_argument("--config", required=True,
                          help="assessment config JSON file")

    p_suite = sub.add_parser("suite", help="run a model-comparison suite")
    p_suite.add_argument("--config", required=True,
                         help="suite config JSON file")

    p_report = sub.add_parser("report", help="combine report JSONs into a "
                                             "comparison CSV")
    p_report.add_argument("reports", nargs="+",
                          help="report JSON files or directories")
    return parser


def _load_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        _fail_config(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        _fail_config(f"{path}: invalid JSON ({exc})")


def _ensure_out(args):
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _guard_overwrite(path, force):
    if os.path.exists(path) and not force:
        _fail_config(f"refusing to overwrite existing {path} "
                     "(use --force)")


def _load_dataset_checked(path):
    try:
        return load_dataset(path)
    except (DatasetFormatError, FileNotFoundError, KeyError) as exc:
        _fail_config(f"cannot load dataset {path}: {exc}")


# -- subcommands --------------------------------------------------------------

def cmd_gen(args):
    defaults = pattern_config if args.kind == "pattern" else cluster_config
    overrides = {}
    if args.config:
        overrides = _load_json(args.config)
    overrides.setdefault("seed", args.seed)
    try:
        cfg = defaults(**overrides)
    except (TypeError, ValueError) as exc:
        _fail_config(f"invalid {args.kind} config: {exc}")
    out = _ensure_out(args)
    _guard_overwrite(os.path.join(out, "meta.json"), args.force)
    print(f"[gen] {args.kind}: {cfg.n_graphs} graphs, seed {cfg.seed}",
          file=sys.stderr)
    ds = build_sbm_dataset(args.kind, cfg)
    save_dataset(ds, out)
    print(f"[gen] wrote {out}", file=sys.stderr)
    return 0


def cmd_augment(args):
    ds = _load_dataset_checked(args.dataset)
    out = _ensure_out(args)
    _guard_overwrite(os.path.join(out, "meta.json"), args.force)
    hashes = [g.structure_hash() for g in ds.graphs]
    kind = "lap_pe" if args.method == "lap-pe" else "node2vec"
    cache_path = os.path.join(out, f"{kind}_cache.bin")
    cached = load_embedding_cache(cache_path, kind, args.dims, args.seed,
                                  hashes)
    if cached is not None:
        print(f"[augment] cache hit: {cache_path}", file=sys.stderr)
        embeddings = cached
    else:
        try:
            if kind == "lap_pe":
                embeddings = [laplacian_pe(g, args.dims).vectors
                              for g in ds.graphs]
            else:
                overrides = _load_json(args.config) if args.config else {}
                overrides["dims"] = args.dims
                overrides.setdefault("seed", args.seed)
                cfg = Node2vecConfig(**overrides).validate()
                embeddings = [node2vec_embed(g, cfg) for g in ds.graphs]
        except (TypeError, ValueError) as exc:
            _fail_config(f"augmentation failed: {exc}")
        save_embedding_cache(cache_path, kind, args.dims, args.seed, hashes,
                             embeddings)
    graphs = [append_features(g, emb)
              for g, emb in zip(ds.graphs, embeddings)]
    aug = Dataset(f"{ds.name}-{kind}", graphs, splits=ds.splits,
                  multi_task=ds.multi_task, n_classes=ds.n_classes)
    save_dataset(aug, out)
    print(f"[augment] wrote {out} (feature_dim {ds.feature_dim} -> "
          f"{aug.feature_dim})", file=sys.stderr)
    return 0


def _split_for_train(ds, index):
    if ds.splits is None or not ds.splits.folds:
        _fail_config("dataset has no saved splits; run gen or provide "
                     "splits.json")
    if not 0 <= index < len(ds.splits.folds):
        _fail_config(f"split index {index} out of range "
                     f"(saved: {len(ds.splits.folds)})")
    return ds.splits.folds[index]


def cmd_train(args):
    ds = _load_dataset_checked(args.dataset)
    params = {}
    if args.config:
        params.update(_load_json(args.config))
    for key, val in (("architecture", args.architecture),
                     ("num_layers", args.layers),
                     ("param_budget", args.budget),
                     ("hidden_dim", args.hidden),
                     ("metric", args.metric)):
        if val is not None:
            params[key] = val
    params.setdefault("seed", args.seed)
    params.setdefault("metric", "acc")
    params["final_model"] = bool(args.final_model or
                                 params.get("final_model", False))
    if ds.multi_task:
        params.setdefault("loss", "bce")
        params.setdefault("metric", "auc")
    split = _split_for_train(ds, args.split_index)
    out = _ensure_out(args)
    ckpt_path = os.path.join(out, "checkpoint.bin")
    _guard_overwrite(ckpt_path, args.force)
    log_path = os.path.join(out, "train_log.jsonl") if args.log else None
    try:
        est = GNNNodeClassifier(**params)
    except TypeError as exc:
        _fail_config(f"invalid model config: {exc}")
    data = ds.graphs[0] if ds.single_graph else ds.graphs
    try:
        est.fit(data, split=split, n_classes=ds.n_classes, log_path=log_path)
        _, train_m = est.evaluate_split(data, split.train)
        _, val_m = est.evaluate_split(data, split.valid)
        _, test_m = est.evaluate_split(data, split.test)
    except ValueError as exc:
        _fail_config(f"invalid configuration: {exc}")
    except Exception as exc:
        raise CliError(f"training failed: {exc}", 3)
    est.model_.save(ckpt_path)
    run = {"architecture": est.config_.architecture,
           "num_layers": est.config_.num_layers,
           "hidden_dim": est.config_.hidden_dim,
           "param_count": est.n_parameters_,
           "epochs": len(est.history_),
           "best_epoch": est.best_epoch_,
           "metric": params["metric"],
           "train_metric": train_m, "val_metric": val_m,
           "test_metric": test_m, "seed": params["seed"]}
    with open(os.path.join(out, "run.json"), "w", encoding="utf-8") as fh:
        json.dump(run, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"[train] test {params['metric']}={test_m:.4f} after "
          f"{len(est.history_)} epochs", file=sys.stderr)
    return 0


def cmd_assess(args):
    spec = _load_json(args.config)
    if "dataset" not in spec or "model" not in spec:
        _fail_config("assess config needs 'dataset' and 'model' entries")
    ds = _load_dataset_checked(spec["dataset"])
    opts = spec.get("assess", {})
    cfg = AssessConfig(k=opts.get("k", 10), repeats=opts.get("repeats", 3),
                       n_seeds=opts.get("seeds", 4),
                       base_seed=opts.get("base_seed", args.seed),
                       metric=spec.get("metric", "acc"), jobs=args.jobs)
    out = _ensure_out(args)
    report_path = os.path.join(out, "report.json")
    _guard_overwrite(report_path, args.force)
    try:
        report = run_assessment(ds, spec["model"], cfg)
    except ValueError as exc:
        _fail_config(str(exc))
    except Exception as exc:
        raise CliError(f"assessment failed: {exc}", 3)
    with open(report_path, "w", encoding="utf-8") as fh:
        fh.write(report.to_json())
    with open(os.path.join(out, "report.csv"), "w", encoding="utf-8",
              newline="\n") as fh:
        fh.write(report_dicts_csv([report.to_dict()]))
    mean, std = report.test
    print(f"[assess] test {cfg.metric} = {mean:.4f}±{std:.4f}",
          file=sys.stderr)
    return 0


def cmd_suite(args):
    suite = _load_json(args.config)
    if "datasets" not in suite:
        _fail_config("suite config needs a 'datasets' list")
    datasets = {}
    for path in suite["datasets"]:
        ds = _load_dataset_checked(path)
        datasets[ds.name] = ds
    out = _ensure_out(args)
    csv_path = os.path.join(out, "comparison.csv")
    _guard_overwrite(csv_path, args.force)
    entries = run_suite(suite, datasets, jobs=args.jobs,
                        progress=sys.stderr, base_seed=args.seed)
    for e in entries:
        if e["status"] != "ok":
            continue
        name = (f"report_{e['dataset']}_{e['architecture']}"
                f"_L{e['layers']}_B{e['budget']}.json")
        with open(os.path.join(out, name), "w", encoding="utf-8") as fh:
            fh.write(e["report"].to_json())
    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(suite_csv(entries))
    print(f"[suite] wrote {csv_path}", file=sys.stderr)
    if all(e["status"] != "ok" for e in entries):
        raise CliError("every suite cell failed", 4)
    return 0


def cmd_report(args):
    dicts = []
    for path in args.reports:
        if os.path.isdir(path):
            names = sorted(fn for fn in os.listdir(path)
                           if fn.startswith("report") and
                           fn.endswith(".json"))
            for fn in names:
                dicts.append(_load_json(os.path.join(path, fn)))
        else:
            dicts.append(_load_json(path))
    if not dicts:
        _fail_config("no report files found")
    text = report_dicts_csv(dicts)
    if args.out != ".":
        _ensure_out(args)
        target = os.path.join(args.out, "comparison.csv")
        _guard_overwrite(target, args.force)
        with open(target, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


COMMANDS = {"gen": cmd_gen, "augment": cmd_augment, "train": cmd_train,
            "assess": cmd_assess, "suite": cmd_suite, "report": cmd_report}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
