"""Fair-comparison protocol: k-fold model assessment, multi-seed holdout
runs, and suite execution over (architecture, depth, budget) grids.

Every training run is an independent cell keyed by (seed index, fold,
repeat); its RNG seed is derived with a fixed 64-bit mix, so adding folds,
repeats, or seeds never disturbs existing cells, and results are identical
for any parallelism level. Reports aggregate test metrics per the two-level
scheme: mean over repeats within a fold, mean over folds within a seed,
then mean +/- sample std over seeds. Wall-clock times are kept out of
serialized reports so repeated runs produce byte-identical files.
"""

import csv
import io
import json
import multiprocessing
import time
from dataclasses import dataclass

import numpy as np

from . import __version__
from .estimators import GNNNodeClassifier
from .splits import stratified_kfold
from .util import mix64, rng_from, sha256_text


@dataclass
class AssessConfig:
    k: int = 10
    repeats: int = 3
    n_seeds: int = 4
    base_seed: int = 0
    metric: str = "acc"
    jobs: int = 1

    def validate(self):
        if self.k < 2 or self.repeats < 1 or self.n_seeds < 1:
            raise ValueError("need k >= 2, repeats >= 1, n_seeds >= 1")
        return self


@dataclass
class RunRecord:
    seed: int
    seed_index: int
    fold: int
    repeat: int
    train_metric: float
    val_metric: float
    test_metric: float
    epochs: int
    param_count: int
    wall_seconds: float

    def to_dict(self, include_wall=False):
        d = {"seed": self.seed, "seed_index": self.seed_index,
             "fold": self.fold, "repeat": self.repeat,
             "train_metric": self.train_metric,
             "val_metric": self.val_metric,
             "test_metric": self.test_metric, "epochs": self.epochs,
             "param_count": self.param_count}
        if include_wall:
            d["wall_seconds"] = self.wall_seconds
        return d


class Report:
    def __init__(self, dataset_name, scheme, metric, est_params, records,
                 seed_aggregates, per_fold, provenance):
        self.dataset_name = dataset_name
        self.scheme = scheme
        self.metric = metric
        self.est_params = est_params
        self.records = records
        self.seed_aggregates = seed_aggregates  # one dict per seed index
        self.per_fold = per_fold
        self.provenance = provenance
        self.param_count = records[0].param_count

    def _stat(self, key):
        vals = np.asarray([s[key] for s in self.seed_aggregates])
        std = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
        return float(vals.mean()), std

    @property
    def test(self):
        return self._stat("test")

    @property
    def valid(self):
        return self._stat("valid")

    @property
    def train(self):
        return self._stat("train")

    @property
    def epochs(self):
        return self._stat("epochs")

    def to_dict(self):
        train, valid, test, epochs = self.train, self.valid, self.test, \
            self.epochs
        return {
            "dataset": self.dataset_name,
            "scheme": self.scheme,
            "metric": self.metric,
            "model": self.est_params,
            "param_count": self.param_count,
            "train": {"mean": train[0], "std": train[1]},
            "valid": {"mean": valid[0], "std": valid[1]},
            "test": {"mean": test[0], "std": test[1]},
            "epochs": {"mean": epochs[0], "std": epochs[1]},
            "per_seed": self.seed_aggregates,
            "per_fold": self.per_fold,
            "records": [r.to_dict() for r in self.records],
            "provenance": self.provenance,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def _experiment_seed(base_seed, seed_index):
    return mix64(base_seed, 0x5EED, seed_index)


def _run_cell(dataset, est_params, split, run_seed, metric):
    params = dict(est_params)
    params["seed"] = run_seed
    params["metric"] = metric
    est = GNNNodeClassifier(**params)
    data = dataset.graphs[0] if dataset.single_graph else dataset.graphs
    start = time.perf_counter()
    est.fit(data, split=split, n_classes=dataset.n_classes)
    wall = time.perf_counter() - start
    _, train_m = est.evaluate_split(data, split.train)
    _, val_m = est.evaluate_split(data, split.valid)
    _, test_m = est.evaluate_split(data, split.test)
    return est, train_m, val_m, test_m, wall


_POOL_STATE = {}


def _pool_init(dataset, est_params, metric):
    _POOL_STATE["dataset"] = dataset
    _POOL_STATE["est_params"] = est_params
    _POOL_STATE["metric"] = metric


def _pool_task(args):
    seed_index, fold, repeat, run_seed, split = args
    est, train_m, val_m, test_m, wall = _run_cell(
        _POOL_STATE["dataset"], _POOL_STATE["est_params"], split, run_seed,
        _POOL_STATE["metric"])
    return RunRecord(run_seed, seed_index, fold, repeat, train_m, val_m,
                     test_m, len(est.history_), est.n_parameters_, wall)


def _execute(cells, dataset, est_params, metric, jobs):
    if jobs <= 1:
        _pool_init(dataset, est_params, metric)
        return [_pool_task(c) for c in cells]
    ctx = multiprocessing.get_context("fork")
    with ctx.Pool(jobs, initializer=_pool_init,
                  initargs=(dataset, est_params, metric)) as pool:
        return pool.map(_pool_task, cells)


def kfold_splits_for(dataset, k, base_seed):
    """Saved folds when the dataset carries them; otherwise stratified folds
    computed deterministically from the base seed."""
    if dataset.splits is not None and dataset.splits.scheme == "kfold" \
            and len(dataset.splits.folds) == k:
        return dataset.splits.folds
    labels = np.asarray(dataset.graphs[0].labels)
    return stratified_kfold(labels, k=k, ratio=(k - 2, 1, 1),
                            rng=rng_from(base_seed, 0xF01D5))


def _provenance(dataset, est_params, cfg):
    cfg_json = json.dumps({"model": est_params, "assess": {
        "k": cfg.k, "repeats": cfg.repeats, "n_seeds": cfg.n_seeds,
        "base_seed": cfg.base_seed, "metric": cfg.metric}}, sort_keys=True)
    return {"config_hash": sha256_text(cfg_json),
            "dataset_hash": dataset.content_hash(),
            "version": __version__}


def assess_kfold(dataset, est_params, cfg):
    """Algorithm: per fold train R times, average the test metric over R,
    average over folds, repeat per experiment seed, report mean +/- std."""
    cfg.validate()
    if not dataset.single_graph:
        raise ValueError("k-fold assessment expects a single-graph dataset")
    folds = kfold_splits_for(dataset, cfg.k, cfg.base_seed)
    cells = []
    for si in range(cfg.n_seeds):
        exp_seed = _experiment_seed(cfg.base_seed, si)
        for fold in range(cfg.k):
            for rep in range(cfg.repeats):
                cells.append((si, fold, rep, mix64(exp_seed, fold, rep),
                              folds[fold]))
    records = _execute(cells, dataset, est_params, cfg.metric, cfg.jobs)
    seed_aggregates = []
    for si in range(cfg.n_seeds):
        mine = [r for r in records if r.seed_index == si]
        fold_test, fold_train, fold_val = [], [], []
        for fold in range(cfg.k):
            reps = [r for r in mine if r.fold == fold]
            fold_test.append(np.mean([r.test_metric for r in reps]))
            fold_train.append(np.mean([r.train_metric for r in reps]))
            fold_val.append(np.mean([r.val_metric for r in reps]))
        seed_aggregates.append({
            "seed_index": si,
            "train": float(np.mean(fold_train)),
            "valid": float(np.mean(fold_val)),
            "test": float(np.mean(fold_test)),
            "epochs": float(np.mean([r.epochs for r in mine])),
        })
    per_fold = [{"fold": fold,
                 "test": float(np.mean([r.test_metric for r in records
                                        if r.fold == fold]))}
                for fold in range(cfg.k)]
    return Report(dataset.name, "kfold", cfg.metric, est_params, records,
                  seed_aggregates, per_fold, _provenance(dataset, est_params,
                                                         cfg))


def assess_holdout(dataset, est_params, cfg):
    """One training run per experiment seed on the saved split."""
    cfg.validate()
    if dataset.splits is None or not dataset.splits.folds:
        raise ValueError("holdout assessment requires a saved split "
                         "(splits.json)")
    split = dataset.splits.folds[0]
    cells = []
    for si in range(cfg.n_seeds):
        exp_seed = _experiment_seed(cfg.base_seed, si)
        cells.append((si, -1, 0, mix64(exp_seed, -1, 0), split))
    records = _execute(cells, dataset, est_params, cfg.metric, cfg.jobs)
    seed_aggregates = [{
        "seed_index": r.seed_index,
        "train": r.train_metric,
        "valid": r.val_metric,
        "test": r.test_metric,
        "epochs": float(r.epochs),
    } for r in records]
    return Report(dataset.name, "holdout", cfg.metric, est_params, records,
                  seed_aggregates, [], _provenance(dataset, est_params, cfg))


def run_assessment(dataset, est_params, cfg):
    """Scheme chosen by the dataset: k-fold on a single graph, holdout on
    multi-graph collections with saved splits."""
    if dataset.single_graph:
        return assess_kfold(dataset, est_params, cfg)
    return assess_holdout(dataset, est_params, cfg)


# ---------------------------------------------------------------------------
# suites

def _suite_cells(suite, dataset_names):
    budgets = suite.get("budgets", [{"budget": 100000, "layers": 4},
                                    {"budget": 500000, "layers": 16}])
    overrides = suite.get("layer_overrides", {})
    for ds_name in dataset_names:
        for arch in suite.get("architectures", ["mlp", "gcn"]):
            for bi, spec in enumerate(budgets):
                layers = spec["layers"]
                if arch in overrides:
                    layers = overrides[arch][bi]
                yield ds_name, arch, int(spec["budget"]), int(layers)


def run_suite(suite, datasets, jobs=1, progress=None, base_seed=0):
    """Execute the (dataset x architecture x budget) grid.

    datasets: {name: Dataset}. Returns an ordered list of entries, one per
    cell: {"dataset", "architecture", "budget", "layers", "status",
    "report"|"error"}. A failed cell is recorded and the suite continues.
    """
    model_base = dict(suite.get("model", {}))
    model_base.update(suite.get("train", {}))
    assess_opts = suite.get("assess", {})
    cfg = AssessConfig(
        k=assess_opts.get("k", 10),
        repeats=assess_opts.get("repeats", 3),
        n_seeds=assess_opts.get("seeds", 4),
        base_seed=assess_opts.get("base_seed", base_seed),
        metric=suite.get("metric", "acc"),
        jobs=jobs)
    entries = []
    for ds_name, arch, budget, layers in _suite_cells(suite, datasets):
        params = dict(model_base)
        params.update({"architecture": arch, "num_layers": layers,
                       "param_budget": budget})
        if progress:
            print(f"[suite] {ds_name} {arch} L={layers} budget={budget}",
                  file=progress, flush=True)
        entry = {"dataset": ds_name, "architecture": arch,
                 "budget": budget, "layers": layers}
        try:
            report = run_assessment(datasets[ds_name], params, cfg)
            entry["status"] = "ok"
            entry["report"] = report
        except Exception as exc:  # cell isolation: record and continue
            entry["status"] = "failed"
            entry["error"] = f"{type(exc).__name__}: {exc}"
        entries.append(entry)
    return entries


def _fmt_pm(mean, std):
    return f"{mean:.4f}±{std:.4f}"


def suite_csv(entries):
    """Comparison table mirroring the report columns: one row per cell."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["dataset", "model", "L", "params", "train", "val",
                     "test", "epochs", "status"])
    for e in entries:
        if e["status"] == "ok":
            r = e["report"]
            writer.writerow([
                e["dataset"], e["architecture"], e["layers"], r.param_count,
                _fmt_pm(*r.train), _fmt_pm(*r.valid), _fmt_pm(*r.test),
                _fmt_pm(*r.epochs), "ok"])
        else:
            writer.writerow([e["dataset"], e["architecture"], e["layers"],
                             "", "", "", "", "", f"failed: {e['error']}"])
    return buf.getvalue()


def report_dicts_csv(dicts):
    """The same comparison table built from serialized report dicts."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["dataset", "model", "L", "params", "train", "val",
                     "test", "epochs", "status"])
    for d in dicts:
        model = d.get("model", {})
        writer.writerow([
            d["dataset"], model.get("architecture", "?"),
            model.get("num_layers", "?"), d["param_count"],
            _fmt_pm(d["train"]["mean"], d["train"]["std"]),
            _fmt_pm(d["valid"]["mean"], d["valid"]["std"]),
            _fmt_pm(d["test"]["mean"], d["test"]["std"]),
            _fmt_pm(d["epochs"]["mean"], d["epochs"]["std"]), "ok"])
    return buf.getvalue()
