"""Epoch loops and the plateau learning-rate schedule.

Multi-graph datasets train in shuffled minibatches of whole graphs; a
single graph trains full-batch with the loss masked to the training nodes.
After every epoch the validation loss drives a patience counter: once it
reaches lr_schedule_patience without an improvement, the learning rate is
halved and the counter resets. Training stops when the rate falls to
min_lr, the wall clock passes max_time (checked at epoch boundaries only),
or max_epochs is reached. By default the parameters with the best
validation loss are restored at the end; final_model keeps the last epoch.
"""

import json
import time
from dataclasses import dataclass, asdict

import numpy as np

from . import tensor as T
from .graph import batch_graphs
from .metrics import accuracy, roc_auc_multitask, weighted_accuracy
from .optim import AdamState
from .util import rng_from


@dataclass
class TrainConfig:
    max_epochs: int = 1000
    batch_size: int = 32
    init_lr: float = 1e-3
    lr_reduce_factor: float = 0.5
    lr_schedule_patience: int = 10
    min_lr: float = 1e-5
    max_time: float = 3600.0
    loss: str = "cross_entropy"
    balanced_loss: bool = False
    improvement_tol: float = 1e-7
    seed: int = 0

    def validate(self):
        if not 0.0 < self.lr_reduce_factor < 1.0:
            raise ValueError("lr_reduce_factor must be in (0, 1)")
        if self.min_lr >= self.init_lr:
            raise ValueError("min_lr must be below init_lr")
        if self.loss not in ("cross_entropy", "bce"):
            raise ValueError(f"unknown loss kind {self.loss!r}")
        return self


@dataclass
class EpochLog:
    epoch: int
    train_loss: float
    val_loss: float
    val_metric: float
    lr: float
    elapsed_s: float


def class_weights_for(labels, n_classes):
    """Inverse-frequency weights normalized so present classes average 1."""
    labels = np.asarray(labels)
    labels = labels[labels >= 0]
    counts = np.bincount(labels, minlength=n_classes).astype(np.float64)
    present = counts > 0
    w = np.zeros(n_classes)
    w[present] = labels.size / (present.sum() * counts[present])
    return w


def _masked_loss(logits, labels, node_idx, cfg, class_weights):
    """Loss over the labeled subset of node_idx; returns (loss, count)."""
    labels = np.asarray(labels)
    if cfg.loss == "bce":
        sel = T.gather_rows(logits, node_idx)
        return T.bce_with_logits(sel, labels[node_idx]), len(node_idx)
    keep = node_idx[labels[node_idx] >= 0]
    if keep.size == 0:
        raise ValueError("no labeled nodes to train on")
    sel = T.gather_rows(logits, keep)
    return T.cross_entropy(sel, labels[keep], class_weights), keep.size


def train_epoch_minibatch(model, graphs, train_idx, cfg, opt, rng,
                          class_weights=None):
    """One pass over the training graphs in shuffled whole-graph batches;
    returns the per-node mean loss."""
    train_idx = np.asarray(train_idx)
    if train_idx.size == 0:
        raise ValueError("empty training set")
    order = rng.permutation(train_idx)
    b = cfg.batch_size
    total, count = 0.0, 0
    for lo in range(0, order.size, b):
        batch = batch_graphs([graphs[i] for i in order[lo:lo + b]])
        logits = model.forward(batch, training=True)
        loss, m = _masked_loss(logits, batch.labels,
                               np.arange(batch.n), cfg, class_weights)
        model.zero_grad()
        loss.backward()
        opt.step()
        total += loss.item() * m
        count += m
    return total / count


def train_epoch_full(model, graph, train_idx, cfg, opt, class_weights=None):
    """One full-graph forward with the loss masked to training nodes."""
    train_idx = np.asarray(train_idx)
    if train_idx.size == 0:
        raise ValueError("empty training mask")
    logits = model.forward(graph, training=True)
    loss, _ = _masked_loss(logits, graph.labels, train_idx, cfg,
                           class_weights)
    model.zero_grad()
    loss.backward()
    opt.step()
    return loss.item()


def evaluate(model, data, idx, cfg, n_classes, metric="acc",
             class_weights=None):
    """(mean loss, metric) on an index set, eval mode, no recording.

    idx holds graph indices for multi-graph data, node indices otherwise.
    """
    idx = np.asarray(idx)
    prev_mode = model.training
    model.set_training(False)
    with T.no_grad():
        if isinstance(data, list):
            total, count = 0.0, 0
            labels, scores = [], []
            for lo in range(0, idx.size, cfg.batch_size):
                batch = batch_graphs([data[i] for i in idx[lo:lo + cfg.batch_size]])
                logits = model.forward(batch)
                loss, m = _masked_loss(logits, batch.labels,
                                       np.arange(batch.n), cfg, class_weights)
                total += loss.item() * m
                count += m
                scores.append(logits.data)
                labels.append(np.asarray(batch.labels))
            score_mat = np.concatenate(scores, axis=0)
            label_arr = np.concatenate(labels, axis=0)
            loss_val = total / count
        else:
            logits = model.forward(data)
            loss, _ = _masked_loss(logits, data.labels, idx, cfg,
                                   class_weights)
            loss_val = loss.item()
            score_mat = logits.data[idx]
            label_arr = np.asarray(data.labels)[idx]
    model.set_training(prev_mode)
    if metric == "auc":
        value = roc_auc_multitask(score_mat, label_arr)
    else:
        preds = score_mat.argmax(axis=1)
        if metric == "weighted_acc":
            value = weighted_accuracy(preds, label_arr, n_classes)
        else:
            value = accuracy(preds, label_arr)
    return loss_val, value


def fit(model, data, split, cfg, n_classes, metric="acc", log_path=None,
        final_model=False):
    """Train per the plateau schedule; returns (logs, best_epoch).

    The model ends at its best-validation-loss snapshot (epoch 0 counts:
    the initial parameters seed the baseline) unless final_model is set.
    """
    cfg.validate()
    multi = isinstance(data, list)
    class_weights = None
    if cfg.balanced_loss and cfg.loss == "cross_entropy":
        if multi:
            labs = np.concatenate([np.asarray(data[i].labels)
                                   for i in split.train])
        else:
            labs = np.asarray(data.labels)[split.train]
        class_weights = class_weights_for(labs, n_classes)
    opt = AdamState(model.parameters(), lr=cfg.init_lr)
    rng = rng_from(cfg.seed, 0xE90C)
    start = time.perf_counter()
    best_loss, _ = evaluate(model, data, split.valid, cfg, n_classes, metric,
                            class_weights)
    best_state = model.snapshot()
    best_epoch = 0
    patience = 0
    lr = cfg.init_lr
    logs = []
    log_fh = open(log_path, "w", encoding="utf-8") if log_path else None
    try:
        for epoch in range(1, cfg.max_epochs + 1):
            opt.lr = lr
            if multi:
                train_loss = train_epoch_minibatch(
                    model, data, split.train, cfg, opt, rng, class_weights)
            else:
                train_loss = train_epoch_full(
                    model, data, split.train, cfg, opt, class_weights)
            val_loss, val_metric = evaluate(
                model, data, split.valid, cfg, n_classes, metric,
                class_weights)
            if val_loss < best_loss - cfg.improvement_tol:
                best_loss = val_loss
                best_state = model.snapshot()
                best_epoch = epoch
                patience = 0
            else:
                patience += 1
                if patience >= cfg.lr_schedule_patience:
                    lr *= cfg.lr_reduce_factor
                    patience = 0
            entry = EpochLog(epoch, float(train_loss), float(val_loss),
                             float(val_metric), lr,
                             time.perf_counter() - start)
            logs.append(entry)
            if log_fh:
                log_fh.write(json.dumps(asdict(entry)) + "\n")
            if lr <= cfg.min_lr or entry.elapsed_s > cfg.max_time:
                break
    finally:
        if log_fh:
            log_fh.close()
    if not final_model:
        model.load_state_arrays(best_state)
    model.set_training(False)
    return logs, best_epoch
