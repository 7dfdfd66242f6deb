"""Evaluation metrics. All are pure functions; unlabeled entries (label -1)
are excluded everywhere a mask applies."""

import numpy as np


def _apply_mask(preds, labels, mask):
    preds = np.asarray(preds)
    labels = np.asarray(labels)
    if mask is not None:
        mask = np.asarray(mask)
        preds, labels = preds[mask], labels[mask]
    keep = labels >= 0 if labels.ndim == 1 else np.ones(len(labels), bool)
    return preds[keep], labels[keep]


def accuracy(preds, labels, mask=None):
    preds, labels = _apply_mask(preds, labels, mask)
    if labels.size == 0:
        raise ValueError("no labeled items under the mask")
    return float((preds == labels).mean())


def weighted_accuracy(preds, labels, n_classes, mask=None):
    """Mean of per-class accuracies over the classes present (balanced
    accuracy), insensitive to class-size imbalance."""
    preds, labels = _apply_mask(preds, labels, mask)
    if labels.size == 0:
        raise ValueError("no labeled items under the mask")
    per_class = []
    for c in range(n_classes):
        sel = labels == c
        if sel.any():
            per_class.append(float((preds[sel] == c).mean()))
    return float(np.mean(per_class))


def roc_auc_multitask(scores, targets, mask=None):
    """Mean over tasks of P(random positive outscores random negative),
    ties counting one half. Tasks missing a class are skipped."""
    scores = np.asarray(scores, dtype=np.float64)
    targets = np.asarray(targets)
    if mask is not None:
        mask = np.asarray(mask)
        scores, targets = scores[mask], targets[mask]
    if scores.ndim == 1:
        scores, targets = scores[:, None], targets[:, None]
    aucs = []
    for t in range(scores.shape[1]):
        s, y = scores[:, t], targets[:, t]
        npos = int((y == 1).sum())
        nneg = int((y == 0).sum())
        if npos == 0 or nneg == 0:
            continue
        order = np.argsort(s, kind="stable")
        ranks = np.empty(len(s), dtype=np.float64)
        ranks[order] = np.arange(1, len(s) + 1)
        # average ranks within tied groups
        sorted_s = s[order]
        i = 0
        while i < len(s):
            j = i
            while j + 1 < len(s) and sorted_s[j + 1] == sorted_s[i]:
                j += 1
            if j > i:
                ranks[order[i:j + 1]] = 0.5 * (i + 1 + j + 1)
            i = j + 1
        rank_pos = ranks[y == 1].sum()
        aucs.append((rank_pos - npos * (npos + 1) / 2.0) / (npos * nneg))
    if not aucs:
        raise ValueError("no task has both classes present")
    return float(np.mean(aucs))
