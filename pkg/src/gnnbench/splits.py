"""Train/validation/test index splits: stratified k-fold and random holdout."""

import numpy as np


class Split:
    """Disjoint train/valid/test index sets (node or graph indices)."""

    def __init__(self, train, valid, test):
        self.train = np.asarray(train, dtype=np.int64)
        self.valid = np.asarray(valid, dtype=np.int64)
        self.test = np.asarray(test, dtype=np.int64)
        if min(self.train.size, self.valid.size, self.test.size) == 0:
            raise ValueError("every split part must be non-empty")
        merged = np.concatenate([self.train, self.valid, self.test])
        if np.unique(merged).size != merged.size:
            raise ValueError("split parts must be pairwise disjoint")

    def to_dict(self):
        return {"train": self.train.tolist(), "valid": self.valid.tolist(),
                "test": self.test.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(d["train"], d["valid"], d["test"])

    def __eq__(self, other):
        return (isinstance(other, Split)
                and np.array_equal(self.train, other.train)
                and np.array_equal(self.valid, other.valid)
                and np.array_equal(self.test, other.test))


def stratified_kfold(labels, k=10, ratio=(8, 1, 1), rng=None):
    """k stratified folds; fold i tests, fold (i+1) mod k validates, the
    rest trains (8:1:1 at k=10). Per-class fold counts differ by at most 1.

    Unlabeled items (label -1) are left out of every fold.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    if ratio[1] != 1 or ratio[2] != 1 or sum(ratio) != k:
        raise ValueError(f"ratio {ratio} inconsistent with k={k} "
                         "(expected (k-2, 1, 1))")
    labels = np.asarray(labels, dtype=np.int64)
    folds = [[] for _ in range(k)]
    for cls in np.unique(labels):
        if cls < 0:
            continue
        members = np.nonzero(labels == cls)[0]
        if members.size < k:
            raise ValueError(f"class {cls} has {members.size} members, "
                             f"fewer than k={k}")
        members = rng.permutation(members)
        for j, idx in enumerate(members):
            folds[j % k].append(int(idx))
    folds = [np.sort(np.asarray(f, dtype=np.int64)) for f in folds]
    splits = []
    for i in range(k):
        test = folds[i]
        valid = folds[(i + 1) % k]
        train = np.sort(np.concatenate(
            [folds[j] for j in range(k) if j != i and j != (i + 1) % k]))
        splits.append(Split(train, valid, test))
    return splits


def random_split(n_items, ratio, rng):
    """Disjoint cover of range(n_items) in the given proportions."""
    ratio = np.asarray(ratio, dtype=np.float64)
    if ratio.shape != (3,) or np.any(ratio < 1):
        raise ValueError("ratio must be three parts, each >= 1")
    total = ratio.sum()
    exact = n_items * ratio / total
    sizes = np.floor(exact).astype(np.int64)
    # largest remainders take the leftover items
    rem = exact - sizes
    for j in np.argsort(-rem)[: n_items - int(sizes.sum())]:
        sizes[j] += 1
    if np.any(sizes == 0):
        raise ValueError(f"{n_items} items cannot cover ratio {tuple(ratio)}")
    perm = rng.permutation(n_items)
    train = np.sort(perm[:sizes[0]])
    valid = np.sort(perm[sizes[0]:sizes[0] + sizes[1]])
    test = np.sort(perm[sizes[0] + sizes[1]:])
    return Split(train, valid, test)
