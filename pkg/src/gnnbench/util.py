"""Seed derivation and content hashing shared across the toolkit."""

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def mix64(*values: int) -> int:
    """Mix integers into one 64-bit seed (splitmix64 finalizer per value).

    Adding values never perturbs the result of shorter prefixes mixed with
    different labels, so (experiment_seed, fold, repeat) streams stay stable
    when folds or repeats are added elsewhere.
    """
    acc = 0x9E3779B97F4A7C15
    for v in values:
        acc = (acc + (int(v) & _MASK64) + 0x9E3779B97F4A7C15) & _MASK64
        z = acc
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        acc = z ^ (z >> 31)
    return acc


def rng_from(*values: int) -> np.random.Generator:
    """Deterministic generator keyed by the mixed values."""
    return np.random.default_rng(mix64(*values))


def sha256_arrays(*arrays) -> str:
    """Stable hex digest over array contents and shapes."""
    h = hashlib.sha256()
    for a in arrays:
        a = np.ascontiguousarray(a)
        h.update(str(a.dtype).encode())
        h.update(np.asarray(a.shape, dtype=np.int64).tobytes())
        h.update(a.tobytes())
    return h.hexdigest()


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()
