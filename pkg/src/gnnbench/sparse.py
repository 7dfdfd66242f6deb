"""CSR sparse matrices used for adjacency and Laplacian operators.

Matrices are canonical: row_ptr monotone, column indices strictly increasing
within each row, no duplicates. They act as constants in differentiable
computations; gradients never flow into the stored values.
"""

import numpy as np
import scipy.sparse as _sp


class SparseMatrix:
    """Immutable CSR matrix of 64-bit floats."""

    __slots__ = ("rows", "cols", "row_ptr", "col_idx", "values", "_csr", "_csr_t")

    def __init__(self, rows, cols, row_ptr, col_idx, values, validate=True):
        self.rows = int(rows)
        self.cols = int(cols)
        self.row_ptr = np.asarray(row_ptr, dtype=np.int64)
        self.col_idx = np.asarray(col_idx, dtype=np.int64)
        self.values = np.asarray(values, dtype=np.float64)
        self._csr = None
        self._csr_t = None
        if validate:
            self._check_canonical()

    def _check_canonical(self):
        if self.row_ptr.shape != (self.rows + 1,):
            raise ValueError("row_ptr must have length rows+1")
        if self.row_ptr[0] != 0 or self.row_ptr[-1] != self.nnz:
            raise ValueError("row_ptr must start at 0 and end at nnz")
        if np.any(np.diff(self.row_ptr) < 0):
            raise ValueError("row_ptr must be monotone")
        if self.col_idx.shape != self.values.shape:
            raise ValueError("col_idx and values length mismatch")
        if self.nnz and (self.col_idx.min() < 0 or self.col_idx.max() >= self.cols):
            raise ValueError("column index out of range")
        for r in range(self.rows):
            lo, hi = self.row_ptr[r], self.row_ptr[r + 1]
            if hi - lo > 1 and np.any(np.diff(self.col_idx[lo:hi]) <= 0):
                raise ValueError(f"row {r} not strictly increasing (duplicates?)")

    @property
    def nnz(self):
        return int(self.col_idx.shape[0])

    @property
    def shape(self):
        return (self.rows, self.cols)

    @classmethod
    def from_coo(cls, rows, cols, src, dst, values=None, dedup="sum"):
        """Build canonical CSR from coordinate lists.

        Duplicate entries are merged; dedup="sum" adds their values,
        dedup="first" keeps one unit entry (used for unweighted graphs).
        """
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        if src.size and (src.min() < 0 or src.max() >= rows):
            raise ValueError("source index out of range")
        if dst.size and (dst.min() < 0 or dst.max() >= cols):
            raise ValueError("destination index out of range")
        if values is None:
            values = np.ones(src.shape[0], dtype=np.float64)
        else:
            values = np.asarray(values, dtype=np.float64)
        if src.size:
            # skip the sort when the input is already in CSR order with no
            # duplicates (batch concatenation hits this path)
            ordered = (np.diff(src) > 0) | ((np.diff(src) == 0)
                                            & (np.diff(dst) > 0))
            if not ordered.all():
                order = np.lexsort((dst, src))
                src, dst, values = src[order], dst[order], values[order]
                keep = np.concatenate(
                    [[True], (np.diff(src) != 0) | (np.diff(dst) != 0)])
                if not keep.all():
                    group = np.cumsum(keep) - 1
                    if dedup == "sum":
                        values = np.bincount(group, weights=values)
                    else:
                        values = values[keep]
                    src, dst = src[keep], dst[keep]
        row_ptr = np.zeros(rows + 1, dtype=np.int64)
        np.add.at(row_ptr, src + 1, 1)
        np.cumsum(row_ptr, out=row_ptr)
        return cls(rows, cols, row_ptr, dst, values, validate=False)

    @classmethod
    def identity(cls, n):
        idx = np.arange(n, dtype=np.int64)
        return cls(n, n, np.arange(n + 1, dtype=np.int64), idx,
                   np.ones(n, dtype=np.float64), validate=False)

    def coo(self):
        """Return (src, dst, values) in CSR enumeration order."""
        src = np.repeat(np.arange(self.rows, dtype=np.int64), np.diff(self.row_ptr))
        return src, self.col_idx, self.values

    def row_degrees(self):
        return np.diff(self.row_ptr)

    def to_dense(self):
        out = np.zeros((self.rows, self.cols), dtype=np.float64)
        src, dst, vals = self.coo()
        out[src, dst] = vals
        return out

    def transpose(self):
        src, dst, vals = self.coo()
        return SparseMatrix.from_coo(self.cols, self.rows, dst, src, vals)

    def scale(self, row_factors=None, col_factors=None):
        """Return D_r @ S @ D_c for diagonal scaling vectors."""
        src, dst, vals = self.coo()
        vals = vals.copy()
        if row_factors is not None:
            vals *= np.asarray(row_factors, dtype=np.float64)[src]
        if col_factors is not None:
            vals *= np.asarray(col_factors, dtype=np.float64)[dst]
        return SparseMatrix(self.rows, self.cols, self.row_ptr, self.col_idx,
                            vals, validate=False)

    def is_symmetric(self):
        if self.rows != self.cols:
            return False
        t = self.transpose()
        return (np.array_equal(self.row_ptr, t.row_ptr)
                and np.array_equal(self.col_idx, t.col_idx)
                and np.array_equal(self.values, t.values))

    def _scipy(self):
        if self._csr is None:
            self._csr = _sp.csr_matrix(
                (self.values, self.col_idx, self.row_ptr), shape=self.shape)
        return self._csr

    def _scipy_t(self):
        if self._csr_t is None:
            self._csr_t = self._scipy().T.tocsr()
        return self._csr_t

    def matmul_dense(self, dense):
        """S @ B for a dense (k, n) array; row sums run in ascending edge order."""
        dense = np.asarray(dense, dtype=np.float64)
        if dense.shape[0] != self.cols:
            raise ValueError(
                f"spmm shapes incompatible: {self.shape} x {dense.shape}")
        return np.asarray(self._scipy() @ dense)

    def matmul_dense_t(self, dense):
        """S.T @ B, used by the spmm backward rule."""
        return np.asarray(self._scipy_t() @ np.asarray(dense, dtype=np.float64))
