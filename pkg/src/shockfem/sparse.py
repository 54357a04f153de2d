"""Block-sparse matrices: N x N patterns of dense m x m blocks in CSR layout."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp


class BlockSparseMatrix:
    """CSR-like storage of dense m x m blocks over a fixed node sparsity pattern."""

    def __init__(self, indptr, indices, data=None, m=4):
        self.indptr = np.asarray(indptr)
        self.indices = np.asarray(indices)
        self.m = m
        if data is None:
            data = np.zeros((len(self.indices), m, m))
        self.data = data

    @property
    def n(self):
        return len(self.indptr) - 1

    @property
    def nnz_blocks(self):
        return len(self.indices)

    def copy(self):
        return BlockSparseMatrix(self.indptr, self.indices, self.data.copy(), self.m)

    def pos(self, i, j):
        lo, hi = self.indptr[i], self.indptr[i + 1]
        k = lo + np.searchsorted(self.indices[lo:hi], j)
        if k >= hi or self.indices[k] != j:
            raise KeyError(f"block ({i}, {j}) outside sparsity pattern")
        return k

    def block(self, i, j):
        return self.data[self.pos(i, j)]

    def add_block(self, i, j, blk):
        self.data[self.pos(i, j)] += blk

    def row_blocks(self, i):
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return self.indices[lo:hi], self.data[lo:hi]

    def matvec(self, u):
        """u of shape (N, m) -> (N, m)."""
        return self.tobsr().dot(np.asarray(u).reshape(-1)).reshape(-1, self.m)

    def tobsr(self):
        return sp.bsr_matrix((self.data, self.indices, self.indptr),
                             shape=(self.n * self.m, self.n * self.m))

    def tocsr(self):
        return self.tobsr().tocsr()

    def toarray(self):
        return self.tobsr().toarray()
