"""Sparse block composition and direct LU solves.

Matrices are ``scipy.sparse.csr_matrix`` in canonical form (sorted column
indices, no duplicates).  Factorizations wrap SuperLU.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import FactorizationError, InvalidArgumentError

FIELDS = ("u", "xi", "phi", "psi")


def as_csr(A):
    A = sp.csr_matrix(A, dtype=float)
    A.sum_duplicates()
    A.sort_indices()
    return A


@dataclass(frozen=True, eq=False)
class BlockSystem:
    blocks: tuple  # rows of optional csr blocks
    sizes: tuple
    offsets: np.ndarray  # len(sizes) + 1
    matrix: sp.csr_matrix
    labels: tuple = FIELDS

    def block(self, i, j):
        return self.blocks[i][j]

    def split(self, x):
        return [x[self.offsets[k]:self.offsets[k + 1]] for k in range(len(self.sizes))]

    def join(self, parts):
        return np.concatenate([np.asarray(p, dtype=float) for p in parts])


def block_compose(blocks, sizes=None, labels=None) -> BlockSystem:
    """Place a square grid of optional blocks into one CSR matrix.

    Block sizes are inferred from present blocks; pass ``sizes`` for rows
    or columns that are entirely empty.
    """
    nb = len(blocks)
    if any(len(row) != nb for row in blocks):
        raise InvalidArgumentError("block grid must be square")
    rows = [None] * nb
    cols = [None] * nb
    for i, row in enumerate(blocks):
        for j, B in enumerate(row):
            if B is None:
                continue
            r, c = B.shape
            if rows[i] not in (None, r) or cols[j] not in (None, c):
                raise InvalidArgumentError(f"block ({i}, {j}) has inconsistent shape {B.shape}")
            rows[i], cols[j] = r, c
    if sizes is None:
        sizes = [rows[k] if rows[k] is not None else cols[k] for k in range(nb)]
    sizes = list(sizes)
    for k in range(nb):
        if sizes[k] is None:
            raise InvalidArgumentError(f"cannot infer size of block row/column {k}")
        if (rows[k] not in (None, sizes[k])) or (cols[k] not in (None, sizes[k])):
            raise InvalidArgumentError(f"block row/column {k} does not match size {sizes[k]}")
    grid = [[None if B is None else as_csr(B) for B in row] for row in blocks]
    filled = [[grid[i][j] if grid[i][j] is not None else
               (sp.csr_matrix((sizes[i], sizes[j])) if i == j else None)
               for j in range(nb)] for i in range(nb)]
    M = as_csr(sp.bmat(filled, format="csr"))
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    if labels is None:
        labels = FIELDS if nb == 4 else tuple(str(k) for k in range(nb))
    return BlockSystem(tuple(tuple(r) for r in grid), tuple(sizes), offsets, M, tuple(labels))


class Factorization:
    """Reusable sparse LU factors of one square matrix."""

    def __init__(self, matrix, lu):
        self.matrix = matrix
        self._lu = lu
        self.shape = matrix.shape

    def solve(self, b):
        return solve(self, b)


def factorize(A) -> Factorization:
    A = sp.csc_matrix(A, dtype=float)
    if A.shape[0] != A.shape[1]:
        raise InvalidArgumentError(f"cannot factorize non-square matrix of shape {A.shape}")
    empty = np.flatnonzero(np.diff(sp.csr_matrix(A).indptr) == 0)
    if len(empty):
        raise FactorizationError("matrix is structurally singular (empty rows)",
                                 pivot_info={"empty_rows": empty[:20].tolist()})
    try:
        lu = spla.splu(A, permc_spec="COLAMD")
    except RuntimeError as exc:
        raise FactorizationError(f"LU factorization failed: {exc}") from exc
    d = np.abs(lu.U.diagonal())
    scale = max(abs(A).max(), 1e-300)
    if not np.all(np.isfinite(d)) or d.min() <= 1e-20 * scale:
        k = int(np.argmin(d))
        raise FactorizationError(
            "matrix is numerically singular",
            pivot_info={"position": k, "pivot": float(d[k]), "max_entry": float(scale)},
        )
    return Factorization(sp.csr_matrix(A), lu)


def solve(F: Factorization, b):
    b = np.asarray(b, dtype=float)
    if b.shape[0] != F.shape[0]:
        raise InvalidArgumentError(f"rhs has {b.shape[0]} rows, matrix has {F.shape[0]}")
    return F._lu.solve(b)


def relative_residual(A, x, b):
    nb = np.linalg.norm(b)
    r = np.linalg.norm(A @ x - b)
    return r / nb if nb > 0 else r
