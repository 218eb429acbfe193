"""Dense/sparse linear algebra kernels shared by the rest of the package.

Dense matrices are C-ordered ``numpy.ndarray``s and sparse matrices are
``scipy.sparse.csr_matrix`` in canonical form (sorted, deduplicated column
indices per row).  The heavy lifting (factorizations, eigensolves) is
delegated to LAPACK/SuperLU through numpy/scipy; this module pins down the
conventions the solver relies on: deterministic results for identical
inputs, descending eigenvalue order with a fixed eigenvector sign, and
residual guarantees on the factorization round trip.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Union

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import splu

Matrix = Union[np.ndarray, sp.csr_matrix]


class NotSymmetricError(ValueError):
    """Raised when an operation requires a symmetric matrix."""


class FactorizationError(ValueError):
    """Raised on a non-positive Cholesky pivot or a singular LU pivot."""


def as_csr(A) -> sp.csr_matrix:
    """Return ``A`` as a canonical CSR matrix (sorted indices, no duplicates)."""
    B = sp.csr_matrix(A)
    B.sum_duplicates()
    B.sort_indices()
    return B


def spmv(A: sp.csr_matrix, x: np.ndarray) -> np.ndarray:
    """Sparse matrix-vector product ``A @ x``.

    Summation within each row runs left to right over the stored column
    indices, so repeated calls are bitwise reproducible.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != A.shape[1]:
        raise ValueError(f"dimension mismatch: matrix has {A.shape[1]} columns, "
                         f"vector has length {x.shape[-1]}")
    return A @ x


@dataclass
class Factorization:
    """Cached factorization of a square matrix.

    ``kind`` is ``"cholesky"`` (dense SPD), ``"lu"`` (dense, partial
    pivoting) or ``"splu"`` (sparse LU).  ``solve`` reproduces ``A^{-1} b``
    with relative residual below 1e-12 for well-conditioned matrices.
    """

    kind: str
    n: int
    _state: tuple = field(repr=False)

    def solve(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        if self.kind == "cholesky":
            return sla.cho_solve(self._state, b)
        if self.kind == "lu":
            lu, piv = self._state
            return sla.lu_solve((lu, piv), b)
        return self._state[0].solve(b)


def _is_symmetric(A: np.ndarray, tol: float = 1e-12) -> bool:
    scale = max(np.abs(A).max(), 1.0)
    return np.abs(A - A.T).max() <= tol * scale


def factorize(A: Matrix, kind: str = "auto") -> Factorization:
    """Factorize a square matrix for repeated solves.

    ``kind="cholesky"`` demands a symmetric positive definite matrix and
    raises :class:`FactorizationError` on a non-positive pivot.
    ``kind="lu"`` uses partial pivoting and raises on a pivot that is
    singular to tolerance.  ``kind="auto"`` tries Cholesky when symmetry is
    detected and silently falls back to LU.
    """
    if sp.issparse(A):
        A = sp.csc_matrix(A)
        if A.shape[0] != A.shape[1]:
            raise ValueError("matrix must be square")
        try:
            f = splu(A)
        except RuntimeError as exc:  # SuperLU signals exact singularity
            raise FactorizationError(str(exc)) from exc
        diag_u = f.U.diagonal()
        if np.min(np.abs(diag_u)) <= 1e-14 * max(np.max(np.abs(diag_u)), 1.0):
            raise FactorizationError("matrix is singular to tolerance")
        return Factorization("splu", A.shape[0], (f,))

    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    if kind == "cholesky" or (kind == "auto" and _is_symmetric(A)):
        try:
            c, low = sla.cho_factor(A, lower=True)
            return Factorization("cholesky", A.shape[0], (c, low))
        except sla.LinAlgError as exc:
            if kind == "cholesky":
                raise FactorizationError(f"non-positive pivot: {exc}") from exc
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(A)
    diag = np.abs(np.diag(lu))
    if diag.min() <= 1e-14 * max(diag.max(), 1.0):
        raise FactorizationError("matrix is singular to tolerance")
    return Factorization("lu", A.shape[0], (lu, piv))


def solve(F: Factorization, b: np.ndarray) -> np.ndarray:
    """Solve ``A x = b`` using a previously computed factorization."""
    return F.solve(b)


def sym_eig(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Full symmetric eigendecomposition with deterministic conventions.

    Returns ``(values, vectors)`` with eigenvalues sorted descending and
    eigenvectors in the corresponding columns.  Each eigenvector is scaled
    so that its entry of largest magnitude (first such entry on ties) is
    positive, which makes the output reproducible and comparable across
    runs.  Raises :class:`NotSymmetricError` for inputs that are not
    symmetric within 1e-12 relative.
    """
    A = np.asarray(A, dtype=float)
    if not _is_symmetric(A):
        raise NotSymmetricError("matrix is not symmetric within tolerance")
    vals, vecs = np.linalg.eigh(A)
    order = np.argsort(vals)[::-1]
    vals = vals[order]
    vecs = vecs[:, order]
    for j in range(vecs.shape[1]):
        col = vecs[:, j]
        pivot = np.argmax(np.abs(col))
        if col[pivot] < 0:
            vecs[:, j] = -col
    return vals, vecs


# ---------------------------------------------------------------------------
# Matrix Market exchange format (coordinate, real, general/symmetric).
#
# Values are printed with 17 significant decimal digits, which round-trips
# IEEE binary64 exactly, so write -> read reproduces the stored values bit
# for bit.
# ---------------------------------------------------------------------------

def write_matrix_market(path, A: Matrix, symmetry: str = "general") -> None:
    """Write a matrix in Matrix Market coordinate format.

    ``symmetry`` is ``"general"`` or ``"symmetric"``; the symmetric form
    stores the lower triangle only.  Dense inputs are written through their
    sparse pattern (explicitly stored zeros of a CSR input are kept).
    """
    if symmetry not in ("general", "symmetric"):
        raise ValueError(f"unsupported symmetry: {symmetry}")
    A = as_csr(A)
    coo = A.tocoo()
    rows, cols, vals = coo.row, coo.col, coo.data
    if symmetry == "symmetric":
        keep = rows >= cols
        rows, cols, vals = rows[keep], cols[keep], vals[keep]
    with open(path, "w") as fh:
        fh.write(f"%%MatrixMarket matrix coordinate real {symmetry}\n")
        fh.write(f"{A.shape[0]} {A.shape[1]} {len(vals)}\n")
        for r, c, v in zip(rows, cols, vals):
            fh.write(f"{r + 1} {c + 1} {v:.16e}\n")


def read_matrix_market(path) -> sp.csr_matrix:
    """Read a real coordinate Matrix Market file written by this package."""
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 5 or header[0] != "%%MatrixMarket" or \
                header[1:4] != ["matrix", "coordinate", "real"]:
            raise ValueError(f"unsupported Matrix Market header in {path}")
        symmetry = header[4]
        if symmetry not in ("general", "symmetric"):
            raise ValueError(f"unsupported symmetry: {symmetry}")
        line = fh.readline()
        while line.startswith("%"):
            line = fh.readline()
        nrows, ncols, nnz = (int(t) for t in line.split())
        rows = np.empty(nnz, dtype=np.int64)
        cols = np.empty(nnz, dtype=np.int64)
        vals = np.empty(nnz, dtype=float)
        for k in range(nnz):
            r, c, v = fh.readline().split()
            rows[k], cols[k], vals[k] = int(r) - 1, int(c) - 1, float(v)
    if symmetry == "symmetric":
        off = rows != cols
        mirror_r, mirror_c = cols[off], rows[off]
        rows = np.concatenate([rows, mirror_r])
        cols = np.concatenate([cols, mirror_c])
        vals = np.concatenate([vals, vals[off]])
    return as_csr(sp.coo_matrix((vals, (rows, cols)), shape=(nrows, ncols)))
