"""Matrix-free stochastic Galerkin operator.

The global system matrix has (M+1)x(M+1) blocks K^{(j,k)} = Σ_i c_ijk K_i
of size N_dof.  It is never assembled for products: the truncated blockwise
product (tMAT-VEC) computes w_(j) = Σ_k Σ_{i∈set} c_ijk K_i v_(k), sharing
each K_i v_(k) product across row blocks.  Diagonal blocks K^{(j,j)} and
level blocks D_ℓ are assembled sparsely with the FULL coefficient sum
(truncation only ever applies to off-diagonal products inside
preconditioners) and factorized once.  A dense assembly of the whole
matrix is provided as a brute-force oracle for small instances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from sgfem.chaos import CijkTensor
from sgfem.linalg import Factorization, factorize


@dataclass(frozen=True)
class LevelMap:
    """Grouping of the M+1 stochastic blocks by total polynomial degree.

    Level ℓ covers global block indices [offsets[ℓ], offsets[ℓ+1]) and has
    sizes[ℓ] = C(N+ℓ−1, ℓ) blocks; offsets[P+1] = M+1.
    """

    N: int
    P: int
    sizes: tuple
    offsets: tuple

    def blocks(self, level: int) -> range:
        """Global block indices belonging to one level."""
        return range(self.offsets[level], self.offsets[level + 1])

    def up_to(self, level: int) -> range:
        """All block indices of degree ≤ level."""
        return range(self.offsets[level + 1])


def level_structure(N: int, P: int) -> LevelMap:
    """Level map for the graded index set of dimension N, degree P."""
    sizes = tuple(math.comb(N + l - 1, l) for l in range(P + 1))
    offsets = (0,) + tuple(np.cumsum(sizes).tolist())
    return LevelMap(N, P, sizes, offsets)


@dataclass(frozen=True)
class TruncationSet:
    """Retained coefficient indices for truncated off-diagonal products.

    Index 0 (the mean) is always a member, so any truncated preconditioner
    keeps at least mean-based strength.
    """

    indices: np.ndarray
    provenance: str

    def __post_init__(self):
        if len(self.indices) == 0 or self.indices[0] != 0:
            raise ValueError("truncation set must contain index 0")
        if np.any(np.diff(self.indices) <= 0):
            raise ValueError("truncation indices must be sorted, unique")

    def __len__(self) -> int:
        return len(self.indices)

    def key(self) -> tuple:
        return tuple(int(i) for i in self.indices)


def standard_truncation(N: int, lt: int) -> TruncationSet:
    """Degree-based truncation: all indices of total degree ≤ ℓ_t.

    In the graded ordering these are exactly the first (N+ℓ_t choose ℓ_t)
    indices.
    """
    if lt < 0:
        raise ValueError("truncation degree must be non-negative")
    count = math.comb(N + lt, lt)
    return TruncationSet(np.arange(count, dtype=np.int64), f"standard:lt={lt}")


def adaptive_truncation(tau: float, k_norms: np.ndarray,
                        tensor: CijkTensor) -> TruncationSet:
    """Norm-based truncation: keep i when max_jk(c_ijk)·‖K_i‖ ≥ τ.

    Index 0 is kept unconditionally.
    """
    if tau < 0:
        raise ValueError("threshold must be non-negative")
    k_norms = np.asarray(k_norms, dtype=float)
    if len(k_norms) != len(tensor.iset):
        raise ValueError("one norm per coefficient matrix required")
    cmax = np.zeros(len(tensor.iset))
    np.maximum.at(cmax, tensor.i, tensor.val)
    keep = np.flatnonzero(cmax * k_norms >= tau)
    if len(keep) == 0 or keep[0] != 0:
        keep = np.concatenate([[0], keep]).astype(np.int64)
    return TruncationSet(np.asarray(keep, dtype=np.int64), f"adaptive:tau={tau}")


def full_truncation(tensor: CijkTensor) -> TruncationSet:
    """No truncation: every coefficient matrix retained."""
    return TruncationSet(np.arange(len(tensor.iset), dtype=np.int64), "full")


class GalerkinOperator:
    """Blockwise operator built from shared-pattern stiffness matrices.

    ``k_mats[i]`` is the stiffness matrix of the i-th chaos coefficient of
    the diffusion field; all must share one CSR sparsity pattern.  Product
    and summation counters accumulate across applications: ``summations``
    counts the c_ijk terms added (the cost measure of the truncated
    product), ``products`` the sparse matrix-vector products actually run
    after caching K_i v_(k) across row blocks.
    """

    def __init__(self, tensor: CijkTensor, k_mats):
        if len(k_mats) != len(tensor.iset):
            raise ValueError("need one stiffness matrix per tensor index i")
        first = k_mats[0]
        for K in k_mats[1:]:
            if K.shape != first.shape:
                raise ValueError("stiffness matrices must share one shape")
        self.tensor = tensor
        self.k_mats = list(k_mats)
        self.levels = level_structure(tensor.jkset.N, tensor.jkset.degree)
        self.n_dof = first.shape[0]
        self.M = len(tensor.jkset) - 1
        self.Mprime = len(tensor.iset) - 1
        self.counters = {"summations": 0, "products": 0}
        # stacked data arrays enable blockwise sums as single mat-vecs
        self._kdata = np.vstack([K.data for K in k_mats])
        self._plan_cache: dict = {}
        self._pair_cache: dict | None = None
        self._diag_cache: dict = {}
        self._level_cache: dict = {}

    @property
    def n_global(self) -> int:
        return (self.M + 1) * self.n_dof

    def reset_counters(self) -> None:
        self.counters = {"summations": 0, "products": 0}

    # -- truncated blockwise product ------------------------------------

    def _plan(self, row_blocks: tuple, col_blocks: tuple, trunc_key: tuple):
        """Per-i dense coupling slices restricted to the requested blocks,
        with unused columns dropped."""
        key = (row_blocks, col_blocks, trunc_key)
        plan = self._plan_cache.get(key)
        if plan is not None:
            return plan
        pos_r = np.full(self.M + 1, -1, dtype=np.int64)
        pos_r[list(row_blocks)] = np.arange(len(row_blocks))
        pos_c = np.full(self.M + 1, -1, dtype=np.int64)
        pos_c[list(col_blocks)] = np.arange(len(col_blocks))
        plan = []
        for i in trunc_key:
            jj, kk, vv = self.tensor.slice_coords(i)
            m = (pos_r[jj] >= 0) & (pos_c[kk] >= 0)
            if not m.any():
                continue
            rr, cc = pos_r[jj[m]], pos_c[kk[m]]
            cols_used = np.unique(cc)
            g = np.zeros((len(row_blocks), len(cols_used)))
            g[rr, np.searchsorted(cols_used, cc)] = vv[m]
            plan.append((i, cols_used, g, int(m.sum())))
        self._plan_cache[key] = plan
        return plan

    def tmatvec(self, row_blocks, col_blocks, trunc: TruncationSet,
                v: np.ndarray) -> np.ndarray:
        """w_(j) = Σ_{k∈col_blocks} Σ_{i∈trunc} c_ijk K_i v_(k).

        ``v`` holds the column blocks: shape (len(col_blocks), n_dof) or
        flat; the result follows the input layout over row_blocks.  Each
        needed product K_i v_(k) is computed once and shared.
        """
        row_blocks = tuple(int(b) for b in row_blocks)
        col_blocks = tuple(int(b) for b in col_blocks)
        flat = v.ndim == 1
        V = v.reshape(len(col_blocks), self.n_dof)
        W = np.zeros((len(row_blocks), self.n_dof))
        for i, cols_used, g, n_terms in self._plan(row_blocks, col_blocks,
                                                   trunc.key()):
            U = (self.k_mats[i] @ V[cols_used].T).T
            W += g @ U
            self.counters["products"] += len(cols_used)
            self.counters["summations"] += n_terms
        return W.ravel() if flat else W

    def matvec(self, v: np.ndarray) -> np.ndarray:
        """Full product A v over all blocks with the complete tensor."""
        blocks = range(self.M + 1)
        return self.tmatvec(blocks, blocks, full_truncation(self.tensor), v)

    # -- assembled blocks -------------------------------------------------

    def _pairs(self) -> dict:
        """Tensor reorganized per (j,k) block: (i indices, values)."""
        if self._pair_cache is None:
            t = self.tensor
            order = np.lexsort((t.i, t.k, t.j))
            jj, kk = t.j[order], t.k[order]
            ii, vv = t.i[order], t.val[order]
            starts = np.flatnonzero(np.diff(jj * (self.M + 1) + kk)) + 1
            bounds = np.concatenate([[0], starts, [len(jj)]])
            self._pair_cache = {
                (int(jj[lo]), int(kk[lo])): (ii[lo:hi], vv[lo:hi])
                for lo, hi in zip(bounds[:-1], bounds[1:])
            }
        return self._pair_cache

    def block(self, j: int, k: int) -> sp.csr_matrix | None:
        """Assembled block K^{(j,k)} with the full sum, or None if zero."""
        entry = self._pairs().get((j, k))
        if entry is None:
            return None
        ii, vv = entry
        data = vv @ self._kdata[ii]
        ref = self.k_mats[0]
        return sp.csr_matrix((data, ref.indices, ref.indptr),
                             shape=(self.n_dof, self.n_dof))

    def assemble_diag_block(self, j: int) -> tuple[sp.csr_matrix, Factorization]:
        """K^{(j,j)} = Σ_i c_ijj K_i (never truncated), factorized, cached."""
        if j not in self._diag_cache:
            K = self.block(j, j)
            if K is None:
                raise ValueError(f"diagonal block {j} is empty")
            self._diag_cache[j] = (K, factorize(K))
        return self._diag_cache[j]

    def assemble_level_block(self, level: int
                             ) -> tuple[sp.csr_matrix, Factorization]:
        """Full level matrix D_ℓ spanning the level's blocks, factorized."""
        if level not in self._level_cache:
            blocks = list(self.levels.blocks(level))
            grid = [[self.block(j, k) for k in blocks] for j in blocks]
            D = sp.bmat(grid, format="csr")
            self._level_cache[level] = (D, factorize(D))
        return self._level_cache[level]

    def assemble_global_dense(self, cap: int = 5000) -> np.ndarray:
        """Explicit global matrix for brute-force verification only."""
        n = self.n_global
        if n > cap:
            raise ValueError(f"global dimension {n} exceeds the dense "
                             f"assembly cap {cap}")
        nd = self.n_dof
        A = np.zeros((n, n))
        for (j, k) in self._pairs():
            A[j * nd:(j + 1) * nd, k * nd:(k + 1) * nd] = \
                self.block(j, k).toarray()
        return A


def tmatvec(op: GalerkinOperator, row_blocks, col_blocks,
            trunc: TruncationSet, v: np.ndarray) -> np.ndarray:
    """Module-level alias of :meth:`GalerkinOperator.tmatvec`."""
    return op.tmatvec(row_blocks, col_blocks, trunc, v)
