"""Hermite polynomial chaos in N Gaussian variables.

Basis functions are products of probabilists' Hermite polynomials,
ψ_i(ξ) = Π_d He_{i_d}(ξ_d) for a multi-index i, unnormalized so that
E[ψ_i²] = Π_d i_d!.  The module builds graded multi-index sets, the
triple-product expectations c_ijk = E[ψ_i ψ_j ψ_k] that couple the
stochastic blocks of the Galerkin system, and the dense coupling matrices
G_α with entries (G_α)_jk = c_αjk.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def _compositions(total: int, parts: int):
    """Yield tuples of `parts` non-negative ints summing to `total`,
    in lexicographic descending order."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


@dataclass(frozen=True)
class MultiIndexSet:
    """Graded set of N-tuples with total degree up to `degree`.

    Indices are ordered by total degree; ties within a degree are broken
    lexicographically descending.  Index 0 is always the zero tuple.
    """

    N: int
    degree: int
    indices: tuple

    def __len__(self) -> int:
        return len(self.indices)

    def __getitem__(self, k: int) -> tuple:
        return self.indices[k]

    def as_array(self) -> np.ndarray:
        """Indices stacked as an integer array of shape (count, N)."""
        return np.array(self.indices, dtype=np.int64)

    def total_degrees(self) -> np.ndarray:
        """Total degree of each index, shape (count,). Non-decreasing."""
        return self.as_array().sum(axis=1)

    def position(self, index: tuple) -> int:
        """Position of a multi-index in the ordering."""
        return self.indices.index(tuple(index))


def multi_index_set(N: int, P: int) -> MultiIndexSet:
    """All multi-indices of dimension N with total degree ≤ P.

    Cardinality is the binomial coefficient (N+P choose P).
    """
    if N < 1:
        raise ValueError("stochastic dimension N must be at least 1")
    if P < 0:
        raise ValueError("degree bound P must be non-negative")
    idx = []
    for s in range(P + 1):
        idx.extend(_compositions(s, N))
    out = MultiIndexSet(N, P, tuple(idx))
    assert len(out) == math.comb(N + P, P)
    return out


def hermite_eval_1d(n: int, x):
    """Probabilists' Hermite polynomial He_n evaluated at x (scalar or array).

    Three-term recurrence He_{n+1}(x) = x·He_n(x) − n·He_{n−1}(x),
    He_0 = 1, He_1 = x.
    """
    if n < 0:
        raise ValueError("degree must be non-negative")
    x = np.asarray(x, dtype=float)
    h_prev = np.ones_like(x)
    if n == 0:
        return h_prev if h_prev.ndim else float(h_prev)
    h = x.copy()
    for m in range(1, n):
        h, h_prev = x * h - m * h_prev, h
    return h if h.ndim else float(h)


def triple_product_1d(a: int, b: int, c: int) -> float:
    """E[He_a He_b He_c] under the standard Gaussian measure.

    Zero when a+b+c is odd or when the largest degree exceeds the sum of
    the other two; otherwise a!b!c! / ((s−a)!(s−b)!(s−c)!) with
    s = (a+b+c)/2.  Always non-negative.
    """
    if a < 0 or b < 0 or c < 0:
        raise ValueError("degrees must be non-negative")
    total = a + b + c
    if total % 2 == 1:
        return 0.0
    s = total // 2
    if s < a or s < b or s < c:  # triangle inequality
        return 0.0
    num = math.factorial(a) * math.factorial(b) * math.factorial(c)
    den = (math.factorial(s - a) * math.factorial(s - b)
           * math.factorial(s - c))
    return float(num // den) if num % den == 0 else num / den


@dataclass(frozen=True)
class CijkTensor:
    """Nonzero triple products c_ijk = E[ψ_i ψ_j ψ_k] in coordinate form.

    The i axis runs over `iset` (degree bound P′), j and k over `jkset`
    (degree bound P).  Coordinates are sorted by (i, j, k); `i_ptr` gives
    the slice of entries for each i, CSR-style.  Entries are symmetric in
    (j, k) and strictly nonzero.
    """

    iset: MultiIndexSet
    jkset: MultiIndexSet
    i: np.ndarray
    j: np.ndarray
    k: np.ndarray
    val: np.ndarray
    i_ptr: np.ndarray

    @property
    def nnz(self) -> int:
        return len(self.val)

    def slice_coords(self, alpha: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(j, k, value) arrays of the nonzeros of G_alpha."""
        if not 0 <= alpha < len(self.iset):
            raise IndexError(f"alpha {alpha} outside [0, {len(self.iset) - 1}]")
        lo, hi = self.i_ptr[alpha], self.i_ptr[alpha + 1]
        return self.j[lo:hi], self.k[lo:hi], self.val[lo:hi]


def _table_1d(max_i: int, max_jk: int) -> np.ndarray:
    """Dense table of triple_product_1d over a ≤ max_i, b,c ≤ max_jk."""
    T = np.zeros((max_i + 1, max_jk + 1, max_jk + 1))
    for a in range(max_i + 1):
        for b in range(max_jk + 1):
            for c in range(max_jk + 1):
                T[a, b, c] = triple_product_1d(a, b, c)
    return T


def build_c_tensor(N: int, P: int, Pprime: int) -> CijkTensor:
    """All nonzero c_ijk with i over the P′ index set, j,k over the P set.

    Each multivariate entry factorizes over dimensions:
    c_ijk = Π_d E[He_{i_d} He_{j_d} He_{k_d}].
    """
    if Pprime < P:
        raise ValueError("expansion degree P' must be at least P")
    iset = multi_index_set(N, Pprime)
    jkset = multi_index_set(N, P)
    T = _table_1d(Pprime, P)
    jk = jkset.as_array()  # (M+1, N)
    m1 = len(jkset)

    iis, jjs, kks, vals = [], [], [], []
    counts = np.zeros(len(iset), dtype=np.int64)
    for a, idx in enumerate(iset.indices):
        G = np.ones((m1, m1))
        for d in range(N):
            cols = jk[:, d]
            G *= T[idx[d]][np.ix_(cols, cols)]
        jj, kk = np.nonzero(G)  # row-major: sorted by (j, k)
        counts[a] = len(jj)
        iis.append(np.full(len(jj), a, dtype=np.int64))
        jjs.append(jj)
        kks.append(kk)
        vals.append(G[jj, kk])

    i_ptr = np.zeros(len(iset) + 1, dtype=np.int64)
    np.cumsum(counts, out=i_ptr[1:])
    return CijkTensor(iset, jkset,
                      np.concatenate(iis), np.concatenate(jjs),
                      np.concatenate(kks), np.concatenate(vals), i_ptr)


def g_matrix(alpha: int, tensor: CijkTensor) -> np.ndarray:
    """Dense coupling matrix G_α with entries c_αjk.  Symmetric; G_0 is
    diagonal with entries E[ψ_j²]."""
    m1 = len(tensor.jkset)
    jj, kk, vv = tensor.slice_coords(alpha)
    G = np.zeros((m1, m1))
    G[jj, kk] = vv
    return G


def write_c_tensor(path, tensor: CijkTensor) -> None:
    """Export the tensor as text lines "i j k value" (17 significant
    digits), sorted by (i, j, k), for cross-checking against other codes."""
    with open(path, "w") as fh:
        fh.write(f"% c_ijk tensor: N={tensor.iset.N} P={tensor.jkset.degree} "
                 f"Pprime={tensor.iset.degree} nnz={tensor.nnz}\n")
        for a, b, c, v in zip(tensor.i, tensor.j, tensor.k, tensor.val):
            fh.write(f"{a} {b} {c} {v:.16e}\n")
