"""Sparse LDL^T factorization with inertia for symmetric KKT systems.

Up-looking factorization over the elimination tree with 1x1 pivots, which
is sound for the symmetric quasi-definite matrices produced by a
regularized interior-point KKT system.  The inertia of the matrix is read
off the signs of D, which is what the solver's inertia-correction loop
needs.  Row/column ordering is reverse Cuthill-McKee, computed once per
sparsity pattern; numeric refactorization reuses the symbolic analysis.

Kernels are compiled with numba when available and fall back to pure
Python otherwise (identical code path, just slower).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import reverse_cuthill_mckee

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(fn):
            return fn

        return wrap


@njit(cache=True)
def _etree_symbolic(n, Ap, Ai, parent, lnz, flag):
    """Elimination tree and column counts of L for upper-triangular A."""
    for k in range(n):
        parent[k] = -1
        flag[k] = k
        lnz[k] = 0
    for k in range(n):
        for p in range(Ap[k], Ap[k + 1]):
            i = Ai[p]
            while i < k and flag[i] != k:
                if parent[i] == -1:
                    parent[i] = k
                lnz[i] += 1
                flag[i] = k
                i = parent[i]


@njit(cache=True)
def _ldl_numeric(n, Ap, Ai, Ax, parent, Lp, Li, Lx, D, Y, pattern, flag, lnz):
    """Numeric LDL^T.  Returns the column of the first zero pivot, or -1."""
    for k in range(n):
        Y[k] = 0.0
        top = n
        flag[k] = k
        lnz[k] = 0
        for p in range(Ap[k], Ap[k + 1]):
            i = Ai[p]
            Y[i] += Ax[p]
            cnt = 0
            while flag[i] != k:
                pattern[cnt] = i
                cnt += 1
                flag[i] = k
                i = parent[i]
            # unwind the path onto a stack growing down from n; one buffer
            # suffices because path + stack never exceed n entries
            while cnt > 0:
                cnt -= 1
                top -= 1
                pattern[top] = pattern[cnt]
        D[k] = Y[k]
        Y[k] = 0.0
        for idx in range(top, n):
            i = pattern[idx]
            yi = Y[i]
            Y[i] = 0.0
            p_end = Lp[i] + lnz[i]
            for p in range(Lp[i], p_end):
                Y[Li[p]] -= Lx[p] * yi
            l_ki = yi / D[i]
            D[k] -= l_ki * yi
            Li[p_end] = k
            Lx[p_end] = l_ki
            lnz[i] += 1
        if D[k] == 0.0:
            return k
    return -1


@njit(cache=True)
def _ldl_solve(n, Lp, Li, Lx, lnz, D, b):
    for j in range(n):
        bj = b[j]
        for p in range(Lp[j], Lp[j] + lnz[j]):
            b[Li[p]] -= Lx[p] * bj
    for j in range(n):
        b[j] /= D[j]
    for j in range(n - 1, -1, -1):
        s = b[j]
        for p in range(Lp[j], Lp[j] + lnz[j]):
            s -= Lx[p] * b[Li[p]]
        b[j] = s


@dataclass
class FactorReport:
    """Outcome of one numeric factorization."""

    ok: bool
    zero_pivot_at: int
    inertia: tuple[int, int, int]

    @property
    def n_pos(self) -> int:
        return self.inertia[0]

    @property
    def n_neg(self) -> int:
        return self.inertia[1]


class SymmetricSolver:
    """LDL^T solver for a fixed-pattern symmetric matrix.

    factor() takes the full symmetric matrix in CSC form; the first call
    (or any call with a changed pattern) runs ordering and symbolic
    analysis, subsequent calls only redo numerics.  solve() applies the
    current factorization to one right-hand side.
    """

    def __init__(self):
        self._indptr = None
        self._indices = None
        self._n = 0
        self._ok = False

    def _analyze(self, K: sp.csc_matrix) -> None:
        n = K.shape[0]
        perm = reverse_cuthill_mckee(K.tocsr(), symmetric_mode=True)
        perm = np.asarray(perm, dtype=np.int64)
        inv = np.empty(n, dtype=np.int64)
        inv[perm] = np.arange(n, dtype=np.int64)

        coo = K.tocoo()
        ri = inv[coo.row]
        ci = inv[coo.col]
        keep = ri <= ci
        rows = ri[keep]
        cols = ci[keep]
        src = np.flatnonzero(keep)
        order = np.lexsort((rows, cols))
        rows, cols, src = rows[order], cols[order], src[order]

        indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(indptr, cols + 1, 1)
        np.cumsum(indptr, out=indptr)

        self._n = n
        self._perm = perm
        self._indptr = K.indptr.copy()
        self._indices = K.indices.copy()
        self._Ap = indptr
        self._Ai = rows.astype(np.int64)
        self._src = src

        parent = np.empty(n, dtype=np.int64)
        lnz = np.empty(n, dtype=np.int64)
        flag = np.empty(n, dtype=np.int64)
        _etree_symbolic(n, self._Ap, self._Ai, parent, lnz, flag)
        self._parent = parent
        Lp = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(lnz, out=Lp[1:])
        self._Lp = Lp
        self._Li = np.empty(int(Lp[n]), dtype=np.int64)
        self._Lx = np.empty(int(Lp[n]), dtype=np.float64)
        self._D = np.empty(n, dtype=np.float64)
        self._Y = np.zeros(n, dtype=np.float64)
        self._pattern = np.empty(n, dtype=np.int64)
        self._flag = np.empty(n, dtype=np.int64)
        self._lnz_work = np.empty(n, dtype=np.int64)

    def factor(self, K: sp.csc_matrix) -> FactorReport:
        if not sp.issparse(K) or K.format != "csc":
            K = sp.csc_matrix(K)
        if K.shape[0] != K.shape[1]:
            raise ValueError(f"matrix is {K.shape[0]}x{K.shape[1]}, not square")
        if not K.has_sorted_indices:
            K.sort_indices()
        if (
            self._indptr is None
            or len(K.indices) != len(self._indices)
            or not np.array_equal(K.indptr, self._indptr)
            or not np.array_equal(K.indices, self._indices)
        ):
            self._analyze(K)
        Ax = np.ascontiguousarray(K.data[self._src], dtype=np.float64)
        bad = _ldl_numeric(
            self._n, self._Ap, self._Ai, Ax,
            self._parent, self._Lp, self._Li, self._Lx, self._D,
            self._Y, self._pattern, self._flag, self._lnz_work,
        )
        self._ok = bad < 0
        if not self._ok:
            return FactorReport(False, int(bad), (0, 0, self._n))
        d = self._D
        inertia = (int(np.sum(d > 0.0)), int(np.sum(d < 0.0)), int(np.sum(d == 0.0)))
        return FactorReport(True, -1, inertia)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if not self._ok:
            raise RuntimeError("solve() before a successful factor()")
        y = np.ascontiguousarray(rhs[self._perm], dtype=np.float64)
        _ldl_solve(self._n, self._Lp, self._Li, self._Lx, self._lnz_work,
                   self._D, y)
        out = np.empty_like(y)
        out[self._perm] = y
        return out


def factor_and_solve(K: sp.spmatrix, rhs: np.ndarray) -> tuple[np.ndarray, FactorReport]:
    """One-shot convenience wrapper around SymmetricSolver."""
    solver = SymmetricSolver()
    rep = solver.factor(sp.csc_matrix(K))
    if not rep.ok:
        raise np.linalg.LinAlgError(f"zero pivot at column {rep.zero_pivot_at}")
    return solver.solve(np.asarray(rhs, dtype=float)), rep
