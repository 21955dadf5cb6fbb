"""Small linear-algebra layer shared by the structural, aerodynamic and solver code.

Sparse matrices are plain ``scipy.sparse`` CSR matrices. Dense correction
blocks (the aerodynamic Jacobian) are carried separately as
:class:`DenseBlock` objects so that the structural part can be factorized
on its own. Factorizations are LU with partial pivoting (SuperLU with the
pivot threshold pinned to 1, or LAPACK ``getrf`` for plain dense arrays).
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.linalg as sla
from scipy.sparse.linalg import splu

log = logging.getLogger(__name__)

PIVOT_RTOL = 1e-14
PIVOT_GROWTH_WARN = 1e8


class LinalgError(Exception):
    pass


class SingularMatrix(LinalgError):
    pass


class DimensionMismatch(LinalgError, ValueError):
    pass


@dataclass(frozen=True)
class DenseBlock:
    """Dense block placed at ``(row_offset, col_offset)`` of a host matrix."""

    row_offset: int
    col_offset: int
    data: np.ndarray

    @property
    def shape(self):
        return self.data.shape

    def check_fits(self, host_shape):
        r, c = self.data.shape
        if (self.row_offset < 0 or self.col_offset < 0
                or self.row_offset + r > host_shape[0]
                or self.col_offset + c > host_shape[1]):
            raise DimensionMismatch(
                f"block {self.data.shape} at ({self.row_offset}, {self.col_offset}) "
                f"does not fit host {host_shape}")

    def matvec(self, x: np.ndarray, out: np.ndarray) -> None:
        """Accumulate ``block @ x[cols]`` into ``out[rows]`` in place."""
        r, c = self.data.shape
        out[self.row_offset:self.row_offset + r] += (
            self.data @ x[self.col_offset:self.col_offset + c])


def assemble_sparse(rows, cols, vals, shape) -> sp.csr_matrix:
    """COO triplets to CSR; duplicates are summed in input order."""
    A = sp.coo_matrix((np.asarray(vals, dtype=float),
                       (np.asarray(rows), np.asarray(cols))), shape=shape).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def materialize(A) -> sp.csc_matrix:
    """Return ``A`` (dense, sparse, or sparse-plus-blocks) as one CSC matrix."""
    if hasattr(A, "materialize"):
        return A.materialize().tocsc()
    if sp.issparse(A):
        return A.tocsc()
    return sp.csc_matrix(np.asarray(A, dtype=float))


class Factorization:
    """LU factors of a square matrix, ``Pr A Pc = L U``."""

    def __init__(self, lu, n, pivot_growth, rcond_estimate):
        self._lu = lu
        self.n = n
        self.pivot_growth = pivot_growth
        self.rcond_estimate = rcond_estimate

    @property
    def perm_r(self):
        return self._lu.perm_r

    @property
    def perm_c(self):
        return self._lu.perm_c

    def solve(self, b: np.ndarray) -> np.ndarray:
        return solve(self, b)


class _DenseLU:
    """LAPACK LU factors exposing the bits of the SuperLU interface we use."""

    def __init__(self, lu, piv):
        self.lu_piv = (lu, piv)
        n = lu.shape[0]
        perm = np.arange(n)
        for i, p in enumerate(piv):
            perm[i], perm[p] = perm[p], perm[i]
        # perm_r[original row] = position after pivoting, as in SuperLU
        self.perm_r = np.empty(n, dtype=int)
        self.perm_r[perm] = np.arange(n)
        self.perm_c = np.arange(n)
        self.u_diag = np.diag(lu).copy()
        self.u_max = float(np.max(np.abs(np.triu(lu))))

    def solve(self, b):
        return sla.lu_solve(self.lu_piv, b, check_finite=False)


def _factorize_dense(M: np.ndarray) -> Factorization:
    n = M.shape[0]
    if not np.all(np.isfinite(M)):
        raise LinalgError("matrix has non-finite entries")
    row_max = np.abs(M).max(axis=1)
    if np.any(row_max == 0.0):
        raise SingularMatrix(f"zero row(s): {np.flatnonzero(row_max == 0.0)[:10].tolist()}")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)  # singularity is reported below
        lu = _DenseLU(*sla.lu_factor(M, check_finite=False))
    return _finish(lu, n, np.abs(lu.u_diag), row_max, lu.u_max)


def _finish(lu, n, piv, row_max, u_max) -> Factorization:
    scale = np.empty(n)
    scale[lu.perm_r] = row_max
    bad = piv < PIVOT_RTOL * scale
    if np.any(bad):
        raise SingularMatrix(
            f"pivot {piv[bad].min():.3e} below {PIVOT_RTOL:g} x row magnitude "
            f"at {int(np.count_nonzero(bad))} position(s)")
    growth = float(u_max / np.max(row_max))
    rcond = float(piv.min() / piv.max())
    if growth > PIVOT_GROWTH_WARN:
        log.warning("LU pivot growth %.3e, reciprocal condition estimate %.3e", growth, rcond)
    return Factorization(lu, n, growth, rcond)


def factorize(A) -> Factorization:
    """LU-factorize a square matrix.

    Raises :class:`SingularMatrix` when a pivot is smaller than
    ``1e-14`` times the largest magnitude in its (original) row.
    """
    if isinstance(A, np.ndarray):
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise DimensionMismatch(f"matrix must be square, got {A.shape}")
        return _factorize_dense(np.asarray(A, dtype=float))
    M = materialize(A)
    n, m = M.shape
    if n != m:
        raise DimensionMismatch(f"matrix must be square, got {M.shape}")
    if not np.all(np.isfinite(M.data)):
        raise LinalgError("matrix has non-finite entries")
    row_max = np.zeros(n)
    Mr = M.tocsr()
    np.maximum.at(row_max, np.repeat(np.arange(n), np.diff(Mr.indptr)), np.abs(Mr.data))
    if np.any(row_max == 0.0):
        raise SingularMatrix(f"zero row(s): {np.flatnonzero(row_max == 0.0)[:10].tolist()}")
    try:
        lu = splu(M, permc_spec="COLAMD", diag_pivot_thresh=1.0,
                  options={"SymmetricMode": False})
    except RuntimeError as exc:
        raise SingularMatrix(str(exc)) from exc

    U = lu.U
    return _finish(lu, n, np.abs(U.diagonal()), row_max, float(np.max(np.abs(U.data))))


def solve(F: Factorization, b: np.ndarray) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    if b.shape != (F.n,):
        raise DimensionMismatch(f"rhs shape {b.shape} does not match n={F.n}")
    return F._lu.solve(b)


def matvec(A, x: np.ndarray) -> np.ndarray:
    """``A @ x`` for dense, sparse, or sparse-plus-blocks ``A``."""
    x = np.asarray(x, dtype=float)
    shape = A.shape
    if x.shape != (shape[1],):
        raise DimensionMismatch(f"vector shape {x.shape} does not match matrix {shape}")
    if hasattr(A, "matvec"):
        return A.matvec(x)
    if sp.issparse(A):
        return A.tocsr() @ x
    return np.asarray(A, dtype=float) @ x
