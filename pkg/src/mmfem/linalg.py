"""Sparse CSR storage, conjugate-gradient and dense LU solvers, and
power-iteration condition-number estimation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse


class SingularMatrixError(RuntimeError):
    pass


class IterationError(RuntimeError):
    pass


class CSRMatrix:
    """Square sparse matrix in compressed sparse row form.

    Thin wrapper over scipy's CSR storage: construction from triplets
    sums duplicates and sorts column indices, so identical input yields
    identical arrays.
    """

    def __init__(self, data):
        if not scipy.sparse.issparse(data):
            data = scipy.sparse.csr_matrix(np.asarray(data, dtype=float))
        m = data.tocsr().astype(float)
        m.sum_duplicates()
        m.sort_indices()
        self._m = m

    @classmethod
    def from_triplets(cls, n, rows, cols, vals):
        coo = scipy.sparse.coo_matrix(
            (np.asarray(vals, dtype=float), (rows, cols)), shape=(n, n)
        )
        return cls(coo.tocsr())

    @classmethod
    def identity(cls, n):
        return cls(scipy.sparse.identity(n, format="csr"))

    @property
    def shape(self):
        return self._m.shape

    @property
    def nnz(self):
        return self._m.nnz

    @property
    def indptr(self):
        return self._m.indptr

    @property
    def indices(self):
        return self._m.indices

    @property
    def data(self):
        return self._m.data

    def matvec(self, x):
        return self._m @ x

    def __matmul__(self, x):
        return self._m @ x

    def __add__(self, other):
        return CSRMatrix(self._m + other._m)

    def diagonal(self):
        return self._m.diagonal()

    def to_dense(self):
        return self._m.toarray()

    def to_coo(self):
        c = self._m.tocoo()
        return c.row, c.col, c.data

    def submatrix(self, idx):
        idx = np.asarray(idx, dtype=np.int64)
        return CSRMatrix(self._m[idx][:, idx].tocsr())

    def max_abs(self):
        return float(np.abs(self._m.data).max()) if self._m.nnz else 0.0

    def symmetry_defect(self):
        """max |A - A^T| entry."""
        d = self._m - self._m.T
        return float(np.abs(d.data).max()) if d.nnz else 0.0


def matvec(A, x):
    """y = A x with an explicit dimension check."""
    x = np.asarray(x, dtype=float)
    if x.shape != (A.shape[1],):
        raise ValueError(f"dimension mismatch: {A.shape} @ {x.shape}")
    return A.matvec(x)


@dataclass
class SolveReport:
    iterations: int
    relative_residual: float
    converged: bool


def cg_solve(A, b, preconditioner="jacobi", rtol=1e-12, maxit=None, x0=None,
             callback=None):
    """Preconditioned conjugate gradients for symmetric positive definite
    systems.

    Convergence is declared on the true residual ||b - Ax|| / ||b||; a
    non-converged result is reported in the returned :class:`SolveReport`,
    never silently accepted.
    """
    b = np.asarray(b, dtype=float)
    n = len(b)
    if A.shape != (n, n):
        raise ValueError(f"dimension mismatch: {A.shape} vs rhs {n}")
    if maxit is None:
        maxit = 20 * n + 100
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n), SolveReport(0, 0.0, True)

    if preconditioner in (None, "none"):
        minv = np.ones(n)
    elif preconditioner == "jacobi":
        d = A.diagonal().copy()
        if np.any(d <= 0.0):
            raise ValueError("jacobi preconditioner needs a positive diagonal")
        minv = 1.0 / d
    else:
        raise ValueError(f"unknown preconditioner {preconditioner!r}")

    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    r = b - A.matvec(x)
    z = minv * r
    p = z.copy()
    rz = float(r @ z)
    it = 0
    restarts = 0
    while it < maxit:
        if np.linalg.norm(r) <= rtol * bnorm:
            true_r = b - A.matvec(x)
            true_res = np.linalg.norm(true_r) / bnorm
            if true_res <= rtol or restarts >= 2:
                return x, SolveReport(it, true_res, true_res <= rtol)
            # recursive residual drifted from the true one: restart
            restarts += 1
            r = true_r
            z = minv * r
            p = z.copy()
            rz = float(r @ z)
        Ap = A.matvec(p)
        pAp = float(p @ Ap)
        if pAp <= 0.0:
            break  # direction lost to round-off (or A not SPD)
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        z = minv * r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
        it += 1
        if callback is not None:
            callback(x.copy())
    true_res = np.linalg.norm(b - A.matvec(x)) / bnorm
    return x, SolveReport(it, true_res, true_res <= rtol)


def dense_lu_solve(A_dense, b):
    """LU solve with partial pivoting; a pivot below 1e-14 max|A| is
    reported as singular."""
    A_dense = np.asarray(A_dense, dtype=float)
    b = np.asarray(b, dtype=float)
    lu, piv = scipy.linalg.lu_factor(A_dense)
    pivots = np.abs(np.diag(lu))
    scale = np.abs(A_dense).max()
    if scale == 0.0 or pivots.min() < 1e-14 * scale:
        raise SingularMatrixError(
            f"matrix numerically singular (min pivot {pivots.min():.3e}, "
            f"max entry {scale:.3e})"
        )
    return scipy.linalg.lu_solve((lu, piv), b)


def _power_iteration(op, rayleigh, n, rtol, maxit, seed, label):
    """Largest eigenvalue of ``rayleigh`` along the dominant direction of
    ``op``: iterate v <- op(v), track the Rayleigh quotient of the exact
    matrix so inexact (iteratively solved) operators stay harmless."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    lam = float(v @ rayleigh(v))
    for _ in range(maxit):
        w = op(v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        lam_new = float(v @ rayleigh(v))
        if abs(lam_new - lam) <= rtol * abs(lam_new):
            return lam_new
        lam = lam_new
    raise IterationError(f"{label} did not converge in {maxit} iterations")


def estimate_condition_number(A, active=None, rtol=1e-8, maxit=10000, seed=0,
                              inner_rtol=1e-9):
    """kappa = lambda_max / lambda_min of a symmetric positive definite
    matrix, restricted to the ``active`` index set (pinned and boundary
    identity rows are excluded by the caller).

    lambda_max by power iteration; lambda_min by inverse power iteration
    with an inner conjugate-gradient solve.  Both eigenvalues are read off
    as Rayleigh quotients of A itself.
    """
    if active is not None:
        A = A.submatrix(active)
    n = A.shape[0]
    lam_max = _power_iteration(A.matvec, A.matvec, n, rtol, maxit, seed,
                               "power iteration")

    def inv_op(v):
        x, rep = cg_solve(A, v, preconditioner="jacobi", rtol=inner_rtol,
                          maxit=400 * n + 1000)
        if not rep.converged:
            raise IterationError(
                f"inner CG of the inverse iteration stalled at relative "
                f"residual {rep.relative_residual:.3e}"
            )
        return x

    lam_min = _power_iteration(inv_op, A.matvec, n, rtol, maxit, seed + 1,
                               "inverse power iteration")
    if lam_min <= 0.0:
        raise IterationError("matrix is not positive definite on the subspace")
    return float(lam_max / lam_min)
