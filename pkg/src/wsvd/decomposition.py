"""Weighted singular value decomposition and the solutions built on it.

For an SPD weight matrix M, the factorization is A = U S V^T M with
U^T U = I (columns 2-orthonormal), V^T M V = I (columns M-orthonormal),
and S holding the positive weighted singular values in nonincreasing order.
It is computed by a Cholesky transform: with M = L^T L, the standard SVD
of A L^{-1} = Uh S Vh^T gives U = Uh and V = L^{-1} Vh.
"""

from dataclasses import dataclass

import numpy as np

from .weights import WeightMatrix


@dataclass(frozen=True)
class WsvdFactorization:
    """Weighted SVD of a matrix.

    u and v keep every computed column (min(m, n) in economy form, m and n
    columns when full); sigma keeps only the rank-many values above the rank
    tolerance max(m, n) * eps * sigma_1.
    """

    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray
    rank: int
    weight: WeightMatrix

    @property
    def null_space(self):
        """Columns of v beyond the rank; an M-orthonormal null-space basis
        of A when the factorization was computed with full_matrices."""
        return self.v[:, self.rank:]


def _checked_matrix(a, weight):
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    if a.shape[0] == 0 or a.shape[1] == 0:
        raise ValueError("matrix must have at least one row and one column")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix entries must be finite")
    if a.shape[1] != weight.n:
        raise ValueError(
            f"matrix has {a.shape[1]} columns, weight matrix is {weight.n}x{weight.n}"
        )
    return a


def _transform(a, weight):
    # B = A L^{-1}, via L^T B^T = A^T
    return weight.solve_factor(a.T, transpose=True).T


def _fix_signs(u, v, coupled):
    """Make each u column's first nonzero entry positive; the first `coupled`
    v columns flip together with their u partner, later v columns (null-space
    vectors in full form) are normalized by their own first nonzero entry."""
    for j in range(u.shape[1]):
        col = u[:, j]
        nz = np.flatnonzero(col)
        if nz.size and col[nz[0]] < 0:
            u[:, j] = -col
            if j < coupled:
                v[:, j] = -v[:, j]
    for j in range(coupled, v.shape[1]):
        col = v[:, j]
        nz = np.flatnonzero(col)
        if nz.size and col[nz[0]] < 0:
            v[:, j] = -col
    return u, v


def wsvd(a, weight, full_matrices=False):
    """Weighted SVD of a, A = U S V^T M.

    Parameters
    ----------
    a : (m, n) array
    weight : WeightMatrix of size n
    full_matrices : bool
        When set, u is m x m and v is n x n (v then carries a complete
        M-orthonormal basis including the null space of A).

    Returns
    -------
    WsvdFactorization
    """
    a = _checked_matrix(a, weight)
    m, n = a.shape
    b = _transform(a, weight)
    uh, s, vht = np.linalg.svd(b, full_matrices=full_matrices)
    v = weight.solve_factor(vht.T)
    q = min(m, n)
    u, v = _fix_signs(uh, v, coupled=q)
    tol = max(m, n) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    rank = int(np.count_nonzero(s > tol))
    return WsvdFactorization(u=u, sigma=s[:rank].copy(), v=v, rank=rank, weight=weight)


def weighted_operator_norm(a, weight):
    """||A||_{M,2} = max ||A x||_2 / ||x||_M, the largest weighted singular
    value; 0 for the zero matrix."""
    a = _checked_matrix(a, weight)
    s = np.linalg.svd(_transform(a, weight), compute_uv=False)
    return float(s[0]) if s.size else 0.0


def low_rank_approx(fact, k):
    """Best rank-k approximation A_k = sum_{i<=k} sigma_i u_i v_i^T M.

    Requires 1 <= k < rank.
    """
    if not 1 <= k < fact.rank:
        raise ValueError(f"k must satisfy 1 <= k < rank ({fact.rank}), got {k}")
    mv = fact.weight.matvec(fact.v[:, :k])
    return (fact.u[:, :k] * fact.sigma[:k]) @ mv.T


def _coefficients(fact, b):
    b = np.asarray(b, dtype=float)
    if b.ndim != 1 or b.shape[0] != fact.u.shape[0]:
        raise ValueError(
            f"right-hand side has shape {b.shape}, expected ({fact.u.shape[0]},)"
        )
    r = fact.rank
    return fact.u[:, :r].T @ b


def min_m_norm_ls(fact, b):
    """Minimum-M-norm least squares solution sum_i (u_i^T b / sigma_i) v_i."""
    r = fact.rank
    coef = _coefficients(fact, b) / fact.sigma
    return fact.v[:, :r] @ coef


def twsvd_solution(fact, b, k):
    """Truncated solution keeping the first k spectral terms; 1 <= k <= rank."""
    if not 1 <= k <= fact.rank:
        raise ValueError(f"k must satisfy 1 <= k <= rank ({fact.rank}), got {k}")
    coef = (fact.u[:, :k].T @ np.asarray(b, dtype=float)) / fact.sigma[:k]
    return fact.v[:, :k] @ coef


def tikhonov_wsvd(fact, b, lam):
    """Tikhonov-regularized solution with filter factors sigma^2/(sigma^2+lam).

    Solves (A^T A + lam M) x = A^T b through the factorization; lam = 0
    reduces to the minimum-M-norm least squares solution.
    """
    if lam < 0:
        raise ValueError(f"regularization parameter must be >= 0, got {lam}")
    r = fact.rank
    sig = fact.sigma
    filt = sig**2 / (sig**2 + lam)
    coef = (_coefficients(fact, b) / sig) * filt
    return fact.v[:, :r] @ coef
