"""Weighted Golub-Kahan bidiagonalization.

Starting from b, the recursion builds a 2-orthonormal left basis p_1, p_2,
... and an M-orthonormal right basis q_1, q_2, ... together with scalars
alpha_i, beta_i forming the lower bidiagonal projected matrix B_k:

    beta_1 p_1 = b
    alpha_1 q_1 = M^{-1} A^T p_1
    beta_{i+1} p_{i+1} = A q_i - alpha_i p_i
    alpha_{i+1} q_{i+1} = M^{-1} (A^T p_{i+1} - beta_{i+1} M q_i)

The recursion stops when an alpha or beta falls to zero (relative to the
largest bidiagonal entry seen); at that point the Krylov space is exhausted
and the projected problem is exact.
"""

from dataclasses import dataclass, field

import numpy as np

from .weights import WeightMatrix

# Relative breakdown threshold against the running bidiagonal scale, which
# is a factor-2 proxy for sigma_1(B_k).
BREAK_TOL = 1e-14


@dataclass
class ApproxTriplet:
    """Approximate weighted singular triplet extracted from B_k."""

    sigma_bar: float
    u_bar: np.ndarray
    v_bar: np.ndarray
    residual_bound: float


@dataclass
class BidiagState:
    """State of the recursion after k completed steps.

    alphas holds alpha_1..alpha_{k+1} and betas holds beta_1..beta_{k+1}
    (trailing entries may be missing or zero when the recursion terminated
    mid-step).  ps and qs hold the basis vectors.  Each step appends exactly
    one beta, so k = len(betas) - 1.
    """

    alphas: list = field(default_factory=list)
    betas: list = field(default_factory=list)
    ps: list = field(default_factory=list)
    qs: list = field(default_factory=list)
    terminated: bool = False
    termination_step: int | None = None
    scale: float = 0.0

    @property
    def k(self):
        return len(self.betas) - 1

    @property
    def P(self):
        """Left basis as columns, m x len(ps)."""
        return np.column_stack(self.ps)

    @property
    def Q(self):
        """Right basis as columns, n x len(qs)."""
        return np.column_stack(self.qs)


def _reorth_left(r, ps):
    # two classical Gram-Schmidt passes against the 2-orthonormal columns
    pm = np.column_stack(ps)
    for _ in range(2):
        r = r - pm @ (pm.T @ r)
    return r


def _reorth_right(s, qs, weight):
    # two passes in the M-inner product; coefficients via M s
    qm = np.column_stack(qs)
    for _ in range(2):
        s = s - qm @ (qm.T @ weight.matvec(s))
    return s


def wgkb_init(a, weight, b):
    """First vectors of the recursion.

    Raises ValueError for b = 0.  If b is orthogonal to the range of A
    (alpha_1 = 0) the returned state is already terminated with
    termination_step 0.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if b.ndim != 1 or b.shape[0] != a.shape[0]:
        raise ValueError(f"b has shape {b.shape}, expected ({a.shape[0]},)")
    if a.shape[1] != weight.n:
        raise ValueError(
            f"matrix has {a.shape[1]} columns, weight matrix is {weight.n}x{weight.n}"
        )
    beta1 = float(np.linalg.norm(b))
    if beta1 == 0.0:
        raise ValueError("starting vector b must be nonzero")
    p1 = b / beta1
    sbar = a.T @ p1
    s = weight.solve(sbar)
    alpha1 = float(np.sqrt(max(s @ sbar, 0.0)))
    state = BidiagState(betas=[beta1], ps=[p1])
    # no bidiagonal scale exists yet; compare against the matrix scale
    if alpha1 <= BREAK_TOL * np.linalg.norm(a, "fro"):
        state.terminated = True
        state.termination_step = 0
        return state
    state.alphas.append(alpha1)
    state.qs.append(s / alpha1)
    state.scale = alpha1
    return state


def wgkb_step(state, a, weight, reorth=True):
    """Advance the recursion one step; returns the same state object.

    With reorth set (the default), new vectors are reorthogonalized against
    the full stored basis (two classical passes), which keeps the exactness
    relations near machine precision on ill-conditioned problems.
    """
    if state.terminated:
        raise RuntimeError("bidiagonalization already terminated")
    i = state.k + 1
    alpha_i = state.alphas[-1]
    r = a @ state.qs[-1] - alpha_i * state.ps[-1]
    if reorth:
        r = _reorth_left(r, state.ps)
    beta = float(np.linalg.norm(r))
    if beta <= BREAK_TOL * state.scale:
        state.betas.append(0.0)
        state.terminated = True
        state.termination_step = i
        return state
    state.betas.append(beta)
    state.scale = max(state.scale, beta)
    p = r / beta
    state.ps.append(p)
    sbar = a.T @ p - beta * weight.matvec(state.qs[-1])
    s = weight.solve(sbar)
    if reorth:
        s = _reorth_right(s, state.qs, weight)
        sbar = weight.matvec(s)
    alpha = float(np.sqrt(max(s @ sbar, 0.0)))
    if alpha <= BREAK_TOL * state.scale:
        state.alphas.append(0.0)
        state.terminated = True
        state.termination_step = i
        return state
    state.alphas.append(alpha)
    state.scale = max(state.scale, alpha)
    state.qs.append(s / alpha)
    return state


def project_bidiagonal(state, k=None):
    """The (k+1) x k lower bidiagonal matrix B_k with diagonal alpha_1..alpha_k
    and subdiagonal beta_2..beta_{k+1}; k defaults to the completed step count."""
    if k is None:
        k = state.k
    if not 1 <= k <= state.k or len(state.alphas) < k:
        raise ValueError(f"k must satisfy 1 <= k <= {state.k}, got {k}")
    b = np.zeros((k + 1, k))
    idx = np.arange(k)
    b[idx, idx] = state.alphas[:k]
    b[idx + 1, idx] = state.betas[1:k + 1]
    return b


def approx_triplets(state, count):
    """Leading approximate weighted singular triplets from the projection.

    The compact SVD of B_k gives B_k = Y Theta H^T; the triplets are
    (theta_i, P y_i, Q h_i) with the residual bound
    |alpha_{k+1} * (last entry of y_i)| certifying convergence.  Returned in
    decreasing sigma_bar order.
    """
    k = state.k
    if not 1 <= count <= k:
        raise ValueError(f"count must satisfy 1 <= count <= {k}, got {count}")
    bk = project_bidiagonal(state)
    y, theta, ht = np.linalg.svd(bk, full_matrices=False)
    pmat = state.P
    qmat = state.Q[:, :k]
    alpha_next = state.alphas[k] if len(state.alphas) > k else 0.0
    out = []
    for i in range(count):
        yi = y[:, i]
        out.append(
            ApproxTriplet(
                sigma_bar=float(theta[i]),
                u_bar=pmat @ yi[: pmat.shape[1]],
                v_bar=qmat @ ht[i, :],
                residual_bound=abs(alpha_next * yi[-1]),
            )
        )
    return out
