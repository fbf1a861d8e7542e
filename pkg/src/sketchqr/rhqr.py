"""Randomized Householder QR.

A reflector here is built from a single sketch of the working column: with
y = Psi w the vector u keeps w's tail plus a sigma*rho bump on the pivot,
and s is the same surgery applied to y, so s = Psi u without a second
sketch.  Products of reflectors accumulate in compact form
I - U T (Psi U)^t Psi with S = Psi U stored explicitly.

Two scalings are supported everywhere:
  "sqrt2": u and s multiplied by sqrt(beta) so beta == 1 and ||s|| = sqrt(2)
  "unit":  u and s divided by the pivot value gamma so diag(U) == 1

Precision policy: n-dimensional storage and updates run in policy.low,
sketched coefficients, rho/beta and the T algebra in policy.high.
"""

from dataclasses import dataclass

import numpy as np

from .baselines import householder_qr
from .linalg import (
    SCALE_SQRT2,
    SCALE_UNIT,
    SCALINGS,
    BreakdownError,
    as_array,
    check_scaling,
    right_tri_solve,
    sign,
    to_dtype,
    upper_tri_solve,
)
from .precision import DOUBLE_POLICY, PrecisionPolicy, round_to
from .sketching import EmbeddedSketch


@dataclass
class HouseholderStep:
    """One reflector: elimination index j (1-based), vectors u and s = Psi u,
    and the scalars the update needs."""

    j: int
    u: np.ndarray
    s: np.ndarray
    sigma: float
    rho: float
    beta: float


def rh_vector(w, y, j, scaling=SCALE_SQRT2, policy=None):
    """Build the reflector that eliminates entries j+1.. of y = Psi w.

    j is 1-based and must lie inside the identity block of the embedding, so
    y[j-1] == w[j-1] exactly.  sign(0) = +1; rho and beta are computed in
    policy.high, u is rounded to policy.low.  Raises BreakdownError only when
    the sketched tail is exactly annihilated (rho == 0) or the reflector
    scale degenerates to a non-finite number: a tail sitting at the rounding
    noise floor still defines a perfectly unitary reflector, and the process
    is expected to keep going through numerically singular columns (that
    unconditional behavior is the whole point of the method).
    """
    check_scaling(scaling)
    policy = policy or DOUBLE_POLICY
    w = as_array(w)
    y = as_array(y)
    jj = j - 1
    if not 0 <= jj < y.shape[0]:
        raise ValueError(f"elimination index {j} outside sketch of length {y.shape[0]}")
    hi = policy.high_dtype
    # reductions accumulate in float64, the result lives in the high format
    rho = float(round_to(np.linalg.norm(y[jj:]), policy.high))
    if rho == 0.0:
        raise BreakdownError(f"sketched tail annihilated at column {j}")
    sigma = sign(y[jj])
    gamma = float(hi(y[jj] + sigma * rho))
    beta = float(hi(1.0 / (rho * sigma * gamma)))  # == 2/||s||^2, positive for either sigma
    if not np.isfinite(beta):
        raise BreakdownError(f"reflector scale degenerated at column {j} (rho={rho:.3e})")
    u = np.zeros(w.shape[0])
    u[jj:] = w[jj:]
    u[jj] += sigma * rho
    s = np.zeros(y.shape[0])
    s[jj:] = y[jj:]
    s[jj] = gamma
    if scaling == SCALE_SQRT2:
        f = float(hi(np.sqrt(beta)))
        u *= f
        s *= f
        beta = 1.0
    else:
        u /= gamma
        s /= gamma
        beta = float(hi(sigma * gamma / rho))  # |gamma|/rho
    u = round_to(u, policy.low)
    s = round_to(s, policy.high)
    return HouseholderStep(j=j, u=u, s=s, sigma=sigma, rho=rho, beta=beta)


def apply_reflectors_compact(U, S, T, X, psi, transpose_t=False, policy=None):
    """(I - U T S^t Psi) X, or the reversed product with transpose_t=True.

    The sketch and the n-dimensional update run in policy.low, the
    coefficient products in policy.high.
    """
    policy = policy or DOUBLE_POLICY
    lo = policy.low_dtype
    hi = policy.high_dtype
    U = as_array(U)
    S = as_array(S)
    T = as_array(T)
    X = as_array(X)
    vec = X.ndim == 1
    Xc = X[:, None] if vec else X
    Y = psi.apply(Xc, dtype=lo)
    C = to_dtype(S, hi).T @ to_dtype(Y, hi)
    C = to_dtype(T.T if transpose_t else T, hi) @ C
    out = (to_dtype(Xc, lo) - to_dtype(U, lo) @ to_dtype(C, lo)).astype(np.float64)
    return out[:, 0] if vec else out


def t_factor_from_sketches(S, policy=None):
    """Recover the triangular T of the compact form from S = Psi U alone.

    S^t S = T^{-1} + T^{-t}, so T^{-1} is the strict upper triangle of S^t S
    plus half its diagonal.
    """
    policy = policy or DOUBLE_POLICY
    Sh = to_dtype(as_array(S), policy.high_dtype)
    G = (Sh.T @ Sh).astype(np.float64)
    Tinv = np.triu(G, 1) + np.diag(np.diagonal(G) / 2.0)
    return upper_tri_solve(Tinv, np.eye(G.shape[0]), policy=policy)


def _extend_t(T, S, s_new, beta, c, hi=np.float64):
    # grow the compact-form triangle by the new reflector's column
    if c:
        col = to_dtype(T[:c, :c], hi) @ (to_dtype(S[:, :c], hi).T @ to_dtype(s_new, hi))
        T[:c, c] = (hi(-beta) * col).astype(np.float64)
    T[c, c] = beta


@dataclass
class RHQRFactors:
    """Compact factorization output: W = Q R with Q = [I;0] - U T U1^t."""

    U: np.ndarray          # n x m reflector columns, lower trapezoidal
    S: np.ndarray          # (ell+M) x m sketched reflectors, S = Psi U
    T: np.ndarray          # m x m upper triangular
    R: np.ndarray          # m x m upper triangular
    psi: EmbeddedSketch
    scaling: str
    sigmas: np.ndarray
    rhos: np.ndarray
    betas: np.ndarray

    @property
    def cols(self):
        return self.U.shape[1]

    def prefix(self, j):
        """Factors of the leading j columns (valid for the left/right sweeps,
        whose first j reflectors never look at later columns)."""
        return RHQRFactors(
            U=self.U[:, :j], S=self.S[:, :j], T=self.T[:j, :j], R=self.R[:j, :j],
            psi=self.psi, scaling=self.scaling,
            sigmas=self.sigmas[:j], rhos=self.rhos[:j], betas=self.betas[:j],
        )


def thin_q(factors):
    """Materialize Q = [I;0] - U T U1^t in float64 (metrics run on this)."""
    U = as_array(factors.U)
    k = U.shape[1]
    U1 = U[:k, :k]
    Q = -U @ (as_array(factors.T) @ U1.T)
    Q[:k] += np.eye(k)
    return Q


def sketch_q(factors):
    """Materialize Psi Q = [I;0] - S T U1^t without touching n-dim data."""
    S = as_array(factors.S)
    U = as_array(factors.U)
    k = U.shape[1]
    Q = -S @ (as_array(factors.T) @ U[:k, :k].T)
    Q[:k] += np.eye(k)
    return Q


def lsq_via_implicit_q(factors, b, policy=None):
    """argmin_x of the sketched residual ||Psi(W x - b)|| via the compact form."""
    policy = policy or DOUBLE_POLICY
    c = apply_reflectors_compact(
        factors.U, factors.S, factors.T, as_array(b), factors.psi,
        transpose_t=True, policy=policy,
    )
    m = factors.R.shape[1]
    return upper_tri_solve(factors.R, c[:m], policy=policy)


def _embed(omega, n, m):
    if isinstance(omega, EmbeddedSketch):
        if omega.n != n or omega.m != m:
            raise ValueError(
                f"embedding is {omega.out_dim}x{omega.n} with identity block "
                f"{omega.m}, expected input {n} and block {m}"
            )
        if omega.omega.ell < m:
            raise ValueError("sampling size below column count")
        return omega
    if omega.n != n - m:
        raise ValueError(f"sketch takes {omega.n} coordinates, expected n-m={n - m}")
    if omega.ell < m:
        raise ValueError("sampling size below column count")
    return EmbeddedSketch(m, omega)


def _left_sweep(Wl, psi, offset, scaling, policy):
    """Left-looking reflector sweep over the columns of Wl.

    Column c is eliminated at global index offset+c+1; earlier reflectors of
    this sweep are applied compactly (sketch, coefficients in high, update in
    low, re-sketch).  Wl carries policy.low values.
    """
    lo = policy.low_dtype
    hi = policy.high_dtype
    n, b = Wl.shape
    U = np.zeros((n, b))
    S = np.zeros((psi.out_dim, b))
    T = np.zeros((b, b))
    R = np.zeros((offset + b, b))
    sigmas = np.zeros(b)
    rhos = np.zeros(b)
    betas = np.zeros(b)
    for c in range(b):
        j = offset + c + 1
        w = Wl[:, c].astype(np.float64)
        if c:
            y = psi.apply(w, dtype=lo)
            coef = to_dtype(T[:c, :c].T, hi) @ (to_dtype(S[:, :c], hi).T @ to_dtype(y, hi))
            w = (to_dtype(w, lo) - to_dtype(U[:, :c], lo) @ to_dtype(coef, lo)).astype(np.float64)
        y = psi.apply(w, dtype=lo)
        step = rh_vector(w, y, j, scaling, policy)
        U[:, c] = step.u
        S[:, c] = step.s
        _extend_t(T, S, step.s, step.beta, c, hi)
        R[: j - 1, c] = w[: j - 1]
        R[j - 1, c] = -step.sigma * step.rho
        sigmas[c], rhos[c], betas[c] = step.sigma, step.rho, step.beta
    return U, S, T, R, sigmas, rhos, betas


def rhqr_left(W, omega, scaling=SCALE_SQRT2, policy=None):
    """Left-looking randomized Householder QR of a tall W (n x m, n > m).

    omega sketches the trailing n-m coordinates; two sketches per column.
    """
    check_scaling(scaling)
    policy = policy or DOUBLE_POLICY
    Wa = as_array(W)
    n, m = Wa.shape
    psi = _embed(omega, n, m)
    Wl = round_to(Wa, policy.low)
    U, S, T, R, sigmas, rhos, betas = _left_sweep(Wl, psi, 0, scaling, policy)
    return RHQRFactors(U=U, S=S, T=T, R=R, psi=psi, scaling=scaling,
                       sigmas=sigmas, rhos=rhos, betas=betas)


def rhqr_right(W, omega, scaling=SCALE_SQRT2, policy=None):
    """Right-looking variant: rank-1 update of the trailing block, which is
    re-sketched wholesale at every step; T is recovered from S afterwards."""
    check_scaling(scaling)
    policy = policy or DOUBLE_POLICY
    lo = policy.low_dtype
    Wa = as_array(W)
    n, m = Wa.shape
    psi = _embed(omega, n, m)
    Wl = round_to(Wa, policy.low)
    U = np.zeros((n, m))
    S = np.zeros((psi.out_dim, m))
    R = np.zeros((m, m))
    sigmas = np.zeros(m)
    rhos = np.zeros(m)
    betas = np.zeros(m)
    for c in range(m):
        Y = psi.apply(Wl[:, c:], dtype=lo)
        step = rh_vector(Wl[:, c], Y[:, 0], c + 1, scaling, policy)
        U[:, c] = step.u
        S[:, c] = step.s
        R[:c, c] = Wl[:c, c]
        R[c, c] = -step.sigma * step.rho
        sigmas[c], rhos[c], betas[c] = step.sigma, step.rho, step.beta
        if c + 1 < m:
            hi = policy.high_dtype
            coef = hi(step.beta) * (to_dtype(step.s, hi) @ to_dtype(Y[:, 1:], hi))
            tail = to_dtype(Wl[:, c + 1:], lo) - np.outer(to_dtype(step.u, lo), to_dtype(coef, lo))
            Wl[:, c + 1:] = tail.astype(np.float64)
    T = t_factor_from_sketches(S, policy=policy)
    return RHQRFactors(U=U, S=S, T=T, R=R, psi=psi, scaling=scaling,
                       sigmas=sigmas, rhos=rhos, betas=betas)


@dataclass
class BlockPanel:
    U: np.ndarray
    S: np.ndarray
    T: np.ndarray
    offset: int


@dataclass
class BlockRHQRFactors:
    """Panel-compact output of the blocked sweep; `stacked()` merges the
    panels into a single compact form (the global T is rebuilt from S)."""

    panels: list
    R: np.ndarray
    psi: EmbeddedSketch
    scaling: str
    sigmas: np.ndarray
    rhos: np.ndarray
    betas: np.ndarray

    def stacked(self):
        U = np.concatenate([p.U for p in self.panels], axis=1)
        S = np.concatenate([p.S for p in self.panels], axis=1)
        T = t_factor_from_sketches(S)
        return RHQRFactors(U=U, S=S, T=T, R=self.R, psi=self.psi,
                           scaling=self.scaling, sigmas=self.sigmas,
                           rhos=self.rhos, betas=self.betas)


def rhqr_block(W, omega, block_size=32, scaling=SCALE_SQRT2, policy=None):
    """Blocked left-looking sweep: earlier panels are applied compactly
    (one re-sketch per panel), then the panel is factored in place.  A final
    panel narrower than block_size is processed as-is."""
    check_scaling(scaling)
    if block_size < 1:
        raise ValueError("block_size must be positive")
    policy = policy or DOUBLE_POLICY
    lo = policy.low_dtype
    Wa = as_array(W)
    n, m = Wa.shape
    psi = _embed(omega, n, m)
    Wl = round_to(Wa, policy.low)
    panels = []
    R = np.zeros((m, m))
    sigmas = np.zeros(m)
    rhos = np.zeros(m)
    betas = np.zeros(m)
    for j0 in range(0, m, block_size):
        j1 = min(j0 + block_size, m)
        panel = Wl[:, j0:j1].copy()
        hi = policy.high_dtype
        for p in panels:
            Y = psi.apply(panel, dtype=lo)
            coef = to_dtype(p.T.T, hi) @ (to_dtype(p.S, hi).T @ to_dtype(Y, hi))
            panel = (to_dtype(panel, lo) - to_dtype(p.U, lo) @ to_dtype(coef, lo)).astype(np.float64)
        U, S, T, Rp, sg, rh, bt = _left_sweep(panel, psi, j0, scaling, policy)
        R[:j1, j0:j1] = Rp
        sigmas[j0:j1], rhos[j0:j1], betas[j0:j1] = sg, rh, bt
        panels.append(BlockPanel(U=U, S=S, T=T, offset=j0))
    return BlockRHQRFactors(panels=panels, R=R, psi=psi, scaling=scaling,
                            sigmas=sigmas, rhos=rhos, betas=betas)


def rec_rhqr(W, omega, scaling=SCALE_SQRT2, policy=None):
    """Reconstructed RHQR: one sketch of all of W, a deterministic
    Householder QR of the sketch, and a triangular solve that lifts the
    reflectors back to n dimensions.

    The small QR runs entirely in policy.high; only the single sketch and
    the reconstructed U touch low precision.
    """
    check_scaling(scaling)
    policy = policy or DOUBLE_POLICY
    Wa = as_array(W)
    n, m = Wa.shape
    psi = _embed(omega, n, m)
    Wl = round_to(Wa, policy.low)
    Z = psi.apply(Wl, dtype=policy.low_dtype)
    hq = householder_qr(Z, scaling=scaling, policy=PrecisionPolicy.uniform(policy.high))
    S = hq.aux["U"]
    T = hq.aux["T"]
    hi = policy.high_dtype
    Mfac = np.triu(to_dtype(T.T, hi) @ (to_dtype(S, hi).T @ to_dtype(Z, hi))).astype(np.float64)
    d = np.abs(np.diagonal(Mfac))
    if np.any(d < np.finfo(np.float64).tiny):
        k = int(np.argmin(d))
        raise BreakdownError(f"reconstruction factor has zero diagonal at column {k + 1}")
    U2 = right_tri_solve(Wl[m:], Mfac, policy=policy)
    U = np.concatenate([S[:m], round_to(U2, policy.low)], axis=0)
    return RHQRFactors(U=U, S=S, T=T, R=hq.R, psi=psi, scaling=scaling,
                       sigmas=hq.aux["sigmas"], rhos=hq.aux["rhos"], betas=hq.aux["betas"])
