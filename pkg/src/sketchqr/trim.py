"""Trimmed randomized Householder QR.

The reflector for column j sketches only coordinates j..n of its input:
H(u, Omega, j) = I - beta u (Omega u)^t [0 Omega_{j:n}].  Dropping the
identity block of the embedding lets the sampling size ell be smaller than
the column count m, at the price of a basis whose sketch is no longer
orthogonal.  The construction needs Omega's first m columns to sketch to
unit vectors; normalize_leading_columns wraps any operator so this holds
and the factorizations apply it automatically.

Compact forms use two triangles.  Products in creation order carry the
same T recursion as the plain randomized reflectors; reversed products
carry a twin T~.  Applying either form needs ut((Omega U)^t Omega), which
is computed from S^t (Omega x) minus a correction through the strictly
lower table L[i, k] = <Omega u_i, Omega e_k>, so canonical vectors are
sketched once up front and never again.
"""

from dataclasses import dataclass

import numpy as np

from .linalg import (
    SCALE_SQRT2,
    BreakdownError,
    as_array,
    check_scaling,
    sign,
    to_dtype,
    upper_tri_solve,
)
from .precision import DOUBLE_POLICY, round_to
from .rhqr import _extend_t, t_factor_from_sketches
from .sketching import ColumnScaledSketch


@dataclass
class TrimStep:
    """One trimmed reflector: elimination index j (1-based), tail vector v of
    length n-j+1, its sketch s = Omega [0; v], and the update scalars."""

    j: int
    v: np.ndarray
    s: np.ndarray
    sigma: float
    rho: float
    beta: float


def normalize_leading_columns(omega, m, chunk=256):
    """Wrap omega so its first m columns sketch to exactly unit norm.

    The wrapper rescales input coordinates 1..m before sketching and caches
    the m unit column sketches (needed as the E table of the trimmed
    factorizations).  An operator already wrapped for at least m columns is
    returned unchanged.  Raises ValueError if a leading column sketches to
    zero.
    """
    if isinstance(omega, ColumnScaledSketch) and omega.m >= m:
        return omega
    n = omega.n
    if m > n:
        raise ValueError(f"cannot normalize {m} leading columns of {n} inputs")
    cols = np.empty((omega.ell, m))
    for k0 in range(0, m, chunk):
        k1 = min(k0 + chunk, m)
        eye_blk = np.zeros((n, k1 - k0))
        eye_blk[np.arange(k0, k1), np.arange(k1 - k0)] = 1.0
        cols[:, k0:k1] = omega.apply(eye_blk)
    norms = np.linalg.norm(cols, axis=0)
    if np.any(norms == 0.0):
        dead = int(np.argmin(norms)) + 1
        raise ValueError(f"leading column {dead} sketches to zero")
    scales = np.ones(n)
    scales[:m] = 1.0 / norms
    return ColumnScaledSketch(omega, scales, m, cols / norms)


def trim_rh_vector(w_tail, omega, j, scaling=SCALE_SQRT2, policy=None):
    """Reflector data for the trimmed elimination at 1-based column j.

    w_tail holds coordinates j..n of the working column; both sketches pad
    it with j-1 zeros, which equals applying Omega's trailing columns.
    sigma is the sign of w_tail's first entry: the sketch does not preserve
    entries here, so the pivot itself decides.  Raises BreakdownError when
    the sketched tail is exactly annihilated (rho == 0) or when the sketched
    reflector vector cancels, which the sign choice cannot rule out once the
    pivot's sketched column may anti-align with the tail; noise-floor tails
    proceed, matching the main algorithm's convention.
    """
    check_scaling(scaling)
    policy = policy or DOUBLE_POLICY
    lo = policy.low_dtype
    hi = policy.high_dtype
    w_tail = as_array(w_tail)
    n = omega.n
    jj = j - 1
    if not 0 <= jj < n:
        raise ValueError(f"elimination index {j} outside {n} coordinates")
    if w_tail.shape[0] != n - jj:
        raise ValueError(f"tail has {w_tail.shape[0]} entries, expected {n - jj}")
    x = np.zeros(n)
    x[jj:] = w_tail
    z = omega.apply(x, dtype=lo).astype(np.float64)
    rho = float(round_to(np.linalg.norm(z), policy.high))
    if rho == 0.0:
        raise BreakdownError(f"sketched tail annihilated at column {j}")
    sigma = sign(w_tail[0])
    v = w_tail.copy()
    v[0] += sigma * rho
    v = round_to(v, policy.low)
    x[jj:] = v
    vs = omega.apply(x, dtype=lo).astype(np.float64)
    nv = float(round_to(np.linalg.norm(vs), policy.high))
    if nv <= 8.0 * policy.u_high * (float(np.linalg.norm(z)) + rho):
        raise BreakdownError(
            f"sketched reflector vector cancelled at column {j} "
            f"(degenerate sketch geometry, norm {nv:.3e})"
        )
    beta = float(hi(2.0 / (nv * nv)))
    if scaling == SCALE_SQRT2:
        f = float(hi(np.sqrt(beta)))
        v = v * f
        vs = vs * f
        beta = 1.0
    else:
        piv = float(vs[0])
        if abs(piv) <= 8.0 * policy.u_high * nv:
            raise BreakdownError(
                f"unit scaling pivot vanished at column {j} (sketched entry {piv:.3e})"
            )
        v = v / piv
        vs = vs / piv
        beta = float(hi(beta * piv * piv))
    v = round_to(v, policy.low)
    vs = round_to(vs, policy.high)
    return TrimStep(j=j, v=v, s=vs, sigma=sigma, rho=rho, beta=beta)


@dataclass
class TrimFactors:
    """Output of the trimmed factorizations: W = (I - U T ut((Omega U)^t Omega)) [R; 0].

    S = Omega U with one sketch per reflector.  T composes reflectors in
    creation order, T_tilde in reverse; both are upper triangular.  L is the
    strictly lower table <Omega u_i, Omega e_k> and E holds the unit leading
    column sketches of the wrapped operator, so the ut(...) application
    never re-sketches canonical vectors.
    """

    U: np.ndarray
    S: np.ndarray
    T: np.ndarray
    T_tilde: np.ndarray
    R: np.ndarray
    L: np.ndarray
    E: np.ndarray
    omega: ColumnScaledSketch
    scaling: str
    sigmas: np.ndarray
    rhos: np.ndarray
    betas: np.ndarray

    @property
    def cols(self):
        return self.U.shape[1]

    def prefix(self, j):
        """Factors of the leading j columns; valid because every table grows
        by one row/column per reflector."""
        return TrimFactors(
            U=self.U[:, :j], S=self.S[:, :j], T=self.T[:j, :j],
            T_tilde=self.T_tilde[:j, :j], R=self.R[:j, :j], L=self.L[:j, :j],
            E=self.E[:, :j], omega=self.omega, scaling=self.scaling,
            sigmas=self.sigmas[:j], rhos=self.rhos[:j], betas=self.betas[:j],
        )


def t_tilde_from_factors(S, E, U, policy=None):
    """Reversed-product triangle without running the per-step recursion.

    A = T^{-1} - ut((Omega U)^t Omega) U is lower triangular with diagonal
    -||s_i||^2 / 2, and T~^t = -A^{-1}.  Leading blocks of a triangular
    inverse are inverses of leading blocks, so prefixes of the result agree
    with the recursion.
    """
    policy = policy or DOUBLE_POLICY
    hi = policy.high_dtype
    S = as_array(S)
    m = S.shape[1]
    Sh = to_dtype(S, hi)
    G = (Sh.T @ Sh).astype(np.float64)
    L = np.tril((Sh.T @ to_dtype(as_array(E)[:, :m], hi)).astype(np.float64), -1)
    corr = (to_dtype(L, hi) @ to_dtype(as_array(U)[:m], hi)).astype(np.float64)
    A = corr - np.tril(G, -1) - np.diag(np.diagonal(G) / 2.0)
    return -upper_tri_solve(A.T, np.eye(m), policy=policy)


def trim_thin_q(factors):
    """Materialize Q with W = Q R in float64 (metrics run on this).

    The creation-order compact form applied to [I_m; 0] needs only
    ut((Omega U)^t Omega) [I; 0] = triu(S^t E).
    """
    U = as_array(factors.U)
    k = U.shape[1]
    M = np.triu(as_array(factors.S).T @ as_array(factors.E)[:, :k])
    Q = -U @ (as_array(factors.T) @ M)
    Q[:k] += np.eye(k)
    return Q


def _trim_setup(W, omega, m):
    W = as_array(W)
    if W.ndim != 2:
        raise ValueError("W must be a matrix")
    omega = normalize_leading_columns(omega, m)
    if omega.n != W.shape[0]:
        raise ValueError(f"sketch takes {omega.n} coordinates, W has {W.shape[0]} rows")
    return W, omega


def trim_rhqr_right(W, omega, scaling=SCALE_SQRT2, policy=None):
    """Right-looking trimmed factorization.

    Each reflector updates the trailing columns through the masked sketch:
    rows 1..j-1 are dropped before sketching, matching the [0 Omega_{j:n}]
    operator of the elimination.  T, T_tilde and L are assembled from S and
    E after the sweep.
    """
    check_scaling(scaling)
    policy = policy or DOUBLE_POLICY
    lo = policy.low_dtype
    hi = policy.high_dtype
    n, m = as_array(W).shape
    W, omega = _trim_setup(W, omega, m)
    Wl = round_to(W, policy.low)
    U = np.zeros((n, m))
    S = np.zeros((omega.ell, m))
    R = np.zeros((m, m))
    sigmas, rhos, betas = [], [], []
    for c in range(m):
        w = Wl[:, c]
        step = trim_rh_vector(w[c:], omega, c + 1, scaling=scaling, policy=policy)
        U[c:, c] = step.v
        S[:, c] = step.s
        R[:c, c] = w[:c]
        R[c, c] = -step.sigma * step.rho
        sigmas.append(step.sigma)
        rhos.append(step.rho)
        betas.append(step.beta)
        if c + 1 < m:
            Y = Wl[:, c + 1:]
            masked = Y.copy()
            masked[:c] = 0.0
            X = omega.apply(masked, dtype=lo)
            coef = (hi(step.beta) * (to_dtype(step.s, hi) @ to_dtype(X, hi))).astype(np.float64)
            Wl[:, c + 1:] = (
                to_dtype(Y, lo) - np.outer(to_dtype(U[:, c], lo), to_dtype(coef, lo))
            ).astype(np.float64)
    E = omega.unit_column_sketches[:, :m].copy()
    T = t_factor_from_sketches(S, policy=policy)
    T_tilde = t_tilde_from_factors(S, E, U, policy=policy)
    L = np.tril((to_dtype(S, hi).T @ to_dtype(E, hi)).astype(np.float64), -1)
    return TrimFactors(
        U=U, S=S, T=T, T_tilde=T_tilde, R=R, L=L, E=E, omega=omega,
        scaling=scaling, sigmas=np.array(sigmas), rhos=np.array(rhos),
        betas=np.array(betas),
    )


def trim_rhqr_left(W, omega, scaling=SCALE_SQRT2, policy=None):
    """Left-looking trimmed factorization maintaining both triangles.

    Column j is transformed in one shot by the reversed compact form,
    w -= U T~^t (S^t (Omega w) - L w_head), then the reflector comes from
    its tail.  Three sketches per column: the update's and the two inside
    trim_rh_vector.
    """
    check_scaling(scaling)
    policy = policy or DOUBLE_POLICY
    lo = policy.low_dtype
    hi = policy.high_dtype
    n, m = as_array(W).shape
    W, omega = _trim_setup(W, omega, m)
    E = omega.unit_column_sketches[:, :m].copy()
    Wl = round_to(W, policy.low)
    U = np.zeros((n, m))
    S = np.zeros((omega.ell, m))
    R = np.zeros((m, m))
    T = np.zeros((m, m))
    Tt = np.zeros((m, m))
    L = np.zeros((m, m))
    sigmas, rhos, betas = [], [], []
    for c in range(m):
        w = Wl[:, c].copy()
        if c:
            z = omega.apply(w, dtype=lo).astype(np.float64)
            h = (to_dtype(S[:, :c], hi).T @ to_dtype(z, hi)).astype(np.float64)
            h -= (to_dtype(L[:c, :c], hi) @ to_dtype(w[:c], hi)).astype(np.float64)
            coef = (to_dtype(Tt[:c, :c], hi).T @ to_dtype(h, hi)).astype(np.float64)
            w = (to_dtype(w, lo) - to_dtype(U[:, :c], lo) @ to_dtype(coef, lo)).astype(np.float64)
        step = trim_rh_vector(w[c:], omega, c + 1, scaling=scaling, policy=policy)
        U[c:, c] = step.v
        S[:, c] = step.s
        R[:c, c] = w[:c]
        R[c, c] = -step.sigma * step.rho
        # grow the slt table and both triangles by the new reflector
        lrow = (to_dtype(E[:, :c], hi).T @ to_dtype(step.s, hi)).astype(np.float64)
        L[c, :c] = lrow
        _extend_t(T, S, step.s, step.beta, c, hi=hi)
        if c:
            g = (to_dtype(S[:, :c], hi).T @ to_dtype(step.s, hi)).astype(np.float64)
            g -= (to_dtype(U[:c, :c], hi).T @ to_dtype(lrow, hi)).astype(np.float64)
            col = to_dtype(Tt[:c, :c], hi) @ to_dtype(g, hi)
            Tt[:c, c] = (hi(-step.beta) * col).astype(np.float64)
        Tt[c, c] = step.beta
        sigmas.append(step.sigma)
        rhos.append(step.rho)
        betas.append(step.beta)
    return TrimFactors(
        U=U, S=S, T=T, T_tilde=Tt, R=R, L=L, E=E, omega=omega,
        scaling=scaling, sigmas=np.array(sigmas), rhos=np.array(rhos),
        betas=np.array(betas),
    )
