"""Arnoldi and GMRES on top of the randomized Householder kernels.

The Arnoldi driver keeps the basis in the compact reflector form
I - U T (Psi U)^t Psi and extracts explicit columns q_j on the fly (one
generalized matvec each); the Hessenberg column for A q_{j-1} falls out of
the j-th reflector as [head of w, -sigma*rho, 0...].  Because the sketched
basis Psi Q is orthonormal, minimizing the Hessenberg residual minimizes
the sketched residual ||Psi(b - A x)|| over the Krylov space, which is the
whole point of running GMRES this way.

A randomized Gram-Schmidt GMRES with an explicit basis is included as the
natural point of comparison.
"""

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse

from .baselines import pivoted_qr_lstsq
from .linalg import SCALE_SQRT2, as_array, check_scaling, to_dtype
from .precision import DOUBLE_POLICY, round_to
from .rhqr import _embed, _extend_t, apply_reflectors_compact, rh_vector
from .sketching import EmbeddedSketch


def _as_operator(A):
    """Accept a callable, a scipy sparse matrix, or a dense array."""
    if callable(A):
        return A
    if scipy.sparse.issparse(A):
        return lambda v: A @ v
    M = as_array(A)
    return lambda v: M @ v


@dataclass
class KrylovBundle:
    """Arnoldi output: k+1 reflectors in compact form, the (k+1) x k
    Hessenberg, and the signed sketched norm of the starting residual
    (beta, the coordinate of r0 in the computed basis).  breakdown is None
    for a full run, or the attained dimension when the Krylov space closed
    early.  y and resid_history are filled in by the GMRES driver.
    """

    U: np.ndarray
    S: np.ndarray
    T: np.ndarray
    H: np.ndarray
    psi: EmbeddedSketch
    beta: float
    scaling: str
    Q_cols: np.ndarray = None
    breakdown: int = None
    y: np.ndarray = None
    resid_history: np.ndarray = None

    @property
    def dim(self):
        return self.H.shape[1]


def arnoldi_q(bundle, cols=None):
    """Materialize basis columns q_1..q_cols from the compact form.

    cols may go up to the number of stored reflectors; cols = dim + 1 gives
    the extended basis Q_{m+1} of the Arnoldi relation.
    """
    U = as_array(bundle.U)
    S = as_array(bundle.S)
    T = as_array(bundle.T)
    r = U.shape[1]
    c = r if cols is None else cols
    if not 0 <= c <= r:
        raise ValueError(f"have {r} reflectors, cannot build {c} columns")
    Q = -U @ (T @ S[:c, :].T)
    Q[:c] += np.eye(c)
    return Q


def rhqr_arnoldi(A, b, x0, m, omega, scaling=SCALE_SQRT2, policy=None,
                 store_q=True, happy_tol=None):
    """Krylov basis of (A, b - A x0) through randomized Householder QR.

    omega sketches the trailing n-m-1 coordinates (the identity block of the
    embedding covers the m+1 Hessenberg rows).  A is applied only as a
    matvec.  When the sketched tail of the next direction falls below
    happy_tol times its full norm the space is declared closed: factors are
    truncated and bundle.breakdown reports the attained dimension.
    """
    check_scaling(scaling)
    policy = policy or DOUBLE_POLICY
    lo = policy.low_dtype
    hi = policy.high_dtype
    matvec = _as_operator(A)
    b = as_array(b)
    n = b.shape[0]
    x0 = np.zeros(n) if x0 is None else as_array(x0)
    psi = _embed(omega, n, m + 1)
    if happy_tol is None:
        happy_tol = 32.0 * policy.u_high
    steps = m + 1
    U = np.zeros((n, steps))
    S = np.zeros((psi.out_dim, steps))
    T = np.zeros((steps, steps))
    hcols = np.zeros((m + 1, m))
    Q = np.zeros((n, m))
    beta = 0.0
    attained = None
    w = round_to(b - matvec(round_to(x0, policy.low)), policy.low).astype(np.float64)
    z = psi.apply(w, dtype=lo)
    for j in range(1, steps + 1):
        zt = z.astype(np.float64)
        tail = float(np.linalg.norm(zt[j - 1:]))
        if tail <= happy_tol * float(np.linalg.norm(zt)):
            # the new direction is numerically inside the span already: close
            # the space, finishing the current Hessenberg column with the
            # (tiny) subdiagonal the reflector would have produced
            attained = j - 1
            if j >= 2:
                sg = 1.0 if zt[j - 1] >= 0 else -1.0
                hcols[: j - 1, j - 2] = w[: j - 1]
                hcols[j - 1, j - 2] = -sg * tail
            break
        step = rh_vector(w, z, j, scaling, policy)
        U[:, j - 1] = step.u
        S[:, j - 1] = step.s
        _extend_t(T, S, step.s, step.beta, j - 1, hi)
        if j == 1:
            beta = -step.sigma * step.rho
        else:
            hcols[: j - 1, j - 2] = w[: j - 1]
            hcols[j - 1, j - 2] = -step.sigma * step.rho
        if j <= m:
            coef = to_dtype(T[:j, :j], hi) @ to_dtype(S[j - 1, :j], hi)
            q = -(to_dtype(U[:, :j], lo) @ to_dtype(coef, lo)).astype(np.float64)
            q[j - 1] += 1.0
            Q[:, j - 1] = q
            w = round_to(matvec(round_to(q, policy.low)), policy.low).astype(np.float64)
            w = apply_reflectors_compact(U[:, :j], S[:, :j], T[:j, :j], w, psi,
                                         transpose_t=True, policy=policy)
            z = psi.apply(w, dtype=lo)
    k = m if attained is None else attained
    r = steps if attained is None else attained
    return KrylovBundle(
        U=U[:, :r], S=S[:, :r], T=T[:r, :r], H=hcols[: k + 1, :k].copy(),
        psi=psi, beta=beta, scaling=scaling,
        Q_cols=Q[:, :k].copy() if store_q else None, breakdown=attained,
    )


def hessenberg_lstsq(H, beta, history=False):
    """min_y ||beta e_1 - H y|| for upper-Hessenberg H by Givens rotations.

    Returns (y, resid) with resid the magnitude of the last rotated
    right-hand-side entry; with history=True also the running residuals
    [|beta|, after column 1, ..., after column k].  A zero subcolumn skips
    its rotation and the dependent coordinate gets a zero coefficient.
    """
    H = as_array(H)
    p, k = H.shape
    R = H.astype(np.float64).copy()
    g = np.zeros(p)
    g[0] = float(beta)
    hist = np.zeros(k + 1)
    hist[0] = abs(float(beta))
    for j in range(k):
        a = R[j, j]
        t = R[j + 1, j]
        r = float(np.hypot(a, t))
        if r == 0.0:
            cs, sn = 1.0, 0.0
        else:
            cs, sn = a / r, t / r
        row1 = R[j, j:k].copy()
        row2 = R[j + 1, j:k].copy()
        R[j, j:k] = cs * row1 + sn * row2
        R[j + 1, j:k] = -sn * row1 + cs * row2
        g[j], g[j + 1] = cs * g[j] + sn * g[j + 1], -sn * g[j] + cs * g[j + 1]
        hist[j + 1] = abs(g[j + 1])
    y = np.zeros(k)
    for i in range(k - 1, -1, -1):
        if R[i, i] == 0.0:
            continue
        y[i] = (g[i] - R[i, i + 1: k] @ y[i + 1:]) / R[i, i]
    resid = float(abs(g[k])) if p > k else 0.0
    if history:
        return y, resid, hist
    return y, resid


def rhqr_gmres(A, b, x0, m, omega, scaling=SCALE_SQRT2, policy=None,
               happy_tol=None):
    """GMRES in the sketched norm: Arnoldi via randomized Householder QR,
    Hessenberg least squares, and the correction x - x0 = Q_k y recovered by
    one pass of the compact form over the padded coefficient vector.

    Returns (x, resid_history) with resid_history[j] the sketched residual
    norm after j iterations (resid_history[0] = ||Psi r0||).
    """
    policy = policy or DOUBLE_POLICY
    b = as_array(b)
    n = b.shape[0]
    x0 = np.zeros(n) if x0 is None else as_array(x0)
    bundle = rhqr_arnoldi(A, b, x0, m, omega, scaling=scaling, policy=policy,
                          store_q=False, happy_tol=happy_tol)
    k = bundle.dim
    y, resid, hist = hessenberg_lstsq(bundle.H, bundle.beta, history=True)
    if k and np.any(np.diagonal(bundle.H)[:k] == 0.0):
        warnings.warn("Hessenberg system is rank deficient; dependent "
                      "coordinates were zeroed", RuntimeWarning)
    bundle.y = y
    bundle.resid_history = hist
    if k == 0:
        return x0.copy(), hist
    pad = np.zeros(n)
    pad[:k] = y
    corr = apply_reflectors_compact(bundle.U[:, :k], bundle.S[:, :k],
                                    bundle.T[:k, :k], pad, bundle.psi,
                                    policy=policy)
    return x0 + corr, hist


def rgs_arnoldi(A, b, x0, m, omega, policy=None, happy_tol=None):
    """Arnoldi with randomized Gram-Schmidt orthogonalization and an
    explicit basis: projection coefficients from a sketched least-squares
    solve, normalization by the sketched norm.

    omega sketches all n coordinates, ell >= m+1.  Returns
    (Q, H, beta, attained) with Q of k+1 columns and H of shape (k+1) x k.
    """
    policy = policy or DOUBLE_POLICY
    lo = policy.low_dtype
    matvec = _as_operator(A)
    b = as_array(b)
    n = b.shape[0]
    x0 = np.zeros(n) if x0 is None else as_array(x0)
    if omega.n != n:
        raise ValueError(f"sketch takes {omega.n} coordinates, expected {n}")
    if omega.ell < m + 1:
        raise ValueError("sampling size below basis size")
    if happy_tol is None:
        happy_tol = 32.0 * policy.u_high
    Q = np.zeros((n, m + 1))
    Sb = np.zeros((omega.ell, m + 1))
    H = np.zeros((m + 1, m))
    r0 = round_to(b - matvec(round_to(x0, policy.low)), policy.low).astype(np.float64)
    p = omega.apply(r0, dtype=lo).astype(np.float64)
    beta = float(round_to(np.linalg.norm(p), policy.high))
    if beta == 0.0:
        return Q[:, :0], H[:1, :0], 0.0, 0
    Q[:, 0] = r0 / beta
    Sb[:, 0] = p / beta
    attained = None
    for j in range(1, m + 1):
        w = round_to(matvec(round_to(Q[:, j - 1], policy.low)), policy.low).astype(np.float64)
        p = omega.apply(w, dtype=lo).astype(np.float64)
        scale = float(np.linalg.norm(p))
        r = pivoted_qr_lstsq(Sb[:, :j], p, dtype=policy.high_dtype)
        H[:j, j - 1] = r
        w = w - Q[:, :j] @ r
        z = omega.apply(w, dtype=lo).astype(np.float64)
        h = float(round_to(np.linalg.norm(z), policy.high))
        H[j, j - 1] = h
        if h <= happy_tol * scale:
            attained = j
            break
        Q[:, j] = w / h
        Sb[:, j] = z / h
    k = m if attained is None else attained
    cols = k + 1 if attained is None else k
    return Q[:, :cols].copy(), H[: k + 1, :k].copy(), beta, attained


def rgs_gmres(A, b, x0, m, omega, policy=None, happy_tol=None):
    """GMRES on the randomized Gram-Schmidt Arnoldi basis; same Hessenberg
    solve and history convention as rhqr_gmres."""
    policy = policy or DOUBLE_POLICY
    b = as_array(b)
    n = b.shape[0]
    x0 = np.zeros(n) if x0 is None else as_array(x0)
    Q, H, beta, attained = rgs_arnoldi(A, b, x0, m, omega, policy=policy,
                                       happy_tol=happy_tol)
    k = H.shape[1]
    y, resid, hist = hessenberg_lstsq(H, beta, history=True)
    if k and np.any(np.diagonal(H)[:k] == 0.0):
        warnings.warn("Hessenberg system is rank deficient; dependent "
                      "coordinates were zeroed", RuntimeWarning)
    if k == 0:
        return x0.copy(), hist
    return x0 + Q[:, :k] @ y, hist
