"""Sketching operators: Gaussian, subsampled Hadamard, sparse sign.

Every operator exposes `apply(X, dtype)` where dtype is the arithmetic
precision of the application; returned arrays are float64 carrying values
representable in that dtype.  The subsampled transform is never
materialized, only its signs and coordinate subset are stored.

Half-precision model: the FWHT runs its butterfly passes natively in
float16 (numpy float16 ops are correctly rounded), while the matmul-based
operators (gaussian, sparse sign) accumulate in float32 and round the
result to float16 once, which is how half-precision hardware behaves.
"""

import numpy as np
import scipy.sparse

from .linalg import as_array, orthogonality_error, to_dtype
from .precision import DOUBLE_POLICY


def fwht(x):
    """Normalized fast Walsh-Hadamard transform along axis 0.

    x has 2**p rows; columns are transformed independently.  Arithmetic runs
    in x's own dtype; the 2**(-p/2) normalization is a single multiply after
    the butterfly passes.
    """
    a = np.asarray(x)
    n = a.shape[0]
    if n == 0 or n & (n - 1):
        raise ValueError(f"length {n} is not a power of two")
    vec = a.ndim == 1
    a = a.reshape(n, -1).copy()
    k = a.shape[1]
    h = 1
    while h < n:
        b = a.reshape(-1, 2, h, k)
        top = b[:, 0] + b[:, 1]
        bot = b[:, 0] - b[:, 1]
        a = np.stack((top, bot), axis=1).reshape(n, k)
        h *= 2
    a = a * a.dtype.type(n ** -0.5)
    return a[:, 0] if vec else a


def _columns(X, n):
    X = as_array(X)
    vec = X.ndim == 1
    if vec:
        X = X[:, None]
    if X.shape[0] != n:
        raise ValueError(f"operand has {X.shape[0]} rows, operator expects {n}")
    return X, vec


class SketchOperator:
    """Base class: seeded linear map R^n -> R^ell applied column by column."""

    kind = None

    def __init__(self, ell, n, seed):
        if ell < 1 or n < 1:
            raise ValueError(f"invalid sketch dimensions {ell} x {n}")
        self.ell = int(ell)
        self.n = int(n)
        self.seed = int(seed)

    @property
    def shape(self):
        return (self.ell, self.n)

    def apply(self, X, dtype=np.float64):
        X, vec = _columns(X, self.n)
        Y = self._apply(X, np.dtype(dtype))
        Y = Y.astype(np.float64)
        return Y[:, 0] if vec else Y

    def _apply(self, X, dtype):
        raise NotImplementedError


class GaussianSketch(SketchOperator):
    """Dense N(0, 1/ell) operator.

    Rows are generated from per-row-keyed Philox streams so the same (seed,
    ell, n) always yields the same matrix no matter how the application is
    chunked.  Matrices up to _CACHE_ENTRIES entries are kept; larger ones are
    regenerated in row blocks on each apply.
    """

    kind = "gauss"
    _CACHE_ENTRIES = 1 << 23

    def __init__(self, ell, n, seed):
        super().__init__(ell, n, seed)
        self._cache = {}
        if ell * n <= self._CACHE_ENTRIES:
            self._cache[np.dtype(np.float64)] = self._rows(0, ell)

    def _rows(self, i0, i1):
        G = np.empty((i1 - i0, self.n))
        c = self.ell ** -0.5
        for i in range(i0, i1):
            g = np.random.Generator(np.random.Philox(key=[self.seed, i]))
            G[i - i0] = g.standard_normal(self.n)
        G *= c
        return G

    def _apply(self, X, dtype):
        cached = self._cache.get(np.dtype(np.float64))
        adtype = np.float32 if dtype == np.float16 else dtype
        if cached is not None:
            G = self._cache.get(dtype)
            if G is None:
                G = cached if cached.dtype == adtype else cached.astype(adtype)
                self._cache[dtype] = G
            Y = G @ to_dtype(X, adtype)
        else:
            Y = np.empty((self.ell, X.shape[1]), dtype=adtype)
            Xa = X.astype(adtype)
            step = max(1, self._CACHE_ENTRIES // self.n)
            for i0 in range(0, self.ell, step):
                i1 = min(i0 + step, self.ell)
                Y[i0:i1] = self._rows(i0, i1).astype(adtype) @ Xa
        return Y.astype(dtype)


class SRHTSketch(SketchOperator):
    """Subsampled randomized Hadamard transform with zero padding.

    Input length n is padded to the next power of two n_pad; the operator is
    sqrt(n_pad/ell) * (row subset) * H * diag(signs) on the padded vector.
    Memory is O(n_pad + ell): signs and the sampled coordinates only.
    Application order is fixed: scale, sign flips, pad, transform, gather.
    """

    kind = "srht"

    def __init__(self, ell, n, seed):
        super().__init__(ell, n, seed)
        self.n_pad = 1 << (n - 1).bit_length()
        if ell > self.n_pad:
            raise ValueError(f"ell={ell} exceeds padded length {self.n_pad}")
        rng = np.random.Generator(np.random.Philox(key=[seed, (1 << 40) + 1]))
        self.signs = (rng.integers(0, 2, self.n_pad) * 2 - 1).astype(np.float64)
        self.indices = rng.permutation(self.n_pad)[: self.ell].copy()
        self.scale = float(np.sqrt(self.n_pad / self.ell))

    def _apply(self, X, dtype):
        c = dtype.type(self.scale)
        work = np.zeros((self.n_pad, X.shape[1]), dtype=dtype)
        work[: self.n] = X.astype(dtype) * c
        work[: self.n] *= self.signs[: self.n, None].astype(dtype)
        work = fwht(work)
        return work[self.indices]


class SparseSignSketch(SketchOperator):
    """Each input coordinate hits exactly s distinct output rows with +-1/sqrt(s)."""

    kind = "sparse_sign"

    def __init__(self, ell, n, seed, s=8):
        super().__init__(ell, n, seed)
        if not 1 <= s <= ell:
            raise ValueError(f"nonzeros per column s={s} must lie in [1, ell={ell}]")
        self.s = int(s)
        rng = np.random.Generator(np.random.Philox(key=[seed, (1 << 40) + 2]))
        rows = np.empty((s, n), dtype=np.int64)
        for j in range(n):
            rows[:, j] = rng.choice(ell, size=s, replace=False)
        vals = (rng.integers(0, 2, (s, n)) * 2 - 1) / np.sqrt(s)
        self.rows = rows
        self.vals = vals
        cols = np.repeat(np.arange(n), s)
        self._matrix = scipy.sparse.csc_array(
            (vals.T.ravel(), (rows.T.ravel(), cols)), shape=(ell, n)
        )

    def _apply(self, X, dtype):
        adtype = np.float32 if dtype == np.float16 else dtype
        Y = self._matrix.astype(adtype) @ X.astype(adtype)
        return Y.astype(dtype)


class IdentitySketch(SketchOperator):
    """ell = n pass-through; the exact-embedding oracle for tests."""

    kind = "identity"

    def __init__(self, n):
        super().__init__(n, n, 0)

    def _apply(self, X, dtype):
        return X.astype(dtype)


class MatrixSketch(SketchOperator):
    """An explicit ell x n matrix used through the operator interface."""

    kind = "matrix"

    def __init__(self, matrix):
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2:
            raise ValueError("sketch matrix must be two dimensional")
        super().__init__(matrix.shape[0], matrix.shape[1], 0)
        self.matrix = matrix

    def _apply(self, X, dtype):
        adtype = np.float32 if dtype == np.float16 else dtype
        Y = self.matrix.astype(adtype) @ X.astype(adtype)
        return Y.astype(dtype)


class ColumnScaledSketch(SketchOperator):
    """Wraps an operator so its m leading input coordinates are rescaled first.

    Used to give the wrapped operator exactly unit-norm leading column
    sketches; `unit_column_sketches` caches those ell x m sketched columns.
    """

    kind = "colscaled"

    def __init__(self, base, scales, m, unit_column_sketches):
        super().__init__(base.ell, base.n, base.seed)
        self.base = base
        self.m = int(m)
        self.scales = np.asarray(scales, dtype=np.float64)
        self.unit_column_sketches = unit_column_sketches

    def _apply(self, X, dtype):
        Xs = X.astype(dtype) * self.scales[:, None].astype(dtype)
        Y = self.base.apply(Xs, dtype=dtype)
        return Y.astype(dtype)


class EmbeddedSketch:
    """[I_m ; Omega]: keeps m leading coordinates exactly, sketches the rest.

    Output dimension is m + omega.ell; input dimension m + omega.n.  The top
    block is a bitwise copy in any precision.
    """

    def __init__(self, m, omega):
        self.m = int(m)
        self.omega = omega
        self.n = self.m + omega.n
        self.out_dim = self.m + omega.ell

    @property
    def shape(self):
        return (self.out_dim, self.n)

    def apply(self, X, dtype=np.float64):
        X, vec = _columns(X, self.n)
        top = X[: self.m].copy()
        bottom = self.omega.apply(X[self.m:], dtype=dtype)
        Y = np.concatenate([top, bottom], axis=0)
        return Y[:, 0] if vec else Y


def make_sketch(kind, ell, n, seed, s=8):
    """Factory for the CLI's operator names."""
    if kind in ("gauss", "gaussian"):
        return GaussianSketch(ell, n, seed)
    if kind == "srht":
        return SRHTSketch(ell, n, seed)
    if kind in ("sparse", "sparse_sign"):
        return SparseSignSketch(ell, n, seed, s=s)
    raise ValueError(f"unknown sketch kind {kind!r}")


def apply_sketch(omega, X, policy=None):
    """Apply an ell x n operator in the low precision of the policy."""
    policy = policy or DOUBLE_POLICY
    return omega.apply(X, dtype=policy.low_dtype)


def apply_psi(psi, X, policy=None):
    """Apply an embedded [I; Omega] operator in the low precision of the policy."""
    policy = policy or DOUBLE_POLICY
    return psi.apply(X, dtype=policy.low_dtype)


def check_embedding(op, Q, orth_tol=1e-12):
    """Empirical embedding quality of op on the subspace spanned by Q.

    Q must have float64-orthonormal columns (orthogonality error <= orth_tol);
    returns max(sigma_max - 1, 1 - sigma_min) of the sketched basis.
    """
    Q = as_array(Q)
    err = orthogonality_error(Q)
    if err > orth_tol:
        raise ValueError(f"basis is not orthonormal: ||Q^tQ - I|| = {err:.3e}")
    Y = op.apply(Q)
    sv = np.linalg.svd(Y, compute_uv=False)
    return float(max(sv[0] - 1.0, 1.0 - sv[-1]))
