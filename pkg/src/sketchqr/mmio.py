"""Matrix Market reading and writing, real field only.

Coordinate files come back as scipy CSC (symmetric storage expanded), array
files as Fortran-ordered dense matrices.  The writer emits 17 significant
digits so a write/read round trip reproduces doubles bit for bit.
"""

import numpy as np
import scipy.sparse

BANNER = "%%MatrixMarket"


class MatrixMarketError(ValueError):
    """Malformed Matrix Market content; the message names the line."""


def _fail(lineno, msg):
    raise MatrixMarketError(f"line {lineno}: {msg}")


def _parse_banner(line):
    parts = line.split()
    if len(parts) != 5 or parts[0].lower() != BANNER.lower():
        _fail(1, f"expected '{BANNER} matrix FORMAT FIELD SYMMETRY' banner")
    obj, fmt, field, sym = (p.lower() for p in parts[1:])
    if obj != "matrix":
        _fail(1, f"unsupported object {obj!r}")
    if fmt not in ("coordinate", "array"):
        _fail(1, f"unsupported format {fmt!r}")
    if field != "real":
        _fail(1, f"only the real field is supported, got {field!r}")
    if sym not in ("general", "symmetric"):
        _fail(1, f"unsupported symmetry {sym!r}")
    return fmt, sym


def _ints(lineno, line, count, what):
    parts = line.split()
    if len(parts) != count:
        _fail(lineno, f"{what} needs {count} integers, got {line.strip()!r}")
    try:
        vals = [int(p) for p in parts]
    except ValueError:
        _fail(lineno, f"{what} needs integers, got {line.strip()!r}")
    if any(v < 0 for v in vals):
        _fail(lineno, f"{what} must be nonnegative")
    return vals


def load_matrix_market(path):
    """Parse a Matrix Market file.

    Returns a scipy CSC matrix for coordinate files and a dense float64
    array (column-major) for array files.  Raises MatrixMarketError with
    the offending line number on malformed input.
    """
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        _fail(1, "empty file")
    fmt, sym = _parse_banner(lines[0])
    body = [(i + 1, ln) for i, ln in enumerate(lines)
            if i > 0 and ln.strip() and not ln.lstrip().startswith("%")]
    if not body:
        _fail(len(lines), "missing size line")
    (szline, sz), entries = body[0], body[1:]
    if fmt == "coordinate":
        nr, nc, nnz = _ints(szline, sz, 3, "coordinate size line")
        if sym == "symmetric" and nr != nc:
            _fail(szline, f"symmetric matrix must be square, got {nr}x{nc}")
        if len(entries) != nnz:
            _fail(szline, f"declared {nnz} entries, file holds {len(entries)}")
        rows = np.empty(nnz, dtype=np.int64)
        cols = np.empty(nnz, dtype=np.int64)
        vals = np.empty(nnz)
        for k, (lineno, ln) in enumerate(entries):
            parts = ln.split()
            if len(parts) != 3:
                _fail(lineno, f"entry needs 'i j value', got {ln.strip()!r}")
            try:
                i, j = int(parts[0]), int(parts[1])
                v = float(parts[2])
            except ValueError:
                _fail(lineno, f"cannot parse entry {ln.strip()!r}")
            if not 1 <= i <= nr:
                _fail(lineno, f"row index {i} outside 1..{nr}")
            if not 1 <= j <= nc:
                _fail(lineno, f"column index {j} outside 1..{nc}")
            if sym == "symmetric" and i < j:
                _fail(lineno, "symmetric storage keeps only the lower triangle")
            rows[k], cols[k], vals[k] = i - 1, j - 1, v
        A = scipy.sparse.coo_matrix((vals, (rows, cols)), shape=(nr, nc))
        if sym == "symmetric":
            off = rows != cols
            mirror = scipy.sparse.coo_matrix(
                (vals[off], (cols[off], rows[off])), shape=(nr, nc))
            A = A + mirror
        return A.tocsc()
    nr, nc = _ints(szline, sz, 2, "array size line")
    if sym == "symmetric":
        if nr != nc:
            _fail(szline, f"symmetric matrix must be square, got {nr}x{nc}")
        want = nr * (nr + 1) // 2
    else:
        want = nr * nc
    if len(entries) != want:
        _fail(szline, f"array body needs {want} values, file holds {len(entries)}")
    vals = np.empty(want)
    for k, (lineno, ln) in enumerate(entries):
        parts = ln.split()
        if len(parts) != 1:
            _fail(lineno, f"array entries hold one value per line, got {ln.strip()!r}")
        try:
            vals[k] = float(parts[0])
        except ValueError:
            _fail(lineno, f"cannot parse value {ln.strip()!r}")
    M = np.zeros((nr, nc), order="F")
    if sym == "symmetric":
        k = 0
        for j in range(nc):
            for i in range(j, nr):
                M[i, j] = vals[k]
                M[j, i] = vals[k]
                k += 1
    else:
        M[:] = vals.reshape((nr, nc), order="F")
    return M


def write_matrix_market(path, M, comment=None):
    """Write M as 'real general': coordinate format for sparse input, array
    format (column-major) for dense.  Values printed with %.17g."""
    with open(path, "w") as fh:
        if scipy.sparse.issparse(M):
            C = M.tocoo()
            fh.write(f"{BANNER} matrix coordinate real general\n")
            if comment:
                for ln in str(comment).splitlines():
                    fh.write(f"% {ln}\n")
            fh.write(f"{C.shape[0]} {C.shape[1]} {C.nnz}\n")
            for i, j, v in zip(C.row, C.col, C.data):
                fh.write(f"{i + 1} {j + 1} {v:.17g}\n")
        else:
            A = np.asarray(M, dtype=np.float64)
            if A.ndim == 1:
                A = A[:, None]
            if A.ndim != 2:
                raise ValueError("expected a vector or matrix")
            fh.write(f"{BANNER} matrix array real general\n")
            if comment:
                for ln in str(comment).splitlines():
                    fh.write(f"% {ln}\n")
            fh.write(f"{A.shape[0]} {A.shape[1]}\n")
            for j in range(A.shape[1]):
                for i in range(A.shape[0]):
                    fh.write(f"{A[i, j]:.17g}\n")
