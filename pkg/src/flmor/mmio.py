"""Matrix Market reading/writing and block manifests.

Only the subset of the format needed for real system data is supported:
``coordinate`` and ``array`` layouts with ``real`` / ``integer`` / ``pattern``
fields and ``general`` / ``symmetric`` / ``skew-symmetric`` qualifiers.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np
import scipy.sparse as sp


class MatrixMarketError(ValueError):
    """Malformed Matrix Market input; message carries file and line."""

    def __init__(self, path, lineno, msg):
        super().__init__(f"{path}:{lineno}: {msg}")
        self.path = str(path)
        self.lineno = lineno


_FIELDS = ("real", "integer", "pattern", "double")
_SYMMETRIES = ("general", "symmetric", "skew-symmetric")


def mmread(path):
    """Read a Matrix Market file.

    Returns a ``scipy.sparse.csc_matrix`` for coordinate files and a dense
    ``ndarray`` for array files.
    """
    path = Path(path)
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise MatrixMarketError(path, 1, "empty file")
    header = lines[0].split()
    if len(header) != 5 or header[0].lower() != "%%matrixmarket" or header[1].lower() != "matrix":
        raise MatrixMarketError(path, 1, "missing '%%MatrixMarket matrix' banner")
    layout, field, symmetry = (h.lower() for h in header[2:])
    if layout not in ("coordinate", "array"):
        raise MatrixMarketError(path, 1, f"unsupported layout {layout!r}")
    if field not in _FIELDS:
        raise MatrixMarketError(path, 1, f"unsupported field {field!r}")
    if symmetry not in _SYMMETRIES:
        raise MatrixMarketError(path, 1, f"unsupported symmetry {symmetry!r}")
    if layout == "array" and field == "pattern":
        raise MatrixMarketError(path, 1, "pattern field is invalid for array layout")

    body = [(i + 1, ln) for i, ln in enumerate(lines) if i > 0 and ln.strip() and not ln.lstrip().startswith("%")]
    if not body:
        raise MatrixMarketError(path, len(lines), "missing size line")
    size_lineno, size_line = body[0]
    try:
        dims = [int(t) for t in size_line.split()]
    except ValueError:
        raise MatrixMarketError(path, size_lineno, f"bad size line {size_line!r}") from None
    entries = body[1:]

    if layout == "coordinate":
        if len(dims) != 3:
            raise MatrixMarketError(path, size_lineno, "coordinate size line needs 'rows cols nnz'")
        nrows, ncols, nnz = dims
        if len(entries) != nnz:
            lineno = entries[-1][0] if entries else size_lineno
            raise MatrixMarketError(path, lineno, f"expected {nnz} entries, found {len(entries)}")
        rows = np.empty(nnz, dtype=np.int64)
        cols = np.empty(nnz, dtype=np.int64)
        vals = np.ones(nnz)
        want = 2 if field == "pattern" else 3
        for k, (lineno, ln) in enumerate(entries):
            tok = ln.split()
            if len(tok) != want:
                raise MatrixMarketError(path, lineno, f"expected {want} tokens, got {len(tok)}")
            try:
                i, j = int(tok[0]), int(tok[1])
                if want == 3:
                    vals[k] = float(tok[2])
            except ValueError:
                raise MatrixMarketError(path, lineno, f"unparsable entry {ln.strip()!r}") from None
            if not (1 <= i <= nrows and 1 <= j <= ncols):
                raise MatrixMarketError(path, lineno, f"index ({i}, {j}) outside {nrows}x{ncols}")
            rows[k], cols[k] = i - 1, j - 1
        if symmetry != "general":
            off = rows != cols
            sign = -1.0 if symmetry == "skew-symmetric" else 1.0
            rows, cols, vals = (
                np.concatenate([rows, cols[off]]),
                np.concatenate([cols, rows[off]]),
                np.concatenate([vals, sign * vals[off]]),
            )
        return sp.csc_matrix((vals, (rows, cols)), shape=(nrows, ncols))

    if len(dims) != 2:
        raise MatrixMarketError(path, size_lineno, "array size line needs 'rows cols'")
    nrows, ncols = dims
    if symmetry == "general":
        expected = nrows * ncols
    elif symmetry == "symmetric":
        expected = nrows * (nrows + 1) // 2
    else:
        expected = nrows * (nrows - 1) // 2
    values = []
    for lineno, ln in entries:
        for tok in ln.split():
            try:
                values.append(float(tok))
            except ValueError:
                raise MatrixMarketError(path, lineno, f"unparsable value {tok!r}") from None
    if len(values) != expected:
        lineno = entries[-1][0] if entries else size_lineno
        raise MatrixMarketError(path, lineno, f"expected {expected} values, found {len(values)}")
    if symmetry == "general":
        return np.array(values).reshape((ncols, nrows)).T.copy()
    out = np.zeros((nrows, ncols))
    it = iter(values)
    sign = -1.0 if symmetry == "skew-symmetric" else 1.0
    for j in range(ncols):
        start = j if symmetry == "symmetric" else j + 1
        for i in range(start, nrows):
            v = next(it)
            out[i, j] = v
            out[j, i] = sign * v if i != j else v
    return out


def _fmt(x):
    return repr(float(x))


def mmwrite(path, mat, comment=None):
    """Write ``mat`` (sparse -> coordinate, dense -> array) with round-trip precision."""
    path = Path(path)
    lines = []
    if sp.issparse(mat):
        coo = sp.coo_matrix(mat)
        coo.sum_duplicates()
        order = np.lexsort((coo.row, coo.col))
        lines.append("%%MatrixMarket matrix coordinate real general")
        if comment:
            lines.extend("% " + c for c in comment.splitlines())
        lines.append(f"{coo.shape[0]} {coo.shape[1]} {coo.nnz}")
        for k in order:
            lines.append(f"{coo.row[k] + 1} {coo.col[k] + 1} {_fmt(coo.data[k])}")
    else:
        arr = np.atleast_2d(np.asarray(mat, dtype=float))
        lines.append("%%MatrixMarket matrix array real general")
        if comment:
            lines.extend("% " + c for c in comment.splitlines())
        lines.append(f"{arr.shape[0]} {arr.shape[1]}")
        lines.extend(_fmt(v) for v in arr.T.ravel())
    path.write_text("\n".join(lines) + "\n")


def read_manifest(path):
    """Parse a ``role = file`` manifest; relative paths resolve against its folder."""
    path = Path(path)
    base = path.parent
    out = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise MatrixMarketError(path, lineno, f"expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key == "kind":
            out[key] = value
        else:
            out[key] = str(base / value) if not os.path.isabs(value) else value
    return out


def write_manifest(path, entries):
    path = Path(path)
    lines = [f"{k} = {v}" for k, v in entries.items()]
    path.write_text("\n".join(lines) + "\n")
