"""Matrix sources, Matrix Market files and report emission."""

import csv
import json
import logging
import math
from pathlib import Path

import jsonschema
import numpy as np
import scipy.io
import scipy.sparse

from .exceptions import ParseError, SchemaError, UnsupportedFormat

log = logging.getLogger(__name__)


# -- builtin gallery --------------------------------------------------------

def grcar(n, k=3):
    """Grcar matrix: ones on the diagonal and ``k`` superdiagonals, ``-1`` below."""
    if n < 1:
        raise ValueError("n must be positive")
    A = np.eye(n) - np.eye(n, k=-1)
    for j in range(1, k + 1):
        A += np.eye(n, k=j)
    return A


def example1():
    """A 5x5 complex test matrix with a well separated, nearly defective pair."""
    i = 1j
    return np.array([
        [0, 1 + i, 2 + i, 1 + 2 * i, 1],
        [-1, -1 - i, 1 - i, -i, 0],
        [1 - i, -1 - 2 * i, 1 + 2 * i, -2 * i, 0],
        [1 - 2 * i, 1 - i, -1 + 2 * i, -1 - i, 0],
        [1, -1 - i, 2 * i, -1 - i, -2 * i],
    ], dtype=complex)


def _json_dense(payload):
    data = json.loads(payload)
    if isinstance(data, dict):
        re = np.asarray(data["real"], dtype=float)
        im = np.asarray(data.get("imag", np.zeros_like(re)), dtype=float)
        A = re + 1j * im if np.any(im) else re
    else:
        rows = [[complex(*v) if isinstance(v, list) else v for v in row] for row in data]
        A = np.asarray(rows)
        if np.iscomplexobj(A) and not np.any(A.imag):
            A = A.real.copy()
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("JSON matrix must be square")
    return A.astype(complex if np.iscomplexobj(A) else float)


def load_matrix(source):
    """Resolve a matrix source string.

    Accepted forms are ``grcar:N``, ``example1``, ``json:<payload>``,
    ``real:<source>`` (real part of another source) and a path to a Matrix
    Market file.  JSON payloads are nested row lists, with complex entries
    written as ``[re, im]``, or an object with ``real`` and ``imag`` arrays.

    Returns
    -------
    A : (n, n) ndarray
    mask : (n, n) bool ndarray
        Sparsity pattern: stored entries for files, nonzeros otherwise.
    """
    if source.startswith("real:"):
        A, mask = load_matrix(source[5:])
        return A.real.copy(), mask
    if source.startswith("grcar:"):
        try:
            n = int(source[6:])
        except ValueError:
            raise ValueError(f"bad grcar size in {source!r}") from None
        A = grcar(n)
        return A, A != 0
    if source == "example1":
        A = example1()
        return A, A != 0
    if source.startswith("json:"):
        A = _json_dense(source[5:])
        return A, A != 0
    return read_matrix_market(source)


# -- Matrix Market ----------------------------------------------------------

_FIELDS = {"real", "complex", "integer"}
_SYMMETRY = {"general", "symmetric"}


def read_matrix_market(path):
    """Read a dense matrix and its stored-entry mask from a Matrix Market file.

    Coordinate and array formats with real, complex or integer fields and
    general or symmetric symmetry are supported.  Symmetric storage is
    expanded.  In array format every stored entry is explicit, so the mask
    keeps the nonzeros only.

    Raises
    ------
    ParseError
        Malformed header, size line or entry, with the line number.
    UnsupportedFormat
        Pattern fields, skew-symmetric or Hermitian storage.
    """
    path = Path(path)
    with path.open() as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError("empty file", 1)
    head = lines[0].split()
    if len(head) != 5 or head[0].lower() != "%%matrixmarket":
        raise ParseError("missing %%MatrixMarket header", 1)
    obj, fmt, fld, sym = (h.lower() for h in head[1:])
    if obj != "matrix" or fmt not in ("coordinate", "array"):
        raise ParseError(f"unknown object/format {obj} {fmt}", 1)
    if fld == "pattern" or sym in ("skew-symmetric", "hermitian"):
        raise UnsupportedFormat(f"{fld} {sym} files are not supported")
    if fld not in _FIELDS or sym not in _SYMMETRY:
        raise ParseError(f"unknown field/symmetry {fld} {sym}", 1)
    cplx = fld == "complex"
    width = 2 if cplx else 1

    body = ((i + 1, ln.split()) for i, ln in enumerate(lines[1:], start=1)
            if ln.strip() and not ln.lstrip().startswith("%"))
    try:
        lineno, size = next(body)
    except StopIteration:
        raise ParseError("missing size line", len(lines)) from None
    try:
        dims = [int(s) for s in size]
    except ValueError:
        raise ParseError("size line must contain integers", lineno) from None
    if len(dims) != (3 if fmt == "coordinate" else 2) or min(dims) < 0:
        raise ParseError("bad size line", lineno)
    m, n = dims[:2]
    if m != n:
        raise ParseError(f"matrix is {m}x{n}, not square", lineno)
    A = np.zeros((n, n), dtype=complex if cplx else float)
    mask = np.zeros((n, n), dtype=bool)

    def value(tok, ln):
        try:
            v = [float(t) for t in tok]
        except ValueError:
            raise ParseError(f"bad numeric value {' '.join(tok)!r}", ln) from None
        return complex(v[0], v[1]) if cplx else v[0]

    if fmt == "coordinate":
        nnz = dims[2]
        count = 0
        for ln, tok in body:
            if len(tok) != 2 + width:
                raise ParseError(f"expected {2 + width} fields, got {len(tok)}", ln)
            try:
                i, j = int(tok[0]) - 1, int(tok[1]) - 1
            except ValueError:
                raise ParseError("bad index", ln) from None
            if not (0 <= i < n and 0 <= j < n):
                raise ParseError(f"index ({i + 1}, {j + 1}) out of range", ln)
            if sym == "symmetric" and j > i:
                raise ParseError("symmetric file stores an upper entry", ln)
            v = value(tok[2:], ln)
            A[i, j] += v
            mask[i, j] = True
            if sym == "symmetric" and i != j:
                A[j, i] += v
                mask[j, i] = True
            count += 1
        if count != nnz:
            raise ParseError(f"expected {nnz} entries, found {count}", len(lines))
    else:
        cols = [(i, j) for j in range(n) for i in range(n)
                if sym == "general" or i >= j]
        pos = 0
        for ln, tok in body:
            if len(tok) != width:
                raise ParseError(f"expected {width} fields, got {len(tok)}", ln)
            if pos >= len(cols):
                raise ParseError("too many entries", ln)
            i, j = cols[pos]
            A[i, j] = value(tok, ln)
            if sym == "symmetric":
                A[j, i] = A[i, j]
            pos += 1
        if pos != len(cols):
            raise ParseError(f"expected {len(cols)} entries, found {pos}", len(lines))
        mask = A != 0
    return A, mask


def write_matrix_market(path, A, array=True):
    """Write ``A`` in Matrix Market format with 17 significant digits."""
    A = np.asarray(A)
    data = A if array else scipy.sparse.coo_matrix(A)
    scipy.io.mmwrite(str(path), data, precision=17)


# -- reports ----------------------------------------------------------------

REPORT_SCHEMA = {
    "type": "object",
    "required": ["mode", "delta", "tol", "eps_delta_star", "eps_zero_star", "gamma",
                 "coalescing_lambdas", "iterates", "diagnostics"],
    "properties": {
        "mode": {"enum": ["complex", "real", "pattern-complex", "pattern-real"]},
        "delta": {"type": "number", "minimum": 0},
        "tol": {"type": "number", "exclusiveMinimum": 0},
        "eps_delta_star": {"type": ["number", "null"]},
        "eps_zero_star": {"type": ["number", "null"]},
        "gamma": {"type": ["number", "null"]},
        "coalescing_lambdas": {
            "type": "array", "maxItems": 2,
            "items": {"type": "array", "items": {"type": "number"},
                      "minItems": 2, "maxItems": 2},
        },
        "iterates": {
            "type": "array", "minItems": 1,
            "items": {
                "type": "object",
                "required": ["k", "eps", "r", "used_bisection"],
                "properties": {
                    "k": {"type": "integer", "minimum": 0},
                    "eps": {"type": "number"},
                    "r": {"type": ["number", "null"]},
                    "used_bisection": {"type": "boolean"},
                },
            },
        },
        "diagnostics": {
            "type": "object",
            "required": ["rr_prime_ratio", "res_stationarity", "re_s_norm"],
            "properties": {k: {"type": ["number", "null"]}
                           for k in ("rr_prime_ratio", "res_stationarity", "re_s_norm")},
        },
    },
}


class _Float17(float):
    def __repr__(self):
        return f"{float(self):.17g}"


def _num(x):
    x = float(x)
    return _Float17(x) if math.isfinite(x) else None


def report_to_dict(report):
    """Plain-data form of a :class:`DistanceReport`."""
    diag = report.diagnostics or {}
    return {
        "mode": report.mode.name,
        "delta": _num(report.delta),
        "tol": _num(report.tol),
        "eps_delta_star": _num(report.eps_delta_star),
        "eps_zero_star": _num(report.eps_zero_star),
        "gamma": _num(report.gamma),
        "coalescing_lambdas": [[_num(z.real), _num(z.imag)]
                               for z in report.coalescing_lambdas],
        "iterates": [{"k": it.k, "eps": _num(it.epsilon),
                      "r": None if it.coalesced else _num(it.r),
                      "used_bisection": bool(it.used_bisection)}
                     for it in report.iterates],
        "diagnostics": {k: _num(diag.get(k, float("nan")))
                        for k in ("rr_prime_ratio", "res_stationarity", "re_s_norm")},
    }


def validate_report(data):
    """Check a report dict against :data:`REPORT_SCHEMA`.

    Raises
    ------
    SchemaError
    """
    try:
        jsonschema.validate(data, REPORT_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise SchemaError(f"invalid report: {exc.message}") from None


class _Encoder(json.JSONEncoder):
    # floats go through repr, which _Float17 overrides
    def iterencode(self, o, _one_shot=False):
        return json.encoder._make_iterencode(
            {}, self.default, json.encoder.encode_basestring, self.indent,
            lambda f: "null" if not math.isfinite(f) else repr(f),
            self.key_separator, self.item_separator, self.sort_keys,
            self.skipkeys, _one_shot)(o, 0)


def dumps_report(report):
    """Serialize to JSON text, 17 significant digits per float."""
    data = report_to_dict(report)
    validate_report(data)
    return json.dumps(data, indent=2, cls=_Encoder)


def write_report(report, path):
    """Validate and write ``report`` as JSON.

    Raises
    ------
    SchemaError
        If the report does not match the schema (e.g. no iterates).
    OSError
        With the offending path in the message.
    """
    text = dumps_report(report)
    try:
        Path(path).write_text(text + "\n")
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc.strerror}") from exc


def read_report(path):
    """Load and validate a JSON report."""
    data = json.loads(Path(path).read_text())
    validate_report(data)
    return data


def write_iterate_table(report, fh):
    """CSV with header ``k,eps,r``; coalesced evaluations have an empty ``r``."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["k", "eps", "r"])
    for k, eps, r in report.table():
        w.writerow([k, f"{eps:.17g}", "" if r is None else f"{r:.17g}"])


def pseudospectrum_grid(A, re_range, im_range, nx, ny):
    """``sigma_min(A - z I)`` on a rectangular grid.

    Returns
    -------
    list of (re, im, sigma_min)
    """
    A = np.asarray(A, dtype=complex)
    eye = np.eye(A.shape[0])
    out = []
    for im in np.linspace(*im_range, ny):
        for re in np.linspace(*re_range, nx):
            s = np.linalg.svd(A - complex(re, im) * eye, compute_uv=False)
            out.append((float(re), float(im), float(s[-1])))
    return out


def write_pseudospectrum_grid(rows, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["re", "im", "sigma_min"])
    for re, im, s in rows:
        w.writerow([f"{re:.17g}", f"{im:.17g}", f"{s:.17g}"])
