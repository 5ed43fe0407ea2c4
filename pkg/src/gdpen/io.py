"""Reading and writing matrices, vectors and penalty specifications."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse


def _has_header(path):
    with open(path) as fh:
        first = fh.readline().strip()
    if not first:
        return False
    try:
        [float(tok) for tok in first.replace(",", " ").split()]
    except ValueError:
        return True
    return False


def load_matrix(path) -> np.ndarray:
    """Dense matrix from CSV (optional header row) or Matrix Market (.mtx)."""
    path = Path(path)
    if path.suffix.lower() == ".mtx":
        M = scipy.io.mmread(str(path))
        if scipy.sparse.issparse(M):
            M = M.toarray()
        return np.asarray(M, dtype=float)
    skip = 1 if _has_header(path) else 0
    M = np.loadtxt(path, delimiter=",", skiprows=skip, ndmin=2)
    return np.asarray(M, dtype=float)


def load_vector(path) -> np.ndarray:
    M = load_matrix(path)
    if M.shape[0] == 1 or M.shape[1] == 1:
        return M.ravel()
    raise ValueError(f"{path}: expected a single row or column, got shape {M.shape}")


def save_matrix(path, M, symmetric=False):
    """Write CSV, or Matrix Market coordinate format when the suffix is .mtx."""
    path = Path(path)
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if path.suffix.lower() == ".mtx":
        sym = "symmetric" if symmetric else "general"
        scipy.io.mmwrite(str(path), scipy.sparse.coo_matrix(M), symmetry=sym, precision=17)
        return
    np.savetxt(path, M, delimiter=",", fmt="%.17g")


def save_vector(path, v):
    np.savetxt(path, np.asarray(v, dtype=float).reshape(-1, 1), delimiter=",", fmt="%.17g")


def load_json(path):
    with open(path) as fh:
        return json.load(fh)


def dump_json(obj, path):
    """Deterministic JSON (sorted keys, fixed indentation, trailing newline)."""
    text = json.dumps(to_jsonable(obj), indent=2, sort_keys=True, allow_nan=True)
    Path(path).write_text(text + "\n")


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if np.isnan(x):
            return "nan"
        if np.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    return obj


def from_json_float(x):
    if isinstance(x, str):
        return float(x)
    return x
