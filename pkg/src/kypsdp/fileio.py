"""JSON problem and report files.

Matrices are row-major nested lists. Floats are written with Python's
shortest round-trip representation, so ``load(save(x))`` reproduces every
entry bit for bit.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .errors import KypError
from .model import AffineMatrixFamily, KypProblem

SCHEMA_VERSION = "1"
FAMILIES = ("Q", "S", "R", "N")


class ProblemFileError(KypError):
    """Malformed problem or report file; ``location`` names the offending field."""

    def __init__(self, location: str, message: str):
        super().__init__(f"{location}: {message}")
        self.location = location


def _matrix(value, location: str, shape: Optional[tuple] = None) -> np.ndarray:
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise ProblemFileError(location, "expected a numeric matrix") from None
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2:
        raise ProblemFileError(location, f"expected a matrix, got {arr.ndim}-d data")
    if shape is not None and arr.shape != shape:
        raise ProblemFileError(location, f"expected shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ProblemFileError(location, "non-finite entry")
    return arr


def _vector(value, location: str, length: Optional[int] = None) -> np.ndarray:
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise ProblemFileError(location, "expected a numeric vector") from None
    arr = np.atleast_1d(arr)
    if arr.ndim != 1:
        raise ProblemFileError(location, "expected a vector")
    if length is not None and arr.shape[0] != length:
        raise ProblemFileError(location, f"expected length {length}, got {arr.shape[0]}")
    return arr


def _field(obj: dict, key: str, location: str):
    if not isinstance(obj, dict):
        raise ProblemFileError(location, "expected an object")
    if key not in obj:
        raise ProblemFileError(f"{location}.{key}" if location else key, "missing field")
    return obj[key]


def problem_from_dict(data: dict) -> tuple[KypProblem, Optional[np.ndarray], dict]:
    """Parse a decoded problem document.

    Returns
    -------
    prob : KypProblem
    initial_lambda : ndarray or None
    metadata : dict
    """
    if not isinstance(data, dict):
        raise ProblemFileError("<root>", "expected an object")
    version = _field(data, "schema_version", "")
    if str(version) != SCHEMA_VERSION:
        raise ProblemFileError("schema_version", f"unsupported version {version!r}")
    dims = _field(data, "dims", "")
    try:
        n, m, p, r = (int(_field(dims, k, "dims")) for k in ("n", "m", "p", "r"))
    except (TypeError, ValueError):
        raise ProblemFileError("dims", "dimensions must be integers") from None
    mats = _field(data, "matrices", "")
    A = _matrix(_field(mats, "A", "matrices"), "matrices.A", (n, n))
    B = _matrix(_field(mats, "B", "matrices"), "matrices.B", (n, m))
    c = _vector(_field(mats, "c", "matrices"), "matrices.c", p)
    Sigma = _matrix(_field(mats, "Sigma", "matrices"), "matrices.Sigma", (n, n))
    shapes = {"Q": (n, n), "S": (n, m), "R": (m, m), "N": (r, r)}
    fams_raw = _field(data, "families", "")
    fams = {}
    for name in FAMILIES:
        loc = f"families.{name}"
        raw = _field(fams_raw, name, "families")
        base = _matrix(_field(raw, "base", loc), f"{loc}.base", shapes[name])
        coeffs = _field(raw, "coeffs", loc)
        if not isinstance(coeffs, list) or len(coeffs) != p:
            raise ProblemFileError(f"{loc}.coeffs", f"expected a list of {p} matrices")
        cs = [_matrix(C, f"{loc}.coeffs[{i}]", shapes[name]) for i, C in enumerate(coeffs)]
        fams[name] = AffineMatrixFamily(base, cs, symmetric=bool(raw.get("symmetric", name != "S")))
    prob = KypProblem(A=A, B=B, c=c, Sigma=Sigma, **fams)
    lam0 = data.get("initial_lambda")
    lam0 = None if lam0 is None else _vector(lam0, "initial_lambda", p)
    return prob, lam0, dict(data.get("metadata") or {})


def problem_to_dict(prob: KypProblem, initial_lambda=None, metadata: Optional[dict] = None) -> dict:
    out: dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "dims": {"n": prob.n, "m": prob.m, "p": prob.p, "r": prob.r},
        "matrices": {"A": prob.A.tolist(), "B": prob.B.tolist(), "c": prob.c.tolist(),
                     "Sigma": prob.Sigma.tolist()},
        "families": {},
    }
    for name, fam in prob.families().items():
        out["families"][name] = {"base": fam.base.tolist(),
                                 "coeffs": [C.tolist() for C in fam.coeffs],
                                 "symmetric": fam.symmetric}
    if initial_lambda is not None:
        out["initial_lambda"] = np.asarray(initial_lambda, dtype=float).tolist()
    if metadata:
        out["metadata"] = metadata
    return out


def loads_problem(text: str):
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFileError(f"line {exc.lineno}, column {exc.colno}", exc.msg) from None
    return problem_from_dict(data)


def load_problem(path):
    """Read a problem file; see :func:`problem_from_dict` for the return value."""
    return loads_problem(Path(path).read_text())


def dumps_problem(prob: KypProblem, initial_lambda=None, metadata: Optional[dict] = None) -> str:
    return json.dumps(problem_to_dict(prob, initial_lambda, metadata), indent=1)


def save_problem(path, prob: KypProblem, initial_lambda=None, metadata: Optional[dict] = None):
    Path(path).write_text(dumps_problem(prob, initial_lambda, metadata) + "\n")


def _finite_or_none(x):
    """JSON has no NaN or infinity; those become ``null``."""
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.ndarray):
        return _finite_or_none(x.tolist())
    if isinstance(x, (list, tuple)):
        return [_finite_or_none(v) for v in x]
    if isinstance(x, dict):
        return {k: _finite_or_none(v) for k, v in x.items()}
    if isinstance(x, (np.integer, np.bool_)):
        return x.item()
    return x


def report_to_dict(report, config=None, extra: Optional[dict] = None) -> dict:
    """Report document for a :class:`~kypsdp.barrier.SolveReport`."""
    out = {
        "schema_version": SCHEMA_VERSION,
        "status": report.status,
        "message": report.message,
        "lambda_opt": report.lambda_opt,
        "objective": report.objective,
        "P_plus": report.P_plus_opt,
        "counters": {
            "newton_iters": report.newton_iters_total,
            "riccati_solves": report.riccati_solves,
            "lyapunov_solves": report.lyapunov_solves,
            "gradient_fallbacks": report.gradient_fallbacks,
        },
        "t_final": report.t_final,
        "decrement_final": report.decrement_final,
        "timings": {
            "newton_seconds": report.newton_seconds,
            "step_seconds": report.step_seconds,
            "secs_per_iter": report.secs_per_iter,
            "stages": [asdict(s) for s in report.history],
        },
    }
    if config is not None:
        out["config"] = asdict(config)
    if extra:
        out.update(extra)
    return _finite_or_none(out)


def save_report(path, doc: dict):
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def load_report(path) -> dict:
    """Read a report; ``lambda_opt`` and ``P_plus`` come back as arrays."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ProblemFileError(f"line {exc.lineno}, column {exc.colno}", exc.msg) from None
    for key in ("lambda_opt", "P_plus"):
        if doc.get(key) is not None:
            doc[key] = np.array(doc[key], dtype=float)
    return doc
