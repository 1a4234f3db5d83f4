"""JSON problem/certificate files and CSV boundary output."""
from __future__ import annotations

import csv
import io
import json
import math
import os
from pathlib import Path
from typing import Union

import numpy as np

from . import probcore
from .errors import ValidationError
from .multiuser import CcAuxiliary, GwAuxiliary, SsrAuxiliary
from .probcore import CachingProblem, TestChannel
from .staticmodel import IndependentSourceSpec

BOUNDARY_HEADER = ("curve_id", "r_c", "r_u", "gamma", "converged", "witness_id")

# diagnostic codes
E_IO = "E_IO"
E_SYNTAX = "E_SYNTAX"
E_MISSING = "E_MISSING_FIELD"
E_SHAPE = "E_SHAPE"
E_NORM = "E_NORMALIZATION"
E_VALUE = "E_VALUE"
E_OUTPUT = "E_OUTPUT_ALPHABET"


class FileFormatError(ValidationError):
    """Problem or certificate file rejected; ``code`` names the failure class."""

    def __init__(self, code: str, message: str):
        super().__init__(f"[{code}] {message}")
        self.code = code


def _read_json(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise FileFormatError(E_IO, f"cannot read {path}: {e.strerror or e}") from e
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise FileFormatError(E_SYNTAX, f"{path}: line {e.lineno} column {e.colno}: {e.msg}") from e
    if not isinstance(doc, dict):
        raise FileFormatError(E_SYNTAX, f"{path}: top level must be an object")
    return doc


def _field(doc, name):
    if name not in doc:
        raise FileFormatError(E_MISSING, f"missing field '{name}'")
    return doc[name]


def _num(v, where):
    """Numbers may be JSON numbers or decimal strings."""
    if isinstance(v, bool):
        raise FileFormatError(E_VALUE, f"{where}: expected a number, got {v!r}")
    try:
        out = float(v)
    except (TypeError, ValueError):
        raise FileFormatError(E_VALUE, f"{where}: expected a number, got {v!r}") from None
    if not math.isfinite(out) or out < 0:
        raise FileFormatError(E_VALUE, f"{where}: probability must be finite and >= 0, got {v!r}")
    return out


def _vector(doc, name, n):
    v = _field(doc, name)
    if not isinstance(v, list) or len(v) != n:
        raise FileFormatError(E_SHAPE, f"'{name}' must be a list of length {n}")
    return np.array([_num(a, f"{name}[{i}]") for i, a in enumerate(v)])


def _matrix(doc, name, rows, cols, numeric=True):
    m = _field(doc, name)
    if not isinstance(m, list) or len(m) != rows:
        raise FileFormatError(E_SHAPE, f"'{name}' must have {rows} rows, got {len(m) if isinstance(m, list) else 'non-list'}")
    for i, r in enumerate(m):
        if not isinstance(r, list) or len(r) != cols:
            raise FileFormatError(E_SHAPE, f"'{name}' row {i} must have {cols} entries")
    if not numeric:
        return [list(r) for r in m]
    return np.array([[_num(a, f"{name}[{i}][{j}]") for j, a in enumerate(r)] for i, r in enumerate(m)])


def _check_sum(arr, name):
    s = float(arr.sum())
    if abs(s - 1.0) > probcore.NORM_TOL:
        raise FileFormatError(E_NORM, f"'{name}' sums to {s!r}, expected 1")


def _alphabet(doc, name):
    a = _field(doc, name)
    if not isinstance(a, list) or not a:
        raise FileFormatError(E_SHAPE, f"'{name}' must be a non-empty list")
    if len(set(map(_key, a))) != len(a):
        raise FileFormatError(E_VALUE, f"'{name}' has repeated symbols")
    return tuple(a)


def _key(s):
    return json.dumps(s, sort_keys=True)


def _ftable(doc, name, salph_name, xs, ys):
    f = _matrix(doc, name, len(xs), len(ys), numeric=False)
    salph = tuple(doc[salph_name]) if salph_name in doc else None
    if salph is not None:
        allowed = set(map(_key, salph))
        for i, row in enumerate(f):
            for j, s in enumerate(row):
                if _key(s) not in allowed:
                    raise FileFormatError(
                        E_OUTPUT, f"'{name}' entry at (x={xs[i]!r}, y={ys[j]!r}) is {s!r}, not in '{salph_name}'")
    return f, salph


def problem_from_dict(doc: dict) -> Union[CachingProblem, IndependentSourceSpec]:
    xs = _alphabet(doc, "x")
    ys = _alphabet(doc, "y")
    f1, s1 = _ftable(doc, "f", "s", xs, ys)
    fs, ss = [f1], [s1]
    if "f2" in doc:
        f2, s2 = _ftable(doc, "f2", "s2", xs, ys)
        fs.append(f2)
        ss.append(s2)
    if "p_xy" in doc:
        p = _matrix(doc, "p_xy", len(xs), len(ys))
        _check_sum(p, "p_xy")
        indep = None
    elif "p_x" in doc or "p_y" in doc:
        px = _vector(doc, "p_x", len(xs))
        py = _vector(doc, "p_y", len(ys))
        _check_sum(px, "p_x")
        _check_sum(py, "p_y")
        p = np.outer(px, py)
        indep = (px, py)
    else:
        raise FileFormatError(E_MISSING, "missing field 'p_xy' (or 'p_x' with 'p_y')")
    if indep is not None and len(fs) == 1:
        return IndependentSourceSpec(indep[0], indep[1], f1, xs, ys)
    s_alph = None if any(s is None for s in ss) else tuple(ss)
    return CachingProblem(xs, ys, p, tuple(fs), s_alph)


def parse_problem(path) -> Union[CachingProblem, IndependentSourceSpec]:
    """Read a problem file; independent sources given as p_x + p_y with one f become an IndependentSourceSpec."""
    return problem_from_dict(_read_json(path))


def load_problem(path) -> CachingProblem:
    """Like :func:`parse_problem` but always returns a CachingProblem."""
    p = parse_problem(path)
    return p.to_problem() if isinstance(p, IndependentSourceSpec) else p


def _plain(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, tuple):
        return [_plain(a) for a in v]
    return v


def problem_to_dict(problem: Union[CachingProblem, IndependentSourceSpec]) -> dict:
    if isinstance(problem, IndependentSourceSpec):
        return {"x": _plain(problem.x_alphabet), "y": _plain(problem.y_alphabet),
                "p_x": [float(v) for v in problem.p_x], "p_y": [float(v) for v in problem.p_y],
                "f": [[_plain(s) for s in r] for r in problem.f_table]}
    doc = {"x": _plain(problem.x_alphabet), "y": _plain(problem.y_alphabet),
           "p_xy": [[float(v) for v in r] for r in problem.p_xy]}
    for l, (idx, alph) in enumerate(zip(problem.f_index, problem.s_alphabets)):
        suffix = "" if l == 0 else str(l + 1)
        doc["f" + suffix] = [[_plain(alph[k]) for k in r] for r in idx]
        doc["s" + suffix] = _plain(alph)
    return doc


def _dumps(doc: dict) -> str:
    """JSON with one top-level field per line and one matrix row per line."""
    parts = []
    for k, v in doc.items():
        if isinstance(v, list) and v and isinstance(v[0], list):
            rows = ",\n    ".join(json.dumps(r) for r in v)
            parts.append(f"  {json.dumps(k)}: [\n    {rows}\n  ]")
        else:
            parts.append(f"  {json.dumps(k)}: {json.dumps(v)}")
    return "{\n" + ",\n".join(parts) + "\n}\n"


def emit_problem(problem, path=None) -> str:
    text = _dumps(problem_to_dict(problem))
    if path is not None:
        Path(path).write_text(text)
    return text


# --------------------------------------------------------------------------
# certificates


def channel_to_dict(channel: TestChannel) -> dict:
    v = channel.v_alphabet if channel.v_alphabet is not None else tuple(range(channel.v_card))
    return {"v": _plain(tuple(v)), "p_v_given_x": [[float(a) for a in r] for r in channel.matrix]}


def _cond_table(doc, name, shape):
    t = _field(doc, name)
    try:
        arr = np.array(t, dtype=float)
    except (TypeError, ValueError):
        raise FileFormatError(E_VALUE, f"'{name}' must be a numeric array") from None
    if arr.shape != tuple(shape):
        raise FileFormatError(E_SHAPE, f"'{name}' has shape {arr.shape}, expected {tuple(shape)}")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise FileFormatError(E_VALUE, f"'{name}' has a negative or non-finite entry")
    sums = arr.sum(axis=-1)
    off = np.argwhere(np.abs(sums - 1.0) > probcore.NORM_TOL)
    if off.size:
        idx = tuple(int(i) for i in off[0])
        raise FileFormatError(E_NORM, f"'{name}' slice {idx} sums to {float(sums[idx])!r}")
    return arr


def certificate_from_dict(doc: dict, problem: CachingProblem):
    """Return a TestChannel, or a two-user auxiliary when ``kind`` is given."""
    nx = len(problem.x_alphabet)
    ny = len(problem.y_alphabet)
    kind = doc.get("kind", "single")
    if kind == "single":
        v = _alphabet(doc, "v")
        return TestChannel(_cond_table(doc, "p_v_given_x", (nx, len(v))), v)
    if kind == "pu_gw":
        nvc, n1, n2 = (len(_alphabet(doc, k)) for k in ("vc", "v1", "v2"))
        return GwAuxiliary(TestChannel(_cond_table(doc, "p_vc_given_x", (nx, nvc))),
                           _cond_table(doc, "p_v1_given_vc_x", (nvc, nx, n1)),
                           _cond_table(doc, "p_v2_given_vc_x", (nvc, nx, n2)))
    if kind == "cc_gw":
        nvc, nu = (len(_alphabet(doc, k)) for k in ("vc", "vu"))
        return CcAuxiliary(TestChannel(_cond_table(doc, "p_vc_given_x", (nx, nvc))),
                           _cond_table(doc, "p_vu_given_vc_x_y", (nvc, nx, ny, nu)))
    if kind == "ssr":
        nvc, n2 = (len(_alphabet(doc, k)) for k in ("vc", "v2"))
        arr = _cond_table(doc, "p_vc_v2_given_x", (nx, nvc, n2))
        sums = arr.reshape(nx, -1).sum(axis=1)
        bad = np.flatnonzero(np.abs(sums - 1.0) > probcore.NORM_TOL)
        if bad.size:
            raise FileFormatError(E_NORM, f"'p_vc_v2_given_x' slice x={int(bad[0])} sums to {float(sums[bad[0]])!r}")
        return SsrAuxiliary(arr)
    raise FileFormatError(E_VALUE, f"unknown certificate kind {kind!r}")


def parse_certificate(path, problem: CachingProblem):
    return certificate_from_dict(_read_json(path), problem)


def aux_to_dict(aux) -> dict:
    if isinstance(aux, TestChannel):
        return channel_to_dict(aux)
    if isinstance(aux, GwAuxiliary):
        w = aux.p_vc_given_x.matrix
        return {"kind": "pu_gw", "vc": list(range(w.shape[1])), "v1": list(range(aux.p_v1_given_vc_x.shape[-1])),
                "v2": list(range(aux.p_v2_given_vc_x.shape[-1])), "p_vc_given_x": w.tolist(),
                "p_v1_given_vc_x": aux.p_v1_given_vc_x.tolist(), "p_v2_given_vc_x": aux.p_v2_given_vc_x.tolist()}
    if isinstance(aux, CcAuxiliary):
        w = aux.p_vc_given_x.matrix
        return {"kind": "cc_gw", "vc": list(range(w.shape[1])), "vu": list(range(aux.p_vu_given_vc_x_y.shape[-1])),
                "p_vc_given_x": w.tolist(), "p_vu_given_vc_x_y": aux.p_vu_given_vc_x_y.tolist()}
    if isinstance(aux, SsrAuxiliary):
        t = aux.p_vc_v2_given_x
        return {"kind": "ssr", "vc": list(range(t.shape[1])), "v2": list(range(t.shape[2])),
                "p_vc_v2_given_x": t.tolist()}
    raise ValidationError(f"cannot serialize {type(aux).__name__}")


def write_certificate(aux, path):
    Path(path).write_text(_dumps(aux_to_dict(aux)))


# --------------------------------------------------------------------------
# boundary CSV


def _fmt(v):
    if v is None or v == "":
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def boundary_csv(rows) -> str:
    """rows: dicts or tuples in header order."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BOUNDARY_HEADER)
    for r in rows:
        if isinstance(r, dict):
            r = [r.get(k) for k in BOUNDARY_HEADER]
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def write_text_atomic(path, text: str):
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def read_boundary(path):
    """Parse a boundary CSV into a list of dicts with typed numeric fields."""
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        if tuple(rd.fieldnames or ()) != BOUNDARY_HEADER:
            raise FileFormatError(E_SYNTAX, f"{path}: header {rd.fieldnames} != {list(BOUNDARY_HEADER)}")
        out = []
        for row in rd:
            out.append({
                "curve_id": row["curve_id"],
                "r_c": float(row["r_c"]),
                "r_u": float(row["r_u"]),
                "gamma": float(row["gamma"]) if row["gamma"] else None,
                "converged": row["converged"] == "1",
                "witness_id": row["witness_id"],
            })
    return out
