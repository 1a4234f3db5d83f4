"""Finite-alphabet probability containers and information measures.

All measures are in bits.  Mass below ``ZERO_MASS`` never enters a logarithm,
so ``0 log 0 = 0`` holds exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .errors import ValidationError, DomainError

NORM_TOL = 1e-9
ZERO_MASS = 1e-15

AxisSpec = Union[int, str, Sequence[Union[int, str]]]


def _check_mass(arr: np.ndarray, what: str) -> np.ndarray:
    arr = np.asarray(arr, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{what}: non-finite entry")
    if np.any(arr < 0):
        idx = tuple(int(i) for i in np.argwhere(arr < 0)[0])
        raise ValidationError(f"{what}: negative entry {arr[idx]!r} at index {idx}")
    total = float(arr.sum())
    if abs(total - 1.0) > NORM_TOL:
        raise ValidationError(f"{what}: entries sum to {total!r}, expected 1 within {NORM_TOL}")
    if total != 1.0:
        arr = arr / total
    return arr


@dataclass(frozen=True)
class Pmf:
    """A pmf over a positionally indexed alphabet."""

    probs: np.ndarray

    def __post_init__(self):
        probs = _check_mass(np.ravel(self.probs), "pmf")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    def __len__(self):
        return len(self.probs)


@dataclass(frozen=True)
class JointPmf:
    """Joint pmf stored as a dense table with one named axis per variable."""

    table: np.ndarray
    axes: tuple = None

    def __post_init__(self):
        table = _check_mass(self.table, "joint pmf")
        axes = self.axes
        if axes is None:
            axes = tuple(f"a{i}" for i in range(table.ndim))
        axes = tuple(axes)
        if len(axes) != table.ndim:
            raise ValidationError(f"joint pmf: {len(axes)} axis labels for a {table.ndim}-d table")
        if len(set(axes)) != len(axes):
            raise ValidationError(f"joint pmf: duplicate axis labels {axes}")
        table.setflags(write=False)
        object.__setattr__(self, "table", table)
        object.__setattr__(self, "axes", axes)

    @property
    def ndim(self) -> int:
        return self.table.ndim

    def axis_index(self, axes: AxisSpec) -> tuple:
        if isinstance(axes, (int, np.integer, str)):
            axes = (axes,)
        out = []
        for a in axes:
            if isinstance(a, str):
                if a not in self.axes:
                    raise ValidationError(f"unknown axis {a!r}; have {self.axes}")
                out.append(self.axes.index(a))
            else:
                a = int(a)
                if not -self.ndim <= a < self.ndim:
                    raise ValidationError(f"axis {a} out of range for {self.ndim}-d joint")
                out.append(a % self.ndim)
        if len(set(out)) != len(out):
            raise ValidationError(f"repeated axis in {axes}")
        return tuple(out)

    def marginal(self, axes: AxisSpec) -> "JointPmf":
        keep = self.axis_index(axes)
        drop = tuple(i for i in range(self.ndim) if i not in keep)
        t = self.table.sum(axis=drop) if drop else self.table
        # sum() keeps remaining axes in original order; reorder to the request
        order = sorted(keep)
        t = np.transpose(t, [order.index(k) for k in keep])
        return JointPmf(t, tuple(self.axes[k] for k in keep))


def _h(arr) -> float:
    """Entropy in bits of an (already validated) mass array of any shape."""
    p = np.asarray(arr, dtype=float).ravel()
    p = p[p > ZERO_MASS]
    return float(-np.sum(p * np.log2(p)))


def entropy(p) -> float:
    """Shannon entropy H(p) in bits."""
    if not isinstance(p, Pmf):
        p = Pmf(np.asarray(p, dtype=float))
    return _h(p.probs)


def binary_entropy(p: float) -> float:
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"binary entropy needs p in [0, 1], got {p!r}")
    return _h([p, 1.0 - p])


def _marg_h(joint: JointPmf, axes: tuple) -> float:
    if not axes:
        return 0.0
    drop = tuple(i for i in range(joint.ndim) if i not in axes)
    return _h(joint.table.sum(axis=drop) if drop else joint.table)


def _disjoint(joint: JointPmf, *specs) -> list:
    sets = [joint.axis_index(s) if s is not None and s != () else () for s in specs]
    seen = set()
    for s in sets:
        if seen & set(s):
            raise ValidationError(f"axis sets overlap: {specs}")
        seen |= set(s)
    return sets


def cond_entropy(joint: JointPmf, target: AxisSpec, given: AxisSpec = ()) -> float:
    """H(target | given) = H(target, given) - H(given)."""
    a, b = _disjoint(joint, target, given)
    if not a:
        raise ValidationError("empty target axis set")
    return _marg_h(joint, a + b) - _marg_h(joint, b)


def mutual_info(joint: JointPmf, axes_a: AxisSpec, axes_b: AxisSpec) -> float:
    a, b = _disjoint(joint, axes_a, axes_b)
    if not a or not b:
        raise ValidationError("mutual information needs two non-empty axis sets")
    return _marg_h(joint, a) + _marg_h(joint, b) - _marg_h(joint, a + b)


def cond_mutual_info(joint: JointPmf, axes_a: AxisSpec, axes_b: AxisSpec, axes_c: AxisSpec) -> float:
    """I(A;B|C) = H(A,C) + H(B,C) - H(A,B,C) - H(C)."""
    a, b, c = _disjoint(joint, axes_a, axes_b, axes_c)
    if not a or not b:
        raise ValidationError("conditional mutual information needs non-empty A and B")
    return _marg_h(joint, a + c) + _marg_h(joint, b + c) - _marg_h(joint, a + b + c) - _marg_h(joint, c)


def total_correlation(joint: JointPmf, axes: AxisSpec = None) -> float:
    """Sum of single-axis entropies minus the joint entropy of those axes."""
    idx = tuple(range(joint.ndim)) if axes is None else joint.axis_index(axes)
    if len(idx) < 2:
        raise ValidationError("total correlation needs at least two component axes")
    return sum(_marg_h(joint, (i,)) for i in idx) - _marg_h(joint, idx)


def conditional_total_correlation(joint: JointPmf, v_axis: AxisSpec, component_axes: AxisSpec = None) -> float:
    """Total correlation of the component axes given the ``v_axis`` variable(s)."""
    v = joint.axis_index(v_axis)
    if component_axes is None:
        comps = tuple(i for i in range(joint.ndim) if i not in v)
    else:
        comps, v = _disjoint(joint, component_axes, v_axis)
    if len(comps) < 2:
        raise ValidationError("conditional total correlation needs at least two component axes")
    hv = _marg_h(joint, v)
    return sum(_marg_h(joint, (i,) + v) - hv for i in comps) - (_marg_h(joint, comps + v) - hv)


# --------------------------------------------------------------------------
# problem containers


def _symbols(seq, what) -> tuple:
    seq = tuple(seq)
    if not seq:
        raise ValidationError(f"{what}: empty alphabet")
    if len(set(seq)) != len(seq):
        raise ValidationError(f"{what}: duplicate symbols")
    return seq


@dataclass(frozen=True)
class CachingProblem:
    """A joint source p(x, y) with one or two request functions f(x, y).

    ``f_tables[l][i][j]`` is the output symbol of function ``l`` at
    ``(x_alphabet[i], y_alphabet[j])``.  Output alphabets are taken from
    ``s_alphabets`` when given, else derived in order of first appearance
    (row-major scan).
    """

    x_alphabet: tuple
    y_alphabet: tuple
    p_xy: np.ndarray
    f_tables: tuple
    s_alphabets: tuple = None
    f_index: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        xs = _symbols(self.x_alphabet, "x alphabet")
        ys = _symbols(self.y_alphabet, "y alphabet")
        p = np.asarray(self.p_xy, dtype=float)
        if p.shape != (len(xs), len(ys)):
            raise ValidationError(f"p_xy has shape {p.shape}, expected {(len(xs), len(ys))}")
        p = _check_mass(p, "p_xy")
        p.setflags(write=False)
        tables = tuple(self.f_tables)
        if len(tables) not in (1, 2):
            raise ValidationError(f"expected one or two request functions, got {len(tables)}")
        given = self.s_alphabets
        if given is not None and len(given) != len(tables):
            raise ValidationError("one output alphabet per request function required")
        s_alph, f_idx, f_out = [], [], []
        for l, tab in enumerate(tables):
            rows = [list(r) for r in tab]
            if len(rows) != len(xs) or any(len(r) != len(ys) for r in rows):
                raise ValidationError(f"f{l + 1} table must be {len(xs)}x{len(ys)}")
            if given is not None and given[l] is not None:
                alph = _symbols(given[l], f"output alphabet {l + 1}")
            else:
                alph = tuple(dict.fromkeys(s for r in rows for s in r))
            lookup = {s: k for k, s in enumerate(alph)}
            idx = np.empty((len(xs), len(ys)), dtype=np.intp)
            for i, r in enumerate(rows):
                for j, s in enumerate(r):
                    if s not in lookup:
                        raise ValidationError(
                            f"f{l + 1}(x={xs[i]!r}, y={ys[j]!r}) = {s!r} is not in the output alphabet {alph}")
                    idx[i, j] = lookup[s]
            idx.setflags(write=False)
            s_alph.append(alph)
            f_idx.append(idx)
            f_out.append(tuple(tuple(r) for r in rows))
        object.__setattr__(self, "x_alphabet", xs)
        object.__setattr__(self, "y_alphabet", ys)
        object.__setattr__(self, "p_xy", p)
        object.__setattr__(self, "f_tables", tuple(f_out))
        object.__setattr__(self, "s_alphabets", tuple(s_alph))
        object.__setattr__(self, "f_index", tuple(f_idx))

    @property
    def n_functions(self) -> int:
        return len(self.f_tables)

    @property
    def joint(self) -> JointPmf:
        return JointPmf(self.p_xy, ("x", "y"))

    @property
    def p_x(self) -> np.ndarray:
        return self.p_xy.sum(axis=1)

    @property
    def p_y(self) -> np.ndarray:
        return self.p_xy.sum(axis=0)

    def is_independent(self, tol: float = NORM_TOL) -> bool:
        return bool(np.max(np.abs(self.p_xy - np.outer(self.p_x, self.p_y))) <= tol)


@dataclass(frozen=True)
class TestChannel:
    """Conditional pmf p(v|x): one row per x symbol, one column per v symbol."""

    __test__ = False  # not a pytest class

    matrix: np.ndarray
    v_alphabet: tuple = None

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[1] < 1:
            raise ValidationError(f"channel matrix must be 2-d with at least one column, got shape {m.shape}")
        if not np.all(np.isfinite(m)) or np.any(m < 0):
            raise ValidationError("channel has negative or non-finite entries")
        sums = m.sum(axis=1)
        bad = np.flatnonzero(np.abs(sums - 1.0) > NORM_TOL)
        if bad.size:
            raise ValidationError(f"channel row {int(bad[0])} sums to {sums[bad[0]]!r}")
        m = m / sums[:, None]
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        v = self.v_alphabet
        if v is None:
            v = tuple(range(m.shape[1]))
        v = _symbols(v, "v alphabet")
        if len(v) != m.shape[1]:
            raise ValidationError(f"{len(v)} v symbols for {m.shape[1]} channel columns")
        object.__setattr__(self, "v_alphabet", v)

    @property
    def v_card(self) -> int:
        return self.matrix.shape[1]

    @classmethod
    def identity(cls, n: int) -> "TestChannel":
        return cls(np.eye(n))

    @classmethod
    def constant(cls, n: int, v_card: int = 1) -> "TestChannel":
        m = np.zeros((n, v_card))
        m[:, 0] = 1.0
        return cls(m)


def induced_joint(problem: CachingProblem, channel: TestChannel) -> JointPmf:
    """p(x, y, v, s1[, s2]) = p(x, y) p(v|x) 1{s_l = f_l(x, y)}."""
    w = channel.matrix
    nx, ny = problem.p_xy.shape
    if w.shape[0] != nx:
        raise ValidationError(f"channel has {w.shape[0]} rows, problem has {nx} x symbols")
    t = problem.p_xy[:, :, None] * w[:, None, :]
    axes = ["x", "y", "v"]
    for l, (idx, alph) in enumerate(zip(problem.f_index, problem.s_alphabets)):
        ind = np.zeros((nx, ny, len(alph)))
        ind[np.arange(nx)[:, None], np.arange(ny)[None, :], idx] = 1.0
        t = t[..., None] * ind.reshape((nx, ny) + (1,) * (t.ndim - 2) + (len(alph),))
        axes.append(f"s{l + 1}")
    return JointPmf(t, tuple(axes))
