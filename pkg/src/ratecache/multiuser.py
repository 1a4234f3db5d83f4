"""Corner-point evaluators for the two-user regions with single-letter forms.

Three scenarios are covered: the Gray-Wyner system aided by private updates
(``pu_gw``), the Gray-Wyner system aided by a common cache (``cc_gw``), and
sequential successive refinement (``ssr``).  Each evaluator takes explicit
auxiliary tables (a certificate) and returns the rate bounds they achieve.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from . import probcore
from .errors import ArityError, ValidationError
from .probcore import CachingProblem, JointPmf, TestChannel
from .singleuser import RatePoint

MAX_SEARCH_X = 4


class CardinalityWarning(UserWarning):
    """An auxiliary alphabet exceeds the size that is known to suffice."""


@dataclass(frozen=True)
class TwoUserRates:
    """Named rates in bits; fields left as None are not part of the scenario."""

    r_c12: Optional[float] = None
    r_c1: Optional[float] = None
    r_c2: Optional[float] = None
    r_c12_plus_c2: Optional[float] = None
    r_u12: Optional[float] = None
    r_u1: Optional[float] = None
    r_u2: Optional[float] = None
    r_u12_plus_u2: Optional[float] = None

    def __post_init__(self):
        for fl in fields(self):
            v = getattr(self, fl.name)
            if v is None:
                continue
            if v < -1e-9:
                raise ValidationError(f"{fl.name} = {v!r} is negative")
            object.__setattr__(self, fl.name, max(float(v), 0.0))

    def as_dict(self) -> dict:
        return {fl.name: getattr(self, fl.name) for fl in fields(self) if getattr(self, fl.name) is not None}

    def as_tuple(self) -> tuple:
        return tuple(self.as_dict().values())


def _conditional(table, n_cond: int, what: str) -> np.ndarray:
    """Validate that every slice over the trailing axes is a pmf; renormalize."""
    t = np.array(table, dtype=float)
    if t.ndim <= n_cond:
        raise ValidationError(f"{what}: expected more than {n_cond} axes, got shape {t.shape}")
    if not np.all(np.isfinite(t)) or np.any(t < 0):
        bad = tuple(int(i) for i in np.argwhere(~np.isfinite(t) | (t < 0))[0])
        raise ValidationError(f"{what}: invalid entry at index {bad}")
    sums = t.reshape(t.shape[:n_cond] + (-1,)).sum(axis=-1)
    off = np.abs(sums - 1.0) > probcore.NORM_TOL
    if np.any(off):
        idx = tuple(int(i) for i in np.argwhere(off)[0])
        raise ValidationError(f"{what}: slice {idx} sums to {sums[idx]!r}")
    return t / sums.reshape(sums.shape + (1,) * (t.ndim - n_cond))


def _warn_card(name, size, bound):
    if size > bound:
        warnings.warn(f"|{name}| = {size} exceeds the sufficient cardinality {bound}", CardinalityWarning, stacklevel=3)


@dataclass(frozen=True)
class GwAuxiliary:
    """p(vc|x), p(v1|vc,x), p(v2|vc,x) with table shapes (X,Vc), (Vc,X,V1), (Vc,X,V2)."""

    p_vc_given_x: TestChannel
    p_v1_given_vc_x: np.ndarray
    p_v2_given_vc_x: np.ndarray

    def __post_init__(self):
        ch = self.p_vc_given_x if isinstance(self.p_vc_given_x, TestChannel) else TestChannel(self.p_vc_given_x)
        object.__setattr__(self, "p_vc_given_x", ch)
        nx, nvc = ch.matrix.shape
        for name in ("p_v1_given_vc_x", "p_v2_given_vc_x"):
            t = _conditional(getattr(self, name), 2, name)
            if t.shape[:2] != (nvc, nx):
                raise ValidationError(f"{name}: leading shape {t.shape[:2]} != (|Vc|, |X|) = {(nvc, nx)}")
            object.__setattr__(self, name, t)

    def tensor(self) -> np.ndarray:
        """p(vc, v1, v2 | x) as an array [x, vc, v1, v2]."""
        w = self.p_vc_given_x.matrix
        a = np.swapaxes(self.p_v1_given_vc_x, 0, 1)
        b = np.swapaxes(self.p_v2_given_vc_x, 0, 1)
        return w[:, :, None, None] * a[:, :, :, None] * b[:, :, None, :]


@dataclass(frozen=True)
class CcAuxiliary:
    """p(vc|x) and p(vu|vc,x,y), the latter with shape (Vc, X, Y, Vu)."""

    p_vc_given_x: TestChannel
    p_vu_given_vc_x_y: np.ndarray

    def __post_init__(self):
        ch = self.p_vc_given_x if isinstance(self.p_vc_given_x, TestChannel) else TestChannel(self.p_vc_given_x)
        object.__setattr__(self, "p_vc_given_x", ch)
        nx, nvc = ch.matrix.shape
        t = _conditional(self.p_vu_given_vc_x_y, 3, "p_vu_given_vc_x_y")
        if t.shape[:2] != (nvc, nx):
            raise ValidationError(f"p_vu_given_vc_x_y: leading shape {t.shape[:2]} != (|Vc|, |X|) = {(nvc, nx)}")
        object.__setattr__(self, "p_vu_given_vc_x_y", t)

    def tensor(self) -> np.ndarray:
        """p(vc, vu | x, y) as an array [x, y, vc, vu]."""
        w = self.p_vc_given_x.matrix
        u = np.transpose(self.p_vu_given_vc_x_y, (1, 2, 0, 3))
        return w[:, None, :, None] * u


@dataclass(frozen=True)
class SsrAuxiliary:
    """p(vc, v2 | x) with shape (X, Vc, V2)."""

    p_vc_v2_given_x: np.ndarray

    def __post_init__(self):
        t = _conditional(self.p_vc_v2_given_x, 1, "p_vc_v2_given_x")
        if t.ndim != 3:
            raise ValidationError(f"p_vc_v2_given_x must have 3 axes, got shape {t.shape}")
        object.__setattr__(self, "p_vc_v2_given_x", t)


def _require_two(problem: CachingProblem):
    if problem.n_functions != 2:
        raise ArityError(f"two-user regions need two request functions, got {problem.n_functions}")


def _joint(problem: CachingProblem, aux: np.ndarray, aux_axes, depends_on_y: bool) -> JointPmf:
    """p(x, y, aux..., s1, s2) for an auxiliary tensor indexed [x, (y,) aux...]."""
    nx, ny = problem.p_xy.shape
    if aux.shape[0] != nx or (depends_on_y and aux.shape[1] != ny):
        raise ValidationError(f"auxiliary shape {aux.shape} does not match |X|={nx}, |Y|={ny}")
    if not depends_on_y:
        aux = aux[:, None, ...]
    t = problem.p_xy.reshape((nx, ny) + (1,) * (aux.ndim - 2)) * aux
    for idx, alph in zip(problem.f_index, problem.s_alphabets):
        ind = np.zeros((nx, ny, len(alph)))
        ind[np.arange(nx)[:, None], np.arange(ny)[None, :], idx] = 1.0
        t = t[..., None] * ind.reshape((nx, ny) + (1,) * (t.ndim - 2) + (len(alph),))
    return JointPmf(t, ("x", "y") + tuple(aux_axes) + ("s1", "s2"))


def pu_gw_corner(problem: CachingProblem, aux: GwAuxiliary) -> TwoUserRates:
    """(r_c12, r_c1, r_c2, r_u1, r_u2) for the Gray-Wyner system aided by private updates."""
    _require_two(problem)
    nx = len(problem.x_alphabet)
    nvc = aux.p_vc_given_x.v_card
    _warn_card("Vc", nvc, nx + 4)
    _warn_card("V1", aux.p_v1_given_vc_x.shape[-1], nvc * nx + 1)
    _warn_card("V2", aux.p_v2_given_vc_x.shape[-1], nvc * nx + 1)
    j = _joint(problem, aux.tensor(), ("vc", "v1", "v2"), False)
    cmi, ce = probcore.cond_mutual_info, probcore.cond_entropy
    return TwoUserRates(
        r_c12=cmi(j, "x", "vc", "y"),
        r_c1=cmi(j, "x", "v1", ("vc", "y")),
        r_c2=cmi(j, "x", "v2", ("vc", "y")),
        r_u1=ce(j, "s1", ("vc", "v1", "y")),
        r_u2=ce(j, "s2", ("vc", "v2", "y")),
    )


def cc_gw_corner(problem: CachingProblem, aux: CcAuxiliary) -> TwoUserRates:
    """(r_c12, r_u12, r_u1, r_u2) for the Gray-Wyner system aided by a common cache."""
    _require_two(problem)
    nx, ny = problem.p_xy.shape
    nvc = aux.p_vc_given_x.v_card
    _warn_card("Vc", nvc, nx + 3)
    _warn_card("Vu", aux.p_vu_given_vc_x_y.shape[-1], nvc * nx * ny + 2)
    j = _joint(problem, aux.tensor(), ("vc", "vu"), True)
    cmi, ce = probcore.cond_mutual_info, probcore.cond_entropy
    return TwoUserRates(
        r_c12=cmi(j, "x", "vc", "y"),
        r_u12=cmi(j, "x", "vu", ("vc", "y")),
        r_u1=ce(j, "s1", ("vc", "vu", "y")),
        r_u2=ce(j, "s2", ("vc", "vu", "y")),
    )


def ssr_corner(problem: CachingProblem, aux: SsrAuxiliary) -> TwoUserRates:
    """Four bounds of sequential successive refinement.

    Returns r_c12, r_c12_plus_c2 (bound on R_c12 + R_c2), r_u12 and
    r_u12_plus_u2 (bound on R_u12 + R_u2).
    """
    _require_two(problem)
    nx = len(problem.x_alphabet)
    _, nvc, nv2 = aux.p_vc_v2_given_x.shape
    _warn_card("Vc", nvc, nx + 3)
    _warn_card("V2", nv2, nvc * nx + 1)
    j = _joint(problem, aux.p_vc_v2_given_x, ("vc", "v2"), False)
    cmi, ce = probcore.cond_mutual_info, probcore.cond_entropy
    base_c = cmi(j, "x", "vc", "y")
    base_u = ce(j, "s1", ("vc", "y"))
    return TwoUserRates(
        r_c12=base_c,
        r_c12_plus_c2=base_c + max(cmi(j, "x", "v2", ("s1", "vc", "y")), 0.0),
        r_u12=base_u,
        r_u12_plus_u2=base_u + ce(j, "s2", ("v2", "s1", "vc", "y")),
    )


def erasure_auxiliary(nx: int, p: float, nvc: int = 1) -> SsrAuxiliary:
    """V_c constant, V_2 = X with probability p and an erasure symbol otherwise.

    V_2 alphabet: index 0 is the erasure, index i+1 reveals x = i.  For a
    binary X this is V_2 = (X*Q, Q) with Q ~ Bern(p) up to relabeling.
    """
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"p must lie in [0, 1], got {p!r}")
    t = np.zeros((nx, nvc, nx + 1))
    t[:, :, 0] = (1.0 - p) / nvc
    for i in range(nx):
        t[i, :, i + 1] = p / nvc
    return SsrAuxiliary(t)


def ssr_example2_boundary(r: float) -> RatePoint:
    """(r_c2, r_u12) = (r/2, 1/2 + (1 - r)^+ / 2) on the request-gated instance."""
    if r < 0:
        raise ValidationError(f"r must be >= 0, got {r!r}")
    return RatePoint(r / 2.0, 0.5 + 0.5 * max(1.0 - r, 0.0))


# --------------------------------------------------------------------------
# exploratory search


@dataclass
class CornerSearchResult:
    rates: TwoUserRates
    objective: float
    aux: object


def _random_conditional(rng, lead, size):
    return rng.dirichlet(np.ones(size), size=lead)


def search_corner(problem: CachingProblem, scenario: str, weights: dict, n_restarts: int = 64,
                  seed: int = 0, v_cards: Optional[dict] = None) -> CornerSearchResult:
    """Minimize sum(weights[name] * rate) over random auxiliary tables.

    Pure random restarts on tiny instances; meant for exploration, not as a
    frontier solver.  ``v_cards`` overrides alphabet sizes (default |X|+1).
    """
    _require_two(problem)
    nx, ny = problem.p_xy.shape
    if nx > MAX_SEARCH_X:
        raise ValidationError(f"search is limited to |X| <= {MAX_SEARCH_X}, got {nx}")
    card = {"vc": nx + 1, "v1": nx + 1, "v2": nx + 1, "vu": nx + 1}
    card.update(v_cards or {})
    best = None
    for r in range(n_restarts):
        rng = np.random.default_rng(np.random.SeedSequence([seed, r]))
        if scenario == "pu_gw":
            aux = GwAuxiliary(TestChannel(_random_conditional(rng, nx, card["vc"])),
                              _random_conditional(rng, (card["vc"], nx), card["v1"]),
                              _random_conditional(rng, (card["vc"], nx), card["v2"]))
            rates = pu_gw_corner(problem, aux)
        elif scenario == "cc_gw":
            aux = CcAuxiliary(TestChannel(_random_conditional(rng, nx, card["vc"])),
                              _random_conditional(rng, (card["vc"], nx, ny), card["vu"]))
            rates = cc_gw_corner(problem, aux)
        elif scenario == "ssr":
            flat = _random_conditional(rng, nx, card["vc"] * card["v2"])
            aux = SsrAuxiliary(flat.reshape(nx, card["vc"], card["v2"]))
            rates = ssr_corner(problem, aux)
        else:
            raise ValidationError(f"unknown scenario {scenario!r}")
        d = rates.as_dict()
        missing = set(weights) - set(d)
        if missing:
            raise ValidationError(f"weights name rates not in scenario {scenario!r}: {sorted(missing)}")
        obj = float(sum(w * d[k] for k, w in weights.items()))
        if best is None or obj < best.objective:
            best = CornerSearchResult(rates, obj, aux)
    return best
