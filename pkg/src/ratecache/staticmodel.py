"""Static-request caching: rate profiles, compound and adaptive formulations.

Here a request is fixed over a whole block, so the update rate may depend on
the request.  The source X is independent of the request Y throughout.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linprog

from . import probcore
from .errors import ArityError, DomainError, ValidationError
from .probcore import CachingProblem, Pmf, TestChannel
from .singleuser import LOG_FLOOR, RatePoint, _simplex_grid

LP_SLACK = 1e-9
THETA_MIN = 1e-12


@dataclass(frozen=True)
class StaticRateProfile:
    r_c: float
    r_u_by_request: tuple

    def __post_init__(self):
        vals = (self.r_c,) + tuple(self.r_u_by_request)
        if any(v < -1e-9 for v in vals):
            raise ValidationError(f"rates must be nonnegative, got {vals}")
        object.__setattr__(self, "r_c", max(float(self.r_c), 0.0))
        object.__setattr__(self, "r_u_by_request", tuple(max(float(v), 0.0) for v in self.r_u_by_request))

    @property
    def worst_case(self) -> float:
        return max(self.r_u_by_request)


@dataclass(frozen=True)
class IndependentSourceSpec:
    """p_x over X, p_y over requests, and f_table[x][y] output symbols."""

    p_x: np.ndarray
    p_y: np.ndarray
    f_table: tuple
    x_alphabet: Optional[tuple] = None
    y_alphabet: Optional[tuple] = None
    f_index: np.ndarray = field(init=False, repr=False, compare=False)
    n_outputs: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        px = Pmf(np.asarray(self.p_x, dtype=float)).probs
        py = Pmf(np.asarray(self.p_y, dtype=float)).probs
        object.__setattr__(self, "p_x", px)
        object.__setattr__(self, "p_y", py)
        if self.x_alphabet is None:
            object.__setattr__(self, "x_alphabet", tuple(range(len(px))))
        if self.y_alphabet is None:
            object.__setattr__(self, "y_alphabet", tuple(range(1, len(py) + 1)))
        rows = tuple(tuple(r) for r in self.f_table)
        if len(rows) != len(px) or any(len(r) != len(py) for r in rows):
            raise ValidationError(f"f_table must be {len(px)}x{len(py)}")
        object.__setattr__(self, "f_table", rows)
        symbols = {}
        idx = np.array([[symbols.setdefault(s, len(symbols)) for s in r] for r in rows], dtype=np.intp)
        object.__setattr__(self, "f_index", idx)
        object.__setattr__(self, "n_outputs", len(symbols))

    @classmethod
    def from_problem(cls, problem: CachingProblem, tol: float = probcore.NORM_TOL) -> "IndependentSourceSpec":
        if problem.n_functions != 1:
            raise ArityError("the static model takes a single request function")
        if not problem.is_independent(tol):
            dev = float(np.max(np.abs(problem.p_xy - np.outer(problem.p_x, problem.p_y))))
            raise ValidationError(f"static model needs X independent of Y; max |p(x,y) - p(x)p(y)| = {dev:.3g}")
        s = problem.s_alphabets[0]
        f = [[s[k] for k in row] for row in problem.f_index[0]]
        return cls(problem.p_x, problem.p_y, f, problem.x_alphabet, problem.y_alphabet)

    def to_problem(self) -> CachingProblem:
        return CachingProblem(self.x_alphabet, self.y_alphabet, np.outer(self.p_x, self.p_y), (self.f_table,))


# --------------------------------------------------------------------------
# batched evaluation


def _onehot(spec: IndependentSourceSpec) -> np.ndarray:
    nx, ny = spec.f_index.shape
    oh = np.zeros((nx, ny, spec.n_outputs))
    oh[np.arange(nx)[:, None], np.arange(ny)[None, :], spec.f_index] = 1.0
    return oh


def _negent(p, axes):
    """sum p log2 p over ``axes``."""
    safe = np.where(p > probcore.ZERO_MASS, p, 1.0)
    return np.sum(np.where(p > probcore.ZERO_MASS, p * np.log2(safe), 0.0), axis=axes)


def _stats(spec: IndependentSourceSpec, W: np.ndarray, onehot=None):
    """I(X;V) and H(f(X,y)|V) per request, in bits, for channels W[b, x, v]."""
    if onehot is None:
        onehot = _onehot(spec)
    px = spec.p_x
    pv = np.einsum("x,bxv->bv", px, W)
    psv = np.einsum("x,xys,bxv->bysv", px, onehot, W)
    h_v = -_negent(pv, (1,))
    i_xv = h_v + np.einsum("x,bx->b", px, _negent(W, (2,)))
    h_s = -_negent(psv, (2, 3)) - h_v[:, None]
    return np.maximum(i_xv, 0.0), np.maximum(h_s, 0.0), pv, psv


def static_corner(spec: IndependentSourceSpec, channel: TestChannel) -> StaticRateProfile:
    """(I(X;V), [H(f(X,y)|V)]_y)."""
    W = _check(spec, channel)
    i, h, _, _ = _stats(spec, W[None])
    return StaticRateProfile(float(i[0]), tuple(float(v) for v in h[0]))


def adaptive_point(spec: IndependentSourceSpec, channel: TestChannel) -> RatePoint:
    """(I(X;V), E_Y H(f(X,Y)|V)): the average-case update rate."""
    W = _check(spec, channel)
    i, h, _, _ = _stats(spec, W[None])
    return RatePoint(float(i[0]), float(h[0] @ spec.p_y))


def _check(spec, channel):
    W = channel.matrix
    if W.shape[0] != len(spec.p_x):
        raise ValidationError(f"channel has {W.shape[0]} rows, source has {len(spec.p_x)} symbols")
    return W


# --------------------------------------------------------------------------
# compound (worst-case) rate


@dataclass
class CompoundConfig:
    """Search settings for :func:`compound_rate`."""

    n_gammas: int = 12
    gamma_range: tuple = (1e-2, 1e2)
    n_restarts: int = 4
    weight_grid: int = 4  # simplex step 1/weight_grid over request weights (N <= 3)
    n_random_weights: int = 8
    tau_exponents: Sequence[int] = tuple(range(11))
    v_card: Optional[int] = None
    max_iters: int = 2000
    tol: float = 1e-10
    seed: int = 0

    def resolved_v_card(self, spec) -> int:
        return self.v_card if self.v_card is not None else len(spec.p_x) + 1


@dataclass
class CompoundResult:
    value: float
    r_c: float
    r_u_by_request: tuple
    witness: TestChannel
    converged: bool
    n_candidates: int


def _update(spec, onehot, W, gam, weights):
    """W(v|x) ∝ q(v) prod_y q(f(x,y)|v)^(gamma w_y) at the current marginals."""
    _, _, pv, psv = _stats(spec, W, onehot)
    lq = np.log(np.maximum(np.divide(psv, pv[:, None, None, :], out=np.zeros_like(psv),
                                     where=pv[:, None, None, :] > 0), LOG_FLOOR))
    nx, ny = spec.f_index.shape
    g = lq[:, np.arange(ny)[None, :], spec.f_index, :]  # [b, x, y, v]
    c = np.log(np.maximum(pv, LOG_FLOOR))[:, None, :] + gam[:, None, None] * np.einsum("by,bxyv->bxv", weights, g)
    c -= c.max(axis=2, keepdims=True)
    w = np.exp(c)
    return w / w.sum(axis=2, keepdims=True)


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _lse(h, tau):
    m = h.max(axis=1)
    return m + np.log(np.exp(tau * (h - m[:, None])).sum(axis=1)) / tau


def _run(spec, onehot, W, gam, weights, cfg, tau=None):
    """Alternating minimization; with ``tau`` the weights track the smoothed-max gradient."""
    active = np.arange(W.shape[0])
    conv = np.zeros(W.shape[0], dtype=bool)

    def objective(Wb, gb, wb):
        i, h, _, _ = _stats(spec, Wb, onehot)
        if tau is None:
            return i + gb * np.einsum("by,by->b", wb, h), h
        return i + gb * _lse(h, tau), h

    J, h = objective(W, gam, weights)
    if tau is not None:
        weights = _softmax(tau * h)
    for _ in range(cfg.max_iters):
        if active.size == 0:
            break
        Wa = _update(spec, onehot, W[active], gam[active], weights[active])
        Ja, ha = objective(Wa, gam[active], weights[active])
        W[active] = Wa
        if tau is not None:
            weights[active] = _softmax(tau * ha)
        done = np.abs(J[active] - Ja) / np.maximum(np.abs(Ja), 1e-12) < cfg.tol
        J[active] = Ja
        conv[active[done]] = True
        active = active[~done]
    return W, conv


def _weight_set(ny, cfg, rng):
    if ny <= 3:
        ws = _simplex_grid(cfg.weight_grid, ny)
    else:
        ws = np.vstack([np.eye(ny), np.full((1, ny), 1.0 / ny)])
    return np.vstack([ws, rng.dirichlet(np.ones(ny), size=cfg.n_random_weights)])


def compound_candidates(spec: IndependentSourceSpec, cfg: CompoundConfig = None):
    """Channels from weighted scalarizations and smoothed-max ramps; returns (W, converged)."""
    cfg = cfg or CompoundConfig()
    nx, ny = spec.f_index.shape
    vc = cfg.resolved_v_card(spec)
    onehot = _onehot(spec)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0]))
    gammas = np.logspace(np.log10(cfg.gamma_range[0]), np.log10(cfg.gamma_range[1]), cfg.n_gammas)
    weights = _weight_set(ny, cfg, rng)
    cells = [(g, w) for g in gammas for w in weights for _ in range(cfg.n_restarts)]
    gam = np.array([c[0] for c in cells])
    wts = np.array([c[1] for c in cells])
    init_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1]))
    W0 = init_rng.dirichlet(np.ones(vc), size=(len(cells), nx))
    W1, c1 = _run(spec, onehot, W0.copy(), gam, wts, cfg)
    # smoothed max: one ramp per (gamma, restart), warm-started across sharpness levels
    W2 = init_rng.dirichlet(np.ones(vc), size=(len(gammas) * cfg.n_restarts, nx))
    gam2 = np.repeat(gammas, cfg.n_restarts)
    c2 = np.ones(len(gam2), dtype=bool)
    for j in cfg.tau_exponents:
        W2, cj = _run(spec, onehot, W2, gam2, np.full((len(gam2), ny), 1.0 / ny), cfg, tau=2.0 ** j)
        c2 = cj
    fixed = [np.eye(vc)[np.zeros(nx, dtype=int)], np.eye(nx)]
    # channels carrying no measurable information snap to the exact constant channel
    W = np.concatenate([W1, W2])
    blank = _stats(spec, W, onehot)[0] < 1e-12
    W = [fixed[0] if z else w for w, z in zip(W, blank)]
    conv = list(c1) + list(c2)
    hard = [np.eye(vc)[np.argmax(w, axis=1)] for w in W]
    return W + hard + fixed, conv + [True] * (len(hard) + len(fixed))


def _time_share(chans, theta) -> TestChannel:
    blocks = [t * w for t, w in zip(theta, chans)]
    return TestChannel(np.hstack(blocks))


def compound_rate(spec: IndependentSourceSpec, r_c_budget: float, config: CompoundConfig = None,
                  candidates=None) -> CompoundResult:
    """min over channels with I(X;V) <= budget of max_y H(f(X,y)|V).

    Candidate channels come from :func:`compound_candidates`; a linear
    program then picks the best time-sharing mixture of them, which is
    itself a channel (block-diagonal in an enlarged V alphabet).  The value
    reported is re-evaluated un-smoothed on that witness.
    """
    if r_c_budget < 0:
        raise DomainError(f"cache budget must be >= 0, got {r_c_budget!r}")
    if candidates is None:
        chans, conv = compound_candidates(spec, config)
    else:
        chans, conv = [np.asarray(c, dtype=float) for c in candidates], [True] * len(candidates)
    sizes = {w.shape[1] for w in chans}
    i_all, h_all = [], []
    for vc in sorted(sizes):
        sel = [k for k, w in enumerate(chans) if w.shape[1] == vc]
        i, h, _, _ = _stats(spec, np.array([chans[k] for k in sel]))
        for k, a, b in zip(sel, i, h):
            i_all.append((k, a, b))
    i_all.sort()
    i_vec = np.array([a for _, a, _ in i_all])
    h_mat = np.array([b for _, _, b in i_all])
    ny = h_mat.shape[1]
    K = len(i_vec)
    budget = max(r_c_budget * (1.0 - LP_SLACK) - 1e-12, 0.0)
    # variables: theta[0..K), t
    c = np.zeros(K + 1)
    c[-1] = 1.0
    A_ub = np.vstack([np.hstack([h_mat.T, -np.ones((ny, 1))]), np.append(i_vec, 0.0)[None, :]])
    b_ub = np.append(np.zeros(ny), budget)
    A_eq = np.append(np.ones(K), 0.0)[None, :]
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=[1.0], bounds=[(0, None)] * (K + 1), method="highs")
    if res.status != 0:
        raise ValidationError(f"compound program failed: {res.message}")
    theta = np.where(res.x[:K] > THETA_MIN, res.x[:K], 0.0)
    theta /= theta.sum()
    used = np.flatnonzero(theta)
    witness = _time_share([chans[i_all[k][0]] for k in used], theta[used])
    prof = static_corner(spec, witness)
    ok = all(conv[i_all[k][0]] for k in used)
    return CompoundResult(prof.worst_case, prof.r_c, prof.r_u_by_request, witness, ok, K)


# --------------------------------------------------------------------------
# request-gated two-user instance


def example2_static_region(r: float) -> StaticRateProfile:
    """(r_c2, r_u12(1), r_u12(2)) = (r, 1, (1 - r)^+) for the request-gated instance."""
    if r < 0:
        raise DomainError(f"r must be >= 0, got {r!r}")
    return StaticRateProfile(float(r), (1.0, max(1.0 - r, 0.0)))


def example2_gap_report(n: int = 10):
    """Rows (r_u, r_c_it, r_c_static_adaptive) for r_u = (n + k) / (2n), k = 0..n.

    Both models need update rate 1/2 + (1 - r)^+ / 2 at parameter r, so a
    target r_u in [1/2, 1] fixes r = 2 - 2 r_u; the sequential model then
    needs cache r/2, the static adaptive model cache r.
    """
    from .multiuser import ssr_example2_boundary

    rows = []
    for k in range(n + 1):
        r_u = (n + k) / (2 * n)
        r = 2.0 - 2.0 * r_u
        rows.append((r_u, ssr_example2_boundary(r).r_c, example2_static_region(r).r_c))
    return rows
