"""Closed-form boundaries and the constructions behind them.

Covers independent and nested source components, uniformly requested
components (conditional total correlation), Wyner's common information, and
the doubly symmetric binary source (DSBS) worked example.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import probcore
from .errors import DomainError, ValidationError
from .fixtures import dsbs_selector, selector_problem
from .probcore import CachingProblem, JointPmf, TestChannel, binary_entropy
from .singleuser import LN2, RatePoint, TracerConfig, achievable_point, lower_left_hull, trace_boundary

SORT_TOL = 1e-12


@dataclass(frozen=True)
class ComponentSpec:
    """Component entropies H(X^(n)) (bits) and the request pmf over components."""

    entropies: tuple
    request_pmf: tuple

    def __post_init__(self):
        h = tuple(float(v) for v in self.entropies)
        p = tuple(float(v) for v in probcore.Pmf(np.asarray(self.request_pmf, dtype=float)).probs)
        if len(h) != len(p):
            raise ValidationError(f"{len(h)} entropies but {len(p)} request probabilities")
        if any(v < 0 for v in h):
            raise ValidationError("component entropies must be nonnegative")
        object.__setattr__(self, "entropies", h)
        object.__setattr__(self, "request_pmf", p)


def _check_r(r):
    if r < 0:
        raise DomainError(f"cache rate must be >= 0, got {r!r}")


def independent_boundary(spec: ComponentSpec, r: float) -> float:
    """Minimal update rate at cache rate r for independent components.

    Requires the request pmf sorted non-increasing: the optimal cache holds
    the most popular components first.
    """
    _check_r(r)
    p = np.asarray(spec.request_pmf)
    if np.any(np.diff(p) > SORT_TOL):
        raise ValidationError(f"request pmf must be sorted non-increasing, got {spec.request_pmf}")
    steps = p - np.append(p[1:], 0.0)
    cum = np.cumsum(spec.entropies)
    return float(np.sum(steps * np.maximum(cum - r, 0.0)))


def nested_boundary(spec: ComponentSpec, r: float) -> float:
    """Minimal update rate at cache rate r when each component refines the previous one."""
    _check_r(r)
    h = np.asarray(spec.entropies)
    if np.any(np.diff(h) < -SORT_TOL):
        raise ValidationError(f"nested components need non-decreasing entropies, got {spec.entropies}")
    return float(np.sum(np.asarray(spec.request_pmf) * np.maximum(h - r, 0.0)))


def _require_selector_form(problem: CachingProblem, tol=probcore.NORM_TOL):
    if problem.n_functions != 1:
        raise ValidationError("closed forms need a single request function")
    if not problem.is_independent(tol):
        raise ValidationError("closed forms need X independent of Y")


def component_joint(problem: CachingProblem) -> JointPmf:
    """Joint pmf of the components X^(n) = f(X, y_n), one axis per request symbol."""
    _require_selector_form(problem)
    ns = len(problem.s_alphabets[0])
    n = len(problem.y_alphabet)
    t = np.zeros((ns,) * n)
    for i, px in enumerate(problem.p_x):
        t[tuple(problem.f_index[0][i])] += px
    return JointPmf(t, tuple(f"c{k + 1}" for k in range(n)))


def component_spec_from_problem(problem: CachingProblem, kind: str = "independent",
                                tol: float = 1e-9) -> ComponentSpec:
    """Reduce a problem to component entropies, checking the structural assumption.

    ``kind='independent'`` reorders components by non-increasing popularity;
    ``kind='nested'`` keeps the request order and requires
    H(X^(n) | X^(n+1)) = 0.
    """
    j = component_joint(problem)
    n = j.ndim
    h = [probcore.cond_entropy(j, k) for k in range(n)]
    p_y = problem.p_y
    if kind == "independent":
        if n > 1 and probcore.total_correlation(j) > tol:
            raise ValidationError("components are not independent")
        order = sorted(range(n), key=lambda k: -p_y[k])
        return ComponentSpec([h[k] for k in order], [p_y[k] for k in order])
    if kind == "nested":
        for k in range(n - 1):
            if probcore.cond_entropy(j, k, k + 1) > tol:
                raise ValidationError(f"component {k + 1} is not a function of component {k + 2}")
        return ComponentSpec(h, p_y)
    raise ValidationError(f"unknown component structure {kind!r}")


# --------------------------------------------------------------------------
# uniform requests


def _reduced_selector(problem: CachingProblem):
    """Selector problem over the distinct component tuples with positive mass."""
    j = component_joint(problem)
    return selector_problem(j.table), j


def _bar_rates(reduced: CachingProblem, W: np.ndarray):
    """(I(Xbar;V), Gamma(Xbar|V)) for a channel over the reduced alphabet."""
    n = len(reduced.y_alphabet)
    ns = len(reduced.s_alphabets[0])
    px = reduced.p_x
    t = np.zeros((ns,) * n + (W.shape[1],))
    for i in range(len(px)):
        t[tuple(reduced.f_index[0][i])] += px[i] * W[i]
    jt = JointPmf(t)
    comps = tuple(range(n))
    v = n
    i_xv = probcore.mutual_info(jt, comps, v)
    g = probcore.conditional_total_correlation(jt, v, comps)
    return max(i_xv, 0.0), max(g, 0.0)


@dataclass
class UniformBoundaryResult:
    value: float
    gamma_min: float
    h_xbar: float
    n: int
    witnesses: list


def uniform_request_boundary(problem: CachingProblem, r: float, config: TracerConfig = None,
                             boundary=None) -> UniformBoundaryResult:
    """Update rate on the boundary at cache rate r for uniformly requested components.

    The minimal conditional total correlation at I(Xbar;V) = r is read off
    the lower convex envelope of (I, Gamma) pairs over the tracer's
    witnesses on the reduced alphabet; time sharing makes every envelope
    point achievable.  ``boundary`` may carry a previous trace of the
    reduced problem to avoid re-tracing.
    """
    _require_selector_form(problem)
    n = len(problem.y_alphabet)
    if np.max(np.abs(problem.p_y - 1.0 / n)) > probcore.NORM_TOL:
        raise ValidationError("requests are not uniform")
    reduced, j = _reduced_selector(problem)
    h_bar = probcore.entropy(j.table.ravel())
    if not -1e-12 <= r <= h_bar + 1e-12:
        raise DomainError(f"r must lie in [0, H(Xbar)] = [0, {h_bar!r}], got {r!r}")
    if boundary is None:
        boundary = trace_boundary(reduced, config)
    pairs = [(0.0, probcore.total_correlation(j)), (h_bar, 0.0)]
    chans = [None, None]
    cells = boundary.diagnostics.get("cells", [])
    for ch in list(boundary.witnesses or []) + [c[1] for c in cells]:
        if ch is None or ch.matrix.shape[0] != len(reduced.x_alphabet):
            continue
        pairs.append(_bar_rates(reduced, ch.matrix))
        chans.append(ch)
    idx = lower_left_hull(pairs, protected=(0, 1))
    xs = np.array([pairs[i][0] for i in idx])
    ys = np.array([pairs[i][1] for i in idx])
    g_min = float(np.interp(min(max(r, 0.0), h_bar), xs, ys))
    value = (h_bar - r + g_min) / n
    return UniformBoundaryResult(max(value, 0.0), g_min, h_bar, n, [chans[i] for i in idx])


# --------------------------------------------------------------------------
# Wyner common information


@dataclass
class WynerResult:
    value: float  # I(Xbar; V) in bits
    total_correlation: float  # Gamma(Xbar | V) of the witness
    witness: TestChannel  # p(v | xbar) over the support of the joint, row-major order
    support: list  # component tuples indexing witness rows
    converged: bool
    mu: float


def _wyner_stats(px, comp, W, n_levels):
    """(I(Xbar;V), sum_n H(X^n|V), H(Xbar|V)) in nats for a batch W[b, x, v]."""
    pxv = px[None, :, None] * W
    pv = pxv.sum(axis=1)
    h_v = -_xl(pv, (1,))
    h_v_given_x = -np.einsum("x,bx->b", px, _xl(W, (2,)))
    i_xv = h_v - h_v_given_x
    h_parts = np.zeros(W.shape[0])
    for c, k in zip(comp, n_levels):
        onehot = np.eye(k)[c]  # [x, a]
        pav = np.einsum("xa,bxv->bav", onehot, pxv)
        h_parts += -_xl(pav, (1, 2)) - h_v
    h_x = -_xl(px, (0,))
    return i_xv, h_parts, h_x - i_xv


def _xl(p, axes):
    safe = np.where(p > probcore.ZERO_MASS, p, 1.0)
    return np.sum(np.where(p > probcore.ZERO_MASS, p * np.log(safe), 0.0), axis=axes)


def _wyner_update(px, comp, n_levels, W, mu):
    """W(v|x) ∝ q(v) prod_n q(x^n|v)^(mu/(1+mu)) at the current marginals."""
    kappa = mu / (1.0 + mu)
    pxv = px[None, :, None] * W
    pv = pxv.sum(axis=1)
    c = np.log(np.maximum(pv, 1e-300))[:, None, :].repeat(W.shape[1], axis=1)
    for cn, k in zip(comp, n_levels):
        onehot = np.eye(k)[cn]
        pav = np.einsum("xa,bxv->bav", onehot, pxv)
        lq = np.log(np.maximum(np.divide(pav, pv[:, None, :], out=np.zeros_like(pav),
                                         where=pv[:, None, :] > 0), 1e-300))
        c = c + kappa * lq[:, cn, :]
    c -= c.max(axis=2, keepdims=True)
    w = np.exp(c)
    return w / w.sum(axis=2, keepdims=True)


def wyner_common_info(joint: JointPmf, v_card: int = 2, schedule: Sequence[float] = (1, 4, 16, 64, 256, 1024),
                      n_restarts: int = 16, seed: int = 0, max_iters: int = 10_000, tol: float = 1e-10,
                      gamma_tol: float = 1e-4) -> WynerResult:
    """min I(Xbar;V) subject to Gamma(Xbar|V) = 0, by a penalty schedule.

    For each penalty mu the objective I + mu Gamma is decreased by exact
    block-coordinate steps.  Every restart is carried through the whole
    schedule (warm started from its previous stage); the answer is the
    smallest I among restarts meeting ``gamma_tol`` at the last stage.
    """
    if joint.ndim < 2:
        raise ValidationError("need at least two components")
    if v_card < 2:
        raise ValidationError("v_card must be >= 2")
    support = [tuple(int(a) for a in t) for t in np.argwhere(joint.table > 0)]
    px = np.array([joint.table[t] for t in support])
    px = px / px.sum()
    comp = [np.array([t[k] for t in support]) for k in range(joint.ndim)]
    levels = list(joint.table.shape)
    rngs = [np.random.default_rng(np.random.SeedSequence([seed, r])) for r in range(n_restarts)]
    W = np.array([g.dirichlet(np.ones(v_card), size=len(px)) for g in rngs])
    converged = np.zeros(n_restarts, dtype=bool)
    h_x = -_xl(px, (0,))
    for mu in schedule:
        i_xv, hp, hc = _wyner_stats(px, comp, W, levels)
        J = i_xv + mu * (hp - hc)
        active = np.arange(n_restarts)
        converged[:] = False
        for _ in range(max_iters):
            if active.size == 0:
                break
            Wa = _wyner_update(px, comp, levels, W[active], mu)
            i_a, hp_a, hc_a = _wyner_stats(px, comp, Wa, levels)
            Ja = i_a + mu * (hp_a - hc_a)
            W[active] = Wa
            done = np.abs(J[active] - Ja) / np.maximum(np.abs(Ja), 1e-12) < tol
            J[active] = Ja
            converged[active[done]] = True
            active = active[~done]
    i_xv, hp, hc = _wyner_stats(px, comp, W, levels)
    gam = np.maximum(hp - hc, 0.0) / LN2
    i_bits = np.maximum(i_xv, 0.0) / LN2
    ok = np.flatnonzero(gam <= gamma_tol)
    if ok.size:
        b = int(ok[np.argmin(i_bits[ok])])
        feasible = True
    else:
        b = int(np.argmin(i_bits + schedule[-1] * gam))
        feasible = False
    return WynerResult(float(i_bits[b]), float(gam[b]), TestChannel(W[b]), support,
                       bool(feasible and converged[b]), float(schedule[-1]))


# --------------------------------------------------------------------------
# doubly symmetric binary source


def _check_q(q):
    if not 0.0 <= q <= 0.5:
        raise DomainError(f"crossover q must lie in [0, 1/2], got {q!r}")


@dataclass(frozen=True)
class DsbsSpec:
    q: float

    def __post_init__(self):
        _check_q(self.q)

    @property
    def q_prime(self) -> float:
        """Crossover of each branch of the symmetric common-information decomposition."""
        return 0.5 * (1.0 - math.sqrt(1.0 - 2.0 * self.q))

    @property
    def gamma(self) -> float:
        """Flip probability of U that makes the auxiliary hit the critical rate."""
        return 0.5 - math.sqrt(1.0 - 2.0 * self.q) / (2.0 * (1.0 - self.q))


def dsbs_rcrit(q: float) -> float:
    spec = DsbsSpec(q)
    return 1.0 + binary_entropy(q) - 2.0 * binary_entropy(spec.q_prime)


def dsbs_channel(alpha: float) -> TestChannel:
    """p(v | x1 x2) over X symbols (00, 01, 10, 11): V = x1 xor U when the bits agree, a fair coin otherwise."""
    if not 0.0 <= alpha <= 0.5:
        raise DomainError(f"alpha must lie in [0, 1/2], got {alpha!r}")
    m = np.array([[1 - alpha, alpha], [0.5, 0.5], [0.5, 0.5], [alpha, 1 - alpha]])
    return TestChannel(m, (0, 1))


def dsbs_inner_point(q: float, alpha: float):
    """Rate pair of the agree/disagree auxiliary on the DSBS(q) selector; returns (RatePoint, channel)."""
    _check_q(q)
    ch = dsbs_channel(alpha)
    return achievable_point(dsbs_selector(q), ch), ch


def dsbs_outer_bound(q: float, r_c: float) -> float:
    _check_q(q)
    if r_c < 0:
        raise DomainError("r_c must be >= 0")
    return max(0.5 * max(1.0 + binary_entropy(q) - r_c, 0.0), max(1.0 - r_c, 0.0))


def _envelope(points):
    pts = sorted(points)
    idx = lower_left_hull(pts)
    return np.array([pts[i][0] for i in idx]), np.array([pts[i][1] for i in idx])


EXAMPLE1_CURVES = ("inner1", "inner2", "inner3", "outer")


def example1_curves(q: float, n_alpha_steps: int = 100):
    """Rows (curve_id, r_c, r_u) for the three inner bounds and the outer bound.

    inner1: memory sharing between (R_c*, 0) and (0, R_u*);
    inner2: memory sharing among those and the critical point;
    inner3: the agree/disagree auxiliary swept over alpha in [gamma, 1/2],
            convexified together with inner2's extreme points;
    outer:  max of the two cut-set style lower bounds.
    All curves are sampled on one shared, sorted r_c grid.
    """
    if not 0.0 < q < 0.5:
        raise DomainError(f"q must lie in (0, 1/2), got {q!r}")
    if n_alpha_steps < 1:
        raise ValidationError("n_alpha_steps must be >= 1")
    spec = DsbsSpec(q)
    hq = binary_entropy(q)
    rc_star, ru_star = 1.0 + hq, 1.0
    r_crit = dsbs_rcrit(q)
    crit = (r_crit, 0.5 * (1.0 + hq - r_crit))
    extremes = [(0.0, ru_star), crit, (rc_star, 0.0)]
    alphas = np.linspace(spec.gamma, 0.5, n_alpha_steps + 1)
    alphas[0], alphas[-1] = spec.gamma, 0.5
    sweep = [tuple(dsbs_inner_point(q, float(a))[0]) for a in alphas]
    grid = np.unique(np.concatenate([np.linspace(0.0, rc_star, n_alpha_steps + 1), [p[0] for p in sweep]]))
    grid = grid[(grid >= 0) & (grid <= rc_star) & (np.abs(grid - r_crit) > 1e-12)]
    grid = np.sort(np.append(grid, r_crit))
    grid = grid[np.append(True, np.diff(grid) > 1e-12)]
    curves = {
        "inner1": _envelope([extremes[0], extremes[2]]),
        "inner2": _envelope(extremes),
        "inner3": _envelope(extremes + sweep),
    }
    rows = []
    for cid in EXAMPLE1_CURVES:
        for rc in grid:
            if cid == "outer":
                ru = dsbs_outer_bound(q, float(rc))
            else:
                xs, ys = curves[cid]
                ru = float(np.interp(rc, xs, ys))
            rows.append((cid, float(rc), ru))
    return rows
