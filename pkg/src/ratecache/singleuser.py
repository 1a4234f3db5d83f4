"""Single-user cache/update region: point evaluation, boundary tracing, oracles.

A test channel p(v|x) achieves the rate pair

    R_c = I(X; V | Y),    R_u = H(f(X, Y) | V, Y),

and the optimal region is the union of the dominated quadrants over all
channels with |V| <= |X| + 1.  Its lower-left boundary is traced by
minimizing ``R_c + gamma * R_u`` over a grid of weights with a block
alternating minimization (see ``_Kernel.update``).
"""
from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import probcore
from .errors import ArityError, BudgetError, InfeasibleError, ValidationError
from .probcore import CachingProblem, TestChannel

LN2 = math.log(2.0)
LOG_FLOOR = 1e-300
DEDUP_TOL = 1e-9
ORACLE_BUDGET = 10_000_000


@dataclass(frozen=True)
class RatePoint:
    r_c: float
    r_u: float

    def __post_init__(self):
        # measures are differences of entropies; clip rounding residue only
        for name in ("r_c", "r_u"):
            v = float(getattr(self, name))
            if v < -1e-9 or not math.isfinite(v):
                raise ValidationError(f"{name} must be a finite nonnegative rate, got {v!r}")
            object.__setattr__(self, name, max(v, 0.0))

    def __iter__(self):
        yield self.r_c
        yield self.r_u


@dataclass
class TracerConfig:
    n_tradeoff_points: int = 48
    n_restarts: int = 32
    max_iters: int = 10_000
    tol: float = 1e-10
    seed: int = 0
    v_card: Optional[int] = None  # None -> |X| + 1
    gamma_range: tuple = (1e-3, 1e3)
    refine_rounds: int = 8  # chord-slope refinement passes after the log grid
    refine_tol: float = 1e-4
    threads: Optional[int] = None  # None -> RATECACHE_THREADS, 0 -> cpu count

    def __post_init__(self):
        if self.n_restarts < 1:
            raise ValidationError("n_restarts must be >= 1")
        if self.n_tradeoff_points < 1:
            raise ValidationError("n_tradeoff_points must be >= 1")
        if not self.tol > 0:
            raise ValidationError("tol must be positive")
        if self.v_card is not None and self.v_card < 1:
            raise ValidationError("v_card must be >= 1")
        if self.max_iters < 1:
            raise ValidationError("max_iters must be >= 1")

    def resolved_v_card(self, problem: CachingProblem) -> int:
        return self.v_card if self.v_card is not None else len(problem.x_alphabet) + 1

    def gammas(self) -> np.ndarray:
        lo, hi = self.gamma_range
        if self.n_tradeoff_points == 1:
            return np.array([math.sqrt(lo * hi)])
        return np.logspace(math.log10(lo), math.log10(hi), self.n_tradeoff_points)

    def n_threads(self) -> int:
        t = self.threads
        if t is None:
            t = int(os.environ.get("RATECACHE_THREADS", "0") or 0)
        return t if t > 0 else (os.cpu_count() or 1)


@dataclass
class SolveResult:
    channel: TestChannel
    objective: float  # bits
    converged: bool
    n_iter: int
    history: list = field(default_factory=list)


@dataclass
class Boundary:
    """Lower-left convex boundary, sorted by increasing ``r_c``.

    ``gammas[i]`` is the weight whose solve produced point i, or None for the
    two analytic endpoints.  ``diagnostics['nonconverged']`` lists weight
    indices whose selected restart hit the iteration cap.
    """

    points: list
    witnesses: list = None
    gammas: list = None
    converged: list = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def r_c(self) -> np.ndarray:
        return np.array([p.r_c for p in self.points])

    @property
    def r_u(self) -> np.ndarray:
        return np.array([p.r_u for p in self.points])

    def slopes(self) -> np.ndarray:
        return np.diff(self.r_u) / np.diff(self.r_c)

    def value_at(self, r_c) -> np.ndarray:
        """Piecewise-linear R_u on the boundary; flat right of the last point."""
        return np.interp(r_c, self.r_c, self.r_u)


def _require_single(problem: CachingProblem):
    if problem.n_functions != 1:
        raise ArityError(f"single-user operation needs exactly one request function, got {problem.n_functions}")


def _check_channel(problem: CachingProblem, channel: TestChannel):
    if channel.matrix.shape[0] != len(problem.x_alphabet):
        raise ValidationError(
            f"channel has {channel.matrix.shape[0]} rows, problem has {len(problem.x_alphabet)} x symbols")


def achievable_point(problem: CachingProblem, channel: TestChannel) -> RatePoint:
    _require_single(problem)
    _check_channel(problem, channel)
    j = probcore.induced_joint(problem, channel)
    r_c = probcore.cond_mutual_info(j, "x", "v", "y")
    r_u = probcore.cond_entropy(j, "s1", ("v", "y"))
    return RatePoint(r_c, r_u)


def ru_star(problem: CachingProblem) -> float:
    """Update rate needed with an empty cache: H(f(X,Y) | Y)."""
    _require_single(problem)
    return achievable_point(problem, TestChannel.constant(len(problem.x_alphabet))).r_u


def sum_rate_lower_bound(problem: CachingProblem) -> float:
    """Cut-set bound on R_c + R_u; numerically identical to ``ru_star``."""
    return ru_star(problem)


def is_partially_invertible(problem: CachingProblem) -> bool:
    _require_single(problem)
    fidx = problem.f_index[0]
    for j in range(len(problem.y_alphabet)):
        support = np.flatnonzero(problem.p_xy[:, j] > 0)
        outs = fidx[support, j]
        if len(set(outs.tolist())) != len(outs):
            return False
    return True


# --------------------------------------------------------------------------
# batched kernels


class _Kernel:
    """Precomputed arrays for evaluating and updating batches of channels.

    Channels are stacked as ``W[b, x, v]``.
    """

    def __init__(self, problem: CachingProblem):
        _require_single(problem)
        self.pxy = np.asarray(problem.p_xy, dtype=float)
        nx, ny = self.pxy.shape
        self.fidx = problem.f_index[0]
        self.ns = len(problem.s_alphabets[0])
        self.py = self.pxy.sum(axis=0)
        px = self.pxy.sum(axis=1)
        self.pyx = np.divide(self.pxy, px[:, None], out=np.zeros_like(self.pxy), where=px[:, None] > 0)
        self.pxys = np.zeros((nx, ny, self.ns))
        self.pxys[np.arange(nx)[:, None], np.arange(ny)[None, :], self.fidx] = self.pxy
        self.ygrid = np.broadcast_to(np.arange(ny)[None, :], (nx, ny))

    def marginals(self, W):
        pvy = np.einsum("xy,bxv->byv", self.pxy, W)
        pvys = np.einsum("xys,bxv->byvs", self.pxys, W)
        return pvy, pvys

    def objective(self, W, gammas, pvy=None, pvys=None):
        """Return (r_c, r_u) in nats and J = r_c + gamma r_u in bits."""
        if pvy is None:
            pvy, pvys = self.marginals(W)
        # I(X;V|Y) = H(V|Y) - H(V|X) under the Markov chain V - X - Y
        px = self.pxy.sum(axis=1)
        neg_hvx = np.einsum("x,bx->b", px, _xlogx_rows(W))
        r_c = -(_xlogx_sum(pvy, (1, 2)) - _xlogx_sum(self.py, (0,))) + neg_hvx
        r_u = -(_xlogx_sum(pvys, (1, 2, 3)) - _xlogx_sum(pvy, (1, 2)))
        return r_c, r_u, (r_c + gammas * r_u) / LN2

    def update(self, W, gammas, pvy=None, pvys=None):
        """One exact block-coordinate step.

        With decoder laws q(v|y), q(s|v,y) fixed at the current marginals,
        J is bounded above by a functional that is separable in the rows of
        W; its minimizer is W(v|x) ∝ exp sum_y p(y|x)[ln q(v|y) + gamma ln q(f(x,y)|v,y)].
        """
        if pvy is None:
            pvy, pvys = self.marginals(W)
        py = self.py[None, :, None]
        lq_vy = np.log(np.maximum(np.divide(pvy, py, out=np.zeros_like(pvy), where=py > 0), LOG_FLOOR))
        lq_s = np.log(np.maximum(
            np.divide(pvys, pvy[..., None], out=np.zeros_like(pvys), where=pvy[..., None] > 0), LOG_FLOOR))
        # lq_s[b, y, v, f(x, y)] gathered to [b, x, y, v]
        g = np.swapaxes(lq_s, 2, 3)[:, self.ygrid, self.fidx, :]
        c = np.einsum("xy,byv->bxv", self.pyx, lq_vy) + gammas[:, None, None] * np.einsum("xy,bxyv->bxv", self.pyx, g)
        c -= c.max(axis=2, keepdims=True)
        w = np.exp(c)
        return w / w.sum(axis=2, keepdims=True)


def _xlogx_sum(p, axes):
    p = np.asarray(p)
    safe = np.where(p > probcore.ZERO_MASS, p, 1.0)
    return np.sum(np.where(p > probcore.ZERO_MASS, p * np.log(safe), 0.0), axis=axes)


def _xlogx_rows(W):
    return _xlogx_sum(W, (2,))


def _solve_batch(kernel: _Kernel, gammas, W0, max_iters, tol, record=False):
    """Alternating minimization on every cell of the batch independently.

    A cell stops updating once its relative objective change drops below
    ``tol``; per-cell arithmetic does not depend on the other cells.
    """
    W = np.array(W0, dtype=float)
    gammas = np.asarray(gammas, dtype=float)
    B = W.shape[0]
    J = kernel.objective(W, gammas)[2]
    iters = np.zeros(B, dtype=int)
    conv = np.zeros(B, dtype=bool)
    history = [[float(j)] for j in J] if record else None
    active = np.arange(B)
    for _ in range(max_iters):
        if active.size == 0:
            break
        Wa = kernel.update(W[active], gammas[active])
        Ja = kernel.objective(Wa, gammas[active])[2]
        W[active] = Wa
        done = np.abs(J[active] - Ja) / np.maximum(Ja, 1e-12) < tol
        J[active] = Ja
        iters[active] += 1
        if record:
            for b, j in zip(active, Ja):
                history[b].append(float(j))
        conv[active[done]] = True
        active = active[~done]
    return W, J, conv, iters, history


def _restart_init(seed: int, w: int, r: int, nx: int, v_card: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence([seed, w, r]))
    return rng.dirichlet(np.ones(v_card), size=nx)


def scalarized_solve(problem: CachingProblem, gamma: float, init: TestChannel,
                     config: TracerConfig = None) -> SolveResult:
    """Locally minimize I(X;V|Y) + gamma H(f(X,Y)|V,Y) (in bits) from ``init``.

    The objective sequence is non-increasing.  ``history`` holds J after
    every iteration, starting with J(init).
    """
    config = config or TracerConfig()
    if gamma < 0:
        raise ValidationError(f"gamma must be >= 0, got {gamma!r}")
    _check_channel(problem, init)
    kernel = _Kernel(problem)
    W, J, conv, iters, hist = _solve_batch(
        kernel, np.array([gamma]), init.matrix[None], config.max_iters, config.tol, record=True)
    return SolveResult(TestChannel(W[0]), float(J[0]), bool(conv[0]), int(iters[0]), hist[0])


# --------------------------------------------------------------------------
# hull


def lower_left_hull(points, protected=()):
    """Indices of the lower-left convex hull of (r_c, r_u) pairs, by increasing r_c.

    Points within DEDUP_TOL in r_c collapse to the lowest r_u (earliest index
    on ties).  Collinear interior points are dropped, as is everything right
    of the first point attaining the minimum r_u.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        return []
    order = sorted(range(len(pts)), key=lambda i: (pts[i, 0], pts[i, 1], i))
    kept = []
    for i in order:
        if kept and pts[i, 0] - pts[kept[-1], 0] <= DEDUP_TOL:
            j = kept[-1]
            if pts[i, 1] < pts[j, 1] - DEDUP_TOL or (i in protected and pts[i, 1] <= pts[j, 1] + DEDUP_TOL):
                kept[-1] = i
            continue
        kept.append(i)
    hull = []
    for i in kept:
        while len(hull) >= 2:
            a, b = pts[hull[-2]], pts[hull[-1]]
            cross = (b[0] - a[0]) * (pts[i, 1] - a[1]) - (b[1] - a[1]) * (pts[i, 0] - a[0])
            if cross <= 1e-11:
                hull.pop()
            else:
                break
        hull.append(i)
    ru = pts[hull, 1]
    m = int(np.argmin(ru))
    # keep the leftmost point reaching the floor
    first = next(k for k in range(len(hull)) if ru[k] <= ru[m] + DEDUP_TOL)
    return hull[: first + 1]


def _hull_boundary(cands, diagnostics=None, protected=()) -> Boundary:
    """cands: list of (RatePoint, channel, gamma, converged)."""
    idx = lower_left_hull([tuple(c[0]) for c in cands], protected)
    return Boundary(
        points=[cands[i][0] for i in idx],
        witnesses=[cands[i][1] for i in idx],
        gammas=[cands[i][2] for i in idx],
        converged=[cands[i][3] for i in idx],
        diagnostics=diagnostics or {},
    )


def _endpoints(problem: CachingProblem):
    nx = len(problem.x_alphabet)
    const = TestChannel.constant(nx)
    ident = TestChannel.identity(nx)
    return [(achievable_point(problem, const), const, None, True),
            (achievable_point(problem, ident), ident, None, True)]


def _run_cells(kernel, gammas, inits, config):
    """Solve all (weight, restart) cells, split across threads by weight."""
    n_w, n_r = inits.shape[:2]
    flat_g = np.repeat(gammas, n_r)
    flat_w = inits.reshape((n_w * n_r,) + inits.shape[2:])
    threads = min(config.n_threads(), n_w)
    if threads <= 1:
        W, J, conv, iters, _ = _solve_batch(kernel, flat_g, flat_w, config.max_iters, config.tol)
    else:
        chunks = np.array_split(np.arange(n_w * n_r).reshape(n_w, n_r), threads)
        with ThreadPoolExecutor(threads) as ex:
            futs = [ex.submit(_solve_batch, kernel, flat_g[c.ravel()], flat_w[c.ravel()],
                              config.max_iters, config.tol) for c in chunks if c.size]
            parts = [f.result() for f in futs]
        W = np.concatenate([p[0] for p in parts])
        J = np.concatenate([p[1] for p in parts])
        conv = np.concatenate([p[2] for p in parts])
        iters = np.concatenate([p[3] for p in parts])
    shape = (n_w, n_r)
    return W.reshape(shape + W.shape[1:]), J.reshape(shape), conv.reshape(shape), iters.reshape(shape)


def _best_cells(kernel, problem, gammas, w_offset, config):
    nx = len(problem.x_alphabet)
    v_card = config.resolved_v_card(problem)
    inits = np.array([[_restart_init(config.seed, w_offset + w, r, nx, v_card) for r in range(config.n_restarts)]
                      for w in range(len(gammas))])
    W, J, conv, _ = _run_cells(kernel, np.asarray(gammas, dtype=float), inits, config)
    out = []
    for w, g in enumerate(gammas):
        r = int(np.argmin(J[w]))  # first index on ties
        out.append((float(g), TestChannel(W[w, r]), float(J[w, r]), bool(conv[w, r])))
    return out


def trace_cells(problem: CachingProblem, config: TracerConfig = None):
    """Best restart for each weight of the log grid: list of (gamma, channel, J, converged)."""
    config = config or TracerConfig()
    _require_single(problem)
    return _best_cells(_Kernel(problem), problem, config.gammas(), 0, config)


def _segment_gap(a, b, s_a, s_b):
    """Largest vertical gap between chord a-b and the support lines at a and b.

    ``s_a`` / ``s_b`` are support slopes (the region lies above those lines).
    A convex boundary between a and b lies inside this triangle.
    """
    (xa, ya), (xb, yb) = a, b
    chord = (yb - ya) / (xb - xa)
    s_a = min(s_a, chord)
    s_b = max(s_b, chord)
    if s_b - s_a <= 1e-15:
        return 0.0
    x = (yb - ya + s_a * xa - s_b * xb) / (s_a - s_b)
    x = min(max(x, xa), xb)
    return float(ya + chord * (x - xa) - (ya + s_a * (x - xa)))


def _support_slopes(cands, i):
    """Support slopes known at candidate i's point: from every weight that landed there."""
    x, y = tuple(cands[i][0])
    out = []
    for k, (pt, _, g, _) in enumerate(cands):
        if abs(pt.r_c - x) <= 1e-7 and abs(pt.r_u - y) <= 1e-7:
            if k == 0:
                out.append(-1.0)  # r_c + r_u >= H(S|Y)
            elif k == 1:
                out.append(0.0)  # r_u >= 0
            elif g is not None and g > 0:
                out.append(-1.0 / g)
    return out or [-1.0, 0.0]


def _refine_gammas(cands, idx, tried, tol):
    out = []
    for i, j in zip(idx[:-1], idx[1:]):
        a, b = tuple(cands[i][0]), tuple(cands[j][0])
        slope = (b[1] - a[1]) / (b[0] - a[0])
        if slope >= -1e-12:
            continue
        gap = _segment_gap(a, b, max(_support_slopes(cands, i)), min(_support_slopes(cands, j)))
        if gap <= tol:
            continue
        g = -1.0 / slope
        if any(abs(g - t) <= 1e-9 * t for t in tried):
            continue
        tried.append(g)
        out.append(g)
    return out


def trace_boundary(problem: CachingProblem, config: TracerConfig = None) -> Boundary:
    """Lower-left boundary of the achievable region, traced by scalarization.

    Weights come from a fixed log grid, then from up to ``refine_rounds``
    passes that solve at the weight matching the slope of every hull
    segment whose chord may still sit more than ``refine_tol`` above the
    boundary.  Deterministic given ``config.seed``; the analytic endpoints
    (0, H(S|Y)) and (H(X|Y), 0) are always candidates.
    """
    config = config or TracerConfig()
    _require_single(problem)
    kernel = _Kernel(problem)
    cands = _endpoints(problem)
    nonconv, all_cells = [], []

    def absorb(cells):
        for g, ch, J, ok in cells:
            if not ok:
                nonconv.append(len(all_cells))
            all_cells.append((g, ch, J, ok))
            pt = achievable_point(problem, ch)
            if pt.r_c < 1e-7:
                continue  # numerically the left endpoint
            cands.append((pt, ch, g, ok))

    gammas = config.gammas()
    absorb(_best_cells(kernel, problem, gammas, 0, config))
    tried = [float(g) for g in gammas]
    for _ in range(config.refine_rounds):
        idx = lower_left_hull([tuple(c[0]) for c in cands], (0, 1))
        new = _refine_gammas(cands, idx, tried, config.refine_tol)
        if not new:
            break
        absorb(_best_cells(kernel, problem, new, len(all_cells), config))
    diag = {"nonconverged": nonconv, "cells": all_cells}
    return _hull_boundary(cands, diag, protected=(0, 1))


# --------------------------------------------------------------------------
# brute force


def _batch_points(problem: CachingProblem, W) -> np.ndarray:
    """(r_c, r_u) in bits for a stack of channels, from marginal entropies."""
    pxy = problem.p_xy
    fidx = problem.f_index[0]
    nx, ny = pxy.shape
    ns = len(problem.s_alphabets[0])
    pxyv = pxy[None, :, :, None] * W[:, :, None, :]
    onehot = np.zeros((nx, ny, ns))
    onehot[np.arange(nx)[:, None], np.arange(ny)[None, :], fidx] = 1.0
    pyvs = np.einsum("bxyv,xys->byvs", pxyv, onehot)

    def h(t, axes):
        t = np.asarray(t)
        return -_xlogx_sum(t, axes) / LN2

    all3 = (1, 2, 3)
    h_xyv = h(pxyv, all3)
    h_yv = h(pxyv.sum(axis=1), (1, 2))
    h_xy = h(pxy, (0, 1))
    h_y = h(pxy.sum(axis=0), (0,))
    h_yvs = h(pyvs, all3)
    r_c = h_xy + h_yv - h_xyv - h_y  # H(X|Y) - H(X|V,Y)
    r_u = h_yvs - h_yv
    return np.stack([np.maximum(r_c, 0.0), np.maximum(r_u, 0.0)], axis=1)


def _simplex_grid(K: int, d: int) -> np.ndarray:
    rows = [c for c in itertools.product(range(K + 1), repeat=d - 1) if sum(c) <= K]
    return np.array([list(c) + [K - sum(c)] for c in rows], dtype=float) / K


def grid_size(K: int, v_card: int, nx: int) -> int:
    return math.comb(K + v_card - 1, v_card - 1) ** nx


def _grid_channels(nx, K, v_card, chunk=20_000):
    rows = _simplex_grid(K, v_card)
    for combo in _chunks(itertools.product(range(len(rows)), repeat=nx), chunk):
        yield rows[np.array(combo)]


def _chunks(it, n):
    while True:
        block = list(itertools.islice(it, n))
        if not block:
            return
        yield block


def grid_oracle(problem: CachingProblem, grid_step: float = 1 / 16, v_card: int = 2,
                budget: int = ORACLE_BUDGET, return_all: bool = False):
    """Exhaustive lower-left hull over channels with rows on the 1/K simplex grid."""
    _require_single(problem)
    K = int(round(1 / grid_step))
    if K < 1 or abs(K * grid_step - 1) > 1e-9:
        raise ValidationError(f"grid_step must be 1/K for a positive integer K, got {grid_step!r}")
    if v_card < 1:
        raise ValidationError("v_card must be >= 1")
    nx = len(problem.x_alphabet)
    n = grid_size(K, v_card, nx)
    if n > budget:
        raise BudgetError(
            f"grid oracle needs {n} channel evaluations (K={K}, v_card={v_card}, |X|={nx}); budget is {budget}")
    best_pts, best_W = [], []
    all_pts = []
    for W in _grid_channels(nx, K, v_card):
        pts = _batch_points(problem, W)
        if return_all:
            all_pts.append((pts, W))
        keep = lower_left_hull(pts)
        best_pts.append(pts[keep])
        best_W.append(W[keep])
    pts = np.concatenate(best_pts)
    Ws = np.concatenate(best_W)
    idx = lower_left_hull(pts)
    b = Boundary(
        points=[RatePoint(*pts[i]) for i in idx],
        witnesses=[TestChannel(Ws[i]) for i in idx],
        gammas=[None] * len(idx),
        converged=[True] * len(idx),
        diagnostics={"n_channels": n, "K": K, "v_card": v_card},
    )
    if return_all:
        return b, all_pts
    return b


# --------------------------------------------------------------------------
# cache-only corner


@dataclass
class RcStarResult:
    value: float
    witness: TestChannel
    r_u: float
    eps: float
    n_candidates: int


def _hard(W: np.ndarray) -> np.ndarray:
    out = np.zeros_like(W)
    out[np.arange(W.shape[0]), np.argmax(W, axis=1)] = 1.0
    return out


def _deterministic_channels(nx, v_card, budget=200_000):
    if v_card ** nx > budget:
        return np.zeros((0, nx, v_card))
    eye = np.eye(v_card)
    return np.array([eye[list(lab)] for lab in itertools.product(range(v_card), repeat=nx)])


def rc_star(problem: CachingProblem, eps: float = 1e-9, config: TracerConfig = None,
            boundary: Boundary = None, oracle_step: float = 1 / 8, oracle_v_card: int = 2) -> RcStarResult:
    """Smallest I(X;V|Y) over candidate channels with H(f(X,Y)|V,Y) <= eps.

    Candidates: the tracer's per-weight witnesses and their hard-decision
    projections, every deterministic channel with the tracer's |V| (when
    enumerable), the grid oracle's channels (when within budget) and the
    identity channel.
    """
    _require_single(problem)
    if eps < 0:
        raise ValidationError("eps must be >= 0")
    config = config or TracerConfig()
    if boundary is None:
        boundary = trace_boundary(problem, config)
    nx = len(problem.x_alphabet)
    v_card = config.resolved_v_card(problem)
    stacks = []
    for _, ch, _, _ in boundary.diagnostics.get("cells", []):
        stacks.append(_pad(ch.matrix[None], v_card))
        stacks.append(_pad(_hard(ch.matrix)[None], v_card))
    for ch in boundary.witnesses or []:
        if ch is not None:
            stacks.append(_pad(ch.matrix[None], max(v_card, ch.v_card)))
    stacks.append(_deterministic_channels(nx, v_card))
    if nx <= v_card:
        stacks.append(_pad(np.eye(nx)[None], v_card))
    best = (math.inf, None, None)
    count = 0
    groups = {}
    for s in stacks:
        if len(s):
            groups.setdefault(s.shape[2], []).append(s)
    K = int(round(1 / oracle_step))
    if grid_size(K, oracle_v_card, nx) <= ORACLE_BUDGET:
        for W in _grid_channels(nx, K, oracle_v_card):
            groups.setdefault(oracle_v_card, []).append(W)
    for parts in groups.values():
        W = np.concatenate(parts)
        pts = _batch_points(problem, W)
        count += len(W)
        ok = np.flatnonzero(pts[:, 1] <= eps)
        if ok.size:
            i = ok[np.argmin(pts[ok, 0])]
            if pts[i, 0] < best[0]:
                best = (float(pts[i, 0]), W[i], float(pts[i, 1]))
    if best[1] is None:
        raise InfeasibleError(
            f"no candidate channel reaches H(f(X,Y)|V,Y) <= {eps}; raise eps or v_card")
    return RcStarResult(best[0], TestChannel(best[1]), best[2], eps, count)


def _pad(W, v_card):
    if W.shape[2] >= v_card:
        return W
    return np.concatenate([W, np.zeros(W.shape[:2] + (v_card - W.shape[2],))], axis=2)
