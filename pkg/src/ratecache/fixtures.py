"""Builders for the canonical caching problems used in tests, docs and the CLI."""
from __future__ import annotations

import itertools

import numpy as np

from .probcore import CachingProblem


def selector_problem(component_joint, p_y=None) -> CachingProblem:
    """X is the vector of N components, Y picks one of them: f(x, n) = x[n-1].

    ``component_joint`` is an N-d table over the component alphabets
    (integers 0..k-1 on each axis).  X symbols are strings of the component
    values, e.g. ``"01"``; Y symbols are ``1..N``.  X is independent of Y.
    """
    comp = np.asarray(component_joint, dtype=float)
    n = comp.ndim
    if p_y is None:
        p_y = np.full(n, 1.0 / n)
    p_y = np.asarray(p_y, dtype=float)
    tuples = list(itertools.product(*(range(k) for k in comp.shape)))
    xs = tuple("".join(str(c) for c in t) for t in tuples)
    p_x = np.array([comp[t] for t in tuples])
    f = [[t[j] for j in range(n)] for t in tuples]
    return CachingProblem(xs, tuple(range(1, n + 1)), np.outer(p_x, p_y), (f,))


def dsbs_table(q: float) -> np.ndarray:
    return np.array([[(1 - q) / 2, q / 2], [q / 2, (1 - q) / 2]])


def dsbs_selector(q: float, p_y=(0.5, 0.5)) -> CachingProblem:
    """Two components forming a doubly symmetric binary source with crossover q."""
    return selector_problem(dsbs_table(q), p_y)


def independent_bits_selector(p_y=(0.5, 0.5)) -> CachingProblem:
    return dsbs_selector(0.5, p_y)


def nested_selector(p_y=(0.5, 0.5)) -> CachingProblem:
    """Component 1 is the high bit of component 2, which is uniform on 4 values."""
    xs = ("0", "1", "2", "3")
    f = [[x >> 1, x] for x in range(4)]
    p_x = np.full(4, 0.25)
    return CachingProblem(xs, (1, 2), np.outer(p_x, p_y), (f,))


def xor_problem() -> CachingProblem:
    """X, Y independent fair bits, f(x, y) = x xor y."""
    f = [[x ^ y for y in (0, 1)] for x in (0, 1)]
    return CachingProblem((0, 1), (0, 1), np.full((2, 2), 0.25), (f,))


def example2_problem() -> CachingProblem:
    """X fair bit, Y uniform on {1, 2}; f1 = x * 1{y = 1}, f2 = x."""
    f1 = [[x * (y == 1) for y in (1, 2)] for x in (0, 1)]
    f2 = [[x for _ in (1, 2)] for x in (0, 1)]
    return CachingProblem((0, 1), (1, 2), np.full((2, 2), 0.25), (f1, f2), ((0, 1), (0, 1)))


def random_problem(rng: np.random.Generator, nx: int = 2, ny: int = 2, ns: int = 2) -> CachingProblem:
    p = rng.dirichlet(np.ones(nx * ny)).reshape(nx, ny)
    f = rng.integers(0, ns, size=(nx, ny)).tolist()
    return CachingProblem(tuple(range(nx)), tuple(range(ny)), p, (f,), (tuple(range(ns)),))
