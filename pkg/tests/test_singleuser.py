import numpy as np
import pytest

from ratecache import fixtures
from ratecache.closedform import DsbsSpec, dsbs_channel, dsbs_inner_point, dsbs_outer_bound, independent_boundary, ComponentSpec
from ratecache.errors import ArityError, BudgetError, InfeasibleError, ValidationError
from ratecache.probcore import CachingProblem, TestChannel, binary_entropy
from ratecache.singleuser import (RatePoint, TracerConfig, achievable_point, grid_oracle, is_partially_invertible,
                                  lower_left_hull, rc_star, ru_star, scalarized_solve, sum_rate_lower_bound,
                                  trace_boundary, trace_cells)

H01 = binary_entropy(0.1)


def identity_problem():
    """f(x, y) = x with X a fair bit independent of a fair Y."""
    return CachingProblem((0, 1), (0, 1), np.full((2, 2), 0.25), ([[0, 0], [1, 1]],))


def request_only_problem():
    return CachingProblem((0, 1), (0, 1), np.full((2, 2), 0.25), ([[0, 1], [0, 1]],))


class TestRatePoint:
    def test_clips_rounding_residue(self):
        assert RatePoint(-1e-12, 0.5).r_c == 0.0

    def test_rejects_negative(self):
        with pytest.raises(ValidationError):
            RatePoint(-0.1, 0.0)


class TestAchievablePoint:
    @pytest.mark.parametrize("make", [fixtures.xor_problem, fixtures.nested_selector,
                                      lambda: fixtures.dsbs_selector(0.1)])
    def test_identity_and_constant_channels(self, make):
        p = make()
        nx = len(p.x_alphabet)
        h_x_given_y = float(-(p.p_xy[p.p_xy > 0] * np.log2((p.p_xy / p.p_y)[p.p_xy > 0])).sum())
        assert tuple(achievable_point(p, TestChannel.identity(nx))) == pytest.approx((h_x_given_y, 0.0), abs=1e-12)
        assert tuple(achievable_point(p, TestChannel.constant(nx))) == pytest.approx((0.0, ru_star(p)), abs=1e-12)

    def test_dsbs_critical_channel(self):
        pt = achievable_point(fixtures.dsbs_selector(0.1), dsbs_channel(DsbsSpec(0.1).gamma))
        assert pt.r_c == pytest.approx(0.8726, abs=5e-4)
        assert pt.r_u == pytest.approx(0.2982, abs=5e-4)

    def test_two_function_problem_rejected(self):
        with pytest.raises(ArityError):
            achievable_point(fixtures.example2_problem(), TestChannel.constant(2))


class TestCorners:
    @pytest.mark.parametrize("make, value", [
        (identity_problem, 1.0),
        (request_only_problem, 0.0),
        (lambda: fixtures.dsbs_selector(0.3), 1.0),
    ])
    def test_ru_star_and_sum_rate(self, make, value):
        p = make()
        assert ru_star(p) == pytest.approx(value, abs=1e-12)
        assert sum_rate_lower_bound(p) == pytest.approx(value, abs=1e-12)

    @pytest.mark.parametrize("make, expected", [
        (fixtures.xor_problem, True),
        (identity_problem, True),
        (fixtures.independent_bits_selector, False),
    ])
    def test_partial_invertibility(self, make, expected):
        assert is_partially_invertible(make()) is expected


class TestScalarizedSolve:
    @pytest.mark.parametrize("seed", range(4))
    def test_monotone_descent(self, seed):
        rng = np.random.default_rng(seed)
        p = fixtures.random_problem(rng, nx=3, ny=2, ns=3)
        init = TestChannel(rng.dirichlet(np.ones(4), size=3))
        res = scalarized_solve(p, 2.0, init)
        h = np.array(res.history)
        assert np.all(np.diff(h) <= 1e-12)
        assert res.objective == pytest.approx(h[-1])

    def test_zero_weight_gives_constant(self):
        p = fixtures.dsbs_selector(0.1)
        res = scalarized_solve(p, 0.0, TestChannel(np.random.default_rng(0).dirichlet(np.ones(5), size=4)))
        assert res.objective == pytest.approx(0.0, abs=1e-9)
        pt = achievable_point(p, res.channel)
        assert tuple(pt) == pytest.approx((0.0, 1.0), abs=1e-6)

    def test_large_weight_on_identical_components(self):
        p = fixtures.dsbs_selector(0.0)
        cfg = TracerConfig()
        best = min((scalarized_solve(p, 1e3, TestChannel(np.random.default_rng(r).dirichlet(np.ones(5), size=4)), cfg)
                    for r in range(8)), key=lambda s: s.objective)
        pt = achievable_point(p, best.channel)
        assert best.objective / 1e3 < 2e-3
        assert tuple(pt) == pytest.approx((1.0, 0.0), abs=1e-3)

    def test_unit_weight_on_independent_bits(self):
        # oracle: min over the closed-form boundary of r + R_u(r)
        spec = ComponentSpec([1.0, 1.0], [0.5, 0.5])
        floor = min(r + independent_boundary(spec, r) for r in np.linspace(0, 2, 2001))
        p = fixtures.independent_bits_selector()
        best = min(scalarized_solve(p, 1.0, TestChannel(np.random.default_rng(r).dirichlet(np.ones(5), size=4))).objective
                   for r in range(8))
        assert floor == pytest.approx(1.0)
        assert floor - 1e-9 <= best <= 1.0 + 1e-3

    def test_negative_weight(self):
        with pytest.raises(ValidationError):
            scalarized_solve(fixtures.xor_problem(), -1.0, TestChannel.identity(2))

    def test_iteration_cap_flags_nonconvergence(self):
        p = fixtures.dsbs_selector(0.1)
        init = TestChannel(np.random.default_rng(3).dirichlet(np.ones(5), size=4))
        res = scalarized_solve(p, 3.0, init, TracerConfig(max_iters=2))
        assert not res.converged and res.n_iter == 2


class TestHull:
    def test_drops_dominated_and_collinear(self):
        pts = [(0, 1), (0.5, 0.75), (1, 0.5), (1, 0.9), (2, 0), (3, 0)]
        assert lower_left_hull(pts) == [0, 4]

    def test_dedup_keeps_lowest(self):
        assert lower_left_hull([(0, 1), (1e-12, 0.5), (1, 0)]) == [1, 2]


@pytest.mark.parametrize("name", ["indep_bits_60_40", "two_fair_bits", "nested", "xor", "dsbs_0.1"])
class TestTracedBoundary:
    def test_shape_invariants(self, name, traced_boundary):
        p, b = traced_boundary(name)
        rc, ru = b.r_c, b.r_u
        assert tuple(b.points[0]) == pytest.approx((0.0, ru_star(p)), abs=1e-9)
        assert np.all(np.diff(rc) > 0)
        assert np.all(np.diff(ru) <= 0)
        s = b.slopes()
        assert np.all(s >= -1 - 1e-9) and np.all(s <= 0)
        assert np.all(np.diff(s) >= -1e-9)
        assert np.all(rc + ru >= ru_star(p) - 1e-6)
        assert b.diagnostics["nonconverged"] == []

    def test_witnesses_reproduce_points(self, name, traced_boundary):
        p, b = traced_boundary(name)
        for pt, w in zip(b.points, b.witnesses):
            assert tuple(achievable_point(p, w)) == pytest.approx(tuple(pt), abs=1e-12)


def test_two_fair_bits_line(traced_boundary):
    _, b = traced_boundary("two_fair_bits")
    r = np.linspace(0, 2, 201)
    np.testing.assert_allclose(b.value_at(r), (2 - r) / 2, atol=5e-3)


def test_identical_components_line():
    p = fixtures.dsbs_selector(0.0)
    b = trace_boundary(p, TracerConfig(n_tradeoff_points=16, n_restarts=8))
    r = np.linspace(0, 1, 101)
    np.testing.assert_allclose(b.value_at(r), 1 - r, atol=5e-3)


def test_dsbs_above_outer_bound(traced_boundary):
    _, b = traced_boundary("dsbs_0.1")
    for pt in b.points:
        assert pt.r_u >= dsbs_outer_bound(0.1, pt.r_c) - 5e-3


def test_deterministic_and_thread_independent():
    p = fixtures.random_problem(np.random.default_rng(5), nx=3, ny=2, ns=2)
    a = trace_boundary(p, TracerConfig(n_tradeoff_points=8, n_restarts=4, threads=1))
    b = trace_boundary(p, TracerConfig(n_tradeoff_points=8, n_restarts=4, threads=3))
    assert [tuple(x) for x in a.points] == [tuple(x) for x in b.points]
    for u, v in zip(a.witnesses, b.witnesses):
        np.testing.assert_array_equal(u.matrix, v.matrix)


def test_trace_cells_one_per_weight():
    cfg = TracerConfig(n_tradeoff_points=5, n_restarts=2)
    cells = trace_cells(fixtures.xor_problem(), cfg)
    assert [c[0] for c in cells] == pytest.approx(list(cfg.gammas()))


class TestGridOracle:
    def test_single_symbol_v(self):
        p = fixtures.dsbs_selector(0.1)
        b = grid_oracle(p, 1 / 4, v_card=1)
        assert [tuple(x) for x in b.points] == [pytest.approx((0.0, 1.0))]

    def test_reaches_identity_corner(self):
        p = fixtures.xor_problem()
        b = grid_oracle(p, 1 / 2, v_card=2)
        assert tuple(b.points[-1]) == pytest.approx((1.0, 0.0), abs=1e-12)

    def test_budget_guard(self):
        with pytest.raises(BudgetError, match="budget"):
            grid_oracle(fixtures.dsbs_selector(0.1), 1 / 64, v_card=4)

    def test_step_must_be_reciprocal(self):
        with pytest.raises(ValidationError):
            grid_oracle(fixtures.xor_problem(), 0.3)

    def test_dsbs_between_bounds(self):
        q = 0.1
        b = grid_oracle(fixtures.dsbs_selector(q), 1 / 16, v_card=2)
        alphas = np.linspace(DsbsSpec(q).gamma, 0.5, 101)
        sweep = sorted(tuple(dsbs_inner_point(q, a)[0]) for a in alphas)
        xs, ys = zip(*sweep)
        for pt in b.points:
            assert pt.r_u >= dsbs_outer_bound(q, pt.r_c) - 1e-9
            if xs[0] <= pt.r_c <= xs[-1]:
                assert pt.r_u <= np.interp(pt.r_c, xs, ys) + 2e-2


class TestRcStar:
    def test_identity_function(self):
        p = identity_problem()
        res = rc_star(p, config=TracerConfig(n_tradeoff_points=8, n_restarts=4))
        assert res.value == pytest.approx(1.0, abs=1e-9)
        assert res.r_u <= 1e-9

    def test_dsbs(self, traced_boundary):
        p, b = traced_boundary("dsbs_0.1")
        res = rc_star(p, boundary=b)
        assert res.value == pytest.approx(1 + H01, abs=2e-2)
        assert ru_star(p) <= res.value + 1e-9

    def test_infeasible(self):
        p = fixtures.dsbs_selector(0.1)
        b = trace_boundary(p, TracerConfig(n_tradeoff_points=2, n_restarts=1, refine_rounds=0))
        with pytest.raises(InfeasibleError):
            rc_star(p, eps=1e-9, config=TracerConfig(v_card=1), boundary=type(b)(b.points[:1], [None], [None], [True]),
                    oracle_v_card=1)
