import numpy as np
import pytest

from ratecache import fixtures
from ratecache.closedform import (EXAMPLE1_CURVES, ComponentSpec, DsbsSpec, component_joint,
                                  component_spec_from_problem, dsbs_channel, dsbs_inner_point, dsbs_outer_bound,
                                  dsbs_rcrit, example1_curves, independent_boundary, nested_boundary,
                                  uniform_request_boundary, wyner_common_info)
from ratecache.errors import DomainError, ValidationError
from ratecache.probcore import JointPmf, binary_entropy, cond_entropy
from ratecache.singleuser import grid_oracle

H01 = binary_entropy(0.1)


class TestIndependentBoundary:
    @pytest.mark.parametrize("r, expected", [(0.0, 1.0), (1.0, 0.4), (2.0, 0.0), (3.0, 0.0)])
    def test_values(self, r, expected):
        assert independent_boundary(ComponentSpec([1, 1], [0.6, 0.4]), r) == pytest.approx(expected, abs=1e-12)

    def test_matches_grid_oracle(self):
        # (1, 0.4) is reached by caching the popular component exactly
        b = grid_oracle(fixtures.independent_bits_selector((0.6, 0.4)), 1 / 4, v_card=2)
        assert b.value_at(1.0) == pytest.approx(0.4, abs=1e-12)
        assert b.value_at(0.0) == pytest.approx(1.0, abs=1e-12)

    def test_unsorted_rejected(self):
        with pytest.raises(ValidationError, match="sorted"):
            independent_boundary(ComponentSpec([1, 1], [0.4, 0.6]), 0.5)

    def test_negative_rate(self):
        with pytest.raises(DomainError):
            independent_boundary(ComponentSpec([1], [1.0]), -0.1)


class TestNestedBoundary:
    @pytest.mark.parametrize("r, expected", [(0.0, 1.5), (1.0, 0.5), (2.0, 0.0), (5.0, 0.0)])
    def test_values(self, r, expected):
        assert nested_boundary(ComponentSpec([1, 2], [0.5, 0.5]), r) == pytest.approx(expected, abs=1e-12)

    def test_decreasing_entropies_rejected(self):
        with pytest.raises(ValidationError):
            nested_boundary(ComponentSpec([2, 1], [0.5, 0.5]), 0.5)

    def test_zero_cache_is_conditional_entropy(self):
        spec = ComponentSpec([0.5, 1.0, 3.0], [0.2, 0.3, 0.5])
        assert nested_boundary(spec, 0.0) == pytest.approx(0.1 + 0.3 + 1.5)


@pytest.mark.parametrize("fn, spec", [
    (independent_boundary, ComponentSpec([1.0, 0.5, 2.0], [0.5, 0.3, 0.2])),
    (nested_boundary, ComponentSpec([0.5, 1.0, 2.0], [0.5, 0.3, 0.2])),
])
def test_convex_nonincreasing_piecewise_linear(fn, spec):
    r = np.linspace(0, 4, 4001)
    v = np.array([fn(spec, x) for x in r])
    d = np.diff(v)
    assert np.all(d <= 1e-12)
    assert np.all(np.diff(d) >= -1e-12)
    # piecewise linear: second differences vanish away from a few kinks
    assert np.count_nonzero(np.abs(np.diff(d)) > 1e-12) <= 2 * len(spec.entropies)


class TestComponentSpec:
    def test_rejects_mismatched_lengths(self):
        with pytest.raises(ValidationError):
            ComponentSpec([1, 1, 1], [0.5, 0.5])

    def test_rejects_negative_entropy(self):
        with pytest.raises(ValidationError):
            ComponentSpec([-1, 1], [0.5, 0.5])

    def test_from_independent_problem_sorts(self):
        spec = component_spec_from_problem(fixtures.independent_bits_selector((0.3, 0.7)))
        assert spec.request_pmf == pytest.approx((0.7, 0.3))
        assert spec.entropies == pytest.approx((1.0, 1.0))

    def test_from_nested_problem(self):
        spec = component_spec_from_problem(fixtures.nested_selector(), kind="nested")
        assert spec.entropies == pytest.approx((1.0, 2.0))

    def test_structure_checked(self):
        with pytest.raises(ValidationError, match="not independent"):
            component_spec_from_problem(fixtures.dsbs_selector(0.1))
        with pytest.raises(ValidationError, match="function"):
            component_spec_from_problem(fixtures.dsbs_selector(0.1), kind="nested")

    def test_component_joint(self):
        j = component_joint(fixtures.dsbs_selector(0.2))
        np.testing.assert_allclose(j.table, fixtures.dsbs_table(0.2))


class TestDsbs:
    def test_spec_derived_values(self):
        s = DsbsSpec(0.1)
        assert s.q_prime == pytest.approx(0.0527864045, abs=1e-9)
        assert s.gamma == pytest.approx(0.5 - np.sqrt(0.8) / 1.8, abs=1e-15)
        assert 0 <= s.gamma <= 0.5

    @pytest.mark.parametrize("q", [-0.01, 0.51])
    def test_domain(self, q):
        with pytest.raises(DomainError):
            DsbsSpec(q)
        with pytest.raises(DomainError):
            dsbs_rcrit(q)

    @pytest.mark.parametrize("q, value, tol", [(0.0, 1.0, 1e-12), (0.5, 0.0, 1e-12), (0.1, 0.8726, 5e-4)])
    def test_rcrit(self, q, value, tol):
        assert dsbs_rcrit(q) == pytest.approx(value, abs=tol)

    def test_inner_point_examples(self):
        assert tuple(dsbs_inner_point(0.1, 0.5)[0]) == pytest.approx((0.0, 1.0), abs=1e-12)
        assert tuple(dsbs_inner_point(0.0, 0.0)[0]) == pytest.approx((1.0, 0.0), abs=1e-12)

    @pytest.mark.parametrize("q", [0.05, 0.1, 0.2, 0.3, 0.45])
    def test_inner_point_at_gamma_is_critical(self, q):
        pt, _ = dsbs_inner_point(q, DsbsSpec(q).gamma)
        rc = dsbs_rcrit(q)
        assert pt.r_c == pytest.approx(rc, abs=1e-9)
        assert pt.r_u == pytest.approx(0.5 * (1 + binary_entropy(q) - rc), abs=1e-9)

    @pytest.mark.parametrize("alpha", [-0.1, 0.6])
    def test_alpha_domain(self, alpha):
        with pytest.raises(DomainError):
            dsbs_inner_point(0.1, alpha)

    @pytest.mark.parametrize("q", [0.05, 0.1, 0.25, 0.4])
    def test_inner_never_below_outer(self, q):
        for a in np.linspace(DsbsSpec(q).gamma, 0.5, 41):
            pt, _ = dsbs_inner_point(q, a)
            assert pt.r_u >= dsbs_outer_bound(q, pt.r_c) - 1e-9

    @pytest.mark.parametrize("q", [0.1, 0.3])
    @pytest.mark.parametrize("alpha_frac", [0.0, 0.3, 1.0])
    def test_xor_entropy_identity(self, q, alpha_frac):
        g = DsbsSpec(q).gamma
        alpha = g + alpha_frac * (0.5 - g)
        t = fixtures.dsbs_table(q).ravel()  # x symbols 00, 01, 10, 11
        w = dsbs_channel(alpha).matrix
        bits = [(0, 0), (0, 1), (1, 0), (1, 1)]
        for n in range(2):
            joint = np.zeros((2, 2))  # [component, v]
            xor = np.zeros(2)
            for i, b in enumerate(bits):
                for v in range(2):
                    joint[b[n], v] += t[i] * w[i, v]
                    xor[b[n] ^ v] += t[i] * w[i, v]
            h_cond = cond_entropy(JointPmf(joint), 0, 1)
            h_xor = float(-(xor[xor > 0] * np.log2(xor[xor > 0])).sum())
            assert h_xor == pytest.approx(h_cond, abs=1e-12)

    @pytest.mark.parametrize("r_c, expected", [(0.0, 1.0), (1 + H01, 0.0), (5.0, 0.0)])
    def test_outer_bound(self, r_c, expected):
        assert dsbs_outer_bound(0.1, r_c) == pytest.approx(expected, abs=1e-12)

    def test_outer_bound_at_rcrit(self):
        assert dsbs_outer_bound(0.1, dsbs_rcrit(0.1)) == pytest.approx(0.2982, abs=5e-4)


class TestWyner:
    def test_independent_components(self):
        res = wyner_common_info(JointPmf(np.full((2, 2), 0.25)))
        assert res.value == pytest.approx(0.0, abs=1e-6)

    def test_identical_components(self):
        res = wyner_common_info(JointPmf(np.diag([0.5, 0.5])))
        assert res.value == pytest.approx(1.0, abs=1e-6)
        assert res.total_correlation <= 1e-4

    @pytest.mark.parametrize("q", [0.05, 0.1, 0.2, 0.3])
    def test_matches_closed_form(self, q):
        res = wyner_common_info(JointPmf(fixtures.dsbs_table(q)))
        assert res.converged
        assert res.total_correlation <= 1e-4
        assert res.value == pytest.approx(dsbs_rcrit(q), abs=5e-3)

    def test_needs_two_components(self):
        with pytest.raises(ValidationError):
            wyner_common_info(JointPmf([0.5, 0.5]))

    def test_unreachable_constraint_flagged(self):
        res = wyner_common_info(JointPmf(fixtures.dsbs_table(0.1)), schedule=(0.01,), n_restarts=2)
        assert not res.converged


@pytest.fixture(scope="module")
def dsbs_case():
    problem = fixtures.dsbs_selector(0.1)
    # the first call traces the reduced problem; later calls reuse its witnesses
    return problem, uniform_request_boundary(problem, 0.5)


@pytest.fixture(scope="module")
def rows():
    return example1_curves(0.1, 100)


def _witness_trace(case):
    """Wrap the envelope witnesses of an earlier call as a boundary-like object."""
    from types import SimpleNamespace
    return SimpleNamespace(witnesses=[w for w in case[1].witnesses if w is not None], diagnostics={})


class TestUniformRequests:
    def test_endpoints(self, dsbs_case):
        problem, _ = dsbs_case
        h = 1 + H01
        assert uniform_request_boundary(problem, h, boundary=_witness_trace(dsbs_case)).value == pytest.approx(0.0, abs=1e-9)
        assert uniform_request_boundary(problem, 0.0, boundary=_witness_trace(dsbs_case)).value == pytest.approx(1.0, abs=1e-9)

    def test_critical_point(self, dsbs_case):
        problem, _ = dsbs_case
        rc = dsbs_rcrit(0.1)
        res = uniform_request_boundary(problem, rc, boundary=_witness_trace(dsbs_case))
        assert res.value == pytest.approx(0.5 * (1 + H01 - rc), abs=5e-4)
        assert res.value >= (res.h_xbar - rc) / 2 - 1e-12

    def test_domain(self, dsbs_case):
        problem, _ = dsbs_case
        with pytest.raises(DomainError):
            uniform_request_boundary(problem, 2.0, boundary=_witness_trace(dsbs_case))

    def test_nonuniform_rejected(self):
        with pytest.raises(ValidationError, match="uniform"):
            uniform_request_boundary(fixtures.dsbs_selector(0.1, (0.6, 0.4)), 0.5)


class TestExample1Curves:
    def _curve(self, rows, cid):
        pts = [(rc, ru) for c, rc, ru in rows if c == cid]
        return np.array(pts)

    def test_four_curves_on_shared_grid(self, rows):
        grids = [self._curve(rows, c)[:, 0] for c in EXAMPLE1_CURVES]
        for g in grids[1:]:
            np.testing.assert_array_equal(g, grids[0])
        assert np.all(np.diff(grids[0]) > 0)

    def test_all_meet_at_zero_cache(self, rows):
        for c in EXAMPLE1_CURVES:
            assert self._curve(rows, c)[0] == pytest.approx((0.0, 1.0))

    def test_inner_dominate_outer(self, rows):
        outer = self._curve(rows, "outer")[:, 1]
        for c in EXAMPLE1_CURVES[:3]:
            assert np.all(self._curve(rows, c)[:, 1] >= outer - 1e-9)

    def test_third_touches_outer_at_rcrit(self, rows):
        rc = dsbs_rcrit(0.1)
        c3 = self._curve(rows, "inner3")
        i = int(np.argmin(np.abs(c3[:, 0] - rc)))
        assert c3[i, 0] == rc
        assert c3[i, 1] == pytest.approx(dsbs_outer_bound(0.1, rc), abs=1e-6)

    def test_first_ends_at_zero(self, rows):
        c1 = self._curve(rows, "inner1")
        assert c1[-1] == pytest.approx((1 + H01, 0.0))

    def test_ordering_of_inner_bounds(self, rows):
        c1, c2, c3 = (self._curve(rows, c)[:, 1] for c in EXAMPLE1_CURVES[:3])
        assert np.all(c1 >= c2 - 1e-12) and np.all(c2 >= c3 - 1e-12)

    @pytest.mark.parametrize("q", [0.0, 0.5])
    def test_domain(self, q):
        with pytest.raises(DomainError):
            example1_curves(q)
