import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ratecache import fixtures
from ratecache.errors import DomainError, ValidationError
from ratecache.probcore import (CachingProblem, JointPmf, Pmf, TestChannel, binary_entropy, cond_entropy,
                                cond_mutual_info, conditional_total_correlation, entropy, induced_joint,
                                mutual_info, total_correlation)

TOL = 1e-12


def random_joint(seed, shape):
    rng = np.random.default_rng(seed)
    return JointPmf(rng.dirichlet(np.ones(int(np.prod(shape)))).reshape(shape))


seeds = st.integers(0, 2**32 - 1)
shapes = st.lists(st.integers(1, 4), min_size=3, max_size=4).map(tuple)


class TestPmf:
    def test_renormalizes_within_tolerance(self):
        p = Pmf([0.5, 0.5 + 1e-10])
        assert p.probs.sum() == pytest.approx(1.0, abs=1e-15)

    @pytest.mark.parametrize("bad, msg", [
        ([0.5, 0.4], "sum to 0.9"),
        ([1.2, -0.2], "negative"),
        ([np.nan, 1.0], "non-finite"),
    ])
    def test_rejects(self, bad, msg):
        with pytest.raises(ValidationError, match=msg):
            Pmf(bad)

    def test_frozen_array(self):
        p = Pmf([0.25, 0.75])
        with pytest.raises(ValueError):
            p.probs[0] = 1.0


class TestEntropy:
    @pytest.mark.parametrize("p, h", [
        ([1.0], 0.0),
        ([0.5, 0.5], 1.0),
        ([0.25] * 4, 2.0),
        ([0.5, 0.25, 0.25], 1.5),
    ])
    def test_known_values(self, p, h):
        assert entropy(p) == pytest.approx(h, abs=TOL)

    def test_binary_entropy(self):
        assert binary_entropy(0.0) == 0.0
        assert binary_entropy(0.5) == pytest.approx(1.0)
        assert binary_entropy(0.1) == pytest.approx(0.4689955935892812, abs=TOL)

    @pytest.mark.parametrize("p", [-0.1, 1.5])
    def test_binary_entropy_domain(self, p):
        with pytest.raises(DomainError):
            binary_entropy(p)


class TestJointPmf:
    def test_named_axes_and_marginal_order(self):
        j = random_joint(0, (2, 3, 4))
        j = JointPmf(j.table, ("a", "b", "c"))
        m = j.marginal(("c", "a"))
        assert m.axes == ("c", "a")
        np.testing.assert_allclose(m.table, j.table.sum(axis=1).T)

    def test_unknown_axis(self):
        j = JointPmf(np.full((2, 2), 0.25), ("x", "y"))
        with pytest.raises(ValidationError, match="unknown axis"):
            cond_entropy(j, "z")

    def test_overlapping_sets_rejected(self):
        j = random_joint(1, (2, 2, 2))
        with pytest.raises(ValidationError, match="overlap"):
            mutual_info(j, (0, 1), (1, 2))

    def test_total_correlation_needs_two_axes(self):
        with pytest.raises(ValidationError):
            total_correlation(JointPmf([0.5, 0.5]))


class TestMeasureProperties:
    @settings(max_examples=60, deadline=None)
    @given(seed=seeds, shape=shapes)
    def test_chain_rule(self, seed, shape):
        j = random_joint(seed, shape)
        # H(A,B,C) = H(A) + H(B|A) + H(C|A,B)
        lhs = cond_entropy(j, (0, 1, 2))
        rhs = cond_entropy(j, 0) + cond_entropy(j, 1, 0) + cond_entropy(j, 2, (0, 1))
        assert lhs == pytest.approx(rhs, abs=TOL)

    @settings(max_examples=60, deadline=None)
    @given(seed=seeds, shape=shapes)
    def test_nonnegativity(self, seed, shape):
        j = random_joint(seed, shape)
        assert cond_entropy(j, 0, (1, 2)) >= -TOL
        assert mutual_info(j, 0, 1) >= -TOL
        assert cond_mutual_info(j, 0, 1, 2) >= -TOL
        assert total_correlation(j, (0, 1, 2)) >= -TOL

    @settings(max_examples=60, deadline=None)
    @given(seed=seeds, shape=st.tuples(st.integers(1, 5), st.integers(1, 5)))
    def test_total_correlation_of_pair_is_mutual_info(self, seed, shape):
        j = random_joint(seed, shape)
        assert total_correlation(j) == pytest.approx(mutual_info(j, 0, 1), abs=TOL)

    @settings(max_examples=40, deadline=None)
    @given(seed=seeds)
    def test_conditional_total_correlation_of_pair(self, seed):
        j = random_joint(seed, (3, 2, 4))
        assert conditional_total_correlation(j, 2) == pytest.approx(cond_mutual_info(j, 0, 1, 2), abs=TOL)

    def test_mutual_info_symmetric(self):
        j = random_joint(7, (3, 4))
        assert mutual_info(j, 0, 1) == pytest.approx(mutual_info(j, 1, 0), abs=TOL)


class TestCachingProblem:
    def test_output_alphabet_first_appearance(self):
        p = CachingProblem(("a", "b"), (1, 2), np.full((2, 2), 0.25), ([["u", "w"], ["w", "u"]],))
        assert p.s_alphabets[0] == ("u", "w")
        np.testing.assert_array_equal(p.f_index[0], [[0, 1], [1, 0]])

    def test_f_outside_alphabet_names_cell(self):
        with pytest.raises(ValidationError, match="'b'.*2|2.*'b'"):
            CachingProblem(("a", "b"), (1, 2), np.full((2, 2), 0.25), ([[0, 1], [1, 7]],), ((0, 1),))

    def test_unnormalized_joint_names_sum(self):
        with pytest.raises(ValidationError, match=r"sum to 0\.(9|8999)"):
            CachingProblem((0, 1), (0, 1), np.array([[0.3, 0.2], [0.2, 0.2]]), ([[0, 0], [1, 1]],))

    def test_shape_mismatch(self):
        with pytest.raises(ValidationError, match="shape"):
            CachingProblem((0, 1), (0, 1, 2), np.full((2, 2), 0.25), ([[0, 0], [1, 1]],))

    def test_marginals_and_independence(self):
        p = fixtures.dsbs_selector(0.1, (0.7, 0.3))
        np.testing.assert_allclose(p.p_y, [0.7, 0.3])
        np.testing.assert_allclose(p.p_x, [0.45, 0.05, 0.05, 0.45])
        assert p.is_independent()
        dep = CachingProblem((0, 1), (0, 1), np.array([[0.5, 0.0], [0.0, 0.5]]), ([[0, 1], [1, 0]],))
        assert not dep.is_independent()


class TestChannel_:
    def test_rows_validated(self):
        with pytest.raises(ValidationError, match="row 1"):
            TestChannel(np.array([[1.0, 0.0], [0.3, 0.3]]))

    def test_identity_and_constant(self):
        np.testing.assert_array_equal(TestChannel.identity(3).matrix, np.eye(3))
        assert TestChannel.constant(3).matrix.shape == (3, 1)


class TestInducedJoint:
    @pytest.mark.parametrize("seed", range(5))
    def test_markov_chain(self, seed):
        rng = np.random.default_rng(seed)
        p = fixtures.random_problem(rng, nx=3, ny=3, ns=2)
        ch = TestChannel(rng.dirichlet(np.ones(3), size=3))
        j = induced_joint(p, ch)
        assert cond_mutual_info(j, "v", "y", "x") == pytest.approx(0.0, abs=TOL)
        # output is a function of (x, y)
        assert cond_entropy(j, "s1", ("x", "y")) == pytest.approx(0.0, abs=TOL)

    def test_two_functions_axes(self):
        j = induced_joint(fixtures.example2_problem(), TestChannel.constant(2))
        assert j.axes == ("x", "y", "v", "s1", "s2")

    def test_row_count_checked(self):
        with pytest.raises(ValidationError):
            induced_joint(fixtures.xor_problem(), TestChannel.identity(3))
