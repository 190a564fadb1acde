import numpy as np
import pytest

from fastmm.algo_spec import catalog_names, classical, get_algorithm
from fastmm.engine import (
    PlanError, Stationary, Tree, UniformNonStationary, as_tree, format_plan,
    multiply, multiply_classical, pad_dims, parse_plan, plan_from_cutoff, plan_levels,
)


def int_matrices(rng, m, k, n):
    return (rng.integers(-8, 9, (m, k)).astype(float),
            rng.integers(-8, 9, (k, n)).astype(float))


class TestClassical:
    def test_matches_numpy_on_integers(self, rng):
        a, b = int_matrices(rng, 17, 9, 13)
        np.testing.assert_array_equal(multiply_classical(a, b), a @ b)

    def test_sequential_order(self):
        # 1 + 2^-53 + 2^-53 sums to 1 left to right
        a = np.array([[1.0, 2.0 ** -53, 2.0 ** -53]])
        b = np.ones((3, 1))
        assert multiply_classical(a, b)[0, 0] == 1.0

    def test_mismatch(self):
        with pytest.raises(ValueError):
            multiply_classical(np.ones((2, 3)), np.ones((2, 3)))


class TestExactness:
    @pytest.mark.parametrize("name", catalog_names())
    def test_integer_inputs_exact(self, rng, name):
        alg = get_algorithm(name)
        for L in range(3):
            plan = Stationary(alg, L)
            m, k, n = pad_dims(20, 20, 20, plan)
            a, b = int_matrices(rng, m, k, n)
            np.testing.assert_array_equal(multiply(a, b, plan), a @ b)

    def test_classical_generated_algorithms(self, rng):
        for dims in [(1, 2, 3), (3, 1, 2), (2, 3, 4)]:
            a, b = int_matrices(rng, 24, 24, 24)
            np.testing.assert_array_equal(multiply(a, b, Stationary(classical(*dims), 2)), a @ b)

    def test_padding(self, rng, strassen, alg323):
        a, b = int_matrices(rng, 13, 7, 11)
        for plan in (Stationary(strassen, 3), Stationary(alg323, 2)):
            c = multiply(a, b, plan)
            assert c.shape == (13, 11)
            np.testing.assert_array_equal(c, a @ b)

    def test_rectangular_rotations(self, rng):
        for ref in ("323@rot", "442@rot2", "442@T"):
            a, b = int_matrices(rng, 30, 17, 25)
            np.testing.assert_array_equal(multiply(a, b, Stationary(get_algorithm(ref), 2)), a @ b)


class TestPlans:
    def test_kinds_agree_bitwise(self, rng, strassen):
        a, b = rng.random((64, 64)), rng.random((64, 64))
        c1 = multiply(a, b, Stationary(strassen, 2))
        c2 = multiply(a, b, UniformNonStationary((strassen, strassen)))
        c3 = multiply(a, b, Tree(strassen, [Tree(strassen, [None] * 7) for _ in range(7)]))
        np.testing.assert_array_equal(c1, c2)
        np.testing.assert_array_equal(c1, c3)

    def test_level_zero_is_classical(self, rng, strassen):
        a, b = rng.random((12, 12)), rng.random((12, 12))
        np.testing.assert_array_equal(multiply(a, b, Stationary(strassen, 0)),
                                      multiply_classical(a, b))

    def test_nonuniform_tree_close(self, rng):
        plan = parse_plan("tree(strassen, tree(strassen-dalberto), tree(strassen), "
                          "tree(strassen-dalberto)*2, classical*3)")
        a, b = rng.random((32, 32)), rng.random((32, 32))
        np.testing.assert_allclose(multiply(a, b, plan), a @ b, rtol=1e-12)

    def test_fast_mode(self, rng, strassen):
        a, b = rng.random((64, 64)), rng.random((64, 64))
        np.testing.assert_allclose(multiply(a, b, Stationary(strassen, 2), fast=True), a @ b,
                                   rtol=1e-12)

    def test_deterministic(self, rng, alg442):
        a, b = rng.random((64, 64)), rng.random((64, 32))
        plan = Stationary(alg442, 2)
        np.testing.assert_array_equal(multiply(a, b, plan), multiply(a, b, plan))

    def test_inconsistent_depth(self, strassen, alg323):
        with pytest.raises(PlanError):
            plan_levels(Tree(strassen, [Tree(strassen, [None] * 7)] + [Tree(alg323, [None] * 15)] * 6))

    def test_wrong_child_count(self, strassen):
        with pytest.raises(PlanError):
            Tree(strassen, [None] * 6)

    def test_pad_dims(self, alg323):
        assert pad_dims(10, 10, 10, Stationary(alg323, 2)) == (18, 12, 18)
        assert pad_dims(4096, 2048, 3645, UniformNonStationary(
            [get_algorithm("classical:4x2x3")] * 6)) == (4096, 2048, 3645)

    def test_cutoff(self, strassen):
        assert plan_from_cutoff(strassen, 512, 512, 512, 64).levels == 3
        assert plan_from_cutoff(strassen, 32, 32, 32, 64).levels == 0

    def test_shared_children(self, strassen):
        tree = as_tree(Stationary(strassen, 3))
        assert len({id(c) for c in tree.children}) == 1


class TestDescriptors:
    @pytest.mark.parametrize("text", [
        "classical", "strassen:L=3", "seq(strassen, 323)", "tree(strassen)",
        "tree(strassen, tree(strassen-dalberto), classical*6)",
    ])
    def test_round_trip(self, text):
        plan = parse_plan(text)
        assert parse_plan(format_plan(plan)) == plan

    def test_single_level_shorthand(self, strassen):
        assert parse_plan("strassen") == Stationary(strassen, 1)

    @pytest.mark.parametrize("text", ["tree(strassen, classical*3)", "seq(strassen", "strassen x",
                                      "tree(strassen, classical*x)"])
    def test_malformed(self, text):
        with pytest.raises(PlanError):
            parse_plan(text)
