import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from treelab.core import AxisSplit, Cell, Dataset, Partition, RandomStream
from treelab.impurity import (EMPTY, BoxOracle, empirical_impurity,
                              empirical_variance_decomposition, one_step_impurity,
                              one_step_product_form, population_impurity,
                              population_impurity_mc, population_V, scan_axis,
                              two_step_decomposition_residual, two_step_impurity, two_step_sup)
from treelab.oracle import Constant, Custom, ExampleInteraction, PopulationModel

EXAMPLE = PopulationModel(ExampleInteraction(), 3)
MC_EXAMPLE = PopulationModel(Custom(ExampleInteraction(), 1.25, 3, "example-mc"), 3)


def halves(t, j, c):
    p = AxisSplit(j, c)
    return Partition(t, (t.child(p), t.child(p.complement())))


def test_empirical_examples():
    y = [1.0, 1.0, 3.0, 3.0]
    assert empirical_impurity(range(4), [[0, 1], [2, 3]], y).value == pytest.approx(1.0)
    assert empirical_impurity(range(4), [[0, 1], [2, 3]], [2.0] * 4).value == 0.0
    four = empirical_impurity(range(4), [[0], [1], [2], [3]], [0.0, 0.0, 0.0, 4.0])
    assert four.value == pytest.approx(3.0)


def test_empirical_empty_child_contributes_nothing():
    rep = empirical_impurity(range(3), [[0, 1, 2], []], [1.0, 2.0, 6.0])
    assert rep.value == 0.0


def test_empirical_rejects_bad_partition():
    with pytest.raises(ValueError):
        empirical_impurity(range(3), [[0], [1]], [1.0, 2.0, 3.0])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=2, max_size=40), st.integers(0, 1000))
def test_variance_decomposition_and_nonnegativity(ys, seed):
    y = np.array(ys)
    labels = np.random.default_rng(seed).integers(0, 3, len(y))
    groups = [np.flatnonzero(labels == k) for k in range(3)]
    gain, within, total = empirical_variance_decomposition(np.arange(len(y)), groups, y)
    assert gain >= 0
    assert abs(gain + within - total) <= 1e-9 * max(1.0, total)


def test_scan_axis_thresholds_are_midpoints():
    thr, gains, left = scan_axis(np.array([0.1, 0.3, 0.3, 0.9]), np.array([0.0, 1.0, 1.0, 2.0]))
    np.testing.assert_allclose(thr, [0.2, 0.6])
    assert left.tolist() == [1, 3]
    assert len(scan_axis(np.array([0.5, 0.5]), np.array([0.0, 1.0]))[0]) == 0


@pytest.mark.parametrize("c", [0.1, 0.3, 0.5, 0.8])
def test_coordinate_three_split(c):
    got = population_impurity(Cell(3), halves(Cell(3), 2, c), EXAMPLE)
    assert got == pytest.approx(c * (1 - c) / 4, abs=1e-15)


def test_coordinate_one_split_is_blind():
    assert population_impurity(Cell(3), halves(Cell(3), 0, 0.5), EXAMPLE) == pytest.approx(0, abs=1e-15)


def test_constant_model_has_no_gain():
    model = PopulationModel(Constant(3.0), 2)
    assert population_impurity(Cell(2), halves(Cell(2), 1, 0.3), model) == 0.0


def test_V_for_coordinate_three_midpoint():
    root = Cell(3)
    P = halves(root, 2, 0.5)
    assert population_V(root, P, EXAMPLE) == pytest.approx(4 / 144, abs=1e-14)
    assert population_V(root, P, EXAMPLE, via="children") == pytest.approx(4 / 144, abs=1e-14)
    mc = population_V(root, P, MC_EXAMPLE, n_samples=400_000, stream=RandomStream(2))
    assert mc == pytest.approx(4 / 144, abs=1e-3)


def test_V_for_four_quadrants():
    root = Cell(3)
    a, b = AxisSplit(0, 0.5), AxisSplit(1, 0.5)
    kids = tuple(root.child(p, q) for p in (a, a.complement()) for q in (b, b.complement()))
    P = Partition(root, kids)
    assert population_V(root, P, EXAMPLE) == pytest.approx(13 / 144 - 1 / 256, abs=1e-14)


def test_V_trivial_partition_is_variance():
    root = Cell(3)
    P = Partition(root, (root,))
    assert population_V(root, P, EXAMPLE) == pytest.approx(13 / 144, abs=1e-15)


def test_one_step_examples():
    root = Cell(3)
    assert one_step_impurity(root, (2, 0.5), EXAMPLE) == pytest.approx(1 / 16, abs=1e-15)
    assert one_step_impurity(root, (0, 1.5), EXAMPLE) == EMPTY
    assert one_step_impurity(root, (0, 0.5), EXAMPLE) == pytest.approx(0, abs=1e-15)


lohi = st.tuples(st.floats(0, 0.9), st.floats(0.05, 1.0)).map(lambda p: (p[0], min(1.0, p[0] + p[1])))


@settings(max_examples=100, deadline=None)
@given(st.lists(lohi, min_size=3, max_size=3), st.integers(0, 2), st.floats(0.01, 0.99))
def test_product_form_equals_definition(box, j, frac):
    preds = []
    for k, (a, b) in enumerate(box):
        preds += [AxisSplit(k, b), AxisSplit(k, a, False)]
    t = Cell(3, tuple(preds))
    a, b = box[j]
    c = (j, a + frac * (b - a))
    if not a < c[1] < b:
        return
    assert abs(one_step_impurity(t, c, EXAMPLE) - one_step_product_form(t, c, EXAMPLE)) <= 1e-9


def test_product_form_by_monte_carlo():
    rng = np.random.default_rng(3)
    for _ in range(5):
        j, c = int(rng.integers(3)), float(rng.uniform(0.2, 0.8))
        t = Cell(3)
        value, se = population_impurity_mc(t, halves(t, j, c), EXAMPLE, 400_000, RandomStream(4))
        prod = one_step_product_form(t, (j, c), MC_EXAMPLE, 400_000, RandomStream(4))
        assert abs(value - prod) <= 3 * se + 1e-12


def test_two_step_example_left_half():
    root = Cell(3)
    got = two_step_impurity(root, (0, 0.5), (1, 0.5), (1, 0.5), EXAMPLE)
    # quadrant means are +-1/16, so the gain is 1/256 (each daughter's 1/256, mass-weighted)
    assert got == pytest.approx(1 / 256, abs=1e-15)
    mc = two_step_impurity(root, (0, 0.5), (1, 0.5), (1, 0.5), MC_EXAMPLE, 1_000_000, RandomStream(5))
    assert mc == pytest.approx(1 / 256, abs=3e-4)


def test_two_step_examples():
    root = Cell(3)
    assert two_step_impurity(root, (2, 0.5), (2, 0.25), (2, 0.75), EXAMPLE) == pytest.approx(
        1 / 16 + 1 / 64, abs=1e-15)
    assert two_step_impurity(root, (0, 0.5), (1, 0.7), (1, 1.2), EXAMPLE) == EMPTY


def test_two_step_sup_coordinate_two_after_half_cut():
    oracle = BoxOracle(EXAMPLE, 0, None)
    lo, hi = np.zeros(3), np.ones(3)
    oracle.bind(lo, hi)
    res = two_step_sup(oracle, lo, hi, (0, 0.5), grid_res=50)
    # each half gains max(1/256 on coordinate 2, 1/16 on coordinate 3)
    assert res.value == pytest.approx(1 / 16, abs=1e-12)


def test_decomposition_residual_constant_is_zero():
    X = np.random.default_rng(0).random((200, 3))
    y = np.full(200, 4.0)
    assert two_step_decomposition_residual(Cell(3), (0, 0.4), (1, 0.3), (2, 0.6), (X, y)) == 0.0


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2 ** 31), st.integers(1, 60))
def test_decomposition_residual_fuzz(seed, n):
    rng = np.random.default_rng(seed)
    data = Dataset(rng.random((n, 3)), rng.normal(size=n) * 10)
    c, c1, c2 = [(int(rng.integers(3)), float(rng.random())) for _ in range(3)]
    w = rng.exponential(size=n)
    assert two_step_decomposition_residual(Cell(3), c, c1, c2, data) <= 1e-10
    assert two_step_decomposition_residual(Cell(3), c, c1, c2, data, weights=w) <= 1e-10


def test_two_step_dominates_one_step_monte_carlo():
    root = Cell(3)
    one = one_step_impurity(root, (2, 0.5), MC_EXAMPLE, 400_000, RandomStream(9))
    two = two_step_impurity(root, (2, 0.5), (0, 0.5), (1, 0.5), MC_EXAMPLE, 400_000, RandomStream(9))
    assert two >= one - 1e-12
