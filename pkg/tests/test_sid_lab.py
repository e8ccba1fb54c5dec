import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from treelab.core import RandomStream
from treelab.grower import GrowConfig, grow_rsrf
from treelab.oracle import Constant, ExampleInteraction, NoiseSpec, PopulationModel, sample_dataset
from treelab.sid_lab import (audit_good_cells, branch_recursion_bound, estimate_from_records,
                             estimate_sid_rsrf, f_value, fg_nonneg_check, g_value, min_width_W,
                             random_rectangle, sid_probe_records, symmetric_cell_inequality_check,
                             width_check)
from treelab.splitters import Rsrf

EXAMPLE = PopulationModel(ExampleInteraction(), 3)
CONSTANT = PopulationModel(Constant(1.0), 3)


@pytest.mark.parametrize("delta,W", [(0.75, 1), (0.5, 2), (0.1, 14)])
def test_min_width_examples(delta, W):
    assert min_width_W(delta) == W


@pytest.mark.parametrize("delta", [0.0, 1.0, -0.2, 1.5])
def test_min_width_rejects_out_of_range(delta):
    with pytest.raises(ValueError):
        min_width_W(delta)


def test_min_width_is_minimal_on_grid():
    for delta in np.linspace(0.01, 0.99, 99):
        W = min_width_W(float(delta))
        assert width_check(float(delta), W)
        assert W == 1 or not width_check(float(delta), W - 1)


def test_recursion_examples():
    rep = branch_recursion_bound(0.75, 4, 500)
    assert rep.steps[1].p_k == 0.8291015625
    assert rep.bound_kind == "2/k" and rep.holds
    assert all(s.p_k == 1.0 for s in branch_recursion_bound(1.0, 4, 50).steps)


@pytest.mark.parametrize("L", [2, 3, 4, 8])
def test_recursion_is_monotone_above_premise(L):
    for delta in np.linspace(1 - 1 / L, 1, 21):
        p = [s.p_k for s in branch_recursion_bound(float(delta), L, 200).steps]
        assert all(b >= a - 1e-15 for a, b in zip(p, p[1:]))


def test_f_and_g_values():
    assert float(f_value(1.0, 3)) == pytest.approx(1 / 6)
    assert abs(float(f_value(1e6, 3))) < 1e-5
    assert float(g_value(2.0)) == pytest.approx(1 / 6)
    for L in (3, 4, 8, 16):
        assert fg_nonneg_check(L).holds


def test_symmetric_unit_cube_example():
    res = symmetric_cell_inequality_check(0.5, 0.5, 0.0, 1.0, 0.0)
    assert res.lhs == pytest.approx(13 / 144, abs=1e-15)
    assert res.rhs >= 16 / 9 / 16 - 1e-15
    assert res.holds


def test_symmetric_near_edge_cut():
    res = symmetric_cell_inequality_check(0.5, 0.5, 0.0, 1.0, 0.99)
    assert 16 / (9 * (1 - 0.99 ** 2)) >= 89
    assert res.holds


def test_symmetric_constant_model():
    res = symmetric_cell_inequality_check(0.3, 0.2, 0.1, 0.6, 0.4, model=CONSTANT)
    assert res.lhs == 0.0 and res.holds


def test_symmetric_rejects_bad_input():
    with pytest.raises(ValueError):
        symmetric_cell_inequality_check(0.5, 0.5, 0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        symmetric_cell_inequality_check(0.0, 0.5, 0.0, 1.0, 0.0)


def test_sid_constant_model_always_succeeds():
    est = estimate_sid_rsrf(CONSTANT, 1.0, n_cells=50, stream=RandomStream(0).generator(1))
    assert est.delta_hat == 1.0 and est.half_width == 0.0


def test_sid_example_model():
    est = estimate_sid_rsrf(EXAMPLE, 50.0, n_cells=500, grid_res=50, stream=RandomStream(0).generator(7))
    assert est.delta_hat >= 0.6 - est.half_width


def test_sid_alpha_one_fails_somewhere():
    est = estimate_sid_rsrf(EXAMPLE, 1.0, n_cells=200, stream=RandomStream(3).generator(1))
    assert est.delta_hat < 1.0


def test_sid_monotone_in_alpha():
    recs = sid_probe_records(EXAMPLE, 200, 20, RandomStream(5).generator(0))
    vals = [estimate_from_records(recs, a).delta_hat for a in (1, 1.5, 2, 4, 8, 50, 1e6)]
    assert vals == sorted(vals)
    with pytest.raises(ValueError):
        estimate_from_records(recs, 0.5)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 31), st.integers(1, 6))
def test_random_rectangle_sides(seed, d):
    lo, hi = random_rectangle(np.random.default_rng(seed), d)
    assert np.all(hi - lo >= 0.05) and lo.min() >= 0 and hi.max() <= 1


def test_audit_constant_model_counts_every_step():
    data = sample_dataset(CONSTANT, 500, 0)
    tree = grow_rsrf(data, GrowConfig(6, Rsrf(3)), RandomStream(1))
    rep = audit_good_cells(tree, CONSTANT, 1.0, grid_res=10)
    full = [len([n for n in trail if n.depth % 2 == 0 and "first_splits" in n.info])
            for trail in tree.branches()]
    assert rep.counts == full
    assert max(full) == 3


def test_audit_example_model_has_good_cells():
    model = PopulationModel(ExampleInteraction(), 3, NoiseSpec("gaussian", 0.1))
    ok = 0
    for seed in range(50):
        data = sample_dataset(model, 4000, seed)
        tree = grow_rsrf(data, GrowConfig(6, Rsrf(5)), RandomStream(seed))
        ok += audit_good_cells(tree, model, 50.0, grid_res=20).min_count >= 1
    assert ok / 50 >= 0.9


def test_audit_large_alpha_matches_constant_behaviour():
    model = PopulationModel(ExampleInteraction(), 3, NoiseSpec("gaussian", 0.1))
    data = sample_dataset(model, 2000, 3)
    tree = grow_rsrf(data, GrowConfig(4, Rsrf(4)), RandomStream(3))
    rep = audit_good_cells(tree, model, math.inf, grid_res=10)
    full = [len([n for n in trail if n.depth % 2 == 0 and "first_splits" in n.info])
            for trail in tree.branches()]
    assert rep.counts == full
