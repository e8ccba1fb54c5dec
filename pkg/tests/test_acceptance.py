"""The twelve acceptance criteria, each at its stated tolerance and time budget.

Every test records a PASS/FAIL line (see ``acceptance_log``); pytest prints
them together in the terminal summary. Run this file directly to get only the
summary lines.
"""

import json
import statistics
import sys
import time
from pathlib import Path

import pytest

from acceptance_log import record
from treelab import checks
from treelab.cli import main, parse_experiment, run_experiment

CONFIG = Path(__file__).resolve().parent.parent / "configs" / "consistency.ini"


def timed(fn, *args, **kwargs):
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t0


def by_name(results):
    return {c.name: c for c in results}


@pytest.fixture(scope="module")
def identities():
    return timed(checks.identity_checks, 1000, 0)


def test_criterion_01_identities(identities):
    res, secs = identities
    c = by_name(res)
    resid = c["two_step_decomposition_residual"].value
    prod = c["one_step_product_form_equality"].value
    ok = resid <= 1e-9 and prod <= 1e-9 and secs < 5
    record(1, "identity suite", ok,
           f"decomposition residual {resid:.2e}, product form {prod:.2e} (<= 1e-9), {secs:.2f} s (< 5 s)")
    assert ok


def test_criterion_02_variance_decomposition(identities):
    res, _ = identities
    v = by_name(res)["empirical_variance_decomposition"].value
    ok = v <= 1e-9
    record(2, "variance decomposition", ok, f"max error {v:.2e} (<= 1e-9) on 1000 cases")
    assert ok


def test_criterion_03_closed_forms():
    res, secs = timed(checks.closed_form_checks, 200, 1_000_000, 0)
    mc = [c for c in res if c.name.startswith("mc_")]
    spots = [c for c in res if c.name.startswith("unit_cube_")]
    worst = max(mc, key=lambda c: c.value)
    ok = all(c.passed for c in res) and len(mc) == 8 and secs < 60
    record(3, "closed-form oracle", ok,
           f"8 displays, worst |z| {worst.value:.2f} ({worst.name}) <= 3; "
           f"unit-cube spots exact: {all(c.passed for c in spots)}; {secs:.1f} s (< 60 s)")
    assert ok


def test_criterion_04_two_step_dominates():
    res, secs = timed(checks.two_step_dominance_checks, 100, 50, 1)
    worst = res[0].value
    ok = worst <= 1e-9 and secs < 30
    record(4, "two step >= one step", ok,
           f"max(one - two) {worst:.2e} (<= 1e-9) on 100 rectangles, {secs:.1f} s (< 30 s)")
    assert ok


def test_criterion_05_recursions():
    res, secs = timed(checks.recursion_checks, 500)
    ok = all(c.passed for c in res) and secs < 1
    gaps = ", ".join(f"{c.name.split('_bound')[0]} min gap {c.value:.3g}" for c in res)
    record(5, "recursion bounds", ok, f"{gaps}; {secs:.3f} s (< 1 s)")
    assert ok


def test_criterion_06_width():
    res, secs = timed(checks.width_checks)
    ok = res[0].passed and secs < 1
    record(6, "W bound", ok, f"{res[0].value} failures on 99-point grid, {secs:.3f} s (< 1 s)")
    assert ok


def test_criterion_07_fg():
    res, secs = timed(checks.fg_checks)
    ok = res[0].passed and secs < 1
    record(7, "f/g non-negativity", ok, f"minimum {res[0].value:.2e} (>= -1e-12), {secs:.3f} s (< 1 s)")
    assert ok


def test_criterion_08_symmetric_sweep():
    res, secs = timed(checks.symmetric_checks, 50)
    c = res[0]
    ok = c.passed and secs < 120
    record(8, "symmetric-cell inequality sweep", ok,
           f"{c.detail['failures']} of {c.detail['points']} points fail, worst lhs/rhs "
           f"{c.value:.3f} (<= 1); {secs:.1f} s (< 120 s)")
    assert ok


def test_criterion_09_grid_conditions():
    res, secs = timed(checks.grid_checks, 1000, 100, 2)
    ok = all(c.passed for c in res) and secs < 60
    bad = [c.name for c in res if not c.passed]
    record(9, "grid conditions", ok,
           f"{len(res) - len(bad)}/{len(res)} checks pass{' ' + str(bad) if bad else ''}; "
           f"{secs:.1f} s (< 60 s)")
    assert ok


def test_criterion_10_sid_probe(tmp_path):
    out = tmp_path / "probe.json"
    code, secs = timed(main, ["sid-probe", "--alpha1", "50", "--cells", "500", "--grid-res", "50",
                              "--seed", "0", "--out", str(out)])
    rec = json.loads(out.read_text())
    low = rec["delta_hat"] - rec["half_width"]
    ok = code == 0 and low >= 0.6 and secs < 120
    record(10, "SID probe", ok,
           f"delta_hat {rec['delta_hat']:.3f} - half_width {rec['half_width']:.3f} = {low:.3f} "
           f"(>= 0.6), W_required {rec['W_required']}, {secs:.1f} s (< 120 s)")
    assert ok


def test_criterion_11_consistency_trend():
    cfg = parse_experiment(CONFIG.read_text(), str(CONFIG))
    cfg.record_time = False
    rows, secs = timed(run_experiment, cfg, 1)

    def med(label, n):
        return statistics.median(float(r[6]) for r in rows if r[2] == label and r[1] == n)

    small, large = min(cfg.n_schedule), max(cfg.n_schedule)
    rsrf_small, rsrf_large = med("rsrf", small), med("rsrf", large)
    cart_large = med("cart", large)
    ks = sorted({(r[1], r[3]) for r in rows if r[2] == "rsrf"})
    ratio = rsrf_large / rsrf_small
    trend = ratio < 0.7
    beats = rsrf_large < cart_large
    ok = trend and beats and secs < 600
    record(11, "consistency trend", ok,
           f"RSRF median test MSE {rsrf_small:.5f} (n={small}) -> {rsrf_large:.5f} (n={large}), "
           f"ratio {ratio:.3f} (< 0.7: {trend}); CART at n={large} {cart_large:.5f} "
           f"(RSRF lower: {beats}); depths (n, k) {ks}; {secs:.1f} s (< 600 s)")
    assert ok


def test_criterion_12_determinism(tmp_path):
    outputs = []
    for run in range(2):
        probe = tmp_path / f"probe{run}.json"
        table = tmp_path / f"experiment{run}.csv"
        assert main(["sid-probe", "--alpha1", "50", "--cells", "500", "--grid-res", "50",
                     "--seed", "0", "--out", str(probe)]) == 0
        assert main(["experiment", "--config", str(CONFIG), "--no-timing",
                     "--out", str(table)]) == 0
        outputs.append((probe.read_bytes(), table.read_bytes()))
    same_json = outputs[0][0] == outputs[1][0]
    same_csv = outputs[0][1] == outputs[1][1]
    ok = same_json and same_csv
    record(12, "determinism", ok,
           f"probe JSON identical: {same_json}; experiment CSV identical: {same_csv} "
           f"({len(outputs[0][1])} bytes)")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "--no-header", "-p", "no:cacheprovider"]))
