"""Batch verification routines shared by the command line and the test suite.

Each routine returns a list of :class:`Check` records with the measured value
and the tolerance it was held to.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import AxisSplit, Cell, Dataset
from .gridcheck import (Grid, boundary_cover_check, count_cart_separations,
                        count_oblique_separations)
from .impurity import (BoxOracle, empirical_variance_decomposition, one_step_sup,
                       threshold_grid, two_step_decomposition_residual, two_step_sup,
                       weighted_gain)
from .oracle import ExampleInteraction, PopulationModel, example_closed_forms
from .sid_lab import (branch_recursion_bound, fg_nonneg_check, min_width_W, random_rectangle,
                      symmetric_cell_inequality_check, width_check)
from .splitters import Cart, ExtraTrees, InteractionForest, Oblique, Rsrf, best_index, generate


@dataclass
class Check:
    name: str
    value: float
    tolerance: float
    passed: bool
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["seconds"] = round(self.seconds, 3)
        return d


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        out = fn(*args, **kwargs)
        dt = time.perf_counter() - t0
        for c in out:
            c.seconds = dt
        return out
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def example_model() -> PopulationModel:
    return PopulationModel(ExampleInteraction(), 3)


# ---------------------------------------------------------------- identities

@dataclass(frozen=True)
class FuzzCase:
    X: np.ndarray
    y: np.ndarray
    w: np.ndarray | None
    cell: Cell
    c: tuple
    c1: tuple
    c2: tuple


def fuzz_cases(n_cases: int = 1000, seed: int = 0) -> list[FuzzCase]:
    """Small random datasets with nested axis cuts, ties, constant responses
    and empty children all represented."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n_cases):
        n = int(rng.integers(1, 60))
        d = int(rng.integers(1, 5))
        X = rng.random((n, d))
        if i % 5 == 1:
            X = np.round(X * 4) / 4
        kind = i % 7
        if kind == 0:
            y = np.full(n, rng.normal())
        elif kind == 1:
            y = rng.integers(0, 3, n).astype(float)
        else:
            y = rng.normal(size=n) * 10 ** rng.uniform(-3, 3)
        w = rng.exponential(size=n) if i % 3 == 2 else None
        cell = Cell(d)
        if i % 4 == 3:
            lo, hi = random_rectangle(rng, d, 0.2)
            preds = []
            for j in range(d):
                preds += [AxisSplit(j, float(hi[j]), True), AxisSplit(j, float(lo[j]), False)]
            cell = Cell(d, tuple(preds))

        def cut():
            j = int(rng.integers(d))
            return j, float(rng.uniform(-0.1, 1.1) if i % 6 == 5 else rng.random())

        out.append(FuzzCase(X, y, w, cell, cut(), cut(), cut()))
    return out


@_timed
def identity_checks(n_cases: int = 1000, seed: int = 0) -> list[Check]:
    cases = fuzz_cases(n_cases, seed)
    worst_resid = 0.0
    worst_prod = 0.0
    worst_var = 0.0
    for case in cases:
        worst_resid = max(worst_resid, two_step_decomposition_residual(
            case.cell, case.c, case.c1, case.c2, (case.X, case.y), case.w))
        idx = np.flatnonzero(case.cell.contains(case.X))
        y = case.y[idx]
        left = AxisSplit(*case.c).contains(case.X[idx])
        g1, g2 = np.flatnonzero(left), np.flatnonzero(~left)
        rep = weighted_gain(y, [g1, g2])
        n1, n2, n = len(g1), len(g2), len(y)
        prod = 0.0 if n1 == 0 or n2 == 0 else n1 * n2 / n ** 2 * (y[g1].mean() - y[g2].mean()) ** 2
        worst_prod = max(worst_prod, abs(rep.value - prod))
        a = AxisSplit(*case.c1).contains(case.X[idx])
        for groups in ([g1, g2], [np.flatnonzero(left & a), np.flatnonzero(left & ~a),
                                  np.flatnonzero(~left & a), np.flatnonzero(~left & ~a)]):
            gain, within, total = empirical_variance_decomposition(np.arange(n), groups, y)
            worst_var = max(worst_var, abs(gain + within - total))
    return [
        Check("two_step_decomposition_residual", worst_resid, 1e-9, worst_resid <= 1e-9,
              {"cases": len(cases)}),
        Check("one_step_product_form_equality", worst_prod, 1e-9, worst_prod <= 1e-9,
              {"cases": len(cases)}),
        Check("empirical_variance_decomposition", worst_var, 1e-9, worst_var <= 1e-9,
              {"cases": len(cases)}),
    ]


# --------------------------------------------------------------- closed forms

def _mc_display_z(U: np.ndarray, lo: np.ndarray, hi: np.ndarray, cuts: dict) -> dict:
    """|z| scores of the example-function displays against one Monte Carlo sample.

    ``U`` is a shared uniform sample on the unit cube mapped affinely into the
    box, so every box sees the same underlying draws. Gains are compared on
    the scale of the mean difference between the two children: the display
    S = p1 p2 D^2 fixes |D|, and |D_hat| is held within 3 standard errors of it.
    """
    f = example_closed_forms((lo, hi))
    X = lo + (hi - lo) * U
    N = len(U)
    p12 = (X[:, 0] - 0.5) * (X[:, 1] - 0.5)
    m = p12 + X[:, 2]
    z = {}

    def mean_z(v, target):
        se = v.std() / math.sqrt(N)
        return abs(v.mean() - target) / se if se > 0 else (0.0 if v.mean() == target else math.inf)

    z["mean12"] = mean_z(p12, f.mean12)
    z["mean3"] = mean_z(X[:, 2], f.mean3)
    mu = m.mean()
    dev2 = (m - mu) ** 2
    var_hat = dev2.mean() * N / (N - 1)
    z["var"] = abs(var_hat - f.var) / (dev2.std() / math.sqrt(N))

    def gain_z(j, c, display):
        p1 = (c - lo[j]) / (hi[j] - lo[j])
        left = U[:, j] <= p1
        a, b = m[left], m[~left]
        D = a.mean() - b.mean()
        se = math.sqrt(a.var() / len(a) + b.var() / len(b))
        target = math.sqrt(max(display, 0.0) / (p1 * (1 - p1)))
        return abs(abs(D) - target) / se

    z["s3"] = gain_z(2, cuts["s3"], f.s3(cuts["s3"]))
    z["s1"] = gain_z(0, cuts["s1"], f.s1(cuts["s1"]))
    z["s1max"] = gain_z(0, 0.5 * (lo[0] + hi[0]), f.s1max)
    z["s2max"] = gain_z(1, 0.5 * (lo[1] + hi[1]), f.s2max)
    z["s3max"] = gain_z(2, 0.5 * (lo[2] + hi[2]), f.s3max)
    return z


@_timed
def closed_form_checks(n_rect: int = 200, n_mc: int = 1_000_000, seed: int = 0) -> list[Check]:
    rng = np.random.default_rng(seed)
    U = rng.random((n_mc, 3))
    worst = {}
    for _ in range(n_rect):
        lo, hi = random_rectangle(rng, 3)
        cuts = {"s1": float(lo[0] + rng.uniform(0.05, 0.95) * (hi[0] - lo[0])),
                "s3": float(lo[2] + rng.uniform(0.05, 0.95) * (hi[2] - lo[2]))}
        for k, v in _mc_display_z(U, lo, hi, cuts).items():
            worst[k] = max(worst.get(k, 0.0), v)
    checks = [Check(f"mc_{k}_max_abs_z", v, 3.0, v <= 3.0, {"rectangles": n_rect, "samples": n_mc})
              for k, v in worst.items()]
    unit = example_closed_forms(0, 1, 0, 1, 0, 1)
    spots = {"var": (unit.var, 13 / 144), "s3max": (unit.s3max, 1 / 16),
             "s1max": (unit.s1max, 0.0), "s2max": (unit.s2max, 0.0)}
    for k, (got, want) in spots.items():
        checks.append(Check(f"unit_cube_{k}", abs(got - want), 1e-15, abs(got - want) <= 1e-15,
                            {"value": got, "expected": want}))
    return checks


@_timed
def two_step_dominance_checks(n_rect: int = 100, grid_res: int = 50, seed: int = 1) -> list[Check]:
    """Two-step grid sup against every grid one-step gain, for every grid first cut."""
    rng = np.random.default_rng(seed)
    oracle = BoxOracle(example_model())
    worst = -math.inf
    for _ in range(n_rect):
        lo, hi = random_rectangle(rng, 3)
        one = one_step_sup(oracle, lo, hi, grid_res).value
        for j0 in range(3):
            for c0 in threshold_grid(lo[j0], hi[j0], grid_res):
                two = two_step_sup(oracle, lo, hi, (j0, float(c0)), grid_res).value
                worst = max(worst, one - two)
    return [Check("two_step_minus_one_step_worst", worst, 1e-9, worst <= 1e-9,
                  {"rectangles": n_rect, "grid_res": grid_res})]


# ----------------------------------------------------------------- recursions

@_timed
def recursion_checks(k_max: int = 500) -> list[Check]:
    out = []
    for delta, L, bound in ((0.75, 4, "2/k"), (0.75, 2, "2/k"), (2 / 3, 3, "1/k")):
        rep = branch_recursion_bound(delta, L, k_max, bound)
        gap = min(s.p_k - s.bound for s in rep.steps)
        out.append(Check(f"recursion_L{L}_delta{delta:.4g}_bound_{bound}", gap, 0.0, rep.holds,
                         {"k_max": k_max, "violations": len(rep.violations)}))
    return out


@_timed
def width_checks() -> list[Check]:
    bad = []
    for delta in np.linspace(0.01, 0.99, 99):
        W = min_width_W(float(delta))
        if not width_check(delta, W) or (W > 1 and width_check(delta, W - 1)):
            bad.append(float(delta))
    return [Check("min_width_W_minimal_and_sufficient", len(bad), 0, not bad,
                  {"grid_points": 99, "failures": bad})]


@_timed
def fg_checks() -> list[Check]:
    x = np.logspace(0, 6, 1000)
    worst = math.inf
    for L in range(3, 11):
        rep = fg_nonneg_check(L, x)
        worst = min(worst, rep.f_min, rep.g_min)
    return [Check("fg_minimum", worst, -1e-12, worst >= -1e-12, {"L": "3..10", "grid": 1000})]


# ------------------------------------------------------------------ symmetric

def symmetric_sweep(grid_res: int = 50):
    ls = np.linspace(0.05, 0.5, 10)
    ms = np.linspace(0.05, 0.5, 10)
    c2s = np.linspace(0.1, 1.0, 10)
    ks = np.linspace(-0.9, 0.9, 9)
    for l in ls:
        for m in ms:
            for c2 in c2s:
                for k in ks:
                    yield (float(l), float(m), 0.0, float(c2), float(k)), \
                        symmetric_cell_inequality_check(l, m, 0.0, c2, k, grid_res)


@_timed
def symmetric_checks(grid_res: int = 50) -> list[Check]:
    total = 0
    fails = []
    worst = 0.0
    for params, res in symmetric_sweep(grid_res):
        total += 1
        ratio = res.lhs / res.rhs if res.rhs > 0 else (0.0 if res.lhs == 0 else math.inf)
        worst = max(worst, ratio)
        if not res.holds:
            fails.append(params)
    return [Check("symmetric_cell_inequality_sweep", worst, 1.0, not fails,
                  {"points": total, "failures": len(fails), "first_failures": fails[:5],
                   "worst_lhs_over_rhs": worst})]


# ------------------------------------------------------------------ grid

@_timed
def grid_checks(n_cells: int = 1000, n_splits: int = 100, seed: int = 2) -> list[Check]:
    rng = np.random.default_rng(seed)
    out = []
    worst = -math.inf
    for d in (1, 2, 3):
        for g in range(1, 9):
            grid = Grid(g, d)
            cells = [(np.zeros(d), np.ones(d))]
            for _ in range(n_cells):
                a = rng.random((2, d))
                cells.append((a.min(axis=0), a.max(axis=0)))
            res = count_cart_separations(grid, cells)
            worst = max(worst, res.count - res.bound)
    out.append(Check("cart_separations_minus_bound", worst, 0, worst <= 0, {"d": "1..3", "g": "1..8"}))
    worst = -math.inf
    counts = {}
    for g in range(1, 5):
        res = count_oblique_separations(Grid(g, 2))
        counts[g] = (res.count, res.bound)
        worst = max(worst, res.count - res.bound)
    out.append(Check("oblique_separations_minus_bound", worst, 0, worst <= 0, {"counts": counts}))
    for name, cfg, family in (("cart", Cart(), "axis"), ("extratrees", ExtraTrees(4), "axis"),
                              ("interaction", InteractionForest(2), "interaction"),
                              ("oblique", Oblique(4), "oblique"), ("rsrf", Rsrf(3), "interaction")):
        res = cover_fuzz(cfg, family, n_splits, rng)
        out.append(Check(f"boundary_cover_{name}", res["max_H_over_bound"], 1.0,
                         res["uncovered"] == 0 and res["max_H_over_bound"] <= 1.0, res))
    return out


def cover_fuzz(cfg, family: str, n_splits: int, rng: np.random.Generator, g: int = 8) -> dict:
    grid = Grid(g, 2)
    uncovered = 0
    worst = 0.0
    done = 0
    while done < n_splits:
        lo, hi = random_rectangle(rng, 2, 0.1)
        t = Cell(2, (AxisSplit(0, float(hi[0])), AxisSplit(0, float(lo[0]), False),
                     AxisSplit(1, float(hi[1])), AxisSplit(1, float(lo[1]), False)))
        X = lo + (hi - lo) * rng.random((40, 2))
        data = Dataset(X, rng.normal(size=40))
        cands = generate(cfg, t, data, rng, 1, np.arange(40))
        if len(cands) == 0:
            continue
        part = cands.partition(best_index(cands.scores, rng))
        child = part.children[int(rng.integers(part.L))]
        done += 1
        try:
            res = boundary_cover_check(t, child, grid, family)
            worst = max(worst, res.H_size / res.bound)
        except ValueError:
            uncovered += 1
    return {"splits": n_splits, "uncovered": uncovered, "max_H_over_bound": worst, "g": g}


SUITES = {
    "identities": [identity_checks],
    "closedforms": [closed_form_checks, two_step_dominance_checks],
    "recursions": [recursion_checks, width_checks, fg_checks],
    "gridcheck": [grid_checks],
    "symmetric": [symmetric_checks],
}


def run_suite(name: str) -> list[Check]:
    if name not in SUITES:
        raise KeyError(name)
    out = []
    for fn in SUITES[name]:
        out.extend(fn())
    return out
