"""Probes and exact numeric checks around the probabilistic sufficient
impurity decrease condition for two-level random splits."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import OracleUnavailable, as_generator
from .impurity import EMPTY, BoxOracle, two_step_sup
from .oracle import ExampleInteraction, PopulationModel


@dataclass(frozen=True)
class SidEstimate:
    delta_hat: float
    alpha1: float
    n_cells: int
    half_width: float
    successes: int
    note: str = ("grid sup is a lower bound on the true sup, so delta_hat is a "
                 "conservative (downward-biased) estimate")

    def to_dict(self) -> dict:
        return {"delta_hat": self.delta_hat, "alpha1": self.alpha1, "n_cells": self.n_cells,
                "half_width": self.half_width, "successes": self.successes, "note": self.note}


def random_rectangle(rng: np.random.Generator, d: int, min_side: float = 0.05):
    """Per-axis endpoints uniform on [0,1], redrawn while the side is shorter than ``min_side``."""
    lo = np.empty(d)
    hi = np.empty(d)
    for j in range(d):
        while True:
            a, b = np.sort(rng.random(2))
            if b - a >= min_side:
                break
        lo[j], hi[j] = a, b
    return lo, hi


@dataclass(frozen=True)
class ProbeRecord:
    lo: tuple
    hi: tuple
    first: tuple
    var: float
    sup: float


def sid_probe_records(model: PopulationModel, n_cells: int, grid_res: int = 50, stream=None,
                      cell_sampler=None) -> list[ProbeRecord]:
    """Variance and two-step grid sup for one random first cut per sampled cell."""
    if not model.closed_form:
        raise OracleUnavailable("the probe needs closed-form rectangle moments")
    rng = as_generator(0 if stream is None else stream)
    sampler = cell_sampler or (lambda r: random_rectangle(r, model.d))
    oracle = BoxOracle(model)
    out = []
    for _ in range(n_cells):
        lo, hi = sampler(rng)
        j = int(rng.integers(model.d))
        c = float(lo[j] + rng.random() * (hi[j] - lo[j]))
        var = float(model.rect_var(lo, hi))
        sup = two_step_sup(oracle, lo, hi, (j, c), grid_res).value
        out.append(ProbeRecord(tuple(lo.tolist()), tuple(hi.tolist()), (j, c), var, sup))
    return out


def estimate_from_records(records: list[ProbeRecord], alpha1: float) -> SidEstimate:
    if alpha1 < 1:
        raise ValueError("alpha1 must be at least 1")
    n = len(records)
    if n == 0:
        raise ValueError("no probe cells")
    wins = sum(1 for r in records if r.var <= alpha1 * r.sup)
    p = wins / n
    return SidEstimate(p, float(alpha1), n, 1.96 * math.sqrt(p * (1 - p) / n), wins)


def estimate_sid_rsrf(model: PopulationModel, alpha1: float, cell_sampler=None, n_cells: int = 500,
                      grid_res: int = 50, stream=None) -> SidEstimate:
    if alpha1 < 1:
        raise ValueError("alpha1 must be at least 1")
    recs = sid_probe_records(model, n_cells, grid_res, stream, cell_sampler)
    return estimate_from_records(recs, alpha1)


def min_width_W(delta: float) -> int:
    """Smallest W with (1 - delta)^W <= 1/4."""
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    q = 1.0 - delta
    W = max(1, math.ceil(-2.0 * math.log(2.0) / math.log(q)))
    # the log ratio can land a hair off an integer; settle it on the power itself
    while W > 1 and q ** (W - 1) <= 0.25:
        W -= 1
    while q ** W > 0.25:
        W += 1
    return W


def width_check(delta: float, W: int) -> bool:
    return 1.0 - (1.0 - delta) ** W >= 0.75


@dataclass(frozen=True)
class RecursionStep:
    k: int
    p_k: float
    bound: float
    ok: bool


@dataclass
class RecursionReport:
    delta: float
    L: int
    bound_kind: str
    premise: bool
    steps: list = field(default_factory=list)

    @property
    def violations(self) -> list:
        return [s for s in self.steps if not s.ok]

    @property
    def holds(self) -> bool:
        return not self.violations


def branch_recursion_bound(delta: float, L: int, k_max: int, bound: str | None = None) -> RecursionReport:
    """Iterate p_1 = delta, p_k = delta + (1 - delta) p_{k-1}^L against 1 - 2/k or 1 - 1/k.

    The default bound is 1 - 2/k for L = 2 and for L = 4 with delta >= 3/4,
    and 1 - 1/k for other L >= 3.
    """
    if not 0.0 <= delta <= 1.0:
        raise ValueError("delta must lie in [0, 1]")
    if L < 2:
        raise ValueError("L must be at least 2")
    if bound is None:
        bound = "2/k" if L == 2 or (L == 4 and delta >= 0.75) else "1/k"
    if bound not in ("2/k", "1/k"):
        raise ValueError("bound must be '2/k' or '1/k'")
    num = 2.0 if bound == "2/k" else 1.0
    premise = delta >= 1.0 - 1.0 / L
    rep = RecursionReport(delta, L, bound, premise)
    p = delta
    for k in range(1, k_max + 1):
        if k > 1:
            p = delta + (1.0 - delta) * p ** L
        b = 1.0 - num / k
        rep.steps.append(RecursionStep(k, p, b, p >= b))
    return rep


@dataclass(frozen=True)
class FGReport:
    L: int
    f_min: float
    g_min: float
    f_argmin: float
    g_argmin: float

    @property
    def holds(self) -> bool:
        return self.f_min >= -1e-12 and self.g_min >= -1e-12


def f_value(x, L: int):
    x = np.asarray(x, dtype=float)
    # 1 - (1 - 1/x)^L without cancellation for large x
    tail = -np.expm1(L * np.log1p(-1.0 / x)) if np.all(x > 1) else 1.0 - (1.0 - 1.0 / x) ** L
    return 1.0 / (x + 1.0) - tail / L


def g_value(x):
    x = np.asarray(x, dtype=float)
    u = 2.0 / x
    return 2.0 / (x + 1.0) - 0.5 * u * (2.0 - u)


def fg_nonneg_check(L: int, x_grid=None) -> FGReport:
    if L < 3:
        raise ValueError("f is only claimed non-negative for L >= 3")
    x = np.logspace(0, 6, 1000) if x_grid is None else np.asarray(x_grid, dtype=float)
    if x.min() < 1:
        raise ValueError("grid must lie in [1, inf)")
    f = np.array([float(f_value(v, L)) for v in x])
    g = g_value(x)
    i, k = int(np.argmin(f)), int(np.argmin(g))
    return FGReport(L, float(f[i]), float(g[k]), float(x[i]), float(x[k]))


@dataclass(frozen=True)
class SymmetricCheck:
    lhs: float
    rhs: float
    holds: bool
    sup: float
    interaction_var: float


def symmetric_cell_inequality_check(l: float, mdim: float, c1: float, c2: float, kappa: float,
                                    grid_res: int = 50, model: PopulationModel | None = None
                                    ) -> SymmetricCheck:
    """Compare Var(m|t) with 16/(9(1-kappa^2)) times the two-step grid sup.

    The cell is [.5-l, .5+l] x [.5-mdim, .5+mdim] x [c1, c2] and the first cut
    is x_1 <= .5 + kappa*l. ``interaction_var`` is the variance of the
    (x1-.5)(x2-.5) part alone, for diagnosis.
    """
    if not abs(kappa) < 1:
        raise ValueError("|kappa| must be below 1")
    if not (0 < l <= 0.5 and 0 < mdim <= 0.5 and 0 <= c1 < c2 <= 1):
        raise ValueError("degenerate or out-of-range symmetric cell")
    model = model or PopulationModel(ExampleInteraction(), 3)
    if not model.closed_form:
        raise OracleUnavailable("symmetric-cell check needs closed-form moments")
    lo = np.array([0.5 - l, 0.5 - mdim, c1] + [0.0] * (model.d - 3))
    hi = np.array([0.5 + l, 0.5 + mdim, c2] + [1.0] * (model.d - 3))
    lhs = float(model.rect_var(lo, hi))
    sup = two_step_sup(BoxOracle(model), lo, hi, (0, 0.5 + kappa * l), grid_res).value
    rhs = 16.0 / (9.0 * (1.0 - kappa * kappa)) * sup if sup != EMPTY else EMPTY
    inter = (2 * l) ** 2 * (2 * mdim) ** 2 / 144.0
    return SymmetricCheck(lhs, rhs, lhs <= rhs, sup, inter)


@dataclass
class AuditReport:
    counts: list
    min_count: int
    median_count: float
    cells_checked: int


def audit_good_cells(tree, model: PopulationModel, alpha1: float, grid_res: int = 50) -> AuditReport:
    """Count, per root-to-leaf branch, even-depth cells whose realised first
    cuts admit refinements capturing at least 1/alpha1 of the cell variance."""
    if not model.closed_form:
        raise OracleUnavailable("audit needs closed-form rectangle moments")
    oracle = BoxOracle(model)
    good = {}
    for node in tree.nodes():
        if node.depth % 2 or "first_splits" not in node.info:
            continue
        box = node.cell.bbox
        if box is None:
            raise ValueError("audit needs rectangular cells")
        lo, hi = box
        var = float(model.rect_var(lo, hi))
        best = max((two_step_sup(oracle, lo, hi, f, grid_res).value
                    for f in node.info["first_splits"]), default=EMPTY)
        good[node.key] = var <= alpha1 * best if best != EMPTY else var <= 0.0
    counts = []
    for trail in tree.branches():
        counts.append(sum(1 for n in trail if good.get(n.key, False)))
    return AuditReport(counts, min(counts), float(np.median(counts)), len(good))
