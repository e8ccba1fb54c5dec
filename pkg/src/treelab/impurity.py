"""Impurity decrease: empirical, population, and the cut notations used by
the two-level splitter."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (AxisSplit, Cell, Dataset, OracleUnavailable, Partition, ZeroMassCell,
                   as_generator)
from .oracle import PopulationModel, sample_in_cell

# Gain of a partition that has an empty (null) child. Any real gain beats it,
# so plain max/argmax handle it without special cases.
EMPTY = -math.inf


@dataclass(frozen=True)
class ImpurityReport:
    value: float
    weights: tuple
    means: tuple


def _responses(data) -> np.ndarray:
    if isinstance(data, Dataset):
        return data.responses
    return np.asarray(data, dtype=float)


def weighted_gain(values: np.ndarray, groups, weights: np.ndarray | None = None) -> ImpurityReport:
    """Sum_l w_l/w * (mean_l - mean)^2 for index groups under point weights."""
    if weights is None:
        weights = np.ones(len(values))
    total = sum(float(weights[g].sum()) for g in groups)
    if total == 0.0:
        return ImpurityReport(0.0, tuple(0.0 for _ in groups), tuple(0.0 for _ in groups))
    masses = [float(weights[g].sum()) for g in groups]
    sums = [float(weights[g] @ values[g]) for g in groups]
    mu = sum(sums) / total
    means = tuple(s / m if m > 0 else 0.0 for s, m in zip(sums, masses))
    w = tuple(m / total for m in masses)
    value = sum(wl * (ml - mu) ** 2 for wl, ml in zip(w, means))
    return ImpurityReport(value, w, means)


def empirical_impurity(parent_indices, child_index_sets, dataset) -> ImpurityReport:
    """Sample impurity decrease with the 0/0 = 0 convention for empty children."""
    y = _responses(dataset)
    parent = np.asarray(parent_indices, dtype=np.intp)
    groups = [np.asarray(g, dtype=np.intp) for g in child_index_sets]
    if sum(len(g) for g in groups) != len(parent):
        raise ValueError("child index sets do not partition the parent indices")
    if len(parent) == 0:
        return ImpurityReport(0.0, tuple(0.0 for _ in groups), tuple(0.0 for _ in groups))
    return weighted_gain(y, groups)


def empirical_variance_decomposition(parent_indices, child_index_sets, dataset):
    """Return (gain, within, total) with biased variances; gain + within == total."""
    y = _responses(dataset)
    parent = np.asarray(parent_indices, dtype=np.intp)
    n = len(parent)
    rep = empirical_impurity(parent, child_index_sets, y)
    total = float(np.var(y[parent])) if n else 0.0
    within = 0.0
    for g in child_index_sets:
        g = np.asarray(g, dtype=np.intp)
        if len(g):
            within += len(g) / n * float(np.var(y[g]))
    return rep.value, within, total


def scan_axis(x: np.ndarray, y: np.ndarray, min_samples: int = 1):
    """All cut points between consecutive distinct values of ``x``.

    Returns (thresholds, gains, left_counts). Thresholds are midpoints, so
    ``x <= threshold`` sends exactly ``left_counts`` points left.
    """
    n = len(x)
    if n < 2:
        return np.empty(0), np.empty(0), np.empty(0, dtype=np.intp)
    order = np.argsort(x, kind="stable")
    xs, ys = x[order], y[order]
    cs = np.cumsum(ys)
    n1 = np.arange(1, n)
    ok = (xs[:-1] < xs[1:]) & (n1 >= min_samples) & (n - n1 >= min_samples)
    n1 = n1[ok]
    left = cs[:-1][ok]
    n2 = n - n1
    mu1 = left / n1
    mu2 = (cs[-1] - left) / n2
    gains = n1 * n2 / float(n * n) * (mu1 - mu2) ** 2
    a, b = xs[:-1][ok], xs[1:][ok]
    thr = 0.5 * (a + b)
    thr = np.where(thr < b, thr, a)
    return thr, gains, n1


def _gains_from_sample(x: np.ndarray, v: np.ndarray, cs: np.ndarray) -> np.ndarray:
    """Gain of cutting a weighted-equally sample at each of ``cs`` (0/0 = 0)."""
    n = len(x)
    out = np.zeros(len(cs))
    if n == 0:
        return out
    order = np.argsort(x, kind="stable")
    xs = x[order]
    csum = np.concatenate(([0.0], np.cumsum(v[order])))
    n1 = np.searchsorted(xs, cs, side="right")
    n2 = n - n1
    s1 = csum[n1]
    s2 = csum[-1] - s1
    mu = csum[-1] / n
    with np.errstate(invalid="ignore", divide="ignore"):
        g1 = np.where(n1 > 0, n1 / n * (s1 / np.maximum(n1, 1) - mu) ** 2, 0.0)
        g2 = np.where(n2 > 0, n2 / n * (s2 / np.maximum(n2, 1) - mu) ** 2, 0.0)
    return g1 + g2


def _require_box(t: Cell):
    box = t.bbox
    if box is None:
        raise ValueError("cell must be axis-rectangular")
    return box


class BoxOracle:
    """Population moments and axis-cut gains on boxes.

    Uses closed forms when the regression has them, otherwise a Monte Carlo
    sample drawn once in the box handed to :meth:`bind`.
    """

    def __init__(self, model: PopulationModel, n_samples: int = 200_000, stream=None):
        self.model = model
        self.n_samples = n_samples
        self.stream = stream
        self._pts = None
        self._vals = None

    @property
    def closed(self) -> bool:
        return self.model.closed_form

    def bind(self, lo, hi) -> "BoxOracle":
        if self.closed:
            return self
        if self.stream is None:
            raise OracleUnavailable("Monte Carlo oracle needs a random stream")
        rng = as_generator(self.stream)
        lo, hi = np.asarray(lo, float), np.asarray(hi, float)
        pts = lo + (hi - lo) * rng.random((self.n_samples, len(lo)))
        bound = BoxOracle(self.model, self.n_samples, self.stream)
        bound._pts, bound._vals = pts, self.model.m(pts)
        return bound

    def _subset(self, lo, hi):
        m = np.all((self._pts >= lo) & (self._pts <= hi), axis=1)
        return self._pts[m], self._vals[m]

    def mass(self, lo, hi, ref_lo, ref_hi) -> float:
        """P(X in box | X in reference box)."""
        if self.closed or self._pts is None:
            return float(np.prod(hi - lo) / np.prod(ref_hi - ref_lo))
        inside = len(self._subset(lo, hi)[0])
        ref = len(self._subset(ref_lo, ref_hi)[0])
        return inside / ref if ref else 0.0

    def mean_var(self, lo, hi):
        if self.closed:
            return float(self.model.rect_mean(lo, hi)), float(self.model.rect_var(lo, hi))
        _, v = self._subset(lo, hi)
        if len(v) == 0:
            raise ZeroMassCell("no Monte Carlo sample in box")
        return float(v.mean()), float(v.var())

    def gains(self, lo, hi, j: int, cs) -> np.ndarray:
        """Gain of cutting box [lo, hi] at x_j <= c for each c (EMPTY outside the open side)."""
        lo, hi = np.asarray(lo, float), np.asarray(hi, float)
        cs = np.atleast_1d(np.asarray(cs, dtype=float))
        valid = (cs > lo[j]) & (cs < hi[j])
        out = np.full(len(cs), EMPTY)
        if not valid.any():
            return out
        c = cs[valid]
        if self.closed:
            k = len(c)
            lo1 = np.tile(lo, (k, 1))
            hi1 = np.tile(hi, (k, 1))
            hi1[:, j] = c
            lo2 = np.tile(lo, (k, 1))
            lo2[:, j] = c
            hi2 = np.tile(hi, (k, 1))
            w = hi[j] - lo[j]
            p1 = (c - lo[j]) / w
            p2 = (hi[j] - c) / w
            mu = float(self.model.rect_mean(lo, hi))
            mu1 = self.model.rect_mean(lo1, hi1)
            mu2 = self.model.rect_mean(lo2, hi2)
            out[valid] = p1 * (mu1 - mu) ** 2 + p2 * (mu2 - mu) ** 2
        else:
            pts, v = self._subset(lo, hi)
            out[valid] = _gains_from_sample(pts[:, j], v, c)
        return out


def threshold_grid(lo: float, hi: float, grid_res: int) -> np.ndarray:
    """Interior break points of ``grid_res`` equal sub-intervals of [lo, hi]."""
    if grid_res < 2:
        raise ValueError("grid_res must be at least 2")
    return lo + (hi - lo) * np.arange(1, grid_res) / grid_res


def _daughter_grid(lo: float, hi: float, grid_res: int, parent_grid: np.ndarray | None):
    g = threshold_grid(lo, hi, grid_res)
    if parent_grid is not None:
        inner = parent_grid[(parent_grid > lo) & (parent_grid < hi)]
        g = np.union1d(g, inner)
    return g


@dataclass(frozen=True)
class OneStepSup:
    value: float
    j: int
    c: float


def one_step_sup(oracle: BoxOracle, lo, hi, grid_res: int = 50, parent=None) -> OneStepSup:
    """Grid maximum of the one-cut gain over all coordinates.

    ``parent`` is an optional (lo, hi) whose grid points inside this box are
    added to the candidate thresholds.
    """
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    best = OneStepSup(EMPTY, -1, math.nan)
    for j in range(len(lo)):
        pg = None if parent is None else threshold_grid(parent[0][j], parent[1][j], grid_res)
        cs = _daughter_grid(lo[j], hi[j], grid_res, pg)
        if len(cs) == 0:
            continue
        g = oracle.gains(lo, hi, j, cs)
        i = int(np.argmax(g))
        if g[i] > best.value:
            best = OneStepSup(float(g[i]), j, float(cs[i]))
    return best


@dataclass(frozen=True)
class TwoStepSup:
    value: float
    first: tuple
    left: OneStepSup
    right: OneStepSup
    first_gain: float
    p_left: float


def split_box(lo, hi, j: int, c: float):
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    hi1 = hi.copy()
    hi1[j] = c
    lo2 = lo.copy()
    lo2[j] = c
    return (lo, hi1), (lo2, hi)


def two_step_sup(oracle: BoxOracle, lo, hi, first: tuple, grid_res: int = 50) -> TwoStepSup:
    """Grid sup over daughter cuts of S_t(first | c1, c2).

    The four-cell gain splits into P1*S(t1) + P2*S(t2) + S(t; t1, t2), so the
    maximisation runs separately in each daughter.
    """
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    j, c = first
    first_gain = float(oracle.gains(lo, hi, j, [c])[0])
    none = OneStepSup(EMPTY, -1, math.nan)
    if first_gain == EMPTY:
        return TwoStepSup(EMPTY, (j, c), none, none, EMPTY, math.nan)
    (l1, h1), (l2, h2) = split_box(lo, hi, j, c)
    p1 = oracle.mass(l1, h1, lo, hi)
    s1 = one_step_sup(oracle, l1, h1, grid_res, parent=(lo, hi))
    s2 = one_step_sup(oracle, l2, h2, grid_res, parent=(lo, hi))
    value = p1 * s1.value + (1 - p1) * s2.value + first_gain
    if s1.value == EMPTY or s2.value == EMPTY:
        value = EMPTY
    return TwoStepSup(float(value), (j, c), s1, s2, first_gain, p1)


def _closed_or_mc(model: PopulationModel, n_samples: int, stream) -> BoxOracle:
    if not model.closed_form and stream is None:
        raise OracleUnavailable("model has no closed forms and no stream was given")
    return BoxOracle(model, n_samples, stream)


def one_step_impurity(t: Cell, c: tuple, model: PopulationModel, n_samples: int = 200_000,
                      stream=None) -> float:
    """S_t(c) for c = (j, threshold); EMPTY when a child is null."""
    lo, hi = _require_box(t)
    oracle = _closed_or_mc(model, n_samples, stream).bind(lo, hi)
    return float(oracle.gains(lo, hi, int(c[0]), [float(c[1])])[0])


def one_step_product_form(t: Cell, c: tuple, model: PopulationModel, n_samples: int = 200_000,
                          stream=None) -> float:
    """P(t1|t) P(t2|t) (mu(t1) - mu(t2))^2."""
    lo, hi = _require_box(t)
    j, thr = int(c[0]), float(c[1])
    if not lo[j] < thr < hi[j]:
        return EMPTY
    oracle = _closed_or_mc(model, n_samples, stream).bind(lo, hi)
    (l1, h1), (l2, h2) = split_box(lo, hi, j, thr)
    p1 = oracle.mass(l1, h1, lo, hi)
    p2 = oracle.mass(l2, h2, lo, hi)
    if p1 == 0.0 or p2 == 0.0:
        return 0.0
    mu1 = oracle.mean_var(l1, h1)[0]
    mu2 = oracle.mean_var(l2, h2)[0]
    return p1 * p2 * (mu1 - mu2) ** 2


def four_boxes(lo, hi, c, c1, c2):
    """The four boxes of cutting at c, then the left daughter at c1 and the right at c2.

    Returns None when a cut misses the open side of the box it applies to.
    """
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    j, thr = int(c[0]), float(c[1])
    if not lo[j] < thr < hi[j]:
        return None
    (l1, h1), (l2, h2) = split_box(lo, hi, j, thr)
    out = []
    for (a, b), (k, s) in (((l1, h1), c1), ((l2, h2), c2)):
        k, s = int(k), float(s)
        if not a[k] < s < b[k]:
            return None
        out.extend(split_box(a, b, k, s))
    return out


def two_step_impurity(t: Cell, c: tuple, c1: tuple, c2: tuple, model: PopulationModel,
                      n_samples: int = 200_000, stream=None) -> float:
    """S_t(c | c1, c2) over the four-cell partition, computed directly."""
    lo, hi = _require_box(t)
    boxes = four_boxes(lo, hi, c, c1, c2)
    if boxes is None:
        return EMPTY
    oracle = _closed_or_mc(model, n_samples, stream).bind(lo, hi)
    mu = oracle.mean_var(lo, hi)[0]
    total = 0.0
    for a, b in boxes:
        p = oracle.mass(a, b, lo, hi)
        if p > 0:
            total += p * (oracle.mean_var(a, b)[0] - mu) ** 2
    return total


def two_step_decomposition_residual(t: Cell, c: tuple, c1: tuple, c2: tuple, measure,
                                    weights=None) -> float:
    """|S4 - P1 S2(t1) - P2 S2(t2) - S2(t)| on a finite measure.

    ``measure`` is a Dataset (empirical measure, optionally re-weighted by
    ``weights``) or an (X, y) pair.
    """
    if isinstance(measure, Dataset):
        X, y = measure.features, measure.responses
    else:
        X, y = (np.asarray(a, dtype=float) for a in measure)
    w = np.ones(len(y)) if weights is None else np.asarray(weights, dtype=float)
    idx = np.flatnonzero(t.contains(X))
    X, y, w = X[idx], y[idx], w[idx]
    left = AxisSplit(int(c[0]), float(c[1])).contains(X)
    a = AxisSplit(int(c1[0]), float(c1[1])).contains(X)
    b = AxisSplit(int(c2[0]), float(c2[1])).contains(X)
    g1, g2 = np.flatnonzero(left), np.flatnonzero(~left)
    cells = [np.flatnonzero(left & a), np.flatnonzero(left & ~a),
             np.flatnonzero(~left & b), np.flatnonzero(~left & ~b)]
    s4 = weighted_gain(y, cells, w).value
    s_top = weighted_gain(y, [g1, g2], w)
    s_left = weighted_gain(y, [g1[a[g1]], g1[~a[g1]]], w).value
    s_right = weighted_gain(y, [g2[b[g2]], g2[~b[g2]]], w).value
    p1, p2 = s_top.weights
    return abs(s4 - p1 * s_left - p2 * s_right - s_top.value)


def _mc_partition_sample(t: Cell, P: Partition, model: PopulationModel, n_samples: int, stream):
    rng = as_generator(stream)
    pts, _, _ = sample_in_cell(t, n_samples, rng)
    if len(pts) == 0:
        raise ZeroMassCell("no Monte Carlo sample landed in the parent cell")
    v = model.m(pts)
    labels = np.full(len(pts), -1)
    for i in range(P.L):
        m = np.ones(len(pts), dtype=bool)
        for p in P.extra_predicates(i):
            m &= p.contains(pts)
        labels[m] = i
    return v, labels


def population_impurity_mc(t: Cell, P: Partition, model: PopulationModel,
                           n_samples: int = 200_000, stream=None) -> tuple[float, float]:
    """Monte Carlo S(t; P) with a delta-method standard error."""
    v, labels = _mc_partition_sample(t, P, model, n_samples, stream)
    n = len(v)
    mu = v.mean()
    value = 0.0
    psi = np.zeros(n)
    for i in range(P.L):
        m = labels == i
        k = int(m.sum())
        if k == 0:
            continue
        mu_l = v[m].mean()
        value += k / n * (mu_l - mu) ** 2
        psi[m] = -mu_l ** 2 + 2 * (mu_l - mu) * v[m]
    return float(value), float(psi.std() / math.sqrt(n))


def _partition_is_boxes(P: Partition) -> bool:
    return P.parent.is_rectangular and all(ch.is_rectangular for ch in P.children)


def population_impurity(t: Cell, P: Partition, model: PopulationModel,
                        n_samples: int = 200_000, stream=None) -> float:
    if model.closed_form and _partition_is_boxes(P):
        lo, hi = _require_box(t)
        vol = float(np.prod(hi - lo))
        if vol <= 0:
            raise ZeroMassCell("parent cell has zero volume")
        mu = float(model.rect_mean(lo, hi))
        total = 0.0
        for ch in P.children:
            a, b = ch.bbox
            p = float(np.prod(np.maximum(b - a, 0.0))) / vol
            if p > 0:
                total += p * (float(model.rect_mean(a, b)) - mu) ** 2
        return total
    if stream is None:
        raise OracleUnavailable("Monte Carlo impurity needs a random stream")
    return population_impurity_mc(t, P, model, n_samples, stream)[0]


def population_V(t: Cell, P: Partition, model: PopulationModel, via: str = "definition",
                 n_samples: int = 200_000, stream=None) -> float:
    """Var(m | t) - S(t; P), or equivalently the mass-weighted child variances."""
    if via not in ("definition", "children"):
        raise ValueError("via must be 'definition' or 'children'")
    if model.closed_form and _partition_is_boxes(P):
        lo, hi = _require_box(t)
        if via == "definition":
            return float(model.rect_var(lo, hi)) - population_impurity(t, P, model)
        vol = float(np.prod(hi - lo))
        out = 0.0
        for ch in P.children:
            a, b = ch.bbox
            p = float(np.prod(np.maximum(b - a, 0.0))) / vol
            if p > 0:
                out += p * float(model.rect_var(a, b))
        return out
    if stream is None:
        raise OracleUnavailable("Monte Carlo impurity needs a random stream")
    v, labels = _mc_partition_sample(t, P, model, n_samples, stream)
    if via == "definition":
        mu = v.mean()
        s = sum((labels == i).mean() * (v[labels == i].mean() - mu) ** 2
                for i in range(P.L) if np.any(labels == i))
        return float(v.var() - s)
    return float(sum((labels == i).mean() * v[labels == i].var()
                     for i in range(P.L) if np.any(labels == i)))
