"""Candidate partitions for each splitting rule, and selection of the best one.

Every random generator draws its full quota of random numbers up front and
then discards draws that leave a child below ``min_samples``, so the amount
of randomness consumed never depends on the data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import (AxisSplit, Cell, Dataset, InteractionRegion, INTERACTION_KINDS, NoCandidates,
                   ObliqueSplit, Partition, assign_points)
from .impurity import scan_axis, weighted_gain


@dataclass(frozen=True)
class Cart:
    name = "cart"


@dataclass(frozen=True)
class ExtraTrees:
    nsplit: int = 1
    name = "extratrees"

    def __post_init__(self):
        _positive("nsplit", self.nsplit)


@dataclass(frozen=True)
class InteractionForest:
    npairs: int = 1
    name = "interaction"

    def __post_init__(self):
        _positive("npairs", self.npairs)


@dataclass(frozen=True)
class Oblique:
    ncandidates: int = 1
    name = "oblique"

    def __post_init__(self):
        _positive("ncandidates", self.ncandidates)


@dataclass(frozen=True)
class Rsrf:
    W: int = 1
    name = "rsrf"

    def __post_init__(self):
        _positive("W", self.W)


def _positive(label, v):
    if not isinstance(v, (int, np.integer)) or isinstance(v, bool) or v < 1:
        raise ValueError(f"{label} must be a positive integer, got {v!r}")


SPLITTERS = {"cart": Cart, "extratrees": ExtraTrees, "interaction": InteractionForest,
             "oblique": Oblique, "rsrf": Rsrf}
_PARAM = {"extratrees": "nsplit", "interaction": "npairs", "oblique": "ncandidates", "rsrf": "W"}


def splitter_to_dict(cfg) -> dict:
    out = {"name": cfg.name}
    if cfg.name in _PARAM:
        out[_PARAM[cfg.name]] = getattr(cfg, _PARAM[cfg.name])
    return out


def splitter_from_dict(rec: dict):
    name = rec["name"]
    if name not in SPLITTERS:
        raise ValueError(f"unknown splitter {name!r}; choose from {sorted(SPLITTERS)}")
    if name == "cart":
        return Cart()
    key = _PARAM[name]
    return SPLITTERS[name](int(rec.get(key, 1)))


class _AxisSpecs(Sequence):
    """Lazy child-predicate tuples for a batch of axis cuts."""

    def __init__(self, js, thrs):
        self.js = js
        self.thrs = thrs

    def __len__(self):
        return len(self.js)

    def __getitem__(self, i):
        j, c = int(self.js[i]), float(self.thrs[i])
        return ((AxisSplit(j, c, True),), (AxisSplit(j, c, False),))


@dataclass
class CandidateSet:
    """Scored candidates for one node; partitions are built on request."""

    parent: Cell
    specs: Sequence = ()
    scores: np.ndarray = field(default_factory=lambda: np.empty(0))
    provenance: list = field(default_factory=list)
    draws: list = field(default_factory=list)

    def __len__(self):
        return len(self.specs)

    def partition(self, i: int) -> Partition:
        return Partition(self.parent, tuple(self.parent.child(*preds) for preds in self.specs[i]))

    @property
    def candidates(self) -> list[Partition]:
        return [self.partition(i) for i in range(len(self))]


def _indices(t: Cell, dataset: Dataset, indices) -> np.ndarray:
    if indices is None:
        return np.flatnonzero(t.contains(dataset.features))
    return np.asarray(indices, dtype=np.intp)


def _mask_score(y: np.ndarray, mask: np.ndarray) -> float:
    n = len(y)
    n1 = int(mask.sum())
    n2 = n - n1
    if n1 == 0 or n2 == 0:
        return 0.0
    mu1 = y[mask].mean()
    mu2 = y[~mask].mean()
    return n1 * n2 / (n * n) * (mu1 - mu2) ** 2


def gen_cart(t: Cell, dataset: Dataset, config=None, rng=None, min_samples: int = 1,
             indices=None) -> CandidateSet:
    """Every axis cut between consecutive distinct in-cell values."""
    idx = _indices(t, dataset, indices)
    if len(idx) < 2 * min_samples:
        return CandidateSet(t)
    X = dataset.features[idx]
    y = dataset.responses[idx]
    js, thrs, scores = [], [], []
    for j in range(dataset.d):
        thr, gains, _ = scan_axis(X[:, j], y, min_samples)
        js.append(np.full(len(thr), j))
        thrs.append(thr)
        scores.append(gains)
    js = np.concatenate(js)
    thrs = np.concatenate(thrs)
    scores = np.concatenate(scores)
    prov = _LazyProvenance(js, thrs)
    return CandidateSet(t, _AxisSpecs(js, thrs), scores, prov)


class _LazyProvenance(Sequence):
    def __init__(self, js, thrs):
        self.js, self.thrs = js, thrs

    def __len__(self):
        return len(self.js)

    def __getitem__(self, i):
        return {"j": int(self.js[i]), "c": float(self.thrs[i])}


def gen_extratrees(t: Cell, dataset: Dataset, config: ExtraTrees, rng: np.random.Generator,
                   min_samples: int = 1, indices=None) -> CandidateSet:
    idx = _indices(t, dataset, indices)
    d = dataset.d
    js = rng.integers(d, size=config.nsplit)
    us = rng.random(config.nsplit)
    out = CandidateSet(t, [], [], [], draws=list(zip(js.tolist(), us.tolist())))
    if len(idx) < 2 * min_samples:
        out.scores = np.asarray(out.scores, dtype=float)
        return out
    X = dataset.features[idx]
    y = dataset.responses[idx]
    lo, hi = t.outer_box
    for j, u in zip(js, us):
        j = int(j)
        c = float(lo[j] + u * (hi[j] - lo[j]))
        mask = X[:, j] <= c
        k = int(mask.sum())
        if k < min_samples or len(idx) - k < min_samples:
            continue
        out.specs.append(((AxisSplit(j, c, True),), (AxisSplit(j, c, False),)))
        out.scores.append(_mask_score(y, mask))
        out.provenance.append({"j": j, "u": float(u), "c": c})
    out.scores = np.asarray(out.scores, dtype=float)
    return out


def gen_interaction(t: Cell, dataset: Dataset, config: InteractionForest, rng: np.random.Generator,
                    min_samples: int = 1, indices=None) -> CandidateSet:
    """Seven region shapes per drawn (j1, j2, c1, c2); thresholds are in-cell sample values."""
    idx = _indices(t, dataset, indices)
    d = dataset.d
    out = CandidateSet(t, [], [], [])
    if d < 2:
        out.scores = np.empty(0)
        return out
    k = config.npairs
    a = rng.integers(d, size=k)
    b = (a + 1 + rng.integers(d - 1, size=k)) % d
    n = len(idx)
    r1 = rng.random(k)
    r2 = rng.random(k)
    out.draws = list(zip(a.tolist(), b.tolist(), r1.tolist(), r2.tolist()))
    if n < 2 * min_samples:
        out.scores = np.empty(0)
        return out
    X = dataset.features[idx]
    y = dataset.responses[idx]
    for j1, j2, u1, u2 in zip(a, b, r1, r2):
        j1, j2 = int(j1), int(j2)
        c1 = float(X[min(int(u1 * n), n - 1), j1])
        c2 = float(X[min(int(u2 * n), n - 1), j2])
        for kind in INTERACTION_KINDS:
            reg = InteractionRegion(kind, j1, j2, c1, c2, True)
            mask = reg.region(X)
            m = int(mask.sum())
            if m < min_samples or n - m < min_samples:
                continue
            out.specs.append(((reg,), (reg.complement(),)))
            out.scores.append(_mask_score(y, mask))
            out.provenance.append({"kind": kind, "j1": j1, "j2": j2, "c1": c1, "c2": c2})
    out.scores = np.asarray(out.scores, dtype=float)
    return out


def gen_oblique(t: Cell, dataset: Dataset, config: Oblique, rng: np.random.Generator,
                min_samples: int = 1, indices=None) -> CandidateSet:
    """Random two-coordinate hyperplanes, direction uniform on the circle."""
    idx = _indices(t, dataset, indices)
    d = dataset.d
    out = CandidateSet(t, [], [], [])
    if d < 2:
        out.scores = np.empty(0)
        return out
    k = config.ncandidates
    a = rng.integers(d, size=k)
    b = (a + 1 + rng.integers(d - 1, size=k)) % d
    theta = rng.random(k) * 2 * math.pi
    us = rng.random(k)
    out.draws = list(zip(a.tolist(), b.tolist(), theta.tolist(), us.tolist()))
    n = len(idx)
    if n < 2 * min_samples:
        out.scores = np.empty(0)
        return out
    X = dataset.features[idx]
    y = dataset.responses[idx]
    for k1, k2, th, u in zip(a, b, theta, us):
        k1, k2 = int(k1), int(k2)
        b1, b2 = math.cos(th), math.sin(th)
        proj = b1 * X[:, k1] + b2 * X[:, k2]
        pmin, pmax = float(proj.min()), float(proj.max())
        s = pmin + u * (pmax - pmin)
        mask = proj <= s
        m = int(mask.sum())
        if m < min_samples or n - m < min_samples:
            continue
        pred = ObliqueSplit(k1, k2, b1, b2, s, True)
        out.specs.append(((pred,), (pred.complement(),)))
        out.scores.append(_mask_score(y, mask))
        out.provenance.append({"j1": k1, "j2": k2, "b1": b1, "b2": b2, "s": s})
    out.scores = np.asarray(out.scores, dtype=float)
    return out


def best_index(scores: np.ndarray, rng: np.random.Generator | None) -> int:
    """Argmax with uniformly random tie-breaking among exact ties."""
    scores = np.asarray(scores, dtype=float)
    if len(scores) == 0:
        raise NoCandidates("no candidate partitions to choose from")
    top = np.flatnonzero(scores == scores.max())
    if len(top) == 1 or rng is None:
        return int(top[0])
    return int(top[rng.integers(len(top))])


def choose_best(cands: CandidateSet, dataset: Dataset | None = None,
                rng: np.random.Generator | None = None) -> Partition:
    return cands.partition(best_index(cands.scores, rng))


def gen_rsrf(t: Cell, dataset: Dataset, config: Rsrf, rng: np.random.Generator,
             min_samples: int = 1, indices=None) -> CandidateSet:
    """W random first cuts, each daughter refined by its best CART cut.

    A daughter with enough points but no admissible CART cut is kept whole;
    a first cut leaving a daughter below ``min_samples`` is discarded.
    """
    idx = _indices(t, dataset, indices)
    d = dataset.d
    W = config.W
    js = rng.integers(d, size=W)
    us = rng.random(W)
    lo, hi = t.outer_box
    firsts = [(int(j), float(lo[j] + u * (hi[j] - lo[j]))) for j, u in zip(js, us)]
    out = CandidateSet(t, [], [], [], draws=firsts)
    n = len(idx)
    if n < 2 * min_samples:
        out.scores = np.empty(0)
        return out
    X = dataset.features[idx]
    y = dataset.responses[idx]
    for w, (j, c) in enumerate(firsts):
        left = X[:, j] <= c
        k = int(left.sum())
        if k < min_samples or n - k < min_samples:
            continue
        first = AxisSplit(j, c, True)
        groups = []
        specs = []
        inner = []
        for side_mask, pred in ((left, first), (~left, first.complement())):
            sub = np.flatnonzero(side_mask)
            best = _best_inner_cut(X[sub], y[sub], min_samples, rng)
            if best is None:
                groups.append(sub)
                specs.append((pred,))
                inner.append(None)
            else:
                jj, cc = best
                lm = X[sub, jj] <= cc
                groups.extend([sub[lm], sub[~lm]])
                specs.extend([(pred, AxisSplit(jj, cc, True)), (pred, AxisSplit(jj, cc, False))])
                inner.append((jj, cc))
        out.specs.append(tuple(specs))
        out.scores.append(weighted_gain(y, groups).value)
        out.provenance.append({"w": w, "first": (j, c), "left": inner[0], "right": inner[1]})
    out.scores = np.asarray(out.scores, dtype=float)
    return out


def _best_inner_cut(X: np.ndarray, y: np.ndarray, min_samples: int, rng):
    if len(y) < 2 * min_samples:
        return None
    best_j, best_c, scores = [], [], []
    for j in range(X.shape[1]):
        thr, gains, _ = scan_axis(X[:, j], y, min_samples)
        best_j.append(np.full(len(thr), j))
        best_c.append(thr)
        scores.append(gains)
    scores = np.concatenate(scores)
    if len(scores) == 0:
        return None
    i = best_index(scores, rng)
    return int(np.concatenate(best_j)[i]), float(np.concatenate(best_c)[i])


_GENERATORS = {"cart": gen_cart, "extratrees": gen_extratrees, "interaction": gen_interaction,
               "oblique": gen_oblique, "rsrf": gen_rsrf}


def generate(config, t: Cell, dataset: Dataset, rng: np.random.Generator, min_samples: int = 1,
             indices=None) -> CandidateSet:
    return _GENERATORS[config.name](t, dataset, config, rng, min_samples, indices)


def candidate_groups(cands: CandidateSet, i: int, dataset: Dataset, indices) -> list[np.ndarray]:
    return assign_points(cands.partition(i), dataset.features, indices)
