"""Domain types shared by the splitters, growers and verification tools.

Cells are stored as conjunctions of split predicates rather than as solids,
because interaction regions and oblique cuts do not produce rectangles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Union

import numpy as np


class OverlapError(ValueError):
    """A sample point matched more than one child of a partition."""


class GapError(ValueError):
    """A sample point matched no child of a partition."""


class ZeroMassCell(ValueError):
    """A cell has (estimated) probability mass zero."""


class NoCandidates(ValueError):
    """Best-candidate selection was asked to choose from an empty set."""


class OracleUnavailable(RuntimeError):
    """A population quantity was requested that the model cannot supply."""


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray
    responses: np.ndarray

    def __post_init__(self):
        X = np.array(self.features, dtype=float)
        y = np.array(self.responses, dtype=float).reshape(-1)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise ValueError(f"features must be a non-empty n x d array, got shape {X.shape}")
        if y.shape[0] != X.shape[0]:
            raise ValueError(f"{X.shape[0]} feature rows but {y.shape[0]} responses")
        if not np.all(np.isfinite(X)) or X.min() < 0.0 or X.max() > 1.0:
            raise ValueError("feature values must lie in [0, 1]")
        if not np.all(np.isfinite(y)):
            raise ValueError("responses must be finite")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "responses", y)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]


def _side(inside: bool) -> str:
    return "le" if inside else "gt"


@dataclass(frozen=True)
class AxisSplit:
    """x_j <= c when ``inside``, otherwise x_j > c."""

    j: int
    c: float
    inside: bool = True

    def __post_init__(self):
        if self.j < 0:
            raise ValueError("coordinate index must be non-negative")

    def contains(self, X: np.ndarray) -> np.ndarray:
        col = X[:, self.j]
        return col <= self.c if self.inside else col > self.c

    def complement(self) -> "AxisSplit":
        return replace(self, inside=not self.inside)

    def coords(self) -> tuple[int, ...]:
        return (self.j,)

    def to_dict(self) -> dict:
        return {"type": "axis", "j": self.j, "c": self.c, "side": _side(self.inside)}


@dataclass(frozen=True)
class ObliqueSplit:
    """b1*x_j1 + b2*x_j2 <= s when ``inside``, otherwise the strict complement."""

    j1: int
    j2: int
    b1: float
    b2: float
    s: float
    inside: bool = True

    def __post_init__(self):
        if self.j1 == self.j2:
            raise ValueError("oblique split needs two distinct coordinates")
        if self.b1 == 0.0 and self.b2 == 0.0:
            raise ValueError("oblique direction must be non-zero")

    def project(self, X: np.ndarray) -> np.ndarray:
        return self.b1 * X[:, self.j1] + self.b2 * X[:, self.j2]

    def contains(self, X: np.ndarray) -> np.ndarray:
        p = self.project(X)
        return p <= self.s if self.inside else p > self.s

    def complement(self) -> "ObliqueSplit":
        return replace(self, inside=not self.inside)

    def coords(self) -> tuple[int, ...]:
        return (self.j1, self.j2)

    def to_dict(self) -> dict:
        return {"type": "oblique", "j1": self.j1, "j2": self.j2, "b1": self.b1,
                "b2": self.b2, "s": self.s, "side": _side(self.inside)}


# four corners, the checkerboard union, and the two single-coordinate forms
INTERACTION_KINDS = ("le_le", "le_ge", "ge_le", "ge_ge", "checker", "single1", "single2")


@dataclass(frozen=True)
class InteractionRegion:
    kind: str
    j1: int
    j2: int
    c1: float
    c2: float
    inside: bool = True

    def __post_init__(self):
        if self.kind not in INTERACTION_KINDS:
            raise ValueError(f"unknown interaction region kind {self.kind!r}")
        if self.j1 == self.j2:
            raise ValueError("interaction region needs two distinct coordinates")

    def region(self, X: np.ndarray) -> np.ndarray:
        u, v = X[:, self.j1], X[:, self.j2]
        k = self.kind
        if k == "single1":
            return u <= self.c1
        if k == "single2":
            return v <= self.c2
        if k == "checker":
            return ((u <= self.c1) & (v <= self.c2)) | ((u >= self.c1) & (v >= self.c2))
        a = u <= self.c1 if k[:2] == "le" else u >= self.c1
        b = v <= self.c2 if k[3:] == "le" else v >= self.c2
        return a & b

    def contains(self, X: np.ndarray) -> np.ndarray:
        r = self.region(X)
        return r if self.inside else ~r

    def complement(self) -> "InteractionRegion":
        return replace(self, inside=not self.inside)

    def coords(self) -> tuple[int, ...]:
        return (self.j1, self.j2)

    def to_dict(self) -> dict:
        return {"type": "interaction", "kind": self.kind, "j1": self.j1, "j2": self.j2,
                "c1": self.c1, "c2": self.c2, "side": _side(self.inside)}


SplitPredicate = Union[AxisSplit, ObliqueSplit, InteractionRegion]


def predicate_from_dict(rec: dict) -> SplitPredicate:
    inside = {"le": True, "gt": False}[rec["side"]]
    kind = rec["type"]
    if kind == "axis":
        return AxisSplit(int(rec["j"]), float(rec["c"]), inside)
    if kind == "oblique":
        return ObliqueSplit(int(rec["j1"]), int(rec["j2"]), float(rec["b1"]),
                            float(rec["b2"]), float(rec["s"]), inside)
    if kind == "interaction":
        return InteractionRegion(rec["kind"], int(rec["j1"]), int(rec["j2"]),
                                 float(rec["c1"]), float(rec["c2"]), inside)
    raise ValueError(f"unknown predicate type {kind!r}")


def _as_points(x, d: int) -> np.ndarray:
    X = np.asarray(x, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2 or X.shape[1] != d:
        raise ValueError(f"expected points of dimension {d}, got shape {np.shape(x)}")
    return X


@dataclass(frozen=True)
class Cell:
    """Region of [0,1]^d given by a conjunction of predicates.

    The root has an empty path and is the closed unit cube.
    """

    d: int
    path: tuple = ()

    def child(self, *preds: SplitPredicate) -> "Cell":
        return Cell(self.d, self.path + tuple(preds))

    def contains(self, X) -> np.ndarray:
        X = _as_points(X, self.d)
        mask = np.all((X >= 0.0) & (X <= 1.0), axis=1)
        for p in self.path:
            mask &= p.contains(X)
        return mask

    @property
    def is_rectangular(self) -> bool:
        return all(isinstance(p, AxisSplit) for p in self.path)

    @cached_property
    def _bounds(self):
        lo = np.zeros(self.d)
        hi = np.ones(self.d)
        lo_open = np.zeros(self.d, dtype=bool)
        for p in self.path:
            if not isinstance(p, AxisSplit):
                continue
            if p.inside:
                if p.c < hi[p.j]:
                    hi[p.j] = p.c
            elif p.c >= lo[p.j]:
                lo[p.j] = p.c
                lo_open[p.j] = True
        for a in (lo, hi, lo_open):
            a.setflags(write=False)
        return lo, hi, lo_open

    @property
    def bbox(self):
        """Exact (lo, hi) for axis-only paths, otherwise None."""
        if not self.is_rectangular:
            return None
        lo, hi, _ = self._bounds
        return lo, hi

    @property
    def outer_box(self):
        """Box implied by the axis predicates alone; always contains the cell."""
        lo, hi, _ = self._bounds
        return lo, hi

    def bbox_contains(self, X) -> np.ndarray:
        X = _as_points(X, self.d)
        lo, hi, lo_open = self._bounds
        above = np.where(lo_open, X > lo, X >= lo)
        return np.all(above & (X <= hi), axis=1)

    def side(self, j: int) -> tuple[float, float]:
        lo, hi = self.outer_box
        return float(lo[j]), float(hi[j])


def cell_membership(cell: Cell, x) -> bool:
    X = _as_points(x, cell.d)
    if X.shape[0] != 1:
        raise ValueError("cell_membership takes a single point; use Cell.contains for batches")
    return bool(cell.contains(X)[0])


@dataclass(frozen=True)
class Partition:
    """Disjoint children covering ``parent``; children carry the parent path as prefix."""

    parent: Cell
    children: tuple

    def __post_init__(self):
        if not self.children:
            raise ValueError("partition needs at least one child")
        k = len(self.parent.path)
        for ch in self.children:
            if ch.path[:k] != self.parent.path:
                raise ValueError("child path does not extend the parent path")

    @property
    def L(self) -> int:
        return len(self.children)

    def extra_predicates(self, i: int) -> tuple:
        return self.children[i].path[len(self.parent.path):]


def assign_points(partition: Partition, X: np.ndarray, indices: np.ndarray) -> list[np.ndarray]:
    """Split ``indices`` among the children, checking disjointness and cover."""
    indices = np.asarray(indices, dtype=np.intp)
    sub = X[indices]
    hits = np.zeros((partition.L, len(indices)), dtype=bool)
    for i in range(partition.L):
        m = np.ones(len(indices), dtype=bool)
        for p in partition.extra_predicates(i):
            m &= p.contains(sub)
        hits[i] = m
    count = hits.sum(axis=0)
    if np.any(count > 1):
        bad = indices[np.argmax(count > 1)]
        raise OverlapError(f"sample {bad} falls in several children")
    if np.any(count == 0):
        bad = indices[np.argmax(count == 0)]
        raise GapError(f"sample {bad} falls in no child")
    return [indices[h] for h in hits]


def partition_assign(p: Partition, dataset: Dataset, parent_indices=None) -> list[np.ndarray]:
    X = dataset.features
    if parent_indices is None:
        parent_indices = np.flatnonzero(p.parent.contains(X))
    return assign_points(p, X, parent_indices)


class RandomStream:
    """Hierarchical seeded randomness.

    Every generator is derived from the master seed and an integer key; keys
    are length-prefixed so that distinct (tree, node path, purpose) tuples
    never collide.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        if self.seed < 0:
            raise ValueError("seed must be non-negative")

    def generator(self, *key: int) -> np.random.Generator:
        key = tuple(int(k) for k in key)
        if any(k < 0 for k in key):
            raise ValueError("stream keys must be non-negative")
        ss = np.random.SeedSequence(self.seed, spawn_key=(len(key),) + key)
        return np.random.Generator(np.random.PCG64(ss))

    def node(self, tree_id: int, path: tuple, purpose: int = 0) -> np.random.Generator:
        return self.generator(tree_id, len(path), *path, purpose)

    def __repr__(self):
        return f"RandomStream({self.seed})"


# purposes for node substreams
DRAWS = 0
TIES = 1


def as_generator(stream) -> np.random.Generator:
    if isinstance(stream, np.random.Generator):
        return stream
    if isinstance(stream, RandomStream):
        return stream.generator()
    return np.random.default_rng(stream)


def cell_volume_mc(cell: Cell, n_samples: int, stream) -> float:
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    lo, hi = cell.outer_box
    box = float(np.prod(hi - lo))
    if cell.is_rectangular or box == 0.0:
        return box
    rng = as_generator(stream)
    U = lo + (hi - lo) * rng.random((n_samples, cell.d))
    return box * float(cell.contains(U).mean())


def depth_for(n: int, c: float = 0.2, even: bool = False) -> int:
    """k = floor(c * log2 n), at least 1; optionally rounded up to even."""
    k = max(1, math.floor(c * math.log2(n)))
    if even and k % 2:
        k += 1
    return k


@dataclass
class Node:
    cell: Cell
    key: tuple
    depth: int
    n_samples: int
    value: float
    children: list = field(default_factory=list)
    indices: np.ndarray | None = None
    info: dict = field(default_factory=dict)

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def extra_predicates(self, child: "Node") -> tuple:
        return child.cell.path[len(self.cell.path):]
