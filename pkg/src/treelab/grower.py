"""Tree growing, prediction and forests.

Trees grow breadth-first. Each node draws its randomness from a substream
keyed by (tree id, node key), so the result does not depend on the order in
which nodes are processed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (AxisSplit, Cell, Dataset, DRAWS, Node, OracleUnavailable, RandomStream, TIES)
from .impurity import EMPTY, BoxOracle, two_step_sup
from .oracle import PopulationModel
from .splitters import Cart, Rsrf, best_index, candidate_groups, generate


@dataclass(frozen=True)
class SemiSample:
    """Switch to population scoring once a cell's mass is at most ``zeta``."""

    zeta: float
    model: PopulationModel
    grid_res: int = 50

    def __post_init__(self):
        if not 0.0 <= self.zeta <= 1.0:
            raise ValueError("zeta must lie in [0, 1]")


@dataclass(frozen=True)
class GrowConfig:
    depth: int
    splitter: object = field(default_factory=Cart)
    min_samples: int = 1
    semi_sample: SemiSample | None = None

    def __post_init__(self):
        if not isinstance(self.depth, (int, np.integer)) or self.depth < 1:
            raise ValueError(f"depth must be a positive integer, got {self.depth!r}")
        if self.min_samples < 1:
            raise ValueError("min_samples must be at least 1")
        two_level = isinstance(self.splitter, Rsrf)
        if two_level and self.depth % 2:
            raise ValueError(f"two-level splitter needs an even depth, got {self.depth}")
        if self.semi_sample is not None and not two_level:
            raise ValueError("semi-sample growth requires the rsrf splitter")


def _leaf_value(y: np.ndarray, idx: np.ndarray) -> float:
    return float(y[idx].mean()) if len(idx) else 0.0


def _make_node(cell: Cell, key: tuple, depth: int, y: np.ndarray, idx: np.ndarray) -> Node:
    return Node(cell=cell, key=key, depth=depth, n_samples=len(idx), value=_leaf_value(y, idx),
                indices=idx)


class Tree:
    def __init__(self, root: Node, config: GrowConfig, tree_id: int = 0, seed: int | None = None):
        self.root = root
        self.config = config
        self.tree_id = tree_id
        self.seed = seed

    @property
    def d(self) -> int:
        return self.root.cell.d

    def nodes(self):
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def leaves(self) -> list[Node]:
        return [n for n in self.nodes() if n.is_leaf]

    @property
    def depth(self) -> int:
        return max(n.depth for n in self.leaves())

    def branches(self):
        """Root-to-leaf node lists."""
        out = []

        def walk(node, trail):
            trail = trail + [node]
            if node.is_leaf:
                out.append(trail)
            for ch in node.children:
                walk(ch, trail)

        walk(self.root, [])
        return out

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        out = np.zeros(X.shape[0])
        self._fill(self.root, X, np.arange(X.shape[0]), out)
        return out

    def _fill(self, node: Node, X, rows, out):
        if node.is_leaf or len(rows) == 0:
            out[rows] = node.value
            return
        sub = X[rows]
        for ch in node.children:
            m = np.ones(len(rows), dtype=bool)
            for p in node.extra_predicates(ch):
                m &= p.contains(sub)
            self._fill(ch, X, rows[m], out)

    def strip(self) -> "Tree":
        """Drop training indices (they are only needed while growing)."""
        for n in self.nodes():
            n.indices = None
        return self


class Forest:
    def __init__(self, trees: list[Tree]):
        if not trees:
            raise ValueError("forest needs at least one tree")
        self.trees = list(trees)

    def predict(self, X) -> np.ndarray:
        return np.mean([t.predict(X) for t in self.trees], axis=0)


def predict(model, X) -> np.ndarray:
    return model.predict(X)


def _split_node(node: Node, dataset: Dataset, config: GrowConfig, stream: RandomStream,
                tree_id: int) -> list[Node]:
    rng = stream.node(tree_id, node.key, DRAWS)
    cands = generate(config.splitter, node.cell, dataset, rng, config.min_samples, node.indices)
    if len(cands) == 0:
        return []
    i = best_index(cands.scores, stream.node(tree_id, node.key, TIES))
    groups = candidate_groups(cands, i, dataset, node.indices)
    part = cands.partition(i)
    node.info.update(score=float(cands.scores[i]), best_score=float(cands.scores.max()),
                     n_candidates=len(cands), split=cands.provenance[i])
    y = dataset.responses
    node.children = [_make_node(ch, node.key + (k,), node.depth + 1, y, g)
                     for k, (ch, g) in enumerate(zip(part.children, groups))]
    return node.children


def _split_rsrf(node: Node, dataset: Dataset, config: GrowConfig, stream: RandomStream,
                tree_id: int) -> list[Node]:
    rng = stream.node(tree_id, node.key, DRAWS)
    ties = stream.node(tree_id, node.key, TIES)
    cands = generate(config.splitter, node.cell, dataset, rng, config.min_samples, node.indices)
    node.info["first_splits"] = list(cands.draws)
    if len(cands) == 0:
        return []
    i = best_index(cands.scores, ties)
    prov = cands.provenance[i]
    node.info.update(score=float(cands.scores[i]), best_score=float(cands.scores.max()),
                     n_candidates=len(cands), split=prov, mode="sample")
    return _attach_two_level(node, dataset, prov["first"], prov["left"], prov["right"])


def _attach_two_level(node: Node, dataset: Dataset, first, left, right) -> list[Node]:
    X, y = dataset.features, dataset.responses
    idx = node.indices
    j, c = first
    cut = AxisSplit(j, c, True)
    m = cut.contains(X[idx])
    mids = []
    for k, (pred, sub, inner) in enumerate(((cut, idx[m], left), (cut.complement(), idx[~m], right))):
        mid = _make_node(node.cell.child(pred), node.key + (k,), node.depth + 1, y, sub)
        if inner is not None:
            jj, cc = inner
            a = AxisSplit(jj, cc, True)
            lm = a.contains(X[sub])
            mid.children = [
                _make_node(mid.cell.child(a), mid.key + (0,), mid.depth + 1, y, sub[lm]),
                _make_node(mid.cell.child(a.complement()), mid.key + (1,), mid.depth + 1, y, sub[~lm]),
            ]
            mid.info["split"] = {"j": jj, "c": cc}
        mids.append(mid)
    node.children = mids
    return [g for mid in mids for g in (mid.children or [])]


def _split_population(node: Node, dataset: Dataset, config: GrowConfig, stream: RandomStream,
                      tree_id: int) -> list[Node]:
    """Two-level split chosen by population gain over the grid sup."""
    semi = config.semi_sample
    if not semi.model.closed_form:
        raise OracleUnavailable("population scoring needs closed-form rectangle moments")
    rng = stream.node(tree_id, node.key, DRAWS)
    ties = stream.node(tree_id, node.key, TIES)
    d = node.cell.d
    W = config.splitter.W
    # same draws, in the same order, as the sample-based two-level generator
    js = rng.integers(d, size=W)
    us = rng.random(W)
    lo, hi = node.cell.bbox
    firsts = [(int(j), float(lo[j] + u * (hi[j] - lo[j]))) for j, u in zip(js, us)]
    node.info["first_splits"] = firsts
    oracle = BoxOracle(semi.model)
    sups = [two_step_sup(oracle, lo, hi, f, semi.grid_res) for f in firsts]
    values = np.array([s.value for s in sups])
    if np.all(values == EMPTY):
        return []
    i = best_index(values, ties)
    best = sups[i]
    node.info.update(score=float(values[i]), best_score=float(values.max()), mode="population",
                     split={"w": i, "first": best.first, "left": (best.left.j, best.left.c),
                            "right": (best.right.j, best.right.c)})
    return _attach_two_level(node, dataset, best.first, (best.left.j, best.left.c),
                             (best.right.j, best.right.c))


def _cell_mass(cell: Cell) -> float:
    box = cell.bbox
    if box is None:
        raise OracleUnavailable("cell mass needs a rectangular cell")
    lo, hi = box
    return float(np.prod(hi - lo))


def grow_tree(dataset: Dataset, config: GrowConfig, stream: RandomStream, tree_id: int = 0) -> Tree:
    if isinstance(config.splitter, Rsrf):
        return _grow_two_level(dataset, config, stream, tree_id)
    root = _make_node(Cell(dataset.d), (), 0, dataset.responses, np.arange(dataset.n))
    frontier = [root]
    for _ in range(config.depth):
        nxt = []
        for node in frontier:
            nxt.extend(_split_node(node, dataset, config, stream, tree_id))
        frontier = nxt
        if not frontier:
            break
    return Tree(root, config, tree_id, stream.seed)


def _grow_two_level(dataset: Dataset, config: GrowConfig, stream: RandomStream, tree_id: int) -> Tree:
    root = _make_node(Cell(dataset.d), (), 0, dataset.responses, np.arange(dataset.n))
    frontier = [root]
    semi = config.semi_sample
    for _ in range(config.depth // 2):
        nxt = []
        for node in frontier:
            if semi is not None and _cell_mass(node.cell) <= semi.zeta:
                nxt.extend(_split_population(node, dataset, config, stream, tree_id))
            else:
                nxt.extend(_split_rsrf(node, dataset, config, stream, tree_id))
        frontier = nxt
        if not frontier:
            break
    return Tree(root, config, tree_id, stream.seed)


def grow_rsrf(dataset: Dataset, config: GrowConfig, stream: RandomStream, tree_id: int = 0) -> Tree:
    if not isinstance(config.splitter, Rsrf):
        raise ValueError("grow_rsrf needs an Rsrf splitter config")
    if config.semi_sample is not None:
        config = GrowConfig(config.depth, config.splitter, config.min_samples, None)
    return _grow_two_level(dataset, config, stream, tree_id)


def grow_semisample(dataset: Dataset, config: GrowConfig, stream: RandomStream,
                    tree_id: int = 0) -> Tree:
    if config.semi_sample is None:
        raise OracleUnavailable("semi-sample growth needs a population model")
    return _grow_two_level(dataset, config, stream, tree_id)


def fit_forest(dataset: Dataset, config: GrowConfig, n_trees: int, seed: int) -> Forest:
    """Trees on the full sample that differ only in their randomisation."""
    if n_trees < 1:
        raise ValueError("n_trees must be at least 1")
    stream = RandomStream(seed)
    return Forest([grow_tree(dataset, config, stream, t).strip() for t in range(n_trees)])


def mse_eval(predictor, test_features, test_targets) -> float:
    y = np.asarray(test_targets, dtype=float)
    if len(y) == 0:
        raise ValueError("empty test set")
    pred = predictor.predict(test_features) if hasattr(predictor, "predict") else predictor(test_features)
    return float(np.mean((np.asarray(pred) - y) ** 2))
