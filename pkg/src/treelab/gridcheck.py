"""Regular grids on [0,1]^d, the midpoint snapping of cells onto them, and
brute-force counts of how cells and splits interact with the grid.

Everything here enumerates boxes explicitly, so it is meant for tiny d and g.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .core import AxisSplit, Cell, ObliqueSplit

MAX_BOXES = 2_000_000


class NoCoveringMember(ValueError):
    """No catalogue member contains every flagged box."""


@dataclass(frozen=True)
class Grid:
    g: int
    d: int

    def __post_init__(self):
        if self.g < 1 or self.d < 1:
            raise ValueError("grid needs g >= 1 and d >= 1")

    @property
    def n_boxes(self) -> int:
        return self.g ** self.d

    def check_cap(self, cap: int = MAX_BOXES):
        if self.n_boxes > cap:
            raise OverflowError(f"{self.n_boxes} boxes exceed the enumeration cap {cap}")

    def box_of(self, X) -> np.ndarray:
        """Box multi-index per point; intervals are right-open except the last."""
        X = np.asarray(X, dtype=float)
        return np.minimum(np.floor(X * self.g).astype(np.int64), self.g - 1)

    def all_boxes(self) -> np.ndarray:
        self.check_cap()
        axes = [np.arange(self.g)] * self.d
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.d)

    def midpoints(self, boxes=None) -> np.ndarray:
        boxes = self.all_boxes() if boxes is None else np.asarray(boxes)
        return (boxes + 0.5) / self.g

    def lattice(self) -> np.ndarray:
        """The (g+1)^d grid points q/g."""
        axes = [np.arange(self.g + 1) / self.g] * self.d
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.d)

    def stripe(self, j: int, q: int) -> set:
        """All boxes whose j-th index equals q."""
        return {b for b in map(tuple, self.all_boxes()) if b[j] == q}


def make_grid(n: int, epsilon: float, d: int, cap: int = MAX_BOXES) -> Grid:
    if n < 1 or not epsilon > 0:
        raise ValueError("need n >= 1 and epsilon > 0")
    # the guard keeps exact integer powers from rounding up
    g = math.ceil(n ** (1.0 + epsilon) - 1e-9)
    grid = Grid(max(g, 1), d)
    grid.check_cap(cap)
    return grid


def sharp_operator(cell: Cell, grid: Grid) -> frozenset:
    boxes = grid.all_boxes()
    inside = cell.contains(grid.midpoints(boxes))
    return frozenset(map(tuple, boxes[inside]))


def _subsample_offsets(d: int, resolution: int) -> np.ndarray:
    axes = [(np.arange(resolution) + 0.5) / resolution] * d
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)


def rho(t: Cell, t_sub: Cell, grid: Grid, resolution: int = 64) -> frozenset:
    """Boxes holding a sub-sample point of (t' sym-diff t'#) minus (t sym-diff t#).

    Inside one box the midpoint decides membership in the snapped cell, so a
    point is in t sym-diff t# exactly when its membership differs from the
    box midpoint's.
    """
    boxes = grid.all_boxes()
    offs = _subsample_offsets(grid.d, resolution)
    mids = grid.midpoints(boxes)
    in_t_mid = t.contains(mids)
    in_s_mid = t_sub.contains(mids)
    out = []
    for b, mt, ms in zip(boxes, in_t_mid, in_s_mid):
        pts = (b + offs) / grid.g
        off_t = t.contains(pts) != mt
        off_s = t_sub.contains(pts) != ms
        if np.any(off_s & ~off_t):
            out.append(tuple(int(v) for v in b))
    return frozenset(out)


@dataclass(frozen=True)
class SeparationCount:
    count: int
    bound: int

    @property
    def holds(self) -> bool:
        return self.count <= self.bound


def _cart_count_one(grid: Grid, lo, hi, lo_open=None) -> int:
    mids = grid.midpoints()
    cell = np.all((mids >= lo) & (mids <= hi), axis=1)
    if lo_open is not None:
        cell &= np.all(np.where(lo_open, mids > lo, True), axis=1)
    inside = mids[cell]
    seen = set()
    for j in range(grid.d):
        vals = np.unique(inside[:, j]) if len(inside) else np.empty(0)
        # a cut below every value, then one at each value
        for c in np.concatenate(([-np.inf], vals)):
            seen.add((inside[:, j] <= c).tobytes())
    return len(seen)


def count_cart_separations(grid: Grid, cells=None) -> SeparationCount:
    """Largest number of distinct splits of a cell's midpoints by one axis cut.

    A split is identified by the set of midpoints sent to the left child;
    ``cells`` is a list of (lo, hi) boxes, default the unit cube.
    """
    grid.check_cap()
    if cells is None:
        cells = [(np.zeros(grid.d), np.ones(grid.d))]
    worst = 0
    for lo, hi in cells:
        worst = max(worst, _cart_count_one(grid, np.asarray(lo, float), np.asarray(hi, float)))
    return SeparationCount(worst, grid.d * (grid.g + 1))


def halfplane_subsets(points: np.ndarray) -> set:
    """Every subset of a planar point set cut off by a closed half-plane."""
    P = np.asarray(points, dtype=float)
    n = len(P)
    subsets = {frozenset(), frozenset(range(n))}
    if n < 2:
        return subsets
    angles = set()
    for a, b in itertools.combinations(range(n), 2):
        dx, dy = P[b] - P[a]
        # directions where two projections coincide
        base = math.atan2(dy, dx) + math.pi / 2
        for k in range(2):
            angles.add(round((base + k * math.pi) % (2 * math.pi), 12))
    crit = np.sort(np.array(sorted(angles)))
    gaps = np.diff(np.concatenate((crit, [crit[0] + 2 * math.pi])))
    probes = crit + gaps / 2
    for th in probes:
        proj = P @ np.array([math.cos(th), math.sin(th)])
        order = np.argsort(proj)
        for k in range(1, n):
            subsets.add(frozenset(order[:k].tolist()))
    return subsets


def count_oblique_separations(grid: Grid, points: str = "lattice") -> SeparationCount:
    """Distinct half-plane subsets of the (g+1)^2 grid points (or the g^2 midpoints)."""
    if grid.d != 2:
        raise ValueError("oblique separation count is for d = 2")
    if grid.g > 8:
        raise OverflowError("oblique enumeration is capped at g <= 8")
    P = grid.lattice() if points == "lattice" else grid.midpoints()
    m = (grid.g + 1) ** 2
    return SeparationCount(len(halfplane_subsets(P)), 2 * math.comb(m, 2) + 2)


@dataclass(frozen=True)
class CoverResult:
    H_size: int
    covered: bool
    bound: int
    member: tuple
    flagged: int

    @property
    def within_bound(self) -> bool:
        return self.H_size <= self.bound


_CONSTANTS = {"axis": 1, "interaction": 2, "oblique": 9}


def _band(grid: Grid, pred: ObliqueSplit) -> set:
    """Boxes meeting the slab within sqrt(2)|b|/g of the hyperplane (d = 2 coordinates)."""
    boxes = grid.all_boxes()
    b = np.zeros(grid.d)
    b[pred.j1] += pred.b1
    b[pred.j2] += pred.b2
    half = math.sqrt(2.0) * float(np.linalg.norm(b)) / grid.g
    lo = boxes / grid.g
    hi = (boxes + 1) / grid.g
    pmin = np.where(b >= 0, lo, hi) @ b
    pmax = np.where(b >= 0, hi, lo) @ b
    hit = (pmax >= pred.s - half) & (pmin <= pred.s + half)
    return set(map(tuple, boxes[hit].tolist()))


def boundary_cover_check(t: Cell, t_sub: Cell, grid: Grid, family: str,
                         resolution: int = 16) -> CoverResult:
    """Find a catalogue member containing every box of rho(t, t_sub).

    Catalogues: one stripe ("axis"), a union of two stripes ("interaction",
    also used for the two cuts of one two-level step), or the band of boxes
    near the new hyperplane ("oblique").
    """
    if family not in _CONSTANTS:
        raise ValueError(f"family must be one of {sorted(_CONSTANTS)}")
    flagged = rho(t, t_sub, grid, resolution)
    bound = _CONSTANTS[family] * grid.g ** (grid.d - 1)
    stripe_size = grid.g ** (grid.d - 1)
    if family == "oblique":
        new = [p for p in t_sub.path[len(t.path):] if isinstance(p, ObliqueSplit)]
        if not new:
            raise NoCoveringMember("no new hyperplane between the two cells")
        H = _band(grid, new[-1])
        if not flagged <= H:
            raise NoCoveringMember(f"{len(flagged - H)} flagged boxes lie outside the band")
        return CoverResult(len(H), True, bound, ("band",), len(flagged))
    options = [(j, q) for j in range(grid.d) for q in range(grid.g)]
    if family == "axis":
        for j, q in options:
            if all(b[j] == q for b in flagged):
                return CoverResult(stripe_size, True, bound, ((j, q),), len(flagged))
        raise NoCoveringMember("flagged boxes do not fit in one stripe")
    best = None
    for (j1, q1), (j2, q2) in itertools.combinations_with_replacement(options, 2):
        if all(b[j1] == q1 or b[j2] == q2 for b in flagged):
            size = 2 * stripe_size - (0 if j1 == j2 and q1 != q2 else
                                      stripe_size if (j1, q1) == (j2, q2) else
                                      grid.g ** (grid.d - 2))
            if best is None or size < best[0]:
                best = (size, ((j1, q1), (j2, q2)))
    if best is None:
        raise NoCoveringMember("flagged boxes do not fit in two stripes")
    return CoverResult(best[0], True, bound, best[1], len(flagged))


def axis_cells_between(t: Cell, t_sub: Cell) -> list:
    """New axis predicates introduced between two nested cells."""
    return [p for p in t_sub.path[len(t.path):] if isinstance(p, AxisSplit)]
