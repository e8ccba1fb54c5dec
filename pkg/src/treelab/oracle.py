"""Population models on the uniform design: regression functions, noise,
closed-form rectangle moments where they exist, and Monte Carlo moments
for everything else."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import Cell, Dataset, OracleUnavailable, ZeroMassCell, as_generator


class Regression:
    name = "regression"
    d_min = 1
    bound = math.inf
    closed_form = False

    def __call__(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def rect_mean(self, lo, hi):
        raise OracleUnavailable(f"{self.name} has no closed-form rectangle moments")

    def rect_var(self, lo, hi):
        raise OracleUnavailable(f"{self.name} has no closed-form rectangle moments")

    def to_dict(self) -> dict:
        return {"name": self.name}


def _H(x, y):
    u, v = x - 0.5, y - 0.5
    return u * u + u * v + v * v


class ExampleInteraction(Regression):
    """m(x) = (x1 - 1/2)(x2 - 1/2) + x3, a pure interaction plus a linear term."""

    name = "example"
    d_min = 3
    bound = 1.25
    closed_form = True

    def __call__(self, X):
        X = np.asarray(X, dtype=float)
        return (X[:, 0] - 0.5) * (X[:, 1] - 0.5) + X[:, 2]

    def rect_mean(self, lo, hi):
        lo, hi = np.asarray(lo, float), np.asarray(hi, float)
        a = lo[..., 0] + hi[..., 0] - 1.0
        b = lo[..., 1] + hi[..., 1] - 1.0
        return 0.25 * a * b + 0.5 * (lo[..., 2] + hi[..., 2])

    def rect_var(self, lo, hi):
        lo, hi = np.asarray(lo, float), np.asarray(hi, float)
        a1, a2 = lo[..., 0], hi[..., 0]
        b1, b2 = lo[..., 1], hi[..., 1]
        c1, c2 = lo[..., 2], hi[..., 2]
        return (_H(a1, a2) * _H(b1, b2) / 9.0
                - (a1 + a2 - 1.0) ** 2 * (b1 + b2 - 1.0) ** 2 / 16.0
                + (c2 - c1) ** 2 / 12.0)


# (f, antiderivative of f, antiderivative of f^2, sup |f|)
_TWO_PI = 2.0 * math.pi
_COMPONENTS = {
    "zero": (lambda x: 0.0 * x, lambda x: 0.0 * x, lambda x: 0.0 * x, 0.0),
    "linear": (lambda x: x, lambda x: x ** 2 / 2, lambda x: x ** 3 / 3, 1.0),
    "quadratic": (lambda x: (x - 0.5) ** 2, lambda x: (x - 0.5) ** 3 / 3,
                  lambda x: (x - 0.5) ** 5 / 5, 0.25),
    "sin": (lambda x: np.sin(_TWO_PI * x), lambda x: -np.cos(_TWO_PI * x) / _TWO_PI,
            lambda x: x / 2 - np.sin(2 * _TWO_PI * x) / (4 * _TWO_PI), 1.0),
    "step": (lambda x: (x > 0.5).astype(float), lambda x: np.maximum(x - 0.5, 0.0),
             lambda x: np.maximum(x - 0.5, 0.0), 1.0),
}


class Additive(Regression):
    """Sum of one-dimensional components, one per coordinate."""

    name = "additive"
    closed_form = True

    def __init__(self, components):
        components = tuple(components)
        for c in components:
            if c not in _COMPONENTS:
                raise ValueError(f"unknown additive component {c!r}; choose from {sorted(_COMPONENTS)}")
        if not components:
            raise ValueError("additive model needs at least one component")
        self.components = components
        self.d_min = len(components)
        self.bound = sum(_COMPONENTS[c][3] for c in components)

    def __call__(self, X):
        X = np.asarray(X, dtype=float)
        out = np.zeros(X.shape[0])
        for j, c in enumerate(self.components):
            out += _COMPONENTS[c][0](X[:, j])
        return out

    def _moments(self, lo, hi):
        lo, hi = np.asarray(lo, float), np.asarray(hi, float)
        mean = np.zeros(lo.shape[:-1])
        var = np.zeros(lo.shape[:-1])
        for j, c in enumerate(self.components):
            f, F1, F2, _ = _COMPONENTS[c]
            a, b = lo[..., j], hi[..., j]
            w = b - a
            safe = np.where(w > 0, w, 1.0)
            m1 = np.where(w > 0, (F1(b) - F1(a)) / safe, f(a))
            m2 = np.where(w > 0, (F2(b) - F2(a)) / safe, f(a) ** 2)
            mean = mean + m1
            var = var + np.maximum(m2 - m1 * m1, 0.0)
        return mean, var

    def rect_mean(self, lo, hi):
        return self._moments(lo, hi)[0]

    def rect_var(self, lo, hi):
        return self._moments(lo, hi)[1]

    def to_dict(self):
        return {"name": self.name, "components": list(self.components)}


class Constant(Regression):
    name = "constant"
    closed_form = True

    def __init__(self, value: float = 0.0):
        self.value = float(value)
        self.bound = abs(self.value)

    def __call__(self, X):
        return np.full(np.asarray(X).shape[0], self.value)

    def rect_mean(self, lo, hi):
        return np.full(np.asarray(lo).shape[:-1], self.value)

    def rect_var(self, lo, hi):
        return np.zeros(np.asarray(lo).shape[:-1])

    def to_dict(self):
        return {"name": self.name, "value": self.value}


class Custom(Regression):
    """Arbitrary vectorised callable; moments by Monte Carlo only."""

    name = "custom"

    def __init__(self, fn: Callable[[np.ndarray], np.ndarray], bound: float, d_min: int = 1,
                 label: str = "custom"):
        self.fn = fn
        self.bound = float(bound)
        self.d_min = d_min
        self.label = label

    def __call__(self, X):
        return np.asarray(self.fn(np.asarray(X, dtype=float)), dtype=float)

    def to_dict(self):
        return {"name": self.name, "label": self.label}


@dataclass(frozen=True)
class NoiseSpec:
    """Centred noise with standard deviation ``scale``."""

    kind: str = "gaussian"
    scale: float = 0.0

    def __post_init__(self):
        if self.kind not in ("gaussian", "uniform"):
            raise ValueError(f"noise kind must be gaussian or uniform, got {self.kind!r}")
        if not self.scale >= 0:
            raise ValueError("noise scale must be non-negative")

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "gaussian":
            return self.scale * rng.standard_normal(n)
        half = math.sqrt(3.0) * self.scale
        return rng.uniform(-half, half, n)


@dataclass(frozen=True)
class PopulationModel:
    regression: Regression
    d: int
    noise: NoiseSpec = NoiseSpec()

    def __post_init__(self):
        if self.d < self.regression.d_min:
            raise ValueError(f"{self.regression.name} needs d >= {self.regression.d_min}")

    @property
    def M0(self) -> float:
        return self.regression.bound

    @property
    def closed_form(self) -> bool:
        return self.regression.closed_form

    def m(self, X) -> np.ndarray:
        return self.regression(X)

    def rect_mean(self, lo, hi):
        return self.regression.rect_mean(lo, hi)

    def rect_var(self, lo, hi):
        return self.regression.rect_var(lo, hi)

    def to_dict(self) -> dict:
        return {"regression": self.regression.to_dict(), "d": self.d,
                "noise": {"kind": self.noise.kind, "scale": self.noise.scale}}


def sample_dataset(model: PopulationModel, n: int, stream) -> Dataset:
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = as_generator(stream)
    X = rng.random((n, model.d))
    y = model.m(X) + model.noise.sample(rng, n)
    return Dataset(X, y)


@dataclass(frozen=True)
class MCMoments:
    mean: float
    variance: float
    mass: float
    mean_se: float
    variance_se: float
    mass_se: float
    n_accepted: int


def sample_in_cell(cell: Cell, n_samples: int, rng: np.random.Generator) -> tuple[np.ndarray, float, int]:
    """Uniform proposals in the cell's outer box, kept when inside the cell.

    Returns the accepted points, the box volume and the proposal count.
    """
    lo, hi = cell.outer_box
    U = lo + (hi - lo) * rng.random((n_samples, cell.d))
    keep = cell.contains(U)
    return U[keep], float(np.prod(hi - lo)), n_samples


def conditional_moments_mc(model: PopulationModel, cell: Cell, n_samples: int, stream) -> MCMoments:
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    rng = as_generator(stream)
    pts, box, total = sample_in_cell(cell, n_samples, rng)
    k = pts.shape[0]
    if k == 0 or box == 0.0:
        raise ZeroMassCell("no Monte Carlo sample landed in the cell")
    v = model.m(pts)
    mean = float(v.mean())
    dev2 = (v - mean) ** 2
    var = float(dev2.mean())
    p = k / total
    return MCMoments(
        mean=mean,
        variance=var,
        mass=box * p,
        mean_se=math.sqrt(var / k),
        variance_se=float(dev2.std()) / math.sqrt(k),
        mass_se=box * math.sqrt(p * (1 - p) / total),
        n_accepted=k,
    )


@dataclass(frozen=True)
class ExampleForms:
    """Exact moments and split gains of the example function on one box."""

    a1: float
    a2: float
    b1: float
    b2: float
    c1: float
    c2: float

    def __post_init__(self):
        for lo, hi in ((self.a1, self.a2), (self.b1, self.b2), (self.c1, self.c2)):
            if not 0.0 <= lo < hi <= 1.0:
                raise ValueError(f"degenerate or out-of-range interval [{lo}, {hi}]")

    @property
    def var(self) -> float:
        return float(ExampleInteraction().rect_var(
            np.array([self.a1, self.b1, self.c1]), np.array([self.a2, self.b2, self.c2])))

    @property
    def mean12(self) -> float:
        return 0.25 * (self.a1 + self.a2 - 1) * (self.b1 + self.b2 - 1)

    @property
    def mean3(self) -> float:
        return 0.5 * (self.c1 + self.c2)

    def s1(self, c):
        return (c - self.a1) * (self.a2 - c) / 16 * (self.b1 + self.b2 - 1) ** 2

    def s2(self, c):
        return (c - self.b1) * (self.b2 - c) / 16 * (self.a1 + self.a2 - 1) ** 2

    def s3(self, c):
        return (c - self.c1) * (self.c2 - c) / 4

    @property
    def s1max(self) -> float:
        return (self.a2 - self.a1) ** 2 / 64 * (self.b1 + self.b2 - 1) ** 2

    @property
    def s2max(self) -> float:
        return (self.b2 - self.b1) ** 2 / 64 * (self.a1 + self.a2 - 1) ** 2

    @property
    def s3max(self) -> float:
        return (self.c2 - self.c1) ** 2 / 16


def example_closed_forms(a1, a2=None, b1=None, b2=None, c1=None, c2=None) -> ExampleForms:
    """Accepts six numbers, a mapping with keys a1..c2, or a (lo, hi) pair of 3-vectors."""
    if a2 is None:
        rect = a1
        if isinstance(rect, dict):
            return ExampleForms(**{k: float(rect[k]) for k in ("a1", "a2", "b1", "b2", "c1", "c2")})
        if len(rect) == 2:
            lo, hi = rect
            return ExampleForms(float(lo[0]), float(hi[0]), float(lo[1]), float(hi[1]),
                                float(lo[2]), float(hi[2]))
        return ExampleForms(*(float(v) for v in rect))
    return ExampleForms(float(a1), float(a2), float(b1), float(b2), float(c1), float(c2))


def build_regression(name: str, **params) -> Regression:
    if name == "example":
        return ExampleInteraction()
    if name == "additive":
        return Additive(params.get("components", ("linear",)))
    if name == "constant":
        return Constant(params.get("value", 0.0))
    raise ValueError(f"unknown regression {name!r}; choose example, additive or constant")
