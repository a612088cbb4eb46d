"""Domains: axis-aligned boxes (d = 1, 2) and the unit-disc style ball."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def as_points(X, dim: int | None = None) -> np.ndarray:
    """Coerce scalars, 1D sequences or (n, d) arrays to an (n, d) float array."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 0:
        X = X.reshape(1, 1)
    elif X.ndim == 1:
        X = X[:, None] if (dim is None or dim == 1) else X[None, :]
    if dim is not None and X.shape[1] != dim:
        raise ValueError(f"expected points of dimension {dim}, got {X.shape[1]}")
    return X


@dataclass(frozen=True)
class Box:
    lower: tuple[float, ...] = (0.0,)
    upper: tuple[float, ...] = (1.0,)

    def __post_init__(self):
        if len(self.lower) != len(self.upper):
            raise ValueError("lower and upper bounds differ in dimension")
        if any(lo >= hi for lo, hi in zip(self.lower, self.upper)):
            raise ValueError("empty box")

    @classmethod
    def unit(cls, dim: int = 1) -> "Box":
        return cls((0.0,) * dim, (1.0,) * dim)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def volume(self) -> float:
        return float(np.prod(np.subtract(self.upper, self.lower)))

    def contains(self, X, strict: bool = True, tol: float = 0.0) -> np.ndarray:
        X = as_points(X, self.dim)
        lo, hi = np.asarray(self.lower), np.asarray(self.upper)
        if strict:
            return np.all((X > lo + tol) & (X < hi - tol), axis=1)
        return np.all((X >= lo - tol) & (X <= hi + tol), axis=1)

    def on_boundary(self, X, tol: float = 1e-12) -> np.ndarray:
        X = as_points(X, self.dim)
        inside = self.contains(X, strict=False, tol=tol)
        lo, hi = np.asarray(self.lower), np.asarray(self.upper)
        touching = np.any((np.abs(X - lo) <= tol) | (np.abs(X - hi) <= tol), axis=1)
        return inside & touching

    def grid(self, n: int | tuple[int, ...], interior: bool = False) -> np.ndarray:
        """Tensor grid with ``n`` points per axis (boundary-inclusive unless ``interior``)."""
        ns = (n,) * self.dim if np.isscalar(n) else tuple(n)
        axes = []
        for lo, hi, k in zip(self.lower, self.upper, ns):
            if interior:
                axes.append(np.linspace(lo, hi, k + 2)[1:-1])
            else:
                axes.append(np.linspace(lo, hi, k))
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.column_stack([m.ravel() for m in mesh])

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        lo, hi = np.asarray(self.lower), np.asarray(self.upper)
        return lo + (hi - lo) * rng.random((n, self.dim))

    def coordinate_range(self, point: np.ndarray, axis: int) -> tuple[float, float]:
        return self.lower[axis], self.upper[axis]


@dataclass(frozen=True)
class Disc:
    center: tuple[float, float] = (0.0, 0.0)
    radius: float = 1.0

    @property
    def dim(self) -> int:
        return 2

    @property
    def volume(self) -> float:
        return float(np.pi * self.radius ** 2)

    @property
    def lower(self) -> tuple[float, float]:
        return (self.center[0] - self.radius, self.center[1] - self.radius)

    @property
    def upper(self) -> tuple[float, float]:
        return (self.center[0] + self.radius, self.center[1] + self.radius)

    def _r(self, X) -> np.ndarray:
        X = as_points(X, 2)
        return np.hypot(X[:, 0] - self.center[0], X[:, 1] - self.center[1])

    def contains(self, X, strict: bool = True, tol: float = 0.0) -> np.ndarray:
        r = self._r(X)
        return r < self.radius - tol if strict else r <= self.radius + tol

    def on_boundary(self, X, tol: float = 1e-12) -> np.ndarray:
        return np.abs(self._r(X) - self.radius) <= tol

    def grid(self, n: int, interior: bool = False) -> np.ndarray:
        """Square grid of ``n`` x ``n`` points over the bounding box, clipped to the disc."""
        box = Box(self.lower, self.upper)
        pts = box.grid(n, interior=interior)
        return pts[self.contains(pts, strict=interior)]

    def boundary_points(self, m: int) -> np.ndarray:
        t = 2 * np.pi * np.arange(m) / m
        return np.column_stack([self.center[0] + self.radius * np.cos(t),
                                self.center[1] + self.radius * np.sin(t)])

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        r = self.radius * np.sqrt(rng.random(n))
        t = 2 * np.pi * rng.random(n)
        return np.column_stack([self.center[0] + r * np.cos(t), self.center[1] + r * np.sin(t)])

    def coordinate_range(self, point: np.ndarray, axis: int) -> tuple[float, float]:
        other = 1 - axis
        offset = point[other] - self.center[other]
        half = np.sqrt(max(self.radius ** 2 - offset ** 2, 0.0))
        return self.center[axis] - half, self.center[axis] + half


def pairwise_distances(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    diff = X[:, None, :] - Y[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))
