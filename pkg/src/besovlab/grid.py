"""Uniform box/torus grids standing in for R^n, with discrete L^p norms."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, DomainError

BOUNDARIES = ("periodic", "dirichlet")


@dataclass(frozen=True)
class Grid:
    """Uniform tensor grid in dimension 1, 2 or 3.

    Node coordinates are centred on the origin, ``x_i = (i - (N - 1) / 2) h``
    per axis. Nodes are addressed either by a flat index (C order) or by a
    tuple of axis indices.
    """

    dim: int
    sizes: tuple[int, ...]
    spacing: tuple[float, ...]
    boundary: str = "periodic"

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ConfigurationError(f"grid dimension must be 1, 2 or 3, got {self.dim}")
        if len(self.sizes) != self.dim or len(self.spacing) != self.dim:
            raise ConfigurationError("sizes and spacing need one entry per axis")
        if any(int(n) != n or n < 2 for n in self.sizes):
            raise ConfigurationError(f"every axis needs at least 2 nodes, got {self.sizes}")
        if any(not (math.isfinite(h) and h > 0) for h in self.spacing):
            raise ConfigurationError(f"spacing must be positive, got {self.spacing}")
        if self.boundary not in BOUNDARIES:
            raise ConfigurationError(f"boundary must be one of {BOUNDARIES}, got {self.boundary!r}")

    @property
    def shape(self) -> tuple[int, ...]:
        return self.sizes

    @property
    def n_nodes(self) -> int:
        return math.prod(self.sizes)

    @property
    def weight(self) -> float:
        """Quadrature weight of every node (cell volume)."""
        return math.prod(self.spacing)

    @property
    def lengths(self) -> tuple[float, ...]:
        return tuple(n * h for n, h in zip(self.sizes, self.spacing))

    @property
    def periodic(self) -> bool:
        return self.boundary == "periodic"

    def axis_coords(self, axis: int) -> np.ndarray:
        n, h = self.sizes[axis], self.spacing[axis]
        return (np.arange(n) - (n - 1) / 2.0) * h

    @property
    def coords(self) -> np.ndarray:
        """Array of shape ``(n_nodes, dim)``."""
        mesh = np.meshgrid(*(self.axis_coords(a) for a in range(self.dim)), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def flat_index(self, node) -> int:
        if isinstance(node, (int, np.integer)):
            idx = int(node)
            if not 0 <= idx < self.n_nodes:
                raise IndexError(f"node {idx} out of range for {self.n_nodes} nodes")
            return idx
        node = tuple(int(i) for i in node)
        if len(node) != self.dim or any(not 0 <= i < n for i, n in zip(node, self.sizes)):
            raise IndexError(f"node {node} out of range for grid of shape {self.sizes}")
        return int(np.ravel_multi_index(node, self.sizes))

    def multi_index(self, node) -> tuple[int, ...]:
        return tuple(int(i) for i in np.unravel_index(self.flat_index(node), self.sizes))

    def _axis_offsets(self, i: np.ndarray, j: np.ndarray, axis: int) -> np.ndarray:
        d = np.abs(i - j).astype(float)
        if self.periodic:
            d = np.minimum(d, self.sizes[axis] - d)
        return d * self.spacing[axis]

    def distance(self, x, y) -> float:
        """Euclidean distance, with per-axis wraparound on periodic grids."""
        xi, yi = self.multi_index(x), self.multi_index(y)
        sq = sum(
            float(self._axis_offsets(np.array(a), np.array(b), ax)) ** 2
            for ax, (a, b) in enumerate(zip(xi, yi))
        )
        return math.sqrt(sq)

    def distances_from(self, x) -> np.ndarray:
        """Distances from node ``x`` to every node, in flat order."""
        xi = self.multi_index(x)
        sq = np.zeros(self.sizes)
        for ax in range(self.dim):
            idx = np.arange(self.sizes[ax])
            d = self._axis_offsets(idx, xi[ax], ax)
            shape = [1] * self.dim
            shape[ax] = -1
            sq = sq + d.reshape(shape) ** 2
        return np.sqrt(sq).ravel()

    def pairwise_distances(self) -> np.ndarray:
        """Dense ``(n_nodes, n_nodes)`` distance matrix."""
        idx = np.indices(self.sizes).reshape(self.dim, -1)
        sq = np.zeros((self.n_nodes, self.n_nodes))
        for ax in range(self.dim):
            d = self._axis_offsets(idx[ax][:, None], idx[ax][None, :], ax)
            sq += d**2
        return np.sqrt(sq)

    @property
    def diameter(self) -> float:
        if self.periodic:
            return math.sqrt(sum((n // 2 * h) ** 2 for n, h in zip(self.sizes, self.spacing)))
        return math.sqrt(sum(((n - 1) * h) ** 2 for n, h in zip(self.sizes, self.spacing)))

    def describe(self) -> dict:
        return {
            "dim": self.dim,
            "sizes": list(self.sizes),
            "spacing": list(self.spacing),
            "boundary": self.boundary,
        }


def _per_axis(value, dim, name):
    if isinstance(value, (list, tuple, np.ndarray)):
        if len(value) != dim:
            raise ConfigurationError(f"{name} needs {dim} entries, got {len(value)}")
        return tuple(value)
    return (value,) * dim


def build_grid(dim: int, sizes, spacing, boundary: str = "periodic") -> Grid:
    """Build a :class:`Grid`; scalar ``sizes``/``spacing`` are broadcast over axes."""
    try:
        dim = int(dim)
    except (TypeError, ValueError):
        raise ConfigurationError(f"grid dimension must be an integer, got {dim!r}") from None
    if dim not in (1, 2, 3):
        raise ConfigurationError(f"grid dimension must be 1, 2 or 3, got {dim}")
    sizes = _per_axis(sizes, dim, "sizes")
    spacing = _per_axis(spacing, dim, "spacing")
    try:
        if any(float(n) != int(n) for n in sizes):
            raise ConfigurationError(f"sizes must be integers, got {sizes}")
        sizes = tuple(int(n) for n in sizes)
        spacing = tuple(float(h) for h in spacing)
    except (TypeError, ValueError):
        raise ConfigurationError(f"invalid sizes/spacing {sizes!r}, {spacing!r}") from None
    return Grid(dim, sizes, spacing, str(boundary))


def grid_from_config(desc: dict) -> Grid:
    return build_grid(desc.get("dim", 1), desc.get("sizes"), desc.get("spacing"),
                      desc.get("boundary", "periodic"))


@dataclass(frozen=True)
class GridFunction:
    """Real or complex scalar values attached to the nodes of a grid."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.ndim != 1:
            values = values.reshape(-1)
        if values.shape[0] != self.grid.n_nodes:
            raise ValueError(
                f"expected {self.grid.n_nodes} values, got {values.shape[0]}"
            )
        if not np.all(np.isfinite(values)):
            raise DomainError("grid function has non-finite entries")
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def __mul__(self, alpha):
        return GridFunction(self.grid, alpha * self.values)

    __rmul__ = __mul__

    def __add__(self, other: GridFunction):
        return GridFunction(self.grid, self.values + other.values)


def weighted_lp(values: np.ndarray, p: float, weight: float, axis: int = -1) -> np.ndarray:
    """Discrete L^p norm ``(sum weight |v|^p)^(1/p)`` along ``axis``; max for p = inf."""
    if not p >= 1:
        raise DomainError(f"L^p exponent must be >= 1, got {p}")
    a = np.abs(values)
    if math.isinf(p):
        return a.max(axis=axis)
    if p == 1:
        return weight * a.sum(axis=axis)
    # scale by the max to keep |v|^p clear of overflow and underflow
    m = a.max(axis=axis, keepdims=True)
    safe = np.where(m > 0, m, 1.0)
    if p == 2:
        r = a / safe
        return np.squeeze(safe, axis=axis) * np.sqrt(weight * np.sum(r * r, axis=axis))
    out = np.sum((a / safe) ** p, axis=axis) * weight
    return np.squeeze(safe, axis=axis) * out ** (1.0 / p)


def lp_norm(f: GridFunction, p: float) -> float:
    """Discrete L^p norm of a grid function."""
    return float(weighted_lp(f.values, p, f.grid.weight))


def holder_exponent(p0: float, p1: float, theta: float) -> float:
    """Exponent ``p`` with ``1/p = (1 - theta)/p0 + theta/p1``."""
    inv = (1.0 - theta) / p0 + theta / p1
    return math.inf if inv == 0 else 1.0 / inv


def random_trig_functions(grid: Grid, rng: np.random.Generator, count: int,
                          max_mode: int = 8, decay: float = 1.0) -> np.ndarray:
    """Smooth random test functions, shape ``(n_nodes, count)``.

    Each is a product over axes of trigonometric sums of modes ``1..max_mode``
    (periodic: ``cos``/``sin`` of ``2πkx/L``; Dirichlet: ``sin`` of ``πk(x + L/2)/L``)
    with amplitudes ``~ k^{-decay}``. The random draws do not depend on the
    node count, so refined grids sample the same functions.
    """
    k = np.arange(1, max_mode + 1)
    out = np.ones((grid.n_nodes, count))
    coords = grid.coords
    for axis in range(grid.dim):
        amp = rng.standard_normal((count, max_mode)) * k ** (-decay)
        phase = rng.uniform(0, 2 * np.pi, (count, max_mode))
        L = grid.lengths[axis]
        x = coords[:, axis][:, None, None]
        if grid.periodic:
            arg = 2 * np.pi * k * x / L + phase[None]
            vals = np.cos(arg)
        else:
            vals = np.sin(np.pi * k * (x + L / 2) / L) * np.cos(phase[None])
        out *= np.sum(amp[None] * vals, axis=-1)
    return out


def as_values(f) -> np.ndarray:
    return f.values if isinstance(f, GridFunction) else np.asarray(f)


__all__: Sequence[str] = [
    "Grid",
    "GridFunction",
    "build_grid",
    "grid_from_config",
    "lp_norm",
    "weighted_lp",
    "holder_exponent",
]
