"""Uniform periodic lattices and real-valued states sampled on them."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GridError


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid:
    """Periodic lattice on [-L, L)^d with N points per axis (N a power of two)."""

    dimension: int
    half_length: float
    points_per_axis: int

    def __post_init__(self):
        if self.dimension not in (1, 2):
            raise GridError(f"dimension must be 1 or 2, got {self.dimension}")
        if not self.half_length > 0:
            raise GridError("half_length must be positive")
        if self.points_per_axis < 16:
            raise GridError("points_per_axis must be at least 16")
        if not _is_power_of_two(self.points_per_axis):
            raise GridError(f"points_per_axis must be a power of two, got {self.points_per_axis}")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_length / self.points_per_axis

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points_per_axis,) * self.dimension

    def axis_coords(self) -> np.ndarray:
        n = self.points_per_axis
        return -self.half_length + self.spacing * np.arange(n)

    def coords(self) -> np.ndarray:
        """Point coordinates; shape (N,) for d=1, (N, N, 2) for d=2."""
        x = self.axis_coords()
        if self.dimension == 1:
            return x
        gx, gy = np.meshgrid(x, x, indexing="ij")
        return np.stack([gx, gy], axis=-1)

    def radii(self) -> np.ndarray:
        """Distance from the origin at every grid point."""
        if self.dimension == 1:
            return np.abs(self.axis_coords())
        return np.linalg.norm(self.coords(), axis=-1)


@dataclass(frozen=True)
class Field:
    """State u sampled on a grid at a given time."""

    grid: Grid
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise GridError(f"values shape {values.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(values)):
            raise GridError("field values must be finite")
        object.__setattr__(self, "values", values)

    def with_values(self, values: np.ndarray, time: float | None = None) -> "Field":
        return Field(self.grid, values, self.time if time is None else time)

    def shifted(self, cells: int, axis: int = 0) -> "Field":
        """Whole-cell periodic translation."""
        return self.with_values(np.roll(self.values, cells, axis=axis))

    def in_strip(self, theta: float, tol: float = 0.0) -> bool:
        return bool(
            np.all(self.values >= -tol) and np.all(self.values <= theta + tol)
        )

    @property
    def min(self) -> float:
        return float(self.values.min())

    @property
    def max(self) -> float:
        return float(self.values.max())


def constant_field(grid: Grid, value: float, time: float = 0.0) -> Field:
    return Field(grid, np.full(grid.shape, float(value)), time)


def bump_field(grid: Grid, center, width: float, height: float, time: float = 0.0) -> Field:
    """Smooth compactly supported bump: height * exp(1 - 1/(1 - r^2/w^2)) inside r < w."""
    if grid.dimension == 1:
        r = np.abs(grid.axis_coords() - float(np.atleast_1d(center)[0]))
    else:
        r = np.linalg.norm(grid.coords() - np.asarray(center, dtype=float), axis=-1)
    z = np.square(r / width)
    values = np.zeros(grid.shape)
    inside = z < 1.0
    values[inside] = height * np.exp(1.0 - 1.0 / (1.0 - z[inside]))
    return Field(grid, values, time)


def step_field(grid: Grid, theta: float, direction: int = 1, time: float = 0.0) -> Field:
    """Smoothed step: theta on one half of the first axis, 0 on the other."""
    x = grid.axis_coords()
    profile = theta / (1.0 + np.exp(np.clip(2.0 * direction * x, -500.0, 500.0)))
    if grid.dimension == 1:
        return Field(grid, profile, time)
    return Field(grid, np.tile(profile[:, None], (1, grid.points_per_axis)), time)
