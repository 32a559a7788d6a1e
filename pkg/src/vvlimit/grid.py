"""Uniform cell grids on a periodic box.

The box is [lo, hi)^dim sampled at ``cells`` points per axis with
spacing h = (hi - lo) / cells. All stencils treat the axes as periodic;
the truncated-support boundary mode of the solver is layered on top by
keeping the fields away from the box faces.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError


@dataclass(frozen=True)
class Grid:
    dim: int
    cells: int
    lo: float = -1.0
    hi: float = 1.0

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise PreconditionError(f"dim must be 1, 2 or 3, got {self.dim}")
        if self.cells < 8:
            raise PreconditionError(f"need at least 8 cells per axis, got {self.cells}")
        if not self.hi > self.lo:
            raise PreconditionError(f"empty extent [{self.lo}, {self.hi})")

    @property
    def h(self) -> float:
        return (self.hi - self.lo) / self.cells

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.cells,) * self.dim

    @property
    def cell_volume(self) -> float:
        return self.h**self.dim

    def axis(self) -> np.ndarray:
        return self.lo + self.h * np.arange(self.cells)

    def coords(self) -> tuple[np.ndarray, ...]:
        """Sparse broadcastable coordinate arrays, one per axis."""
        ax = self.axis()
        return tuple(np.meshgrid(*([ax] * self.dim), indexing="ij", sparse=True))

    def points(self) -> np.ndarray:
        """Dense coordinates, shape (dim, cells, ..., cells)."""
        ax = self.axis()
        mesh = np.meshgrid(*([ax] * self.dim), indexing="ij")
        return np.stack(mesh)

    def radius(self) -> np.ndarray:
        c = self.coords()
        r2 = np.zeros(self.shape)
        for x in c:
            r2 = r2 + x * x
        return np.sqrt(r2)

    def integrate(self, f: np.ndarray) -> float:
        return float(self.cell_volume * np.sum(f))

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)
