"""Periodic structured grid.

Fields are plain numpy arrays with the component axes first and the
spatial axes last (structure of arrays):

    scalar  -> grid.shape
    vector  -> (dim, *grid.shape)
    tensor  -> (dim, dim, *grid.shape), entry [i, j] is row i, column j
"""

from __future__ import annotations

from dataclasses import dataclass
from math import pi, prod

import numpy as np


@dataclass(frozen=True)
class Grid:
    dim: int
    n: tuple
    length: tuple

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        n = tuple(int(k) for k in self.n)
        length = tuple(float(x) for x in self.length)
        if len(n) != self.dim or len(length) != self.dim:
            raise ValueError("n and length need one entry per axis")
        for k in n:
            if k < 8 or k & (k - 1):
                raise ValueError(f"cell count {k} must be a power of two >= 8")
        if any(not x > 0 for x in length):
            raise ValueError("axis lengths must be positive")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "length", length)

    @classmethod
    def cube(cls, dim, n, length=2 * pi):
        return cls(dim, (n,) * dim, (length,) * dim)

    @property
    def h(self):
        return tuple(L / k for L, k in zip(self.length, self.n))

    @property
    def shape(self):
        return self.n

    @property
    def size(self):
        return prod(self.n)

    @property
    def cell_volume(self):
        return prod(self.h)

    @property
    def volume(self):
        return prod(self.length)

    def axis(self, a):
        return np.arange(self.n[a]) * self.h[a]

    def coords(self):
        """Node coordinates, shape (dim, *shape)."""
        return np.stack(np.meshgrid(*(self.axis(a) for a in range(self.dim)), indexing="ij"))

    def points(self):
        """Node coordinates as a flat (size, dim) list, row-major."""
        return self.coords().reshape(self.dim, -1).T.copy()

    # field constructors ------------------------------------------------

    def scalar(self, value=0.0):
        return np.full(self.shape, value, dtype=np.float64)

    def vector(self, value=0.0):
        return np.full((self.dim, *self.shape), value, dtype=np.float64)

    def identity_tensor(self):
        F = np.zeros((self.dim, self.dim, *self.shape))
        for i in range(self.dim):
            F[i, i] = 1.0
        return F

    def components(self, f):
        """Leading component shape of a field on this grid."""
        f = np.asarray(f)
        if f.shape[f.ndim - self.dim:] != self.shape:
            raise ValueError(f"field of shape {f.shape} does not live on grid {self.shape}")
        return f.shape[: f.ndim - self.dim]
