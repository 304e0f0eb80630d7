"""Semi-Lagrangian solution of the continuity and deformation-gradient
equations for a velocity frozen over one step.

Both updates integrate the characteristic ODEs exactly in structure:

    rho(x) <- rho(foot) * exp(-dt * div v(mid))
    F(x)   <- E F(foot),   E ~ exp(dt * grad v(mid))

where ``foot`` is the RK2 backward foot of the characteristic through
node ``x`` and ``mid`` its midpoint.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .constitutive import check_positive_density
from .errors import CFLError, NonPositiveDensityError
from .interpolation import CubicStencil
from .operators import divergence, gradient, pointwise_magnitude, require_finite

log = logging.getLogger(__name__)

PROPAGATORS = ("taylor2", "expm")


@dataclass(frozen=True)
class DeparturePoints:
    grid: object
    dt: float
    feet: np.ndarray  # (size, dim), unwrapped physical coordinates
    divv_mid: np.ndarray  # (size,)
    gradv_mid: np.ndarray  # (dim, dim, size)
    stencil: CubicStencil = field(repr=False)

    @property
    def divv_inf(self):
        return float(np.max(np.abs(self.divv_mid)))

    @property
    def gradv_inf(self):
        return float(np.max(pointwise_magnitude_flat(self.gradv_mid)))

    def displacement(self):
        """foot - node for every node, shape (size, dim)."""
        return self.feet - self.grid.points()


def pointwise_magnitude_flat(a):
    return np.sqrt(np.sum(a * a, axis=tuple(range(a.ndim - 1))))


def trace_departure_points(grid, v, dt):
    """Backward RK2 (midpoint) trace of the characteristics of ``v``."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    require_finite(v, "velocity")
    vmax = float(np.max(pointwise_magnitude(grid, v)))
    limit = min(grid.length) / 4.0
    if dt * vmax > limit:
        advisory = 0.5 * limit / vmax
        raise CFLError(
            f"dt * |v|_inf = {dt * vmax:.6g} exceeds length/4 = {limit:.6g}; try dt <= {advisory:.6g}",
            advisory_dt=advisory,
        )
    x = grid.points()
    vn = v.reshape(grid.dim, -1).T
    mid = CubicStencil(grid, x - 0.5 * dt * vn)
    v_mid = mid.sample(v)
    feet = x - dt * v_mid.T
    gradv = gradient(grid, v)
    divv = divergence(grid, v)
    return DeparturePoints(
        grid=grid,
        dt=dt,
        feet=feet,
        divv_mid=mid.sample(divv),
        gradv_mid=mid.sample(gradv),
        stencil=CubicStencil(grid, feet),
    )


def advect_density(rho, dp, dt=None, monotone=True, source=None):
    """Continuity update along characteristics; positive by construction.

    ``source`` (per node, flattened or on the grid) is added as
    ``dt * source`` after the transport.
    """
    grid = dp.grid
    dt = dp.dt if dt is None else dt
    check_positive_density(rho)
    at_foot = dp.stencil.sample(rho, monotone=monotone)
    if np.any(at_foot <= 0):
        k = int(np.argmin(at_foot))
        cell = np.unravel_index(k, grid.shape)
        raise NonPositiveDensityError(
            f"interpolated density {at_foot[k]:.6g} at the foot of cell {tuple(int(i) for i in cell)} is not "
            "positive; the density is under-resolved",
            cell=tuple(int(i) for i in cell),
        )
    out = at_foot * np.exp(-dt * dp.divv_mid)
    if source is not None:
        out = out + dt * np.reshape(source, -1)
        check_positive_density(out, "density after source")
    return require_finite(out.reshape(grid.shape), "density")


def propagator(dp, dt=None, kind="taylor2"):
    """Per-node matrices E approximating exp(dt * grad v(mid)), (dim, dim, size)."""
    dt = dp.dt if dt is None else dt
    A = dt * dp.gradv_mid
    if kind == "taylor2":
        E = A + 0.5 * np.einsum("ik...,kj...->ij...", A, A)
        for i in range(dp.grid.dim):
            E[i, i] += 1.0
        return E
    if kind == "expm":
        return np.moveaxis(scipy.linalg.expm(np.moveaxis(A, -1, 0)), 0, -1)
    raise ValueError(f"unknown propagator {kind!r}; expected one of {PROPAGATORS}")


def advect_deformation(F, dp, dt=None, kind="taylor2", source=None):
    """Deformation-gradient update F(x) <- E(x) F(foot)."""
    grid = dp.grid
    require_finite(F, "F")
    at_foot = dp.stencil.sample(F)
    out = np.einsum("ik...,kj...->ij...", propagator(dp, dt, kind), at_foot)
    if source is not None:
        dt = dp.dt if dt is None else dt
        out = out + dt * np.reshape(source, out.shape)
    return require_finite(out.reshape((grid.dim, grid.dim) + grid.shape), "F")


def compose_displacement(disp, dp):
    """Advance the map x -> X0(x) by one step.

    ``disp`` holds X0(x) - x on the grid, shape (dim, *shape); the result is
    the displacement of the composed map X0(foot(x)).
    """
    grid = dp.grid
    step = dp.displacement().T  # (dim, size)
    out = step + dp.stencil.sample(disp)
    return out.reshape((grid.dim,) + grid.shape)
