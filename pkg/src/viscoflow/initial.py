"""Named initial-condition presets."""

from __future__ import annotations

import numpy as np

from .stepper import State

PRESETS = ("equilibrium", "acoustic", "compatible-deformation", "incompatible-deformation", "random-smooth", "files")


def equilibrium(grid, rho_bar=1.0):
    return State(0.0, grid.scalar(rho_bar), grid.vector(), grid.identity_tensor(), grid)


def acoustic(grid, amplitude=1e-3, mode=1, rho_bar=1.0):
    """Small density wave along the first axis, fluid at rest, F = I."""
    x = grid.coords()
    k = 2 * np.pi * mode / grid.length[0]
    rho = rho_bar * (1.0 + amplitude * np.sin(k * x[0]))
    return State(0.0, rho, grid.vector(), grid.identity_tensor(), grid)


def deformation_map_gradient(x, eps):
    """Jacobian G = dX/dx of the reference map X(x) = x - eps * phi(x) with
    phi_i = sin(x_{i+1}) + sin(x_i) / 2 + sin(x_i + 2 x_{i+1}) / 4 (cyclic index).

    Returns G with shape (dim, dim, *x.shape[1:]).
    """
    d = x.shape[0]
    G = np.zeros((d, d) + x.shape[1:])
    for i in range(d):
        j = (i + 1) % d
        mixed = np.cos(x[i] + 2.0 * x[j])
        G[i, i] = 1.0 - eps * (0.5 * np.cos(x[i]) + 0.25 * mixed)
        G[i, j] -= eps * (np.cos(x[j]) + 0.5 * mixed)
    return G


def compatible_deformation(grid, amplitude=0.2, velocity=0.0):
    """F = G^{-1}, rho = det G for the smooth periodic map of
    ``deformation_map_gradient``.

    F is the gradient of a deformation, so the curl identity holds, and
    div(rho F^T) = 0 and rho det F = 1 hold exactly in the continuum.
    """
    x = grid.coords()
    G = deformation_map_gradient(x, amplitude)
    Gm = np.moveaxis(G.reshape(grid.dim, grid.dim, -1), -1, 0)
    F = np.moveaxis(np.linalg.inv(Gm), 0, -1).reshape(G.shape)
    rho = np.linalg.det(Gm).reshape(grid.shape)
    u = grid.vector()
    if velocity:
        u[0] = velocity * np.sin(x[1 % grid.dim])
        u[1] = 0.5 * velocity * np.cos(x[0])
    return State(0.0, rho, u, F, grid)


def incompatible_deformation(grid, amplitude=0.5):
    """F = (1 + amplitude sin x_1) I, which violates the curl identity."""
    x = grid.coords()
    F = grid.identity_tensor() * (1.0 + amplitude * np.sin(x[0]))
    return State(0.0, grid.scalar(1.0), grid.vector(), F, grid)


def random_smooth(grid, seed=0, amplitude=0.1, kmax=2):
    """Band-limited random perturbation of equilibrium (reproducible by seed)."""
    rng = np.random.default_rng(seed)
    x = grid.coords()

    def field(shape):
        out = np.zeros(shape + grid.shape)
        for idx in np.ndindex(*shape) if shape else [()]:
            for _ in range(3):
                k = rng.integers(-kmax, kmax + 1, size=grid.dim)
                out[idx] += rng.normal() * np.cos(np.tensordot(k, x, axes=1) + rng.uniform(0, 2 * np.pi))
        return out / 3.0

    rho = 1.0 + amplitude * np.tanh(field(()))
    u = amplitude * field((grid.dim,))
    F = grid.identity_tensor() + amplitude * field((grid.dim, grid.dim))
    return State(0.0, rho, u, F, grid)


def build(grid, preset, **params):
    if preset == "equilibrium":
        return equilibrium(grid, params.get("rho_bar", 1.0))
    if preset == "acoustic":
        return acoustic(grid, params.get("amplitude", 1e-3), int(params.get("mode", 1)), params.get("rho_bar", 1.0))
    if preset == "compatible-deformation":
        return compatible_deformation(grid, params.get("amplitude", 0.2), params.get("velocity", 0.0))
    if preset == "incompatible-deformation":
        return incompatible_deformation(grid, params.get("amplitude", 0.5))
    if preset == "random-smooth":
        return random_smooth(grid, int(params.get("seed", 0)), params.get("amplitude", 0.1))
    if preset == "files":
        from .io import read_state_files

        return read_state_files(grid, params["rho_file"], params["u_file"], params["F_file"])
    raise ValueError(f"unknown initial-condition preset {preset!r}; expected one of {PRESETS}")
