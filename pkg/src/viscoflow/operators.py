"""Fourth-order periodic finite-difference operators and discrete norms."""

from __future__ import annotations

import numpy as np

from .errors import NonFiniteFieldError


def require_finite(f, name="field"):
    if not np.all(np.isfinite(f)):
        bad = np.argwhere(~np.isfinite(f))[0]
        raise NonFiniteFieldError(f"{name} has a non-finite entry at index {tuple(int(i) for i in bad)}")
    return f


def _spatial_axis(grid, f, a):
    return f.ndim - grid.dim + a


def _neighbours(f, ax):
    """Views of f shifted by +1, -1, +2, -2 cells along ``ax`` (periodic),
    cut from a single wrapped copy."""
    n = f.shape[ax]
    padded = np.concatenate([f.take(range(n - 2, n), axis=ax), f, f.take(range(2), axis=ax)], axis=ax)

    def shift(k):
        idx = [slice(None)] * f.ndim
        idx[ax] = slice(2 + k, 2 + k + n)
        return padded[tuple(idx)]

    return shift(1), shift(-1), shift(2), shift(-2)


def d1(grid, f, a):
    """Fourth-order central first derivative along axis ``a``.

    Written as differences of symmetric pairs so that constants map to
    exactly zero.
    """
    p1, m1, p2, m2 = _neighbours(f, _spatial_axis(grid, f, a))
    return (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * grid.h[a])


def d2(grid, f, a):
    """Fourth-order central second derivative along axis ``a``."""
    p1, m1, p2, m2 = _neighbours(f, _spatial_axis(grid, f, a))
    # 32c - 2c and 30c round identically, so constants give exactly zero
    out = p1 + m1
    out *= 16.0
    out -= p2 + m2
    out -= 30.0 * f
    out *= 1.0 / (12.0 * grid.h[a] ** 2)
    return out


def gradient(grid, f):
    """Gradient of any field; the derivative index is appended last among
    the component axes, so for a vector ``v`` the result is ``(grad v)[i, j]
    = d v_i / d x_j``."""
    f = np.asarray(f, dtype=np.float64)
    ncomp = f.ndim - grid.dim
    return np.stack([d1(grid, f, a) for a in range(grid.dim)], axis=ncomp)


def divergence(grid, v):
    out = d1(grid, v[0], 0)
    for j in range(1, grid.dim):
        out = out + d1(grid, v[j], j)
    return out


def laplacian(grid, f):
    f = np.asarray(f, dtype=np.float64)
    out = d2(grid, f, 0)
    for a in range(1, grid.dim):
        out += d2(grid, f, a)
    return out


def tensor_divergence(grid, T):
    """Row-wise divergence, (div T)_i = d_j T_ij."""
    out = d1(grid, T[:, 0], 0)
    for j in range(1, grid.dim):
        out = out + d1(grid, T[:, j], j)
    return out


def grad_div(grid, v):
    return gradient(grid, divergence(grid, v))


# norms ---------------------------------------------------------------------

NORM_KINDS = ("L1", "L2", "Lq", "Linf", "W1q")


def pointwise_magnitude(grid, f):
    """|f| at each node: absolute value, Euclidean or Frobenius norm."""
    f = np.asarray(f)
    ncomp = f.ndim - grid.dim
    if ncomp == 0:
        return np.abs(f)
    return np.sqrt(np.sum(f * f, axis=tuple(range(ncomp))))


def integrate(grid, f):
    """Midpoint-rule integral over the periodic box."""
    return float(np.sum(f)) * grid.cell_volume


def discrete_norm(grid, f, kind="L2", q=4.0):
    if kind not in NORM_KINDS:
        raise ValueError(f"unsupported norm kind {kind!r}; expected one of {NORM_KINDS}")
    if kind in ("Lq", "W1q") and not 3.0 < q <= 6.0:
        raise ValueError(f"q must lie in (3, 6], got {q}")
    mag = pointwise_magnitude(grid, f)
    if kind == "Linf":
        return float(np.max(mag))
    if kind == "L1":
        return integrate(grid, mag)
    if kind == "L2":
        return integrate(grid, mag * mag) ** 0.5
    if kind == "Lq":
        return integrate(grid, mag**q) ** (1.0 / q)
    dmag = pointwise_magnitude(grid, gradient(grid, f))
    return (integrate(grid, mag**q) + integrate(grid, dmag**q)) ** (1.0 / q)


def w2q_norm(grid, f, q=4.0):
    """W^{2,q} surrogate: L^q of the field, its gradient and its Hessian."""
    g = gradient(grid, f)
    hess = gradient(grid, g)
    total = sum(integrate(grid, pointwise_magnitude(grid, x) ** q) for x in (f, g, hess))
    return total ** (1.0 / q)
