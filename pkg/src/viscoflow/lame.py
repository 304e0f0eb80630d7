"""Implicit-Euler momentum solve: preconditioned CG on the Lamé operator

    A u = (rho / dt) u - mu lap u - (mu + lambda) grad div u

with variable density. The operator is symmetric positive definite when
mu > 0, 3 mu + 2 lambda > 0 and rho > 0.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.fft

from .constitutive import check_positive_density
from .errors import LameSolveError
from .operators import grad_div, laplacian

log = logging.getLogger(__name__)

PRECONDITIONERS = ("none", "jacobi", "fft_constant_coefficient")


def check_ellipticity(mu, lam):
    errors = []
    if not mu > 0:
        errors.append(f"μ > 0 violated (mu = {mu})")
    if not 3 * mu + 2 * lam > 0:
        errors.append(f"3μ+2λ > 0 violated (3*{mu} + 2*{lam} = {3 * mu + 2 * lam})")
    return errors


@dataclass(frozen=True)
class LameProblem:
    grid: object
    rho: np.ndarray
    mu: float
    lam: float
    dt: float
    rhs: np.ndarray
    u_prev: np.ndarray

    def __post_init__(self):
        problems = check_ellipticity(self.mu, self.lam)
        if not self.dt > 0:
            problems.append(f"dt > 0 violated (dt = {self.dt})")
        if problems:
            raise ValueError("; ".join(problems))
        check_positive_density(self.rho)

    def rhs_total(self):
        """b = rhs + (rho / dt) u_prev."""
        return self.rhs + (self.rho / self.dt) * self.u_prev


@dataclass
class SolveStats:
    iterations: int
    final_residual: float
    preconditioner: str
    history: list = field(default_factory=list, repr=False)


def apply_lame_operator(p, u):
    return (p.rho / p.dt) * u - p.mu * laplacian(p.grid, u) - (p.mu + p.lam) * grad_div(p.grid, u)


def _dot(a, b):
    # np.sum reduces pairwise in a fixed order: reproducible run to run
    return float(np.sum(a * b))


def stencil_symbols(grid, real=True):
    """Fourier symbols of the 4th-order first derivative (i * s) and of the
    negative second derivative (l) on each axis, broadcastable to the
    (r)fft wavenumber grid."""
    s, l = [], []
    for a in range(grid.dim):
        n, h = grid.n[a], grid.h[a]
        if real and a == grid.dim - 1:
            k = np.arange(n // 2 + 1)
        else:
            k = np.fft.fftfreq(n, d=1.0 / n)
        th = 2 * np.pi * k / n
        shape = [1] * grid.dim
        shape[a] = -1
        s.append(((8 * np.sin(th) - np.sin(2 * th)) / (6 * h)).reshape(shape))
        l.append(((32 * (1 - np.cos(th)) - 2 * (1 - np.cos(2 * th))) / (12 * h * h)).reshape(shape))
    return s, l


class FFTPreconditioner:
    """Exact inverse of the constant-density operator.

    Per wavenumber the operator is the d x d block a I + b s s^T with
    a = rho_mean / dt + mu |l|, b = mu + lambda; Sherman-Morrison gives the
    inverse in closed form.
    """

    name = "fft_constant_coefficient"

    def __init__(self, grid, rho_mean, mu, lam, dt, workers=1):
        self.grid = grid
        self.workers = workers
        self.axes = tuple(range(1, grid.dim + 1))
        s, l = stencil_symbols(grid)
        lsum = sum(l)
        s2 = sum(si * si for si in s)
        self.a = rho_mean / dt + mu * lsum
        b = mu + lam
        self.c = b / (self.a + b * s2)
        self.s = s

    def __call__(self, r):
        rh = scipy.fft.rfftn(r, axes=self.axes, workers=self.workers)
        sr = sum(si * rh[i] for i, si in enumerate(self.s))
        zh = np.empty_like(rh)
        for i, si in enumerate(self.s):
            zh[i] = (rh[i] - self.c * si * sr) / self.a
        return scipy.fft.irfftn(zh, s=self.grid.shape, axes=self.axes, workers=self.workers)


class JacobiPreconditioner:
    name = "jacobi"

    def __init__(self, grid, rho, mu, lam, dt):
        h = grid.h
        lap_diag = sum(30.0 / (12.0 * hi * hi) for hi in h)
        self.diag = np.stack(
            [rho / dt + mu * lap_diag + (mu + lam) * 130.0 / (144.0 * h[i] ** 2) for i in range(grid.dim)]
        )

    def __call__(self, r):
        return r / self.diag


def make_preconditioner(p, kind, workers=1):
    if kind == "none":
        return None
    if kind == "jacobi":
        return JacobiPreconditioner(p.grid, p.rho, p.mu, p.lam, p.dt)
    if kind == "fft_constant_coefficient":
        return FFTPreconditioner(p.grid, float(np.mean(p.rho)), p.mu, p.lam, p.dt, workers)
    raise ValueError(f"unknown preconditioner {kind!r}; expected one of {PRECONDITIONERS}")


def solve_momentum(p, tol=1e-10, max_iter=500, preconditioner="fft_constant_coefficient", x0=None, workers=1):
    """Solve A u = rhs + (rho/dt) u_prev by preconditioned CG.

    Convergence is declared on the true relative residual
    ``|A u - b| / |b|`` in the unpreconditioned 2-norm.
    """
    if not 0 < tol < 1:
        raise ValueError(f"tol must lie in (0, 1), got {tol}")
    if max_iter < 1:
        raise ValueError(f"max_iter must be >= 1, got {max_iter}")
    b = p.rhs_total()
    bnorm = _dot(b, b) ** 0.5
    if bnorm == 0.0:
        return np.zeros_like(b), SolveStats(0, 0.0, preconditioner, [0.0])
    M = make_preconditioner(p, preconditioner, workers)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=np.float64, copy=True)
    r = b - apply_lame_operator(p, x) if x0 is not None else b.copy()
    res = _dot(r, r) ** 0.5 / bnorm
    history = [res]
    best, best_res = x.copy(), res
    if res <= tol:
        return x, SolveStats(0, res, preconditioner, history)
    z = r if M is None else M(r)
    d = z.copy()
    rz = _dot(r, z)
    for it in range(1, max_iter + 1):
        Ad = apply_lame_operator(p, d)
        alpha = rz / _dot(d, Ad)
        x += alpha * d
        r -= alpha * Ad
        res = _dot(r, r) ** 0.5 / bnorm
        if res <= tol:
            # the recursive residual drifts; confirm against the true one
            r = b - apply_lame_operator(p, x)
            res = _dot(r, r) ** 0.5 / bnorm
        history.append(res)
        if res < best_res:
            best, best_res = x.copy(), res
        if res <= tol:
            return x, SolveStats(it, res, preconditioner, history)
        z = r if M is None else M(r)
        rz_new = _dot(r, z)
        d = z + (rz_new / rz) * d
        rz = rz_new
    raise LameSolveError(
        f"CG did not reach relative residual {tol:g} in {max_iter} iterations (best {best_res:.3e})",
        best=best,
        history=history,
    )
