"""Manufactured solutions: exact fields, their residual sources, and
order-of-accuracy studies.

Each case returns closed-form values and derivatives at a list of points;
the sources follow from the generic residual formulas

    g_rho = rho_t + u . grad rho + rho div u
    g_u   = rho (u_t + (u . grad) u) - mu lap u - (mu + lam) grad div u
            + P'(rho) grad rho - div(rho F F^T)
    g_F   = F_t + (u . grad) F - grad(u) F

so that the exact fields satisfy the forced system. Closed forms are all
2 pi periodic in every coordinate.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import ViscoflowError
from .grid import Grid
from .operators import discrete_norm
from .stepper import Physics, State, StepConfig, run_simulation

TWO_PI = 2.0 * math.pi

# keys every case evaluator returns; trailing axis is the point index
#   rho (N) rho_t (N) rho_x (d, N)
#   u (d, N) u_t (d, N) u_x (d, d, N) [i, j] = d_j u_i  u_lap (d, N)  u_graddiv (d, N)
#   F (d, d, N) F_t (d, d, N) F_x (d, d, d, N) [i, j, l] = d_l F_ij


def _equilibrium(x, t, dim):
    n = x.shape[0]
    z1, zd, zdd = np.zeros(n), np.zeros((dim, n)), np.zeros((dim, dim, n))
    eye = np.broadcast_to(np.eye(dim)[:, :, None], (dim, dim, n)).copy()
    return dict(
        rho=np.ones(n), rho_t=z1, rho_x=zd,
        u=zd, u_t=zd, u_x=zdd, u_lap=zd, u_graddiv=zd,
        F=eye, F_t=zdd, F_x=np.zeros((dim, dim, dim, n)),
    )


@dataclass(frozen=True)
class TravelingWave:
    """Fields f(theta) = f0 + fs sin(theta) + fc cos(theta) with
    theta = k x_1 - omega t; every field depends on x_1 and t only."""

    k: int = 1
    omega: float = 1.0
    rho_amp: float = 0.1
    u_sin: tuple = (0.1, 0.05, 0.0)
    u_cos: tuple = (0.0, 0.05, 0.02)
    F_sin: float = 0.1
    F_cos: float = 0.05

    def coefficients(self, dim):
        rho = (1.0, self.rho_amp, 0.0)
        u = (np.zeros(dim), np.array(self.u_sin[:dim]), np.array(self.u_cos[:dim]))
        fs = np.zeros((dim, dim))
        fc = np.zeros((dim, dim))
        fs[0, 0] = self.F_sin
        fs[1, 0] = 0.5 * self.F_sin
        fc[0, 1] = self.F_cos
        fc[dim - 1, dim - 1] = self.F_cos
        F = (np.eye(dim), fs, fc)
        return rho, u, F

    def __call__(self, x, t, dim):
        theta = self.k * x[:, 0] - self.omega * t
        s, c = np.sin(theta), np.cos(theta)
        rho_c, u_c, F_c = self.coefficients(dim)

        def expand(coef):
            f0, fs, fc = (np.asarray(a, dtype=np.float64)[..., None] for a in coef)
            val = f0 + fs * s + fc * c
            prime = fs * c - fc * s
            return val, prime, f0 - val  # f'' = -(f - f0)

        rho, rho_p, _ = expand(rho_c)
        u, u_p, u_pp = expand(u_c)
        F, F_p, _ = expand(F_c)
        k, w = self.k, self.omega
        n = x.shape[0]
        rho_x = np.zeros((dim, n))
        rho_x[0] = k * rho_p
        u_x = np.zeros((dim, dim, n))
        u_x[:, 0] = k * u_p
        u_graddiv = np.zeros((dim, n))
        u_graddiv[0] = k * k * u_pp[0]
        F_x = np.zeros((dim, dim, dim, n))
        F_x[:, :, 0] = k * F_p
        return dict(
            rho=rho, rho_t=-w * rho_p, rho_x=rho_x,
            u=u, u_t=-w * u_p, u_x=u_x, u_lap=k * k * u_pp, u_graddiv=u_graddiv,
            F=F, F_t=-w * F_p, F_x=F_x,
        )


@dataclass(frozen=True)
class RotatingDeformation:
    """2D: F = R(omega t)(I + eps P(x)), cellular velocity, pulsating density.

    P = [[sin x2, cos x1], [sin x1 cos x2, cos x2]],
    u = delta cos t (sin x1 cos x2, -cos x1 sin x2),
    rho = 1 + a cos t sin x1 sin x2.
    """

    omega: float = 1.0
    eps: float = 0.2
    delta: float = 0.2
    a: float = 0.1

    def __call__(self, x, t, dim):
        if dim != 2:
            raise ValueError("the rotating-deformation case is two-dimensional")
        x1, x2 = x[:, 0], x[:, 1]
        s1, c1, s2, c2 = np.sin(x1), np.cos(x1), np.sin(x2), np.cos(x2)
        ct, st = math.cos(t), math.sin(t)
        a, d, e, w = self.a, self.delta, self.eps, self.omega
        n = x.shape[0]

        rho = 1.0 + a * ct * s1 * s2
        rho_t = -a * st * s1 * s2
        rho_x = a * ct * np.stack([c1 * s2, s1 * c2])

        shape_u = np.stack([s1 * c2, -c1 * s2])
        u = d * ct * shape_u
        u_t = -d * st * shape_u
        u_x = d * ct * np.array([[c1 * c2, -s1 * s2], [s1 * s2, -c1 * c2]])

        P = np.array([[s2, c1], [s1 * c2, c2]])
        dP1 = np.array([[0 * s1, -s1], [c1 * c2, 0 * s1]])
        dP2 = np.array([[c2, 0 * s1], [-s1 * s2, -s2]])
        cr, sr = math.cos(w * t), math.sin(w * t)
        R = np.array([[cr, -sr], [sr, cr]])
        Rt = w * np.array([[-sr, -cr], [cr, -sr]])
        B = np.eye(2)[:, :, None] + e * P
        F = np.einsum("ik,kjn->ijn", R, B)
        F_t = np.einsum("ik,kjn->ijn", Rt, B)
        F_x = e * np.stack([np.einsum("ik,kjn->ijn", R, dP1), np.einsum("ik,kjn->ijn", R, dP2)], axis=2)
        return dict(
            rho=rho, rho_t=rho_t, rho_x=rho_x,
            u=u, u_t=u_t, u_x=u_x, u_lap=-2.0 * u, u_graddiv=np.zeros((2, n)),
            F=F, F_t=F_t, F_x=F_x,
        )


@dataclass(frozen=True)
class ManufacturedCase:
    name: str
    evaluator: Callable = field(repr=False)
    t_final: float = 0.5
    dims: tuple = (2, 3)
    norms: tuple = ("L2",)

    def exact(self, points, t, dim):
        return self.evaluator(np.asarray(points, dtype=np.float64), float(t), dim)

    def exact_state(self, grid, t):
        ex = self.exact(grid.points(), t, grid.dim)
        d = grid.dim
        return State(
            t,
            ex["rho"].reshape(grid.shape),
            ex["u"].reshape((d,) + grid.shape),
            ex["F"].reshape((d, d) + grid.shape),
            grid,
        )

    def check_grid(self, grid):
        if grid.dim not in self.dims:
            raise ValueError(f"case {self.name!r} supports dimensions {self.dims}, not {grid.dim}")
        if any(abs(L - TWO_PI) > 1e-12 for L in grid.length):
            raise ValueError(f"case {self.name!r} is 2 pi periodic; the box must have length 2 pi")


CASES = {
    "equilibrium": ManufacturedCase("equilibrium", _equilibrium),
    "traveling-wave": ManufacturedCase("traveling-wave", TravelingWave()),
    "rotating-deformation": ManufacturedCase("rotating-deformation", RotatingDeformation(), dims=(2,)),
}


def get_case(name):
    try:
        return CASES[name]
    except KeyError:
        raise ValueError(f"unknown manufactured case {name!r}; expected one of {sorted(CASES)}") from None


def residuals(ex, physics):
    """Source terms from exact values and derivatives (see module docstring)."""
    rho, u, F = ex["rho"], ex["u"], ex["F"]
    mu, lam, law = physics.mu, physics.lam, physics.law
    div_u = np.einsum("ii...->...", ex["u_x"])
    g_rho = ex["rho_t"] + np.einsum("i...,i...->...", u, ex["rho_x"]) + rho * div_u

    adv_u = np.einsum("ij...,j...->i...", ex["u_x"], u)
    F_x = ex["F_x"]
    # div(rho F F^T)_i = d_j(rho F_ik F_jk)
    B = np.einsum("ik...,jk...->ij...", F, F)
    dB = np.einsum("ikj...,jk...->i...", F_x, F) + np.einsum("ik...,jkj...->i...", F, F_x)
    div_stress = np.einsum("ij...,j...->i...", B, ex["rho_x"]) + rho * dB
    g_u = (
        rho * (ex["u_t"] + adv_u)
        - mu * ex["u_lap"]
        - (mu + lam) * ex["u_graddiv"]
        + law.derivative(rho) * ex["rho_x"]
        - div_stress
    )
    g_F = ex["F_t"] + np.einsum("ijl...,l...->ij...", F_x, u) - np.einsum("ik...,kj...->ij...", ex["u_x"], F)
    return g_rho, g_u, g_F


def manufactured_sources(case, points, t, dim, physics):
    """(g_rho, g_u, g_F) at the points, shapes (N,), (d, N), (d, d, N)."""
    return residuals(case.exact(points, t, dim), physics)


def make_forcing(case, dim, physics):
    """Adapter with the signature the stepper expects."""

    def forcing(points, t):
        return manufactured_sources(case, points, t, dim, physics)

    return forcing


class StudyError(ViscoflowError):
    def __init__(self, message, level, cause):
        super().__init__(message)
        self.level = level
        self.exit_code = getattr(cause, "exit_code", 3)


@dataclass
class EOCRow:
    n: tuple
    dt: float
    err_rho: float
    err_u: float
    err_F: float
    eoc_rho: object = None  # float, "exact" or None on the first level
    eoc_u: object = None
    eoc_F: object = None


ROUNDOFF = 1e-12


def _order(prev, cur):
    if prev <= ROUNDOFF and cur <= ROUNDOFF:
        return "exact"
    if cur <= 0 or prev <= 0:
        return float("inf")
    return math.log2(prev / cur)


@dataclass
class EOCTable:
    case: str
    rows: list

    COLUMNS = ("nx", "dt", "err_rho", "err_u", "err_F", "eoc_rho", "eoc_u", "eoc_F")

    def orders(self, which):
        return [getattr(r, f"eoc_{which}") for r in self.rows[1:]]

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.COLUMNS)
            for r in self.rows:
                eoc = [("" if v is None else v if isinstance(v, str) else f"{v:.6g}") for v in (r.eoc_rho, r.eoc_u, r.eoc_F)]
                w.writerow(["x".join(map(str, r.n)), f"{r.dt:.17g}", f"{r.err_rho:.17g}", f"{r.err_u:.17g}", f"{r.err_F:.17g}", *eoc])


def convergence_study(case, grids, dts, physics=Physics(), cfg=StepConfig(), t_final=None, norm="L2"):
    """Run the forced system on each (grid, dt) level and measure errors at
    t_final against the exact fields."""
    if len(grids) < 3 or len(grids) != len(dts):
        raise ValueError("a convergence study needs at least 3 levels with one dt per grid")
    t_final = case.t_final if t_final is None else t_final
    rows = []
    for level, (grid, dt) in enumerate(zip(grids, dts)):
        case.check_grid(grid)
        initial = case.exact_state(grid, 0.0)
        try:
            result = run_simulation(
                initial,
                t_final,
                replace(cfg, dt=dt, dt_min=min(cfg.dt_min, dt)),
                physics,
                forcing=make_forcing(case, grid.dim, physics),
            )
        except ViscoflowError as exc:
            raise StudyError(f"level {level} (n = {grid.n}, dt = {dt:g}) failed: {exc}", level, exc) from exc
        exact = case.exact_state(grid, result.final.t)
        errs = [
            discrete_norm(grid, getattr(result.final, name) - getattr(exact, name), norm)
            for name in ("rho", "u", "F")
        ]
        row = EOCRow(grid.n, dt, *errs)
        if rows:
            prev = rows[-1]
            row.eoc_rho = _order(prev.err_rho, row.err_rho)
            row.eoc_u = _order(prev.err_u, row.err_u)
            row.eoc_F = _order(prev.err_F, row.err_F)
        rows.append(row)
    return EOCTable(case.name, rows)


def refinement_levels(case_dim, n0, levels, dt0, dt_power, transverse=None, length=TWO_PI):
    """Grids doubling along every axis (or only the first, with a fixed
    ``transverse`` resolution) and dt = dt0 * 2^(-dt_power * level)."""
    grids, dts = [], []
    for lv in range(levels):
        n = n0 * 2**lv
        ns = (n,) + ((transverse,) * (case_dim - 1) if transverse else (n,) * (case_dim - 1))
        grids.append(Grid(case_dim, ns, (length,) * case_dim))
        dts.append(dt0 * 2.0 ** (-dt_power * lv))
    return grids, dts
