"""Per-step Picard fixed point on the velocity and the time loop.

One step from (rho^n, u^n, F^n) iterates

    rho^k = S(v^k),  F^k = T(v^k)               (transport along v^k)
    u^{k+1} = Lamé solve with rhs(rho^k, v^k, F^k)
    v^{k+1} = theta u^{k+1} + (1 - theta) v^k

from v^0 = u^n until the relative change of v drops below picard_tol.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .constitutive import PressureLaw, cauchy_elastic_source, check_positive_density, pressure
from .errors import (
    CFLError,
    NormBlowupError,
    PicardDivergenceError,
    TimeStepUnderflowError,
)
from .lame import LameProblem, check_ellipticity, solve_momentum
from .operators import gradient, require_finite
from .transport import (
    advect_deformation,
    advect_density,
    compose_displacement,
    propagator,
    trace_departure_points,
)

log = logging.getLogger(__name__)

CHANGE_FLOOR = 1e-14


@dataclass(frozen=True, eq=False)
class State:
    t: float
    rho: np.ndarray
    u: np.ndarray
    F: np.ndarray
    grid: object = field(repr=False, compare=False)

    def validate(self):
        g = self.grid
        if self.rho.shape != g.shape or self.u.shape != (g.dim,) + g.shape or self.F.shape != (g.dim, g.dim) + g.shape:
            raise ValueError("state fields do not share the grid")
        check_positive_density(self.rho)
        for name in ("rho", "u", "F"):
            require_finite(getattr(self, name), name)
        return self


@dataclass(frozen=True)
class Physics:
    mu: float = 1.0
    lam: float = 0.0
    law: PressureLaw = PressureLaw()

    def __post_init__(self):
        problems = check_ellipticity(self.mu, self.lam)
        if problems:
            raise ValueError("; ".join(problems))


@dataclass(frozen=True)
class StepConfig:
    dt: float = 0.01
    picard_tol: float = 1e-8
    max_picard: int = 50
    relaxation: float = 1.0
    dt_min: float = 1e-8
    lame_tol: float = 1e-10
    lame_max_iter: int = 500
    preconditioner: str = "fft_constant_coefficient"
    ball_radius_guard: Optional[float] = None
    monotone_density: bool = True
    propagator: str = "taylor2"
    max_halvings: int = 10
    workers: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt > 0 violated (dt = {self.dt})")
        if not self.dt_min <= self.dt:
            raise ValueError(f"dt_min ≤ dt violated ({self.dt_min} > {self.dt})")
        if not self.picard_tol > 0:
            raise ValueError("picard_tol > 0 violated")
        if not 0 < self.relaxation <= 1:
            raise ValueError(f"relaxation must lie in (0, 1], got {self.relaxation}")


@dataclass
class PicardTrace:
    changes: list = field(default_factory=list)
    converged: bool = False
    lame_iterations: list = field(default_factory=list)
    lame_residuals: list = field(default_factory=list)
    departure: object = field(default=None, repr=False)

    @property
    def iterations(self):
        return len(self.changes)

    def decay_ratio(self, skip=1):
        """Geometric mean ratio of successive changes, ignoring the first
        ``skip`` entries (the first change is measured against u^n)."""
        c = [x for x in self.changes[skip:] if x > 0]
        if len(c) < 2:
            return 0.0
        return (c[-1] / c[0]) ** (1.0 / (len(c) - 1))


def convective_term(grid, v):
    """(v . grad) v, component i = v_j d_j v_i."""
    return np.einsum("ij...,j...->i...", gradient(grid, v), v)


def assemble_momentum_rhs(grid, rho, v, F, law):
    """-rho (v . grad) v - grad P(rho) + div(rho F F^T)."""
    P = pressure(rho, law)
    return -rho * convective_term(grid, v) - gradient(grid, P) + cauchy_elastic_source(grid, rho, F)


def _norm(a):
    return math.sqrt(float(np.sum(a * a)))


def picard_step(state, cfg, physics, forcing=None):
    """Advance ``state`` by ``cfg.dt``.

    ``forcing(points, t) -> (g_rho, g_u, g_F)`` optionally injects source
    terms evaluated at flat node lists (used by manufactured solutions).
    Returns the new state and the PicardTrace.
    """
    grid = state.grid
    dt = cfg.dt
    t_new = state.t + dt
    nodes = grid.points() if forcing is not None else None
    if forcing is not None:
        g_rho_new, g_u_new, g_F_new = forcing(nodes, t_new)
        g_u_new = g_u_new.reshape((grid.dim,) + grid.shape)

    def transport(v):
        dp = trace_departure_points(grid, v, dt)
        src_rho = src_F = None
        if forcing is not None:
            # trapezoid along the characteristic, weighted by the propagator
            g_rho_old, _, g_F_old = forcing(dp.feet, state.t)
            src_rho = 0.5 * (g_rho_old * np.exp(-dt * dp.divv_mid) + g_rho_new)
            E = propagator(dp, dt, cfg.propagator)
            src_F = 0.5 * (np.einsum("ik...,kj...->ij...", E, g_F_old) + g_F_new)
        rho = advect_density(state.rho, dp, monotone=cfg.monotone_density, source=src_rho)
        F = advect_deformation(state.F, dp, kind=cfg.propagator, source=src_F)
        return dp, rho, F

    trace = PicardTrace()
    v = state.u
    for _ in range(cfg.max_picard):
        _, rho_k, F_k = transport(v)
        rhs = assemble_momentum_rhs(grid, rho_k, v, F_k, physics.law)
        if forcing is not None:
            rhs = rhs + g_u_new
        problem = LameProblem(grid, rho_k, physics.mu, physics.lam, dt, rhs, state.u)
        u_new, stats = solve_momentum(
            problem,
            tol=cfg.lame_tol,
            max_iter=cfg.lame_max_iter,
            preconditioner=cfg.preconditioner,
            x0=v,
            workers=cfg.workers,
        )
        trace.lame_iterations.append(stats.iterations)
        trace.lame_residuals.append(stats.final_residual)
        v_next = u_new if cfg.relaxation == 1.0 else cfg.relaxation * u_new + (1 - cfg.relaxation) * v
        change = _norm(v_next - v) / max(_norm(v), CHANGE_FLOOR)
        trace.changes.append(change)
        if not math.isfinite(change):
            raise PicardDivergenceError(f"Picard iterate became non-finite at t = {state.t:.6g}", trace)
        if cfg.ball_radius_guard is not None:
            vmax = float(np.max(np.abs(v_next)))
            if vmax > cfg.ball_radius_guard:
                raise NormBlowupError(
                    f"|v|_inf = {vmax:.6g} left the ball of radius {cfg.ball_radius_guard:g} at t = {state.t:.6g}",
                    trace,
                )
        v = v_next
        if change <= cfg.picard_tol:
            trace.converged = True
            break
    if not trace.converged:
        raise PicardDivergenceError(
            f"Picard iteration did not converge in {cfg.max_picard} iterations at t = {state.t:.6g} "
            f"(last change {trace.changes[-1]:.3e})",
            trace,
        )
    dp, rho, F = transport(v)
    trace.departure = dp
    return State(t_new, rho, v, F, grid), trace


class CharacteristicMap:
    """Composed backward map x -> X0(x) to the initial time, stored as a
    periodic displacement field."""

    def __init__(self, grid):
        self.grid = grid
        self.displacement = grid.vector()

    def advance(self, dp):
        self.displacement = compose_displacement(self.displacement, dp)

    def feet(self):
        return self.grid.points() + self.displacement.reshape(self.grid.dim, -1).T


@dataclass
class StepRecord:
    t: float
    dt: float
    picard_iterations: int
    lame_iterations: int
    halvings: int


@dataclass
class SimulationResult:
    final: State
    steps: list
    reports: list
    dt_final: float

    @property
    def total_picard(self):
        return sum(s.picard_iterations for s in self.steps)

    @property
    def total_lame(self):
        return sum(s.lame_iterations for s in self.steps)


def run_simulation(
    initial,
    t_final,
    cfg,
    physics,
    monitors=None,
    forcing=None,
    on_step: Optional[Callable] = None,
):
    """Advance ``initial`` to ``t_final``.

    On Picard divergence (or a refused CFL trace) the step is retried with
    half the time step, at most ``cfg.max_halvings`` times per step; the
    reduced step is kept afterwards. ``monitors`` (a MonitorSuite) sees
    every accepted step; ``on_step(index, state)`` runs after it.
    """
    if not t_final > initial.t:
        raise ValueError(f"t_final must exceed the initial time {initial.t}")
    state = initial.validate()
    cmap = CharacteristicMap(state.grid)
    reports = []
    if monitors is not None:
        reports.append(monitors.start(state))
    steps = []
    dt = cfg.dt
    eps = 1e-12 * max(1.0, abs(t_final))
    index = 0
    while state.t < t_final - eps:
        halvings = 0
        while True:
            step_dt = min(dt, t_final - state.t)
            try:
                new, trace = picard_step(state, replace(cfg, dt=step_dt, dt_min=min(cfg.dt_min, step_dt)), physics, forcing)
                break
            except (PicardDivergenceError, CFLError) as exc:
                halvings += 1
                dt = 0.5 * dt
                log.warning("step at t=%.6g failed (%s); halving dt to %.3g", state.t, exc, dt)
                if halvings > cfg.max_halvings or dt < cfg.dt_min:
                    raise TimeStepUnderflowError(
                        f"time step fell to {dt:.3g} (dt_min {cfg.dt_min:.3g}, {halvings} halvings) at t = "
                        f"{state.t:.6g}: {exc}"
                    ) from exc
        index += 1
        cmap.advance(trace.departure)
        steps.append(StepRecord(new.t, step_dt, trace.iterations, sum(trace.lame_iterations), halvings))
        if monitors is not None:
            reports.append(monitors.record(new, trace, step_dt, cmap))
        state = new
        if on_step is not None:
            on_step(index, state)
    return SimulationResult(state, steps, reports, dt)


def advect_prescribed(initial, velocity, dt, steps, monotone=True, kind="taylor2", monitors=None):
    """Transport rho and F along a prescribed velocity, no momentum solve.

    ``velocity(t)`` returns the velocity field on the grid; step n uses its
    value at t_{n+1}, the same time level the coupled step uses. Returns the
    final state, the composed characteristic map and the monitor reports.
    """
    state = initial.validate()
    grid = state.grid
    cmap = CharacteristicMap(grid)
    reports = [monitors.start(state)] if monitors is not None else []
    for _ in range(steps):
        t_new = state.t + dt
        v = velocity(t_new)
        dp = trace_departure_points(grid, v, dt)
        rho = advect_density(state.rho, dp, monotone=monotone)
        F = advect_deformation(state.F, dp, kind=kind)
        cmap.advance(dp)
        state = State(t_new, rho, v, F, grid)
        if monitors is not None:
            trace = PicardTrace(changes=[0.0], converged=True, departure=dp)
            reports.append(monitors.record(state, trace, dt, cmap))
    return state, cmap, reports
