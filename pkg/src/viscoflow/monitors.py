"""Diagnostics for the identities and a-priori bounds of the system.

Monitors only read state. Every bound is evaluated from its closed form
with discretely accumulated time integrals, and compared with an explicit
allowance from the settings.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

import numpy as np

from .errors import InvariantViolation
from .interpolation import sample_at
from .operators import (
    discrete_norm,
    gradient,
    integrate,
    pointwise_magnitude,
    tensor_divergence,
    w2q_norm,
)


def curl_defect(grid, F):
    """Pointwise max over (i, j, k) of |F_lk d_l F_ij - F_lj d_l F_ik|.

    Returns the defect field and its maximum.
    """
    dF = gradient(grid, F)  # [i, j, l] = d_l F_ij
    A = np.einsum("lk...,ijl...->ijk...", F, dF)
    D = np.abs(A - np.swapaxes(A, 1, 2))
    field_ = np.max(D.reshape((-1,) + grid.shape), axis=0)
    return field_, float(np.max(field_))


def trapezoid(times, values):
    t = np.asarray(times, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    if t.size < 2:
        return 0.0
    return float(np.sum(0.5 * (v[1:] + v[:-1]) * np.diff(t)))


@dataclass(frozen=True)
class CheckResult:
    passed: bool
    slack: float  # bound + allowance - measured; negative on failure


def curl_growth_check(times, grad_u_inf, M0, Mt, allowance):
    """Mt <= M0 exp(2 int |grad u|_inf) + allowance."""
    if np.any(np.asarray(grad_u_inf) < 0):
        raise ValueError("|grad u|_inf history must be nonnegative")
    bound = M0 * math.exp(2.0 * trapezoid(times, grad_u_inf))
    slack = bound + allowance - Mt
    return CheckResult(slack >= 0, slack)


def elastic_compatibility_divergence(grid, rho, F):
    """L2 norm of div(rho F^T), (div(rho F^T))_k = d_j (rho F_jk)."""
    return discrete_norm(grid, tensor_divergence(grid, rho * np.swapaxes(F, 0, 1)), "L2")


def determinant(grid, F):
    d = grid.dim
    return np.linalg.det(np.moveaxis(F.reshape(d, d, -1), -1, 0)).reshape(grid.shape)


def material_volume_defect(state, initial, feet):
    """L_inf of rho det F at t minus rho0 det F0 at the composed feet X0(x).

    Returns None when the composed feet are not available.
    """
    if feet is None:
        return None
    grid = state.grid
    J = state.rho * determinant(grid, state.F)
    J0 = initial.rho * determinant(grid, initial.F)
    return float(np.max(np.abs(J.ravel() - sample_at(grid, J0, feet))))


@dataclass(frozen=True)
class EnergyReport:
    kinetic: float
    elastic: float
    grad_u_L2: float  # squared L2 norm of grad u
    potential: float

    @property
    def total(self):
        return self.kinetic + self.elastic + self.potential


def energy_report(state, law):
    grid = state.grid
    rho = state.rho
    speed2 = np.sum(state.u * state.u, axis=0)
    F2 = np.sum(state.F * state.F, axis=(0, 1))
    gu = gradient(grid, state.u)
    return EnergyReport(
        kinetic=0.5 * integrate(grid, rho * speed2),
        elastic=0.5 * integrate(grid, rho * F2),
        grad_u_L2=integrate(grid, np.sum(gu * gu, axis=(0, 1))),
        potential=integrate(grid, law.potential(rho)),
    )


@dataclass
class Accumulators:
    """Running integrals and initial-data constants the bounds need."""

    alpha: float
    beta: float
    M0: float
    F0_w1q: float
    times: list = field(default_factory=list)
    grad_u_inf: list = field(default_factory=list)
    velocity_w2q: list = field(default_factory=list)
    envelope_lo: float = 0.0
    envelope_hi: float = 0.0
    int_divv_inf: float = 0.0

    @property
    def int_grad_u_inf(self):
        return trapezoid(self.times, self.grad_u_inf)

    @property
    def int_velocity_w2q(self):
        return trapezoid(self.times, self.velocity_w2q)

    def f_norm_bound(self):
        A = self.int_velocity_w2q
        return (self.F0_w1q + A) * math.exp(A)


def envelope_and_norm_checks(state, acc, q=4.0, envelope_allowance=0.0, fnorm_allowance=0.0):
    """Density envelopes and the L^q bound on F against the accumulators."""
    grid = state.grid
    rho_min, rho_max = float(state.rho.min()), float(state.rho.max())
    fq = discrete_norm(grid, state.F, "Lq", q)
    fb = acc.f_norm_bound()
    lo = rho_min - (acc.envelope_lo - envelope_allowance)
    hi = acc.envelope_hi + envelope_allowance - rho_max
    fs = fb + fnorm_allowance - fq
    return {
        "envelope_lo": CheckResult(lo >= 0, lo),
        "envelope_hi": CheckResult(hi >= 0, hi),
        "F_norm": CheckResult(fs >= 0, fs),
    }


@dataclass
class MonitorReport:
    t: float
    mass: float
    curl_defect_max: float
    curl_bound: float
    div_rhoFt_norm: float
    volume_defect: Optional[float]
    rho_min: float
    rho_max: float
    envelope_lo: float
    envelope_hi: float
    F_norm_q: float
    F_norm_bound: float
    kinetic: float
    elastic: float
    grad_u_L2: float
    picard_iters: int
    lame_iters: int
    potential: float = 0.0
    dt: float = 0.0
    lame_residual: float = 0.0
    failed_checks: str = ""
    checks: dict = field(default_factory=dict, repr=False)

    @classmethod
    def columns(cls):
        return [f.name for f in fields(cls) if f.name != "checks"]

    def row(self):
        out = []
        for name in self.columns():
            value = getattr(self, name)
            if isinstance(value, str):
                out.append(value)
            elif isinstance(value, (int, np.integer)) and not isinstance(value, bool):
                out.append(str(int(value)))
            elif value is None:
                out.append("nan")
            else:
                out.append(f"{float(value):.17g}")
        return out

    def as_dict(self):
        d = asdict(self)
        d.pop("checks")
        return d


@dataclass(frozen=True)
class MonitorSettings:
    q: float = 4.0
    curl_allowance: Optional[float] = None  # default 10 h^2
    envelope_allowance: float = 0.0
    fnorm_allowance: float = 0.0
    fatal: bool = False


class MonitorCSV:
    """Append-only CSV; each row is flushed so a crash leaves a valid prefix."""

    def __init__(self, target):
        """``target`` is a path, or an open text stream the caller owns."""
        self._owned = not hasattr(target, "write")
        self.path = target if self._owned else None
        self._fh = open(target, "w", encoding="utf-8", newline="\n") if self._owned else target
        self._fh.write(",".join(MonitorReport.columns()) + "\n")
        self._fh.flush()

    def write(self, report):
        self._fh.write(",".join(report.row()) + "\n")
        self._fh.flush()

    def close(self):
        if self._owned:
            self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class MonitorSuite:
    def __init__(self, grid, law, settings=MonitorSettings(), csv=None):
        self.grid = grid
        self.law = law
        self.settings = settings
        self.csv = csv
        self.initial = None
        self.acc = None
        h = max(grid.h)
        self.curl_allowance = 10.0 * h * h if settings.curl_allowance is None else settings.curl_allowance

    def _velocity_terms(self, u):
        gu = pointwise_magnitude(self.grid, gradient(self.grid, u))
        return float(np.max(gu)), w2q_norm(self.grid, u, self.settings.q)

    def start(self, state):
        grid = self.grid
        self.initial = state
        _, M0 = curl_defect(grid, state.F)
        alpha, beta = float(state.rho.min()), float(state.rho.max())
        self.acc = Accumulators(
            alpha=alpha,
            beta=beta,
            M0=M0,
            F0_w1q=discrete_norm(grid, state.F, "W1q", self.settings.q),
            envelope_lo=alpha,
            envelope_hi=beta,
        )
        g, w = self._velocity_terms(state.u)
        self.acc.times.append(state.t)
        self.acc.grad_u_inf.append(g)
        self.acc.velocity_w2q.append(w)
        return self._report(state, None, 0.0, feet=self.grid.points())

    def record(self, state, trace, dt, cmap=None):
        """Update the accumulators with one accepted step and report."""
        dp = trace.departure
        # the envelope factor uses the midpoint divergence the transport
        # actually applied, so the discrete envelope is exact
        d = dp.divv_inf
        self.acc.int_divv_inf += dt * d
        self.acc.envelope_lo *= math.exp(-dt * d)
        self.acc.envelope_hi *= math.exp(dt * d)
        g, w = self._velocity_terms(state.u)
        self.acc.times.append(state.t)
        self.acc.grad_u_inf.append(g)
        self.acc.velocity_w2q.append(w)
        return self._report(state, trace, dt, feet=None if cmap is None else cmap.feet())

    def _report(self, state, trace, dt, feet):
        grid, acc, s = self.grid, self.acc, self.settings
        _, Mt = curl_defect(grid, state.F)
        energy = energy_report(state, self.law)
        checks = envelope_and_norm_checks(state, acc, s.q, s.envelope_allowance, s.fnorm_allowance)
        checks["curl_growth"] = curl_growth_check(acc.times, acc.grad_u_inf, acc.M0, Mt, self.curl_allowance)
        failed = [name for name, c in checks.items() if not c.passed]
        report = MonitorReport(
            t=state.t,
            mass=integrate(grid, state.rho),
            curl_defect_max=Mt,
            curl_bound=acc.M0 * math.exp(2.0 * acc.int_grad_u_inf),
            div_rhoFt_norm=elastic_compatibility_divergence(grid, state.rho, state.F),
            volume_defect=material_volume_defect(state, self.initial, feet),
            rho_min=float(state.rho.min()),
            rho_max=float(state.rho.max()),
            envelope_lo=acc.envelope_lo,
            envelope_hi=acc.envelope_hi,
            F_norm_q=discrete_norm(grid, state.F, "Lq", s.q),
            F_norm_bound=acc.f_norm_bound(),
            kinetic=energy.kinetic,
            elastic=energy.elastic,
            grad_u_L2=energy.grad_u_L2,
            picard_iters=0 if trace is None else trace.iterations,
            lame_iters=0 if trace is None else int(sum(trace.lame_iterations)),
            potential=energy.potential,
            dt=dt,
            lame_residual=0.0 if trace is None or not trace.lame_residuals else max(trace.lame_residuals),
            failed_checks=";".join(failed),
            checks=checks,
        )
        if self.csv is not None:
            self.csv.write(report)
        if failed and s.fatal:
            raise InvariantViolation(f"invariant check(s) failed at t = {state.t:.6g}: {', '.join(failed)}")
        return report
