"""Pressure law and Hookean hyperelastic closure."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import NonPositiveDensityError
from .operators import tensor_divergence


@dataclass(frozen=True)
class PressureLaw:
    """gamma-law pressure P(rho) = a * rho**gamma."""

    a: float = 1.0
    gamma: float = 1.4

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError(f"pressure amplitude must satisfy a > 0, got {self.a}")
        if not self.gamma >= 1:
            raise ValueError(f"pressure exponent must satisfy gamma >= 1, got {self.gamma}")

    def __call__(self, rho):
        if self.gamma == 1.0:
            return self.a * rho
        return self.a * np.power(rho, self.gamma)

    def derivative(self, rho):
        if self.gamma == 1.0:
            return self.a * np.ones_like(rho)
        return self.a * self.gamma * np.power(rho, self.gamma - 1.0)

    def second_derivative(self, rho):
        return self.a * self.gamma * (self.gamma - 1.0) * np.power(rho, self.gamma - 2.0)

    def potential(self, rho):
        """Pressure potential Pi with rho * Pi'(rho) - Pi(rho) = P(rho)."""
        if self.gamma == 1.0:
            return self.a * rho * np.log(rho)
        return self.a * np.power(rho, self.gamma) / (self.gamma - 1.0)


def check_positive_density(rho, name="rho"):
    rho = np.asarray(rho)
    bad = ~(rho > 0)
    if np.any(bad):
        cell = tuple(int(i) for i in np.argwhere(bad)[0])
        raise NonPositiveDensityError(f"{name} = {rho[cell]!r} is not positive at cell {cell}", cell=cell)


def pressure(rho, law):
    check_positive_density(rho)
    return law(rho)


def _half_frobenius_squared(F):
    return 0.5 * float(np.sum(np.square(F)))


@dataclass(frozen=True)
class EnergyDensity:
    """Stored energy W(F) of a single d x d matrix.

    ``stress`` is an optional analytic dW/dF; without it ``piola_stress``
    differentiates ``evaluator`` numerically.
    """

    evaluator: Callable[[np.ndarray], float] = _half_frobenius_squared
    stress: Optional[Callable[[np.ndarray], np.ndarray]] = None

    @classmethod
    def hookean(cls):
        return cls(_half_frobenius_squared, lambda F: np.array(F, dtype=np.float64, copy=True))

    def __call__(self, F):
        return self.evaluator(np.asarray(F, dtype=np.float64))


HOOKEAN = EnergyDensity.hookean()


def piola_stress(F, W=HOOKEAN):
    """S_ij = dW/dF_ij for one matrix.

    The numeric path uses central differences with step 1e-6 * (1 + |F|).
    """
    F = np.asarray(F, dtype=np.float64)
    if W.stress is not None:
        return W.stress(F)
    step = 1e-6 * (1.0 + np.linalg.norm(F))
    S = np.empty_like(F)
    for idx in np.ndindex(F.shape):
        Fp = F.copy()
        Fm = F.copy()
        Fp[idx] += step
        Fm[idx] -= step
        S[idx] = (W(Fp) - W(Fm)) / (2.0 * step)
    return S


def left_cauchy_green(F):
    """Pointwise F F^T of a tensor field."""
    return np.einsum("ik...,jk...->ij...", F, F)


def cauchy_elastic_source(grid, rho, F):
    """div(rho F F^T), the elastic force in the momentum balance."""
    return tensor_divergence(grid, rho * left_cauchy_green(F))


def elastic_energy_density(F):
    """W(F) = |F|^2 / 2 at every node."""
    return 0.5 * np.sum(F * F, axis=(0, 1))
