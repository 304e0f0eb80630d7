import numpy as np
import pytest

from viscoflow.grid import Grid


@pytest.fixture
def grid2():
    return Grid.cube(2, 32)


@pytest.fixture
def grid3():
    return Grid.cube(3, 16)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def band_limited(grid, rng, ncomp=(), kmax=3):
    """Random smooth periodic field with wavenumbers |k_a| <= kmax."""
    x = grid.coords()
    out = np.zeros(tuple(ncomp) + grid.shape)
    for idx in np.ndindex(*ncomp) if ncomp else [()]:
        acc = np.zeros(grid.shape)
        for _ in range(4):
            k = rng.integers(-kmax, kmax + 1, size=grid.dim)
            phase = rng.uniform(0, 2 * np.pi)
            amp = rng.normal()
            acc += amp * np.cos(np.tensordot(k, x, axes=1) + phase)
        out[idx] = acc
    return out


def spectral_derivative(grid, f, orders):
    """Exact derivative of band-limited data via FFT (test oracle only)."""
    fh = np.fft.fftn(f)
    mult = np.ones(grid.shape, dtype=complex)
    for a, m in enumerate(orders):
        if m == 0:
            continue
        k = 2 * np.pi * np.fft.fftfreq(grid.n[a], d=grid.h[a])
        shape = [1] * grid.dim
        shape[a] = -1
        mult = mult * (1j * k.reshape(shape)) ** m
    return np.real(np.fft.ifftn(fh * mult))
