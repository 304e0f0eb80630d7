"""Timing of the three kernels that dominate a step."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .grid import Grid
from .lame import LameProblem, solve_momentum
from .operators import gradient, laplacian
from .transport import advect_deformation, advect_density, trace_departure_points


@dataclass(frozen=True)
class BenchRow:
    kernel: str
    n: int
    cells: int
    seconds: float
    iterations: int = 0

    @property
    def cells_per_second(self):
        return self.cells / self.seconds if self.seconds > 0 else float("inf")


def _timed(fn, repeats):
    """Best of ``repeats`` wall-clock runs after one untimed warm-up call;
    the minimum is the least noise-sensitive estimate of the kernel's cost."""
    out = fn()
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - start)
    return min(times), out


def bench_grid(dim, n, repeats=3, workers=1, dt=0.1):
    grid = Grid.cube(dim, n)
    x = grid.coords()
    rho = 1.0 + 0.5 * np.sin(x[0])
    v = grid.vector()
    v[0] = 0.3 * np.sin(x[1 % dim])
    v[1] = 0.2 * np.cos(x[0])
    F = grid.identity_tensor()
    rows = []

    secs, _ = _timed(lambda: (gradient(grid, rho), laplacian(grid, v)), repeats)
    rows.append(BenchRow("operators", n, grid.size, secs))

    def transport():
        dp = trace_departure_points(grid, v, dt)
        return advect_density(rho, dp), advect_deformation(F, dp)

    secs, _ = _timed(transport, repeats)
    rows.append(BenchRow("transport", n, grid.size, secs))

    rhs = grid.vector()
    for i in range(dim):
        rhs[i] = np.sin(x[i] + 2 * x[(i + 1) % dim]) + 0.5 * np.cos(3 * x[(i + 2) % dim])
    problem = LameProblem(grid, rho, 1.0, 0.0, dt, rhs, grid.vector())
    secs, (_, stats) = _timed(lambda: solve_momentum(problem, workers=workers), repeats)
    rows.append(BenchRow("lame", n, grid.size, secs, stats.iterations))
    return rows


def run_bench(dim, sizes, repeats=3, workers=1):
    rows = []
    for n in sizes:
        rows.extend(bench_grid(dim, n, repeats, workers))
    return rows


def time_ratios(rows, kernel="lame"):
    """Time ratio between consecutive sizes for one kernel."""
    sel = sorted((r for r in rows if r.kernel == kernel), key=lambda r: r.n)
    return [(a.n, b.n, b.seconds / a.seconds) for a, b in zip(sel, sel[1:])]


def format_table(rows):
    lines = [f"{'kernel':<10} {'n':>5} {'cells':>9} {'seconds':>10} {'Mcells/s':>9} {'iters':>6}"]
    for r in rows:
        lines.append(
            f"{r.kernel:<10} {r.n:>5} {r.cells:>9} {r.seconds:>10.4f} {r.cells_per_second / 1e6:>9.3f} {r.iterations:>6}"
        )
    return "\n".join(lines)
