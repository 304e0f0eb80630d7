import numpy as np
import pytest

from viscoflow.errors import LameSolveError, NonPositiveDensityError
from viscoflow.grid import Grid
from viscoflow.lame import (
    FFTPreconditioner,
    LameProblem,
    apply_lame_operator,
    solve_momentum,
)

MU, LAM, DT = 1.0, 0.5, 0.1


def problem(g, rho=None, rhs=None, mu=MU, lam=LAM, dt=DT):
    rho = g.scalar(1.0) if rho is None else rho
    rhs = g.vector() if rhs is None else rhs
    return LameProblem(g, rho, mu, lam, dt, rhs, g.vector())


def inner(a, b):
    return float(np.sum(a * b))


class TestOperator:
    def test_zero(self, grid3):
        assert np.all(apply_lame_operator(problem(grid3), grid3.vector()) == 0.0)

    def test_eigenfunction(self):
        errs = []
        for n in (16, 32, 64):
            g = Grid.cube(3, n) if n < 64 else Grid.cube(2, n)
            u = g.vector()
            u[0] = np.sin(g.coords()[0])
            out = apply_lame_operator(problem(g), u)
            expected = (1 / DT + 2 * MU + LAM) * u
            errs.append(np.max(np.abs(out - expected)))
        rates = [np.log2(a / b) for a, b in zip(errs, errs[1:])]
        assert all(3.5 <= r <= 4.5 for r in rates), rates

    def test_symmetric_positive_definite_random_pairs(self):
        g = Grid.cube(2, 16)
        rng = np.random.default_rng(1)
        rho = rng.uniform(0.5, 2.0, size=g.shape)
        # lambda < -mu still satisfies 3 mu + 2 lambda > 0
        for lam in (LAM, -1.4):
            p = problem(g, rho=rho, lam=lam)
            worst = 0.0
            for _ in range(100):
                u = rng.normal(size=(2,) + g.shape)
                w = rng.normal(size=(2,) + g.shape)
                Au, Aw = apply_lame_operator(p, u), apply_lame_operator(p, w)
                a, b = inner(Au, w), inner(u, Aw)
                worst = max(worst, abs(a - b) / max(abs(a), abs(b)))
                assert inner(Au, u) > 0
            assert worst <= 1e-12

    def test_linear(self, grid2, rng):
        p = problem(grid2, rho=rng.uniform(0.5, 2, size=grid2.shape))
        u = rng.normal(size=(2,) + grid2.shape)
        w = rng.normal(size=(2,) + grid2.shape)
        lhs = apply_lame_operator(p, 2.0 * u - 3.0 * w)
        rhs = 2.0 * apply_lame_operator(p, u) - 3.0 * apply_lame_operator(p, w)
        assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-9)


class TestValidation:
    @pytest.mark.parametrize("mu,lam", [(0.0, 1.0), (-1.0, 1.0), (0.5, -1.0)])
    def test_ellipticity(self, grid2, mu, lam):
        with pytest.raises(ValueError, match="μ"):
            problem(grid2, mu=mu, lam=lam)

    def test_nonpositive_density(self, grid2):
        rho = grid2.scalar(1.0)
        rho[0, 3] = 0.0
        with pytest.raises(NonPositiveDensityError):
            problem(grid2, rho=rho)

    def test_bad_tolerance(self, grid2):
        with pytest.raises(ValueError):
            solve_momentum(problem(grid2), tol=0.0)
        with pytest.raises(ValueError):
            solve_momentum(problem(grid2), max_iter=0)


class TestSolve:
    def test_zero_rhs(self, grid3):
        u, stats = solve_momentum(problem(grid3))
        assert np.all(u == 0.0)
        assert stats.iterations <= 1

    @pytest.mark.parametrize("pc", ["none", "jacobi", "fft_constant_coefficient"])
    def test_manufactured_recovery(self, pc):
        g = Grid.cube(2, 32)
        x = g.coords()
        ustar = g.vector()
        ustar[0] = np.sin(x[0]) * np.cos(x[1])
        p0 = problem(g)
        b = apply_lame_operator(p0, ustar)
        p = problem(g, rhs=b)
        u, stats = solve_momentum(p, tol=1e-12, max_iter=1000, preconditioner=pc)
        assert stats.final_residual <= 1e-12
        # condition number of A is below 1e3 here; allow tol * cond
        assert np.max(np.abs(u - ustar)) <= 1e-12 * 1e3
        true_res = np.linalg.norm(apply_lame_operator(p, u) - b) / np.linalg.norm(b)
        assert true_res <= 1e-12

    def test_constant_density_one_iteration(self, grid3, rng):
        p = problem(grid3, rho=grid3.scalar(1.3), rhs=rng.normal(size=(3,) + grid3.shape))
        _, stats = solve_momentum(p, tol=1e-10)
        assert stats.iterations == 1

    def test_previous_velocity_enters_rhs(self, grid2, rng):
        uprev = rng.normal(size=(2,) + grid2.shape)
        p = LameProblem(grid2, grid2.scalar(1.0), MU, LAM, DT, grid2.vector(), uprev)
        u, _ = solve_momentum(p, tol=1e-12)
        assert np.allclose(apply_lame_operator(p, u), uprev / DT, atol=1e-9)

    def test_fft_preconditioning_beats_plain_cg(self):
        g = Grid.cube(3, 32)
        rho = 1 + 0.5 * np.sin(g.coords()[0])
        rhs = np.random.default_rng(0).normal(size=(3,) + g.shape)
        p = problem(g, rho=rho, rhs=rhs)
        _, fft = solve_momentum(p, tol=1e-10, preconditioner="fft_constant_coefficient")
        _, plain = solve_momentum(p, tol=1e-10, max_iter=2000, preconditioner="none")
        assert fft.iterations <= 30
        assert plain.iterations >= 3 * fft.iterations

    def test_mesh_independent_iterations(self):
        counts = []
        for n in (32, 64, 128):
            g = Grid.cube(2, n)
            rho = 1 + 0.5 * np.sin(g.coords()[0])
            rhs = np.random.default_rng(0).normal(size=(2,) + g.shape)
            counts.append(solve_momentum(problem(g, rho=rho, rhs=rhs), tol=1e-10)[1].iterations)
        assert all(b <= 1.5 * a for a, b in zip(counts, counts[1:])), counts

    def test_solution_linear_in_rhs(self, grid2, rng):
        rho = rng.uniform(0.5, 2, size=grid2.shape)
        b = rng.normal(size=(2,) + grid2.shape)
        u1, s1 = solve_momentum(problem(grid2, rho=rho, rhs=b), tol=1e-10)
        u2, s2 = solve_momentum(problem(grid2, rho=rho, rhs=4.0 * b), tol=1e-10)
        assert s1.iterations == s2.iterations
        assert np.allclose(u2, 4.0 * u1, rtol=1e-13, atol=1e-13 * np.max(np.abs(u2)))

    def test_deterministic(self, grid2, rng):
        rho = rng.uniform(0.5, 2, size=grid2.shape)
        b = rng.normal(size=(2,) + grid2.shape)
        u1, _ = solve_momentum(problem(grid2, rho=rho, rhs=b))
        u2, _ = solve_momentum(problem(grid2, rho=rho, rhs=b))
        assert np.array_equal(u1, u2)

    def test_nonconvergence_carries_best_iterate(self, grid2, rng):
        rho = rng.uniform(0.2, 5, size=grid2.shape)
        p = problem(grid2, rho=rho, rhs=rng.normal(size=(2,) + grid2.shape))
        with pytest.raises(LameSolveError) as info:
            solve_momentum(p, tol=1e-12, max_iter=2, preconditioner="none")
        assert info.value.best.shape == (2,) + grid2.shape
        assert len(info.value.history) == 3
        assert min(info.value.history) < info.value.history[0]

    def test_preconditioner_inverts_constant_operator(self, grid3, rng):
        p = problem(grid3, rho=grid3.scalar(0.8))
        r = rng.normal(size=(3,) + grid3.shape)
        M = FFTPreconditioner(grid3, 0.8, MU, LAM, DT)
        assert np.allclose(apply_lame_operator(p, M(r)), r, atol=1e-10)
