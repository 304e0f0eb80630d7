import csv
import hashlib
import math

import numpy as np
import pytest

from viscoflow.constitutive import PressureLaw
from viscoflow.errors import InvariantViolation
from viscoflow.grid import Grid
from viscoflow.initial import (
    acoustic,
    compatible_deformation,
    equilibrium,
    incompatible_deformation,
)
from viscoflow.monitors import (
    MonitorCSV,
    MonitorReport,
    MonitorSettings,
    MonitorSuite,
    curl_defect,
    curl_growth_check,
    elastic_compatibility_divergence,
    energy_report,
    material_volume_defect,
    trapezoid,
)
from viscoflow.operators import gradient, integrate
from viscoflow.stepper import Physics, State, StepConfig, advect_prescribed, run_simulation

LAW = PressureLaw(1.0, 1.4)


def swirl(grid, amp=1.0):
    """Smooth compressible velocity with nonzero divergence and shear."""
    x = grid.coords()
    v = grid.vector()
    v[0] = amp * (0.5 * np.sin(x[0]) * np.cos(x[1]) + 0.3 * np.sin(x[1]))
    v[1] = amp * 0.4 * np.cos(x[0]) * np.sin(x[1])
    return lambda t: v


def state_hash(s):
    h = hashlib.sha256()
    for a in (s.rho, s.u, s.F):
        h.update(a.tobytes())
    h.update(repr(s.t).encode())
    return h.hexdigest()


# curl defect


@pytest.mark.parametrize("dim", [2, 3])
def test_curl_defect_constant_tensor_is_exactly_zero(dim, rng):
    g = Grid.cube(dim, 8)
    F = np.broadcast_to(rng.normal(size=(dim, dim) + (1,) * dim), (dim, dim) + g.shape).copy()
    field, m = curl_defect(g, F)
    assert m == 0.0
    assert field.shape == g.shape


def test_curl_defect_matches_index_loop_oracle(grid2):
    g = grid2
    x = g.coords()
    c = 1.0 + 0.5 * np.sin(x[0]) * np.cos(2 * x[1])
    F = g.identity_tensor() * c
    field, m = curl_defect(g, F)
    dF = gradient(g, F)
    d = g.dim
    oracle = np.zeros(g.shape)
    for i in range(d):
        for j in range(d):
            for k in range(d):
                lhs = sum(F[l, k] * dF[i, j, l] for l in range(d))
                rhs = sum(F[l, j] * dF[i, k, l] for l in range(d))
                oracle = np.maximum(oracle, np.abs(lhs - rhs))
    np.testing.assert_allclose(field, oracle, rtol=1e-14, atol=1e-15)
    # F = cI violates compatibility: defect is |c||grad c| up to stencil error
    dc = gradient(g, c)
    assert m == pytest.approx(float(np.max(np.abs(c) * np.max(np.abs(dc), axis=0))), rel=1e-12)
    assert m > 0.1


def test_curl_defect_under_flow_converges_at_second_order():
    defects = []
    for n in (16, 32, 64):
        g = Grid.cube(2, n)
        steps = n // 4
        s, _, _ = advect_prescribed(equilibrium(g), swirl(g), 0.5 / steps, steps)
        defects.append(curl_defect(g, s.F)[1])
    ratios = [a / b for a, b in zip(defects, defects[1:])]
    assert all(r >= 3.5 for r in ratios), (defects, ratios)


def test_trapezoid_matches_linear_integral():
    t = np.linspace(0, 2, 11)
    assert trapezoid(t, 3 * t + 1) == pytest.approx(8.0, rel=1e-14)
    assert trapezoid([0.0], [5.0]) == 0.0


def test_curl_growth_check_trivial_cases():
    assert curl_growth_check([0, 1, 2], [3.0, 1.0, 4.0], 0.0, 1e-3, 1e-2).passed
    r = curl_growth_check([0, 1], [0.0, 0.0], 0.5, 0.51, 0.01)
    assert r.passed and r.slack == pytest.approx(0.0, abs=1e-15)
    assert not curl_growth_check([0, 1], [0.0, 0.0], 0.5, 0.52, 0.01).passed
    with pytest.raises(ValueError):
        curl_growth_check([0, 1], [-1.0, 0.0], 0.5, 0.5, 0.0)


def test_curl_growth_bound_holds_for_incompatible_data():
    g = Grid.cube(2, 32)
    suite = MonitorSuite(g, LAW)
    _, _, reports = advect_prescribed(incompatible_deformation(g), swirl(g), 0.01, 100, monitors=suite)
    assert reports[0].curl_defect_max > 0.1
    for r in reports:
        assert r.checks["curl_growth"].passed, (r.t, r.curl_defect_max, r.curl_bound)
        assert r.curl_defect_max <= r.curl_bound + suite.curl_allowance


# div(rho F^T) and material conservation


def test_compatibility_divergence_trivial(grid2):
    assert elastic_compatibility_divergence(grid2, grid2.scalar(1.0), grid2.identity_tensor()) == 0.0


@pytest.mark.parametrize("dim", [2, 3])
def test_compatible_data_has_fourth_order_small_divergence(dim):
    norms = []
    for n in (16, 32):
        g = Grid.cube(dim, n)
        s = compatible_deformation(g, 0.2)
        norms.append(elastic_compatibility_divergence(g, s.rho, s.F))
    assert norms[0] / norms[1] > 12.0, norms  # 2^4 = 16 asymptotically
    # the data are genuinely non-trivial: rho F^T itself is O(1) nonconstant
    assert float(np.ptp(s.rho)) > 0.1


def test_compatible_data_satisfies_unit_material_volume(grid3):
    s = compatible_deformation(grid3, 0.2)
    from viscoflow.monitors import determinant

    np.testing.assert_allclose(s.rho * determinant(grid3, s.F), 1.0, atol=1e-13)


def test_compatibility_divergence_persists_at_second_order():
    norms = []
    for n in (32, 64, 128):
        g = Grid.cube(2, n)
        steps = n // 4
        s, _, _ = advect_prescribed(compatible_deformation(g, 0.2), swirl(g), 0.5 / steps, steps)
        norms.append(elastic_compatibility_divergence(g, s.rho, s.F))
    ratios = [a / b for a, b in zip(norms, norms[1:])]
    assert all(3.5 <= r <= 5.0 for r in ratios), (norms, ratios)


def test_volume_defect_zero_at_rest(grid2):
    s0 = equilibrium(grid2)
    s, cmap, _ = advect_prescribed(s0, lambda t: grid2.vector(), 0.1, 3)
    assert material_volume_defect(s, s0, cmap.feet()) == 0.0
    assert material_volume_defect(s, s0, None) is None


def test_volume_defect_one_step_is_second_order_in_dt():
    # fine grid and plain cubic sampling so the time error dominates
    g = Grid.cube(2, 256)
    s0 = compatible_deformation(g, 0.2)
    defects = []
    dts = (0.16, 0.08, 0.04)
    for dt in dts:
        s, cmap, _ = advect_prescribed(s0, swirl(g), dt, 1, monotone=False)
        defects.append(material_volume_defect(s, s0, cmap.feet()))
    assert all(a / b > 3.5 for a, b in zip(defects, defects[1:])), defects
    assert all(d <= 0.01 * dt * dt for d, dt in zip(defects, dts)), defects


def test_volume_defect_refinement_order_two():
    defects = []
    for n in (32, 64, 128):
        g = Grid.cube(2, n)
        steps = n // 4
        s0 = compatible_deformation(g, 0.2)
        s, cmap, _ = advect_prescribed(s0, swirl(g), 0.5 / steps, steps)
        defects.append(material_volume_defect(s, s0, cmap.feet()))
    ratios = [a / b for a, b in zip(defects, defects[1:])]
    assert all(r >= 3.5 for r in ratios), (defects, ratios)


def test_mass_drift_shrinks_at_scheme_order():
    drifts = []
    for n in (32, 64, 128):
        g = Grid.cube(2, n)
        steps = n // 4
        s0 = compatible_deformation(g, 0.2)
        s, _, _ = advect_prescribed(s0, swirl(g), 0.5 / steps, steps, monotone=False)
        drifts.append(abs(integrate(g, s.rho) - integrate(g, s0.rho)))
    ratios = [a / b for a, b in zip(drifts, drifts[1:])]
    assert all(r >= 3.0 for r in ratios), (drifts, ratios)


# envelopes and F norm


def test_envelopes_reduce_to_initial_range_at_rest(grid2):
    s0 = acoustic(grid2, 0.1)
    suite = MonitorSuite(grid2, LAW)
    _, _, reports = advect_prescribed(s0, lambda t: grid2.vector(), 0.1, 5, monitors=suite)
    for r in reports:
        assert r.envelope_lo == s0.rho.min() and r.envelope_hi == s0.rho.max()
        assert r.checks["envelope_lo"].passed and r.checks["envelope_hi"].passed


def test_envelopes_hold_with_zero_allowance_in_compression():
    g = Grid.cube(2, 32)
    x = g.coords()
    s0 = acoustic(g, 0.2)
    u = g.vector()
    u[0] = -0.5 * np.sin(x[0])
    s0 = State(0.0, s0.rho, u, s0.F, g)
    suite = MonitorSuite(g, LAW, MonitorSettings(envelope_allowance=0.0))
    res = run_simulation(s0, 0.5, StepConfig(dt=0.02), Physics(0.2, 0.0, LAW), monitors=suite)
    assert res.reports[-1].rho_max > s0.rho.max()  # the flow compresses
    for r in res.reports:
        assert r.envelope_lo <= r.rho_min and r.rho_max <= r.envelope_hi
        assert not r.failed_checks


def test_f_norm_bound_holds_over_hundred_steps():
    g = Grid.cube(2, 32)
    suite = MonitorSuite(g, LAW)
    _, _, reports = advect_prescribed(compatible_deformation(g, 0.2), swirl(g), 0.01, 100, monitors=suite)
    for r in reports:
        assert r.F_norm_q <= r.F_norm_bound
        assert r.checks["F_norm"].passed


# energy


@pytest.mark.parametrize("dim", [2, 3])
def test_energy_of_rest_state(dim):
    g = Grid.cube(dim, 8)
    e = energy_report(equilibrium(g), LAW)
    assert e.kinetic == 0.0 and e.grad_u_L2 == 0.0
    assert e.elastic == pytest.approx(0.5 * dim * g.volume, rel=1e-14)
    assert e.potential == pytest.approx(g.volume / 0.4, rel=1e-14)


@pytest.mark.parametrize("dim", [2, 3])
def test_kinetic_energy_closed_form(dim):
    g = Grid.cube(dim, 16)
    x = g.coords()
    u = g.vector()
    u[0] = np.sin(x[0])
    e = energy_report(State(0.0, g.scalar(1.0), u, g.identity_tensor(), g), LAW)
    assert e.kinetic == pytest.approx(0.5 * math.pi * (2 * math.pi) ** (dim - 1), rel=1e-13)
    # the stencil maps sin x1 to sigma cos x1 with sigma its Fourier symbol
    h = g.h[0]
    sigma = (8 * math.sin(h) - math.sin(2 * h)) / (6 * h)
    assert e.grad_u_L2 == pytest.approx(sigma**2 * math.pi * (2 * math.pi) ** (dim - 1), rel=1e-13)


def test_isothermal_potential_uses_log_branch(grid2):
    law = PressureLaw(2.0, 1.0)
    s = State(0.0, grid2.scalar(math.e), grid2.vector(), grid2.identity_tensor(), grid2)
    assert energy_report(s, law).potential == pytest.approx(2.0 * math.e * grid2.volume, rel=1e-14)


def test_total_energy_non_increasing_in_small_amplitude_run():
    g = Grid.cube(2, 32)
    x = g.coords()
    s0 = acoustic(g, 0.05)
    u = g.vector()
    u[1] = 0.05 * np.sin(x[0])
    s0 = State(0.0, s0.rho, u, s0.F, g)
    dt = 0.02
    suite = MonitorSuite(g, LAW)
    res = run_simulation(s0, 1.0, StepConfig(dt=dt), Physics(0.1, 0.0, LAW), monitors=suite)
    totals = [r.kinetic + r.elastic + r.potential for r in res.reports]
    h = g.h[0]
    for r, a, b in zip(res.reports[1:], totals, totals[1:]):
        assert b - a <= (dt + h * h) * r.t * 1e-3 * totals[0]
    assert totals[-1] < totals[0]


# suite plumbing


def test_monitors_are_read_only(grid2):
    s0 = compatible_deformation(grid2, 0.2, velocity=0.3)
    before = state_hash(s0)
    suite = MonitorSuite(grid2, LAW)
    suite.start(s0)
    state, cmap, reports = advect_prescribed(s0, swirl(grid2), 0.01, 3, monitors=suite)
    after_state = state_hash(state)
    from viscoflow.stepper import PicardTrace
    from viscoflow.transport import trace_departure_points

    trace = PicardTrace(changes=[0.0], departure=trace_departure_points(grid2, state.u, 0.01))
    suite.record(state, trace, 0.01, cmap)
    assert state_hash(s0) == before
    assert state_hash(state) == after_state


def test_csv_rows_have_fixed_columns_and_full_precision(tmp_path, grid2):
    path = tmp_path / "monitor.csv"
    with MonitorCSV(path) as out:
        suite = MonitorSuite(grid2, LAW, csv=out)
        advect_prescribed(acoustic(grid2, 0.1), swirl(grid2, 0.2), 0.05, 4, monitors=suite)
    rows = list(csv.reader(open(path)))
    assert rows[0] == MonitorReport.columns()
    assert rows[0][:17] == [
        "t", "mass", "curl_defect_max", "curl_bound", "div_rhoFt_norm", "volume_defect",
        "rho_min", "rho_max", "envelope_lo", "envelope_hi", "F_norm_q", "F_norm_bound",
        "kinetic", "elastic", "grad_u_L2", "picard_iters", "lame_iters",
    ]
    assert len(rows) == 6
    mass = [float(r[1]) for r in rows[1:]]
    assert mass[0] == integrate(grid2, acoustic(grid2, 0.1).rho)  # 17 digits round-trip
    assert all(math.isfinite(float(v)) for r in rows[1:] for v in r[:17])


def test_fatal_settings_raise_after_writing_row(tmp_path, grid2):
    path = tmp_path / "m.csv"
    with MonitorCSV(path) as out:
        suite = MonitorSuite(grid2, LAW, MonitorSettings(curl_allowance=-1.0, fatal=True), csv=out)
        with pytest.raises(InvariantViolation) as err:
            suite.start(equilibrium(grid2))
    assert err.value.exit_code == 4
    rows = list(csv.reader(open(path)))
    assert len(rows) == 2 and "curl_growth" in rows[1][-1]
