import math

import numpy as np
import pytest

from nsuq.mesh import GridSpec, ScalarField, VectorField, FluidState
from nsuq.solver import (
    ABORTED_LINF,
    COMPLETED,
    NO_CONVERGENCE,
    SchemeConfig,
    TravelingWaveCase,
    VacuumError,
    cfl_dt,
    gronwall_energy_bound,
    manufactured_convergence,
    scheme_residual,
    self_convergence,
    solve,
    step,
)
from conftest import make_record


CFG = SchemeConfig(cfl=0.4, T=0.1)


def test_scheme_config_validation():
    with pytest.raises(ValueError):
        SchemeConfig(cfl=0.0)
    with pytest.raises(ValueError):
        SchemeConfig(cfl=1.5)
    with pytest.raises(ValueError):
        SchemeConfig(T=-1.0)
    with pytest.raises(ValueError):
        SchemeConfig(picard_tol=0.0)


def test_cfl_dt_formula():
    # u = 0, rho = 1, a = 1, gamma = 2, n = 16, mu = eta = 0.01:
    # dt = cfl * min( dx / sqrt(2), dx^2 / (2 * 0.03) )
    data = make_record(rho_amp=0.0, mu=0.01, eta=0.01)
    grid = GridSpec(1, 16)
    state = data.initial_state(grid)
    dx = 1.0 / 16
    expected = min(dx / math.sqrt(2.0), dx**2 / (2 * 0.03))
    assert cfl_dt(state, data, grid, cfl=1.0) == pytest.approx(expected, rel=1e-14)
    assert cfl_dt(state, data, grid, cfl=0.25) == pytest.approx(0.25 * expected, rel=1e-14)
    # refining the grid at least halves the step
    fine = data.initial_state(GridSpec(1, 32))
    assert cfl_dt(fine, data, GridSpec(1, 32)) <= 0.5 * cfl_dt(state, data, grid) + 1e-15


def test_equilibrium_is_fixed_point():
    data = make_record(rho_amp=0.0)
    grid = GridSpec(1, 32)
    state = data.initial_state(grid)
    new = step(state, data, 1e-3, CFG)
    assert np.array_equal(new.rho.values, state.rho.values)
    assert np.array_equal(new.u.values, state.u.values)


def test_uniform_translation_preserved():
    data = make_record(rho_amp=0.0, u_base=0.7)
    grid = GridSpec(1, 32)
    report = solve(data, grid, SchemeConfig(cfl=0.4, T=0.05))
    final = report.trajectory.states[-1]
    assert report.status == COMPLETED
    assert np.abs(final.rho.values - 1.0).max() <= 1e-12
    assert np.abs(final.u.values - 0.7).max() <= 1e-12


def test_mass_conserved_every_step():
    data = make_record(rho_amp=0.1, u_amp=0.1)
    report = solve(data, GridSpec(1, 64), CFG)
    masses = np.array([s.rho.integral() for s in report.trajectory.states])
    assert np.abs(masses - masses[0]).max() <= 1e-13 * masses[0]


def test_scheme_residual_contract():
    data = make_record(rho_amp=0.1, u_amp=0.1)
    grid = GridSpec(1, 32)
    state = data.initial_state(grid)
    dt = cfl_dt(state, data, grid, CFG.cfl)
    new = step(state, data, dt, CFG)
    assert scheme_residual(data, (state, new), dt, CFG) <= CFG.picard_tol

    # perturbing the new density breaks the algebraic system
    bumped = FluidState(ScalarField(grid, new.rho.values + 0.1), new.u, new.time)
    assert scheme_residual(data, (state, bumped), dt, CFG) > CFG.picard_tol

    # an equilibrium pair has zero defect for any dt
    eq = make_record(rho_amp=0.0)
    s0 = eq.initial_state(grid)
    s1 = FluidState(s0.rho, s0.u, 0.37)
    assert scheme_residual(eq, (s0, s1), 0.37, CFG) == 0.0


def test_solve_equilibrium_energy_constant():
    data = make_record(rho_amp=0.0)
    report = solve(data, GridSpec(1, 16), CFG)
    assert report.status == COMPLETED
    e = report.energy_history
    assert np.abs(e - e[0]).max() <= 1e-12 * e[0]


@pytest.mark.parametrize("d,n", [(1, 64), (2, 16)])
def test_energy_nonincreasing_without_forcing(d, n):
    data = make_record(d=d, rho_amp=0.08, u_amp=0.1, mu=0.05, eta=0.01, gamma=1.4)
    report = solve(data, GridSpec(d, n), SchemeConfig(cfl=0.4, T=0.05))
    assert report.status == COMPLETED
    e = report.energy_history
    assert np.all(np.diff(e) <= 1e-10 * e[0])


def test_energy_below_gronwall_bound_with_forcing():
    case = TravelingWaveCase(amplitude=0.1, speed=0.5, mu=0.05)
    data = case.data_record()
    report = solve(data, GridSpec(1, 64), SchemeConfig(cfl=0.4, T=0.2))
    assert report.status == COMPLETED
    mass0 = report.trajectory.states[0].rho.integral()
    bound = gronwall_energy_bound(report.energy_history[0], mass0, data.g.sup_bound(),
                                  report.trajectory.times)
    assert np.all(report.energy_history <= bound + 1e-12)


def test_gronwall_bound_guard():
    with pytest.raises(ValueError):
        gronwall_energy_bound(1.0, 1.0, 10.0, np.array([0.0, 0.2]))


def test_linf_ceiling_abort_is_immediate():
    data = make_record(rho_amp=0.0)
    report = solve(data, GridSpec(1, 16), SchemeConfig(cfl=0.4, T=0.1, linf_ceiling=0.5))
    assert report.status == ABORTED_LINF
    assert report.steps == 0
    assert report.max_linf == 1.0


def test_no_convergence_status():
    data = make_record(rho_amp=0.1, u_amp=0.1)
    cfg = SchemeConfig(cfl=0.4, T=0.1, picard_max_iter=1, picard_tol=1e-14)
    report = solve(data, GridSpec(1, 32), cfg)
    assert report.status == NO_CONVERGENCE


def test_vacuum_error_on_oversized_step():
    grid = GridSpec(1, 16)
    data = make_record(rho_amp=0.0, mu=0.05)
    x = grid.cell_centers()[0]
    rho = ScalarField.constant(grid, 0.05)
    u = VectorField(grid, (2.0 * np.sin(2 * np.pi * x))[:, None])
    state = FluidState(rho, u, 0.0)
    with pytest.raises(VacuumError):
        step(state, data, 0.5, SchemeConfig(cfl=1.0, T=1.0))


def test_solve_determinism_bitwise():
    data = make_record(rho_amp=0.1, u_amp=0.05, mu=0.03)
    r1 = solve(data, GridSpec(1, 32), CFG)
    r2 = solve(data, GridSpec(1, 32), CFG)
    assert np.array_equal(r1.energy_history, r2.energy_history)
    assert np.array_equal(r1.linf_history, r2.linf_history)
    for a, b in zip(r1.trajectory.states, r2.trajectory.states):
        assert np.array_equal(a.rho.values, b.rho.values)
        assert np.array_equal(a.u.values, b.u.values)


def test_explicit_variant_smoke():
    data = make_record(rho_amp=0.05, u_amp=0.05)
    cfg = SchemeConfig(cfl=0.2, T=0.02, theta_implicit=False)
    report = solve(data, GridSpec(1, 32), cfg)
    assert report.status == COMPLETED
    masses = np.array([s.rho.integral() for s in report.trajectory.states])
    assert np.abs(masses - masses[0]).max() <= 1e-13 * masses[0]
    # the explicit pair reproduces its own update system
    s0, s1 = report.trajectory.states[0], report.trajectory.states[1]
    dt = report.trajectory.times[1]
    assert scheme_residual(data, (s0, s1), dt, cfg) <= 1e-12


def test_report_summary_roundtrip():
    data = make_record(rho_amp=0.0)
    report = solve(data, GridSpec(1, 16), CFG)
    doc = report.to_summary()
    assert doc["status"] == COMPLETED
    assert doc["steps"] == report.steps
    assert "max_linf" in report.summary_json()


def test_manufactured_convergence_small():
    rows = manufactured_convergence(TravelingWaveCase(), [16, 32, 64],
                                    SchemeConfig(cfl=0.4, T=0.1))
    errs = [r.error_l1 for r in rows]
    assert errs[0] > errs[1] > errs[2]
    assert rows[1].order is not None and rows[1].order > 0.8
    assert rows[0].order is None


def test_manufactured_equilibrium_is_exact():
    case = TravelingWaveCase(amplitude=0.0, speed=0.0)
    rows = manufactured_convergence(case, [16, 32], SchemeConfig(cfl=0.4, T=0.05))
    assert all(r.error_l1 <= 1e-12 for r in rows)


def test_self_convergence_decreasing():
    data = make_record(rho_amp=0.1, u_amp=0.1)
    rows = self_convergence(data, [8, 16], 32, SchemeConfig(cfl=0.4, T=0.05))
    assert rows[0].error_l1 > rows[1].error_l1 > 0
    with pytest.raises(ValueError):
        self_convergence(data, [12], 32, CFG)


def test_traveling_wave_satisfies_momentum_balance():
    # the forcing closes the momentum equation: solve stays near the exact wave
    case = TravelingWaveCase(amplitude=0.1, speed=0.5, mu=0.05)
    report = solve(case.data_record(), GridSpec(1, 128), SchemeConfig(cfl=0.4, T=0.05))
    x = report.trajectory.grid.cell_centers()[0]
    final = report.trajectory.states[-1]
    exact = case.exact_rho(final.time, x)
    assert np.abs(final.rho.values - exact).max() < 5e-3


def test_bounded_graph_proxy_converging_data():
    # data converging in the surrogate distance + grids refining: the
    # solutions approach the limit solve monotonically in L1
    from nsuq.mesh import trajectory_lq_distance, restrict_or_prolong

    cfg = SchemeConfig(cfl=0.4, T=0.05)
    limit = make_record(rho_amp=0.1, u_amp=0.1, mu=0.05)
    ref = solve(limit, GridSpec(1, 64), cfg)
    dists = []
    for k, n in ((1, 8), (2, 16), (3, 32)):
        data_k = make_record(rho_amp=0.1 + 0.05 / 2**k, u_amp=0.1, mu=0.05 + 0.02 / 2**k)
        rep = solve(data_k, GridSpec(1, n), cfg)
        assert rep.status == COMPLETED
        assert rep.max_linf < 5.0  # uniformly bounded family
        dists.append(trajectory_lq_distance(rep.trajectory, ref.trajectory, q=1.0))
    assert dists[0] > dists[1] > dists[2]
