import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nsuq.mesh import (
    GridSpec,
    ScalarField,
    VectorField,
    FluidState,
    Trajectory,
    field_axpy,
    field_scale,
    field_sub,
    lq_norm,
    neg_sobolev_norm,
    load_field,
    load_trajectory,
    prolong,
    restrict,
    restrict_or_prolong,
    save_field,
    save_trajectory,
    trajectory_lq_distance,
)


def test_grid_validation():
    with pytest.raises(ValueError):
        GridSpec(3, 8)
    with pytest.raises(ValueError):
        GridSpec(1, 1)
    with pytest.raises(ValueError):
        GridSpec(1, 8, period=0.0)
    g = GridSpec(2, 4, period=2.0)
    assert g.h == 0.5
    assert g.num_cells == 16
    assert g.cell_volume == 0.25


def test_field_shape_and_immutability():
    g = GridSpec(1, 8)
    f = ScalarField.constant(g, 2.0)
    with pytest.raises(ValueError):
        f.values[0] = 1.0
    with pytest.raises(ValueError):
        ScalarField(g, np.zeros(7))
    with pytest.raises(ValueError):
        ScalarField(g, np.full(8, np.nan))
    v = VectorField.constant(g, [1.5])
    assert v.values.shape == (8, 1)


@pytest.mark.parametrize("q", [1.0, 2.0, 3.5, np.inf])
def test_lq_norm_constant(q):
    g = GridSpec(1, 16)
    assert lq_norm(ScalarField.constant(g, -3.0), q) == pytest.approx(3.0)


def test_lq_norm_half_indicator():
    g = GridSpec(1, 8)
    vals = np.zeros(8)
    vals[:4] = 1.0
    assert lq_norm(ScalarField(g, vals), 1.0) == pytest.approx(0.5)


def test_lq_norm_sine_mode():
    # closed form 1/sqrt(2); midpoint quadrature is exact for full periods,
    # checked by agreement across two resolutions
    for n in (16, 512):
        g = GridSpec(1, n)
        f = ScalarField.from_function(g, lambda x: np.sin(2 * np.pi * x))
        assert lq_norm(f, 2.0) == pytest.approx(1.0 / np.sqrt(2.0), rel=1e-12)


def test_lq_norm_rejects_small_q():
    g = GridSpec(1, 8)
    with pytest.raises(ValueError):
        lq_norm(ScalarField.constant(g, 1.0), 0.5)


def test_neg_sobolev_trivial_and_mode():
    g = GridSpec(1, 64)
    assert neg_sobolev_norm(ScalarField.constant(g, 0.0), 3) == 0.0
    assert neg_sobolev_norm(ScalarField.constant(g, -2.5), 3) == pytest.approx(2.5)
    # single cos mode: coefficients +-1/2 at k = +-1, so the squared norm is
    # 2 * (1/2)^2 * (1 + 4 pi^2)^(-m)
    f = ScalarField.from_function(g, lambda x: np.cos(2 * np.pi * x))
    m = 3
    expected = np.sqrt(0.5 * (1 + 4 * np.pi**2) ** (-m))
    assert neg_sobolev_norm(f, m) == pytest.approx(expected, rel=1e-12)


def test_neg_sobolev_requires_large_m():
    g = GridSpec(1, 8)
    with pytest.raises(ValueError):
        neg_sobolev_norm(ScalarField.constant(g, 1.0), 2)
    g2 = GridSpec(2, 8)
    with pytest.raises(ValueError):
        neg_sobolev_norm(ScalarField.constant(g2, 1.0), 3)


def test_neg_sobolev_monotone_in_m_and_below_l2():
    g = GridSpec(1, 32)
    rng = np.random.default_rng(5)
    f = ScalarField(g, rng.standard_normal(32))
    norms = [neg_sobolev_norm(f, m) for m in (3, 4, 5, 6)]
    assert all(a > b for a, b in zip(norms, norms[1:]))
    assert norms[0] <= lq_norm(f, 2.0) + 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_parseval(seed):
    rng = np.random.default_rng(seed)
    g = GridSpec(1, 16)
    f = ScalarField(g, rng.standard_normal(16))
    fhat = np.fft.fft(f.values) / g.n
    rhs = g.period**g.d * np.sum(np.abs(fhat) ** 2)
    assert lq_norm(f, 2.0) ** 2 == pytest.approx(rhs, rel=1e-10)


def test_field_arithmetic():
    g = GridSpec(1, 8)
    rng = np.random.default_rng(0)
    f = ScalarField(g, rng.standard_normal(8))
    h = ScalarField(g, rng.standard_normal(8))
    assert np.all(field_sub(f, f).values == 0.0)
    two_f = field_axpy(2.0, f, ScalarField.constant(g, 0.0))
    assert np.array_equal(two_f.values, 2.0 * f.values)
    assert np.array_equal(field_scale(2.0, f).values, 2.0 * f.values)
    back = field_sub(field_axpy(1.0, f, h), h)
    assert np.allclose(back.values, f.values, rtol=0, atol=1e-15)
    with pytest.raises(ValueError):
        field_sub(f, ScalarField.constant(GridSpec(1, 16), 0.0))
    with pytest.raises(ValueError):
        field_sub(f, VectorField.constant(g, [1.0]))


def test_restrict_cell_averages():
    g4, g2 = GridSpec(1, 4), GridSpec(1, 2)
    f = ScalarField(g4, np.array([1.0, 1.0, 3.0, 3.0]))
    assert np.array_equal(restrict(f, g2).values, np.array([1.0, 3.0]))


def test_prolong_then_restrict_identity():
    g2, g8 = GridSpec(1, 2), GridSpec(1, 8)
    f = ScalarField(g2, np.array([0.25, -1.5]))
    assert np.array_equal(restrict(prolong(f, g8), g2).values, f.values)


def test_restrict_preserves_mass_and_mean():
    g = GridSpec(2, 8)
    rng = np.random.default_rng(3)
    f = ScalarField(g, rng.standard_normal((8, 8)))
    coarse = restrict(f, GridSpec(2, 4))
    assert coarse.integral() == pytest.approx(f.integral(), rel=1e-14, abs=1e-15)
    assert coarse.mean() == pytest.approx(f.mean(), abs=1e-15)


def test_restrict_or_prolong_dispatch_and_errors():
    f = ScalarField.constant(GridSpec(1, 4), 1.0)
    assert restrict_or_prolong(f, GridSpec(1, 4)) is f
    assert restrict_or_prolong(f, GridSpec(1, 8)).grid.n == 8
    with pytest.raises(ValueError):
        restrict_or_prolong(f, GridSpec(1, 6))


def test_vector_restrict_prolong():
    g = GridSpec(1, 4)
    v = VectorField(g, np.array([[1.0], [1.0], [3.0], [3.0]]))
    assert np.array_equal(restrict(v, GridSpec(1, 2)).values, np.array([[1.0], [3.0]]))


def test_field_serialization_roundtrip(tmp_path):
    g = GridSpec(2, 4, period=2.0)
    rng = np.random.default_rng(9)
    f = ScalarField(g, rng.standard_normal((4, 4)))
    path = tmp_path / "f.csv"
    save_field(f, path)
    f2 = load_field(path)
    assert f2.grid == g
    assert np.array_equal(f2.values, f.values)
    v = VectorField(g, rng.standard_normal((4, 4, 2)))
    save_field(v, path)
    v2 = load_field(path)
    assert isinstance(v2, VectorField)
    assert np.array_equal(v2.values, v.values)


def test_trajectory_validation_and_sampling():
    g = GridSpec(1, 4)
    s0 = FluidState(ScalarField.constant(g, 1.0), VectorField.constant(g, [0.0]), 0.0)
    s1 = FluidState(ScalarField.constant(g, 2.0), VectorField.constant(g, [1.0]), 1.0)
    with pytest.raises(ValueError):
        Trajectory([s1])  # must start at t=0
    traj = Trajectory([s0, s1])
    rho, u = traj.sample(0.25)
    assert rho[0] == pytest.approx(1.25)
    assert u[0, 0] == pytest.approx(0.25)
    rho, u = traj.sample(1.0)
    assert rho[0] == 2.0
    with pytest.raises(ValueError):
        traj.sample(2.0)


def test_trajectory_serialization_roundtrip(tmp_path):
    g = GridSpec(1, 4)
    rng = np.random.default_rng(11)
    states = [
        FluidState(ScalarField(g, 1.0 + 0.1 * rng.random(4)),
                   VectorField(g, rng.standard_normal((4, 1))), t)
        for t in (0.0, 0.5, 1.25)
    ]
    traj = Trajectory(states)
    path = tmp_path / "traj.csv"
    save_trajectory(traj, path)
    traj2 = load_trajectory(path)
    assert np.array_equal(traj2.times, traj.times)
    for a, b in zip(traj.states, traj2.states):
        assert np.array_equal(a.rho.values, b.rho.values)
        assert np.array_equal(a.u.values, b.u.values)


def test_trajectory_distance_constant_offset():
    g = GridSpec(1, 8)

    def const_traj(c):
        s0 = FluidState(ScalarField.constant(g, c), VectorField.constant(g, [0.0]), 0.0)
        s1 = FluidState(ScalarField.constant(g, c), VectorField.constant(g, [0.0]), 2.0)
        return Trajectory([s0, s1])

    a, b = const_traj(1.0), const_traj(1.3)
    # |delta| * (T * vol)^(1/q)
    assert trajectory_lq_distance(a, b, q=2.0) == pytest.approx(0.3 * np.sqrt(2.0), rel=1e-12)
    assert trajectory_lq_distance(a, a, q=2.0) == 0.0
    assert trajectory_lq_distance(a, b, q=np.inf) == pytest.approx(0.3, rel=1e-12)


def test_trajectory_distance_mixed_grids():
    g_c, g_f = GridSpec(1, 4), GridSpec(1, 8)

    def const_traj(grid, c):
        s0 = FluidState(ScalarField.constant(grid, c), VectorField.constant(grid, [0.0]), 0.0)
        s1 = FluidState(ScalarField.constant(grid, c), VectorField.constant(grid, [0.0]), 1.0)
        return Trajectory([s0, s1])

    d = trajectory_lq_distance(const_traj(g_c, 1.0), const_traj(g_f, 2.0), q=1.0, which="rho")
    assert d == pytest.approx(1.0, rel=1e-12)


def test_fluid_state_requires_positive_density():
    g = GridSpec(1, 4)
    with pytest.raises(ValueError):
        FluidState(ScalarField.constant(g, 0.0), VectorField.constant(g, [0.0]), 0.0)
    s = FluidState(ScalarField.constant(g, 2.0), VectorField.constant(g, [-3.0]), 0.0)
    assert s.linf() == 3.0


def test_neg_sobolev_of_trajectory():
    g = GridSpec(1, 8)

    def state(c, t):
        return FluidState(ScalarField.constant(g, c), VectorField.constant(g, [0.0]), t)

    # constant-in-time trajectory: L2-in-time of the constant spatial norm
    traj = Trajectory([state(1.5, 0.0), state(1.5, 2.0)])
    assert neg_sobolev_norm(traj, 3) == pytest.approx(1.5 * np.sqrt(2.0), rel=1e-12)
    single = Trajectory([state(1.5, 0.0)])
    assert neg_sobolev_norm(single, 3) == pytest.approx(1.5, rel=1e-12)
    with pytest.raises(ValueError):
        neg_sobolev_norm(traj, 2)
