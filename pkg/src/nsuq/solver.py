"""Finite-volume time stepper for the barotropic viscous flow on the torus.

The update is semi-implicit: donor-cell upwind convection with explicit
momentum fluxes, while the mass-flux velocity, the pressure gradient, the
viscous terms, and the forcing are taken at the new time level.  The
coupled step is solved by Picard iteration (one matrix-free conjugate
gradient solve for the velocity per sweep); the iteration stops when the
algebraic defect of the full update drops below `picard_tol`, so a
produced state pair always satisfies the published residual contract.

Treating the acoustic part implicitly keeps the discrete total energy
non-increasing for unforced runs, on top of the upwind and viscous
dissipation; the convective explicit part keeps Picard a contraction
under the advective CFL condition.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .mesh import (
    GridSpec,
    ScalarField,
    VectorField,
    FluidState,
    Trajectory,
    trajectory_lq_distance,
)
from .physics import DataRecord, FourierField, FourierMode, ForcingSpec, ForcingTerm, \
    pressure, total_energy

__all__ = [
    "SchemeConfig",
    "SolveReport",
    "SolverError",
    "VacuumError",
    "NoConvergenceError",
    "COMPLETED",
    "ABORTED_LINF",
    "ABORTED_VACUUM",
    "NO_CONVERGENCE",
    "cfl_dt",
    "step",
    "scheme_residual",
    "solve",
    "gronwall_energy_bound",
    "TravelingWaveCase",
    "ConvergenceRow",
    "manufactured_convergence",
    "self_convergence",
]

COMPLETED = "completed"
ABORTED_LINF = "aborted_linf"
ABORTED_VACUUM = "aborted_vacuum"
NO_CONVERGENCE = "no_convergence"


class SolverError(RuntimeError):
    pass


class VacuumError(SolverError):
    pass


class NoConvergenceError(SolverError):
    pass


@dataclass(frozen=True)
class SchemeConfig:
    cfl: float = 0.4
    T: float = 0.25
    theta_implicit: bool = True
    linf_ceiling: float = 1e4
    picard_tol: float = 1e-10
    picard_max_iter: int = 100

    def __post_init__(self):
        if not (0 < self.cfl <= 1):
            raise ValueError("cfl must lie in (0, 1]")
        if self.T <= 0:
            raise ValueError("final time must be positive")
        if self.picard_tol <= 0:
            raise ValueError("picard_tol must be positive")
        if self.picard_max_iter < 1:
            raise ValueError("picard_max_iter must be at least 1")
        if self.linf_ceiling <= 0:
            raise ValueError("linf_ceiling must be positive")

    def to_dict(self) -> dict:
        return {
            "cfl": self.cfl,
            "T": self.T,
            "theta_implicit": self.theta_implicit,
            "linf_ceiling": self.linf_ceiling,
            "picard_tol": self.picard_tol,
            "picard_max_iter": self.picard_max_iter,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SchemeConfig":
        return cls(**doc)


@dataclass
class SolveReport:
    trajectory: Trajectory
    linf_history: np.ndarray = field(repr=False)
    energy_history: np.ndarray = field(repr=False)
    status: str = COMPLETED

    @property
    def max_linf(self) -> float:
        return float(np.max(self.linf_history))

    @property
    def steps(self) -> int:
        return len(self.trajectory) - 1

    def to_summary(self) -> dict:
        return {
            "status": self.status,
            "steps": self.steps,
            "final_time": self.trajectory.final_time,
            "final_energy": float(self.energy_history[-1]),
            "max_linf": self.max_linf,
        }

    def summary_json(self) -> str:
        return json.dumps(self.to_summary(), sort_keys=True)


# ---------------------------------------------------------------------------
# periodic difference stencils (cell-centered, flux form)


def _face_avg(v: np.ndarray, ax: int) -> np.ndarray:
    # value at face i+1/2 between cells i and i+1
    return 0.5 * (v + np.roll(v, -1, axis=ax))


def _upwind(c: np.ndarray, w: np.ndarray, ax: int) -> np.ndarray:
    # donor value at face i+1/2 for face velocity w; ties take the central average
    right = np.roll(c, -1, axis=ax)
    up = np.where(w > 0, c, right)
    return np.where(w == 0, 0.5 * (c + right), up)


def _div_faces(flux: np.ndarray, ax: int, h: float) -> np.ndarray:
    return (flux - np.roll(flux, 1, axis=ax)) / h


def _grad_c(v: np.ndarray, ax: int, h: float) -> np.ndarray:
    return (np.roll(v, -1, axis=ax) - np.roll(v, 1, axis=ax)) / (2 * h)


def _lap(v: np.ndarray, h: float, d: int) -> np.ndarray:
    out = np.zeros_like(v)
    for ax in range(d):
        out += (np.roll(v, -1, axis=ax) - 2 * v + np.roll(v, 1, axis=ax)) / h**2
    return out


def _mass_div(rho_donor: np.ndarray, faces: list, grid: GridSpec) -> np.ndarray:
    """Divergence of the upwind mass flux for given face velocities (telescoping)."""
    out = np.zeros(grid.shape)
    for ax, w in enumerate(faces):
        out += _div_faces(w * _upwind(rho_donor, w, ax), ax, grid.h)
    return out


def _momentum_conv_div(m: np.ndarray, faces: list, grid: GridSpec) -> np.ndarray:
    out = np.zeros(m.shape)
    for ax, w in enumerate(faces):
        for c in range(grid.d):
            out[..., c] += _div_faces(w * _upwind(m[..., c], w, ax), ax, grid.h)
    return out


def _apply_viscous(u: np.ndarray, mu: float, eta: float, grid: GridSpec) -> np.ndarray:
    """div S(grad u) with centered stencils; for d=1 the reduced (mu+eta) u_xx."""
    h, d = grid.h, grid.d
    if d == 1:
        return (mu + eta) * _lap(u, h, 1)
    div = sum(_grad_c(u[..., ax], ax, h) for ax in range(d))
    out = np.empty_like(u)
    for c in range(d):
        out[..., c] = mu * _lap(u[..., c], h, d) + eta * _grad_c(div, c, h)
    return out


def _solve_momentum_system(rho: np.ndarray, b: np.ndarray, dt: float, mu: float,
                           eta: float, grid: GridSpec, guess: np.ndarray,
                           tol: float, max_iter: int = 800) -> np.ndarray:
    """Solve (diag(rho) - dt div S) u = b by conjugate gradients.

    The operator is symmetric positive definite (the viscous stencils are
    negative semidefinite), and under the viscous CFL bound its condition
    number is O(rho_max / rho_min), so plain CG with the previous Picard
    iterate as warm start converges in a few dozen sweeps.
    """

    def apply(u):
        return rho[..., None] * u - dt * _apply_viscous(u, mu, eta, grid)

    x = guess.copy()
    r = b - apply(x)
    if np.abs(r).max() <= tol:
        return x
    p = r.copy()
    rs = float(np.sum(r * r))
    for _ in range(max_iter):
        ap = apply(p)
        alpha = rs / float(np.sum(p * ap))
        x += alpha * p
        r -= alpha * ap
        if np.abs(r).max() <= tol:
            return x
        rs_new = float(np.sum(r * r))
        p = r + (rs_new / rs) * p
        rs = rs_new
    raise NoConvergenceError("momentum linear solve did not converge")


# ---------------------------------------------------------------------------
# CFL and the residual of the algebraic update


def cfl_dt(state: FluidState, data: DataRecord, grid: GridSpec | None = None,
           cfl: float = 1.0) -> float:
    """Stable step: cfl * min( dx/(|u|max + cmax), dx^2 rho_min / (2 d (2 mu + eta)) )."""
    grid = grid or state.grid
    h = grid.h
    umax = float(state.u.magnitude().max())
    rho = state.rho.values
    cmax = math.sqrt(data.a * data.gamma * float(rho.max()) ** (data.gamma - 1.0))
    advective = h / (umax + cmax)
    viscous = h**2 * float(rho.min()) / (2 * grid.d * (2 * data.mu + data.eta))
    return cfl * min(advective, viscous)


def _residual_parts(data: DataRecord, old: FluidState, new: FluidState, dt: float,
                    theta_implicit: bool = True, conv: np.ndarray | None = None,
                    g: np.ndarray | None = None) -> tuple:
    """Defect (R_rho, R_m) of the update system at the state pair.

    `conv` and `g` can be passed in to avoid recomputing the explicit
    convective divergence and the forcing inside Picard sweeps.
    """
    grid = old.grid
    rho_k, u_k = old.rho.values, old.u.values
    rho_n, u_n = new.rho.values, new.u.values
    m_k = rho_k[..., None] * u_k
    m_n = rho_n[..., None] * u_n
    if conv is None:
        faces_k = [_face_avg(u_k[..., ax], ax) for ax in range(grid.d)]
        conv = _momentum_conv_div(m_k, faces_k, grid)
    if theta_implicit:
        faces_n = [_face_avg(u_n[..., ax], ax) for ax in range(grid.d)]
        r_rho = rho_n - rho_k + dt * _mass_div(rho_k, faces_n, grid)
        p = pressure(rho_n, data.a, data.gamma)
        if g is None:
            g = data.g.evaluate(new.time, grid)
        r_m = (
            m_n - m_k + dt * conv
            + dt * np.stack([_grad_c(p, ax, grid.h) for ax in range(grid.d)], axis=-1)
            - dt * _apply_viscous(u_n, data.mu, data.eta, grid)
            - dt * rho_n[..., None] * g
        )
    else:
        faces_k = [_face_avg(u_k[..., ax], ax) for ax in range(grid.d)]
        r_rho = rho_n - rho_k + dt * _mass_div(rho_k, faces_k, grid)
        p = pressure(rho_k, data.a, data.gamma)
        if g is None:
            g = data.g.evaluate(old.time, grid)
        r_m = (
            m_n - m_k + dt * conv
            + dt * np.stack([_grad_c(p, ax, grid.h) for ax in range(grid.d)], axis=-1)
            - dt * _apply_viscous(u_k, data.mu, data.eta, grid)
            - dt * rho_k[..., None] * g
        )
    return r_rho, r_m


def scheme_residual(data: DataRecord, states: tuple, dt: float,
                    cfg: SchemeConfig | None = None) -> float:
    """Max-norm defect of the algebraic update for a pair of consecutive states.

    Pairs produced by `step` satisfy residual <= cfg.picard_tol by
    construction (it is the stopping criterion).
    """
    old, new = states
    if old.grid != new.grid:
        raise ValueError("states must share one grid")
    theta = True if cfg is None else cfg.theta_implicit
    r_rho, r_m = _residual_parts(data, old, new, dt, theta)
    return float(max(np.abs(r_rho).max(), np.abs(r_m).max()))


# ---------------------------------------------------------------------------
# the time step


def step(state: FluidState, data: DataRecord, dt: float, cfg: SchemeConfig) -> FluidState:
    """Advance one step of size dt; raises VacuumError / NoConvergenceError."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    grid = state.grid
    rho_k = state.rho.values
    u_k = state.u.values
    m_k = rho_k[..., None] * u_k
    t_new = state.time + dt

    faces_k = [_face_avg(u_k[..., ax], ax) for ax in range(grid.d)]
    conv = _momentum_conv_div(m_k, faces_k, grid)

    if not cfg.theta_implicit:
        rho_n = rho_k - dt * _mass_div(rho_k, faces_k, grid)
        if rho_n.min() <= 0:
            raise VacuumError(f"vacuum at t={t_new}")
        p = pressure(rho_k, data.a, data.gamma)
        gradp = np.stack([_grad_c(p, ax, grid.h) for ax in range(grid.d)], axis=-1)
        g = data.g.evaluate(state.time, grid)
        m_n = m_k - dt * conv - dt * gradp \
            + dt * _apply_viscous(u_k, data.mu, data.eta, grid) + dt * rho_k[..., None] * g
        return FluidState(ScalarField(grid, rho_n), VectorField(grid, m_n / rho_n[..., None]), t_new)

    g_new = data.g.evaluate(t_new, grid)
    lin_tol = 0.05 * cfg.picard_tol
    u_s = u_k
    for _ in range(cfg.picard_max_iter):
        faces = [_face_avg(u_s[..., ax], ax) for ax in range(grid.d)]
        rho_n = rho_k - dt * _mass_div(rho_k, faces, grid)
        if rho_n.min() <= 0:
            raise VacuumError(f"vacuum at t={t_new}")
        p = pressure(rho_n, data.a, data.gamma)
        gradp = np.stack([_grad_c(p, ax, grid.h) for ax in range(grid.d)], axis=-1)
        b = m_k - dt * conv - dt * gradp + dt * rho_n[..., None] * g_new
        u_n = _solve_momentum_system(rho_n, b, dt, data.mu, data.eta, grid, u_s, lin_tol)

        new = FluidState(ScalarField(grid, rho_n), VectorField(grid, u_n), t_new)
        r_rho, r_m = _residual_parts(data, state, new, dt, theta_implicit=True,
                                     conv=conv, g=g_new)
        defect = max(np.abs(r_rho).max(), np.abs(r_m).max())
        u_s = u_n
        if defect <= cfg.picard_tol:
            return new
    raise NoConvergenceError(
        f"Picard iteration did not reach tol {cfg.picard_tol} in {cfg.picard_max_iter} sweeps"
    )


def solve(data: DataRecord, grid: GridSpec, cfg: SchemeConfig) -> SolveReport:
    """Integrate from the record's initial data to cfg.T, or until an abort.

    Aborts are reported as data, not failures: the linf ceiling feeds the
    boundedness-in-probability statistics downstream.
    """
    state = data.initial_state(grid)
    states = [state]
    linf = [state.linf()]
    energy = [total_energy(state, data.a, data.gamma)]
    status = COMPLETED

    if linf[0] > cfg.linf_ceiling:
        status = ABORTED_LINF
    else:
        t = 0.0
        while cfg.T - t > 1e-12 * cfg.T:
            dt = cfl_dt(state, data, grid, cfg.cfl)
            if t + dt >= cfg.T * (1 - 1e-12):
                dt = cfg.T - t
            try:
                state = step(state, data, dt, cfg)
            except VacuumError:
                status = ABORTED_VACUUM
                break
            except NoConvergenceError:
                status = NO_CONVERGENCE
                break
            states.append(state)
            linf.append(state.linf())
            energy.append(total_energy(state, data.a, data.gamma))
            t = state.time
            if linf[-1] > cfg.linf_ceiling:
                status = ABORTED_LINF
                break

    return SolveReport(
        trajectory=Trajectory(states),
        linf_history=np.array(linf),
        energy_history=np.array(energy),
        status=status,
    )


def gronwall_energy_bound(e0: float, mass0: float, g_sup: float, times: np.ndarray) -> np.ndarray:
    """Discrete Gronwall majorant for the total energy under a sup-bounded forcing.

    From the energy balance, dE <= g_sup * int rho |u| <= g_sup (mass0/2 + E)
    per unit time (Young's inequality; mass is conserved), absorbed
    implicitly:  E_{k+1} <= (E_k + dt g_sup mass0 / 2) / (1 - dt g_sup).
    """
    times = np.asarray(times, dtype=float)
    bounds = np.empty(len(times))
    bounds[0] = e0
    for k, dt in enumerate(np.diff(times)):
        if dt * g_sup >= 1:
            raise ValueError("time step too large for the Gronwall recursion")
        bounds[k + 1] = (bounds[k] + dt * g_sup * mass0 / 2) / (1 - dt * g_sup)
    return bounds


# ---------------------------------------------------------------------------
# convergence studies


@dataclass(frozen=True)
class TravelingWaveCase:
    """1-D density wave rho = 1 + A sin(2 pi (x - c t)/L) riding on a constant velocity.

    The pair satisfies the continuity equation exactly; the momentum
    equation is closed by the single-mode traveling forcing
    g = (4 pi a A / L) cos(2 pi (x - c t)/L), which is exact for gamma = 2.
    """

    amplitude: float = 0.1
    speed: float = 0.5
    a_coef: float = 1.0
    mu: float = 0.05
    eta: float = 0.0
    period: float = 1.0
    horizon: float = 1.0

    @property
    def gamma(self) -> float:
        return 2.0

    def data_record(self) -> DataRecord:
        L, A, c = self.period, self.amplitude, self.speed
        amp = 4 * math.pi * self.a_coef * A / L
        omega = 2 * math.pi * c / L
        g = ForcingSpec(
            d=1,
            period=L,
            terms=(
                ForcingTerm((1,), "cos", (amp,), omega=omega, phase=0.0),
                ForcingTerm((1,), "sin", (amp,), omega=omega, phase=-math.pi / 2),
            ),
            horizon=self.horizon,
        )
        return DataRecord(
            rho0=FourierField(1, L, 1.0, (FourierMode((1,), "sin", A),)),
            u0=(FourierField.constant(c, 1, L),),
            mu=self.mu,
            eta=self.eta,
            a=self.a_coef,
            gamma=self.gamma,
            g=g,
        )

    def exact_rho(self, t: float, x: np.ndarray) -> np.ndarray:
        return 1.0 + self.amplitude * np.sin(2 * np.pi * (x - self.speed * t) / self.period)

    def exact_u(self) -> float:
        return self.speed


@dataclass(frozen=True)
class ConvergenceRow:
    n: int
    h: float
    error_l1: float
    order: float | None = None


def _l1_error_vs_exact(traj: Trajectory, case: TravelingWaveCase) -> float:
    """Space-time L1 error of (rho, u) against the exact wave, trapezoid in time."""
    grid = traj.grid
    x = grid.cell_centers()[0]
    vol = grid.cell_volume
    per_t = np.empty(len(traj))
    for i, s in enumerate(traj.states):
        drho = np.abs(s.rho.values - case.exact_rho(s.time, x))
        du = np.abs(s.u.values[..., 0] - case.exact_u())
        per_t[i] = np.sum(drho + du) * vol
    return float(np.trapezoid(per_t, traj.times))


def manufactured_convergence(case: TravelingWaveCase, grid_sizes: list,
                             cfg: SchemeConfig) -> list:
    """Refinement study against the exact traveling wave; observed order is log2(e_h/e_{h/2})."""
    rows = []
    prev = None
    for n in grid_sizes:
        grid = GridSpec(1, n, case.period)
        report = solve(case.data_record(), grid, cfg)
        if report.status != COMPLETED:
            raise SolverError(f"manufactured run aborted with status {report.status}")
        err = _l1_error_vs_exact(report.trajectory, case)
        rows.append(ConvergenceRow(n=n, h=grid.h, error_l1=err, order=_observed_order(prev, err)))
        prev = err
    return rows


def _observed_order(prev: float | None, err: float) -> float | None:
    if prev is None or prev <= 0 or err <= 0:
        return None
    return math.log2(prev / err)


def self_convergence(data: DataRecord, grid_sizes: list, ref_n: int,
                     cfg: SchemeConfig, n_times: int = 17) -> list:
    """Errors against a fine-grid reference solve of the same data (L1 space-time)."""
    d = data.d
    ref = solve(data, GridSpec(d, ref_n, data.period), cfg)
    if ref.status != COMPLETED:
        raise SolverError(f"reference run aborted with status {ref.status}")
    rows = []
    prev = None
    for n in grid_sizes:
        if ref_n % n != 0 or n >= ref_n:
            raise ValueError("study grids must be strictly coarser divisors of the reference")
        grid = GridSpec(d, n, data.period)
        report = solve(data, grid, cfg)
        if report.status != COMPLETED:
            raise SolverError(f"study run aborted with status {report.status}")
        err = trajectory_lq_distance(report.trajectory, ref.trajectory, q=1.0,
                                     n_times=n_times, which="both")
        rows.append(ConvergenceRow(n=n, h=grid.h, error_l1=err, order=_observed_order(prev, err)))
        prev = err
    return rows
