"""Uniform periodic grids on the flat torus and the discrete fields living on them.

Everything downstream (solver, ensembles, statistics) measures distances with
the norms defined here: midpoint-quadrature L^q norms, the max norm, and the
Fourier-weighted negative Sobolev norm used as the separable metric for
solution ensembles.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GridSpec",
    "ScalarField",
    "VectorField",
    "FluidState",
    "Trajectory",
    "lq_norm",
    "neg_sobolev_norm",
    "field_axpy",
    "field_scale",
    "field_sub",
    "restrict",
    "prolong",
    "restrict_or_prolong",
    "save_field",
    "load_field",
    "save_trajectory",
    "load_trajectory",
    "trajectory_lq_distance",
]


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid of n^d cells on the d-torus of side `period`."""

    d: int
    n: int
    period: float = 1.0

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.d}")
        if self.n < 2:
            raise ValueError(f"need at least 2 cells per axis, got {self.n}")
        if not self.period > 0:
            raise ValueError("period must be positive")

    @property
    def h(self) -> float:
        return self.period / self.n

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.d

    @property
    def num_cells(self) -> int:
        return self.n**self.d

    @property
    def cell_volume(self) -> float:
        return self.h**self.d

    def axis_centers(self) -> np.ndarray:
        """Cell-center coordinates along one axis."""
        return (np.arange(self.n) + 0.5) * self.h

    def cell_centers(self) -> tuple:
        """Meshgrid of cell-center coordinates, one array per axis (ij indexing)."""
        return _cached_centers(self)


@functools.lru_cache(maxsize=128)
def _cached_centers(grid: GridSpec) -> tuple:
    ax = grid.axis_centers()
    out = (ax,) if grid.d == 1 else tuple(np.meshgrid(ax, ax, indexing="ij"))
    for arr in out:
        arr.setflags(write=False)
    return out


def _check_values(grid: GridSpec, values: np.ndarray, expected: tuple) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.shape != expected:
        raise ValueError(f"values shape {values.shape} does not match grid {expected}")
    if not np.all(np.isfinite(values)):
        raise ValueError("field values must be finite")
    out = values.copy()
    out.setflags(write=False)  # fields are immutable after construction
    return out


@dataclass(frozen=True)
class ScalarField:
    grid: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "values", _check_values(self.grid, self.values, self.grid.shape))

    @classmethod
    def constant(cls, grid: GridSpec, value: float) -> "ScalarField":
        return cls(grid, np.full(grid.shape, float(value)))

    @classmethod
    def from_function(cls, grid: GridSpec, fn) -> "ScalarField":
        return cls(grid, fn(*grid.cell_centers()))

    def integral(self) -> float:
        """Midpoint-rule integral over the torus."""
        return float(self.values.sum() * self.grid.cell_volume)

    def mean(self) -> float:
        return float(self.values.mean())


@dataclass(frozen=True)
class VectorField:
    grid: GridSpec
    values: np.ndarray = field(repr=False)  # shape grid.shape + (d,)

    def __post_init__(self):
        expected = self.grid.shape + (self.grid.d,)
        object.__setattr__(self, "values", _check_values(self.grid, self.values, expected))

    @classmethod
    def constant(cls, grid: GridSpec, vec) -> "VectorField":
        vec = np.atleast_1d(np.asarray(vec, dtype=float))
        vals = np.broadcast_to(vec, grid.shape + (grid.d,))
        return cls(grid, np.array(vals))

    @classmethod
    def from_functions(cls, grid: GridSpec, fns) -> "VectorField":
        comps = [fn(*grid.cell_centers()) for fn in fns]
        return cls(grid, np.stack(comps, axis=-1))

    def magnitude(self) -> np.ndarray:
        """Pointwise Euclidean magnitude."""
        return np.sqrt(np.sum(self.values**2, axis=-1))


Field = ScalarField | VectorField


def _is_vector(f: Field) -> bool:
    return isinstance(f, VectorField)


def _pointwise_abs(f: Field) -> np.ndarray:
    return f.magnitude() if _is_vector(f) else np.abs(f.values)


@dataclass(frozen=True)
class FluidState:
    """Density/velocity pair at a fixed time; density strictly positive."""

    rho: ScalarField
    u: VectorField
    time: float

    def __post_init__(self):
        if self.rho.grid != self.u.grid:
            raise ValueError("rho and u must live on the same grid")
        if self.rho.values.min() <= 0:
            raise ValueError("density must be strictly positive")
        if self.time < 0:
            raise ValueError("time must be nonnegative")

    @property
    def grid(self) -> GridSpec:
        return self.rho.grid

    def momentum(self) -> np.ndarray:
        return self.rho.values[..., None] * self.u.values

    def linf(self) -> float:
        """Max over cells and components of (|rho|, |u|)."""
        return float(max(np.abs(self.rho.values).max(), np.abs(self.u.values).max()))


class Trajectory:
    """Time history of fluid states on a fixed grid, t0 = 0."""

    def __init__(self, states: list):
        if not states:
            raise ValueError("trajectory needs at least one state")
        grid = states[0].grid
        times = np.array([s.time for s in states], dtype=float)
        if times[0] != 0.0:
            raise ValueError("trajectories start at t = 0")
        if len(times) > 1 and not np.all(np.diff(times) > 0):
            raise ValueError("times must be strictly increasing")
        for s in states:
            if s.grid != grid:
                raise ValueError("all states must share one grid")
        self.grid = grid
        self.times = times
        self.states = list(states)

    @property
    def final_time(self) -> float:
        return float(self.times[-1])

    def __len__(self) -> int:
        return len(self.states)

    def sample(self, t: float) -> tuple:
        """(rho values, u values) at time t by linear interpolation between stored steps."""
        if t < 0 or t > self.final_time + 1e-12 * max(1.0, self.final_time):
            raise ValueError(f"t={t} outside stored range [0, {self.final_time}]")
        t = min(t, self.final_time)
        j = int(np.searchsorted(self.times, t, side="right")) - 1
        j = min(max(j, 0), len(self.times) - 1)
        if j == len(self.times) - 1 or self.times[j] == t:
            s = self.states[j]
            return s.rho.values.copy(), s.u.values.copy()
        t0, t1 = self.times[j], self.times[j + 1]
        w = (t - t0) / (t1 - t0)
        s0, s1 = self.states[j], self.states[j + 1]
        rho = (1 - w) * s0.rho.values + w * s1.rho.values
        u = (1 - w) * s0.u.values + w * s1.u.values
        return rho, u

    def sample_momentum(self, t: float) -> np.ndarray:
        rho, u = self.sample(t)
        return rho[..., None] * u


# ---------------------------------------------------------------------------
# norms


def lq_norm(f: Field, q: float) -> float:
    """Midpoint-quadrature L^q norm on the torus; q = inf gives the max norm.

    Vector fields are reduced to their pointwise Euclidean magnitude first.
    """
    a = _pointwise_abs(f)
    if q == np.inf:
        return float(a.max())
    if q < 1:
        raise ValueError(f"q must be >= 1 or inf, got {q}")
    return float((np.sum(a**q) * f.grid.cell_volume) ** (1.0 / q))


def _spatial_neg_sobolev_sq(values: np.ndarray, grid: GridSpec, m: int) -> float:
    # forward DFT normalized by cell count so the k=0 coefficient is the mean
    axes = tuple(range(grid.d))
    fhat = np.fft.fftn(values, axes=axes) / grid.num_cells
    kint = np.fft.fftfreq(grid.n) * grid.n  # integer mode numbers
    if grid.d == 1:
        ksq = (2 * np.pi * kint / grid.period) ** 2
    else:
        kx, ky = np.meshgrid(kint, kint, indexing="ij")
        ksq = (2 * np.pi / grid.period) ** 2 * (kx**2 + ky**2)
    weight = (1.0 + ksq) ** (-float(m))
    if values.ndim == grid.d:  # scalar
        return float(np.sum(np.abs(fhat) ** 2 * weight))
    return float(sum(np.sum(np.abs(fhat[..., c]) ** 2 * weight) for c in range(values.shape[-1])))


def neg_sobolev_norm(obj, m: int) -> float:
    """Negative Sobolev norm via the discrete Fourier transform.

    For a field: ||f||^2 = sum_k |fhat_k|^2 (1 + |2 pi k / period|^2)^(-m).
    For a trajectory: L^2-in-time of the spatial norms by the trapezoid rule
    over the stored steps, applied to the (rho, u) pair jointly.
    Requires m > d + 1 so that bounded fields embed compactly.
    """
    if isinstance(obj, Trajectory):
        grid = obj.grid
        if m <= grid.d + 1:
            raise ValueError(f"need m > d+1 = {grid.d + 1}, got {m}")
        sq = np.array(
            [
                _spatial_neg_sobolev_sq(s.rho.values, grid, m)
                + _spatial_neg_sobolev_sq(s.u.values, grid, m)
                for s in obj.states
            ]
        )
        if len(obj) == 1:
            return float(np.sqrt(sq[0]))
        return float(np.sqrt(np.trapezoid(sq, obj.times)))
    grid = obj.grid
    if m <= grid.d + 1:
        raise ValueError(f"need m > d+1 = {grid.d + 1}, got {m}")
    return float(np.sqrt(_spatial_neg_sobolev_sq(obj.values, grid, m)))


# ---------------------------------------------------------------------------
# field arithmetic


def _same_kind(x: Field, y: Field):
    if x.grid != y.grid:
        raise ValueError("grid mismatch")
    if type(x) is not type(y):
        raise ValueError("cannot combine scalar and vector fields")


def field_axpy(alpha: float, x: Field, y: Field) -> Field:
    """alpha * x + y, pointwise."""
    _same_kind(x, y)
    return type(x)(x.grid, alpha * x.values + y.values)


def field_scale(alpha: float, x: Field) -> Field:
    return type(x)(x.grid, alpha * x.values)


def field_sub(x: Field, y: Field) -> Field:
    _same_kind(x, y)
    return type(x)(x.grid, x.values - y.values)


# ---------------------------------------------------------------------------
# grid transfer (nested uniform grids only)


def restrict(f: Field, target: GridSpec) -> Field:
    """Cell-averaging restriction onto a coarser nested grid."""
    src = f.grid
    if target.d != src.d or target.period != src.period:
        raise ValueError("grids must share dimension and period")
    if src.n % target.n != 0:
        raise ValueError(f"grids not nested: {src.n} -> {target.n}")
    r = src.n // target.n
    v = f.values
    if src.d == 1:
        if _is_vector(f):
            v = v.reshape(target.n, r, src.d).mean(axis=1)
        else:
            v = v.reshape(target.n, r).mean(axis=1)
    else:
        if _is_vector(f):
            v = v.reshape(target.n, r, target.n, r, src.d).mean(axis=(1, 3))
        else:
            v = v.reshape(target.n, r, target.n, r).mean(axis=(1, 3))
    return type(f)(target, v)


def prolong(f: Field, target: GridSpec) -> Field:
    """Piecewise-constant prolongation onto a finer nested grid."""
    src = f.grid
    if target.d != src.d or target.period != src.period:
        raise ValueError("grids must share dimension and period")
    if target.n % src.n != 0:
        raise ValueError(f"grids not nested: {src.n} -> {target.n}")
    r = target.n // src.n
    v = f.values
    for ax in range(src.d):
        v = np.repeat(v, r, axis=ax)
    return type(f)(target, v)


def restrict_or_prolong(f: Field, target: GridSpec) -> Field:
    if target.n == f.grid.n and target == f.grid:
        return f
    if f.grid.n % target.n == 0:
        return restrict(f, target)
    if target.n % f.grid.n == 0:
        return prolong(f, target)
    raise ValueError(f"grids not nested: {f.grid.n} vs {target.n}")


# ---------------------------------------------------------------------------
# serialization: CSV with a one-line header, row-major cells


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def save_field(f: Field, path) -> None:
    """Write a field as CSV: header `d,n,period,ncomp`, then one value per line.

    Values are flattened in row-major (C) order; for vector fields the
    component index is the fastest-varying one.
    """
    ncomp = f.grid.d if _is_vector(f) else 1
    with open(path, "w") as fh:
        fh.write(f"{f.grid.d},{f.grid.n},{_fmt(f.grid.period)},{ncomp}\n")
        for x in f.values.ravel(order="C"):
            fh.write(_fmt(x) + "\n")


def load_field(path) -> Field:
    with open(path) as fh:
        d, n, period, ncomp = fh.readline().strip().split(",")
        d, n, ncomp = int(d), int(n), int(ncomp)
        grid = GridSpec(d, n, float(period))
        vals = np.array([float(line) for line in fh if line.strip()])
    if ncomp == 1:
        return ScalarField(grid, vals.reshape(grid.shape))
    return VectorField(grid, vals.reshape(grid.shape + (ncomp,)))


def save_trajectory(traj: Trajectory, path) -> None:
    """One CSV row per stored time: t, rho cells (row-major), u cells (component-fastest)."""
    g = traj.grid
    with open(path, "w") as fh:
        fh.write(f"{g.d},{g.n},{_fmt(g.period)},{g.d + 1},{len(traj)}\n")
        for s in traj.states:
            row = [s.time, *s.rho.values.ravel(order="C"), *s.u.values.ravel(order="C")]
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def load_trajectory(path) -> Trajectory:
    with open(path) as fh:
        d, n, period, _, ntimes = fh.readline().strip().split(",")
        d, n, ntimes = int(d), int(n), int(ntimes)
        grid = GridSpec(d, n, float(period))
        nc = grid.num_cells
        states = []
        for _ in range(ntimes):
            row = np.array([float(x) for x in fh.readline().strip().split(",")])
            t = row[0]
            rho = ScalarField(grid, row[1 : 1 + nc].reshape(grid.shape))
            u = VectorField(grid, row[1 + nc :].reshape(grid.shape + (d,)))
            states.append(FluidState(rho, u, t))
    return Trajectory(states)


# ---------------------------------------------------------------------------
# space-time distances between trajectories


def trajectory_lq_distance(a: Trajectory, b: Trajectory, q: float = 2.0,
                           n_times: int = 17, which: str = "both") -> float:
    """L^q((0,T) x torus) distance between two trajectories.

    The trajectories are sampled at `n_times` uniform times (linear
    interpolation between stored steps), the finer grid is restricted onto
    the coarser one, and the time integral uses the trapezoid rule.
    `which` selects the compared quantity: "rho", "momentum", or "both"
    (the stacked (rho, u) vector, Euclidean pointwise magnitude).
    """
    if abs(a.final_time - b.final_time) > 1e-9 * max(1.0, a.final_time):
        raise ValueError("trajectories must share the final time")
    coarse = a.grid if a.grid.n <= b.grid.n else b.grid
    times = np.linspace(0.0, min(a.final_time, b.final_time), n_times)

    def on_coarse(traj, t):
        rho, u = traj.sample(t)
        rf = restrict_or_prolong(ScalarField(traj.grid, rho), coarse)
        uf = restrict_or_prolong(VectorField(traj.grid, u), coarse)
        return rf.values, uf.values

    vol = coarse.cell_volume
    slice_int = np.empty(n_times)
    for i, t in enumerate(times):
        ra, ua = on_coarse(a, t)
        rb, ub = on_coarse(b, t)
        if which == "rho":
            mag = np.abs(ra - rb)
        elif which == "momentum":
            mag = np.sqrt(np.sum((ra[..., None] * ua - rb[..., None] * ub) ** 2, axis=-1))
        elif which == "both":
            diff = np.concatenate([(ra - rb)[..., None], ua - ub], axis=-1)
            mag = np.sqrt(np.sum(diff**2, axis=-1))
        else:
            raise ValueError(f"unknown field selector {which!r}")
        if q == np.inf:
            slice_int[i] = mag.max()
        else:
            slice_int[i] = np.sum(mag**q) * vol
    if q == np.inf:
        return float(slice_int.max())
    if q < 1:
        raise ValueError("q must be >= 1 or inf")
    return float(np.trapezoid(slice_int, times) ** (1.0 / q))
