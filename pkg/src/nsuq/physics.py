"""Continuum-level building blocks: pressure law, viscous stress, energy,
and the data record (initial fields, viscosities, pressure coefficient,
forcing) together with the deterministic admissibility bounds.

Initial fields and forcings are band-limited trigonometric sums.  Keeping
them analytic rather than grid-bound lets one record be realized on every
grid of a refinement ladder, which is what couples ensemble levels by
common random data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .mesh import GridSpec, ScalarField, VectorField, FluidState

__all__ = [
    "pressure",
    "pressure_potential",
    "viscous_stress",
    "total_energy",
    "FourierMode",
    "FourierField",
    "ForcingTerm",
    "ForcingSpec",
    "DataRecord",
    "AdmissibleBounds",
    "AdmissibilityVerdict",
    "validate_admissible",
    "data_distance",
]


# ---------------------------------------------------------------------------
# equation of state


def pressure(rho, a: float, gamma: float):
    """Isentropic pressure p = a rho^gamma; accepts scalars or arrays.

    Floating dtypes pass through (so extended-precision oracles can
    difference the very function under test); everything else is promoted
    to float64.
    """
    rho = np.asarray(rho)
    if not np.issubdtype(rho.dtype, np.floating):
        rho = rho.astype(float)
    if np.any(rho < 0):
        raise ValueError("density must be nonnegative")
    if a <= 0:
        raise ValueError("pressure coefficient a must be positive")
    if gamma <= 1:
        raise ValueError("adiabatic exponent must exceed 1")
    out = a * rho**gamma
    return out[()] if out.ndim == 0 else out


def pressure_potential(rho, a: float, gamma: float):
    """Pressure potential P with P'(rho) rho - P(rho) = p(rho), i.e. a rho^gamma / (gamma - 1)."""
    if gamma <= 1:
        raise ValueError("pressure potential is singular for gamma <= 1")
    return pressure(rho, a, gamma) / (gamma - 1.0)


def viscous_stress(grad_u: np.ndarray, mu: float, eta: float, d: int) -> np.ndarray:
    """Newtonian stress mu (G + G^T - (2/d) tr G I) + eta tr G I from the velocity gradient.

    grad_u has shape (..., d, d) with G[i, j] = du_i/dx_j.  For d = 1 the
    deviatoric part cancels identically, so the 1-D stress uses the reduced
    effective coefficient (mu + eta) * du/dx (test-reduction convention,
    matching the 1-D momentum equation used by the solver).
    """
    grad_u = np.asarray(grad_u, dtype=float)
    if grad_u.shape[-2:] != (d, d):
        raise ValueError(f"grad_u must have trailing shape ({d}, {d})")
    if d == 1:
        return (mu + eta) * grad_u
    div = np.trace(grad_u, axis1=-2, axis2=-1)
    eye = np.eye(d)
    sym = grad_u + np.swapaxes(grad_u, -2, -1)
    return mu * (sym - (2.0 / d) * div[..., None, None] * eye) + eta * div[..., None, None] * eye


def total_energy(state: FluidState, a: float, gamma: float) -> float:
    """Total energy integral [ rho |u|^2 / 2 + P(rho) ] dx by the midpoint rule."""
    rho = state.rho.values
    if rho.min() <= 0:
        raise ValueError("total energy needs strictly positive density")
    kinetic = 0.5 * rho * np.sum(state.u.values**2, axis=-1)
    dens = kinetic + pressure_potential(rho, a, gamma)
    return float(dens.sum() * state.grid.cell_volume)


# ---------------------------------------------------------------------------
# band-limited fields


def _canonical(wavevec: tuple, kind: str, coef: float):
    """Normalize mode sign so (k, kind) is a unique key: first nonzero entry > 0."""
    wv = tuple(int(k) for k in wavevec)
    if kind not in ("cos", "sin"):
        raise ValueError(f"mode kind must be cos or sin, got {kind!r}")
    for k in wv:
        if k > 0:
            break
        if k < 0:
            wv = tuple(-k for k in wv)
            if kind == "sin":
                coef = -coef
            break
    return wv, kind, float(coef)


@dataclass(frozen=True)
class FourierMode:
    wavevec: tuple
    kind: str  # "cos" or "sin"
    coef: float


@dataclass(frozen=True)
class FourierField:
    """Real trigonometric polynomial mean + sum coef * cos/sin(2 pi k.x / period)."""

    d: int
    period: float
    mean: float
    modes: tuple = ()

    def __post_init__(self):
        merged = {}
        mean = float(self.mean)
        for m in self.modes:
            wv, kind, coef = _canonical(m.wavevec, m.kind, m.coef)
            if len(wv) != self.d:
                raise ValueError(f"wavevector {wv} does not match dimension {self.d}")
            if all(k == 0 for k in wv):
                if kind == "cos":
                    mean += coef  # cos(0) = 1 folds into the mean
                continue  # sin(0) = 0
            key = (wv, kind)
            merged[key] = merged.get(key, 0.0) + coef
        modes = tuple(
            FourierMode(wv, kind, c) for (wv, kind), c in sorted(merged.items()) if c != 0.0
        )
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "modes", modes)

    @classmethod
    def constant(cls, value: float, d: int, period: float = 1.0) -> "FourierField":
        return cls(d=d, period=period, mean=value)

    def evaluate(self, grid: GridSpec) -> np.ndarray:
        if grid.d != self.d or grid.period != self.period:
            raise ValueError("grid does not match field geometry")
        xs = grid.cell_centers()
        out = np.full(grid.shape, self.mean)
        for m in self.modes:
            phase = sum((2 * np.pi * k / self.period) * x for k, x in zip(m.wavevec, xs))
            out = out + m.coef * (np.cos(phase) if m.kind == "cos" else np.sin(phase))
        return out

    def to_scalar_field(self, grid: GridSpec) -> ScalarField:
        return ScalarField(grid, self.evaluate(grid))

    def inf_bound(self) -> float:
        """Rigorous lower bound for the continuum infimum (exact for <= 1 mode)."""
        return self.mean - sum(abs(m.coef) for m in self.modes)

    def sup_bound(self) -> float:
        return self.mean + sum(abs(m.coef) for m in self.modes)

    def sobolev_norm(self, order: float = 1.0) -> float:
        """Exact W^{order,2} norm of the trigonometric polynomial (Parseval)."""
        vol = self.period**self.d
        acc = self.mean**2
        for m in self.modes:
            ksq = sum((2 * np.pi * k / self.period) ** 2 for k in m.wavevec)
            acc += 0.5 * m.coef**2 * (1.0 + ksq) ** order
        return math.sqrt(vol * acc)

    def l2_norm(self) -> float:
        return self.sobolev_norm(0.0)

    def __sub__(self, other: "FourierField") -> "FourierField":
        if (self.d, self.period) != (other.d, other.period):
            raise ValueError("fields live on different tori")
        modes = self.modes + tuple(replace(m, coef=-m.coef) for m in other.modes)
        return FourierField(self.d, self.period, self.mean - other.mean, modes)

    def scaled(self, factor: float) -> "FourierField":
        return FourierField(
            self.d, self.period, factor * self.mean,
            tuple(replace(m, coef=factor * m.coef) for m in self.modes),
        )

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "period": self.period,
            "mean": self.mean,
            "modes": [[list(m.wavevec), m.kind, m.coef] for m in self.modes],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "FourierField":
        modes = tuple(FourierMode(tuple(wv), kind, coef) for wv, kind, coef in doc.get("modes", []))
        return cls(doc["d"], doc["period"], doc["mean"], modes)


# ---------------------------------------------------------------------------
# forcing: finite spatial Fourier sum, smooth time modulation


def _poly_abs_max(coeffs: tuple, horizon: float) -> float:
    """max |p(t)| on [0, horizon] for polynomial coefficients (low order, exact via roots)."""
    p = np.polynomial.Polynomial(list(coeffs))
    crit = [0.0, horizon]
    if len(coeffs) > 1:
        for r in p.deriv().roots():
            if abs(r.imag) < 1e-12 and 0.0 <= r.real <= horizon:
                crit.append(float(r.real))
    return float(max(abs(p(t)) for t in crit))


@dataclass(frozen=True)
class ForcingTerm:
    """amplitude * trig(2 pi k.x / period) * cos(omega t + phase) * poly(t)."""

    wavevec: tuple
    kind: str  # spatial cos/sin
    amplitude: tuple  # one value per velocity component
    omega: float = 0.0
    phase: float = 0.0
    poly: tuple = (1.0,)


@dataclass(frozen=True)
class ForcingSpec:
    """Driving force per unit mass; sup-norm bounds are computable by construction."""

    d: int
    period: float
    terms: tuple = ()
    horizon: float = 1.0  # time interval on which sup bounds are certified

    def __post_init__(self):
        for t in self.terms:
            if len(t.amplitude) != self.d:
                raise ValueError("amplitude must have one entry per velocity component")
            if len(t.wavevec) != self.d:
                raise ValueError("wavevector dimension mismatch")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")

    @classmethod
    def zero(cls, d: int, period: float = 1.0) -> "ForcingSpec":
        return cls(d=d, period=period, terms=())

    def evaluate(self, t: float, grid: GridSpec) -> np.ndarray:
        """Force per unit mass at time t, shape grid.shape + (d,)."""
        if grid.d != self.d or grid.period != self.period:
            raise ValueError("grid does not match forcing geometry")
        xs = grid.cell_centers()
        out = np.zeros(grid.shape + (self.d,))
        for term in self.terms:
            phase = sum((2 * np.pi * k / self.period) * x for k, x in zip(term.wavevec, xs))
            spatial = np.cos(phase) if term.kind == "cos" else np.sin(phase)
            envelope = math.cos(term.omega * t + term.phase) * float(
                np.polynomial.Polynomial(list(term.poly))(t)
            )
            for c, amp in enumerate(term.amplitude):
                if amp != 0.0:
                    out[..., c] += amp * envelope * spatial
        return out

    def sup_bound(self) -> float:
        """Upper bound for sup_{t in [0, horizon], x} |g(t, x)| (triangle inequality over terms)."""
        total = 0.0
        for term in self.terms:
            amp = math.sqrt(sum(a * a for a in term.amplitude))
            total += amp * _poly_abs_max(term.poly, self.horizon)
        return total

    def scaled(self, factor: float) -> "ForcingSpec":
        terms = tuple(
            replace(t, amplitude=tuple(factor * a for a in t.amplitude)) for t in self.terms
        )
        return ForcingSpec(self.d, self.period, terms, self.horizon)

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "period": self.period,
            "horizon": self.horizon,
            "terms": [
                {
                    "wavevec": list(t.wavevec),
                    "kind": t.kind,
                    "amplitude": list(t.amplitude),
                    "omega": t.omega,
                    "phase": t.phase,
                    "poly": list(t.poly),
                }
                for t in self.terms
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ForcingSpec":
        terms = tuple(
            ForcingTerm(
                tuple(t["wavevec"]), t["kind"], tuple(t["amplitude"]),
                t.get("omega", 0.0), t.get("phase", 0.0), tuple(t.get("poly", [1.0])),
            )
            for t in doc.get("terms", [])
        )
        return cls(doc["d"], doc["period"], terms, doc.get("horizon", 1.0))


# ---------------------------------------------------------------------------
# data record and admissibility


@dataclass(frozen=True)
class DataRecord:
    """One point of the data space: initial fields, viscosities, pressure law, forcing.

    gamma is a structural constant of the experiment, carried along for
    convenience but never randomized.
    """

    rho0: FourierField
    u0: tuple  # d FourierField components
    mu: float
    eta: float
    a: float
    gamma: float
    g: ForcingSpec

    def __post_init__(self):
        d = self.rho0.d
        if len(self.u0) != d or any(c.d != d for c in self.u0):
            raise ValueError("u0 must have one component field per dimension")
        if self.g.d != d:
            raise ValueError("forcing dimension mismatch")
        if self.rho0.inf_bound() <= 0:
            raise ValueError("initial density must be strictly positive")
        if self.mu <= 0:
            raise ValueError("shear viscosity must be positive")
        if self.eta < 0:
            raise ValueError("bulk viscosity must be nonnegative")
        if self.a <= 0:
            raise ValueError("pressure coefficient must be positive")
        if self.gamma <= 1:
            raise ValueError("adiabatic exponent must exceed 1")

    @property
    def d(self) -> int:
        return self.rho0.d

    @property
    def period(self) -> float:
        return self.rho0.period

    def min_density(self) -> float:
        return self.rho0.inf_bound()

    def rho0_on(self, grid: GridSpec) -> ScalarField:
        return ScalarField(grid, self.rho0.evaluate(grid))

    def u0_on(self, grid: GridSpec) -> VectorField:
        comps = [c.evaluate(grid) for c in self.u0]
        return VectorField(grid, np.stack(comps, axis=-1))

    def initial_state(self, grid: GridSpec) -> FluidState:
        return FluidState(self.rho0_on(grid), self.u0_on(grid), 0.0)


@dataclass(frozen=True)
class AdmissibleBounds:
    """Deterministic bounds cutting the closed convex admissible set out of the data space."""

    rho_lower: float
    mu_lower: float
    a_lower: float
    a_upper: float
    g_sup: float

    def __post_init__(self):
        if not (0 < self.a_lower <= self.a_upper):
            raise ValueError("need 0 < a_lower <= a_upper")
        if self.rho_lower <= 0 or self.mu_lower <= 0 or self.g_sup <= 0:
            raise ValueError("rho_lower, mu_lower, g_sup must be positive")

    def to_dict(self) -> dict:
        return {
            "rho_lower": self.rho_lower,
            "mu_lower": self.mu_lower,
            "a_lower": self.a_lower,
            "a_upper": self.a_upper,
            "g_sup": self.g_sup,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "AdmissibleBounds":
        return cls(**doc)


@dataclass(frozen=True)
class AdmissibilityVerdict:
    ok: bool
    violation: str | None = None

    def __bool__(self) -> bool:
        return self.ok


def validate_admissible(data: DataRecord, bounds: AdmissibleBounds) -> AdmissibilityVerdict:
    """Membership verdict for the admissible set; all inequalities are non-strict.

    The density infimum and the forcing sup use the records' certified
    bounds (exact for constants and single-mode fields, conservative
    otherwise), so acceptance implies true membership.
    """
    if data.min_density() < bounds.rho_lower:
        return AdmissibilityVerdict(False, "density_lower_bound")
    if data.mu < bounds.mu_lower:
        return AdmissibilityVerdict(False, "shear_viscosity_lower_bound")
    if data.eta < 0:
        return AdmissibilityVerdict(False, "bulk_viscosity_sign")
    if data.a < bounds.a_lower:
        return AdmissibilityVerdict(False, "pressure_coefficient_lower_bound")
    if data.a > bounds.a_upper:
        return AdmissibilityVerdict(False, "pressure_coefficient_upper_bound")
    if data.g.sup_bound() > bounds.g_sup:
        return AdmissibilityVerdict(False, "forcing_sup_bound")
    return AdmissibilityVerdict(True)


def _forcing_distance(ga: ForcingSpec, gb: ForcingSpec) -> float:
    """Sup-style distance between forcings sharing the same envelope structure."""

    def key(t: ForcingTerm):
        return (t.wavevec, t.kind, t.omega, t.phase, t.poly)

    terms = {}
    for t in ga.terms:
        terms[key(t)] = np.array(t.amplitude)
    for t in gb.terms:
        terms[key(t)] = terms.get(key(t), np.zeros(gb.d)) - np.array(t.amplitude)
    horizon = max(ga.horizon, gb.horizon)
    return sum(
        float(np.linalg.norm(amp)) * _poly_abs_max(k[4], horizon) for k, amp in terms.items()
    )


def data_distance(a: DataRecord, b: DataRecord, field_order: float = 1.0) -> float:
    """Surrogate data-space distance: parameter gaps plus Sobolev-weighted field gaps.

    On band-limited fields all Sobolev norms are equivalent, so a fixed low
    order (default 1) is used for the field contributions.
    """
    if (a.d, a.period) != (b.d, b.period):
        raise ValueError("records live on different tori")
    if a.gamma != b.gamma:
        raise ValueError("records have different structural exponents")
    dist = abs(a.mu - b.mu) + abs(a.eta - b.eta) + abs(a.a - b.a)
    dist += (a.rho0 - b.rho0).sobolev_norm(field_order)
    for ca, cb in zip(a.u0, b.u0):
        dist += (ca - cb).sobolev_norm(field_order)
    dist += _forcing_distance(a.g, b.g)
    return dist
