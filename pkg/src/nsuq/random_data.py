"""Random data on the latent cube [0,1]^K.

A distribution spec is a measurable map from the cube into the admissible
set: inverse-CDF transforms for the scalar coefficients and affine
latent-to-amplitude maps for the band-limited initial fields and forcing.
The map is affine in every latent coordinate, so admissibility of the
whole image and a Lipschitz constant are certified at construction time,
which is exactly what the collocation (piecewise-constant) approximation
needs for its error control.

Monte-Carlo latent streams are splittable: sample n depends only on
(seed, n), never on how many samples are drawn, so refinement ladders can
share common random numbers member by member.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import truncnorm

from .physics import (
    AdmissibleBounds,
    DataRecord,
    ForcingSpec,
    FourierField,
    FourierMode,
)

__all__ = [
    "ScalarTransform",
    "RandomMode",
    "RandomFieldSpec",
    "DistributionSpec",
    "SpecValidationError",
    "sample_latent",
    "realize_data",
    "CollocationPartition",
    "build_partition",
    "collocate_data",
    "EnsembleMember",
    "Ensemble",
]

MAX_PARTITION_CELLS = 1 << 20


class SpecValidationError(ValueError):
    """A distribution spec whose image would leave the admissible set."""


# ---------------------------------------------------------------------------
# scalar coefficients


@dataclass(frozen=True)
class ScalarTransform:
    """Inverse-CDF map of one latent coordinate onto [lo, hi].

    dist: "const" (value lo, no latent coordinate), "uniform", or
    "trunc_normal" (mean/sd of the underlying normal before truncation).
    """

    dist: str
    lo: float
    hi: float | None = None
    mean: float | None = None
    sd: float | None = None
    latent_index: int | None = None

    def __post_init__(self):
        if self.dist == "const":
            if self.latent_index is not None:
                raise ValueError("constant transforms consume no latent coordinate")
            object.__setattr__(self, "hi", self.lo)
        elif self.dist in ("uniform", "trunc_normal"):
            if self.hi is None or self.hi < self.lo:
                raise ValueError("need lo <= hi")
            if self.latent_index is None or self.latent_index < 0:
                raise ValueError(f"{self.dist} transform needs a latent_index")
            if self.dist == "trunc_normal" and (self.mean is None or not self.sd or self.sd <= 0):
                raise ValueError("trunc_normal needs mean and positive sd")
        else:
            raise ValueError(f"unknown transform {self.dist!r}")

    def _tn(self):
        a = (self.lo - self.mean) / self.sd
        b = (self.hi - self.mean) / self.sd
        return truncnorm(a, b, loc=self.mean, scale=self.sd)

    def realize(self, coords: np.ndarray) -> float:
        if self.dist == "const":
            return self.lo
        w = float(coords[self.latent_index])
        if self.dist == "uniform":
            return self.lo + (self.hi - self.lo) * w
        return float(self._tn().ppf(w))

    def lipschitz(self) -> float:
        """Sup of the inverse-CDF derivative on [0, 1]."""
        if self.dist == "const":
            return 0.0
        if self.dist == "uniform":
            return self.hi - self.lo
        if self.hi == self.lo:
            return 0.0
        tn = self._tn()
        # unimodal density: the minimum over [lo, hi] sits at an endpoint
        dmin = min(float(tn.pdf(self.lo)), float(tn.pdf(self.hi)))
        return 1.0 / dmin

    @property
    def min_value(self) -> float:
        return self.lo

    @property
    def max_value(self) -> float:
        return self.hi

    def to_dict(self) -> dict:
        doc = {"dist": self.dist, "lo": self.lo}
        if self.dist != "const":
            doc.update({"hi": self.hi, "latent_index": self.latent_index})
        if self.dist == "trunc_normal":
            doc.update({"mean": self.mean, "sd": self.sd})
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "ScalarTransform":
        return cls(**doc)


# ---------------------------------------------------------------------------
# random band-limited fields


@dataclass(frozen=True)
class RandomMode:
    """One trigonometric mode with amplitude affine in a latent coordinate."""

    wavevec: tuple
    kind: str
    coef_const: float
    coef_slope: float = 0.0
    latent_index: int | None = None

    def __post_init__(self):
        if self.latent_index is None and self.coef_slope != 0.0:
            raise ValueError("a sloped mode needs a latent_index")

    def coef(self, coords: np.ndarray) -> float:
        if self.latent_index is None:
            return self.coef_const
        return self.coef_const + self.coef_slope * float(coords[self.latent_index])

    def coef_abs_max(self) -> float:
        # affine on [0,1]: extremes at the endpoints
        return max(abs(self.coef_const), abs(self.coef_const + self.coef_slope))


@dataclass(frozen=True)
class RandomFieldSpec:
    """base + sum of RandomModes; realizes to a FourierField."""

    base: float
    modes: tuple = ()

    def realize(self, coords: np.ndarray, d: int, period: float) -> FourierField:
        fmodes = tuple(FourierMode(m.wavevec, m.kind, m.coef(coords)) for m in self.modes)
        return FourierField(d, period, self.base, fmodes)

    def worst_inf(self) -> float:
        return self.base - sum(m.coef_abs_max() for m in self.modes)

    def mode_norm(self, m: RandomMode, d: int, period: float, order: float) -> float:
        ksq = sum((2 * math.pi * k / period) ** 2 for k in m.wavevec)
        return math.sqrt(period**d * 0.5 * (1.0 + ksq) ** order)

    def to_dict(self) -> dict:
        return {
            "base": self.base,
            "modes": [
                {
                    "wavevec": list(m.wavevec),
                    "kind": m.kind,
                    "coef_const": m.coef_const,
                    "coef_slope": m.coef_slope,
                    "latent_index": m.latent_index,
                }
                for m in self.modes
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RandomFieldSpec":
        modes = tuple(
            RandomMode(
                tuple(m["wavevec"]), m["kind"], m["coef_const"],
                m.get("coef_slope", 0.0), m.get("latent_index"),
            )
            for m in doc.get("modes", [])
        )
        return cls(doc["base"], modes)


# ---------------------------------------------------------------------------
# the distribution spec


@dataclass(frozen=True)
class DistributionSpec:
    """Measurable map [0,1]^K -> admissible set, affine in each coordinate."""

    K: int
    d: int
    period: float
    gamma: float
    bounds: AdmissibleBounds
    mu: ScalarTransform
    eta: ScalarTransform
    a: ScalarTransform
    rho0: RandomFieldSpec
    u0: tuple  # one RandomFieldSpec per velocity component
    g_base: ForcingSpec
    g_scale: ScalarTransform
    field_order: float = 1.0  # Sobolev weight used in the data-distance surrogate

    def __post_init__(self):
        if self.K < 0:
            raise SpecValidationError("latent dimension must be nonnegative")
        if len(self.u0) != self.d:
            raise SpecValidationError("u0 needs one field spec per component")
        for tr in self._transforms():
            if tr.latent_index is not None and tr.latent_index >= self.K:
                raise SpecValidationError("latent index out of range")
        for fs in (self.rho0, *self.u0):
            for m in fs.modes:
                if m.latent_index is not None and m.latent_index >= self.K:
                    raise SpecValidationError("latent index out of range")
                if len(m.wavevec) != self.d:
                    raise SpecValidationError("mode wavevector dimension mismatch")
        b = self.bounds
        if self.mu.min_value < b.mu_lower:
            raise SpecValidationError("viscosity transform leaves the admissible set")
        if self.eta.min_value < 0:
            raise SpecValidationError("bulk viscosity transform goes negative")
        if self.a.min_value < b.a_lower or self.a.max_value > b.a_upper:
            raise SpecValidationError("pressure coefficient transform leaves [a_lower, a_upper]")
        if self.rho0.worst_inf() < b.rho_lower:
            raise SpecValidationError("initial density can fall below rho_lower")
        if self.g_scale.min_value < 0:
            raise SpecValidationError("forcing scale must be nonnegative")
        if self.g_scale.max_value * self.g_base.sup_bound() > b.g_sup:
            raise SpecValidationError("forcing sup bound can exceed g_sup")
        if self.gamma <= 1:
            raise SpecValidationError("gamma must exceed 1")

    def _transforms(self):
        return (self.mu, self.eta, self.a, self.g_scale)

    def realize(self, omega: np.ndarray) -> DataRecord:
        omega = np.asarray(omega, dtype=float)
        if omega.shape != (self.K,):
            raise ValueError(f"latent point must have {self.K} coordinates")
        if np.any(omega < 0) or np.any(omega > 1):
            raise ValueError("latent point must lie in the unit cube")
        return DataRecord(
            rho0=self.rho0.realize(omega, self.d, self.period),
            u0=tuple(fs.realize(omega, self.d, self.period) for fs in self.u0),
            mu=self.mu.realize(omega),
            eta=self.eta.realize(omega),
            a=self.a.realize(omega),
            gamma=self.gamma,
            g=self.g_base.scaled(self.g_scale.realize(omega)),
        )

    def lipschitz_constant(self) -> float:
        """Lipschitz bound of the map w.r.t. the sup metric on the cube and the
        data-distance surrogate on the image: sum of per-coordinate constants."""
        per_coord = np.zeros(max(self.K, 1))
        for tr in (self.mu, self.eta, self.a):
            if tr.latent_index is not None:
                per_coord[tr.latent_index] += tr.lipschitz()
        if self.g_scale.latent_index is not None:
            base_unit = sum(
                math.sqrt(sum(a * a for a in t.amplitude))
                * _poly_max(t.poly, self.g_base.horizon)
                for t in self.g_base.terms
            )
            per_coord[self.g_scale.latent_index] += self.g_scale.lipschitz() * base_unit
        for fs in (self.rho0, *self.u0):
            for m in fs.modes:
                if m.latent_index is not None:
                    per_coord[m.latent_index] += abs(m.coef_slope) * fs.mode_norm(
                        m, self.d, self.period, self.field_order
                    )
        return float(per_coord.sum())

    def to_dict(self) -> dict:
        return {
            "K": self.K,
            "d": self.d,
            "period": self.period,
            "gamma": self.gamma,
            "bounds": self.bounds.to_dict(),
            "mu": self.mu.to_dict(),
            "eta": self.eta.to_dict(),
            "a": self.a.to_dict(),
            "rho0": self.rho0.to_dict(),
            "u0": [fs.to_dict() for fs in self.u0],
            "g_base": self.g_base.to_dict(),
            "g_scale": self.g_scale.to_dict(),
            "field_order": self.field_order,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "DistributionSpec":
        return cls(
            K=doc["K"],
            d=doc["d"],
            period=doc["period"],
            gamma=doc["gamma"],
            bounds=AdmissibleBounds.from_dict(doc["bounds"]),
            mu=ScalarTransform.from_dict(doc["mu"]),
            eta=ScalarTransform.from_dict(doc["eta"]),
            a=ScalarTransform.from_dict(doc["a"]),
            rho0=RandomFieldSpec.from_dict(doc["rho0"]),
            u0=tuple(RandomFieldSpec.from_dict(u) for u in doc["u0"]),
            g_base=ForcingSpec.from_dict(doc["g_base"]),
            g_scale=ScalarTransform.from_dict(doc["g_scale"]),
            field_order=doc.get("field_order", 1.0),
        )


def _poly_max(poly: tuple, horizon: float) -> float:
    from .physics import _poly_abs_max

    return _poly_abs_max(poly, horizon)


def realize_data(spec: DistributionSpec, omega: np.ndarray) -> DataRecord:
    return spec.realize(omega)


# ---------------------------------------------------------------------------
# Monte-Carlo latent stream


def sample_latent(seed: int, count: int, K: int) -> np.ndarray:
    """count i.i.d. uniform points on [0,1]^K; sample n depends only on (seed, n)."""
    if count < 1:
        raise ValueError("need at least one sample")
    out = np.empty((count, K))
    for n in range(count):
        ss = np.random.SeedSequence(seed, spawn_key=(n,))
        out[n] = np.random.Generator(np.random.PCG64(ss)).random(K)
    return out


# ---------------------------------------------------------------------------
# collocation partitions


@dataclass(frozen=True)
class CollocationPartition:
    """Uniform tensor partition of the cube, one collocation point per cell."""

    K: int
    n_per_axis: int
    points: np.ndarray
    rule: str = "center"

    def __post_init__(self):
        if self.points.shape != (self.num_cells, self.K):
            raise ValueError("points array has wrong shape")
        lows, highs = self._bounds_all()
        inside = (self.points >= lows) & (self.points <= highs)
        if not np.all(inside):
            raise ValueError("every collocation point must lie inside its cell")

    @property
    def num_cells(self) -> int:
        return self.n_per_axis**self.K

    @property
    def weights(self) -> np.ndarray:
        return np.full(self.num_cells, float(self.n_per_axis) ** (-self.K))

    def _multi_index(self) -> np.ndarray:
        grids = np.meshgrid(*[np.arange(self.n_per_axis)] * self.K, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)

    def _bounds_all(self) -> tuple:
        idx = self._multi_index()
        w = 1.0 / self.n_per_axis
        return idx * w, (idx + 1) * w

    def locate(self, omega: np.ndarray) -> int:
        """Flat index (C-order) of the cell containing a latent point."""
        omega = np.asarray(omega, dtype=float)
        axes = np.minimum((omega * self.n_per_axis).astype(int), self.n_per_axis - 1)
        flat = 0
        for k in range(self.K):
            flat = flat * self.n_per_axis + int(axes[k])
        return flat


def build_partition(K: int, n_per_axis: int, rule: str = "center",
                    seed: int | None = None) -> CollocationPartition:
    if K < 1 or n_per_axis < 1:
        raise ValueError("need K >= 1 and n_per_axis >= 1")
    if n_per_axis**K > MAX_PARTITION_CELLS:
        raise ValueError(f"partition would have more than {MAX_PARTITION_CELLS} cells")
    grids = np.meshgrid(*[np.arange(n_per_axis)] * K, indexing="ij")
    idx = np.stack([g.ravel() for g in grids], axis=-1).astype(float)
    w = 1.0 / n_per_axis
    if rule == "center":
        pts = (idx + 0.5) * w
    elif rule == "random":
        if seed is None:
            raise ValueError("random-in-cell rule needs a seed")
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
        pts = (idx + rng.random(idx.shape)) * w
    else:
        raise ValueError(f"unknown collocation rule {rule!r}")
    return CollocationPartition(K=K, n_per_axis=n_per_axis, points=pts, rule=rule)


def collocate_data(spec: DistributionSpec, partition: CollocationPartition) -> list:
    """Per-cell data records; the induced map omega -> data is piecewise constant."""
    if partition.K != spec.K:
        raise ValueError("partition and spec disagree on the latent dimension")
    return [spec.realize(p) for p in partition.points]


# ---------------------------------------------------------------------------
# ensembles


@dataclass
class EnsembleMember:
    latent: np.ndarray
    data: DataRecord
    report: object  # SolveReport


@dataclass
class Ensemble:
    """Weighted collection of solved members; weights are 1/N (weak) or cell volumes (strong)."""

    members: list
    weights: np.ndarray
    mode: str

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if self.mode not in ("weak", "strong"):
            raise ValueError("mode must be weak or strong")
        if len(self.members) != len(self.weights) or not len(self.members):
            raise ValueError("need one weight per member and at least one member")
        if np.any(self.weights <= 0) or abs(self.weights.sum() - 1.0) > 1e-9:
            raise ValueError("weights must be positive and sum to one")

    def __len__(self) -> int:
        return len(self.members)

    @property
    def completed_mask(self) -> np.ndarray:
        return np.array([m.report.status == "completed" for m in self.members])

    @property
    def unresolved_mass(self) -> float:
        """Weight mass of members whose solve did not complete."""
        return float(self.weights[~self.completed_mask].sum())

    @property
    def final_time(self) -> float:
        times = {m.report.trajectory.final_time for m in self.members}
        return max(times)
