"""Config-driven experiment runner: weak Monte-Carlo ladders, strong
collocation ladders, and deterministic convergence studies.

A run is a pure function of (config, seed): member solves are independent
and collected in submission order, aggregation is sequential, and every
emitted file uses canonical float formatting, so reruns are byte-identical
at any thread count.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import __version__
from .mesh import GridSpec, save_field, trajectory_lq_distance
from .random_data import (
    DistributionSpec,
    Ensemble,
    EnsembleMember,
    build_partition,
    collocate_data,
    sample_latent,
)
from .solver import SchemeConfig, TravelingWaveCase, manufactured_convergence, \
    self_convergence, solve
from .stats import (
    PairedEnsemble,
    PairedSample,
    boundedness_in_probability,
    convergence_in_probability_diagnostic,
    empirical_field_mean,
    empirical_functional_mean,
    energy_moment_bound,
    make_functional,
    pair_by_index,
    r_barycenter,
)

__all__ = [
    "LadderLevel",
    "StatsRequest",
    "ExperimentConfig",
    "ExperimentReport",
    "run_weak",
    "run_strong",
    "run_deterministic_convergence",
]


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


@dataclass(frozen=True)
class LadderLevel:
    """One rung: ensemble size and grid resolution.

    N is the sample count in weak mode and the number of partition cells
    per latent axis in strong mode (total cells N^K).
    """

    N: int
    n_cells: int

    def to_dict(self) -> dict:
        return {"N": self.N, "n_cells": self.n_cells}


@dataclass(frozen=True)
class StatsRequest:
    M_grid: tuple = (2.0, 5.0, 10.0)
    eps_grid: tuple = (0.001, 0.01, 0.1)
    barycenters: tuple = ((2.0, 2.0, "density"),)
    functionals: tuple = ()
    n_report_times: int = 3
    diagnostic_q: float = 2.0

    def to_dict(self) -> dict:
        return {
            "M_grid": list(self.M_grid),
            "eps_grid": list(self.eps_grid),
            "barycenters": [list(b) for b in self.barycenters],
            "functionals": [dict(f) for f in self.functionals],
            "n_report_times": self.n_report_times,
            "diagnostic_q": self.diagnostic_q,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "StatsRequest":
        return cls(
            M_grid=tuple(doc.get("M_grid", (2.0, 5.0, 10.0))),
            eps_grid=tuple(doc.get("eps_grid", (0.001, 0.01, 0.1))),
            barycenters=tuple(
                (float(b[0]), float(b[1]), b[2] if len(b) > 2 else "density")
                for b in doc.get("barycenters", [[2.0, 2.0, "density"]])
            ),
            functionals=tuple(doc.get("functionals", ())),
            n_report_times=doc.get("n_report_times", 3),
            diagnostic_q=doc.get("diagnostic_q", 2.0),
        )


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str  # weak | strong | convergence
    ladder: tuple
    scheme: SchemeConfig
    distribution: DistributionSpec
    stats: StatsRequest = StatsRequest()
    seed: int = 0
    threads: int = 1
    failure_budget: float = 0.1
    point_rule: str = "center"
    convergence: dict | None = None

    def __post_init__(self):
        if self.mode not in ("weak", "strong", "convergence"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode != "convergence":
            if not self.ladder:
                raise ValueError("ladder must not be empty")
            Ns = [lvl.N for lvl in self.ladder]
            ns = [lvl.n_cells for lvl in self.ladder]
            if any(b < a for a, b in zip(Ns, Ns[1:])):
                raise ValueError("ensemble sizes must be nondecreasing along the ladder")
            if any(b < a for a, b in zip(ns, ns[1:])):
                raise ValueError("grid resolutions must be nondecreasing along the ladder")
        if not (0 <= self.failure_budget <= 1):
            raise ValueError("failure budget must lie in [0, 1]")
        if self.point_rule not in ("center", "random"):
            raise ValueError("point_rule must be center or random")

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "ladder": [lvl.to_dict() for lvl in self.ladder],
            "scheme": self.scheme.to_dict(),
            "distribution": self.distribution.to_dict(),
            "stats": self.stats.to_dict(),
            "seed": self.seed,
            "threads": self.threads,
            "failure_budget": self.failure_budget,
            "point_rule": self.point_rule,
            "convergence": self.convergence,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        return cls(
            mode=doc["mode"],
            ladder=tuple(LadderLevel(int(l["N"]), int(l["n_cells"])) for l in doc.get("ladder", ())),
            scheme=SchemeConfig.from_dict(doc["scheme"]),
            distribution=DistributionSpec.from_dict(doc["distribution"]),
            stats=StatsRequest.from_dict(doc.get("stats", {})),
            seed=int(doc.get("seed", 0)),
            threads=int(doc.get("threads", 1)),
            failure_budget=float(doc.get("failure_budget", 0.1)),
            point_rule=doc.get("point_rule", "center"),
            convergence=doc.get("convergence"),
        )

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


@dataclass
class ExperimentReport:
    """Structured summary plus the tables and field snapshots to persist."""

    summary: dict
    tables: dict = dc_field(default_factory=dict)  # rel path -> (header, rows)
    fields: dict = dc_field(default_factory=dict)  # rel path -> Field

    def write(self, out_dir: str) -> None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "report.json"), "w") as fh:
            json.dump(self.summary, fh, sort_keys=True, indent=1)
            fh.write("\n")
        for rel in sorted(self.tables):
            header, rows = self.tables[rel]
            path = os.path.join(out_dir, rel)
            os.makedirs(os.path.dirname(path), exist_ok=True)
            with open(path, "w") as fh:
                fh.write(",".join(header) + "\n")
                for row in rows:
                    fh.write(",".join(_fmt(x) if isinstance(x, float) else str(x) for x in row))
                    fh.write("\n")
        for rel in sorted(self.fields):
            path = os.path.join(out_dir, rel)
            os.makedirs(os.path.dirname(path), exist_ok=True)
            save_field(self.fields[rel], path)


# ---------------------------------------------------------------------------
# shared machinery


def _solve_members(records, grid: GridSpec, scheme: SchemeConfig, threads: int):
    def run(rec):
        return solve(rec, grid, scheme)

    if threads <= 1:
        return [run(r) for r in records]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(run, records))


def _provenance(config: ExperimentConfig) -> dict:
    return {
        "config_sha256": config.config_hash(),
        "seed": config.seed,
        "mode": config.mode,
        "package_version": __version__,
    }


def _level_statistics(ens: Ensemble, config: ExperimentConfig, level_idx: int,
                      level: LadderLevel, report: ExperimentReport) -> dict:
    req = config.stats
    prefix = f"level_{level_idx:02d}"
    doc = {
        "level": level_idx,
        "N": level.N,
        "n_cells": level.n_cells,
        "num_members": len(ens),
        "unresolved_mass": ens.unresolved_mass,
        "tainted": ens.unresolved_mass > config.failure_budget,
        "member_summaries": [m.report.to_summary() for m in ens.members],
    }
    bnd = boundedness_in_probability(ens, req.M_grid)
    doc["boundedness"] = {
        "thresholds": [float(m) for m in bnd.thresholds],
        "exceedance": [float(e) for e in bnd.exceedance],
    }
    report.tables[f"{prefix}/boundedness.csv"] = (("threshold", "exceedance"), bnd.rows())

    # means, energies, and barycenters need at least one completed member;
    # a fully unresolved level still reports its boundedness statistics
    if not ens.completed_mask.any():
        doc.update({"functional_means": {}, "energy_moment_bound": None,
                    "field_mean_times": [], "barycenters": []})
        return doc

    means = {}
    for fdoc in req.functionals:
        name, F = make_functional(fdoc)
        means[name] = empirical_functional_mean(ens, F)
    doc["functional_means"] = means
    if means:
        report.tables[f"{prefix}/functional_means.csv"] = (
            ("functional", "mean"),
            [(k, float(v)) for k, v in sorted(means.items())],
        )

    doc["energy_moment_bound"] = energy_moment_bound(ens)

    T = min(m.report.trajectory.final_time
            for m, ok in zip(ens.members, ens.completed_mask) if ok)
    times = np.linspace(0.0, T, req.n_report_times)
    for which in ("density", "momentum"):
        for j, (t, fld) in enumerate(empirical_field_mean(ens, which, times=times)):
            report.fields[f"{prefix}/mean_{which}_t{j}.csv"] = fld
    doc["field_mean_times"] = [float(t) for t in times]

    bary_rows = []
    for r, q, which in req.barycenters:
        res = r_barycenter(ens, which=which, r=r, q=q)
        report.fields[f"{prefix}/barycenter_{which}_r{_fmt(r)}_q{_fmt(q)}.csv"] = res.minimizer
        bary_rows.append(
            {
                "r": r,
                "q": q,
                "which": which,
                "time": res.time,
                "objective": res.objective,
                "iterations": res.iterations,
                "first_order_residual": res.first_order_residual,
                "converged": res.converged,
            }
        )
    doc["barycenters"] = bary_rows
    return doc


def _diagnostic_doc(pairs: PairedEnsemble, config: ExperimentConfig, tag: str,
                    report: ExperimentReport) -> dict:
    req = config.stats
    diag = convergence_in_probability_diagnostic(pairs, req.eps_grid, q=req.diagnostic_q)
    finite = diag.distances[np.isfinite(diag.distances)]
    doc = {
        "eps": [float(e) for e in diag.eps_grid],
        "fractions": [float(f) for f in diag.fractions],
        "mean_distance": float(finite.mean()) if len(finite) else None,
        "max_distance": float(finite.max()) if len(finite) else None,
    }
    report.tables[f"cross_level/diagnostic_{tag}.csv"] = (("eps", "fraction"), diag.rows())
    return doc


# ---------------------------------------------------------------------------
# runners


def run_weak(config: ExperimentConfig) -> ExperimentReport:
    """Monte-Carlo ladder: sample, solve, and post-process level by level."""
    if config.mode != "weak":
        raise ValueError("config mode must be 'weak'")
    spec = config.distribution
    report = ExperimentReport(summary={"provenance": _provenance(config)})
    ensembles = []
    levels = []
    for idx, level in enumerate(config.ladder):
        latents = sample_latent(config.seed, level.N, spec.K)
        records = [spec.realize(om) for om in latents]
        grid = GridSpec(spec.d, level.n_cells, spec.period)
        solves = _solve_members(records, grid, config.scheme, config.threads)
        members = [EnsembleMember(latents[i], records[i], solves[i]) for i in range(level.N)]
        ens = Ensemble(members, np.full(level.N, 1.0 / level.N), "weak")
        ensembles.append(ens)
        levels.append(_level_statistics(ens, config, idx, level, report))
    report.summary["levels"] = levels

    diagnostics = []
    for idx in range(len(ensembles) - 1):
        pairs = pair_by_index(ensembles[idx], ensembles[idx + 1])
        doc = _diagnostic_doc(pairs, config, f"{idx}_{idx + 1}", report)
        doc["pair"] = [idx, idx + 1]
        diagnostics.append(doc)
    report.summary["cross_level"] = {"diagnostics": diagnostics}
    _means_by_level_table(levels, report)
    return report


def _means_by_level_table(levels: list, report: ExperimentReport) -> None:
    names = sorted({k for lvl in levels for k in lvl["functional_means"]})
    if not names:
        return
    rows = []
    for lvl in levels:
        rows.append(
            (lvl["level"], lvl["N"], lvl["n_cells"],
             *(float(lvl["functional_means"].get(n, math.nan)) for n in names))
        )
    report.tables["cross_level/functional_means_by_level.csv"] = (
        ("level", "N", "n_cells", *names),
        rows,
    )


def run_strong(config: ExperimentConfig) -> ExperimentReport:
    """Collocation ladder; cross-level errors are evaluated at the finest
    level's collocation points through each level's piecewise-constant map."""
    if config.mode != "strong":
        raise ValueError("config mode must be 'strong'")
    spec = config.distribution
    gamma = spec.gamma
    report = ExperimentReport(summary={"provenance": _provenance(config)})
    ensembles = []
    partitions = []
    levels = []
    for idx, level in enumerate(config.ladder):
        part = build_partition(spec.K, level.N, rule=config.point_rule,
                               seed=config.seed if config.point_rule == "random" else None)
        records = collocate_data(spec, part)
        grid = GridSpec(spec.d, level.n_cells, spec.period)
        solves = _solve_members(records, grid, config.scheme, config.threads)
        members = [
            EnsembleMember(part.points[i], records[i], solves[i])
            for i in range(part.num_cells)
        ]
        ens = Ensemble(members, part.weights, "strong")
        ensembles.append(ens)
        partitions.append(part)
        levels.append(_level_statistics(ens, config, idx, level, report))
    report.summary["levels"] = levels

    # expectation-norm exponents below the integrability ceilings gamma and 2 gamma/(gamma+1)
    r_exp = max(1.0, 0.5 * (1.0 + gamma))
    q_mom = 2.0 * gamma / (gamma + 1.0)
    s_exp = max(1.0, 0.5 * (1.0 + q_mom))
    diagnostics = []
    error_rows = []
    fine_idx = len(ensembles) - 1
    fine_ens, fine_part = ensembles[fine_idx], partitions[fine_idx]
    for idx in range(fine_idx):
        ens, part = ensembles[idx], partitions[idx]
        samples = []
        rho_err = mom_err = 0.0
        resolved_mass = 0.0
        for j in range(fine_part.num_cells):
            omega = fine_part.points[j]
            w = float(fine_part.weights[j])
            coarse_member = ens.members[part.locate(omega)]
            fine_member = fine_ens.members[j]
            ta = (coarse_member.report.trajectory
                  if coarse_member.report.status == "completed" else None)
            tb = (fine_member.report.trajectory
                  if fine_member.report.status == "completed" else None)
            samples.append(PairedSample(omega, w, ta, tb))
            if ta is not None and tb is not None:
                resolved_mass += w
                rho_err += w * trajectory_lq_distance(ta, tb, q=gamma, which="rho") ** r_exp
                mom_err += w * trajectory_lq_distance(ta, tb, q=q_mom, which="momentum") ** s_exp
        doc = _diagnostic_doc(PairedEnsemble(samples), config, f"{idx}_{fine_idx}", report)
        doc["pair"] = [idx, fine_idx]
        diagnostics.append(doc)
        error_rows.append(
            {
                "level": idx,
                "rho_error": rho_err,
                "momentum_error": mom_err,
                "r": r_exp,
                "s": s_exp,
                "resolved_mass": resolved_mass,
            }
        )
    report.summary["cross_level"] = {
        "diagnostics": diagnostics,
        "expectation_errors": error_rows,
    }
    if error_rows:
        report.tables["cross_level/expectation_errors.csv"] = (
            ("level", "rho_error", "momentum_error"),
            [(row["level"], float(row["rho_error"]), float(row["momentum_error"]))
             for row in error_rows],
        )
    _means_by_level_table(levels, report)
    return report


def run_deterministic_convergence(config: ExperimentConfig) -> ExperimentReport:
    """Manufactured or self-convergence study for one fixed data record."""
    if config.mode != "convergence":
        raise ValueError("config mode must be 'convergence'")
    doc = config.convergence or {}
    study = doc.get("study", "manufactured")
    report = ExperimentReport(summary={"provenance": _provenance(config)})
    if study == "manufactured":
        case = TravelingWaveCase(
            amplitude=doc.get("amplitude", 0.1),
            speed=doc.get("speed", 0.5),
            a_coef=doc.get("a_coef", 1.0),
            mu=doc.get("mu", 0.05),
            eta=doc.get("eta", 0.0),
            period=config.distribution.period,
            horizon=max(1.0, config.scheme.T),
        )
        rows = manufactured_convergence(case, doc.get("grids", [32, 64, 128]), config.scheme)
    elif study == "self":
        spec = config.distribution
        data = spec.realize(np.full(spec.K, 0.5))
        rows = self_convergence(data, doc.get("grids", [8, 16, 32]), doc.get("ref_n", 64),
                                config.scheme)
    else:
        raise ValueError(f"unknown convergence study {study!r}")
    report.summary["rows"] = [
        {"n": r.n, "h": r.h, "error_l1": r.error_l1, "order": r.order} for r in rows
    ]
    report.tables["convergence.csv"] = (
        ("n", "h", "error_l1", "order"),
        [(r.n, float(r.h), float(r.error_l1), float(r.order) if r.order is not None else math.nan)
         for r in rows],
    )
    return report
