"""Build a JSON experiment config and drive the command-line runner with it.

The same file works with the installed entry point:

    nsuq run-weak --config demo-config.json --out demo-out --threads 2

Run from the repository root:  python3 demos/05_cli_experiment.py
"""

import json
import pathlib

from nsuq.cli import main
from nsuq.experiments import ExperimentConfig, LadderLevel, StatsRequest
from nsuq.physics import AdmissibleBounds, ForcingSpec
from nsuq.random_data import (
    DistributionSpec,
    RandomFieldSpec,
    RandomMode,
    ScalarTransform,
)
from nsuq.solver import SchemeConfig

bounds = AdmissibleBounds(rho_lower=0.5, mu_lower=0.01, a_lower=0.5, a_upper=1.5, g_sup=1.0)
spec = DistributionSpec(
    K=1, d=1, period=1.0, gamma=2.0, bounds=bounds,
    mu=ScalarTransform("uniform", 0.02, 0.08, latent_index=0),
    eta=ScalarTransform("const", 0.0),
    a=ScalarTransform("const", 1.0),
    rho0=RandomFieldSpec(1.0, (RandomMode((1,), "sin", 0.08),)),
    u0=(RandomFieldSpec(0.0, ()),),
    g_base=ForcingSpec.zero(1),
    g_scale=ScalarTransform("const", 0.0),
)
config = ExperimentConfig(
    mode="weak",
    ladder=(LadderLevel(4, 16), LadderLevel(8, 32)),
    scheme=SchemeConfig(cfl=0.4, T=0.05),
    distribution=spec,
    stats=StatsRequest(M_grid=(1.5, 5.0), eps_grid=(1e-4,)),
    seed=7,
)

cfg_path = pathlib.Path("demo-config.json")
cfg_path.write_text(json.dumps(config.to_dict(), indent=1, sort_keys=True))
print(f"wrote {cfg_path}")

code = main(["run-weak", "--config", str(cfg_path), "--out", "demo-out", "--threads", "2"])
print(f"runner exit code: {code}")

report = json.loads(pathlib.Path("demo-out/report.json").read_text())
print(f"config hash: {report['provenance']['config_sha256'][:16]}...")
print("files written under demo-out/: report.json plus per-level CSV tables "
      "and field snapshots")
