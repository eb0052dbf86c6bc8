#!/usr/bin/env python3
"""Regenerate the plotting sidecar's test fixtures from the primary pipeline.

Writes small but real run directories under frontend/tests/fixtures/.  Rerun
after changing any artifact format and commit the result.
"""

import subprocess
import sys
from dataclasses import replace
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "frontend" / "tests" / "fixtures"

sys.path.insert(0, str(ROOT / "src"))

from collapsim.runner import run_scenario  # noqa: E402
from collapsim.scenario import EnsembleSection, parse_config  # noqa: E402


def run(config_path: Path, out: Path, trajectories=None):
    cfg = parse_config(config_path.read_text(), name=config_path.stem)
    if trajectories is not None:
        cfg = replace(cfg, ensemble=EnsembleSection(trajectories, cfg.ensemble.master_seed))
    code, _ = run_scenario(cfg, out)
    if code != 0:
        raise SystemExit(f"{config_path} exited {code}")
    print(f"wrote {out}")


NO_DECAY = """
name: no-decay
model: unitary
lattice: {sites: 2, spacing: 10.0}
initial_state: {centers: [0.0, 10.0], width: 0.0, weights: [1.0, 1.0]}
integrator: {dt: 0.01, horizon: 2.0, stride: 10}
ensemble: {trajectories: 4, master_seed: 2}
observables: ["coherence:0,1"]
analysis: {decay_fit: {pair: [0, 1]}}
"""


def main():
    scenarios = ROOT / "scenarios"
    run(scenarios / "threshold_d2.yaml", FIXTURES / "decay-run", trajectories=2000)
    run(scenarios / "born_rule.yaml", FIXTURES / "born-run", trajectories=1500)
    run(scenarios / "unitary_check.yaml", FIXTURES / "unitary-run")

    cfg = parse_config(NO_DECAY)
    code, _ = run_scenario(cfg, FIXTURES / "no-decay-run")
    if code != 0:
        raise SystemExit(f"no-decay fixture exited {code}")
    print(f"wrote {FIXTURES / 'no-decay-run'}")

    subprocess.run(
        [sys.executable, str(ROOT / "scripts" / "threshold_sweep.py"),
         "--out", str(FIXTURES / "threshold-sweep"), "--trajectories", "2000"],
        check=True, cwd=ROOT)
    subprocess.run(
        [sys.executable, str(ROOT / "scripts" / "parameter_plane_sweep.py"),
         "--out", str(FIXTURES / "plane-sweep")],
        check=True, cwd=ROOT)


if __name__ == "__main__":
    main()
