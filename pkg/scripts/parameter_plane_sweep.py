#!/usr/bin/env python3
"""Predicted-visibility sweep over the (collapse rate, correlation length) plane.

Each grid point is a cheap unitary run whose summary carries the visibility
prediction for that SI parameter point; the GRW and Adler presets are added
as tagged runs so the plotting sidecar can mark them.  Output feeds
`plot plane`.

Usage: python scripts/parameter_plane_sweep.py [--out DIR]
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from collapsim.runner import run_scenario
from collapsim.scenario import parse_config

POINT = """
name: plane-{tag}
model: unitary
lattice: {{sites: 2, spacing: 1.0}}
initial_state: {{centers: [0.0, 1.0], width: 0.0, weights: [1.0, 1.0]}}
integrator: {{dt: 0.05, horizon: 0.5, stride: 5}}
ensemble: {{trajectories: 2, master_seed: 1}}
observables: [site_probabilities]
analysis: {{oracle_compare: "off"}}
visibility_model:
  constituents_per_volume: 1000
  volume_count: 100
  separation_m: 1.0e-6
  duration_s: 2.0
  rate_si: {rate}
  correlation_length_si: {corr}
"""

PRESET_POINT = """
name: plane-preset-{tag}
model: unitary
lattice: {{sites: 2, spacing: 1.0}}
initial_state: {{centers: [0.0, 1.0], width: 0.0, weights: [1.0, 1.0]}}
params: {{preset: {tag}}}
integrator: {{dt: 0.05, horizon: 0.5, stride: 5}}
ensemble: {{trajectories: 2, master_seed: 1}}
observables: [site_probabilities]
analysis: {{oracle_compare: "off"}}
visibility_model:
  constituents_per_volume: 1000
  volume_count: 100
  separation_m: 1.0e-6
  duration_s: 2.0
"""


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs/plane-sweep")
    args = parser.parse_args()

    rates = np.logspace(-18, -6, 7)
    lengths = np.logspace(-8, -6, 5)
    failures = 0
    for rate in rates:
        for corr in lengths:
            tag = f"r{rate:.0e}_c{corr:.0e}".replace("+", "").replace("-", "m")
            # note: pyyaml only reads scientific notation with an explicit mantissa dot
            cfg = parse_config(POINT.format(tag=tag, rate=f"{rate:.9e}", corr=f"{corr:.9e}"))
            code, _ = run_scenario(cfg, Path(args.out) / tag)
            failures += code != 0
    for preset_tag in ("GRW", "Adler"):
        cfg = parse_config(PRESET_POINT.format(tag=preset_tag))
        code, _ = run_scenario(cfg, Path(args.out) / f"preset_{preset_tag}")
        failures += code != 0
    print(f"wrote {len(rates) * len(lengths) + 2} plane points to {args.out}")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
