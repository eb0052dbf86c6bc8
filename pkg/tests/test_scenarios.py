"""The shipped scenario files must parse, and the cheap ones must run clean."""

import json
from dataclasses import replace
from pathlib import Path

import pytest

from collapsim.runner import run_scenario
from collapsim.scenario import EnsembleSection, assemble, parse_config

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"
ALL_SCENARIOS = sorted(SCENARIO_DIR.glob("*.yaml"))


@pytest.mark.parametrize("path", ALL_SCENARIOS, ids=lambda p: p.stem)
def test_scenario_parses_and_assembles(path):
    cfg = parse_config(path.read_text(), name=path.stem)
    assembled = assemble(cfg)
    assert assembled.problem.init.dimension >= 2


def test_unitary_scenario_runs_clean(tmp_path):
    cfg = parse_config((SCENARIO_DIR / "unitary_check.yaml").read_text(), name="unitary")
    code, paths = run_scenario(cfg, tmp_path)
    assert code == 0
    summary = json.loads(Path(paths["summary.json"]).read_text())
    assert summary["unitary_check"]["passed"]
    assert summary["oracle"]["passed"]
    assert summary["energy_slope"]["slope"] == pytest.approx(0.0, abs=1e-10)


def test_born_scenario_reduced_size(tmp_path):
    cfg = parse_config((SCENARIO_DIR / "born_rule.yaml").read_text(), name="born")
    cfg = replace(cfg, ensemble=EnsembleSection(1500, cfg.ensemble.master_seed))
    code, paths = run_scenario(cfg, tmp_path)
    assert code == 0
    summary = json.loads(Path(paths["summary.json"]).read_text())
    assert summary["born"]["within_3se"]
    assert summary["oracle"]["passed"]


def test_grw_scenario_reduced_size(tmp_path):
    cfg = parse_config((SCENARIO_DIR / "grw_pair.yaml").read_text(), name="grw")
    cfg = replace(cfg, ensemble=EnsembleSection(2000, cfg.ensemble.master_seed))
    code, paths = run_scenario(cfg, tmp_path)
    assert code == 0
    summary = json.loads(Path(paths["summary.json"]).read_text())
    fit = summary["decay_fit"]
    assert "skipped" in summary["oracle"]
    # looser than the acceptance gate: this run uses a fifth of the statistics
    assert fit["rate"] == pytest.approx(fit["predicted_rate"], rel=0.2)
