"""Shared fixtures: session-scoped scenario runs and a CLI output tree.

The three built-in runs and the CLI round-trip dominate suite runtime, so
they execute once per session and are shared by the scenario, CLI and
acceptance tests.
"""

import json
import subprocess
import sys
from dataclasses import replace

import numpy as np
import pytest

from nfsynth.configio import save_config
from nfsynth.geometry import SectorShell
from nfsynth.potentials import WaveContext
from nfsynth.scenario import (
    OutputRequests,
    SamplingConfig,
    ScenarioConfig,
    SliceSpec,
    SnapshotSpec,
    TargetField,
    builtin_scenario,
    run_scenario,
)


def small_scenario(**overrides) -> ScenarioConfig:
    """A cheap but complete scenario: control region far enough from the
    source that light quadrature rules are already exact."""
    base = dict(
        case="custom",
        ctx=WaveContext(k=10.0),
        d1=SectorShell(0.05, 0.07, -np.pi / 4, np.pi / 4, 3 * np.pi / 4, 5 * np.pi / 4),
        target=TargetField("plane_wave", (1.0, 0.0, 0.0), -1),
        max_degree=8,
        source_radius=0.01,
        physical_surface_radius=0.015,
        delta=5e-3,
        sampling=SamplingConfig(
            control_density=60,
            interior_grid=(4, 4, 4),
            source_rule=(32, 64),
            far_rule=(24, 48),
            far_radius=0.03,
            render_rule=(24, 48),
            null_sphere_rule=(16, 32),
            trace_rule=(8, 16),
            far_field_radii=(10.0, 1000.0, 7),
            far_field_directions=130,
            power_rule=(16, 32),
        ),
        name="small",
    )
    base.update(overrides)
    return ScenarioConfig(**base)


def _metrics_only(config):
    return replace(config, outputs=OutputRequests())


@pytest.fixture(scope="session")
def scenario_i_run():
    config = _metrics_only(builtin_scenario("i"))
    return config, run_scenario(config)


@pytest.fixture(scope="session")
def scenario_ii_run():
    config = _metrics_only(builtin_scenario("ii"))
    return config, run_scenario(config)


@pytest.fixture(scope="session")
def scenario_iii_run():
    config = _metrics_only(builtin_scenario("iii"))
    return config, run_scenario(config)


@pytest.fixture(scope="session")
def cli_case_i(tmp_path_factory):
    """Built-in case i run through the real CLI with trimmed bulk outputs."""
    root = tmp_path_factory.mktemp("cli_case_i")
    config = replace(
        builtin_scenario("i"),
        outputs=OutputRequests(
            slices=(SliceSpec("zoom", 0.0, (-0.02, 0.02), (-0.02, 0.02), 41, 41),),
            snapshots=SnapshotSpec("zoom", (np.pi * 15 / 50, np.pi * 16 / 50)),
            traces=True,
            d1_error_map=(21, 21),
            density_map=(37, 19),
        ),
        sampling=SamplingConfig(trace_rule=(12, 24)),
    )
    config_path = root / "config.json"
    save_config(config_path, config)
    out_dir = root / "out"
    proc = subprocess.run(
        [
            sys.executable,
            "-m",
            "nfsynth.cli",
            "run",
            str(config_path),
            "--out",
            str(out_dir),
            "--format",
            "both",
        ],
        capture_output=True,
        text=True,
        timeout=1200,
    )
    assert proc.returncode == 0, f"CLI failed: {proc.stderr}"
    return config, out_dir
