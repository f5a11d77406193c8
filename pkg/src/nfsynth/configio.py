"""Scenario configuration (de)serialization.

The JSON schema mirrors :class:`~nfsynth.scenario.ScenarioConfig`; every
field is optional except ``case``, ``d1`` and ``target`` (and ``wave.k``),
with defaults resolved on load.  See docs/schema.md for the field-by-field
description.
"""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path
from typing import Optional

from .errors import ConfigurationError
from .geometry import BallExterior, RegionSpec, SectorShell, SphereSurface
from .potentials import WaveContext
from .scenario import (
    OutputRequests,
    SamplingConfig,
    ScenarioConfig,
    SliceSpec,
    SnapshotSpec,
    TargetField,
)


def region_to_dict(region: Optional[RegionSpec]) -> Optional[dict]:
    if region is None:
        return None
    if isinstance(region, SectorShell):
        return {
            "kind": "sector_shell",
            "r_min": region.r_min,
            "r_max": region.r_max,
            "theta_min": region.theta_min,
            "theta_max": region.theta_max,
            "phi_min": region.phi_min,
            "phi_max": region.phi_max,
            "offset": list(region.offset),
        }
    if isinstance(region, SphereSurface):
        return {"kind": "sphere_surface", "center": list(region.center), "radius": region.radius}
    if isinstance(region, BallExterior):
        return {"kind": "ball_exterior", "center": list(region.center), "radius": region.radius}
    raise ConfigurationError(f"unknown region type {type(region).__name__}")


def region_from_dict(doc: Optional[dict]) -> Optional[RegionSpec]:
    if doc is None:
        return None
    kind = doc.get("kind")
    if kind == "sector_shell":
        return SectorShell(
            r_min=float(doc["r_min"]),
            r_max=float(doc["r_max"]),
            theta_min=float(doc["theta_min"]),
            theta_max=float(doc["theta_max"]),
            phi_min=float(doc["phi_min"]),
            phi_max=float(doc["phi_max"]),
            offset=tuple(float(v) for v in doc.get("offset", (0.0, 0.0, 0.0))),
        )
    if kind == "sphere_surface":
        return SphereSurface(
            center=tuple(float(v) for v in doc.get("center", (0.0, 0.0, 0.0))),
            radius=float(doc["radius"]),
        )
    if kind == "ball_exterior":
        return BallExterior(
            center=tuple(float(v) for v in doc.get("center", (0.0, 0.0, 0.0))),
            radius=float(doc["radius"]),
        )
    raise ConfigurationError(f"unknown region kind {kind!r}")


def config_to_dict(config: ScenarioConfig) -> dict:
    """Full effective configuration with every default resolved."""
    c = config
    out = {
        "name": c.name,
        "case": c.case,
        "wave": {
            "k": c.ctx.k,
            "rho": c.ctx.rho,
            "c": c.ctx.c,
            "eta1": c.ctx.eta1,
            "eta2": c.ctx.eta2,
        },
        "max_degree": c.max_degree,
        "source_radius": c.source_radius,
        "physical_surface_radius": c.physical_surface_radius,
        "d1": region_to_dict(c.d1),
        "d2": region_to_dict(c.d2),
        "target": {
            "kind": c.target.kind,
            "direction": list(c.target.direction),
            "phase_sign": c.target.phase_sign,
        },
        "delta": c.delta,
        "alpha_range": list(c.alpha_range),
        "morozov_tol": c.morozov_tol,
        "sampling": asdict(c.sampling),
        "outputs": {
            "slices": [asdict(s) for s in c.outputs.slices],
            "snapshots": None
            if c.outputs.snapshots is None
            else {
                "slice_name": c.outputs.snapshots.slice_name,
                "phases": list(c.outputs.snapshots.phases),
            },
            "traces": c.outputs.traces,
            "d1_error_map": None
            if c.outputs.d1_error_map is None
            else list(c.outputs.d1_error_map),
            "density_map": None
            if c.outputs.density_map is None
            else list(c.outputs.density_map),
        },
    }
    # tuples serialize as lists; normalize sampling nested tuples
    for key, val in out["sampling"].items():
        if isinstance(val, tuple):
            out["sampling"][key] = list(val)
    for s in out["outputs"]["slices"]:
        s["x_range"] = list(s["x_range"])
        s["y_range"] = list(s["y_range"])
    return out


_KNOWN_TOP = {
    "name", "case", "wave", "max_degree", "source_radius",
    "physical_surface_radius", "d1", "d2", "target", "delta", "alpha_range",
    "morozov_tol", "sampling", "outputs",
}


def config_from_dict(doc: dict) -> ScenarioConfig:
    """Build a configuration from a JSON document, applying defaults.

    Raises :class:`ConfigurationError` listing every violation found.
    """
    violations = [f"unknown field {k!r}" for k in doc.keys() if k not in _KNOWN_TOP]
    for required in ("case", "d1", "target"):
        if required not in doc:
            violations.append(f"missing required field {required!r}")
    if violations:
        raise ConfigurationError("; ".join(violations))

    wave = doc.get("wave", {})
    if "k" not in wave:
        raise ConfigurationError("missing required field 'wave.k'")
    try:
        ctx = WaveContext(
            k=float(wave["k"]),
            rho=float(wave.get("rho", 1.0)),
            c=float(wave.get("c", 1.0)),
            eta1=float(wave.get("eta1", 1.0)),
            eta2=None if wave.get("eta2") is None else float(wave["eta2"]),
        )
        d1 = region_from_dict(doc["d1"])
        if not isinstance(d1, SectorShell):
            raise ConfigurationError("d1 must be a sector_shell region")
        d2 = region_from_dict(doc.get("d2"))
        tgt = doc["target"]
        target = TargetField(
            kind=tgt.get("kind", "plane_wave"),
            direction=tuple(float(v) for v in tgt.get("direction", (1.0, 0.0, 0.0))),
            phase_sign=int(tgt.get("phase_sign", -1)),
        )
        sampling_doc = doc.get("sampling", {})
        defaults = SamplingConfig()
        known_sampling = set(asdict(defaults).keys())
        unknown = [k for k in sampling_doc if k not in known_sampling]
        if unknown:
            raise ConfigurationError(
                "; ".join(f"unknown sampling field {k!r}" for k in unknown)
            )
        kwargs = {}
        for key, default in asdict(defaults).items():
            val = sampling_doc.get(key, default)
            if isinstance(default, tuple) or isinstance(val, list):
                val = tuple(val)
            kwargs[key] = val
        sampling = SamplingConfig(**kwargs)

        out_doc = doc.get("outputs", {})
        slices = tuple(
            SliceSpec(
                name=s["name"],
                z=float(s.get("z", 0.0)),
                x_range=tuple(float(v) for v in s["x_range"]),
                y_range=tuple(float(v) for v in s["y_range"]),
                nx=int(s.get("nx", 161)),
                ny=int(s.get("ny", 161)),
            )
            for s in out_doc.get("slices", [])
        )
        snap_doc = out_doc.get("snapshots")
        snapshots = None
        if snap_doc is not None:
            snapshots = SnapshotSpec(
                slice_name=snap_doc["slice_name"],
                phases=tuple(float(p) for p in snap_doc["phases"]),
            )
        outputs = OutputRequests(
            slices=slices,
            snapshots=snapshots,
            traces=bool(out_doc.get("traces", False)),
            d1_error_map=None
            if out_doc.get("d1_error_map") is None
            else tuple(int(v) for v in out_doc["d1_error_map"]),
            density_map=None
            if out_doc.get("density_map") is None
            else tuple(int(v) for v in out_doc["density_map"]),
        )
        return ScenarioConfig(
            case=doc["case"],
            ctx=ctx,
            d1=d1,
            d2=d2,
            target=target,
            max_degree=int(doc.get("max_degree", 30)),
            source_radius=float(doc.get("source_radius", 0.01)),
            physical_surface_radius=None
            if doc.get("physical_surface_radius") is None
            else float(doc["physical_surface_radius"]),
            delta=float(doc.get("delta", 1e-3)),
            alpha_range=tuple(float(v) for v in doc.get("alpha_range", (1e-16, 1e2))),
            morozov_tol=float(doc.get("morozov_tol", 0.05)),
            sampling=sampling,
            outputs=outputs,
            name=doc.get("name", "custom"),
        )
    except ConfigurationError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigurationError(f"malformed configuration: {exc}") from exc


def load_config(path) -> ScenarioConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigurationError("config root must be a JSON object")
    return config_from_dict(doc)


def save_config(path, config: ScenarioConfig) -> Path:
    path = Path(path)
    path.write_text(json.dumps(config_to_dict(config), indent=2) + "\n")
    return path
