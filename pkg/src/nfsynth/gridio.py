"""File formats for grids, densities, metrics, traces and curves.

A grid file is a JSON header ``<name>.grid.json`` next to either a raw
binary payload ``<name>.grid.bin`` (little-endian float64 pairs re, im in
row-major order, ``ny * nx`` complex values) or a CSV payload
``<name>.grid.csv`` with columns ``x, y, re, im`` printed to 17 significant
digits, one row per grid point in the same ordering (index ``i*nx + j``
maps to ``(x_j, y_i)``).  Masked points carry NaN.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DataError
from .potentials import DensityCoefficients
from .scenario import FrameSet, GridOutput, MetricsReport, TraceSet

_FMT = "%.17g"


# ---------------------------------------------------------------------------
# Grid files
# ---------------------------------------------------------------------------

def _grid_header(grid: GridOutput, scenario_hash: str, fmt: str, extra: Optional[dict] = None) -> dict:
    header = {
        "name": grid.name,
        "quantity": grid.quantity,
        "nx": grid.nx,
        "ny": grid.ny,
        "z": grid.z,
        "x_range": list(grid.x_range),
        "y_range": list(grid.y_range),
        "axes": list(grid.axes),
        "scenario": scenario_hash,
        "format": fmt,
    }
    if extra:
        header.update(extra)
    return header


def _grid_axes(header: dict):
    x = np.linspace(header["x_range"][0], header["x_range"][1], header["nx"])
    y = np.linspace(header["y_range"][0], header["y_range"][1], header["ny"])
    return x, y


def write_grid(
    out_dir,
    grid: GridOutput,
    scenario_hash: str = "",
    fmt: str = "bin",
    name: Optional[str] = None,
    extra_header: Optional[dict] = None,
) -> list[Path]:
    """Write one grid in the requested format(s); returns the written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    base = name or grid.name
    formats = ("bin", "csv") if fmt == "both" else (fmt,)
    written = []
    for f in formats:
        header = _grid_header(grid, scenario_hash, f, extra_header)
        hpath = out_dir / f"{base}.grid.json"
        hpath.write_text(json.dumps(header, indent=2) + "\n")
        values = grid.values.ravel()
        if f == "bin":
            payload = np.empty(2 * values.size, dtype="<f8")
            payload[0::2] = values.real
            payload[1::2] = values.imag
            path = out_dir / f"{base}.grid.bin"
            path.write_bytes(payload.tobytes())
        elif f == "csv":
            x, y = _grid_axes(header)
            X, Y = np.meshgrid(x, y, indexing="xy")
            path = out_dir / f"{base}.grid.csv"
            with path.open("w") as fh:
                fh.write("x,y,re,im\n")
                for xv, yv, v in zip(X.ravel(), Y.ravel(), values):
                    fh.write(
                        f"{_FMT % xv},{_FMT % yv},{_FMT % v.real},{_FMT % v.imag}\n"
                    )
        else:
            raise DataError(f"unknown grid format {f!r}")
        written.append(path)
    return written


def read_grid(path) -> tuple[dict, np.ndarray]:
    """Read a grid given its header path (or basename without suffixes).

    Returns ``(header, values)`` with values shaped ``(ny, nx)`` complex.
    Prefers the binary payload when both exist.
    """
    path = Path(path)
    if path.name.endswith(".grid.json"):
        hpath = path
    else:
        hpath = path.with_name(path.name + ".grid.json")
    header = json.loads(hpath.read_text())
    nx, ny = header["nx"], header["ny"]
    base = hpath.name[: -len(".grid.json")]
    bin_path = hpath.with_name(base + ".grid.bin")
    csv_path = hpath.with_name(base + ".grid.csv")
    if bin_path.exists():
        raw = np.frombuffer(bin_path.read_bytes(), dtype="<f8")
        if raw.size != 2 * nx * ny:
            raise DataError(
                f"payload holds {raw.size} floats, expected {2 * nx * ny} "
                f"({raw.size * 8} bytes vs {16 * nx * ny})"
            )
        values = raw[0::2] + 1j * raw[1::2]
    elif csv_path.exists():
        rows = np.genfromtxt(csv_path, delimiter=",", skip_header=1)
        if rows.ndim == 1:
            rows = rows[None, :]
        if rows.shape[0] != nx * ny:
            raise DataError(
                f"CSV holds {rows.shape[0]} rows, expected {nx * ny}"
            )
        values = rows[:, 2] + 1j * rows[:, 3]
    else:
        raise DataError(f"no payload found next to {hpath}")
    return header, values.reshape(ny, nx)


def write_frames(out_dir, frames: FrameSet, scenario_hash: str = "", fmt: str = "bin") -> list[Path]:
    """Write snapshot frames as frame_0000.grid.*, one per phase."""
    written = []
    for i, (phase, frame) in enumerate(zip(frames.phases, frames.frames)):
        grid = GridOutput(
            name=f"frame_{i:04d}",
            quantity="snapshot",
            z=frames.base.z,
            x_range=frames.base.x_range,
            y_range=frames.base.y_range,
            values=frame.astype(np.complex128),
            axes=frames.base.axes,
        )
        written += write_grid(
            out_dir,
            grid,
            scenario_hash,
            fmt,
            extra_header={"kct": float(phase), "slice": frames.base.name},
        )
    return written


# ---------------------------------------------------------------------------
# Density, metrics, traces, curves
# ---------------------------------------------------------------------------

def write_density(path, density: DensityCoefficients) -> Path:
    path = Path(path)
    doc = {
        "max_degree": density.max_degree,
        "ordering": "flat index l*(l+1)+m, degrees l=0..max_degree",
        "normalization": "orthonormal complex spherical harmonics, Condon-Shortley phase",
        "coeffs_re": density.coeffs.real.tolist(),
        "coeffs_im": density.coeffs.imag.tolist(),
    }
    path.write_text(json.dumps(doc, indent=2) + "\n")
    return path


def read_density(path) -> DensityCoefficients:
    doc = json.loads(Path(path).read_text())
    coeffs = np.asarray(doc["coeffs_re"], dtype=float) + 1j * np.asarray(
        doc["coeffs_im"], dtype=float
    )
    return DensityCoefficients(doc["max_degree"], coeffs)


def write_metrics(path, metrics: MetricsReport) -> Path:
    path = Path(path)
    path.write_text(json.dumps(metrics.to_dict(), indent=2) + "\n")
    return path


def read_metrics(path) -> dict:
    return json.loads(Path(path).read_text())


def write_traces(path, traces: TraceSet) -> Path:
    """Boundary traces as CSV: position, outward normal, p_b and v_n."""
    path = Path(path)
    with path.open("w") as fh:
        fh.write("x,y,z,nx,ny,nz,p_re,p_im,v_re,v_im\n")
        for p, n, pb, vn in zip(
            traces.points, traces.normals, traces.pressure, traces.normal_velocity
        ):
            cols = [p[0], p[1], p[2], n[0], n[1], n[2], pb.real, pb.imag, vn.real, vn.imag]
            fh.write(",".join(_FMT % c for c in cols) + "\n")
    return path


def read_traces(path) -> dict:
    rows = np.genfromtxt(path, delimiter=",", skip_header=1)
    if rows.ndim == 1:
        rows = rows[None, :]
    return {
        "points": rows[:, 0:3],
        "normals": rows[:, 3:6],
        "pressure": rows[:, 6] + 1j * rows[:, 7],
        "normal_velocity": rows[:, 8] + 1j * rows[:, 9],
    }


def write_far_field_csv(path, curve) -> Path:
    path = Path(path)
    with path.open("w") as fh:
        fh.write("r,r_sup_u\n")
        for r, v in curve:
            fh.write(f"{_FMT % r},{_FMT % v}\n")
    return path
