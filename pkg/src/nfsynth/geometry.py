"""Region descriptors, sphere quadrature and sample-point generation.

Regions use the latitude convention: ``theta`` is the elevation from the
xy-plane (in [-pi/2, pi/2]) and ``phi`` the azimuth from +x, so a point of a
sector shell is ``(r cos(theta) cos(phi), r cos(theta) sin(phi), r sin(theta))``
plus the shell's rigid offset.  With this reading the azimuth interval
[3pi/4, 5pi/4] faces the -x axis.

Quadrature on spheres is a tensor rule, Gauss-Legendre in cos(polar angle)
times a uniform trapezoid in azimuth: exact for spherical-harmonic integrands
up to degree ``min(2*n_theta - 1, n_phi - 1)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .errors import GeometryError

ROLE_CONTROL = "control-match"
ROLE_NULL = "null"
ROLE_GRID = "evaluation-grid"

#: Face order used by sector-shell boundary sampling.
SECTOR_FACES = ("r_min", "r_max", "theta_min", "theta_max", "phi_min", "phi_max")


# ---------------------------------------------------------------------------
# Region descriptors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SphereSurface:
    """Sphere boundary of given center and radius."""

    center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    radius: float = 1.0

    def __post_init__(self):
        if self.radius <= 0:
            raise GeometryError(f"sphere radius must be positive, got {self.radius}")


@dataclass(frozen=True)
class SectorShell:
    """Spherical-sector shell: r, latitude and azimuth intervals, plus offset.

    ``theta`` is latitude (elevation from the xy-plane).  The offset is a
    rigid translation applied to every generated point.
    """

    r_min: float
    r_max: float
    theta_min: float
    theta_max: float
    phi_min: float
    phi_max: float
    offset: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if not (0.0 < self.r_min < self.r_max):
            raise GeometryError(
                f"need 0 < r_min < r_max, got [{self.r_min}, {self.r_max}]"
            )
        if not (-np.pi / 2 <= self.theta_min < self.theta_max <= np.pi / 2):
            raise GeometryError(
                "latitude interval must be nonempty within [-pi/2, pi/2]"
            )
        width = self.phi_max - self.phi_min
        if not (0.0 < width <= 2 * np.pi + 1e-12):
            raise GeometryError("azimuth interval must be nonempty with width <= 2*pi")

    @property
    def offset_vector(self) -> np.ndarray:
        return np.asarray(self.offset, dtype=float)

    def contains(self, points: np.ndarray, tol: float = 0.0) -> np.ndarray:
        """Membership test in the (offset) parameter box."""
        p = np.atleast_2d(points) - self.offset_vector
        r = np.linalg.norm(p, axis=1)
        lat = np.arcsin(np.clip(p[:, 2] / np.maximum(r, 1e-300), -1.0, 1.0))
        phi = np.arctan2(p[:, 1], p[:, 0])
        # bring azimuth into [phi_min, phi_min + 2*pi)
        phi = self.phi_min + np.mod(phi - self.phi_min, 2 * np.pi)
        return (
            (r >= self.r_min - tol)
            & (r <= self.r_max + tol)
            & (lat >= self.theta_min - tol)
            & (lat <= self.theta_max + tol)
            & (phi <= self.phi_max + tol)
        )


@dataclass(frozen=True)
class BallExterior:
    """Everything outside the closed ball of given center and radius."""

    center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    radius: float = 10.0

    def __post_init__(self):
        if self.radius <= 0:
            raise GeometryError(f"ball radius must be positive, got {self.radius}")


RegionSpec = Union[SphereSurface, SectorShell, BallExterior]


# ---------------------------------------------------------------------------
# Carriers for discretized integrals and point sets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadratureRule:
    """Surface quadrature: points, positive weights, unit outward normals.

    ``carrier`` and ``order`` record the generating surface and tensor order
    when the rule comes from :func:`sphere_rule`; propagator assembly uses
    them for geometry and resolution checks.
    """

    points: np.ndarray
    weights: np.ndarray
    normals: Optional[np.ndarray] = None
    carrier: Optional["SphereSurface"] = None
    order: Optional[tuple[int, int]] = None

    def __post_init__(self):
        if self.points.ndim != 2 or self.points.shape[1] != 3:
            raise GeometryError("points must have shape (n, 3)")
        if self.weights.shape != (self.points.shape[0],):
            raise GeometryError("weights must match point count")
        if np.any(self.weights <= 0):
            raise GeometryError("quadrature weights must be positive")
        if self.normals is not None:
            norms = np.linalg.norm(self.normals, axis=1)
            if np.max(np.abs(norms - 1.0)) > 1e-12:
                raise GeometryError("normals must be unit length")

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class SampleSet:
    """Weighted or plain point set with a declared role.

    Weights are present iff the set discretizes an L2 norm (control-match and
    null roles); evaluation grids carry none.  ``faces`` tags each point of a
    sector-shell boundary with its face index into :data:`SECTOR_FACES`.
    """

    points: np.ndarray
    role: str
    weights: Optional[np.ndarray] = None
    faces: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.points.ndim != 2 or self.points.shape[1] != 3:
            raise GeometryError("points must have shape (n, 3)")
        needs_weights = self.role in (ROLE_CONTROL, ROLE_NULL)
        if needs_weights and self.weights is None:
            raise GeometryError(f"role {self.role!r} requires weights")
        if not needs_weights and self.weights is not None:
            raise GeometryError(f"role {self.role!r} must not carry weights")
        if self.weights is not None:
            if self.weights.shape != (self.points.shape[0],):
                raise GeometryError("weights must match point count")
            if np.any(self.weights < 0):
                raise GeometryError("weights must be nonnegative")

    def __len__(self) -> int:
        return self.points.shape[0]


# ---------------------------------------------------------------------------
# Constructors
# ---------------------------------------------------------------------------

def latitude_to_cartesian(r, theta, phi) -> np.ndarray:
    """Map (radius, latitude, azimuth) arrays to stacked xyz coordinates."""
    r, theta, phi = np.broadcast_arrays(r, theta, phi)
    ct = np.cos(theta)
    return np.stack([r * ct * np.cos(phi), r * ct * np.sin(phi), r * np.sin(theta)], axis=-1)


def sphere_rule(
    radius: float,
    center=(0.0, 0.0, 0.0),
    n_theta: int = 32,
    n_phi: int = 64,
) -> QuadratureRule:
    """Gauss-Legendre x trapezoid tensor rule on a sphere surface.

    Sum of weights equals ``4 pi radius^2`` to machine precision; the rule is
    exact for spherical-harmonic integrands up to degree
    ``min(2*n_theta - 1, n_phi - 1)``.
    """
    if n_theta < 2 or n_phi < 4:
        raise GeometryError("need n_theta >= 2 and n_phi >= 4")
    if radius <= 0:
        raise GeometryError("radius must be positive")
    t, wt = np.polynomial.legendre.leggauss(n_theta)
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    T, P = np.meshgrid(t, phi, indexing="ij")
    st = np.sqrt(np.maximum(0.0, 1.0 - T**2))
    directions = np.stack(
        [st * np.cos(P), st * np.sin(P), T * np.ones_like(P)], axis=-1
    ).reshape(-1, 3)
    weights = (radius * radius * wt[:, None] * (2 * np.pi / n_phi) * np.ones_like(P)).reshape(-1)
    points = radius * directions + np.asarray(center, dtype=float)
    return QuadratureRule(
        points=points,
        weights=weights,
        normals=directions,
        carrier=SphereSurface(tuple(float(c) for c in center), float(radius)),
        order=(n_theta, n_phi),
    )


def _enlarged_box(region: SectorShell, margin: float) -> SectorShell:
    """Parameter box grown by ``margin`` times each interval width, clamped."""
    if margin < 0:
        raise GeometryError("margin must be nonnegative")
    dr = margin * (region.r_max - region.r_min)
    dth = margin * (region.theta_max - region.theta_min)
    dph = margin * (region.phi_max - region.phi_min)
    r_lo, r_hi = region.r_min - dr, region.r_max + dr
    th_lo = max(region.theta_min - dth, -np.pi / 2)
    th_hi = min(region.theta_max + dth, np.pi / 2)
    ph_lo, ph_hi = region.phi_min - dph, region.phi_max + dph
    if ph_hi - ph_lo > 2 * np.pi:
        mid = 0.5 * (ph_lo + ph_hi)
        ph_lo, ph_hi = mid - np.pi, mid + np.pi
    if r_lo <= 0 or r_lo >= r_hi or th_lo >= th_hi:
        raise GeometryError("enlarged parameter box is degenerate")
    return SectorShell(r_lo, r_hi, th_lo, th_hi, ph_lo, ph_hi, region.offset)


def _face_grid(lo_u, hi_u, n_u, lo_v, hi_v, n_v):
    """Midpoint tensor nodes over a parameter rectangle."""
    u = lo_u + (np.arange(n_u) + 0.5) * (hi_u - lo_u) / n_u
    v = lo_v + (np.arange(n_v) + 0.5) * (hi_v - lo_v) / n_v
    U, V = np.meshgrid(u, v, indexing="ij")
    du = (hi_u - lo_u) / n_u
    dv = (hi_v - lo_v) / n_v
    return U.ravel(), V.ravel(), du, dv


def _grid_shape(density: int, aspect: float) -> tuple[int, int]:
    n_u = max(2, int(round(np.sqrt(density * max(aspect, 1e-12)))))
    n_v = max(2, int(round(density / n_u)))
    return n_u, n_v


def sector_shell_boundary(
    region: SectorShell,
    margin: float = 0.0,
    density: int = 200,
    role: str = ROLE_CONTROL,
) -> SampleSet:
    """Weighted samples of all six faces of the (enlarged) parameter box.

    ``margin`` grows every parameter interval by that fraction of its width
    (clamped to valid ranges), realizing the slightly-larger control carrier;
    ``density`` is the approximate number of points per face.  Weights are a
    midpoint approximation of surface measure per face.
    """
    box = _enlarged_box(region, margin)
    off = box.offset_vector
    th_mid = 0.5 * (box.theta_min + box.theta_max)
    pts, wts, tags = [], [], []

    # r = const faces: dS = r^2 cos(theta) dtheta dphi
    for tag, rf in ((0, box.r_min), (1, box.r_max)):
        aspect = (box.theta_max - box.theta_min) / (
            (box.phi_max - box.phi_min) * max(np.cos(th_mid), 1e-9)
        )
        n_u, n_v = _grid_shape(density, aspect)
        th, ph, du, dv = _face_grid(box.theta_min, box.theta_max, n_u, box.phi_min, box.phi_max, n_v)
        pts.append(latitude_to_cartesian(rf, th, ph) + off)
        wts.append(rf * rf * np.cos(th) * du * dv)
        tags.append(np.full(th.size, tag))

    # theta = const faces (cones): dS = r cos(theta_f) dr dphi
    for tag, tf in ((2, box.theta_min), (3, box.theta_max)):
        r_mid = 0.5 * (box.r_min + box.r_max)
        aspect = (box.r_max - box.r_min) / (
            (box.phi_max - box.phi_min) * r_mid * max(np.cos(tf), 1e-9)
        )
        n_u, n_v = _grid_shape(density, aspect)
        r, ph, du, dv = _face_grid(box.r_min, box.r_max, n_u, box.phi_min, box.phi_max, n_v)
        pts.append(latitude_to_cartesian(r, tf, ph) + off)
        wts.append(r * np.cos(tf) * du * dv)
        tags.append(np.full(r.size, tag))

    # phi = const faces (half-planes): dS = r dr dtheta
    for tag, pf in ((4, box.phi_min), (5, box.phi_max)):
        r_mid = 0.5 * (box.r_min + box.r_max)
        aspect = (box.r_max - box.r_min) / ((box.theta_max - box.theta_min) * r_mid)
        n_u, n_v = _grid_shape(density, aspect)
        r, th, du, dv = _face_grid(box.r_min, box.r_max, n_u, box.theta_min, box.theta_max, n_v)
        pts.append(latitude_to_cartesian(r, th, pf) + off)
        wts.append(r * du * dv)
        tags.append(np.full(r.size, tag))

    return SampleSet(
        points=np.concatenate(pts),
        role=role,
        weights=np.concatenate(wts),
        faces=np.concatenate(tags).astype(int),
    )


def sector_shell_interior_grid(
    region: SectorShell, n_r: int = 8, n_theta: int = 8, n_phi: int = 8
) -> SampleSet:
    """Cell-centered tensor grid strictly inside the shell (no weights)."""
    if min(n_r, n_theta, n_phi) < 2:
        raise GeometryError("interior grid needs at least 2 points per axis")
    r = region.r_min + (np.arange(n_r) + 0.5) * (region.r_max - region.r_min) / n_r
    th = region.theta_min + (np.arange(n_theta) + 0.5) * (region.theta_max - region.theta_min) / n_theta
    ph = region.phi_min + (np.arange(n_phi) + 0.5) * (region.phi_max - region.phi_min) / n_phi
    R, T, P = np.meshgrid(r, th, ph, indexing="ij")
    points = latitude_to_cartesian(R.ravel(), T.ravel(), P.ravel()) + region.offset_vector
    return SampleSet(points=points, role=ROLE_GRID)


def cartesian_slice_grid(
    z: float, x_range, y_range, n_x: int, n_y: int
) -> SampleSet:
    """Row-major planar grid: index ``i*n_x + j`` maps to ``(x_j, y_i, z)``."""
    if n_x < 2 or n_y < 2:
        raise GeometryError("slice grid needs at least 2 points per axis")
    x = np.linspace(x_range[0], x_range[1], n_x)
    y = np.linspace(y_range[0], y_range[1], n_y)
    X, Y = np.meshgrid(x, y, indexing="xy")  # rows follow y
    points = np.stack([X.ravel(), Y.ravel(), np.full(X.size, float(z))], axis=-1)
    return SampleSet(points=points, role=ROLE_GRID)


def region_min_radius(region: RegionSpec, n_probe: int = 33) -> float:
    """Smallest distance from the origin to points of the region.

    Used by configuration validation to enforce disjointness from the source
    ball.  For sector shells the minimum is located on the parameter-box
    boundary and is probed on an endpoint-included grid.
    """
    if isinstance(region, SphereSurface):
        c = np.linalg.norm(np.asarray(region.center, dtype=float))
        return abs(c - region.radius)
    if isinstance(region, BallExterior):
        c = np.linalg.norm(np.asarray(region.center, dtype=float))
        return max(region.radius - c, 0.0)
    r = np.linspace(region.r_min, region.r_max, n_probe)
    th = np.linspace(region.theta_min, region.theta_max, n_probe)
    ph = np.linspace(region.phi_min, region.phi_max, n_probe)
    best = np.inf
    for rr, mask in (
        (region.r_min, None),
        (region.r_max, None),
    ):
        T, P = np.meshgrid(th, ph, indexing="ij")
        pts = latitude_to_cartesian(rr, T.ravel(), P.ravel()) + region.offset_vector
        best = min(best, float(np.linalg.norm(pts, axis=1).min()))
    for tf in (region.theta_min, region.theta_max):
        R, P = np.meshgrid(r, ph, indexing="ij")
        pts = latitude_to_cartesian(R.ravel(), tf, P.ravel()) + region.offset_vector
        best = min(best, float(np.linalg.norm(pts, axis=1).min()))
    for pf in (region.phi_min, region.phi_max):
        R, T = np.meshgrid(r, th, indexing="ij")
        pts = latitude_to_cartesian(R.ravel(), T.ravel(), pf) + region.offset_vector
        best = min(best, float(np.linalg.norm(pts, axis=1).min()))
    return best
