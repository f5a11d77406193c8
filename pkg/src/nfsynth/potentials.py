"""Free-space Helmholtz kernel, combined layer potentials and propagators.

The radiated field is represented by a surface density on a small fictitious
sphere, expanded in spherical harmonics.  The combined representation applied
to a density ``w`` is

    u(x) = eta1 * I_D[w](x) + i * eta2 * I_S[w](x),

where ``I_D`` / ``I_S`` are the double / single layer potentials with the
free-space kernel ``Phi(x, y) = exp(ik|x-y|) / (4 pi |x-y|)``.  Assembly
discretizes the surface integrals with a sphere quadrature rule and expands
``w`` in orthonormal spherical harmonics, producing a dense complex matrix
from coefficients to field samples.

For a density ``Y_l^m`` on a sphere of radius ``a`` centered at the origin
the combined potential has the closed multipole form

    u(x) = i k a^2 (eta1 k j_l'(ka) + i eta2 j_l(ka)) h_l(k|x|) Y_l^m(x/|x|)

valid for ``|x| > a``; this analytic route is exposed separately as an
independent oracle for the quadrature path and is never used in assembly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .errors import ConfigurationError, DataError, DomainError, GeometryError
from .geometry import QuadratureRule, SampleSet, SphereSurface
from .specfun import (
    DEGREE_CAP,
    HarmonicIndex,
    flat_degrees,
    num_coefficients,
    sph_bessel_j,
    sph_hankel1,
    sph_harm_matrix,
)

#: Pairwise kernel evaluations per chunk; bounds transient memory to ~150 MB.
_CHUNK_PAIRS = 2_000_000


@dataclass(frozen=True)
class WaveContext:
    """Wavenumber, medium constants and layer-combination weights.

    ``eta1`` weighs the double layer, ``eta2`` the (i-multiplied) single
    layer.  The default ``(1, k)`` is a combined-field choice that keeps the
    representation injective across interior resonances; ``eta2=None``
    resolves to ``k``.
    """

    k: float
    rho: float = 1.0
    c: float = 1.0
    eta1: float = 1.0
    eta2: Optional[float] = None

    def __post_init__(self):
        if self.k <= 0:
            raise DomainError(f"wavenumber must be positive, got {self.k}")
        if self.rho <= 0 or self.c <= 0:
            raise DomainError("medium density and sound speed must be positive")
        if self.eta2 is None:
            object.__setattr__(self, "eta2", float(self.k))
        if self.eta1 == 0.0 and self.eta2 == 0.0:
            raise DomainError("layer weights (eta1, eta2) must not both vanish")


@dataclass(frozen=True)
class DensityCoefficients:
    """Spherical-harmonic coefficients of the surface density.

    ``coeffs[l*(l+1)+m]`` multiplies the orthonormal harmonic ``Y_l^m``.
    """

    max_degree: int
    coeffs: np.ndarray

    def __post_init__(self):
        if self.max_degree < 0 or self.max_degree > DEGREE_CAP:
            raise DomainError(f"max_degree must be in [0, {DEGREE_CAP}]")
        coeffs = np.asarray(self.coeffs, dtype=np.complex128)
        object.__setattr__(self, "coeffs", coeffs)
        if coeffs.shape != (num_coefficients(self.max_degree),):
            raise DataError(
                f"expected {num_coefficients(self.max_degree)} coefficients, "
                f"got shape {coeffs.shape}"
            )
        if not np.all(np.isfinite(coeffs)):
            raise DataError("coefficients must be finite")

    @classmethod
    def zero(cls, max_degree: int) -> "DensityCoefficients":
        return cls(max_degree, np.zeros(num_coefficients(max_degree), dtype=np.complex128))

    @classmethod
    def single(cls, idx: HarmonicIndex, max_degree: int, amplitude=1.0) -> "DensityCoefficients":
        c = np.zeros(num_coefficients(max_degree), dtype=np.complex128)
        c[idx.flat] = amplitude
        return cls(max_degree, c)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))


@dataclass(frozen=True)
class Propagator:
    """Dense map from density coefficients to field samples.

    ``row_weights`` are the sample weights defining the discrete L2 norm on
    the target carrier (None for plain evaluation grids).
    """

    matrix: np.ndarray
    context: WaveContext
    source: SphereSurface
    row_weights: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.matrix.ndim != 2:
            raise DataError("propagator matrix must be 2-D")
        if self.row_weights is not None and self.row_weights.shape != (self.matrix.shape[0],):
            raise DataError("row_weights must match the number of rows")

    @property
    def max_degree(self) -> int:
        return int(np.sqrt(self.matrix.shape[1])) - 1

    def apply(self, w: DensityCoefficients) -> np.ndarray:
        if w.coeffs.shape[0] != self.matrix.shape[1]:
            raise DataError("coefficient length does not match propagator columns")
        return self.matrix @ w.coeffs


# ---------------------------------------------------------------------------
# Kernel
# ---------------------------------------------------------------------------

def _pair_geometry(x: np.ndarray, y: np.ndarray):
    d = x - y
    r = np.sqrt(np.sum(d * d, axis=-1))
    if np.any(r == 0.0):
        raise DomainError("kernel evaluation at coincident points")
    return d, r


def green_free(x, y, ctx: WaveContext):
    """Free-space fundamental solution Phi(x, y) = exp(ik|x-y|)/(4 pi |x-y|)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    _, r = _pair_geometry(x, y)
    out = np.exp(1j * ctx.k * r) / (4 * np.pi * r)
    if out.ndim == 0:
        return complex(out)
    return out


def green_free_grad_y(x, y, ctx: WaveContext):
    """Gradient of Phi with respect to the source point y.

    Equals ``(ik - 1/r) * Phi * (y - x)/r`` with ``r = |x - y|``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d, r = _pair_geometry(x, y)
    g = (1j * ctx.k - 1.0 / r) * np.exp(1j * ctx.k * r) / (4 * np.pi * r)
    out = g[..., None] * (-d) / r[..., None]
    return out


def _combined_kernel(targets: np.ndarray, src_pts: np.ndarray, src_nrm: np.ndarray, ctx: WaveContext):
    """Combined-layer kernel eta1 dPhi/dn_y + i eta2 Phi, shape (nt, ns)."""
    d = targets[:, None, :] - src_pts[None, :, :]
    r = np.sqrt(np.einsum("ijk,ijk->ij", d, d))
    if np.any(r == 0.0):
        raise GeometryError("target coincides with a source quadrature node")
    G = np.exp(1j * ctx.k * r) / (4 * np.pi * r)
    # dPhi/dn_y = (ik - 1/r) Phi ((y - x) . n)/r
    ddn = np.einsum("ijk,jk->ij", -d, src_nrm) / r
    return (ctx.eta1 * (1j * ctx.k - 1.0 / r) * ddn + 1j * ctx.eta2) * G


def _combined_kernel_grad(targets: np.ndarray, src_pts: np.ndarray, src_nrm: np.ndarray, ctx: WaveContext):
    """Target-gradient of the combined kernel, shape (nt, ns, 3)."""
    d = targets[:, None, :] - src_pts[None, :, :]
    r = np.sqrt(np.einsum("ijk,ijk->ij", d, d))
    if np.any(r == 0.0):
        raise GeometryError("target coincides with a source quadrature node")
    G = np.exp(1j * ctx.k * r) / (4 * np.pi * r)
    Gp = (1j * ctx.k - 1.0 / r) * G
    Gpp = (-ctx.k * ctx.k - 2j * ctx.k / r + 2.0 / (r * r)) * G
    dhat = d / r[..., None]
    dn = np.einsum("ijk,jk->ij", dhat, src_nrm)
    # grad_x [ -Gp * (dhat . n) ] = -(Gpp dn) dhat - Gp (n - dn dhat)/r
    grad_dl = -(Gpp * dn)[..., None] * dhat - (Gp / r)[..., None] * (
        src_nrm[None, :, :] - dn[..., None] * dhat
    )
    grad_sl = Gp[..., None] * dhat
    return ctx.eta1 * grad_dl + 1j * ctx.eta2 * grad_sl


# ---------------------------------------------------------------------------
# Assembly and evaluation
# ---------------------------------------------------------------------------

def _as_points(targets) -> np.ndarray:
    if isinstance(targets, SampleSet):
        return targets.points
    if isinstance(targets, QuadratureRule):
        return targets.points
    pts = np.asarray(targets, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    return pts


def _require_sphere_rule(rule: QuadratureRule, ctx_name: str) -> SphereSurface:
    carrier = getattr(rule, "carrier", None)
    if carrier is None or not isinstance(carrier, SphereSurface):
        raise ConfigurationError(f"{ctx_name} requires a sphere_rule carrier")
    return carrier


def _source_angles(rule: QuadratureRule):
    n = rule.normals
    theta = np.arccos(np.clip(n[:, 2], -1.0, 1.0))
    phi = np.arctan2(n[:, 1], n[:, 0])
    return theta, phi


def _check_targets_outside(points: np.ndarray, sphere: SphereSurface):
    r = np.linalg.norm(points - np.asarray(sphere.center, dtype=float), axis=1)
    if np.any(r <= sphere.radius):
        raise GeometryError(
            "targets must lie strictly outside the source sphere "
            f"(min radius {r.min():.3e} <= {sphere.radius:.3e})"
        )


def assemble_propagator(
    source_rule: QuadratureRule,
    targets: Union[SampleSet, np.ndarray],
    max_degree: int,
    ctx: WaveContext,
) -> Propagator:
    """Quadrature discretization of the combined layer potential.

    Column ``l*(l+1)+m`` holds the rule's approximation of the combined
    potential applied to the density ``Y_l^m``; applying the matrix to a
    coefficient vector yields field samples at the targets.
    """
    sphere = _require_sphere_rule(source_rule, "assemble_propagator")
    pts = _as_points(targets)
    _check_targets_outside(pts, sphere)
    if source_rule.order is not None and source_rule.order[1] < 2 * max_degree + 2:
        raise ConfigurationError(
            f"source rule n_phi={source_rule.order[1]} insufficient for degree "
            f"{max_degree} (need >= {2 * max_degree + 2})"
        )
    theta, phi = _source_angles(source_rule)
    nt = pts.shape[0]
    ns = len(source_rule)
    out = np.zeros((nt, num_coefficients(max_degree)), dtype=np.complex128)
    chunk = max(256, _CHUNK_PAIRS // max(nt, 1))
    for i in range(0, ns, chunk):
        sl = slice(i, i + chunk)
        ker = _combined_kernel(pts, source_rule.points[sl], source_rule.normals[sl], ctx)
        basis = sph_harm_matrix(max_degree, theta[sl], phi[sl])
        out += ker @ (source_rule.weights[sl, None] * basis)
    weights = targets.weights if isinstance(targets, SampleSet) else None
    return Propagator(matrix=out, context=ctx, source=sphere, row_weights=weights)


def density_values(w: DensityCoefficients, source_rule: QuadratureRule) -> np.ndarray:
    """Density samples ``w(y)`` at the rule's nodes."""
    theta, phi = _source_angles(source_rule)
    ns = len(source_rule)
    out = np.empty(ns, dtype=np.complex128)
    chunk = max(1024, _CHUNK_PAIRS // max(num_coefficients(w.max_degree), 1))
    for i in range(0, ns, chunk):
        sl = slice(i, i + chunk)
        out[sl] = sph_harm_matrix(w.max_degree, theta[sl], phi[sl]) @ w.coeffs
    return out


def evaluate_field(
    w: DensityCoefficients,
    points: Union[SampleSet, np.ndarray],
    source_rule: QuadratureRule,
    ctx: WaveContext,
) -> np.ndarray:
    """Radiated field u at the given points (same quadrature as assembly)."""
    sphere = _require_sphere_rule(source_rule, "evaluate_field")
    pts = _as_points(points)
    _check_targets_outside(pts, sphere)
    wd = source_rule.weights * density_values(w, source_rule)
    out = np.empty(pts.shape[0], dtype=np.complex128)
    chunk = max(16, _CHUNK_PAIRS // max(len(source_rule), 1))
    for i in range(0, pts.shape[0], chunk):
        sl = slice(i, i + chunk)
        out[sl] = _combined_kernel(pts[sl], source_rule.points, source_rule.normals, ctx) @ wd
    return out


def evaluate_field_gradient(
    w: DensityCoefficients,
    points: Union[SampleSet, np.ndarray],
    source_rule: QuadratureRule,
    ctx: WaveContext,
) -> np.ndarray:
    """Gradient of the radiated field, shape (n, 3), from the kernel gradient."""
    sphere = _require_sphere_rule(source_rule, "evaluate_field_gradient")
    pts = _as_points(points)
    _check_targets_outside(pts, sphere)
    wd = source_rule.weights * density_values(w, source_rule)
    out = np.empty((pts.shape[0], 3), dtype=np.complex128)
    chunk = max(8, _CHUNK_PAIRS // (3 * max(len(source_rule), 1)))
    for i in range(0, pts.shape[0], chunk):
        sl = slice(i, i + chunk)
        grad = _combined_kernel_grad(pts[sl], source_rule.points, source_rule.normals, ctx)
        out[sl] = np.einsum("ijk,j->ik", grad, wd)
    return out


def boundary_traces(
    w: DensityCoefficients,
    surface_rule: QuadratureRule,
    source_rule: QuadratureRule,
    ctx: WaveContext,
):
    """Pressure and normal-velocity boundary inputs on a physical surface.

    Returns ``(p_b, v_n)`` with ``p_b`` the combined-layer field on the
    surface and ``v_n = (-i/(rho c k)) grad(u) . n``.  The surface must
    strictly enclose the fictitious source sphere, which keeps both traces
    smooth.
    """
    sphere = _require_sphere_rule(source_rule, "boundary_traces")
    center = np.asarray(sphere.center, dtype=float)
    r = np.linalg.norm(surface_rule.points - center, axis=1)
    if np.any(r <= sphere.radius):
        raise GeometryError("trace surface intersects the fictitious source sphere")
    if surface_rule.normals is None:
        raise ConfigurationError("trace surface rule must carry normals")
    p_b = evaluate_field(w, surface_rule.points, source_rule, ctx)
    grad = evaluate_field_gradient(w, surface_rule.points, source_rule, ctx)
    v_n = (-1j / (ctx.rho * ctx.c * ctx.k)) * np.einsum("ij,ij->i", grad, surface_rule.normals)
    return p_b, v_n


# ---------------------------------------------------------------------------
# Analytic sphere-multipole oracle (independent of the quadrature path)
# ---------------------------------------------------------------------------

def multipole_radial_coefficient(l: int, source: SphereSurface, ctx: WaveContext) -> complex:
    """Closed-form factor c_l with u = c_l h_l(k r) Y_l^m for density Y_l^m."""
    a = source.radius
    ka = ctx.k * a
    return (
        1j
        * ctx.k
        * a
        * a
        * (ctx.eta1 * ctx.k * sph_bessel_j(l, ka, derivative=True) + 1j * ctx.eta2 * sph_bessel_j(l, ka))
    )


def multipole_column(
    idx: HarmonicIndex,
    points: Union[SampleSet, np.ndarray],
    source: SphereSurface,
    ctx: WaveContext,
) -> np.ndarray:
    """Analytic combined-layer field of the density Y_l^m at exterior points."""
    pts = _as_points(points) - np.asarray(source.center, dtype=float)
    r = np.linalg.norm(pts, axis=1)
    if np.any(r <= source.radius):
        raise GeometryError("analytic multipole valid only strictly outside the sphere")
    theta = np.arccos(np.clip(pts[:, 2] / r, -1.0, 1.0))
    phi = np.arctan2(pts[:, 1], pts[:, 0])
    basis = sph_harm_matrix(idx.degree, theta, phi)[:, idx.flat]
    c_l = multipole_radial_coefficient(idx.degree, source, ctx)
    return c_l * sph_hankel1(idx.degree, ctx.k * r) * basis


def multipole_field(
    w: DensityCoefficients,
    points: Union[SampleSet, np.ndarray],
    source: SphereSurface,
    ctx: WaveContext,
) -> np.ndarray:
    """Analytic combined-layer field for a full coefficient vector."""
    pts = _as_points(points) - np.asarray(source.center, dtype=float)
    r = np.linalg.norm(pts, axis=1)
    if np.any(r <= source.radius):
        raise GeometryError("analytic multipole valid only strictly outside the sphere")
    theta = np.arccos(np.clip(pts[:, 2] / r, -1.0, 1.0))
    phi = np.arctan2(pts[:, 1], pts[:, 0])
    basis = sph_harm_matrix(w.max_degree, theta, phi)
    radial = np.empty((pts.shape[0], w.max_degree + 1), dtype=np.complex128)
    for l in range(w.max_degree + 1):
        radial[:, l] = multipole_radial_coefficient(l, source, ctx) * sph_hankel1(l, ctx.k * r)
    degrees = flat_degrees(w.max_degree)
    return np.einsum("ij,ij->i", basis * w.coeffs[None, :], radial[:, degrees])
