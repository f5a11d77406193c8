"""Special functions for spherical layer-potential kernels.

Complex spherical harmonics (orthonormal, Condon-Shortley phase), their
angular derivatives, and spherical Bessel / Hankel functions.  Everything is
vectorized over point arrays; the batch evaluator :func:`sph_harm_matrix` is
the workhorse behind moments-matrix assembly.

Conventions
-----------
``theta`` is the polar angle measured from the +z axis (0 <= theta <= pi),
``phi`` the azimuth from +x.  Harmonics are normalized so that
``integral |Y_l^m|^2 dS = 1`` over the unit sphere and satisfy
``Y_l^{-m} = (-1)^m conj(Y_l^m)``.  Flat coefficient index is
``l*(l+1) + m``, a bijection onto ``0 .. (L+1)^2 - 1`` for degrees up to L.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as _sp

from .errors import DomainError

#: Hard cap on the harmonic degree; recurrences and Bessel tables are
#: validated up to here (the production expansions use degree 30).
DEGREE_CAP = 40

_INV_SQRT_4PI = 0.5 / math.sqrt(math.pi)


@dataclass(frozen=True)
class HarmonicIndex:
    """Degree/order pair ``(l, m)`` with ``|m| <= l``."""

    degree: int
    order: int

    def __post_init__(self):
        if self.degree < 0:
            raise DomainError(f"degree must be nonnegative, got {self.degree}")
        if abs(self.order) > self.degree:
            raise DomainError(
                f"invalid harmonic index: |m|={abs(self.order)} > l={self.degree}"
            )
        if self.degree > DEGREE_CAP:
            raise DomainError(
                f"degree {self.degree} exceeds cap {DEGREE_CAP}"
            )

    @property
    def flat(self) -> int:
        """Flat position ``l*(l+1) + m`` in coefficient vectors."""
        return self.degree * (self.degree + 1) + self.order

    @classmethod
    def from_flat(cls, index: int) -> "HarmonicIndex":
        if index < 0:
            raise DomainError(f"flat index must be nonnegative, got {index}")
        l = math.isqrt(index)
        return cls(l, index - l * (l + 1))


def num_coefficients(max_degree: int) -> int:
    """Length of a coefficient vector holding all degrees up to ``max_degree``."""
    return (max_degree + 1) ** 2


def flat_degrees(max_degree: int) -> np.ndarray:
    """Degree ``l`` of every flat index, shape ``((L+1)^2,)``."""
    return np.repeat(np.arange(max_degree + 1), 2 * np.arange(max_degree + 1) + 1)


# ---------------------------------------------------------------------------
# Associated Legendre engine (orthonormal theta-part, Condon-Shortley)
# ---------------------------------------------------------------------------

def _diag_seed(m: int, s: np.ndarray) -> np.ndarray:
    """Q_m^m(theta): orthonormal diagonal term, CS phase via the minus sign."""
    q = np.full_like(s, _INV_SQRT_4PI)
    for mm in range(1, m + 1):
        q = -math.sqrt((2 * mm + 1.0) / (2 * mm)) * s * q
    return q


def _legendre_q(l: int, m: int, t: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Orthonormal theta-part Q_l^m for m >= 0 via stable l-upward recurrence."""
    q = _diag_seed(m, s)
    if l == m:
        return q
    q_prev, q = q, math.sqrt(2 * m + 3.0) * t * q
    for ll in range(m + 2, l + 1):
        a = math.sqrt((4.0 * ll * ll - 1.0) / (ll * ll - m * m))
        b = math.sqrt(((ll - 1.0) ** 2 - m * m) / (4.0 * (ll - 1.0) ** 2 - 1.0))
        q_prev, q = q, a * (t * q - b * q_prev)
    return q


def _check_theta(theta: np.ndarray) -> None:
    if np.any(theta < -1e-12) or np.any(theta > np.pi + 1e-12):
        raise DomainError("polar angle theta must lie in [0, pi]")


# ---------------------------------------------------------------------------
# Spherical harmonics
# ---------------------------------------------------------------------------

def sph_harm(idx: HarmonicIndex, theta, phi):
    """Orthonormal complex spherical harmonic Y_l^m(theta, phi).

    Includes the Condon-Shortley phase; broadcasts over array inputs.
    """
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    _check_theta(theta)
    m = abs(idx.order)
    q = _legendre_q(idx.degree, m, np.cos(theta), np.sin(theta))
    val = q * np.exp(1j * m * phi)
    if idx.order < 0:
        val = (-1.0) ** m * np.conj(val)
    if val.ndim == 0:
        return complex(val)
    return val


def sph_harm_matrix(max_degree: int, theta, phi) -> np.ndarray:
    """All harmonics up to ``max_degree`` at once.

    Returns a complex matrix of shape ``(npoints, (L+1)^2)`` whose column
    ``l*(l+1)+m`` holds Y_l^m at every point.  This is the moments basis used
    by propagator assembly; callers chunk the point axis to bound memory.
    """
    if max_degree < 0 or max_degree > DEGREE_CAP:
        raise DomainError(f"max_degree must be in [0, {DEGREE_CAP}]")
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    _check_theta(theta)
    n = theta.shape[0]
    out = np.empty((n, num_coefficients(max_degree)), dtype=np.complex128)
    t, s = np.cos(theta), np.sin(theta)
    eiphi = np.exp(1j * phi)

    def store(l, m, col):
        out[:, l * (l + 1) + m] = col
        if m:
            out[:, l * (l + 1) - m] = (-1.0) ** m * np.conj(col)

    q_mm = np.full(n, _INV_SQRT_4PI)
    phase = np.ones(n, dtype=np.complex128)
    for m in range(max_degree + 1):
        if m:
            q_mm = -math.sqrt((2 * m + 1.0) / (2 * m)) * s * q_mm
            phase = phase * eiphi
        store(m, m, q_mm * phase)
        if m + 1 <= max_degree:
            q_prev, q = q_mm, math.sqrt(2 * m + 3.0) * t * q_mm
            store(m + 1, m, q * phase)
            for l in range(m + 2, max_degree + 1):
                a = math.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
                b = math.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1.0) ** 2 - 1.0))
                q_prev, q = q, a * (t * q - b * q_prev)
                store(l, m, q * phase)
    return out


def _dtheta_pole_m1(l: int, at_north: bool) -> float:
    """Limit of dQ_l^1/dtheta at a pole (the only |m| with a nonzero limit)."""
    val = -0.25 * math.sqrt((2 * l + 1.0) * l * (l + 1.0) / math.pi)
    if not at_north:
        val *= (-1.0) ** l
    return val


def sph_harm_derivatives(idx: HarmonicIndex, theta, phi):
    """Angular derivatives ``(dY/dtheta, dY/dphi)``.

    Away from the poles uses the analytic identity
    ``sin(theta) dQ_l^m/dtheta = l cos(theta) Q_l^m - e_l^m Q_{l-1}^m`` with
    ``e_l^m = sqrt((l^2 - m^2)(2l+1)/(2l-1))``; at the poles the finite limit
    values are returned (nonzero only for |m| = 1).
    """
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    _check_theta(theta)
    scalar = theta.ndim == 0 and phi.ndim == 0
    theta, phi = np.atleast_1d(theta), np.atleast_1d(phi)
    theta, phi = np.broadcast_arrays(theta, phi)

    l, m = idx.degree, abs(idx.order)
    t, s = np.cos(theta), np.sin(theta)
    q_l = _legendre_q(l, m, t, s)
    q_lm1 = _legendre_q(l - 1, m, t, s) if l - 1 >= m else np.zeros_like(t)

    pole = s < 1e-13
    s_safe = np.where(pole, 1.0, s)
    if l >= 1:
        e = math.sqrt((l * l - m * m) * (2 * l + 1.0) / (2 * l - 1.0))
    else:
        e = 0.0
    dq = (l * t * q_l - e * q_lm1) / s_safe
    if m == 1 and np.any(pole):
        north = t > 0
        dq = np.where(pole & north, _dtheta_pole_m1(l, True), dq)
        dq = np.where(pole & ~north, _dtheta_pole_m1(l, False), dq)
    elif np.any(pole):
        dq = np.where(pole, 0.0, dq)

    phase = np.exp(1j * m * phi)
    y = q_l * phase
    dtheta = dq * phase
    if idx.order < 0:
        y = (-1.0) ** m * np.conj(y)
        dtheta = (-1.0) ** m * np.conj(dtheta)
    dphi = 1j * idx.order * y
    if scalar:
        return complex(dtheta[0]), complex(dphi[0])
    return dtheta, dphi


# ---------------------------------------------------------------------------
# Spherical Bessel / Hankel functions
# ---------------------------------------------------------------------------

def _check_bessel_args(l: int, x) -> np.ndarray:
    if l < 0:
        raise DomainError(f"order must be nonnegative, got {l}")
    if l > DEGREE_CAP:
        raise DomainError(f"order {l} exceeds cap {DEGREE_CAP}")
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0.0):
        raise DomainError("argument must be positive")
    return x


def sph_bessel_j(l: int, x, derivative: bool = False):
    """Spherical Bessel function of the first kind j_l(x) (or j_l'(x))."""
    x = _check_bessel_args(l, x)
    out = _sp.spherical_jn(l, x, derivative=derivative)
    if out.ndim == 0:
        return float(out)
    return out


def sph_bessel_y(l: int, x, derivative: bool = False):
    """Spherical Bessel function of the second kind y_l(x) (or y_l'(x)).

    Raises :class:`OverflowError` when the value exceeds double range (tiny
    arguments at large order) instead of returning a silent infinity.
    """
    x = _check_bessel_args(l, x)
    out = _sp.spherical_yn(l, x, derivative=derivative)
    if not np.all(np.isfinite(out)):
        raise OverflowError(
            f"spherical y_{l} overflows double precision at the given argument"
        )
    if out.ndim == 0:
        return float(out)
    return out


def sph_hankel1(l: int, x, derivative: bool = False):
    """Spherical Hankel function of the first kind h_l(x) = j_l(x) + i y_l(x)."""
    j = sph_bessel_j(l, x, derivative=derivative)
    y = sph_bessel_y(l, x, derivative=derivative)
    return j + 1j * y
