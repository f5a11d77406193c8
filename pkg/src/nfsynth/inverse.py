"""Tikhonov-regularized field matching with Morozov parameter selection.

The discrete functional minimized for a coefficient vector ``w`` is

    F(w) = nu * ||A1 w - b1||^2_W1  +  mu * ||A2 w||^2_W2  +  alpha * ||w||^2,

where the weighted norms fold the sample weights of the target carriers
(discretized L2 norms) and ``nu`` is the stored normalization, by default
``1 / ||b1||^2_W1`` so the match term is a relative misfit.  The solve path
is a single SVD of the stacked weighted system, reused across all values of
``alpha``; Morozov selection bisects on ``log(alpha)`` using the monotone
growth of the match residual.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigurationError, DataError
from .geometry import BallExterior, RegionSpec, SectorShell, SphereSurface
from .potentials import Propagator


def mu_for_region(d2: Optional[RegionSpec]) -> float:
    """Null-term weight: 0 without D2, 1 for bounded D2, 1/(4 pi R^2) for
    the exterior of the origin-centered ball of radius R."""
    if d2 is None:
        return 0.0
    if isinstance(d2, BallExterior):
        if np.linalg.norm(np.asarray(d2.center, dtype=float)) > 1e-14:
            raise ConfigurationError(
                "exterior null region must be centered at the origin"
            )
        return 1.0 / (4.0 * np.pi * d2.radius**2)
    if isinstance(d2, (SectorShell, SphereSurface)):
        return 1.0
    raise ConfigurationError(f"unsupported null region {type(d2).__name__}")


def _matrix_and_weights(a, weights=None):
    if isinstance(a, Propagator):
        return a.matrix, a.row_weights if weights is None else weights
    return np.asarray(a, dtype=np.complex128), weights


@dataclass
class TikhonovProblem:
    """Weighted two-carrier least-squares problem.

    ``a1``/``a2`` accept either :class:`Propagator` instances (their row
    weights are picked up automatically) or plain complex matrices with
    explicit ``w1``/``w2``.  Missing weights default to ones.  The
    ``normalization`` is fixed at construction; scaling ``b1`` afterwards
    scales the solution exactly linearly.
    """

    a1: object
    b1: np.ndarray
    w1: Optional[np.ndarray] = None
    a2: Optional[object] = None
    w2: Optional[np.ndarray] = None
    b2: Optional[np.ndarray] = None
    mu: float = 0.0
    normalization: Optional[float] = None

    def __post_init__(self):
        self.a1, self.w1 = _matrix_and_weights(self.a1, self.w1)
        self.b1 = np.asarray(self.b1, dtype=np.complex128)
        if self.b1.shape != (self.a1.shape[0],):
            raise DataError("b1 length must equal the A1 row count")
        if self.w1 is None:
            self.w1 = np.ones(self.a1.shape[0])
        if self.a2 is not None:
            self.a2, self.w2 = _matrix_and_weights(self.a2, self.w2)
            if self.a2.shape[1] != self.a1.shape[1]:
                raise DataError("A1 and A2 must share the column dimension")
            if self.w2 is None:
                self.w2 = np.ones(self.a2.shape[0])
            if self.b2 is not None:
                self.b2 = np.asarray(self.b2, dtype=np.complex128)
                if self.b2.shape != (self.a2.shape[0],):
                    raise DataError("b2 length must equal the A2 row count")
        if self.mu < 0:
            raise ConfigurationError("mu must be nonnegative")
        for name, arr in (("A1", self.a1), ("b1", self.b1), ("A2", self.a2), ("b2", self.b2)):
            if arr is not None and not np.all(np.isfinite(arr)):
                raise DataError(f"non-finite entries in {name}")
        if self.normalization is None:
            bnorm2 = float(np.sum(self.w1 * np.abs(self.b1) ** 2))
            if bnorm2 == 0.0:
                raise DataError("b1 has zero weighted norm; pass normalization explicitly")
            self.normalization = 1.0 / bnorm2
        if self.normalization <= 0:
            raise ConfigurationError("normalization must be positive")


@dataclass(frozen=True)
class SolveReport:
    """Result of one regularized solve (or a Morozov search)."""

    alpha: float
    w: np.ndarray
    match_residual: float
    coeff_norm: float
    null_level: Optional[float] = None
    morozov_target: Optional[float] = None
    morozov_converged: Optional[bool] = None
    discrepancy_trace: tuple = ()

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "match_residual": self.match_residual,
            "coeff_norm": self.coeff_norm,
            "null_level": self.null_level,
            "morozov_target": self.morozov_target,
            "morozov_converged": self.morozov_converged,
            "discrepancy_trace": [[a, r] for a, r in self.discrepancy_trace],
        }


class TikhonovSolver:
    """One SVD of the stacked weighted system, reusable across alphas."""

    def __init__(self, problem: TikhonovProblem):
        self.problem = problem
        p = problem
        sw1 = np.sqrt(p.w1)
        blocks = [math.sqrt(p.normalization) * sw1[:, None] * p.a1]
        # mu == 0 drops the null block entirely so the solution matches the
        # single-carrier problem exactly, not just to rounding.
        if p.a2 is not None and p.mu > 0.0:
            blocks.append(math.sqrt(p.mu) * np.sqrt(p.w2)[:, None] * p.a2)
        stacked = np.vstack(blocks) if len(blocks) > 1 else blocks[0]
        d = np.zeros(stacked.shape[0], dtype=np.complex128)
        d[: p.a1.shape[0]] = math.sqrt(p.normalization) * sw1 * p.b1
        if p.a2 is not None and p.mu > 0.0 and p.b2 is not None:
            d[p.a1.shape[0] :] = math.sqrt(p.mu) * np.sqrt(p.w2) * p.b2
        self._u, self._s, self._vh = np.linalg.svd(stacked, full_matrices=False)
        self._ud = self._u.conj().T @ d
        self._sw1 = sw1
        self._b1_wnorm = float(np.linalg.norm(sw1 * p.b1))

    def coefficients(self, alpha: float) -> np.ndarray:
        f = self._s / (self._s**2 + alpha)
        return self._vh.conj().T @ (f * self._ud)

    def match_residual(self, w: np.ndarray) -> float:
        """Relative weighted L2 misfit on the match carrier."""
        r = np.linalg.norm(self._sw1 * (self.problem.a1 @ w - self.problem.b1))
        return float(r / self._b1_wnorm)

    def null_level(self, w: np.ndarray) -> Optional[float]:
        p = self.problem
        if p.a2 is None:
            return None
        return float(np.linalg.norm(np.sqrt(p.w2) * (p.a2 @ w)))

    def report(self, alpha: float, **extra) -> SolveReport:
        w = self.coefficients(alpha)
        return SolveReport(
            alpha=float(alpha),
            w=w,
            match_residual=self.match_residual(w),
            coeff_norm=float(np.linalg.norm(w)),
            null_level=self.null_level(w),
            **extra,
        )


def functional_value(problem: TikhonovProblem, w: np.ndarray, alpha: float) -> float:
    """Discrete Tikhonov functional F(w); used by optimality checks."""
    p = problem
    val = p.normalization * float(np.sum(p.w1 * np.abs(p.a1 @ w - p.b1) ** 2))
    if p.a2 is not None and p.mu > 0.0:
        resid2 = p.a2 @ w if p.b2 is None else p.a2 @ w - p.b2
        val += p.mu * float(np.sum(p.w2 * np.abs(resid2) ** 2))
    return val + alpha * float(np.sum(np.abs(w) ** 2))


def solve_fixed_alpha(problem: TikhonovProblem, alpha: float) -> SolveReport:
    """Minimizer of the discrete functional at a fixed regularization weight."""
    if alpha <= 0:
        raise ConfigurationError("alpha must be positive")
    return TikhonovSolver(problem).report(alpha)


def morozov_select(
    problem: TikhonovProblem,
    delta: float,
    alpha_range: Sequence[float] = (1e-16, 1e2),
    tol: float = 0.05,
    max_steps: int = 60,
) -> SolveReport:
    """Pick alpha so the relative match residual equals ``delta``.

    Bisection on log(alpha), exploiting the monotone nondecreasing residual.
    If even the smallest alpha misses the target from above the search is
    flagged unconverged and the lower endpoint returned; likewise when the
    residual at the upper endpoint is still below target.
    """
    if not (0.0 < delta < 1.0):
        raise ConfigurationError("delta must lie in (0, 1)")
    lo, hi = float(alpha_range[0]), float(alpha_range[1])
    if not (0.0 < lo < hi):
        raise ConfigurationError("alpha_range must satisfy 0 < lo < hi")
    solver = TikhonovSolver(problem)
    trace = []

    def residual_at(alpha: float) -> float:
        r = solver.match_residual(solver.coefficients(alpha))
        trace.append((float(alpha), r))
        return r

    r_lo = residual_at(lo)
    if r_lo > delta:
        return solver.report(
            lo,
            morozov_target=delta,
            morozov_converged=False,
            discrepancy_trace=tuple(trace),
        )
    r_hi = residual_at(hi)
    if r_hi < delta:
        return solver.report(
            hi,
            morozov_target=delta,
            morozov_converged=False,
            discrepancy_trace=tuple(trace),
        )
    chosen, converged = lo, abs(r_lo - delta) <= tol * delta
    for _ in range(max_steps):
        mid = math.sqrt(lo * hi)
        r = residual_at(mid)
        if abs(r - delta) <= tol * delta:
            chosen, converged = mid, True
            break
        if r < delta:
            lo = mid
        else:
            hi = mid
    else:
        # interval exhausted: keep the largest alpha whose residual stays
        # at or below the target
        chosen, converged = lo, False
    return solver.report(
        chosen,
        morozov_target=delta,
        morozov_converged=converged,
        discrepancy_trace=tuple(trace),
    )
