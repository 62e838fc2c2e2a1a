"""Futaki barycenter, soliton vector and normalization constant.

The soliton vector is the unique minimizer of the strictly convex function
``F(lam) = log I0(lam)`` where ``I0(lam) = int_P exp(lam . x) W(x) dx``: its
gradient is the weighted barycenter ``g = I1 / I0`` and its Hessian is the
weighted covariance ``I2 / I0 - g g^T``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .basedata import WeightFormSet, fano_check
from .errors import MaxIterations, NotFano, OriginNotInterior
from .polytope import MomentTensor, Polytope, weighted_moments

log = logging.getLogger(__name__)

ARMIJO = 1e-4
MAX_ITER = 100
MAX_HALVINGS = 60


@dataclass(frozen=True)
class LogPartition:
    """Value, gradient and Hessian of ``F = log I0`` at one point."""

    lam: np.ndarray
    value: float
    gradient: np.ndarray
    hessian: np.ndarray
    moments: MomentTensor


@dataclass
class SolitonResult:
    lam: np.ndarray
    c_lambda: float
    futaki: np.ndarray
    iterations: int
    residual_norm: float
    history: list[LogPartition] = field(default_factory=list, repr=False)

    @property
    def theta_affine(self) -> tuple[np.ndarray, float]:
        """Soliton potential ``theta(x) = lam . x + C`` as ``(slope, intercept)``."""
        return self.lam, self.c_lambda

    def theta(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float) @ self.lam + self.c_lambda


def _start_degree(P: Polytope, lam: np.ndarray) -> int:
    # sharper exponentials start higher up the cubature ladder
    s = float(np.linalg.norm(lam)) * P.diameter
    for bound, deg in ((1.0, 5), (2.0, 7), (4.0, 9), (8.0, 11)):
        if s < bound:
            return deg
    return 13


def log_partition(P: Polytope, W: WeightFormSet | None, lam, **quad) -> LogPartition:
    lam = np.asarray(lam, dtype=float).reshape(P.dim)
    quad.setdefault("degree", _start_degree(P, lam))
    mt = weighted_moments(P, W, lam, **quad)
    g = mt.I1 / mt.I0
    H = mt.I2 / mt.I0 - np.outer(g, g)
    return LogPartition(lam, mt.log_i0, g, 0.5 * (H + H.T), mt)


def futaki_vector(P: Polytope, W: WeightFormSet | None = None, **quad) -> np.ndarray:
    """Weighted barycenter of the polytope; zero exactly in the Kahler-Einstein case."""
    _require_fano(P, W)
    return log_partition(P, W, np.zeros(P.dim), **quad).gradient


def normalization_constant(P: Polytope, W: WeightFormSet | None, lam, **quad) -> float:
    """``C(lam) = log(I0(0) / I0(lam))``.

    The fibre-volume constant and the base volume cancel in the ratio, so
    only polytope integrals are needed.
    """
    lam = np.asarray(lam, dtype=float).reshape(P.dim)
    if not np.any(lam):
        return 0.0
    f0 = log_partition(P, W, np.zeros(P.dim), **quad).value
    return f0 - log_partition(P, W, lam, **quad).value


def _require_fano(P: Polytope, W: WeightFormSet | None) -> None:
    if W is not None and len(W):
        report = fano_check(P, W)
        if not report.is_fano:
            raise NotFano(f"weight forms are not positive on the polytope (margin {report.margin:.6g})")


def solve_soliton_vector(
    P: Polytope,
    W: WeightFormSet | None = None,
    tol: float = 1e-10,
    lam0=None,
    max_iter: int = MAX_ITER,
    **quad,
) -> SolitonResult:
    """Damped Newton for the zero of the weighted barycenter ``g(lam)``.

    Starting from ``lam0`` (default 0), each step solves ``H d = -g`` and
    backtracks by halving until the Armijo condition
    ``F(lam + t d) <= F(lam) + 1e-4 t g.d`` holds. Convergence is declared
    once ``|g| <= tol * min(1, diam P)``, which bounds both the raw and the
    diameter-normalized barycenter by ``tol``, and the pending Newton step
    is below ``tol * max(1, |lam|)``.

    ``iterations`` counts gradient evaluations at accepted iterates, so an
    already-balanced polytope reports one.

    Raises
    ------
    NotFano, OriginNotInterior, MaxIterations
    """
    _require_fano(P, W)
    if not P.contains_origin_interior():
        raise OriginNotInterior("the origin must lie in the interior of the polytope")
    threshold = tol * min(1.0, P.diameter)

    futaki = log_partition(P, W, np.zeros(P.dim), **quad)
    cur = futaki if lam0 is None else log_partition(P, W, lam0, **quad)
    history = [cur]
    for it in range(1, max_iter + 1):
        gnorm = float(np.linalg.norm(cur.gradient))
        log.debug("newton it=%d |g|=%.3e F=%.17g", it, gnorm, cur.value)
        step = -np.linalg.solve(cur.hessian, cur.gradient)
        # a flat direction can leave |g| small while lam is still off, so
        # the Newton correction must be small as well
        if gnorm <= threshold and np.linalg.norm(step) <= tol * max(1.0, np.linalg.norm(cur.lam)):
            c = futaki.value - cur.value
            return SolitonResult(cur.lam.copy(), c if np.any(cur.lam) else 0.0,
                                 futaki.gradient.copy(), it, gnorm, history)
        slope = float(cur.gradient @ step)
        t = 1.0
        if -slope <= 1e-12 * max(1.0, abs(cur.value)):
            # decrease is below the resolution of F: pure Newton region
            trial = log_partition(P, W, cur.lam + step, **quad)
        else:
            for _ in range(MAX_HALVINGS):
                trial = log_partition(P, W, cur.lam + t * step, **quad)
                if trial.value <= cur.value + ARMIJO * t * slope:
                    break
                t *= 0.5
            else:
                raise MaxIterations(f"line search stalled at |g|={gnorm:.3e}")
        cur = trial
        history.append(cur)
    raise MaxIterations(f"no convergence in {max_iter} Newton iterations (|g|={gnorm:.3e})")
