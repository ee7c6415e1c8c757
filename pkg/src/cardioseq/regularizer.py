"""Temporal regularization of attribute and residual series.

Given a series ``s`` and the edge-padded second-difference operator ``L``,
the repair step solves

    minimize  ||s' - s||^2   subject to  |L s'|_t <= tau  for all t

through its penalized relaxation ``||s' - s||^2 + lambda * ||L s'||^2``.
The penalized problem is solved by an iterative first-order (gradient)
method; the constrained problem wraps it in a short binary search that looks
for the smallest penalty weight whose solution satisfies the indicator.

Residual (non-attribute) dimensions have no thresholds and are smoothed
unconditionally with a fixed penalty weight.

``closed_form_oracle`` solves the same penalized problem exactly via a banded
Cholesky factorization.  It exists to cross-check the iterative path in tests
and must stay an independent implementation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import solveh_banded

from .attributes import (
    AttributeSeries,
    NormalizationStats,
    denormalize_series,
    normalize_series,
)
from .consistency import Thresholds, indicator, laplacian
from .errors import OptimizationError
from .seqio import ATTRIBUTE_NAMES, LATENT_DIM


@dataclass(frozen=True)
class RegularizerConfig:
    """Knobs of the smoothing optimizer.

    ``feasibility_margin`` tightens the threshold the binary search enforces
    (``margin * tau``) while the skip rule and the reported feasibility keep
    using the full ``tau``.  Downstream pixel-space checks re-measure the
    attributes from re-rendered frames, which adds discretization noise on
    top of the regularized series; enforcing with a margin keeps that noise
    from pushing a just-feasible solution back over the threshold.  1.0
    reproduces plain enforcement.
    """

    lambda_residual: float = 50.0
    search_updates: int = 5
    lambda_lo: float = 0.0
    lambda_hi: float = 64.0
    inner_step: float = 0.1
    inner_max_iters: int = 1000
    inner_grad_tol: float = 1e-6
    feasibility_margin: float = 1.0

    def __post_init__(self) -> None:
        if self.lambda_residual < 0:
            raise ValueError("lambda_residual must be non-negative")
        if self.search_updates < 1:
            raise ValueError("need at least one binary-search update")
        if not (0 <= self.lambda_lo < self.lambda_hi):
            raise ValueError("need 0 <= lambda_lo < lambda_hi")
        if self.inner_step <= 0 or self.inner_max_iters < 1 or self.inner_grad_tol <= 0:
            raise ValueError("inner solver settings must be positive")
        if not (0 < self.feasibility_margin <= 1.0):
            raise ValueError("feasibility_margin must be in (0, 1]")


# ---------------------------------------------------------------------------
# Penalized smoothing
# ---------------------------------------------------------------------------


def _objective(x: np.ndarray, s: np.ndarray, lam: float) -> float:
    r = x - s
    lx = laplacian(x)
    return float(r @ r + lam * (lx @ lx))


def _gradient(x: np.ndarray, s: np.ndarray, lam: float) -> np.ndarray:
    # L is symmetric (tridiagonal, replicated ends), so L^T L x = L(L x).
    return 2.0 * (x - s) + 2.0 * lam * laplacian(laplacian(x))


def smooth_penalized(
    series: np.ndarray, lam: float, config: RegularizerConfig | None = None
) -> np.ndarray:
    """Minimize ``||x - s||^2 + lam * ||L x||^2`` by accelerated gradient descent.

    Starts from ``x = s``.  The step length starts at ``config.inner_step``
    and backtracks (halving) whenever a trial step would increase the
    objective; a momentum term with restart-on-increase keeps the iteration
    count manageable for stiff penalties.  Terminates when the gradient norm
    drops to ``config.inner_grad_tol`` or after ``config.inner_max_iters``
    iterations.

    Raises
    ------
    OptimizationError
        If the input is non-finite, or the solver cannot find a decreasing
        step (divergence guard).
    """
    cfg = config or RegularizerConfig()
    s = np.asarray(series, dtype=np.float64)
    if s.ndim != 1 or s.shape[0] < 3:
        raise ValueError("smooth_penalized expects a 1-D series with T >= 3")
    if not np.isfinite(s).all():
        raise OptimizationError("series contains non-finite values")
    if lam < 0:
        raise ValueError("penalty weight must be non-negative")
    if lam == 0.0:
        return s.copy()

    x = s.copy()
    x_prev = x.copy()
    fx = _objective(x, s, lam)
    step = cfg.inner_step
    t_momentum = 1.0
    bad_steps = 0

    for _ in range(cfg.inner_max_iters):
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_momentum * t_momentum))
        beta = (t_momentum - 1.0) / t_next
        y = x + beta * (x - x_prev)
        g = _gradient(y, s, lam)
        fy = _objective(y, s, lam)
        gg = float(g @ g)
        while True:
            cand = y - step * g
            fc = _objective(cand, s, lam)
            if fc <= fy - 1e-4 * step * gg or step < 1e-18:
                break
            step *= 0.5
        if step < 1e-18:
            raise OptimizationError("step size underflow: cannot decrease objective")

        if fc <= fx:
            x_prev, x = x, cand
            fx = fc
            t_momentum = t_next
            bad_steps = 0
        else:
            # Momentum overshot: restart from the best iterate with plain descent.
            gx = _gradient(x, s, lam)
            ggx = float(gx @ gx)
            while True:
                cand = x - step * gx
                fc = _objective(cand, s, lam)
                if fc <= fx - 1e-4 * step * ggx or step < 1e-18:
                    break
                step *= 0.5
            if step < 1e-18:
                raise OptimizationError("step size underflow: cannot decrease objective")
            if fc > fx:
                bad_steps += 1
                if bad_steps >= 10:
                    raise OptimizationError(
                        "objective increased for 10 consecutive accepted steps"
                    )
            else:
                bad_steps = 0
            x_prev, x = x, cand
            fx = fc
            t_momentum = 1.0

        if float(np.linalg.norm(_gradient(x, s, lam))) <= cfg.inner_grad_tol:
            break
    return x


def closed_form_oracle(series: np.ndarray, lam: float) -> np.ndarray:
    """Exact minimizer of the penalized objective via a banded SPD solve.

    Solves ``(I + lam * L^T L) x = s`` with a banded Cholesky factorization.
    Test oracle for :func:`smooth_penalized`; not used by the pipeline.
    """
    s = np.asarray(series, dtype=np.float64)
    if s.ndim != 1 or s.shape[0] < 3:
        raise ValueError("closed_form_oracle expects a 1-D series with T >= 3")
    if lam < 0:
        raise ValueError("penalty weight must be non-negative")
    if lam == 0.0:
        return s.copy()
    T = s.shape[0]
    # L^T L is pentadiagonal; assemble its three upper diagonals directly
    # from the stencil of L (tridiagonal with replicated-end rows).
    main = np.full(T, 6.0)
    main[[0, -1]] = 2.0
    off1 = np.full(T - 1, -4.0)
    off1[[0, -1]] = -3.0
    off2 = np.full(T - 2, 1.0)
    ab = np.zeros((3, T))
    ab[0, 2:] = lam * off2
    ab[1, 1:] = lam * off1
    ab[2, :] = 1.0 + lam * main
    return solveh_banded(ab, s, lower=False)


# ---------------------------------------------------------------------------
# Constrained smoothing via binary search on the penalty weight
# ---------------------------------------------------------------------------


@dataclass
class ConstrainedResult:
    """Outcome of :func:`smooth_constrained` for one series."""

    values: np.ndarray
    lambda_used: float | None  # None when the skip rule fired
    feasible: bool  # indicator all-clear at the full threshold
    skipped: bool


def smooth_constrained(
    series: np.ndarray, tau: float, config: RegularizerConfig | None = None
) -> ConstrainedResult:
    """Smallest-perturbation smoothing subject to the consistency indicator.

    If the input already satisfies the indicator at ``tau`` it is returned
    unchanged (skip rule).  Otherwise a feasibility-directed binary search
    runs for ``config.search_updates`` rounds over
    ``[config.lambda_lo, config.lambda_hi]``: each round solves the penalized
    problem at the midpoint; a feasible solution is recorded and the upper
    bound moves down, an infeasible one moves the lower bound up.  The
    recorded solution with the smallest feasible weight wins.  If no midpoint
    was feasible the upper bracket end is tried; if even that fails the
    hi-solution is returned with ``feasible=False`` (reported, not raised).
    """
    cfg = config or RegularizerConfig()
    s = np.asarray(series, dtype=np.float64)
    enforce_tau = cfg.feasibility_margin * tau

    if not indicator(s, tau).any():
        return ConstrainedResult(values=s.copy(), lambda_used=None, feasible=True, skipped=True)

    lo, hi = cfg.lambda_lo, cfg.lambda_hi
    best: tuple[float, np.ndarray] | None = None
    for _ in range(cfg.search_updates):
        mid = 0.5 * (lo + hi)
        candidate = smooth_penalized(s, mid, cfg)
        if not indicator(candidate, enforce_tau).any():
            best = (mid, candidate)
            hi = mid
        else:
            lo = mid
    if best is None:
        candidate = smooth_penalized(s, cfg.lambda_hi, cfg)
        feasible_full = not indicator(candidate, tau).any()
        return ConstrainedResult(
            values=candidate,
            lambda_used=cfg.lambda_hi,
            feasible=feasible_full,
            skipped=False,
        )
    lam, values = best
    return ConstrainedResult(
        values=values,
        lambda_used=lam,
        feasible=not indicator(values, tau).any(),
        skipped=False,
    )


# ---------------------------------------------------------------------------
# Whole latent trajectories
# ---------------------------------------------------------------------------


@dataclass
class ColumnOutcome:
    column: int
    name: str
    skipped: bool
    lambda_used: float | None
    feasible: bool


@dataclass
class TrajectoryResult:
    trajectory: np.ndarray  # (T, 16)
    columns: list[ColumnOutcome] = field(default_factory=list)

    @property
    def any_infeasible(self) -> bool:
        return any(not c.feasible for c in self.columns)


def regularize_trajectory(
    trajectory: np.ndarray,
    thresholds: Thresholds,
    stats: NormalizationStats,
    config: RegularizerConfig | None = None,
) -> TrajectoryResult:
    """Regularize each of the 16 latent columns independently.

    Columns 0-6 (the attributes) are normalized with ``stats``, smoothed
    under their thresholds, and mapped back.  Columns 7-15 (shape residuals)
    are smoothed unconditionally with ``config.lambda_residual``.
    """
    cfg = config or RegularizerConfig()
    traj = np.asarray(trajectory, dtype=np.float64)
    if traj.ndim != 2 or traj.shape[1] != LATENT_DIM:
        raise ValueError(f"trajectory must be (T, {LATENT_DIM}), got {traj.shape}")
    if traj.shape[0] < 3:
        raise ValueError("need at least 3 frames to regularize")

    out = traj.copy()
    outcomes: list[ColumnOutcome] = []
    for k, name in enumerate(ATTRIBUTE_NAMES):
        raw = AttributeSeries(attribute=name, values=traj[:, k], domain=stats.domain)
        normed = normalize_series(raw, stats)
        result = smooth_constrained(normed.values, thresholds[name], cfg)
        smoothed = AttributeSeries(
            attribute=name, values=result.values, domain=stats.domain, normalized=True
        )
        out[:, k] = denormalize_series(smoothed, stats).values
        outcomes.append(
            ColumnOutcome(
                column=k,
                name=name,
                skipped=result.skipped,
                lambda_used=result.lambda_used,
                feasible=result.feasible,
            )
        )
    for k in range(len(ATTRIBUTE_NAMES), LATENT_DIM):
        out[:, k] = smooth_penalized(traj[:, k], cfg.lambda_residual, cfg)
        outcomes.append(
            ColumnOutcome(
                column=k,
                name=f"z{k:02d}",
                skipped=False,
                lambda_used=cfg.lambda_residual,
                feasible=True,
            )
        )
    return TrajectoryResult(trajectory=out, columns=outcomes)


def regularize_series(
    series: Sequence[AttributeSeries],
    thresholds: Thresholds,
    stats: NormalizationStats,
    config: RegularizerConfig | None = None,
) -> tuple[list[AttributeSeries], list[ColumnOutcome]]:
    """Regularize bare attribute series (no residual columns)."""
    cfg = config or RegularizerConfig()
    out: list[AttributeSeries] = []
    outcomes: list[ColumnOutcome] = []
    for k, s in enumerate(series):
        normed = normalize_series(s, stats)
        result = smooth_constrained(normed.values, thresholds[s.attribute], cfg)
        smoothed = AttributeSeries(
            attribute=s.attribute, values=result.values, domain=s.domain, normalized=True
        )
        out.append(denormalize_series(smoothed, stats))
        outcomes.append(
            ColumnOutcome(
                column=k,
                name=s.attribute,
                skipped=result.skipped,
                lambda_used=result.lambda_used,
                feasible=result.feasible,
            )
        )
    return out, outcomes
