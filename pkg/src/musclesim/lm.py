"""Bounded Levenberg-Marquardt least squares with a numerical Jacobian.

Small dense problems only (the calibration has ~10 residuals and ~20
parameters). Bounds are enforced by clipping trial steps; the damping
parameter grows until a clipped step still reduces the cost.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass
class LMResult:
    x: np.ndarray
    cost: float                  # sum of squared residuals
    residual: np.ndarray
    iterations: int
    converged: bool
    reason: str
    cost_history: list[float]


def _jacobian(fun, x, residual, lower, upper, rel_step):
    n = x.size
    jac = np.zeros((residual.size, n))
    for i in range(n):
        h = rel_step * max(1.0, abs(x[i]))
        # Step inward when sitting at a bound.
        if x[i] + h > upper[i]:
            h = -h
        trial = x.copy()
        trial[i] += h
        trial[i] = min(max(trial[i], lower[i]), upper[i])
        actual = trial[i] - x[i]
        if actual == 0.0:
            continue
        jac[:, i] = (fun(trial) - residual) / actual
    return jac


def levenberg_marquardt(
    fun: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
    max_iterations: int = 500,
    cost_improvement_tol: float = 1e-10,
    rel_step: float = 1e-6,
    lambda0: float = 1e-3,
) -> LMResult:
    """Minimize sum(fun(x)^2) subject to lower <= x <= upper."""
    x = np.clip(np.asarray(x0, dtype=float), lower, upper)
    residual = fun(x)
    cost = float(residual @ residual)
    history = [cost]
    lam = lambda0
    converged = False
    reason = "max-iterations"
    iterations = 0
    for iterations in range(1, max_iterations + 1):
        jac = _jacobian(fun, x, residual, lower, upper, rel_step)
        jtj = jac.T @ jac
        grad = jac.T @ residual
        if np.max(np.abs(grad)) < 1e-14:
            converged = True
            reason = "gradient-vanished"
            break
        improved = False
        for _ in range(30):
            damped = jtj + lam * np.diag(np.maximum(np.diag(jtj), 1e-12))
            try:
                step = np.linalg.solve(damped, -grad)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            trial = np.clip(x + step, lower, upper)
            trial_res = fun(trial)
            trial_cost = float(trial_res @ trial_res)
            if trial_cost < cost:
                improvement = cost - trial_cost
                x, residual, cost = trial, trial_res, trial_cost
                history.append(cost)
                lam = max(lam / 3.0, 1e-12)
                improved = True
                if improvement < cost_improvement_tol:
                    converged = True
                    reason = "cost-improvement-below-tol"
                break
            lam *= 5.0
            if lam > 1e12:
                break
        if converged:
            break
        if not improved:
            reason = "no-improving-step"
            break
    return LMResult(
        x=x,
        cost=cost,
        residual=residual,
        iterations=iterations,
        converged=converged,
        reason=reason,
        cost_history=history,
    )
