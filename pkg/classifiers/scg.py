"""
Scaled conjugate gradient optimizer
Möller's Hessian-free conjugate gradient with a scalar trust parameter
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

logger = logging.getLogger(__name__)

SIGMA0 = 1.0e-4
LAMBDA_MIN = 1.0e-15
LAMBDA_MAX = 1.0e100
# Bisection steps when shortening the step that first satisfies `stop`
TRIM_STEPS = 12


class TrainingError(RuntimeError):
    """Raised when the objective stops being finite"""

    def __init__(self, message: str, iteration: int):
        super().__init__(f"{message} (iteration {iteration})")
        self.iteration = iteration


@dataclass
class ScgResult:
    weights: np.ndarray
    error: float
    initial_error: float
    iterations: int
    converged: bool
    history: List[float] = field(default_factory=list)


def scg_minimize(fun: Callable[[np.ndarray], float],
                 grad: Callable[[np.ndarray], np.ndarray],
                 w0: np.ndarray,
                 max_iterations: int = 100,
                 tolerance: float = 1.0e-6,
                 error_goal: Optional[float] = None,
                 stop: Optional[Callable[[np.ndarray], bool]] = None) -> ScgResult:
    """
    Minimise fun starting from w0

    Curvature along the search direction comes from a one-sided difference
    of gradients, regularised by lambda. A step is only accepted when it
    lowers the objective, so the returned error never exceeds the initial one.

    Args:
        fun: Objective
        grad: Its gradient
        w0: Starting weights (not modified)
        max_iterations: Iteration cap
        tolerance: Stop when the gradient norm falls below this
        error_goal: Optional early stop once the objective reaches this value
        stop: Optional predicate on the weights. Training ends at the first
            accepted step that satisfies it, shortened by bisection to the
            smallest fraction of the step that still does

    Returns:
        ScgResult with the best weights found
    """
    w = np.array(w0, dtype=float)
    n_params = w.size

    f_old = float(fun(w))
    if not np.isfinite(f_old):
        raise TrainingError("Non-finite initial error", 0)
    initial_error = f_old
    f_now = f_old
    g_new = np.asarray(grad(w), dtype=float)
    g_old = g_new
    d = -g_new
    history = [f_now]

    success = True
    n_success = 0
    lam = 1.0
    mu = kappa = theta = 0.0
    converged = False

    if stop is not None and stop(w):
        max_iterations = 0
        converged = True

    iteration = 0
    while iteration < max_iterations:
        iteration += 1

        if np.linalg.norm(g_new) < tolerance:
            converged = True
            break
        if error_goal is not None and f_now <= error_goal:
            converged = True
            break

        if success:
            mu = float(d @ g_new)
            if mu >= 0:
                d = -g_new
                mu = float(d @ g_new)
            kappa = float(d @ d)
            if kappa < np.finfo(float).eps:
                converged = True
                break
            sigma = SIGMA0 / np.sqrt(kappa)
            g_plus = np.asarray(grad(w + sigma * d), dtype=float)
            theta = float(d @ (g_plus - g_new)) / sigma

        # Make the curvature estimate positive
        delta = theta + lam * kappa
        if delta <= 0:
            delta = lam * kappa
            lam = lam - theta / kappa

        alpha = -mu / delta
        w_new = w + alpha * d
        f_new = float(fun(w_new))
        if not np.isfinite(f_new):
            raise TrainingError("Non-finite error during training", iteration)

        comparison = 2.0 * (f_new - f_old) / (alpha * mu)
        if comparison >= 0:
            if stop is not None and stop(w_new):
                w, f_now = _trim_step(fun, stop, w, f_old, w_new, f_new)
                history.append(f_now)
                converged = True
                break
            success = True
            n_success += 1
            w = w_new
            f_now = f_new
        else:
            success = False
            f_now = f_old

        if success:
            f_old = f_new
            g_old = g_new
            g_new = np.asarray(grad(w), dtype=float)
            history.append(f_now)

        if comparison < 0.25:
            lam = min(4.0 * lam, LAMBDA_MAX)
        elif comparison > 0.75:
            lam = max(0.5 * lam, LAMBDA_MIN)

        if n_success == n_params:
            d = -g_new
            n_success = 0
        elif success:
            gamma = float((g_old - g_new) @ g_new) / mu
            d = gamma * d - g_new

    logger.debug("SCG stopped after %d iterations: error %.6g -> %.6g", iteration, initial_error, f_now)
    return ScgResult(
        weights=w,
        error=f_now,
        initial_error=initial_error,
        iterations=iteration,
        converged=converged,
        history=history,
    )


def _trim_step(fun: Callable[[np.ndarray], float], stop: Callable[[np.ndarray], bool],
               w: np.ndarray, f: float, w_new: np.ndarray, f_new: float) -> Tuple[np.ndarray, float]:
    """Shortest fraction of the step w -> w_new that satisfies stop, falling back to w_new"""
    step = w_new - w
    lo, hi = 0.0, 1.0
    for _ in range(TRIM_STEPS):
        mid = 0.5 * (lo + hi)
        if stop(w + mid * step):
            hi = mid
        else:
            lo = mid
    if hi == 1.0:
        return w_new, f_new
    w_trim = w + hi * step
    f_trim = float(fun(w_trim))
    if not np.isfinite(f_trim) or f_trim > f:
        return w_new, f_new
    return w_trim, f_trim
