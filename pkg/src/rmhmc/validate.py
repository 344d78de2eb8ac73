"""Finite-difference validation of model derivatives.

Central differences with a perturbation of 1e-6 scaled by 1 + |coordinate|
balance truncation against round-off at 64-bit precision; every concrete
model is expected to pass these checks at randomized points.
"""

import numpy as np

from .phase import TargetModel


def _fd_step(value: float) -> float:
    return 1e-6 * (1.0 + abs(value))


def fd_gradient(f, q: np.ndarray) -> np.ndarray:
    """Central-difference gradient of a scalar function."""
    q = np.asarray(q, dtype=float)
    grad = np.empty_like(q)
    for k in range(q.size):
        h = _fd_step(q[k])
        plus, minus = q.copy(), q.copy()
        plus[k] += h
        minus[k] -= h
        grad[k] = (f(plus) - f(minus)) / (2.0 * h)
    return grad


def fd_metric_grads(model: TargetModel, q: np.ndarray) -> np.ndarray:
    """Central-difference partials of the metric matrix, stacked over k."""
    q = np.asarray(q, dtype=float)
    m = q.size
    grads = np.empty((m, m, m))
    for k in range(m):
        h = _fd_step(q[k])
        plus, minus = q.copy(), q.copy()
        plus[k] += h
        minus[k] -= h
        grads[k] = (model.metric_bundle(plus).metric - model.metric_bundle(minus).metric) / (2.0 * h)
    return grads


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Infinity-norm difference over max(1, infinity norm of the analytic
    value); relative for order-one-and-larger quantities, absolute below."""
    analytic = np.asarray(analytic, dtype=float)
    numeric = np.asarray(numeric, dtype=float)
    scale = max(1.0, float(np.max(np.abs(analytic))))
    return float(np.max(np.abs(analytic - numeric))) / scale


def check_gradients(model: TargetModel, points: np.ndarray, tol_grad: float = 1e-5, tol_metric: float = 1e-4):
    """Validates grad_log_density and the metric partials at the given points.

    Args:
        model: Model under test.
        points: Array of positions, one row per check.
        tol_grad: Relative tolerance for the log-density gradient.
        tol_metric: Relative tolerance for the metric partials.

    Returns:
        Tuple of the worst observed gradient and metric errors.

    Raises:
        AssertionError: when any point exceeds its tolerance.
    """
    worst_grad = 0.0
    worst_metric = 0.0
    for q in np.atleast_2d(np.asarray(points, dtype=float)):
        err_g = max_relative_error(model.grad_log_density(q), fd_gradient(model.log_density, q))
        err_m = max_relative_error(model.metric_bundle(q).grads, fd_metric_grads(model, q))
        worst_grad = max(worst_grad, err_g)
        worst_metric = max(worst_metric, err_m)
    if worst_grad > tol_grad:
        raise AssertionError(f"log-density gradient error {worst_grad:.3e} exceeds {tol_grad:.1e}")
    if worst_metric > tol_metric:
        raise AssertionError(f"metric partials error {worst_metric:.3e} exceeds {tol_metric:.1e}")
    return worst_grad, worst_metric
