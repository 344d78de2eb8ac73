"""Neal's funnel distribution under the SoftAbs metric.

The funnel draws v ~ Normal(0, 9) and then ten coordinates
x_i | v ~ Normal(0, exp(-v)); the state is ordered (v, x_1, ..., x_10). Its
log-density Hessian is indefinite, so the metric maps the Hessian's
eigenvalues through the smooth absolute-value surrogate
s(lambda) = lambda * coth(alpha * lambda), which tends to |lambda| for large
arguments and to 1/alpha at zero. Metric derivatives go through the
eigendecomposition with the standard divided-difference construction.
"""

import numpy as np

from ..phase import EvaluationError, MetricBundle, TargetModel

NUM_LATENT = 10
V_VARIANCE = 9.0
DEFAULT_ALPHA = 1e4
V_INDEX = 0

_SERIES_CUTOFF = 1e-4
_SATURATION_CUTOFF = 20.0
_EIGENVALUE_GAP = 1e-8


def softabs_transform(lam, alpha: float):
    """Smooth absolute value s(lambda) = lambda * coth(alpha * lambda)."""
    lam = np.asarray(lam, dtype=float)
    x = alpha * lam
    out = np.empty_like(lam)
    small = np.abs(x) < _SERIES_CUTOFF
    xs = x[small]
    out[small] = (1.0 + xs * xs / 3.0 - xs**4 / 45.0) / alpha
    xl = x[~small]
    out[~small] = lam[~small] / np.tanh(xl)
    return out


def softabs_transform_deriv(lam, alpha: float):
    """Derivative of the smooth absolute value with respect to lambda."""
    lam = np.asarray(lam, dtype=float)
    x = alpha * lam
    out = np.empty_like(lam)
    small = np.abs(x) < _SERIES_CUTOFF
    xs = x[small]
    out[small] = 2.0 * xs / 3.0 - 4.0 * xs**3 / 45.0
    big = np.abs(x) > _SATURATION_CUTOFF
    out[big] = np.sign(x[big])
    mid = ~small & ~big
    xm = x[mid]
    out[mid] = 1.0 / np.tanh(xm) - xm / np.sinh(xm) ** 2
    return out


def softabs_bundle(hessian: np.ndarray, hessian_grads: np.ndarray, alpha: float, q=None) -> MetricBundle:
    """Metric bundle from a log-density Hessian and its coordinate partials.

    Eigenvalues are pushed through the smooth absolute value; the metric
    partials use the divided-difference (Loewner) construction, replacing
    near-degenerate eigenvalue pairs by the analytic derivative to avoid
    0/0.
    """
    try:
        lam, Q = np.linalg.eigh(hessian)
    except np.linalg.LinAlgError as exc:
        raise EvaluationError("Hessian eigendecomposition failed", q) from exc
    s = softabs_transform(lam, alpha)
    metric = (Q * s) @ Q.T
    inverse = (Q / s) @ Q.T
    log_det = float(np.sum(np.log(s)))

    diff = lam[:, None] - lam[None, :]
    loewner = np.empty_like(diff)
    close = np.abs(diff) < _EIGENVALUE_GAP
    mid = 0.5 * (lam[:, None] + lam[None, :])
    loewner[close] = softabs_transform_deriv(mid[close], alpha)
    loewner[~close] = (s[:, None] - s[None, :])[~close] / diff[~close]

    rotated = np.matmul(np.matmul(Q.T, hessian_grads), Q)
    grads = np.matmul(np.matmul(Q, loewner[None, :, :] * rotated), Q.T)
    return MetricBundle(metric=metric, inverse=inverse, log_det=log_det, grads=grads)


def _funnel_hessian(q: np.ndarray):
    """Hessian of the funnel log-density and its coordinate partials."""
    v = q[V_INDEX]
    x = q[1:]
    ev = np.exp(v)
    ssq = float(x @ x)
    m = q.size

    hess = np.zeros((m, m))
    hess[0, 0] = -1.0 / V_VARIANCE - 0.5 * ev * ssq
    hess[0, 1:] = -x * ev
    hess[1:, 0] = -x * ev
    hess[np.arange(1, m), np.arange(1, m)] = -ev

    grads = np.zeros((m, m, m))
    grads[0, 0, 0] = -0.5 * ev * ssq
    grads[0, 0, 1:] = -x * ev
    grads[0, 1:, 0] = -x * ev
    grads[0, np.arange(1, m), np.arange(1, m)] = -ev
    for k in range(1, m):
        grads[k, 0, 0] = -x[k - 1] * ev
        grads[k, 0, k] = -ev
        grads[k, k, 0] = -ev
    return hess, grads


def softabs_metric(q, alpha: float = DEFAULT_ALPHA) -> MetricBundle:
    """SoftAbs metric bundle for the funnel at position q."""
    q = np.asarray(q, dtype=float)
    hess, grads = _funnel_hessian(q)
    return softabs_bundle(hess, grads, alpha, q=q)


class FunnelModel(TargetModel):
    """Eleven-dimensional funnel with the SoftAbs Riemannian metric."""

    has_analytic_sampler = True
    v_index = V_INDEX

    def __init__(self, alpha: float = DEFAULT_ALPHA):
        if alpha <= 0.0:
            raise ValueError("softabs alpha must be positive")
        self.alpha = float(alpha)

    @property
    def dim(self) -> int:
        return NUM_LATENT + 1

    def log_density(self, q) -> float:
        q = np.asarray(q, dtype=float)
        v = q[V_INDEX]
        x = q[1:]
        ev = np.exp(v)
        log_v = -0.5 * v * v / V_VARIANCE - 0.5 * np.log(2.0 * np.pi * V_VARIANCE)
        log_x = -0.5 * ev * float(x @ x) + 0.5 * NUM_LATENT * v - 0.5 * NUM_LATENT * np.log(2.0 * np.pi)
        return float(log_v + log_x)

    def grad_log_density(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        v = q[V_INDEX]
        x = q[1:]
        ev = np.exp(v)
        grad = np.empty_like(q)
        grad[V_INDEX] = -v / V_VARIANCE + 0.5 * NUM_LATENT - 0.5 * ev * float(x @ x)
        grad[1:] = -x * ev
        return grad

    def metric_bundle(self, q) -> MetricBundle:
        return softabs_metric(q, self.alpha)

    def sample(self, n: int, rng) -> np.ndarray:
        return funnel_analytic_sample(n, rng)


def funnel_analytic_sample(n: int, rng) -> np.ndarray:
    """Draws n exact funnel samples, v in column 0."""
    v = np.sqrt(V_VARIANCE) * rng.normal(size=n)
    x = rng.normal(size=(n, NUM_LATENT)) * np.exp(-0.5 * v)[:, None]
    return np.column_stack([v, x])
