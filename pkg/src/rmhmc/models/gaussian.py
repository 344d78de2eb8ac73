"""Gaussian targets with constant metrics, plus the identity-metric view that
turns any model into its Euclidean-HMC counterpart."""

import numpy as np

from ..phase import MetricBundle, TargetModel


class ConstantMetricGaussian(TargetModel):
    """Multivariate normal with a fixed SPD metric.

    The Hamiltonian is separable, so the explicit leapfrog applies and the
    generalized leapfrog must collapse onto it. The metric defaults to the
    precision matrix, the Fisher information of a Gaussian location family.
    """

    constant_metric = True
    has_analytic_sampler = True

    def __init__(self, mean, cov, metric=None):
        self.mean = np.atleast_1d(np.asarray(mean, dtype=float))
        self.cov = np.atleast_2d(np.asarray(cov, dtype=float))
        m = self.mean.size
        if self.cov.shape != (m, m):
            raise ValueError("covariance shape does not match the mean")
        self._chol_cov = np.linalg.cholesky(self.cov)
        lower_inv = np.linalg.solve(self._chol_cov, np.eye(m))
        self.precision = lower_inv.T @ lower_inv
        self._log_det_cov = 2.0 * float(np.sum(np.log(np.diag(self._chol_cov))))
        metric = self.precision if metric is None else np.asarray(metric, dtype=float)
        self._bundle = MetricBundle.from_metric(metric, np.zeros((m, m, m)))

    @property
    def dim(self) -> int:
        return self.mean.size

    def log_density(self, q) -> float:
        r = np.asarray(q, dtype=float) - self.mean
        quad = float(r @ (self.precision @ r))
        return -0.5 * (self.dim * np.log(2.0 * np.pi) + self._log_det_cov + quad)

    def grad_log_density(self, q) -> np.ndarray:
        return -self.precision @ (np.asarray(q, dtype=float) - self.mean)

    def metric_bundle(self, q) -> MetricBundle:
        return self._bundle

    def sample(self, n: int, rng) -> np.ndarray:
        draws = rng.normal(size=(n, self.dim))
        return self.mean + draws @ self._chol_cov.T


def standard_normal_model(dim: int) -> ConstantMetricGaussian:
    """Standard normal in ``dim`` dimensions with the identity metric."""
    return ConstantMetricGaussian(np.zeros(dim), np.eye(dim))


class EuclideanView(TargetModel):
    """Identity-metric wrapper exposing a model to Euclidean HMC.

    Log-density and gradient delegate to the base model; the metric is the
    identity, so the Hamiltonian reduces to -L(q) + p'p / 2.
    """

    constant_metric = True

    def __init__(self, base: TargetModel):
        self.base = base
        m = base.dim
        self._bundle = MetricBundle(
            metric=np.eye(m), inverse=np.eye(m), log_det=0.0, grads=np.zeros((m, m, m))
        )
        self.has_analytic_sampler = base.has_analytic_sampler

    @property
    def dim(self) -> int:
        return self.base.dim

    def log_density(self, q) -> float:
        return self.base.log_density(q)

    def grad_log_density(self, q) -> np.ndarray:
        return self.base.grad_log_density(q)

    def metric_bundle(self, q) -> MetricBundle:
        return self._bundle

    def sample(self, n: int, rng) -> np.ndarray:
        return self.base.sample(n, rng)
