"""Multiscale multivariate Student-t distribution.

The log-density is -(nu + m)/2 * log(1 + q' Sigma^{-1} q / nu) with
Sigma = diag(1, ..., 1, sigma^2); large sigma^2 forces severe multiscale
structure. The metric keeps only the guaranteed positive-definite part of
the negative log-density Hessian, (nu + m) / (nu + q' Sigma^{-1} q) times
Sigma^{-1}.
"""

import numpy as np

from ..phase import MetricBundle, TargetModel

DEFAULT_NU = 5.0
DEFAULT_DIM = 20
DEFAULT_SIGMA_SQ = 1e4


class StudentTModel(TargetModel):
    """Student-t target with a diagonal scale matrix, heavy in one axis."""

    has_analytic_sampler = True

    def __init__(self, nu: float = DEFAULT_NU, dim: int = DEFAULT_DIM, sigma_sq: float = DEFAULT_SIGMA_SQ):
        if nu <= 2.0:
            raise ValueError("degrees of freedom must exceed 2 for a finite covariance")
        self.nu = float(nu)
        self._dim = int(dim)
        self.sigma_sq = float(sigma_sq)
        self.scale_diag = np.ones(dim)
        self.scale_diag[-1] = self.sigma_sq
        self._inv_diag = 1.0 / self.scale_diag
        self._log_det_inv = float(-np.sum(np.log(self.scale_diag)))
        self._sigma_inv_mat = np.diag(self._inv_diag)
        self._sigma_mat = np.diag(self.scale_diag)

    @property
    def dim(self) -> int:
        return self._dim

    def _quad(self, q: np.ndarray) -> float:
        return float(q @ (self._inv_diag * q))

    def log_density(self, q) -> float:
        q = np.asarray(q, dtype=float)
        return -0.5 * (self.nu + self.dim) * np.log1p(self._quad(q) / self.nu)

    def grad_log_density(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        return -(self.nu + self.dim) * (self._inv_diag * q) / (self.nu + self._quad(q))

    def metric_bundle(self, q) -> MetricBundle:
        return studentt_metric(np.asarray(q, dtype=float), self)

    def metric_inverse_apply(self, q, vec) -> np.ndarray:
        denom = self.nu + self._quad(np.asarray(q, dtype=float))
        return (denom / (self.nu + self.dim)) * (self.scale_diag * vec)

    def sample(self, n: int, rng) -> np.ndarray:
        return studentt_analytic_sample(self, n, rng)


def studentt_metric(q: np.ndarray, model: StudentTModel) -> MetricBundle:
    """Closed-form metric bundle (nu + m) / (nu + q' Sigma^{-1} q) Sigma^{-1}.

    The metric partials are the scalar coefficient's derivative times the
    constant matrix Sigma^{-1}, so every grads[k] is symmetric by
    construction.
    """
    m = model.dim
    inv_diag = model._inv_diag
    denom = model.nu + float(q @ (inv_diag * q))
    coef = (model.nu + m) / denom
    metric = coef * model._sigma_inv_mat
    inverse = (1.0 / coef) * model._sigma_mat
    log_det = m * np.log(coef) + model._log_det_inv
    # d coef / d q_k = -2 coef (Sigma^{-1} q)_k / denom
    dcoef = -2.0 * coef * (inv_diag * q) / denom
    grads = dcoef[:, None, None] * model._sigma_inv_mat[None, :, :]
    return MetricBundle(metric=metric, inverse=inverse, log_det=float(log_det), grads=grads)


def studentt_analytic_sample(model: StudentTModel, n: int, rng) -> np.ndarray:
    """Exact draws q = z / sqrt(w / nu) with z ~ Normal(0, Sigma), w ~ chi2_nu."""
    z = rng.normal(size=(n, model.dim)) * np.sqrt(model.scale_diag)
    w = rng.chisquare(model.nu, size=n)
    return z / np.sqrt(w / model.nu)[:, None]
