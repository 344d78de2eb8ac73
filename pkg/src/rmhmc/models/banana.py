"""Banana-shaped posterior from a non-identifiable Gaussian mean model.

Observations follow Normal(theta1 + theta2^2, sigma_y^2) with independent
Normal(0, sigma_theta^2) priors on both parameters, so the likelihood cannot
tell theta2 from -theta2 and the posterior concentrates along a parabola.
The metric is the Fisher information plus the negative prior Hessian, which
is positive definite everywhere in closed form.
"""

from importlib import resources

import numpy as np
import scipy.optimize

from ..phase import EvaluationError, MetricBundle, TargetModel

SIGMA_Y = 2.0
SIGMA_THETA = 2.0
N_OBSERVATIONS = 100
TRUE_THETA = (0.5, np.sqrt(3.0) / 2.0)

_ENVELOPE_SD_MULTIPLE = 10.0
_MIN_ACCEPT_RATE = 1e-6


def _load_fixture() -> np.ndarray:
    path = resources.files("rmhmc.models").joinpath("data/banana_y.csv")
    return np.loadtxt(path.open())


def banana_metric(theta, n: int = N_OBSERVATIONS, sigma_y: float = SIGMA_Y, sigma_theta: float = SIGMA_THETA) -> MetricBundle:
    """Closed-form metric bundle for the banana posterior at theta.

    The metric depends on theta only through theta2; its determinant is
    bounded below by a positive constant, so no factorization guard is
    needed.
    """
    theta = np.asarray(theta, dtype=float)
    t2 = theta[1]
    a = 1.0 / sigma_theta**2 + n / sigma_y**2
    b = 2.0 * n * t2 / sigma_y**2
    c = 1.0 / sigma_theta**2 + 4.0 * n * t2**2 / sigma_y**2
    metric = np.array([[a, b], [b, c]])
    det = a * c - b * b
    inverse = np.array([[c, -b], [-b, a]]) / det
    off = 2.0 * n / sigma_y**2
    grads = np.zeros((2, 2, 2))
    grads[1] = [[0.0, off], [off, 8.0 * n * t2 / sigma_y**2]]
    return MetricBundle(metric=metric, inverse=inverse, log_det=float(np.log(det)), grads=grads)


class BananaModel(TargetModel):
    """Two-dimensional banana posterior with a checked-in observation set.

    The default observations are a fixture generated once from a fixed seed
    at the true parameters, so every diagnostic in the repository sees the
    same posterior.
    """

    has_analytic_sampler = True

    def __init__(self, y: np.ndarray | None = None):
        self.y = _load_fixture() if y is None else np.asarray(y, dtype=float)
        if self.y.size != N_OBSERVATIONS:
            raise ValueError(f"expected {N_OBSERVATIONS} observations, got {self.y.size}")
        self._sum_y = float(np.sum(self.y))
        self._sum_y_sq = float(np.sum(self.y**2))
        self._log_norm = -0.5 * N_OBSERVATIONS * np.log(2.0 * np.pi * SIGMA_Y**2) - np.log(
            2.0 * np.pi * SIGMA_THETA**2
        )
        self._envelope = self._build_envelope()

    @property
    def dim(self) -> int:
        return 2

    def log_density(self, q) -> float:
        q = np.asarray(q, dtype=float)
        c = q[0] + q[1] ** 2
        sse = self._sum_y_sq - 2.0 * c * self._sum_y + N_OBSERVATIONS * c * c
        prior = (q[0] ** 2 + q[1] ** 2) / (2.0 * SIGMA_THETA**2)
        return self._log_norm - sse / (2.0 * SIGMA_Y**2) - prior

    def _log_density_batch(self, thetas: np.ndarray) -> np.ndarray:
        c = thetas[:, 0] + thetas[:, 1] ** 2
        sse = self._sum_y_sq - 2.0 * c * self._sum_y + N_OBSERVATIONS * c * c
        prior = (thetas[:, 0] ** 2 + thetas[:, 1] ** 2) / (2.0 * SIGMA_THETA**2)
        return self._log_norm - sse / (2.0 * SIGMA_Y**2) - prior

    def grad_log_density(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        c = q[0] + q[1] ** 2
        resid = (self._sum_y - N_OBSERVATIONS * c) / SIGMA_Y**2
        return np.array(
            [resid - q[0] / SIGMA_THETA**2, 2.0 * q[1] * resid - q[1] / SIGMA_THETA**2]
        )

    def metric_bundle(self, q) -> MetricBundle:
        return banana_metric(q)

    def metric_inverse_apply(self, q, vec) -> np.ndarray:
        t2 = q[1]
        a = 1.0 / SIGMA_THETA**2 + N_OBSERVATIONS / SIGMA_Y**2
        b = 2.0 * N_OBSERVATIONS * t2 / SIGMA_Y**2
        c = 1.0 / SIGMA_THETA**2 + 4.0 * N_OBSERVATIONS * t2**2 / SIGMA_Y**2
        det = a * c - b * b
        return np.array([c * vec[0] - b * vec[1], a * vec[1] - b * vec[0]]) / det

    def _neg_hessian_log_density(self, q) -> np.ndarray:
        c = q[0] + q[1] ** 2
        resid = (self._sum_y - N_OBSERVATIONS * c) / SIGMA_Y**2
        h11 = N_OBSERVATIONS / SIGMA_Y**2 + 1.0 / SIGMA_THETA**2
        h12 = 2.0 * N_OBSERVATIONS * q[1] / SIGMA_Y**2
        h22 = 4.0 * N_OBSERVATIONS * q[1] ** 2 / SIGMA_Y**2 + 1.0 / SIGMA_THETA**2 - 2.0 * resid
        return np.array([[h11, h12], [h12, h22]])

    def _build_envelope(self):
        result = scipy.optimize.minimize(
            lambda t: -self.log_density(t),
            x0=np.array([0.4, 0.9]),
            jac=lambda t: -self.grad_log_density(t),
            method="BFGS",
        )
        mode = result.x
        laplace_cov = np.linalg.inv(self._neg_hessian_log_density(mode))
        sds = np.sqrt(np.diag(laplace_cov))
        lower = mode - _ENVELOPE_SD_MULTIPLE * sds
        upper = mode + _ENVELOPE_SD_MULTIPLE * sds
        return lower, upper, float(self.log_density(mode))

    @property
    def envelope_box(self):
        """(lower, upper) corners of the rejection-sampling envelope."""
        lower, upper, _ = self._envelope
        return lower.copy(), upper.copy()

    def sample(self, n: int, rng) -> np.ndarray:
        return banana_rejection_sample(self, n, rng)


def banana_rejection_sample(model: BananaModel, n: int, rng) -> np.ndarray:
    """Draws n i.i.d. posterior samples by rejection from a uniform envelope.

    The envelope is the box spanning the posterior mode plus/minus ten
    Laplace-approximation marginal standard deviations; near-flat curvature
    along the parabola makes those margins generous. Acceptance uses the
    density ratio against the mode value.

    Args:
        model: Banana model supplying the density and envelope.
        n: Number of samples; at least 1.
        rng: RandomStream for proposals and acceptance draws.

    Returns:
        An (n, 2) array of posterior draws.

    Raises:
        EvaluationError: if the observed acceptance rate falls below 1e-6.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    lower, upper, log_mode = model._envelope
    width = upper - lower
    accepted = []
    total_accepted = 0
    total_proposed = 0
    batch = max(4 * n, 10_000)
    while total_accepted < n:
        proposals = lower + width * rng.uniform(size=(batch, 2))
        log_ratio = model._log_density_batch(proposals) - log_mode
        keep = np.log(rng.uniform(size=batch)) < log_ratio
        total_proposed += batch
        kept = proposals[keep]
        total_accepted += kept.shape[0]
        accepted.append(kept)
        if total_proposed >= 2_000_000 and total_accepted < _MIN_ACCEPT_RATE * total_proposed:
            raise EvaluationError("rejection envelope acceptance rate below 1e-6")
    return np.concatenate(accepted)[:n]
