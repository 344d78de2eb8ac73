"""Hierarchical Bayesian logistic regression.

Labels are Bernoulli(sigmoid(x'beta)) with Normal(0, 1/alpha) priors on the
coefficients and a Gamma(k, theta) prior on the precision alpha. The
coefficient block is sampled by RMHMC under the Fisher-information metric
G(beta) = X' Lambda X + alpha Id; the precision has an exact conjugate Gamma
conditional (see ``samplers.gibbs_logistic_step``).
"""

import numpy as np

from ..phase import MetricBundle, TargetModel
from ..rng import RandomStream

HEART_ROWS = 270
HEART_FEATURES = 14
DEFAULT_SHAPE_K = 1.0
DEFAULT_SCALE_THETA = 2.0
_SYNTHETIC_SEED = 20_270_14


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def logistic_metric(X: np.ndarray, beta: np.ndarray, alpha: float) -> MetricBundle:
    """Fisher-information metric bundle for the coefficient conditional.

    Args:
        X: Design matrix of shape (n, p).
        beta: Coefficient vector of length p.
        alpha: Prior precision; must be positive.

    Returns:
        MetricBundle for G(beta) = X' Lambda X + alpha Id, with metric
        partials obtained by the chain rule through the sigmoid.
    """
    if alpha <= 0.0:
        raise ValueError("precision must be positive")
    z = X @ np.asarray(beta, dtype=float)
    s = _sigmoid(z)
    lam = s * (1.0 - s)
    metric = (X.T * lam) @ X + alpha * np.eye(X.shape[1])
    # dLambda_nn / dbeta_k = sigma''(z_n) X_nk with sigma'' = lam * (1 - 2 s)
    w = lam * (1.0 - 2.0 * s)
    weighted = X * w[:, None]
    pairs = X[:, :, None] * X[:, None, :]
    n, p = X.shape
    grads = (weighted.T @ pairs.reshape(n, p * p)).reshape(p, p, p)
    return MetricBundle.from_metric(metric, grads, q=beta)


class LogisticModel(TargetModel):
    """Coefficient conditional of the hierarchical logistic posterior.

    The stored precision is a fixed conditioning value; Gibbs alternation
    swaps it via ``with_alpha`` rather than mutating the model.
    """

    def __init__(
        self,
        X: np.ndarray,
        y: np.ndarray,
        alpha: float = 1.0,
        shape_k: float = DEFAULT_SHAPE_K,
        scale_theta: float = DEFAULT_SCALE_THETA,
    ):
        self.X = np.asarray(X, dtype=float)
        self.y = np.asarray(y, dtype=float)
        if self.X.shape[0] != self.y.size:
            raise ValueError("design matrix and labels disagree on the number of rows")
        if alpha <= 0.0:
            raise ValueError("precision must be positive")
        self.alpha = float(alpha)
        self.shape_k = float(shape_k)
        self.scale_theta = float(scale_theta)

    def with_alpha(self, alpha: float) -> "LogisticModel":
        return LogisticModel(self.X, self.y, alpha, self.shape_k, self.scale_theta)

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def log_density(self, q) -> float:
        beta = np.asarray(q, dtype=float)
        z = self.X @ beta
        # log Bernoulli likelihood in the overflow-safe form
        loglik = -np.sum(np.maximum(z, 0.0) - z * self.y + np.log1p(np.exp(-np.abs(z))))
        p = beta.size
        logprior = 0.5 * p * np.log(self.alpha / (2.0 * np.pi)) - 0.5 * self.alpha * float(beta @ beta)
        return float(loglik + logprior)

    def grad_log_density(self, q) -> np.ndarray:
        beta = np.asarray(q, dtype=float)
        s = _sigmoid(self.X @ beta)
        return (self.y - s) @ self.X - self.alpha * beta

    def metric_bundle(self, q) -> MetricBundle:
        return logistic_metric(self.X, q, self.alpha)


def load_heart_dataset(path, skip_header: bool = False):
    """Loads the 270-by-14 heart dataset from a CSV file.

    Each row holds 14 numeric features followed by a {0, 1} label. Features
    are standardized to zero mean and unit variance per column; no intercept
    column is added.

    Args:
        path: CSV location.
        skip_header: Skip the first line when it carries column names.

    Returns:
        Tuple (X, y) with X of shape (270, 14).

    Raises:
        FileNotFoundError: when the file is absent.
        ValueError: on shape mismatch or non-binary labels.
    """
    try:
        raw = np.loadtxt(path, delimiter=",", skiprows=1 if skip_header else 0)
    except FileNotFoundError:
        raise FileNotFoundError(f"heart dataset not found at {path}")
    if raw.ndim != 2 or raw.shape != (HEART_ROWS, HEART_FEATURES + 1):
        raise ValueError(
            f"expected {HEART_ROWS} rows of {HEART_FEATURES} features plus a label, got {raw.shape}"
        )
    X = raw[:, :HEART_FEATURES]
    y = raw[:, HEART_FEATURES]
    if not np.all(np.isin(y, (0.0, 1.0))):
        raise ValueError("labels must be 0 or 1")
    X = (X - X.mean(axis=0)) / X.std(axis=0)
    return X, y


def synthetic_heart_dataset(seed: int = _SYNTHETIC_SEED):
    """Deterministic stand-in with the heart dataset's dimensions.

    Features are standardized Gaussians and labels are Bernoulli draws under
    coefficients sampled once from a standard normal, so the test suite never
    needs the proprietary file.
    """
    rng = RandomStream(seed)
    X = rng.normal(size=(HEART_ROWS, HEART_FEATURES))
    X = (X - X.mean(axis=0)) / X.std(axis=0)
    beta_star = rng.normal(size=HEART_FEATURES)
    probs = _sigmoid(X @ beta_star)
    y = (rng.uniform(size=HEART_ROWS) < probs).astype(float)
    return X, y
