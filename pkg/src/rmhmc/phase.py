"""Phase-space primitives shared by every integrator and sampler: the state
container, the per-point metric bundle, and the target-model interface."""

import abc

import numpy as np


class EvaluationError(Exception):
    """A model evaluation produced a non-finite value or a metric that is not
    positive definite. Carries the offending position when known."""

    def __init__(self, message: str, q: np.ndarray | None = None):
        super().__init__(message)
        self.q = None if q is None else np.array(q, dtype=float)


class DivergenceError(Exception):
    """A numerical integration step produced a non-finite iterate.

    ``update`` identifies which sub-step diverged (``momentum``, ``position``,
    ``midpoint``, or ``leapfrog``); ``step_index`` is filled in when the
    failure happens inside a multi-step trajectory.
    """

    def __init__(self, message: str, update: str, step_index: int | None = None):
        super().__init__(message)
        self.update = update
        self.step_index = step_index


class PhasePoint:
    """Position/momentum pair (q, p) in R^m x R^m."""

    __slots__ = ("q", "p")

    def __init__(self, q, p):
        if not (isinstance(q, np.ndarray) and q.dtype == np.float64 and q.ndim == 1):
            q = np.atleast_1d(np.asarray(q, dtype=float))
        if not (isinstance(p, np.ndarray) and p.dtype == np.float64 and p.ndim == 1):
            p = np.atleast_1d(np.asarray(p, dtype=float))
        if q.ndim != 1 or q.shape != p.shape:
            raise ValueError("position and momentum must be vectors of equal length")
        self.q = q
        self.p = p

    @property
    def dim(self) -> int:
        return self.q.size

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.q).all() and np.isfinite(self.p).all())

    def flatten(self) -> np.ndarray:
        return np.concatenate((self.q, self.p))

    @classmethod
    def from_flat(cls, z: np.ndarray) -> "PhasePoint":
        z = np.asarray(z, dtype=float)
        m = z.size // 2
        return cls(z[:m], z[m:])

    def __repr__(self):
        return f"PhasePoint(q={self.q!r}, p={self.p!r})"


def momentum_flip(z: PhasePoint) -> PhasePoint:
    """The involution F : (q, p) -> (q, -p)."""
    return PhasePoint(z.q, -z.p)


class MetricBundle:
    """Metric data at one position: G, its inverse, log det G, and the partial
    derivatives dG/dq_k stacked as an (m, m, m) array indexed by k.

    Bundles are computed once per point and passed around explicitly; nothing
    in the library caches them behind the caller's back.
    """

    __slots__ = ("metric", "inverse", "log_det", "grads")

    def __init__(self, metric, inverse, log_det, grads):
        self.metric = metric
        self.inverse = inverse
        self.log_det = log_det
        self.grads = grads

    @classmethod
    def from_metric(cls, metric, grads, q=None) -> "MetricBundle":
        """Completes a bundle from G and dG/dq alone.

        Positive definiteness is enforced by attempting a Cholesky
        factorization; failure raises ``EvaluationError`` rather than falling
        back to anything weaker.
        """
        metric = np.asarray(metric, dtype=float)
        if not np.isfinite(metric).all():
            raise EvaluationError("metric contains non-finite entries", q)
        try:
            chol = np.linalg.cholesky(metric)
        except np.linalg.LinAlgError as exc:
            raise EvaluationError("metric is not positive definite", q) from exc
        identity = np.eye(metric.shape[0])
        lower_inv = np.linalg.solve(chol, identity)
        inverse = lower_inv.T @ lower_inv
        log_det = 2.0 * float(np.sum(np.log(np.diag(chol))))
        return cls(metric, inverse, log_det, np.asarray(grads, dtype=float))

    @property
    def dim(self) -> int:
        return self.metric.shape[0]


class TargetModel(abc.ABC):
    """A target distribution with enough structure for Riemannian HMC.

    Implementations provide the log-density, its gradient, and a metric
    bundle at any position. Models with a tractable generator additionally
    override ``sample`` and set ``has_analytic_sampler``. All evaluations are
    pure functions of their inputs and may be called concurrently.
    """

    constant_metric: bool = False
    has_analytic_sampler: bool = False

    @property
    @abc.abstractmethod
    def dim(self) -> int:
        """Dimension m of the position variable."""

    @abc.abstractmethod
    def log_density(self, q: np.ndarray) -> float:
        """Log-density L(q), possibly up to an additive constant."""

    @abc.abstractmethod
    def grad_log_density(self, q: np.ndarray) -> np.ndarray:
        """Gradient of the log-density at q."""

    @abc.abstractmethod
    def metric_bundle(self, q: np.ndarray) -> MetricBundle:
        """Metric, inverse, log-determinant, and metric partials at q."""

    def sample(self, n: int, rng) -> np.ndarray:
        """Draws n i.i.d. positions from the target, when supported."""
        raise NotImplementedError(f"{type(self).__name__} has no analytic sampler")

    def metric_inverse_apply(self, q: np.ndarray, vec: np.ndarray) -> np.ndarray:
        """G(q)^{-1} vec, the only metric quantity the implicit position
        update needs per iteration. Models with a closed-form inverse
        override this to avoid building full bundles inside that loop."""
        return self.metric_bundle(q).inverse @ vec
