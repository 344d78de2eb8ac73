"""Evaluation of the Riemannian Hamiltonian and its phase-space gradients.

The Hamiltonian is H(q, p) = -L(q) + (1/2) log det G(q) + (1/2) p' G(q)^{-1} p,
whose marginal in q has density proportional to exp(L(q)) and whose
conditional momentum distribution is Normal(0, G(q)).
"""

import numpy as np

from .phase import EvaluationError, MetricBundle, PhasePoint, TargetModel


def _require_bundle(model: TargetModel, q: np.ndarray, bundle) -> MetricBundle:
    return model.metric_bundle(q) if bundle is None else bundle


def riemannian_hamiltonian(model: TargetModel, z: PhasePoint, bundle: MetricBundle | None = None) -> float:
    """Total energy -L(q) + (1/2) log det G(q) + (1/2) p' G(q)^{-1} p.

    Args:
        model: Target model supplying the log-density and metric.
        z: Phase-space point at which to evaluate the energy.
        bundle: Optional precomputed metric bundle at z.q, reused when the
            caller already has one in hand.

    Returns:
        The Hamiltonian energy as a float.
    """
    if z.dim != model.dim:
        raise ValueError(f"point has dimension {z.dim}, model expects {model.dim}")
    bundle = _require_bundle(model, z.q, bundle)
    log_dens = float(model.log_density(z.q))
    if not np.isfinite(log_dens):
        raise EvaluationError("non-finite log-density", z.q)
    kinetic = 0.5 * float(z.p @ (bundle.inverse @ z.p))
    return -log_dens + 0.5 * bundle.log_det + kinetic


def grad_q_hamiltonian(
    model: TargetModel,
    z: PhasePoint,
    bundle: MetricBundle | None = None,
    grad_log: np.ndarray | None = None,
) -> np.ndarray:
    """Position gradient of the Hamiltonian.

    Component k is -dL/dq_k + (1/2) tr(G^{-1} dG/dq_k)
    - (1/2) p' G^{-1} (dG/dq_k) G^{-1} p.
    """
    bundle = _require_bundle(model, z.q, bundle)
    if grad_log is None:
        grad_log = model.grad_log_density(z.q)
    fixed = -np.asarray(grad_log, dtype=float) + 0.5 * metric_trace_term(bundle)
    return fixed - 0.5 * metric_quadratic_term(bundle, z.p)


def grad_p_hamiltonian(model: TargetModel, z: PhasePoint, bundle: MetricBundle | None = None) -> np.ndarray:
    """Momentum gradient of the Hamiltonian, G(q)^{-1} p."""
    bundle = _require_bundle(model, z.q, bundle)
    return bundle.inverse @ z.p


def metric_trace_term(bundle: MetricBundle) -> np.ndarray:
    """Vector with components tr(G^{-1} dG/dq_k)."""
    m = bundle.dim
    # tr(W G_k) as a flat dot product; W is symmetric, so no transpose.
    return bundle.grads.reshape(m, m * m) @ bundle.inverse.ravel()


def metric_quadratic_term(bundle: MetricBundle, p: np.ndarray) -> np.ndarray:
    """Vector with components p' G^{-1} (dG/dq_k) G^{-1} p."""
    v = bundle.inverse @ p
    return (bundle.grads @ v) @ v


def sample_momentum(model: TargetModel, q: np.ndarray, rng, bundle: MetricBundle | None = None) -> np.ndarray:
    """Draws p ~ Normal(0, G(q)) by scaling standard normals with chol(G(q)).

    Args:
        model: Target model supplying the metric.
        q: Position at which the momentum is conditioned.
        rng: RandomStream providing the standard normal draws.
        bundle: Optional precomputed metric bundle at q.

    Returns:
        A momentum vector of length model.dim.
    """
    bundle = _require_bundle(model, q, bundle)
    try:
        chol = np.linalg.cholesky(bundle.metric)
    except np.linalg.LinAlgError as exc:
        raise EvaluationError("metric is not positive definite", q) from exc
    return chol @ rng.normal(size=model.dim)
