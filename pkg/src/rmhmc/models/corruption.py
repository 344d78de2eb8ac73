"""Synthetic derivative corruption.

Mis-specified metric derivatives break the symmetry of the Hamiltonian's
mixed partials, after which no convergence threshold can recover a
volume-preserving generalized-leapfrog proposal. The wrapper below injects
exactly that pathology: the reported metric partials receive an additive
perturbation that no underlying metric could produce, while the log-density
and the metric itself stay untouched.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from ..phase import MetricBundle, TargetModel


@dataclass
class CorruptionSpec:
    """Which metric-partial entries to perturb, and by how much.

    Each (k, i, j) entry adds ``magnitude`` to grads[k][i, j] (mirrored to
    grads[k][j, i] so each partial stays a symmetric matrix). The entries are
    chosen so the perturbed collection is not symmetric-consistent across k:
    dG_ij/dq_k no longer equals dG_ik/dq_j.
    """

    entries: list = field(default_factory=lambda: [(0, 0, 1)])
    magnitude: float = 1.0


class _CorruptedModel(TargetModel):
    def __init__(self, base: TargetModel, spec: CorruptionSpec):
        self.base = base
        self.spec = spec
        self.constant_metric = base.constant_metric
        self.has_analytic_sampler = base.has_analytic_sampler

    @property
    def dim(self) -> int:
        return self.base.dim

    def log_density(self, q) -> float:
        return self.base.log_density(q)

    def grad_log_density(self, q) -> np.ndarray:
        return self.base.grad_log_density(q)

    def metric_bundle(self, q) -> MetricBundle:
        bundle = self.base.metric_bundle(q)
        grads = bundle.grads.copy()
        for k, i, j in self.spec.entries:
            grads[k, i, j] += self.spec.magnitude
            if i != j:
                grads[k, j, i] += self.spec.magnitude
        return MetricBundle(
            metric=bundle.metric, inverse=bundle.inverse, log_det=bundle.log_det, grads=grads
        )

    def sample(self, n: int, rng) -> np.ndarray:
        return self.base.sample(n, rng)


def corrupt_metric_grads(model: TargetModel, spec: CorruptionSpec) -> TargetModel:
    """Wraps a model so its metric partials carry an asymmetric perturbation.

    Args:
        model: Base model with exact metric partials.
        spec: Perturbation targets and magnitude. A zero magnitude yields an
            identity wrapper and is flagged with a warning.

    Returns:
        A model whose log-density and metric equal the base model's but whose
        reported metric derivatives are wrong by construction.
    """
    if spec.magnitude == 0.0:
        warnings.warn("zero-magnitude corruption spec: wrapper is the identity", stacklevel=2)
    return _CorruptedModel(model, spec)
