import numpy as np
import pytest

from rmhmc.hamiltonian import (
    grad_p_hamiltonian,
    grad_q_hamiltonian,
    riemannian_hamiltonian,
    sample_momentum,
)
from rmhmc.models import ConstantMetricGaussian, standard_normal_model
from rmhmc.phase import EvaluationError, PhasePoint
from rmhmc.rng import RandomStream

from conftest import phase_points


def _fd_grad_q(model, z, k):
    h = 1e-6 * (1.0 + abs(z.q[k]))
    plus, minus = z.q.copy(), z.q.copy()
    plus[k] += h
    minus[k] -= h
    return (
        riemannian_hamiltonian(model, PhasePoint(plus, z.p))
        - riemannian_hamiltonian(model, PhasePoint(minus, z.p))
    ) / (2.0 * h)


def _fd_grad_p(model, z, k):
    h = 1e-6 * (1.0 + abs(z.p[k]))
    plus, minus = z.p.copy(), z.p.copy()
    plus[k] += h
    minus[k] -= h
    return (
        riemannian_hamiltonian(model, PhasePoint(z.q, plus))
        - riemannian_hamiltonian(model, PhasePoint(z.q, minus))
    ) / (2.0 * h)


def test_standard_normal_energy_at_rest():
    model = standard_normal_model(1)
    z = PhasePoint([0.0], [0.0])
    assert riemannian_hamiltonian(model, z) == pytest.approx(0.5 * np.log(2.0 * np.pi))


def test_banana_energy_at_origin(banana):
    z = PhasePoint([0.0, 0.0], [0.0, 0.0])
    half_log_det = 0.5 * np.log(25.25 * 0.25)
    assert half_log_det == pytest.approx(0.9214, abs=1e-3)
    expected = -banana.log_density(np.zeros(2)) + half_log_det
    assert riemannian_hamiltonian(banana, z) == pytest.approx(expected)


@pytest.mark.parametrize("model_name", ["banana", "funnel", "studentt", "gaussian_5d"])
def test_energy_even_in_momentum(model_name, request):
    model = request.getfixturevalue(model_name)
    for z in phase_points(model, 5, seed=21):
        flipped = PhasePoint(z.q, -z.p)
        assert riemannian_hamiltonian(model, z) == pytest.approx(
            riemannian_hamiltonian(model, flipped)
        )


def test_constant_metric_energy_decomposes():
    cov = np.array([[2.0, 0.3], [0.3, 1.0]])
    model = ConstantMetricGaussian(np.zeros(2), cov, metric=np.linalg.inv(cov))
    rng = RandomStream(3)
    for _ in range(5):
        z = PhasePoint(rng.normal(size=2), rng.normal(size=2))
        separable = -model.log_density(z.q) + 0.5 * z.p @ (cov @ z.p)
        constant = 0.5 * np.log(np.linalg.det(np.linalg.inv(cov)))
        assert riemannian_hamiltonian(model, z) == pytest.approx(separable + constant)


def test_grad_q_constant_metric_is_negative_score(gaussian_5d):
    rng = RandomStream(4)
    z = PhasePoint(rng.normal(size=5), rng.normal(size=5))
    expected = -gaussian_5d.grad_log_density(z.q)
    assert np.allclose(grad_q_hamiltonian(gaussian_5d, z), expected, atol=1e-14)


def test_grad_q_matches_finite_differences_on_banana(banana):
    worst = 0.0
    for z in phase_points(banana, 100, seed=5):
        grad = grad_q_hamiltonian(banana, z)
        for k in range(2):
            fd = _fd_grad_q(banana, z, k)
            worst = max(worst, abs(grad[k] - fd) / max(1.0, abs(grad[k])))
    assert worst < 1e-5


def test_grad_q_zero_momentum_drops_quadratic_term(banana):
    from rmhmc.hamiltonian import metric_trace_term

    q = np.array([0.4, -0.7])
    z = PhasePoint(q, np.zeros(2))
    bundle = banana.metric_bundle(q)
    expected = -banana.grad_log_density(q) + 0.5 * metric_trace_term(bundle)
    assert np.allclose(grad_q_hamiltonian(banana, z), expected)


def test_grad_p_trivial_cases(gaussian_5d, banana):
    q = np.zeros(5)
    assert np.array_equal(grad_p_hamiltonian(gaussian_5d, PhasePoint(q, np.zeros(5))), np.zeros(5))
    p = np.array([1.0, -2.0, 0.5, 0.0, 3.0])
    assert np.allclose(grad_p_hamiltonian(gaussian_5d, PhasePoint(q, p)), p)


def test_grad_p_matches_finite_differences_on_studentt(studentt):
    worst = 0.0
    for z in phase_points(studentt, 10, seed=6):
        grad = grad_p_hamiltonian(studentt, z)
        for k in range(0, studentt.dim, 5):
            fd = _fd_grad_p(studentt, z, k)
            worst = max(worst, abs(grad[k] - fd) / max(1.0, abs(grad[k])))
    assert worst < 1e-6


def test_sample_momentum_identity_metric_covariance(gaussian_5d):
    rng = RandomStream(7)
    draws = np.array([sample_momentum(gaussian_5d, np.zeros(5), rng) for _ in range(100_000)])
    cov = np.cov(draws.T)
    assert np.abs(cov - np.eye(5)).max() < 0.05


def test_sample_momentum_banana_covariance(banana):
    rng = RandomStream(8)
    draws = np.array([sample_momentum(banana, np.zeros(2), rng) for _ in range(100_000)])
    cov = np.cov(draws.T)
    target = np.diag([25.25, 0.25])
    assert np.abs(cov - target).max() < 0.05 * 25.25


def test_sample_momentum_is_deterministic(banana):
    a = sample_momentum(banana, np.zeros(2), RandomStream(99))
    b = sample_momentum(banana, np.zeros(2), RandomStream(99))
    assert np.array_equal(a, b)


def test_non_finite_log_density_raises(banana):
    z = PhasePoint([1e200, 0.0], [0.0, 0.0])
    with pytest.raises(EvaluationError):
        riemannian_hamiltonian(banana, z)


def test_dimension_mismatch_raises(banana):
    with pytest.raises(ValueError):
        riemannian_hamiltonian(banana, PhasePoint([0.0], [0.0]))
