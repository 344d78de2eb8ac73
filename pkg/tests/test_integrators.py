import numpy as np
import pytest

from rmhmc.hamiltonian import riemannian_hamiltonian, sample_momentum
from rmhmc.integrators import (
    IntegratorConfig,
    IntegratorKind,
    Solver,
    glf_momentum_newton,
    glf_position_newton,
    glf_step,
    implicit_midpoint_step,
    integrate_trajectory,
    leapfrog_step,
)
from rmhmc.models import ConstantMetricGaussian, standard_normal_model
from rmhmc.phase import DivergenceError, PhasePoint, momentum_flip
from rmhmc.rng import RandomStream
from rmhmc.samplers import run_chain

from conftest import finite_median, phase_points


def glf_cfg(eps, k=1, delta=1e-9, momentum=Solver.FIXED_POINT, position=Solver.FIXED_POINT, max_iters=None):
    return IntegratorConfig(
        step_size=eps,
        num_steps=k,
        threshold=delta,
        max_iters=max_iters,
        momentum_solver=momentum,
        position_solver=position,
    )


def roundtrip_gap(model, z, cfg):
    forward = momentum_flip(integrate_trajectory(model, z, cfg).end)
    back = momentum_flip(integrate_trajectory(model, forward, cfg).end)
    return np.sqrt(np.sum((z.q - back.q) ** 2) + np.sum((z.p - back.p) ** 2))


class TestLeapfrog:
    def test_hand_computed_step(self):
        model = standard_normal_model(1)
        out = leapfrog_step(model, PhasePoint([0.0], [1.0]), 0.1)
        assert out.q[0] == pytest.approx(0.1, abs=1e-15)
        assert out.p[0] == pytest.approx(0.995, abs=1e-15)

    def test_zero_step_is_identity(self):
        model = standard_normal_model(3)
        z = PhasePoint([1.0, -1.0, 2.0], [0.3, 0.0, -0.7])
        out = leapfrog_step(model, z, 0.0)
        assert np.array_equal(out.q, z.q)
        assert np.array_equal(out.p, z.p)

    def test_exact_reversibility(self):
        model = standard_normal_model(4)
        rng = RandomStream(10)
        z = PhasePoint(rng.normal(size=4), rng.normal(size=4))
        forward = leapfrog_step(model, z, 0.3)
        back = momentum_flip(leapfrog_step(model, momentum_flip(forward), 0.3))
        assert np.abs(back.q - z.q).max() < 1e-14
        assert np.abs(back.p - z.p).max() < 1e-14

    def test_requires_constant_metric(self, banana):
        with pytest.raises(ValueError):
            leapfrog_step(banana, PhasePoint([0.0, 0.0], [0.0, 0.0]), 0.1)


class TestGeneralizedLeapfrog:
    def test_constant_metric_collapse(self, gaussian_5d):
        rng = RandomStream(11)
        z = PhasePoint(rng.normal(size=5), rng.normal(size=5))
        for delta in (1e-1, 1e-5, 1e-9):
            out_glf, stats = glf_step(gaussian_5d, z, glf_cfg(0.1, delta=delta))
            out_lf = leapfrog_step(gaussian_5d, z, 0.1)
            assert np.abs(out_glf.q - out_lf.q).max() < 1e-12
            assert np.abs(out_glf.p - out_lf.p).max() < 1e-12
            assert stats.l_p <= 2 and stats.l_q <= 2

    def test_threshold_pair_one_step(self, banana):
        z = PhasePoint([0.2, -0.6], [0.8, 0.1])
        tight, _ = glf_step(banana, z, glf_cfg(0.04, delta=1e-10))
        loose, _ = glf_step(banana, z, glf_cfg(0.04, delta=1e-9))
        gap = np.sqrt(np.sum((tight.q - loose.q) ** 2) + np.sum((tight.p - loose.p) ** 2))
        assert gap < 1e-8

    def test_zero_step_is_identity(self, banana):
        z = PhasePoint([0.5, 0.5], [1.0, -1.0])
        out, stats = glf_step(banana, z, glf_cfg(0.0))
        assert np.array_equal(out.q, z.q)
        assert np.array_equal(out.p, z.p)
        assert stats.l_p == 1 and stats.l_q == 1
        assert stats.momentum_converged and stats.position_converged

    def test_capped_loop_flags_without_error(self, banana):
        z = PhasePoint([0.2, -0.6], [0.8, 0.1])
        _, stats = glf_step(banana, z, glf_cfg(0.04, delta=1e-13, max_iters=1))
        assert stats.l_p == 1 and stats.l_q == 1
        assert not stats.momentum_converged
        assert not stats.position_converged

    def test_divergence_identifies_update(self, banana):
        z = PhasePoint([0.0, 2.5], [0.0, 40.0])
        with pytest.raises(DivergenceError) as err:
            glf_step(banana, z, glf_cfg(1.0, delta=1e-9))
        assert err.value.update in ("momentum", "position")


class TestNewtonSolvers:
    def test_constant_metric_single_iteration(self, gaussian_5d):
        rng = RandomStream(12)
        q, p = rng.normal(size=5), rng.normal(size=5)
        p_half, iters = glf_momentum_newton(gaussian_5d, q, p, 0.1, 1e-12, 25)
        assert iters == 1
        expected = p + 0.05 * gaussian_5d.grad_log_density(q)
        assert np.allclose(p_half, expected, atol=1e-14)

        q_next, iters = glf_position_newton(gaussian_5d, q, p_half, 0.1, 1e-12, 25)
        assert iters == 1
        bundle = gaussian_5d.metric_bundle(q)
        assert np.allclose(q_next, q + 0.1 * (bundle.inverse @ p_half), atol=1e-14)

    def test_momentum_residual_contract(self, banana):
        from rmhmc.hamiltonian import grad_q_hamiltonian

        rng = RandomStream(13)
        for z in phase_points(banana, 10, seed=13):
            delta = 1e-9
            p_half, _ = glf_momentum_newton(banana, z.q, z.p, 0.04, delta, 25)
            residual = p_half - z.p + 0.02 * grad_q_hamiltonian(
                banana, PhasePoint(z.q, p_half)
            )
            assert np.abs(residual).max() <= delta

    def test_position_residual_contract(self, studentt):
        for z in phase_points(studentt, 5, seed=14):
            delta = 1e-9
            bundle = studentt.metric_bundle(z.q)
            p_half = z.p
            q_next, _ = glf_position_newton(studentt, z.q, p_half, 0.3, delta, 25)
            bundle_next = studentt.metric_bundle(q_next)
            residual = q_next - z.q - 0.15 * (
                bundle.inverse @ p_half + bundle_next.inverse @ p_half
            )
            assert np.abs(residual).max() <= delta

    def test_position_newton_agrees_with_fixed_point(self, studentt):
        for z in phase_points(studentt, 5, seed=15):
            p_half = z.p
            q_newton, _ = glf_position_newton(studentt, z.q, p_half, 0.3, 1e-12, 25)
            q_fixed, _, _, _ = _fixed_point_position_reference(studentt, z, p_half, 0.3, 1e-12)
            assert np.abs(q_newton - q_fixed).max() < 1e-10

    def test_momentum_jacobian_matches_finite_differences(self, banana):
        # Guards the sign conventions of the mixed-partial matrix.
        from rmhmc.hamiltonian import grad_q_hamiltonian
        from rmhmc.integrators import _momentum_jacobian

        z = phase_points(banana, 1, seed=16)[0]
        bundle = banana.metric_bundle(z.q)
        eps = 0.04

        def g(p_bar):
            return p_bar - z.p + 0.5 * eps * grad_q_hamiltonian(banana, PhasePoint(z.q, p_bar))

        jac = _momentum_jacobian(bundle, z.p, 0.5 * eps)
        fd = np.empty((2, 2))
        for i in range(2):
            h = 1e-6
            plus, minus = z.p.copy(), z.p.copy()
            plus[i] += h
            minus[i] -= h
            fd[:, i] = (g(plus) - g(minus)) / (2.0 * h)
        assert np.abs(jac - fd).max() < 1e-6

    def test_position_jacobian_matches_finite_differences(self, banana):
        from rmhmc.integrators import _position_jacobian

        z = phase_points(banana, 1, seed=17)[0]
        eps = 0.04
        p_half = z.p

        def g(q_prime):
            bundle_q = banana.metric_bundle(z.q)
            bundle_prime = banana.metric_bundle(q_prime)
            return q_prime - z.q - 0.5 * eps * (
                bundle_q.inverse @ p_half + bundle_prime.inverse @ p_half
            )

        jac = _position_jacobian(banana.metric_bundle(z.q), p_half, 0.5 * eps)
        fd = np.empty((2, 2))
        for i in range(2):
            h = 1e-6
            plus, minus = z.q.copy(), z.q.copy()
            plus[i] += h
            minus[i] -= h
            fd[:, i] = (g(plus) - g(minus)) / (2.0 * h)
        assert np.abs(jac - fd).max() < 1e-5

    def test_newton_beats_fixed_point_on_banana(self, banana):
        cfg_newton = glf_cfg(0.04, k=20, delta=1e-9, momentum=Solver.NEWTON)
        cfg_fixed = glf_cfg(0.04, k=20, delta=1e-9)
        q0 = banana.sample(1, RandomStream(18))[0]
        newton = run_chain(banana, q0, cfg_newton, 50, RandomStream(19))
        fixed = run_chain(banana, q0, cfg_fixed, 50, RandomStream(19))
        mean_newton = np.mean([r.stats.l_p for r in newton.records]) / 20.0
        mean_fixed = np.mean([r.stats.l_p for r in fixed.records]) / 20.0
        assert mean_newton < mean_fixed
        assert mean_newton < 4.0


def _fixed_point_position_reference(model, z, p_half, eps, delta, cap=200):
    """Independent reference loop following the printed algorithm directly."""
    bundle = model.metric_bundle(z.q)
    v_start = bundle.inverse @ p_half
    q_cur = z.q
    gap = np.inf
    iters = 0
    while gap > delta and iters < cap:
        inv = model.metric_bundle(q_cur).inverse
        q_new = z.q + 0.5 * eps * (v_start + inv @ p_half)
        gap = np.abs(q_new - q_cur).max()
        q_cur = q_new
        iters += 1
    return q_cur, iters, gap <= delta, None


class TestImplicitMidpoint:
    def test_linear_system_matches_cayley(self):
        model = standard_normal_model(1)
        cfg = IntegratorConfig(
            step_size=0.3, num_steps=1, threshold=1e-14, kind=IntegratorKind.IMPLICIT_MIDPOINT
        )
        z = PhasePoint([1.0], [0.5])
        out, stats = implicit_midpoint_step(model, z, cfg)
        rotation = np.array([[0.0, 1.0], [-1.0, 0.0]])
        cayley = np.linalg.solve(
            np.eye(2) - 0.15 * rotation, (np.eye(2) + 0.15 * rotation) @ np.array([1.0, 0.5])
        )
        assert np.abs(np.array([out.q[0], out.p[0]]) - cayley).max() < 1e-12
        assert stats.l_p == 0 and stats.l_q >= 1
        h0 = riemannian_hamiltonian(model, z)
        h1 = riemannian_hamiltonian(model, out)
        assert abs(h1 - h0) < 1e-12

    def test_zero_step_is_identity(self, banana):
        cfg = IntegratorConfig(
            step_size=0.0, num_steps=1, threshold=1e-12, kind=IntegratorKind.IMPLICIT_MIDPOINT
        )
        z = PhasePoint([0.1, 0.2], [0.3, -0.4])
        out, stats = implicit_midpoint_step(banana, z, cfg)
        assert np.array_equal(out.q, z.q)
        assert np.array_equal(out.p, z.p)
        assert stats.l_q == 1

    def test_energy_error_beats_glf_on_banana(self, banana):
        cfg_mid = IntegratorConfig(
            step_size=0.1, num_steps=20, threshold=1e-8, kind=IntegratorKind.IMPLICIT_MIDPOINT
        )
        cfg_glf = glf_cfg(0.04, k=20, delta=1e-8)
        wins = 0
        n = 1000
        for z in phase_points(banana, n, seed=20):
            try:
                mid = integrate_trajectory(banana, z, cfg_mid)
                mid_err = abs(mid.energies[-1] - mid.energies[0])
            except DivergenceError:
                continue  # a diverged midpoint run cannot win
            try:
                glf = integrate_trajectory(banana, z, cfg_glf)
                glf_err = abs(glf.energies[-1] - glf.energies[0])
            except DivergenceError:
                wins += 1
                continue
            wins += mid_err < glf_err
        assert wins >= n / 2


class TestTrajectories:
    def test_single_step_matches_composed(self, banana):
        z = PhasePoint([0.1, -0.2], [0.5, 0.4])
        cfg = glf_cfg(0.04, k=1)
        traj = integrate_trajectory(banana, z, cfg)
        step, _ = glf_step(banana, z, cfg)
        assert np.array_equal(traj.end.q, step.q)
        assert np.array_equal(traj.end.p, step.p)

    def test_energy_list_length(self, banana):
        z = PhasePoint([0.1, -0.2], [0.5, 0.4])
        traj = integrate_trajectory(banana, z, glf_cfg(0.04, k=7))
        assert len(traj.energies) == 8
        assert len(traj.stats) == 7

    def test_divergence_carries_step_index(self, banana):
        z = PhasePoint([0.0, 2.5], [0.0, 40.0])
        with pytest.raises(DivergenceError) as err:
            integrate_trajectory(banana, z, glf_cfg(1.0, k=5))
        assert err.value.step_index is not None

    def test_position_deviation_grows_and_orders_by_threshold(self, banana):
        cfg_base = glf_cfg(0.01, k=1, delta=1e-10)
        deviations = {1e-1: [], 1e-5: []}
        num_steps = 500
        for z in phase_points(banana, 100, seed=22):
            paths = {}
            for delta in (1e-10, 1e-1, 1e-5):
                cfg = glf_cfg(0.01, k=1, delta=delta)
                cur = z
                path = np.empty((num_steps, 2))
                try:
                    for i in range(num_steps):
                        cur, _ = glf_step(banana, cur, cfg)
                        path[i] = cur.q
                except DivergenceError:
                    path = None
                paths[delta] = path
            if any(p is None for p in paths.values()):
                continue
            for delta in (1e-1, 1e-5):
                deviations[delta].append(
                    np.linalg.norm(paths[delta] - paths[1e-10], axis=1)
                )
        med_loose = np.median(np.array(deviations[1e-1]), axis=0)
        med_tight = np.median(np.array(deviations[1e-5]), axis=0)
        # deviation accumulates with step index and larger thresholds sit higher
        assert med_loose[-1] > med_loose[24]
        assert med_tight[-1] > med_tight[24]
        assert med_loose[-1] > med_tight[-1]
        assert np.median(med_loose[-50:]) > np.median(med_tight[-50:])


class TestIntegratorProperties:
    @pytest.mark.parametrize("model_name", ["banana", "funnel", "studentt", "logistic"])
    def test_exact_regime_reversibility(self, model_name, request):
        model = request.getfixturevalue(model_name)
        eps = {"banana": 0.04, "funnel": 0.2, "studentt": 0.3, "logistic": 0.2}[model_name]
        steps = {"banana": 20, "funnel": 25, "studentt": 20, "logistic": 20}[model_name]
        cfg = IntegratorConfig.exact_regime(eps, steps)
        if model.has_analytic_sampler:
            points = phase_points(model, 15, seed=23)
        else:
            rng = RandomStream(23)
            points = [
                PhasePoint(0.3 * rng.normal(size=model.dim), sample_momentum(model, 0.3 * rng.normal(size=model.dim), rng))
                for _ in range(8)
            ]
        gaps = []
        for z in points:
            try:
                gaps.append(roundtrip_gap(model, z, cfg))
            except DivergenceError:
                gaps.append(np.inf)
        assert finite_median(gaps) < 1e-9

    def test_second_order_energy_scaling(self):
        model = standard_normal_model(1)
        z = PhasePoint([1.0], [0.7])

        def max_energy_error(eps):
            cfg = IntegratorConfig(step_size=eps, num_steps=int(round(2.0 / eps)), threshold=1e-12, kind=IntegratorKind.LEAPFROG)
            traj = integrate_trajectory(model, z, cfg)
            energies = np.array(traj.energies)
            return np.abs(energies - energies[0]).max()

        ratio = max_energy_error(0.1) / max_energy_error(0.05)
        assert 3.5 <= ratio <= 4.5

    def test_volume_error_improves_with_tight_threshold(self, banana):
        from rmhmc.diagnostics import volume_preservation_error
        from rmhmc.phase import EvaluationError

        better = 0
        total = 0
        for z in phase_points(banana, 20, seed=24):
            try:
                loose = volume_preservation_error(banana, z, glf_cfg(0.04, k=20, delta=1e-1), 1e-5).vpe
                tight = volume_preservation_error(banana, z, glf_cfg(0.04, k=20, delta=1e-9), 1e-5).vpe
            except EvaluationError:
                continue
            total += 1
            better += tight < loose
        assert total >= 10
        assert better >= 0.9 * total

    @pytest.mark.parametrize("model_name", ["banana", "studentt"])
    def test_solver_effort_monotone_in_threshold(self, model_name, request):
        model = request.getfixturevalue(model_name)
        eps = {"banana": 0.04, "studentt": 0.3}[model_name]
        points = phase_points(model, 30, seed=25)
        med_lp, med_lq = [], []
        for delta in (1e-9, 1e-7, 1e-5, 1e-3, 1e-1):
            lps, lqs = [], []
            for z in points:
                try:
                    stats = integrate_trajectory(model, z, glf_cfg(eps, k=20, delta=delta)).total_stats
                except DivergenceError:
                    continue
                lps.append(stats.l_p)
                lqs.append(stats.l_q)
            med_lp.append(np.median(lps))
            med_lq.append(np.median(lqs))
        # iteration counts fall (weakly) as the threshold loosens
        assert all(a >= b for a, b in zip(med_lp[:-1], med_lp[1:]))
        assert all(a >= b for a, b in zip(med_lq[:-1], med_lq[1:]))

    def test_fixed_point_converges_linearly_newton_quadratically(self, banana):
        # Orders of convergence on the implicit momentum equation at one point.
        from rmhmc.hamiltonian import grad_q_hamiltonian
        from rmhmc.integrators import _momentum_jacobian

        z = phase_points(banana, 1, seed=26)[0]
        bundle = banana.metric_bundle(z.q)
        eps = 0.04

        def fp_map(p_bar):
            return z.p - 0.5 * eps * grad_q_hamiltonian(banana, PhasePoint(z.q, p_bar), bundle=bundle)

        root, _ = glf_momentum_newton(banana, z.q, z.p, eps, 1e-15, 50)

        fp_errors = []
        p_cur = z.p
        for _ in range(12):
            p_cur = fp_map(p_cur)
            fp_errors.append(np.linalg.norm(p_cur - root))
        ratios = [fp_errors[i + 1] / fp_errors[i] for i in range(6) if fp_errors[i] > 1e-13]
        assert all(r < 1.0 for r in ratios)
        assert np.std(ratios) < 0.2  # roughly constant contraction: linear order

        newton_errors = []
        p_cur = z.p
        for _ in range(4):
            g = p_cur - z.p + 0.5 * eps * grad_q_hamiltonian(banana, PhasePoint(z.q, p_cur), bundle=bundle)
            p_cur = p_cur - np.linalg.solve(_momentum_jacobian(bundle, p_cur, 0.5 * eps), g)
            newton_errors.append(np.linalg.norm(p_cur - root))
        quad_ratios = [
            newton_errors[i + 1] / newton_errors[i] ** 2
            for i in range(2)
            if newton_errors[i] > 1e-12
        ]
        # bounded error / previous-error-squared is the quadratic signature
        assert all(r < 1e3 for r in quad_ratios)
        assert newton_errors[1] < fp_errors[1] / 10.0
