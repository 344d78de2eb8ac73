"""Reduced-scale verification suite behind the ``verify`` subcommand.

Each check mirrors one of the repository's acceptance properties at a size
that finishes in a few minutes on one core; the full-scale versions live in
the test suite. Checks print one PASS/FAIL line each and the runner's exit
status is nonzero when anything fails.
"""

import time

import numpy as np

from .diagnostics import (
    biased_involution_experiment,
    corrected_involution_control,
    involution_kl_estimate,
    kernel_similarity,
    ks_one_sample,
    random_projection_ks,
    reversibility_error,
    volume_preservation_error,
)
from .hamiltonian import sample_momentum
from .integrators import IntegratorConfig, IntegratorKind, Solver, integrate_trajectory, leapfrog_step
from .models import (
    BananaModel,
    ConstantMetricGaussian,
    CorruptionSpec,
    EuclideanView,
    FunnelModel,
    StudentTModel,
    LogisticModel,
    corrupt_metric_grads,
    synthetic_heart_dataset,
)
from .phase import EvaluationError, PhasePoint
from .rng import RandomStream
from .samplers import run_chain
from .tuner import TunerConfig, mcmc_chain_source, tune_threshold
from .validate import check_gradients

BANANA_OMEGA = 1e-5


def _phase_points(model, n, rng):
    qs = model.sample(n, rng)
    return [PhasePoint(q, sample_momentum(model, q, rng)) for q in qs]


def _median_metric(values):
    return float(np.median(values))


def check_constant_metric_collapse():
    model = ConstantMetricGaussian(np.zeros(5), np.eye(5))
    rng = RandomStream(100)
    z = PhasePoint(rng.normal(size=5), rng.normal(size=5))
    for delta in (1e-1, 1e-5, 1e-9):
        cfg = IntegratorConfig(step_size=0.1, num_steps=1, threshold=delta)
        z_lf, z_glf = z, z
        for _ in range(50):
            z_lf = leapfrog_step(model, z_lf, 0.1)
            traj = integrate_trajectory(model, z_glf, cfg)
            z_glf = traj.end
            gap = max(np.max(np.abs(z_lf.q - z_glf.q)), np.max(np.abs(z_lf.p - z_glf.p)))
            if gap > 1e-12:
                return False, f"gap {gap:.2e} at delta {delta:g}"
    return True, "generalized leapfrog collapses onto leapfrog"


def check_exact_regime():
    model = BananaModel()
    rng = RandomStream(101)
    points = _phase_points(model, 30, rng)
    cfg = IntegratorConfig.exact_regime(0.04, 20)
    ares = [reversibility_error(model, z, cfg).are for z in points]
    vpes = []
    for z in points[:10]:
        try:
            vpes.append(volume_preservation_error(model, z, cfg, BANANA_OMEGA).vpe)
        except EvaluationError:
            vpes.append(np.inf)
    ok = _median_metric(ares) < 1e-9 and _median_metric(vpes) < 1e-5
    return ok, f"median ARE {_median_metric(ares):.2e}, median VPE {_median_metric(vpes):.2e}"


def check_threshold_monotonicity():
    model = BananaModel()
    rng = RandomStream(102)
    points = _phase_points(model, 60, rng)
    deltas = (1e-1, 1e-5, 1e-9)
    med_are, med_lp = [], []
    for delta in deltas:
        cfg = IntegratorConfig(step_size=0.04, num_steps=20, threshold=delta)
        ares, lps = [], []
        for z in points:
            rep = reversibility_error(model, z, cfg)
            ares.append(rep.are)
            try:
                lps.append(integrate_trajectory(model, z, cfg).total_stats.l_p)
            except Exception:
                lps.append(np.nan)
        med_are.append(_median_metric(ares))
        med_lp.append(float(np.nanmedian(lps)))
    mono = med_are[0] >= med_are[1] >= med_are[2] and med_lp[0] <= med_lp[1] <= med_lp[2]
    return mono, f"ARE medians {med_are}, l_p medians {med_lp}"


def check_ergodicity_plateau():
    model = StudentTModel()
    rng = RandomStream(103)
    ref_rng, chain_rng, proj_rng = rng.split(3)
    reference = model.sample(20_000, ref_rng)
    q0 = reference[0]
    med = {}
    for delta in (1e-2, 1e-9):
        cfg = IntegratorConfig(step_size=0.3, num_steps=20, threshold=delta)
        trace = run_chain(model, q0, cfg, 20_000, RandomStream(chain_rng.seed))
        ks = random_projection_ks(trace.positions, reference, num_dirs=50, rng=RandomStream(proj_rng.seed))
        med[delta] = float(np.median(ks))
    cfg_e = IntegratorConfig(step_size=0.5, num_steps=20, kind=IntegratorKind.LEAPFROG)
    trace_e = run_chain(EuclideanView(model), q0, cfg_e, 20_000, RandomStream(chain_rng.seed))
    ks_e = float(
        np.median(random_projection_ks(trace_e.positions, reference, num_dirs=50, rng=RandomStream(proj_rng.seed)))
    )
    close = abs(med[1e-2] - med[1e-9]) <= 0.35 * med[1e-9]
    beats = med[1e-2] < ks_e and med[1e-9] < ks_e
    return close and beats, f"KS medians {med}, euclidean {ks_e:.4f}"


def check_newton_economy():
    rng = RandomStream(104)
    X, y = synthetic_heart_dataset()
    setups = [
        (BananaModel(), 0.04),
        (LogisticModel(X, y, alpha=1.0), 0.2),
        (StudentTModel(), 0.3),
    ]
    summaries = []
    for model, eps in setups:
        if model.has_analytic_sampler:
            q0 = model.sample(1, rng)[0]
        else:
            q0 = np.zeros(model.dim)
        means = {}
        for solver in (Solver.NEWTON, Solver.FIXED_POINT):
            cfg = IntegratorConfig(
                step_size=eps, num_steps=20, threshold=1e-9, momentum_solver=solver
            )
            trace = run_chain(model, q0, cfg, 40, RandomStream(rng.seed + 7))
            means[solver] = float(np.mean([r.stats.l_p for r in trace.records])) / 20.0
        summaries.append((means[Solver.NEWTON], means[Solver.FIXED_POINT]))
        if not (means[Solver.NEWTON] <= 4.0 and means[Solver.NEWTON] < means[Solver.FIXED_POINT]):
            return False, f"newton {means[Solver.NEWTON]:.2f} vs fp {means[Solver.FIXED_POINT]:.2f}"
    return True, "; ".join(f"newton {a:.2f} < fp {b:.2f}" for a, b in summaries)


def check_corruption_pathology():
    model = BananaModel()
    corrupted = corrupt_metric_grads(model, CorruptionSpec())
    rng = RandomStream(105)
    points = _phase_points(model, 20, rng)
    for delta in (1e-1, 1e-5, 1e-9):
        cfg = IntegratorConfig(step_size=0.04, num_steps=20, threshold=delta)
        vpes = []
        for z in points[:10]:
            try:
                vpes.append(volume_preservation_error(corrupted, z, cfg, BANANA_OMEGA).vpe)
            except EvaluationError:
                vpes.append(np.inf)
        if _median_metric(vpes) <= 1e-2:
            return False, f"median VPE {_median_metric(vpes):.2e} at delta {delta:g}"
    cfg1 = IntegratorConfig(step_size=0.04, num_steps=20, threshold=1e-1)
    cfg9 = IntegratorConfig(step_size=0.04, num_steps=20, threshold=1e-9)
    are1 = _median_metric([reversibility_error(corrupted, z, cfg1).are for z in points])
    are9 = _median_metric([reversibility_error(corrupted, z, cfg9).are for z in points])
    ok = are9 * 10.0 <= are1
    return ok, f"corrupted VPE plateau holds; ARE {are1:.2e} -> {are9:.2e}"


def check_tuner():
    delta_star = 1e-8

    def synthetic(model, z, cfg, cfg_base):
        return float(np.log10(cfg.threshold / delta_star)) - 8.0

    def zeros():
        while True:
            yield np.zeros(2)

    model = BananaModel()
    base = IntegratorConfig(step_size=0.04, num_steps=20)
    trace = tune_threshold(
        model, zeros(), TunerConfig(kappa=8.0, n_max=1000), base, RandomStream(106), digits_fn=synthetic
    )
    err = abs(np.log10(trace.final_delta / delta_star))
    if err > 0.1:
        return False, f"synthetic-oracle error {err:.3f} log10 units"
    chain = mcmc_chain_source(model, np.array([0.5, 0.8]), base.with_threshold(1e-10), RandomStream(107))
    trace_b = tune_threshold(model, chain, TunerConfig(kappa=8.0, n_max=300), base, RandomStream(108))
    ok = 1e-10 < trace_b.final_delta < 1e-6
    return ok, f"synthetic err {err:.3f}; banana delta_bar {trace_b.final_delta:.2e}"


def check_involution():
    rng = RandomStream(109)
    _, ks_biased = biased_involution_experiment(200_000, rng)
    _, ks_control = corrected_involution_control(200_000, rng)
    kl = involution_kl_estimate(200_000, rng)
    ok = ks_biased < 0.01 and ks_control < 0.01 and abs(kl - 0.5) < 0.05
    return ok, f"KS biased {ks_biased:.4f}, control {ks_control:.4f}, KL {kl:.3f}"


def check_kernel_similarity():
    model = BananaModel()
    rng = RandomStream(110)
    qs = model.sample(60, rng)
    base = IntegratorConfig(step_size=0.04, num_steps=20)
    same = kernel_similarity(model, base.with_threshold(1e-10), base.with_threshold(1e-10), qs, RandomStream(7))
    if same.differences.size and np.max(same.differences) > 0.0:
        return False, "identical configurations produced differing outputs"
    paired = kernel_similarity(model, base.with_threshold(1e-3), base.with_threshold(1e-10), qs, RandomStream(7))
    med = float(np.median(np.log10(paired.differences[paired.differences > 0])))
    return med <= -2.0, f"median log10 difference {med:.2f}"


def check_gradient_validation():
    rng = RandomStream(111)
    X, y = synthetic_heart_dataset()
    models = [
        ("banana", BananaModel(), None),
        ("funnel", FunnelModel(), None),
        ("studentt", StudentTModel(), None),
        ("logistic", LogisticModel(X, y, alpha=1.0), 0.5 * rng.normal(size=(20, 14))),
    ]
    for name, model, points in models:
        if points is None:
            points = model.sample(20, rng)
        try:
            check_gradients(model, points, tol_grad=1e-4, tol_metric=1e-4)
        except AssertionError as exc:
            return False, f"{name}: {exc}"
    return True, "all model derivatives match finite differences"


CHECKS = (
    ("constant-metric collapse", check_constant_metric_collapse),
    ("exact-regime detailed balance", check_exact_regime),
    ("threshold monotonicity", check_threshold_monotonicity),
    ("ergodicity plateau", check_ergodicity_plateau),
    ("newton iteration economy", check_newton_economy),
    ("broken-derivative pathology", check_corruption_pathology),
    ("threshold tuner", check_tuner),
    ("biased involution", check_involution),
    ("kernel similarity", check_kernel_similarity),
    ("gradient validation", check_gradient_validation),
)


def run_all() -> int:
    failures = 0
    for name, check in CHECKS:
        start = time.time()
        try:
            ok, detail = check()
        except Exception as exc:  # a crashed check is a failed check
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        status = "PASS" if ok else "FAIL"
        if not ok:
            failures += 1
        print(f"[{status}] {name} ({time.time() - start:.1f}s): {detail}")
    return 1 if failures else 0
