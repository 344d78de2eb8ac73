"""Measurement machinery for threshold studies: reversibility and volume
preservation of the proposal map, two-sample ergodicity statistics, effective
sample size, transition-kernel similarity, and the biased-involution
stationary-distribution experiment."""

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.special

from .hamiltonian import sample_momentum
from .integrators import IntegratorConfig, integrate_trajectory
from .phase import DivergenceError, EvaluationError, PhasePoint, TargetModel, momentum_flip
from .samplers import hmc_transition_driven
from .rng import RandomStream

FD_PERTURBATION_GRID = (1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3)
DEFAULT_NUM_DIRECTIONS = 100
MMD_SUBSAMPLE_CAP = 10_000
BANDWIDTH_SUBSAMPLE_CAP = 2_000


@dataclass
class ReversibilityReport:
    """Absolute and relative reversibility error of one roundtrip."""

    are: float
    rre: float

    def to_json(self) -> str:
        return json.dumps({"are": self.are, "rre": self.rre})


@dataclass
class VolumeReport:
    """Volume-preservation error | |det J| - 1 | of the proposal map."""

    vpe: float
    perturbation: float
    det_abs: float

    def to_json(self) -> str:
        return json.dumps(
            {"vpe": self.vpe, "perturbation": self.perturbation, "det_abs": self.det_abs}
        )


@dataclass
class ErgodicityReport:
    """Two-sample statistics between chain output and reference draws."""

    ks_stats: list
    mmd2_abs: float
    sliced_w1: float
    dl1: float | None = None

    def to_json(self) -> str:
        return json.dumps(
            {
                "ks_stats": list(map(float, self.ks_stats)),
                "mmd2_abs": self.mmd2_abs,
                "sliced_w1": self.sliced_w1,
                "dl1": self.dl1,
            }
        )


@dataclass
class KernelSimilarityReport:
    """Distribution of paired-kernel output differences.

    Differences are 2-norms of the position difference, conditioned on at
    least one of the two kernels accepting; pairs where both reject
    contribute only to ``rejection_agreement``.
    """

    differences: np.ndarray
    rejection_agreement: float

    def to_json(self) -> str:
        return json.dumps(
            {
                "differences": [float(d) for d in self.differences],
                "rejection_agreement": self.rejection_agreement,
            }
        )


def _flip_trajectory(model, z, cfg):
    return momentum_flip(integrate_trajectory(model, z, cfg).end)


def reversibility_error(model: TargetModel, z: PhasePoint, cfg: IntegratorConfig) -> ReversibilityReport:
    """Applies F o Phi twice and measures the return distance.

    A perfectly reversible integrator returns the starting point exactly;
    the absolute reversibility error is the phase-space 2-norm of the gap
    and the relative error normalizes by the starting point's norm.
    Divergence anywhere along the roundtrip yields an infinite report rather
    than an exception.
    """
    norm = float(np.sqrt(z.q @ z.q + z.p @ z.p))
    try:
        forward = _flip_trajectory(model, z, cfg)
        back = _flip_trajectory(model, forward, cfg)
    except (DivergenceError, EvaluationError):
        return ReversibilityReport(are=np.inf, rre=np.inf)
    are = float(np.sqrt(np.sum((z.q - back.q) ** 2) + np.sum((z.p - back.p) ** 2)))
    rre = are / norm if norm > 0.0 else are
    return ReversibilityReport(are=are, rre=rre)


def volume_preservation_error(
    model: TargetModel, z: PhasePoint, cfg: IntegratorConfig, perturbation: float
) -> VolumeReport:
    """Finite-difference Jacobian determinant of the integrator map.

    Builds the 2m x 2m Jacobian of Phi (without the momentum flip, whose
    determinant magnitude is one) column by column with central differences
    of size ``perturbation``, and reports | |det| - 1 |.

    Args:
        model: Target model.
        z: Phase-space point at which the Jacobian is estimated.
        cfg: Integrator configuration defining the map.
        perturbation: Central-difference step; must be positive.

    Returns:
        A VolumeReport with the error, the perturbation used, and |det|.

    Raises:
        EvaluationError: when any finite-difference column is non-finite.
    """
    if perturbation <= 0.0:
        raise ValueError("perturbation must be positive")
    flat = z.flatten()
    dim = flat.size
    jac = np.empty((dim, dim))
    half = 0.5 * perturbation
    for i in range(dim):
        bump = np.zeros(dim)
        bump[i] = half
        try:
            plus = integrate_trajectory(model, PhasePoint.from_flat(flat + bump), cfg).end.flatten()
            minus = integrate_trajectory(model, PhasePoint.from_flat(flat - bump), cfg).end.flatten()
        except DivergenceError as exc:
            raise EvaluationError(f"divergent trajectory in Jacobian column {i}: {exc}", z.q) from exc
        column = (plus - minus) / perturbation
        if not np.isfinite(column).all():
            raise EvaluationError(f"non-finite Jacobian column {i}", z.q)
        jac[:, i] = column
    det_abs = float(np.abs(np.linalg.det(jac)))
    return VolumeReport(vpe=abs(det_abs - 1.0), perturbation=perturbation, det_abs=det_abs)


def select_fd_perturbation(model: TargetModel, points, cfg_tight: IntegratorConfig) -> float:
    """Picks the finite-difference size whose median volume error is smallest.

    Searches the six-element grid {1e-8, ..., 1e-3} at the tight threshold
    1e-9, where the integrator is near-exactly volume preserving, so the
    winning perturbation is the one that best separates finite-difference
    artifacts from genuine volume error.
    """
    if cfg_tight.threshold != 1e-9:
        raise ValueError("perturbation selection is calibrated at threshold 1e-9")
    medians = []
    for omega in FD_PERTURBATION_GRID:
        values = []
        for z in points:
            try:
                values.append(volume_preservation_error(model, z, cfg_tight, omega).vpe)
            except EvaluationError:
                values.append(np.inf)
        medians.append(np.median(values))
    medians = np.asarray(medians)
    if not np.isfinite(medians).any():
        raise EvaluationError("no perturbation in the grid produced finite volume errors")
    return float(FD_PERTURBATION_GRID[int(np.argmin(medians))])


def ks_statistic(a: np.ndarray, b: np.ndarray) -> float:
    """Exact two-sample Kolmogorov-Smirnov statistic.

    Args:
        a: First sample, in any order.
        b: Second sample, in any order.

    Returns:
        The supremum distance between the two empirical CDFs, in [0, 1].
    """
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise ValueError("samples must be nonempty")
    grid = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, grid, side="right") / a.size
    cdf_b = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(cdf_a - cdf_b)))


def ks_one_sample(samples: np.ndarray, cdf) -> float:
    """One-sample KS statistic against a callable CDF."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if n == 0:
        raise ValueError("samples must be nonempty")
    values = cdf(x)
    upper = np.max(np.arange(1, n + 1) / n - values)
    lower = np.max(values - np.arange(0, n) / n)
    return float(max(upper, lower))


def _unit_directions(num_dirs: int, dim: int, rng: RandomStream) -> np.ndarray:
    dirs = rng.normal(size=(num_dirs, dim))
    return dirs / np.linalg.norm(dirs, axis=1, keepdims=True)


def random_projection_ks(
    samples: np.ndarray,
    reference: np.ndarray,
    num_dirs: int = DEFAULT_NUM_DIRECTIONS,
    rng: RandomStream | None = None,
) -> np.ndarray:
    """KS statistics of both samples projected onto random directions.

    Directions are standard normal vectors normalized to the unit sphere;
    one statistic is returned per direction. The histogram of these values
    is the Cramer-Wold ergodicity measure.
    """
    rng = rng or RandomStream(0)
    samples = np.atleast_2d(samples)
    reference = np.atleast_2d(reference)
    dirs = _unit_directions(num_dirs, samples.shape[1], rng)
    stats = np.empty(num_dirs)
    for i, u in enumerate(dirs):
        stats[i] = ks_statistic(samples @ u, reference @ u)
    return stats


def _subsample(x: np.ndarray, cap: int, rng: RandomStream | None) -> np.ndarray:
    if x.shape[0] <= cap:
        return x
    if rng is None:
        idx = np.linspace(0, x.shape[0] - 1, cap).astype(int)
    else:
        idx = np.sort(rng.choice(x.shape[0], size=cap, replace=False))
    return x[idx]


def _kernel_sums(x: np.ndarray, y: np.ndarray, bandwidth: float, block: int = 512) -> float:
    """Sum of exp(-||x_i - y_j||^2 / h^2) over all pairs, in blocks."""
    y_sq = np.sum(y * y, axis=1)
    total = 0.0
    for start in range(0, x.shape[0], block):
        chunk = x[start : start + block]
        d2 = np.sum(chunk * chunk, axis=1)[:, None] + y_sq[None, :] - 2.0 * (chunk @ y.T)
        total += float(np.sum(np.exp(-np.maximum(d2, 0.0) / bandwidth**2)))
    return total


def mmd2_unbiased(
    samples: np.ndarray,
    reference: np.ndarray,
    bandwidth: float,
    rng: RandomStream | None = None,
) -> float:
    """Unbiased estimator of the squared maximum mean discrepancy.

    Uses the squared exponential kernel exp(-||q - q'||^2 / h^2) and the
    three-sum U-statistic, whose value can legitimately be negative; reports
    take the absolute value for display while the signed value is returned
    here. Sets larger than 10^4 points are uniformly subsampled to bound the
    quadratic kernel cost.

    Args:
        samples: First sample set, shape (n, m) with n >= 2.
        reference: Second sample set, shape (n', m) with n' >= 2.
        bandwidth: Kernel bandwidth h > 0.
        rng: Stream for subsampling; evenly strided without one.

    Returns:
        The signed U-statistic value.
    """
    x = np.atleast_2d(np.asarray(samples, dtype=float))
    y = np.atleast_2d(np.asarray(reference, dtype=float))
    if x.shape[0] < 2 or y.shape[0] < 2:
        raise ValueError("both sample sets need at least two points")
    if bandwidth <= 0.0:
        raise ValueError("bandwidth must be positive")
    x = _subsample(x, MMD_SUBSAMPLE_CAP, rng)
    y = _subsample(y, MMD_SUBSAMPLE_CAP, rng)
    n, n_ref = x.shape[0], y.shape[0]
    # Same-set sums include the diagonal of ones; remove it for the U-statistic.
    term_x = (_kernel_sums(x, x, bandwidth) - n) / (n * (n - 1))
    term_y = (_kernel_sums(y, y, bandwidth) - n_ref) / (n_ref * (n_ref - 1))
    cross = _kernel_sums(x, y, bandwidth) * 2.0 / (n * n_ref)
    return term_x + term_y - cross


def median_heuristic_bandwidth(reference: np.ndarray, rng: RandomStream | None = None) -> float:
    """Median pairwise distance among the reference draws.

    Subsamples to 2000 points beyond that size before forming all pairwise
    distances. A zero median (all points identical) leaves the kernel
    undefined and raises.
    """
    y = np.atleast_2d(np.asarray(reference, dtype=float))
    if y.shape[0] < 2:
        raise ValueError("bandwidth heuristic needs at least two points")
    y = _subsample(y, BANDWIDTH_SUBSAMPLE_CAP, rng)
    diff = y[:, None, :] - y[None, :, :]
    dists = np.sqrt(np.sum(diff * diff, axis=-1))
    h = float(np.median(dists[np.triu_indices(y.shape[0], k=1)]))
    if h == 0.0:
        raise ValueError("degenerate reference sample: median pairwise distance is zero")
    return h


def sliced_wasserstein(
    samples: np.ndarray,
    reference: np.ndarray,
    num_dirs: int = DEFAULT_NUM_DIRECTIONS,
    rng: RandomStream | None = None,
) -> float:
    """Monte Carlo sliced 1-Wasserstein distance between two sample sets.

    Projects both sets onto random unit directions and averages the sorted
    absolute differences; unequal set sizes are equalized by uniform
    subsampling of the larger set.
    """
    rng = rng or RandomStream(0)
    x = np.atleast_2d(np.asarray(samples, dtype=float))
    y = np.atleast_2d(np.asarray(reference, dtype=float))
    if x.shape[0] == 0 or y.shape[0] == 0:
        raise ValueError("samples must be nonempty")
    n = min(x.shape[0], y.shape[0])
    x = _subsample(x, n, rng)
    y = _subsample(y, n, rng)
    dirs = _unit_directions(num_dirs, x.shape[1], rng)
    total = 0.0
    for u in dirs:
        total += float(np.mean(np.abs(np.sort(x @ u) - np.sort(y @ u))))
    return total / num_dirs


@dataclass
class GridPartition2D:
    """Axis-aligned rectangular partition of a 2-D window."""

    x_edges: np.ndarray
    y_edges: np.ndarray

    @classmethod
    def regular(cls, x_range, y_range, nx: int, ny: int) -> "GridPartition2D":
        return cls(np.linspace(*x_range, nx + 1), np.linspace(*y_range, ny + 1))

    @classmethod
    def banana_default(cls) -> "GridPartition2D":
        """The 50 x 50 partition of [-30, 10] x [-10, 10]; 2500 cells of
        volume 0.32."""
        return cls.regular((-30.0, 10.0), (-10.0, 10.0), 50, 50)

    @property
    def cell_volumes(self) -> np.ndarray:
        return np.outer(np.diff(self.x_edges), np.diff(self.y_edges))


def dl1_discretized(samples: np.ndarray, reference: np.ndarray, partition: GridPartition2D):
    """Discretized L1 distance over a rectangular partition.

    Computes sum over cells of Vol(cell) * |share - share'|, where shares
    are the fractions of each sample landing in the cell. Mass falling
    outside the partition window is not counted in the statistic and is
    reported separately.

    Returns:
        Tuple (dl1, outside_fraction_samples, outside_fraction_reference).
    """
    x = np.atleast_2d(np.asarray(samples, dtype=float))
    y = np.atleast_2d(np.asarray(reference, dtype=float))
    if x.shape[1] != 2 or y.shape[1] != 2:
        raise ValueError("the discretized L1 statistic is two-dimensional")
    counts_x, _, _ = np.histogram2d(x[:, 0], x[:, 1], bins=(partition.x_edges, partition.y_edges))
    counts_y, _, _ = np.histogram2d(y[:, 0], y[:, 1], bins=(partition.x_edges, partition.y_edges))
    share_x = counts_x / x.shape[0]
    share_y = counts_y / y.shape[0]
    dl1 = float(np.sum(partition.cell_volumes * np.abs(share_x - share_y)))
    out_x = 1.0 - float(np.sum(share_x))
    out_y = 1.0 - float(np.sum(share_y))
    return dl1, out_x, out_y


def ess(x: np.ndarray) -> float:
    """Effective sample size of a scalar Markov chain series.

    Autocorrelations are estimated by FFT and summed under Geyer's initial
    monotone positive-pair truncation; the integrated autocorrelation time
    is floored at 1/log10(n) for numerical stability with strongly
    antithetic chains.

    Args:
        x: Scalar series of length at least 10.

    Returns:
        Estimated number of equivalent independent samples.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 10:
        raise ValueError("ESS needs a series of at least 10 values")
    centered = x - x.mean()
    variance = float(centered @ centered) / n
    if variance == 0.0:
        raise ValueError("zero-variance series has no defined ESS")
    size = 1 << (2 * n - 1).bit_length()
    freq = np.fft.rfft(centered, size)
    acov = np.fft.irfft(freq * np.conj(freq), size)[:n].real / n
    rho = acov / acov[0]

    pair_sums = []
    for k in range(0, n - 1, 2):
        gamma = rho[k] + rho[k + 1]
        if gamma <= 0.0:
            break
        pair_sums.append(gamma)
    if pair_sums:
        pair_sums = np.minimum.accumulate(pair_sums)
        tau = 2.0 * float(np.sum(pair_sums)) - 1.0
    else:
        tau = 1.0
    tau = max(tau, 1.0 / np.log10(n))
    return n / tau


def kernel_similarity(
    model: TargetModel,
    cfg_a: IntegratorConfig,
    cfg_b: IntegratorConfig,
    q_points: np.ndarray,
    rng: RandomStream,
) -> KernelSimilarityReport:
    """Compares two transition kernels driven by identical randomness.

    For each supplied position the same momentum and uniform draw feed both
    configurations; the recorded statistic is the 2-norm of the position
    difference whenever at least one kernel accepted, and the frequency of
    both kernels rejecting is the rejection agreement.

    Args:
        model: Target model.
        cfg_a: First configuration.
        cfg_b: Second configuration; may differ from the first only in
            threshold or solver choice.
        q_points: Array of positions to average over.
        rng: Stream supplying the shared momentum/uniform pairs.

    Returns:
        A KernelSimilarityReport.
    """
    same = (
        cfg_a.step_size == cfg_b.step_size
        and cfg_a.num_steps == cfg_b.num_steps
        and cfg_a.kind is cfg_b.kind
    )
    if not same:
        raise ValueError("paired kernels must share step size, step count, and integrator kind")
    differences = []
    both_rejected = 0
    q_points = np.atleast_2d(np.asarray(q_points, dtype=float))
    for q in q_points:
        p = sample_momentum(model, q, rng)
        u = float(rng.uniform())
        rec_a = hmc_transition_driven(model, q, cfg_a, p, u)
        rec_b = hmc_transition_driven(model, q, cfg_b, p, u)
        if not rec_a.accepted and not rec_b.accepted:
            both_rejected += 1
            continue
        out_a = rec_a.next_position(q)
        out_b = rec_b.next_position(q)
        differences.append(float(np.linalg.norm(out_a - out_b)))
    return KernelSimilarityReport(
        differences=np.asarray(differences),
        rejection_agreement=both_rejected / q_points.shape[0],
    )


def _lognormal_cdf(mu: float):
    def cdf(z):
        return 0.5 * (1.0 + scipy.special.erf((np.log(z) - mu) / np.sqrt(2.0)))

    return cdf


def biased_involution_experiment(n: int, rng: RandomStream):
    """Uncorrected Metropolis-Hastings step through the involution z -> 1/z.

    The target is LogNormal(0, 1) and the acceptance min{1, pi(1/z)/pi(z)}
    = min{1, z^2} ignores the involution's Jacobian. The resulting chain is
    stationary for the tilted law pi(z) sqrt(|J(z)|), which here is
    LogNormal(-1, 1): drawing inputs from that law and applying one kernel
    step should leave the distribution unchanged.

    Args:
        n: Number of independent one-step experiments; at least 10^4.
        rng: Randomness for the inputs and acceptance draws.

    Returns:
        Tuple of the outputs and their KS statistic against the
        LogNormal(-1, 1) CDF.
    """
    if n < 10_000:
        raise ValueError("the involution experiment needs at least 1e4 draws")
    z = np.exp(rng.normal(size=n) - 1.0)
    u = rng.uniform(size=n)
    accept = u < np.minimum(1.0, z * z)
    out = np.where(accept, 1.0 / z, z)
    return out, ks_one_sample(out, _lognormal_cdf(-1.0))


def corrected_involution_control(n: int, rng: RandomStream):
    """Jacobian-corrected counterpart: acceptance min{1, pi(1/z)|J|/pi(z)}.

    With the |J(z)| = z^{-2} factor restored the acceptance is identically
    one and LogNormal(0, 1) is preserved exactly.
    """
    z = np.exp(rng.normal(size=n))
    u = rng.uniform(size=n)
    accept = u < np.minimum(1.0, z * z * (1.0 / z**2))
    out = np.where(accept, 1.0 / z, z)
    return out, ks_one_sample(out, _lognormal_cdf(0.0))


def involution_kl_estimate(n: int, rng: RandomStream) -> float:
    """Monte Carlo estimate of KL(pi || pi_bar) for the 1/z involution.

    Equals log E_pi sqrt|J| - E_pi log sqrt|J|, which is exactly 1/2 for the
    LogNormal(0, 1) target.
    """
    z = np.exp(rng.normal(size=n))
    root_jac = 1.0 / z
    return float(np.log(np.mean(root_jac)) - np.mean(np.log(root_jac)))
