"""End-to-end experiments built from the growth and localization pieces."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import growth, localization as loc, qsim_core as qs
from .errors import CapacityError, DomainError
from .parallel import DEFAULT_SEED, run_chunks, trial_rng

# stream ids keep independent consumers of one seed apart
STREAM_LOCALIZE = 1
STREAM_SWEEP = 2
STREAM_GROWTH_A = 3
STREAM_GROWTH_B = 4
STREAM_E2E_LOCALIZE = 5


@dataclass(frozen=True)
class ExperimentSpec:
    N: int
    M: int
    trials: int
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if min(self.N, self.M, self.trials) < 1:
            raise DomainError("N, M and trials must all be positive")


@dataclass(frozen=True)
class TrialRecord:
    theta_true: float
    q_true: float
    n1: int
    mu: float
    sigma: float
    within_2sigma: bool
    ensemble_error: float | None = None


@dataclass(frozen=True)
class ExperimentReport:
    spec: ExperimentSpec
    records: tuple[TrialRecord, ...] = field(repr=False)
    coverage_2sigma: float
    mean_abs_error: float
    mean_ensemble_error_exact: float | None
    bound_value: float
    fraction_n1_above_half: float

    @property
    def all_above_half(self) -> bool:
        return all(r.n1 > self.spec.M / 2 for r in self.records)

    @property
    def bound_dominates(self) -> bool | None:
        """``None`` when the dominance precondition (every ``n1 > M/2``) fails."""
        if not self.all_above_half or self.mean_ensemble_error_exact is None:
            return None
        return self.mean_ensemble_error_exact <= self.bound_value

    def coverage(self, k: float) -> float:
        return float(np.mean([abs(r.mu - r.q_true) <= k * r.sigma for r in self.records]))


@lru_cache(maxsize=65536)
def _cached_summary(n1, M):
    return loc.posterior_summary(n1, M)


@lru_cache(maxsize=65536)
def _cached_ensemble_error(n1, M, N):
    return loc.ensemble_error_exact(n1, M, N)


def _localization_trial(seed, index, M, N, stream, with_error):
    rng = trial_rng(seed, index, stream)
    theta = loc.sample_theta(rng)
    q_true = loc.q_from_theta(theta).q
    counts = loc.simulate_trials(theta, M, rng)
    summary = _cached_summary(counts.n1, M)
    mu, sigma = summary.mean_exact, summary.sigma
    err = _cached_ensemble_error(counts.n1, M, N) if with_error else None
    return TrialRecord(theta, q_true, counts.n1, mu, sigma, abs(mu - q_true) <= 2 * sigma, err)


def run_localization_experiment(
    spec: ExperimentSpec, threads=None, with_ensemble_error: bool = True, stream: int = STREAM_LOCALIZE
) -> ExperimentReport:
    """Sample ``theta``, simulate ``M`` s/t outcomes, and score the posterior, per trial."""

    def chunk(lo, hi):
        return [_localization_trial(spec.seed, i, spec.M, spec.N, stream, with_ensemble_error) for i in range(lo, hi)]

    records = [r for part in run_chunks(chunk, spec.trials, threads) for r in part]
    errors = [r.ensemble_error for r in records]
    return ExperimentReport(
        spec=spec,
        records=tuple(records),
        coverage_2sigma=float(np.mean([r.within_2sigma for r in records])),
        mean_abs_error=float(np.mean([abs(r.mu - r.q_true) for r in records])),
        mean_ensemble_error_exact=float(np.mean(errors)) if with_ensemble_error else None,
        bound_value=loc.ensemble_error_bound(spec.N, spec.M),
        fraction_n1_above_half=float(np.mean([r.n1 > spec.M / 2 for r in records])),
    )


# --- tiny exact cross-validation ----------------------------------------


def _su2_batch(alpha, beta, gamma):
    """SU(2) elements ``Rz(alpha) Ry(beta) Rz(gamma)`` for broadcast angle arrays, shape ``(..., 2, 2)``."""
    ea = np.exp(-0.5j * alpha)
    eg = np.exp(-0.5j * gamma)
    c = np.cos(beta / 2)
    s = np.sin(beta / 2)
    u = np.empty(np.broadcast(alpha, beta, gamma).shape + (2, 2), dtype=complex)
    u[..., 0, 0] = ea * eg * c
    u[..., 0, 1] = -ea * np.conj(eg) * s
    u[..., 1, 0] = np.conj(ea) * eg * s
    u[..., 1, 1] = np.conj(ea) * np.conj(eg) * c
    return u


def collective_twirl(rho: np.ndarray, n_qubits: int, n_angle: int = 16, n_beta: int = 32) -> np.ndarray:
    """Haar average of ``U^{(x)n} rho U^dagger^{(x)n}`` over SU(2).

    Euler angles: trapezoid rules in ``alpha`` and ``gamma`` (exact for the
    bounded trigonometric degree when ``n_angle > 2 n``), Gauss-Legendre in
    ``beta`` with the ``sin(beta)/2`` weight.
    """
    if n_angle <= 2 * n_qubits:
        raise DomainError(f"n_angle must exceed {2 * n_qubits} for an exact azimuthal average")
    xb, wb = np.polynomial.legendre.leggauss(n_beta)
    betas = 0.5 * np.pi * (xb + 1.0)
    wbeta = wb * 0.5 * np.pi * np.sin(betas) / 2.0
    angles = 2.0 * np.pi * np.arange(n_angle) / n_angle
    A, B, G = np.meshgrid(angles, betas, angles, indexing="ij")
    W = np.broadcast_to(wbeta[None, :, None], A.shape).reshape(-1) / n_angle**2
    u1 = _su2_batch(A.reshape(-1), B.reshape(-1), G.reshape(-1))
    u = u1
    for _ in range(n_qubits - 1):
        u = np.einsum("kab,kcd->kacbd", u, u1).reshape(len(W), 2 * u.shape[1], 2 * u.shape[2])
    conj = u @ rho @ np.conj(np.swapaxes(u, 1, 2))
    return np.tensordot(W, conj, axes=1)


def predicted_conditional_state(N: int, n1: int, M: int, n_theta: int = 96, n_angle: int = 16, n_beta: int = 32):
    """Twirl of the posterior mixture of ``|0><0|^N (x) |q><q|^N`` given ``n1`` triplets in ``M``.

    Qubits ``0..N-1`` carry ``|0>``; qubits ``N..2N-1`` carry ``|q>``.
    """
    x, w = np.polynomial.legendre.leggauss(n_theta)
    thetas = 0.5 * np.pi * (x + 1.0)
    # dq = sin(theta)/4 dtheta over q in [1/2, 1]
    weights = w * 0.5 * np.pi * np.sin(thetas) / 4.0
    t_norm = float(loc.t_integral(n1, M - n1))
    zero = qs.basis_state("0").power(N).amplitudes
    dim = 4**N
    mix = np.zeros((dim, dim), dtype=complex)
    for theta, wt in zip(thetas, weights):
        q = (3.0 + math.cos(theta)) / 4.0
        dens = q**n1 * (1.0 - q) ** (M - n1) / t_norm
        vec = np.kron(qs.pure_qubit(theta).power(N).amplitudes, zero)
        mix += wt * dens * np.outer(vec, vec.conj())
    return collective_twirl(mix, 2 * N, n_angle, n_beta)


@dataclass(frozen=True)
class OutcomeCase:
    outcomes: tuple[str, ...]
    probability: float
    n1: int
    predicted: qs.DensityOperator = field(repr=False)
    simulated: qs.DensityOperator = field(repr=False)
    distance: float


@dataclass(frozen=True)
class TinyExactReport:
    N: int
    M: int
    cases: tuple[OutcomeCase, ...]
    distance: float
    weighted_distance: float
    resolution: dict

    @property
    def total_probability(self) -> float:
        return sum(c.probability for c in self.cases)


def tiny_exact_localization(N: int, M: int, n_theta: int = 96, n_angle: int = 16, n_beta: int = 32) -> TinyExactReport:
    """Exact measurement on ``rho_sym(N+M) (x) rho_sym(N+M)`` against the Bayesian prediction.

    Every outcome string of the ``M`` cross-pair measurements is enumerated
    with its Born probability, so no sampling is involved.  Source A sits on
    qubits ``0..N+M-1`` and source B above it; pair ``i`` is
    ``(N+i, N+M+N+i)`` and qubits ``0..N-1`` of each source are kept.
    ``distance`` is the largest trace distance over outcome strings with
    non-zero probability.
    """
    if not 1 <= N <= 2 or not 0 <= M <= 4:
        raise DomainError("tiny_exact_localization supports N in 1..2 and M in 0..4")
    ns = N + M
    n_total = 2 * ns
    if n_total > qs.MAX_QUBITS:
        raise CapacityError(f"{n_total} qubits exceeds MAX_QUBITS={qs.MAX_QUBITS}")
    dicke = qs.dicke_vectors(ns)
    pairs = [(N + i, ns + N + i) for i in range(M)]
    keep = list(range(N)) + list(range(ns, ns + N))
    mixture = [np.kron(dicke[:, l], dicke[:, k]).astype(complex) for k in range(ns + 1) for l in range(ns + 1)]
    weight = 1.0 / (ns + 1) ** 2
    proj = {"s": qs.SINGLET_PROJECTOR_2Q, "t": qs.TRIPLET_PROJECTOR_2Q}

    predicted_cache = {}
    cases = []
    for outcomes in itertools.product("st", repeat=M):
        reduced = np.zeros((4**N, 4**N), dtype=complex)
        for vec in mixture:
            v = vec
            for tag, pair in zip(outcomes, pairs):
                v = qs.apply_pair_operator(proj[tag], v, pair, n_total)
            reduced += weight * qs.reduce_vector(v, n_total, keep)
        prob = float(np.trace(reduced).real)
        if prob < qs.IMPOSSIBLE_TOL:
            continue
        sim = reduced / prob
        simulated = qs.DensityOperator(2 * N, 0.5 * (sim + sim.conj().T))
        n1 = outcomes.count("t")
        if n1 not in predicted_cache:
            pred = predicted_conditional_state(N, n1, M, n_theta, n_angle, n_beta)
            predicted_cache[n1] = qs.DensityOperator(2 * N, 0.5 * (pred + pred.conj().T))
        predicted = predicted_cache[n1]
        cases.append(OutcomeCase(outcomes, prob, n1, predicted, simulated, qs.trace_distance(predicted, simulated)))
    dist = max(c.distance for c in cases)
    weighted = sum(c.probability * c.distance for c in cases)
    resolution = {"n_theta": n_theta, "n_angle": n_angle, "n_beta": n_beta, "method": "euler-angle quadrature"}
    return TinyExactReport(N, M, tuple(cases), dist, weighted, resolution)


# --- scaling sweep -------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    N: int
    epsilon: float
    log_required_M: float
    required_M: int | None
    bound: float | None
    empirical_error: float | None


@dataclass(frozen=True)
class SweepTable:
    rows: tuple[SweepRow, ...]
    slope_vs_N: dict
    slope_vs_inv_eps: dict


def _fit_slope(x, y):
    if len(x) < 2:
        return None
    return float(np.polyfit(np.log(x), y, 1)[0])


def scaling_sweep(N_values, epsilon_values, trials: int = 100, seed: int = DEFAULT_SEED, threads=None) -> SweepTable:
    """Required ``M`` for each ``(N, eps)``, the bound there, and a Monte Carlo error estimate.

    Rows whose ``M`` exceeds the integer capacity keep their log value and
    leave the other columns empty.  Slopes are least-squares fits of
    ``log required_M`` against ``log N`` (per ``eps``) and ``log(1/eps)``
    (per ``N``), using the exact real-valued inversion.
    """
    N_values = list(N_values)
    epsilon_values = list(epsilon_values)
    if not N_values or not epsilon_values:
        raise DomainError("N_values and epsilon_values must be non-empty")
    rows = []
    for r_index, (N, eps) in enumerate(itertools.product(N_values, epsilon_values)):
        logm = loc.log_required_M(N, eps)
        try:
            m = loc.required_M(N, eps)
        except CapacityError:
            rows.append(SweepRow(N, eps, logm, None, None, None))
            continue
        empirical = None
        if trials:
            spec = ExperimentSpec(N, m, trials, seed + r_index)
            empirical = run_localization_experiment(spec, threads, stream=STREAM_SWEEP).mean_ensemble_error_exact
        rows.append(SweepRow(N, eps, logm, m, loc.ensemble_error_bound(N, m), empirical))

    slope_N = {}
    for eps in epsilon_values:
        sel = [r for r in rows if r.epsilon == eps]
        slope_N[eps] = _fit_slope([r.N for r in sel], [r.log_required_M for r in sel])
    slope_eps = {}
    for N in N_values:
        sel = [r for r in rows if r.N == N]
        slope_eps[N] = _fit_slope([1.0 / r.epsilon for r in sel], [r.log_required_M for r in sel])
    return SweepTable(tuple(rows), slope_N, slope_eps)


# --- end to end ----------------------------------------------------------


@dataclass(frozen=True)
class SourceGrowth:
    attempts: int
    steps_per_attempt: tuple[int, ...]
    qubits_consumed: int

    @property
    def total_steps(self) -> int:
        return sum(self.steps_per_attempt)


@dataclass(frozen=True)
class EndToEndReport:
    N: int
    M: int
    seed: int
    sources: tuple[SourceGrowth, SourceGrowth]
    theta_true: float
    q_true: float
    n1: int
    mu: float
    sigma: float
    ensemble_error: float
    bound_value: float
    total_walk_steps: int
    total_st_measurements: int
    total_qubits_consumed: int
    expected_budget: float


def grow_until_success(target: int, rng: np.random.Generator, max_attempts: int = 10_000) -> SourceGrowth:
    """Restart the walk from ``K = 1`` until it reaches ``target``.

    Every attempt spends one qubit to start and one fresh qubit per step.
    """
    spec = growth.WalkSpec(target)
    steps = []
    for _ in range(max_attempts):
        code, n = growth._walk_kernel(rng, spec.start_K, spec.target_N, spec.max_steps)
        steps.append(int(n))
        if code == 1:
            return SourceGrowth(len(steps), tuple(steps), len(steps) + sum(steps))
    raise DomainError(f"no successful growth in {max_attempts} attempts")


def end_to_end(N: int, M: int, seed: int = DEFAULT_SEED) -> EndToEndReport:
    """Grow two ``rho_sym(N+M)`` sources with the walk model, then run one localization round.

    Resource count: one s/t measurement per walk step plus the ``M``
    estimation measurements.  ``expected_budget`` is the matching
    expectation, ``2 E[steps]/P(success) + M``.
    """
    if N < 1 or M < 1:
        raise DomainError("N and M must be >= 1")
    target = N + M
    src_a = grow_until_success(target, trial_rng(seed, 0, STREAM_GROWTH_A))
    src_b = grow_until_success(target, trial_rng(seed, 0, STREAM_GROWTH_B))
    rng = trial_rng(seed, 0, STREAM_E2E_LOCALIZE)
    theta = loc.sample_theta(rng)
    counts = loc.simulate_trials(theta, M, rng)
    summary = loc.posterior_summary(counts.n1, M)
    walk_steps = src_a.total_steps + src_b.total_steps
    per_attempt = float(growth.expected_steps_formula(target))
    p_success = float(growth.absorption_probability_formula(target))
    return EndToEndReport(
        N=N,
        M=M,
        seed=seed,
        sources=(src_a, src_b),
        theta_true=theta,
        q_true=loc.q_from_theta(theta).q,
        n1=counts.n1,
        mu=summary.mean_exact,
        sigma=summary.sigma,
        ensemble_error=loc.ensemble_error_exact(counts.n1, M, N),
        bound_value=loc.ensemble_error_bound(N, M),
        total_walk_steps=walk_steps,
        total_st_measurements=walk_steps + M,
        total_qubits_consumed=src_a.qubits_consumed + src_b.qubits_consumed,
        expected_budget=2 * per_attempt / p_success + M,
    )
