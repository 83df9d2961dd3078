"""Growing the maximally mixed symmetric state one qubit at a time.

Adding a fresh maximally mixed qubit to ``rho_sym(K)`` and projecting onto
the symmetric subspace (all-triplet s/t outcomes) succeeds with probability
``P(K) = (K+2)/(2K+2)``; a singlet costs two qubits.  The size ``K`` then
performs a birth-death walk on ``{0, ..., N}`` absorbed at both ends.  This
module has the closed forms, an exact rational solver for the first-step
equations, a Monte Carlo sampler, and exact density-matrix checks of the
two physical claims behind the walk.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numba
import numpy as np

from . import qsim_core as qs
from .errors import DomainError
from .parallel import DEFAULT_SEED, run_chunks, trial_rng


class Absorption(enum.Enum):
    LEFT0 = "left0"
    RIGHT_N = "rightN"
    CAP_EXCEEDED = "cap_exceeded"


@dataclass(frozen=True)
class WalkSpec:
    target_N: int
    start_K: int = 1
    max_steps: int | None = None

    def __post_init__(self):
        if self.target_N < 1:
            raise DomainError(f"target_N must be >= 1, got {self.target_N}")
        if not 0 < self.start_K <= self.target_N:
            raise DomainError(f"start_K={self.start_K} not in (0, {self.target_N}]")
        if self.max_steps is None:
            object.__setattr__(self, "max_steps", 10 * self.target_N**2)
        elif self.max_steps < 0:
            raise DomainError("max_steps must be non-negative")


@dataclass(frozen=True)
class WalkStep:
    K_before: int
    moved_right: bool


@dataclass(frozen=True)
class WalkTrace:
    steps: tuple[WalkStep, ...]
    absorbed_at: Absorption
    n_steps: int

    @property
    def final_K(self) -> int | None:
        if not self.steps:
            return None
        last = self.steps[-1]
        return last.K_before + (1 if last.moved_right else -1)


@dataclass(frozen=True)
class WalkAnalysis:
    """Per-start-state solutions of the first-step equations, indexed by K = 0..N.

    ``expected_steps`` is the unconditional mean absorption time.  The
    conditional means are ``None`` where the conditioning event is impossible.
    """

    absorb_right_prob: tuple[Fraction, ...]
    expected_steps: tuple[Fraction, ...]
    expected_steps_given_right: tuple[Fraction | None, ...]
    expected_steps_given_left: tuple[Fraction | None, ...]

    def expected_cost_with_restarts(self, K: int = 1) -> Fraction:
        """Mean total steps over independent restarts until one attempt succeeds."""
        u = self.absorb_right_prob[K]
        if u == 0:
            raise DomainError("success probability is zero")
        return self.expected_steps[K] / u


@dataclass(frozen=True)
class GrowthStats:
    trials: int
    right_absorptions: int
    mean_steps: float
    stderr_steps: float
    seed: int
    cap_exceeded: int = 0
    steps: np.ndarray | None = field(default=None, repr=False, compare=False)
    absorbed: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def right_fraction(self) -> float:
        return self.right_absorptions / self.trials

    @property
    def right_fraction_stderr(self) -> float:
        p = self.right_fraction
        return math.sqrt(p * (1 - p) / self.trials)

    @property
    def mean_cost_with_restarts(self) -> float:
        if self.right_absorptions == 0:
            return math.inf
        return self.mean_steps / self.right_fraction


def triplet_step_probability(K: int) -> Fraction:
    """``P(K) = (K+2)/(2K+2)``: chance the fresh qubit joins the symmetric block."""
    if K < 1:
        raise DomainError(f"K must be >= 1, got {K}")
    return Fraction(K + 2, 2 * K + 2)


def absorption_probability_formula(N: int) -> Fraction:
    if N < 1:
        raise DomainError(f"N must be >= 1, got {N}")
    return Fraction(N + 1, 2 * N)


def expected_steps_formula(N: int) -> Fraction:
    if N < 1:
        raise DomainError(f"N must be >= 1, got {N}")
    return Fraction(N * N + 3 * N - 4, 6)


def _solve_first_step(N: int, rhs) -> list[Fraction]:
    """Solve ``x_K - P(K) x_{K+1} - (1-P(K)) x_{K-1} = rhs[K]`` with ``x_0 = x_N = 0``.

    Thomas algorithm over the interior states, in exact arithmetic.  Returns
    the full vector including the zero boundaries.
    """
    x = [Fraction(0)] * (N + 1)
    m = N - 1
    if m <= 0:
        return x
    # row K (1..N-1): -(1-P) x_{K-1} + x_K - P x_{K+1} = rhs[K]
    c_prime = [Fraction(0)] * (m + 1)
    d_prime = [Fraction(0)] * (m + 1)
    for row, K in enumerate(range(1, N), start=1):
        p = triplet_step_probability(K)
        lower = -(1 - p) if K > 1 else Fraction(0)
        upper = -p if K < N - 1 else Fraction(0)
        denom = 1 - lower * c_prime[row - 1]
        c_prime[row] = upper / denom
        d_prime[row] = (rhs[K] - lower * d_prime[row - 1]) / denom
    x[N - 1] = d_prime[m]
    for row in range(m - 1, 0, -1):
        x[row] = d_prime[row] - c_prime[row] * x[row + 1]
    return x


def solve_walk_recurrence(spec: WalkSpec | int) -> WalkAnalysis:
    """Exact absorption probabilities and mean absorption times for every start state."""
    if isinstance(spec, int):
        spec = WalkSpec(spec)
    N = spec.target_N
    # u_K - P u_{K+1} - Q u_{K-1} = 0 with u_N = 1 folds into the last row's rhs
    rhs_u = [Fraction(0)] * (N + 1)
    if N >= 2:
        rhs_u[N - 1] = triplet_step_probability(N - 1)
    u = _solve_first_step(N, rhs_u)
    u[N] = Fraction(1)

    E = _solve_first_step(N, [Fraction(1)] * (N + 1))

    # w_K = E[T; right] obeys w_K = u_K + P w_{K+1} + Q w_{K-1}, and likewise for the left
    w_right = _solve_first_step(N, u)
    w_left = _solve_first_step(N, [1 - uk for uk in u])

    given_right = tuple(w / uk if uk != 0 else None for w, uk in zip(w_right, u))
    given_left = tuple(w / (1 - uk) if uk != 1 else None for w, uk in zip(w_left, u))
    return WalkAnalysis(tuple(u), tuple(E), given_right, given_left)


def simulate_walk(spec: WalkSpec, rng: np.random.Generator) -> WalkTrace:
    """Sample one trajectory; hitting the step cap is reported, not raised."""
    K = spec.start_K
    steps = []
    while 0 < K < spec.target_N:
        if len(steps) >= spec.max_steps:
            return WalkTrace(tuple(steps), Absorption.CAP_EXCEEDED, len(steps))
        right = rng.random() * (2 * K + 2) < K + 2
        steps.append(WalkStep(K, bool(right)))
        K += 1 if right else -1
    where = Absorption.RIGHT_N if K == spec.target_N else Absorption.LEFT0
    return WalkTrace(tuple(steps), where, len(steps))


@numba.njit(nogil=True, cache=True)
def _walk_kernel(gen, start, target, cap):
    # same comparison as simulate_walk so both paths agree draw for draw
    k = start
    s = 0
    while 0 < k < target:
        if s >= cap:
            return 2, s
        if gen.random() * (2 * k + 2) < k + 2:
            k += 1
        else:
            k -= 1
        s += 1
    return (1 if k == target else 0), s


_CODES = {0: Absorption.LEFT0, 1: Absorption.RIGHT_N, 2: Absorption.CAP_EXCEEDED}


def sample_walks(spec: WalkSpec, trials: int, seed: int = DEFAULT_SEED, threads=None, stream: int = 0):
    """Absorption codes (0 left, 1 right, 2 cap) and step counts for ``trials`` walks.

    Trial ``i`` uses ``trial_rng(seed, i, stream)``, so the arrays do not
    depend on ``threads``.
    """

    def chunk(lo, hi):
        codes = np.empty(hi - lo, dtype=np.int8)
        steps = np.empty(hi - lo, dtype=np.int64)
        for j, i in enumerate(range(lo, hi)):
            codes[j], steps[j] = _walk_kernel(trial_rng(seed, i, stream), spec.start_K, spec.target_N, spec.max_steps)
        return codes, steps

    parts = run_chunks(chunk, trials, threads)
    codes = np.concatenate([p[0] for p in parts]) if parts else np.empty(0, dtype=np.int8)
    steps = np.concatenate([p[1] for p in parts]) if parts else np.empty(0, dtype=np.int64)
    return codes, steps


def monte_carlo_growth(spec: WalkSpec, trials: int, seed: int = DEFAULT_SEED, threads=None) -> GrowthStats:
    if trials < 1:
        raise DomainError("trials must be >= 1")
    codes, steps = sample_walks(spec, trials, seed, threads)
    mean = float(steps.mean())
    stderr = float(steps.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return GrowthStats(
        trials=trials,
        right_absorptions=int(np.sum(codes == 1)),
        mean_steps=mean,
        stderr_steps=stderr,
        seed=seed,
        cap_exceeded=int(np.sum(codes == 2)),
        steps=steps,
        absorbed=codes,
    )


@dataclass(frozen=True)
class GrowthValidation:
    all_triplet_prob: float
    conditional_distance: float
    pairs: tuple[tuple[int, int], ...]


def random_pairs(n_qubits: int, count: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    """``count`` unordered pairs drawn uniformly (with replacement) from ``n_qubits`` qubits."""
    all_pairs = list(itertools.combinations(range(n_qubits), 2))
    return [all_pairs[i] for i in rng.integers(len(all_pairs), size=count)]


def quantum_validate_growth(K: int, n_measurements: int, rng=None, pairs=None) -> GrowthValidation:
    """Triplet-condition ``rho_sym(K) (x) I/2`` on random pairs and compare with ``rho_sym(K+1)``.

    The fresh qubit is qubit ``K``.  ``pairs`` overrides the random choice.
    """
    if K < 1:
        raise DomainError("K must be >= 1")
    n = K + 1
    state = qs.maximally_mixed(1).tensor(qs.rho_sym(K))
    if pairs is None:
        pairs = random_pairs(n, n_measurements, rng)
    prob = 1.0
    for pair in pairs:
        outcome, state = qs.measure_st(state, pair, forced=qs.Outcome.TRIPLET)
        prob *= outcome.probability
    dist = qs.trace_distance(state, qs.rho_sym(n))
    return GrowthValidation(prob, dist, tuple(tuple(p) for p in pairs))


def quantum_validate_singlet_discard(K: int, rng=None, pair=None) -> float:
    """Force a singlet between the fresh qubit and a block qubit, discard both, compare with ``rho_sym(K-1)``.

    Pairs inside the symmetric block have zero singlet probability, so the
    random pair always includes the fresh qubit (qubit ``K``).
    """
    if not 2 <= K <= qs.MAX_QUBITS - 1:
        raise DomainError(f"K must lie in [2, {qs.MAX_QUBITS - 1}]")
    state = qs.maximally_mixed(1).tensor(qs.rho_sym(K))
    if pair is None:
        pair = (int(rng.integers(K)), K)
    _, post = qs.measure_st(state, pair, forced=qs.Outcome.SINGLET)
    rest = qs.partial_trace_discard(post, pair)
    return qs.trace_distance(rest, qs.rho_sym(K - 1))
