"""Module invariant checks behind ``rqcsim verify``.

Each check returns ``(passed, detail)``.  ``quick=True`` shrinks the Monte
Carlo sizes; the exact checks run at full size either way.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.stats import unitary_group

from . import growth, localization as loc, pipeline, qsim_core as qs
from .quadrature import adaptive_gauss_legendre


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def check_density_invariants(quick=False):
    worst = 0.0
    for n in range(1, 9):
        rho = qs.rho_sym(n)
        rho.validate()
        worst = max(worst, abs(rho.purity() - 1 / (n + 1)))
    rng = np.random.default_rng(1)
    state = qs.maximally_mixed(1).tensor(qs.rho_sym(4))
    for pair in growth.random_pairs(5, 20, rng):
        _, state = qs.measure_st(state, pair, rng=rng)
        state.validate()
    return worst < 1e-12, f"max purity error {worst:.2e}; 20 sequential measurements stayed valid"


def check_measurement_normalisation(quick=False):
    rng = np.random.default_rng(2)
    worst = 0.0
    for n in (2, 3, 4):
        for _ in range(10):
            g = rng.normal(size=(2**n, 2**n)) + 1j * rng.normal(size=(2**n, 2**n))
            m = g @ g.conj().T
            rho = qs.DensityOperator(n, m / np.trace(m))
            pair = tuple(rng.choice(n, size=2, replace=False))
            ps = qs.measure_st(rho, pair, forced=qs.Outcome.SINGLET)[0].probability
            pt = qs.measure_st(rho, pair, forced=qs.Outcome.TRIPLET)[0].probability
            worst = max(worst, abs(ps + pt - 1))
    return worst < 1e-12, f"max |p_s + p_t - 1| = {worst:.2e}"


def check_symmetric_commutes_with_swaps(quick=False):
    worst = 0.0
    for n in range(2, 7):
        p = qs.symmetric_projector(n).matrix
        for i in range(n - 1):
            s = qs.swap_operator((i, i + 1), n)
            worst = max(worst, float(np.max(np.abs(s @ p - p @ s))))
    return worst < 1e-12, f"max commutator entry {worst:.2e}"


def check_rho_sym_unitary_invariance(quick=False):
    worst = 0.0
    for n in range(1, 6):
        rho = qs.rho_sym(n)
        for k in range(20):
            u1 = unitary_group.rvs(2, random_state=1000 * n + k)
            u = u1
            for _ in range(n - 1):
                u = np.kron(u, u1)
            rotated = qs.DensityOperator(n, u @ rho.matrix @ u.conj().T)
            worst = max(worst, qs.trace_distance(rho, rotated))
    return worst < 1e-10, f"max trace distance {worst:.2e}"


def check_pure_distance_grid(quick=False):
    thetas = np.linspace(0, np.pi, 10)
    worst = 0.0
    for t1, t2 in itertools.product(thetas, thetas):
        d = qs.trace_distance(qs.pure_qubit(t1).density(), qs.pure_qubit(t2).density())
        worst = max(worst, abs(d - 2 * math.sin(abs(t1 - t2) / 2)))
    return worst < 1e-10, f"max deviation {worst:.2e} over 100 points"


def check_walk_closed_forms(quick=False):
    bad = []
    for N in range(1, 201):
        a = growth.solve_walk_recurrence(N)
        if a.absorb_right_prob[1] != growth.absorption_probability_formula(N):
            bad.append(("u", N))
        if a.expected_steps[1] != growth.expected_steps_formula(N):
            bad.append(("E", N))
        u = a.absorb_right_prob
        if any(u[k] > u[k + 1] for k in range(N)):
            bad.append(("monotone", N))
    return not bad, "exact for N = 1..200" if not bad else f"mismatches: {bad[:5]}"


def check_walk_monte_carlo(quick=False):
    trials = 10_000 if quick else 100_000
    worst = 0.0
    for N in (5, 10, 20, 50):
        stats = growth.monte_carlo_growth(growth.WalkSpec(N), trials, seed=11 + N)
        u = float(growth.absorption_probability_formula(N))
        e = float(growth.expected_steps_formula(N))
        z_u = abs(stats.right_fraction - u) / math.sqrt(u * (1 - u) / trials)
        z_e = abs(stats.mean_steps - e) / stats.stderr_steps
        worst = max(worst, z_u, z_e)
    return worst < 4, f"largest deviation {worst:.2f} standard errors ({trials} trials)"


def check_growth_distance_monotone(quick=False):
    ms = (5, 10, 20, 40)
    reps = 4 if quick else 10
    means = []
    for m in ms:
        ds = [growth.quantum_validate_growth(3, m, np.random.default_rng(100 + r)).conditional_distance for r in range(reps)]
        means.append(float(np.mean(ds)))
    ok = all(b <= a + 1e-15 for a, b in zip(means, means[1:]))
    return ok, "mean distances " + ", ".join(f"{d:.2e}" for d in means)


def check_marginal_normalisation(quick=False):
    bad = [M for M in range(0, 51) if sum(loc.marginal_pmf(n, M) for n in range(M + 1)) != 1]
    return not bad, "exact for M = 0..50" if not bad else f"fails at {bad}"


def check_posterior_normalisation(quick=False):
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(50):
        M = int(rng.integers(1, 501))
        n1 = int(rng.integers(0, M + 1))
        mode = min(1.0, max(0.5, n1 / M))
        r = adaptive_gauss_legendre(lambda q: loc.posterior_pdf(q, n1, M), 0.5, 1.0, tol=1e-12, breakpoints=(mode,))
        worst = max(worst, abs(r.value - 1))
    return worst < 1e-10, f"max |integral - 1| = {worst:.2e}"


def check_moment_identities(quick=False):
    for M in range(0, 201):
        for n1 in range(M + 1):
            s = loc.posterior_summary(n1, M)
            b = M - n1
            if s.mean_fraction * loc.t_integral(n1, b) != loc.t_integral(n1 + 1, b):
                return False, f"mean identity fails at n1={n1}, M={M}"
            if s.second_moment_fraction * loc.t_integral(n1, b) != loc.t_integral(n1 + 2, b):
                return False, f"second-moment identity fails at n1={n1}, M={M}"
            if M and not s.variance_fraction < Fraction(1, M):
                return False, f"variance >= 1/M at n1={n1}, M={M}"
    return True, "exact for all n1 <= M <= 200"


def exponential_closeness_slope():
    Ms = np.arange(20, 201, 20)
    logs = [
        _log_abs_fraction(loc.marginal_pmf(math.ceil(3 * M / 4), int(M)) - Fraction(2, int(M) + 1)) for M in Ms
    ]
    return float(np.polyfit(Ms, logs, 1)[0])


def _log_abs_fraction(x: Fraction) -> float:
    x = abs(x)
    return math.log(x.numerator) - math.log(x.denominator)


def check_exponential_closeness(quick=False):
    slope = exponential_closeness_slope()
    return slope < -0.01, f"fitted slope of log|P(n1) - 2/(M+1)| vs M: {slope:.4f}"


def check_distance_bound_grid(quick=False):
    q = np.linspace(0.5, 1.0, 200)
    q1, q2 = np.meshgrid(q, q)
    viol = int(np.sum(loc.trace_distance_bound(q1, q2) < loc.trace_distance_q(q1, q2)))
    return viol == 0, f"{viol} violations on 200x200 grid"


def chain_dominance_cases(quick=False):
    out = []
    for M in (64, 512, 4096):
        n1s = range(M // 2 + 1, M + 1)
        if M > 512 or quick:
            n1s = sorted(set(np.linspace(M // 2 + 1, M, 24).astype(int)))
        for N in (2, 8, 32):
            bound = loc.ensemble_error_bound(N, M)
            for n1 in n1s:
                out.append((n1, M, N, loc.ensemble_error_exact(int(n1), M, N), bound))
    return out


def check_chain_dominance(quick=False):
    cases = chain_dominance_cases(quick)
    bad = [c for c in cases if not c[3] <= c[4]]
    worst = max(c[3] / c[4] for c in cases)
    return not bad, f"{len(cases)} cases, largest error/bound ratio {worst:.3f}"


def check_chebyshev_coverage(quick=False):
    trials = 2000 if quick else 10_000
    rep = pipeline.run_localization_experiment(
        pipeline.ExperimentSpec(N=2, M=200, trials=trials, seed=17), with_ensemble_error=False
    )
    cov = {k: rep.coverage(k) for k in (2, 3, 5)}
    ok = all(cov[k] >= 1 - 1 / k**2 for k in cov)
    return ok, "coverage " + ", ".join(f"k={k}: {v:.4f}" for k, v in cov.items())


def check_determinism(quick=False):
    spec = pipeline.ExperimentSpec(N=3, M=300, trials=600, seed=5)
    a = pipeline.run_localization_experiment(spec, threads=1, with_ensemble_error=False)
    b = pipeline.run_localization_experiment(spec, threads=3, with_ensemble_error=False)
    return a.records == b.records, "records identical for 1 and 3 threads" if a.records == b.records else "records differ"


def check_tiny_exact(quick=False):
    cases = [(1, 0), (1, 1), (1, 2)] if quick else [(1, 0), (1, 1), (1, 2), (2, 1), (2, 2)]
    dists = {c: pipeline.tiny_exact_localization(*c).distance for c in cases}
    ok = all(math.isfinite(d) and d < 1e-8 for d in dists.values())
    return ok, ", ".join(f"(N={n}, M={m}): {d:.1e}" for (n, m), d in dists.items())


CHECKS = [
    ("qsim.density_invariants", check_density_invariants),
    ("qsim.measurement_normalisation", check_measurement_normalisation),
    ("qsim.symmetric_projector_swaps", check_symmetric_commutes_with_swaps),
    ("qsim.rho_sym_unitary_invariance", check_rho_sym_unitary_invariance),
    ("qsim.pure_distance_grid", check_pure_distance_grid),
    ("growth.closed_forms", check_walk_closed_forms),
    ("growth.monte_carlo", check_walk_monte_carlo),
    ("growth.projection_monotone", check_growth_distance_monotone),
    ("localization.marginal_normalisation", check_marginal_normalisation),
    ("localization.posterior_normalisation", check_posterior_normalisation),
    ("localization.moment_identities", check_moment_identities),
    ("localization.exponential_closeness", check_exponential_closeness),
    ("localization.distance_bound_grid", check_distance_bound_grid),
    ("localization.chain_dominance", check_chain_dominance),
    ("localization.chebyshev_coverage", check_chebyshev_coverage),
    ("pipeline.determinism", check_determinism),
    ("pipeline.tiny_exact", check_tiny_exact),
]


def run_all(quick=False, only=None) -> list[CheckResult]:
    results = []
    for name, fn in CHECKS:
        if only and not any(name.startswith(o) for o in only):
            continue
        try:
            passed, detail = fn(quick)
        except Exception as exc:  # a crash is a failed check, reported not raised
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        results.append(CheckResult(name, bool(passed), detail))
    return results
