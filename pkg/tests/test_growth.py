import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rqcsim import growth, qsim_core as qs
from rqcsim.errors import DomainError


def fundamental_matrix_oracle(N):
    """Absorbing-chain oracle in floating point: (I - Q)^-1 over the interior states."""
    m = N - 1
    Q = np.zeros((m, m))
    R = np.zeros(m)  # one-step probability into K = N
    for row, K in enumerate(range(1, N)):
        p = (K + 2) / (2 * K + 2)
        if K + 1 < N:
            Q[row, row + 1] = p
        else:
            R[row] = p
        if K - 1 > 0:
            Q[row, row - 1] = 1 - p
    F = np.linalg.inv(np.eye(m) - Q)
    u = F @ R
    E = F @ np.ones(m)
    given_right = (F @ u) / u
    return u, E, given_right


def test_triplet_step_probability_examples():
    assert growth.triplet_step_probability(1) == Fraction(3, 4)
    assert growth.triplet_step_probability(2) == Fraction(2, 3)
    assert growth.triplet_step_probability(10) == Fraction(6, 11)
    assert all(growth.triplet_step_probability(K) > Fraction(1, 2) for K in range(1, 500))
    with pytest.raises(DomainError):
        growth.triplet_step_probability(0)


def test_closed_form_examples():
    assert growth.absorption_probability_formula(1) == 1
    assert growth.absorption_probability_formula(2) == Fraction(3, 4)
    assert growth.absorption_probability_formula(3) == Fraction(2, 3)
    assert growth.expected_steps_formula(1) == 0
    assert growth.expected_steps_formula(2) == 1
    assert growth.expected_steps_formula(3) == Fraction(7, 3)
    for f in (growth.absorption_probability_formula, growth.expected_steps_formula):
        with pytest.raises(DomainError):
            f(0)


def test_recurrence_hand_values():
    a = growth.solve_walk_recurrence(3)
    # E1 = 1 + (3/4) E2, E2 = 1 + (1/3) E1
    assert a.expected_steps[1] == Fraction(7, 3)
    assert a.expected_steps[2] == Fraction(16, 9)
    five = growth.solve_walk_recurrence(5)
    assert five.absorb_right_prob[1] == Fraction(3, 5)
    assert five.expected_steps[1] == 6


@pytest.mark.parametrize("N", [2, 3, 7, 25, 60])
def test_recurrence_against_fundamental_matrix(N):
    a = growth.solve_walk_recurrence(N)
    u, E, given_right = fundamental_matrix_oracle(N)
    assert np.allclose([float(x) for x in a.absorb_right_prob[1:N]], u, rtol=1e-11)
    assert np.allclose([float(x) for x in a.expected_steps[1:N]], E, rtol=1e-11)
    assert np.allclose([float(x) for x in a.expected_steps_given_right[1:N]], given_right, rtol=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 80))
def test_conditional_means_average_to_unconditional(N):
    a = growth.solve_walk_recurrence(N)
    for K in range(1, N):
        u = a.absorb_right_prob[K]
        mix = u * a.expected_steps_given_right[K] + (1 - u) * a.expected_steps_given_left[K]
        assert mix == a.expected_steps[K]
        assert a.absorb_right_prob[K] <= a.absorb_right_prob[K + 1]


def test_recurrence_boundaries():
    a = growth.solve_walk_recurrence(6)
    assert a.absorb_right_prob[0] == 0 and a.absorb_right_prob[6] == 1
    assert a.expected_steps[0] == 0 and a.expected_steps[6] == 0
    assert a.expected_steps_given_right[0] is None
    assert a.expected_steps_given_left[6] is None
    assert a.expected_cost_with_restarts(1) == a.expected_steps[1] / a.absorb_right_prob[1]


def test_walk_spec_validation():
    with pytest.raises(DomainError):
        growth.WalkSpec(0)
    with pytest.raises(DomainError):
        growth.WalkSpec(5, start_K=6)
    assert growth.WalkSpec(7).max_steps == 490


def test_simulate_walk_trivial_targets():
    rng = np.random.default_rng(0)
    t = growth.simulate_walk(growth.WalkSpec(1), rng)
    assert t.absorbed_at is growth.Absorption.RIGHT_N and t.n_steps == 0 and t.final_K is None
    for _ in range(50):
        t = growth.simulate_walk(growth.WalkSpec(2), rng)
        assert t.n_steps == 1
        assert t.final_K in (0, 2)


def test_simulate_walk_cap_is_reported():
    spec = growth.WalkSpec(50, max_steps=3)
    t = growth.simulate_walk(spec, np.random.default_rng(1))
    assert t.absorbed_at is growth.Absorption.CAP_EXCEEDED and t.n_steps == 3


def test_kernel_agrees_with_python_walk():
    spec = growth.WalkSpec(12)
    for i in range(200):
        trace = growth.simulate_walk(spec, np.random.default_rng([9, i]))
        code, n = growth._walk_kernel(np.random.default_rng([9, i]), 1, 12, spec.max_steps)
        assert n == trace.n_steps
        assert growth._CODES[int(code)] is trace.absorbed_at


def test_monte_carlo_right_fraction_n10():
    stats = growth.monte_carlo_growth(growth.WalkSpec(10), 100_000, seed=3)
    p = 11 / 20
    assert abs(stats.right_fraction - p) < 3 * math.sqrt(p * (1 - p) / 100_000)


def test_monte_carlo_n2_and_n20():
    two = growth.monte_carlo_growth(growth.WalkSpec(2), 100_000, seed=4)
    assert two.mean_steps == 1.0
    twenty = growth.monte_carlo_growth(growth.WalkSpec(20), 100_000, seed=5)
    assert abs(twenty.mean_steps - 76) < 3 * twenty.stderr_steps


def test_monte_carlo_single_trial_matches_trace():
    stats = growth.monte_carlo_growth(growth.WalkSpec(8), 1, seed=6)
    assert stats.trials == 1 and stats.stderr_steps == 0.0
    assert stats.mean_steps == stats.steps[0]
    assert stats.right_absorptions == int(stats.absorbed[0] == 1)


def test_monte_carlo_independent_of_threads():
    spec = growth.WalkSpec(15)
    a = growth.sample_walks(spec, 10_000, seed=8, threads=1)
    b = growth.sample_walks(spec, 10_000, seed=8, threads=4)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_quantum_k1_exact_projection():
    res = growth.quantum_validate_growth(1, 1, pairs=[(0, 1)])
    assert res.all_triplet_prob == pytest.approx(0.75, abs=1e-15)
    assert res.conditional_distance < 1e-14


def test_quantum_k1_many_measurements():
    res = growth.quantum_validate_growth(1, 40, np.random.default_rng(2))
    assert res.all_triplet_prob == pytest.approx(0.75, abs=1e-14)


def test_quantum_first_measurement_probability():
    # one test between a block qubit and the fresh qubit passes with probability 3/4 for
    # every K; P(K) only emerges from the whole sequence of tests
    for K in range(1, 5):
        res = growth.quantum_validate_growth(K, 1, pairs=[(0, K)])
        assert res.all_triplet_prob == pytest.approx(0.75, abs=1e-14)


def test_quantum_distance_decays_k3():
    ms = np.array([5, 10, 20, 40])
    means = [
        np.mean([growth.quantum_validate_growth(3, int(m), np.random.default_rng([m, r])).conditional_distance for r in range(6)])
        for m in ms
    ]
    assert np.polyfit(ms, np.log(means), 1)[0] < 0


def test_quantum_converges_to_step_probability_with_enough_pairs():
    for K in range(2, 6):
        res = growth.quantum_validate_growth(K, 200, np.random.default_rng([11, K]))
        assert res.all_triplet_prob == pytest.approx(float(growth.triplet_step_probability(K)), abs=1e-10)
        assert res.conditional_distance < 1e-8


@pytest.mark.parametrize("K", [2, 3, 4])
def test_singlet_discard(K):
    for j in range(K):
        assert growth.quantum_validate_singlet_discard(K, pair=(j, K)) < 1e-10
    assert growth.quantum_validate_singlet_discard(K, np.random.default_rng(K)) < 1e-10


def test_singlet_inside_block_is_impossible():
    from rqcsim.errors import ImpossibleOutcomeError

    state = qs.maximally_mixed(1).tensor(qs.rho_sym(3))
    with pytest.raises(ImpossibleOutcomeError):
        qs.measure_st(state, (0, 1), forced=qs.Outcome.SINGLET)


def test_random_pairs_cover_all_pairs():
    pairs = growth.random_pairs(4, 3000, np.random.default_rng(0))
    assert set(pairs) == {(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)}
