import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rqcsim.errors import NumericalError
from rqcsim.parallel import resolve_threads, run_chunks, trial_rng
from rqcsim.quadrature import adaptive_gauss_legendre, gauss_legendre


def test_fixed_rule_is_exact_for_polynomials():
    # order n integrates degree 2n - 1 exactly
    assert gauss_legendre(lambda x: x**19, 0.0, 1.0, order=10) == pytest.approx(1 / 20, rel=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 30), st.integers(0, 30))
def test_adaptive_matches_beta_integrals(a, b):
    exact = math.gamma(a + 1) * math.gamma(b + 1) / math.gamma(a + b + 2)
    r = adaptive_gauss_legendre(lambda x: x**a * (1 - x) ** b, 0.0, 1.0, tol=1e-13)
    assert abs(r.value - exact) < 1e-12


def test_adaptive_handles_kink_with_breakpoint():
    f = lambda x: np.abs(x - 0.3)
    r = adaptive_gauss_legendre(f, 0.0, 1.0, tol=1e-12, breakpoints=(0.3,))
    assert r.value == pytest.approx(0.045 + 0.245, abs=1e-13)
    assert r.panels == 2


def test_adaptive_reversed_and_empty():
    f = lambda x: np.exp(x)
    assert adaptive_gauss_legendre(f, 1.0, 0.0).value == pytest.approx(-(math.e - 1), abs=1e-12)
    assert adaptive_gauss_legendre(f, 0.5, 0.5).value == 0.0


def test_adaptive_reports_non_convergence():
    with pytest.raises(NumericalError) as info:
        adaptive_gauss_legendre(lambda x: np.sin(1 / np.maximum(x, 1e-300)), 0.0, 1.0, tol=1e-14, max_panels=50)
    assert "panels" in info.value.diagnostics


def test_trial_rng_is_reproducible_and_distinct():
    a = trial_rng(1, 5).random(4)
    assert np.array_equal(a, trial_rng(1, 5).random(4))
    assert not np.array_equal(a, trial_rng(1, 6).random(4))
    assert not np.array_equal(a, trial_rng(1, 5, stream=2).random(4))


def test_resolve_threads(monkeypatch):
    monkeypatch.setenv("RQC_SIM_THREADS", "3")
    assert resolve_threads() == 3
    assert resolve_threads(2) == 2
    monkeypatch.delenv("RQC_SIM_THREADS")
    assert resolve_threads() >= 1


def test_run_chunks_order_and_thread_independence():
    fn = lambda lo, hi: list(range(lo, hi))
    one = run_chunks(fn, 10_000, threads=1, chunk=777)
    many = run_chunks(fn, 10_000, threads=5, chunk=777)
    assert one == many
    assert [x for part in one for x in part] == list(range(10_000))
    assert run_chunks(fn, 0) == []
