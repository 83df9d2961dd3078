"""Adaptive composite Gauss-Legendre quadrature for smooth integrands."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import NumericalError


@lru_cache(maxsize=None)
def _nodes(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


def gauss_legendre(f, a: float, b: float, order: int = 20) -> float:
    """Fixed-order rule on ``[a, b]``; ``f`` must accept a numpy array."""
    x, w = _nodes(order)
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    return float(half * np.dot(w, f(mid + half * x)))


@dataclass(frozen=True)
class QuadResult:
    value: float
    error_estimate: float
    panels: int
    evaluations: int


def adaptive_gauss_legendre(
    f,
    a: float,
    b: float,
    tol: float = 1e-10,
    order: int = 15,
    initial_panels: int = 1,
    max_panels: int = 20000,
    breakpoints=(),
) -> QuadResult:
    """Integrate ``f`` over ``[a, b]`` to absolute tolerance ``tol``.

    Each panel is compared with its two halves; a panel is accepted when the
    difference is below its share of ``tol`` (proportional to its width).
    ``breakpoints`` are interior points where ``f`` may have a kink.

    Raises ``NumericalError`` if ``max_panels`` is exhausted.
    """
    if b < a:
        res = adaptive_gauss_legendre(f, b, a, tol, order, initial_panels, max_panels, breakpoints)
        return QuadResult(-res.value, res.error_estimate, res.panels, res.evaluations)
    if b == a:
        return QuadResult(0.0, 0.0, 0, 0)

    cuts = sorted({a, b, *[p for p in breakpoints if a < p < b]})
    stack = []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        edges = np.linspace(lo, hi, initial_panels + 1)
        stack.extend(zip(edges[:-1], edges[1:]))

    width = b - a
    total = 0.0
    err_total = 0.0
    accepted = 0
    evals = 0
    while stack:
        lo, hi = stack.pop()
        mid = 0.5 * (lo + hi)
        whole = gauss_legendre(f, lo, hi, order)
        left = gauss_legendre(f, lo, mid, order)
        right = gauss_legendre(f, mid, hi, order)
        evals += 3 * order
        diff = abs(whole - (left + right))
        if diff <= tol * (hi - lo) / width or hi - lo < 1e-15 * width:
            total += left + right
            err_total += diff
            accepted += 1
        else:
            stack.append((lo, mid))
            stack.append((mid, hi))
        if accepted + len(stack) > max_panels:
            raise NumericalError(
                "adaptive quadrature did not converge",
                {"interval": (a, b), "tol": tol, "panels": accepted + len(stack), "partial": total},
            )
    return QuadResult(total, err_total, accepted, evals)
