"""Composite Gauss-Legendre rules on graded panels.

Every integral in the package that has an algebraic endpoint singularity is
pushed through one of these rules after a change of variables; geometric
grading towards the singular end keeps the convergence exponential.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np


class QuadratureError(RuntimeError):
    """Raised when two rule orders disagree by more than the requested tolerance."""

    def __init__(self, message: str, estimate: float):
        super().__init__(f"{message} (error estimate {estimate:.3e})")
        self.estimate = estimate


@lru_cache(maxsize=64)
def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    t, w = np.polynomial.legendre.leggauss(order)
    t.setflags(write=False)
    w.setflags(write=False)
    return t, w


def panel_rule(breaks, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the composite rule with one panel per gap in ``breaks``."""
    b = np.asarray(breaks, dtype=float)
    t, w = gauss_legendre(order)
    lo, hi = b[:-1, None], b[1:, None]
    half = 0.5 * (hi - lo)
    nodes = (0.5 * (hi + lo) + half * t).ravel()
    weights = (half * w).ravel()
    return nodes, weights


def graded_breaks(levels: int = 24, ratio: float = 0.2, ends: str = "left") -> np.ndarray:
    """Breakpoints on [0, 1] refined geometrically towards one or both ends."""
    g = ratio ** np.arange(levels, 0, -1)
    if ends == "left":
        return np.concatenate(([0.0], g, [1.0]))
    if ends == "right":
        return np.concatenate(([0.0], 1.0 - g[::-1], [1.0]))
    if ends == "both":
        half = 0.5 * g
        return np.concatenate(([0.0], half, 1.0 - half[::-1], [1.0]))
    raise ValueError(f"unknown grading {ends!r}")


@lru_cache(maxsize=32)
def unit_rule(levels: int, ratio: float, ends: str, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Cached graded rule on [0, 1]."""
    s, _, w = _unit_rule_with_complement(levels, ratio, ends, order)
    return s, w


@lru_cache(maxsize=32)
def _unit_rule_with_complement(levels, ratio, ends, order):
    if ends == "both":
        # build the left half and mirror it so that 1 - s stays exact near s = 1
        sl, wl = panel_rule(0.5 * graded_breaks(levels, ratio, "left"), order)
        s = np.concatenate([sl, 1.0 - sl[::-1]])
        d = np.concatenate([1.0 - sl, sl[::-1]])
        w = np.concatenate([wl, wl[::-1]])
    else:
        s, w = panel_rule(graded_breaks(levels, ratio, ends), order)
        d = 1.0 - s
    for arr in (s, d, w):
        arr.setflags(write=False)
    return s, d, w


def integrate(f, a: float, b: float, *, ends: str = "both", levels: int = 30,
              ratio: float = 0.25, order: int = 20) -> float:
    """Integrate a vectorised ``f`` over the finite interval [a, b]."""
    s, w = unit_rule(levels, ratio, ends, order)
    x = a + (b - a) * s
    return float((b - a) * np.dot(w, f(x)))


def integrate_tail(f, a: float, *, decay: float | None = None, levels: int = 40, ratio: float = 0.3,
                   order: int = 20) -> float:
    """Integrate ``f`` over [a, inf).

    Without ``decay`` the map is y = a + u/(1-u).  The mapped integrand typically
    behaves like a power of (1-u) at u=1 and, when ``a`` is a zero of the
    integrand, like a power of u at u=0, so both ends are graded.

    With ``decay = p > 1``, meaning f(y) ~ C y^-p, the map is
    t = (1 + y - a)^-(p-1), under which a power tail becomes bounded.  This keeps
    slowly decaying tails (p close to 1) accurate.
    """
    s, d, w = _unit_rule_with_complement(levels, ratio, "both", order)
    if decay is None:
        y = a + s / d
        jac = 1.0 / d ** 2
        return float(np.dot(w, f(y) * jac))
    q = float(decay) - 1.0
    if not q > 0:
        raise ValueError(f"decay exponent must exceed 1, got {decay}")
    # t = s runs from 0 (y = inf) to 1 (y = a); d = 1 - s keeps y - a exact near a
    with np.errstate(divide="ignore"):
        grow = -np.log1p(-d) / q  # = log(1 + y - a)
    # beyond y ~ e^600 the mapped integrand is flat up to O(t^(1/q)); reuse the value there
    grow = np.minimum(grow, 600.0 / (q + 1.0))
    y = a + np.expm1(grow)
    jac = np.exp(grow * (q + 1.0)) / q
    return float(np.dot(w, f(y) * jac))


def checked(rule, tol: float, what: str, orders=(16, 24)) -> float:
    """Evaluate ``rule(order)`` at two orders and raise if they disagree."""
    coarse = rule(orders[0])
    fine = rule(orders[1])
    est = abs(fine - coarse)
    if est > tol * max(1.0, abs(fine)):
        raise QuadratureError(f"{what} did not converge", est)
    return fine
