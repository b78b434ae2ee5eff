"""Closed-form Green functions of the symmetric alpha-stable process on the line.

All kernels are written for the process with characteristic exponent |u|^alpha,
1 < alpha < 2.  Functions accept scalars or numpy arrays and broadcast.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import beta as beta_fn
from scipy.special import gamma

from .quadrature import QuadratureError, checked, integrate, integrate_tail, unit_rule


class KernelDomainError(ValueError):
    """Argument outside the domain on which a kernel formula is defined."""


@dataclass(frozen=True)
class Alpha:
    """Stability index, restricted to the open interval (1, 2)."""

    value: float

    def __post_init__(self):
        v = float(self.value)
        if not (1.0 < v < 2.0) or math.isnan(v):
            raise KernelDomainError(f"ALPHA_RANGE: alpha must lie in (1, 2), got {self.value!r}")
        object.__setattr__(self, "value", v)

    def __float__(self) -> float:
        return self.value


def _alpha(alpha) -> float:
    if isinstance(alpha, Alpha):
        return alpha.value
    return Alpha(alpha).value


@dataclass(frozen=True)
class KernelConstants:
    omega_alpha: float
    c_alpha: float
    k_alpha: float


def omega_alpha(alpha) -> float:
    """omega_alpha = -1 / (cos(pi alpha / 2) Gamma(alpha))."""
    a = _alpha(alpha)
    return -1.0 / (math.cos(math.pi * a / 2.0) * gamma(a))


def c_alpha(alpha) -> float:
    a = _alpha(alpha)
    return 2.0 ** (1.0 - a) / gamma(a / 2.0) ** 2


def kernel_constants(alpha) -> KernelConstants:
    return KernelConstants(omega_alpha(alpha), c_alpha(alpha), k_alpha_constant(alpha))


def green_point_killed(alpha, x, y):
    """Green function of the process killed on hitting the origin.

    Vanishes when either argument is 0 and is bounded by
    omega_alpha * min(|x|, |y|)^(alpha-1).
    """
    a = _alpha(alpha)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    p = a - 1.0
    out = 0.5 * omega_alpha(a) * (np.abs(y) ** p + np.abs(x) ** p - np.abs(y - x) ** p)
    return out if out.ndim else float(out)


# h is evaluated through z = 1 + u^(2/alpha), which turns the (z-1)^(alpha/2-1)
# endpoint singularity into the bounded integrand (2/alpha)(2 + u^(2/alpha))^(alpha/2-1).
_H_RULE = dict(levels=24, ratio=0.2, ends="left", order=16)
_CHUNK = 4096


def _h_unit(a: float, r: np.ndarray) -> np.ndarray:
    s, w = unit_rule(**_H_RULE)
    half = a / 2.0
    upper = (r - 1.0) ** half
    out = np.empty_like(upper)
    for i in range(0, upper.size, _CHUNK):
        u = upper[i:i + _CHUNK, None] * s[None, :]
        vals = (2.0 + u ** (2.0 / a)) ** (half - 1.0)
        out[i:i + _CHUNK] = upper[i:i + _CHUNK] * (vals @ w)
    return (2.0 / a) * out


def h_function(alpha, x):
    """h(x) = int_1^|x| (z^2 - 1)^(alpha/2 - 1) dz for |x| >= 1."""
    a = _alpha(alpha)
    r = np.abs(np.asarray(x, dtype=float))
    if np.any(r < 1.0) or np.any(np.isnan(r)):
        raise KernelDomainError("h_function needs |x| >= 1")
    out = _h_unit(a, r.ravel()).reshape(r.shape)
    return out if out.ndim else float(out)


def _k_integral(a: float, order: int) -> float:
    # int_1^inf (v^2-1)^(a/2-1) / (1+v) dv, split at v=2
    half = a / 2.0

    def head(u):
        v = 1.0 + u ** (1.0 / half)
        return (v + 1.0) ** (half - 2.0) / half

    s_max = 0.5 ** (2.0 - a)

    def tail(s):
        u = s ** (1.0 / (2.0 - a))
        return (1.0 - u * u) ** (half - 1.0) / (1.0 + u) / (2.0 - a)

    return (integrate(head, 0.0, 1.0, ends="left", order=order)
            + integrate(tail, 0.0, s_max, ends="left", order=order))


@lru_cache(maxsize=128)
def k_alpha_constant(alpha) -> float:
    """The constant K_alpha as defined from c_alpha and int_1^inf h'(v)/(1+v) dv.

    Raises QuadratureError when two rule orders disagree beyond 1e-12.
    """
    a = _alpha(alpha)
    integral = checked(lambda order: _k_integral(a, order), 1e-12, "K_alpha integral",
                       orders=(24, 36))
    pref = 2.0 * c_alpha(a) * (1.0 - a / 2.0) * gamma(a / 2.0) / gamma(1.0 - a / 2.0)
    return pref * integral


def k_alpha_integral_closed_form(alpha) -> float:
    """int_1^inf h'(v)/(1+v) dv = 2^(alpha-2) B(alpha/2, 2-alpha)."""
    a = _alpha(alpha)
    return 2.0 ** (a - 2.0) * beta_fn(a / 2.0, 2.0 - a)


@lru_cache(maxsize=128)
def exterior_limit_constant(alpha) -> float:
    """lim_{x->inf} G^{[-1,1]^c}(x, y) / h(y), computed directly from the exterior formula.

    Expanding the exterior kernel for large x shows the limit equals
    c_alpha (alpha-1) C_h with C_h = lim (x^(alpha-1)/(alpha-1) - h(x)).
    """
    a = _alpha(alpha)
    half = a / 2.0

    def excess(z):
        return z ** (a - 2.0) * -np.expm1((half - 1.0) * np.log1p(-1.0 / (z * z)))

    def rule(order):
        return integrate_tail(excess, 2.0, order=order)

    tail = checked(rule, 1e-12, "C_h tail")
    c_h = 2.0 ** (a - 1.0) / (a - 1.0) - h_function(a, 2.0) + tail
    return c_alpha(a) * (a - 1.0) * c_h


def _exterior_args(x, y, radius: float):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(np.abs(x) <= radius) or np.any(np.abs(y) <= radius):
        raise KernelDomainError(f"exterior kernel needs |x|, |y| > {radius}")
    if np.any(x == y):
        raise KernelDomainError("exterior kernel is not evaluated on the diagonal x == y")
    return np.broadcast_arrays(x, y)


def _exterior_unit(a: float, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    d = np.abs(x - y)
    w = np.maximum(np.abs(x * y - 1.0) / d, 1.0)
    flat = np.concatenate([w.ravel(), x.ravel(), y.ravel()])
    hw, hx, hy = np.split(_h_unit(a, np.abs(flat)), 3)
    val = d.ravel() ** (a - 1.0) * hw - (a - 1.0) * hx * hy
    return np.maximum(c_alpha(a) * val, 0.0).reshape(w.shape)


def green_exterior_unit(alpha, x, y):
    """Green function of the process killed on entering [-1, 1]."""
    a = _alpha(alpha)
    x, y = _exterior_args(x, y, 1.0)
    out = _exterior_unit(a, x, y)
    return out if out.ndim else float(out)


def green_exterior(alpha, R, x, y):
    """Green function of the process killed on entering [-R, R], by self-similarity."""
    a = _alpha(alpha)
    if not R > 0:
        raise KernelDomainError("R must be positive")
    x, y = _exterior_args(x, y, R)
    out = R ** (a - 1.0) * _exterior_unit(a, x / R, y / R)
    return out if out.ndim else float(out)


def green_interval_at_zero(alpha, R, x):
    """G^{(-R,R)}(x, 0) for the process killed on leaving (-R, R)."""
    a = _alpha(alpha)
    if not R > 0:
        raise KernelDomainError("R must be positive")
    x = np.abs(np.asarray(x, dtype=float))
    if np.any(x >= R):
        raise KernelDomainError("green_interval_at_zero needs |x| < R")
    c = c_alpha(a)
    out = np.empty_like(x)
    at0 = x == 0.0
    out[at0] = c * R ** (a - 1.0) / (a - 1.0)
    xs = x[~at0]
    if xs.size:
        # the integrand (s+1)^(a/2-1)(s-1)^(a/2-1) is h's integrand
        out[~at0] = c * xs ** (a - 1.0) * _h_unit(a, R / xs)
    return out if out.ndim else float(out)


def hitting_zero_probability(alpha, R, x):
    """P_x[hit 0 before leaving (-R, R)] as the ratio of interval Green values."""
    a = _alpha(alpha)
    num = green_interval_at_zero(a, R, x)
    den = green_interval_at_zero(a, R, 0.0)
    out = np.clip(np.asarray(num) / den, 0.0, 1.0)
    return out if out.ndim else float(out)


__all__ = [
    "Alpha", "KernelConstants", "KernelDomainError", "QuadratureError",
    "omega_alpha", "c_alpha", "kernel_constants", "green_point_killed", "h_function",
    "k_alpha_constant", "k_alpha_integral_closed_form", "exterior_limit_constant",
    "green_exterior_unit", "green_exterior", "green_interval_at_zero",
    "hitting_zero_probability",
]
