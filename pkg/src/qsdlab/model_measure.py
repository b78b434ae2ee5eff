"""The coefficient sigma, the speed measure mu(dx) = sigma(x)^-alpha dx, and the
entrance-from-infinity functionals built on mu.

Divergence of the tail functionals is decided from the tail exponent of the
speed density, never from a quadrature value.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import minimize_scalar

from .quadrature import integrate, integrate_tail
from .stable_kernels import Alpha, KernelDomainError, green_exterior_unit, omega_alpha

DIVERGENT = math.inf
# slopes closer than this to the critical value cannot be classified from a table
_SLOPE_TOL = 1e-6


class ProfileError(ValueError):
    """Invalid coefficient profile."""


class IndeterminateTail(ArithmeticError):
    """Tail class of a tabulated profile cannot be decided from its extrapolation."""

    def __init__(self, partial: float, truncation: float):
        super().__init__(f"INDETERMINATE: partial integral {partial:.6g} up to |x| = {truncation:.6g}")
        self.partial = partial
        self.truncation = truncation


@dataclass(frozen=True)
class SigmaProfile:
    """sigma on the real line together with its normalised speed density.

    ``kind`` is ``"polynomial"`` (sigma = scale (1+|x|)^gamma) or ``"tabulated"``
    (log sigma interpolated linearly between samples, power law beyond them).
    """

    alpha: float
    kind: str
    scale: float
    gamma: float | None = None
    table_x: np.ndarray | None = field(default=None, repr=False)
    table_log_sigma: np.ndarray | None = field(default=None, repr=False)
    slope_left: float | None = None
    slope_right: float | None = None

    def sigma(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "polynomial":
            out = self.scale * (1.0 + np.abs(x)) ** self.gamma
        else:
            out = self.scale * np.exp(self._log_sigma_raw(x))
        return out if out.ndim else float(out)

    def speed_density(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "polynomial":
            a, g = self.alpha, self.gamma
            out = 0.5 * (a * g - 1.0) * (1.0 + np.abs(x)) ** (-a * g)
        else:
            out = self.scale ** -self.alpha * np.exp(-self.alpha * self._log_sigma_raw(x))
        return out if out.ndim else float(out)

    def _log_sigma_raw(self, x):
        tx, tl = self.table_x, self.table_log_sigma
        out = np.interp(x, tx, tl)
        right = x > tx[-1]
        left = x < tx[0]
        out = np.where(right, tl[-1] + self.slope_right * np.log(np.where(right, x, 1.0) / tx[-1]), out)
        out = np.where(left, tl[0] + self.slope_left * np.log(np.where(left, x, -1.0) / tx[0]), out)
        return out

    @property
    def is_even(self) -> bool:
        if self.kind == "polynomial":
            return True
        tx, tl = self.table_x, self.table_log_sigma
        return bool(np.array_equal(tx, -tx[::-1]) and np.array_equal(tl, tl[::-1]))

    def tail_exponents(self) -> tuple[float, float]:
        """Decay exponents p with speed density ~ |x|^-p at -inf and +inf."""
        if self.kind == "polynomial":
            p = self.alpha * self.gamma
            return p, p
        return self.alpha * self.slope_left, self.alpha * self.slope_right

    def integrate(self, f, a: float = 0.0, growth: float = 0.0) -> float:
        """int_{|y| >= a} f(y) mu(dy) for a vectorised ``f`` growing like |y|^growth."""
        dens = self.speed_density
        p_left, p_right = self.tail_exponents()

        def side(sign):
            def g(y):
                return f(sign * y) * dens(sign * y)

            decay = (p_right if sign > 0 else p_left) - growth
            if self.kind == "polynomial":
                return integrate_tail(g, a, decay=decay)
            knots = np.abs(self.table_x[np.sign(self.table_x) == sign])
            knots = np.sort(knots[knots > a])
            edges = np.concatenate(([a], knots))
            total = sum(integrate(g, lo, hi) for lo, hi in zip(edges[:-1], edges[1:]))
            return total + integrate_tail(g, edges[-1], decay=decay)

        return side(1.0) + side(-1.0)

    def tail_mass(self, x):
        """mu(|y| >= x) for x >= 0."""
        x = np.asarray(x, dtype=float)
        if self.kind == "polynomial":
            out = (1.0 + x) ** (1.0 - self.alpha * self.gamma)
        else:
            out = np.array([self.integrate(np.ones_like, float(v)) for v in x.ravel()]).reshape(x.shape)
        return out if out.ndim else float(out)

    def quantile_abs(self, q: float) -> float:
        """The radius r with mu(|y| >= r) = 1 - q."""
        if self.kind == "polynomial":
            return (1.0 - q) ** (1.0 / (1.0 - self.alpha * self.gamma)) - 1.0
        from scipy.optimize import brentq

        hi = 1.0
        while self.tail_mass(hi) > 1.0 - q:
            hi *= 4.0
        return brentq(lambda r: self.tail_mass(r) - (1.0 - q), 0.0, hi, xtol=1e-12)


def polynomial_sigma(alpha, gamma: float) -> SigmaProfile:
    """sigma(x) = (2/(alpha gamma - 1))^(1/alpha) (1+|x|)^gamma, making mu a probability."""
    a = Alpha(alpha).value if not isinstance(alpha, Alpha) else alpha.value
    g = float(gamma)
    if not a * g > 1.0:
        raise ProfileError(f"MU_NOT_FINITE: alpha*gamma = {a * g:g} <= 1, mu is not a finite measure")
    scale = (2.0 / (a * g - 1.0)) ** (1.0 / a)
    return SigmaProfile(alpha=a, kind="polynomial", scale=scale, gamma=g)


def tabulated_sigma(alpha, x, sigma) -> SigmaProfile:
    """Profile from samples (x_i, sigma_i), renormalised so that mu(R) = 1."""
    a = Alpha(alpha).value if not isinstance(alpha, Alpha) else alpha.value
    x = np.asarray(x, dtype=float)
    s = np.asarray(sigma, dtype=float)
    if x.ndim != 1 or x.shape != s.shape or x.size < 4:
        raise ProfileError("table needs at least four (x, sigma) rows")
    if np.any(np.diff(x) <= 0):
        raise ProfileError("table x must be strictly increasing")
    if np.any(s <= 0) or not np.all(np.isfinite(s)):
        raise ProfileError("table sigma must be finite and strictly positive")
    if not (x[1] < 0.0 < x[-2]):
        raise ProfileError("table must contain at least two samples on each side of 0")
    ls = np.log(s)
    right = (ls[-1] - ls[-2]) / math.log(x[-1] / x[-2])
    left = (ls[0] - ls[1]) / math.log(x[0] / x[1])
    raw = SigmaProfile(alpha=a, kind="tabulated", scale=1.0, table_x=x, table_log_sigma=ls,
                       slope_left=left, slope_right=right)
    p = raw.tail_exponents()
    if min(p) <= 1.0:
        raise ProfileError(f"MU_NOT_FINITE: extrapolated tail exponents {p} do not exceed 1")
    mass = raw.integrate(np.ones_like)
    return SigmaProfile(alpha=a, kind="tabulated", scale=mass ** (1.0 / a), table_x=x,
                        table_log_sigma=ls, slope_left=left, slope_right=right)


def load_sigma_table(alpha, path) -> SigmaProfile:
    """Read a whitespace separated two-column (x, sigma) file."""
    data = np.loadtxt(Path(path), dtype=float, ndmin=2)
    if data.shape[1] != 2:
        raise ProfileError(f"{path}: expected two columns, found {data.shape[1]}")
    return tabulated_sigma(alpha, data[:, 0], data[:, 1])


def _tail_class(profile: SigmaProfile, extra_power: float) -> str:
    """Class of int^inf |y|^extra_power mu(dy): 'finite', 'divergent' or 'indeterminate'."""
    crit = 1.0 + extra_power
    classes = []
    for p in profile.tail_exponents():
        if profile.kind == "tabulated" and abs(p - crit) < _SLOPE_TOL * profile.alpha:
            classes.append("indeterminate")
        else:
            classes.append("finite" if p > crit else "divergent")
    if "divergent" in classes:
        return "divergent"
    if "indeterminate" in classes:
        return "indeterminate"
    return "finite"


def _truncated(profile: SigmaProfile, power: float) -> IndeterminateTail:
    trunc = float(np.max(np.abs(profile.table_x)))
    inside = profile.integrate(lambda y: np.where(np.abs(y) <= trunc, np.abs(y) ** power, 0.0))  # zero tail
    return IndeterminateTail(inside, trunc)


def entrance_integral(profile: SigmaProfile) -> float:
    """I = int |x|^(alpha-1) mu(dx); ``DIVERGENT`` (inf) when the tail forbids it."""
    a = profile.alpha
    cls = _tail_class(profile, a - 1.0)
    if cls == "divergent":
        return DIVERGENT
    if cls == "indeterminate":
        raise _truncated(profile, a - 1.0)
    return profile.integrate(lambda y: np.abs(y) ** (a - 1.0), growth=a - 1.0)


def tail_entrance_integral(profile: SigmaProfile, R: float) -> float:
    """int_{|y| > R} |y|^(alpha-1) mu(dy)."""
    a = profile.alpha
    cls = _tail_class(profile, a - 1.0)
    if cls == "divergent":
        return DIVERGENT
    if cls == "indeterminate":
        raise _truncated(profile, a - 1.0)
    return profile.integrate(lambda y: np.abs(y) ** (a - 1.0), R, growth=a - 1.0)


def _delta_objective(profile: SigmaProfile):
    a = profile.alpha

    def phi(t):
        x = math.exp(t)
        return x ** (a - 1.0) * profile.tail_mass(x)

    return phi


def delta_search(profile: SigmaProfile, starts: int = 16) -> tuple[float, float]:
    """sup_x |x|^(alpha-1) mu(|y| >= |x|) and the maximiser (inf if approached at infinity).

    Golden-section on log x, started from the best of ``starts`` log-spaced samples
    and from every local maximum among them.
    """
    a = profile.alpha
    # phi(x) ~ x^(alpha - p) at infinity
    growth = [a - p for p in profile.tail_exponents()]
    if max(growth) > _SLOPE_TOL:
        return DIVERGENT, math.inf
    phi = _delta_objective(profile)
    centre = math.log(max(profile.quantile_abs(0.5), 1e-3))
    ts = centre + np.linspace(-14.0, 14.0, starts)
    vals = np.array([phi(t) for t in ts])
    best, best_x = float(vals.max()), float(math.exp(ts[vals.argmax()]))
    for k in range(1, starts - 1):
        if vals[k] >= vals[k - 1] and vals[k] >= vals[k + 1]:
            res = minimize_scalar(lambda t: -phi(t), bracket=(ts[k - 1], ts[k], ts[k + 1]),
                                  method="golden", tol=1e-10)
            if -res.fun > best:
                best, best_x = float(-res.fun), float(math.exp(res.x))
    if max(growth) > -_SLOPE_TOL:
        # critical tail: the supremum may only be approached at infinity
        far = phi(centre + 60.0)
        if far > best:
            best, best_x = far, math.inf
    return best, best_x


def delta_bound(profile: SigmaProfile) -> float:
    return delta_search(profile)[0]


def lambda0_lower_bound(profile: SigmaProfile) -> float:
    """(4 omega_alpha delta)^-1; 0.0 stands for "no bound" when delta diverges."""
    d = delta_bound(profile)
    if math.isinf(d):
        return 0.0
    return float(1.0 / (4.0 * omega_alpha(profile.alpha) * d))


def hitting_time_upper_bound(profile: SigmaProfile, R: float) -> float:
    """omega_alpha int_{|y|>R} |y|^(alpha-1) mu(dy), a bound on sup_x E_x[T_[-R,R]]."""
    if not R > 0:
        raise ValueError("R must be positive")
    return omega_alpha(profile.alpha) * tail_entrance_integral(profile, R)


def mean_hitting_time(profile: SigmaProfile, R: float, x: float) -> float:
    """E_x[T_[-R,R]] = int_{|y|>R} G^{[-R,R]^c}(x, y) mu(dy) for |x| > R."""
    if not R > 0:
        raise ValueError("R must be positive")
    if abs(x) <= R:
        raise KernelDomainError("mean_hitting_time needs |x| > R; the hitting time is 0 inside")
    a = profile.alpha
    # reflect so that x > R; the kernel satisfies G(x, y) = G(-x, -y).  Work in
    # units of R: G_R(x, R v) = R^(alpha-1) G_1(x/R, v).
    sign = 1.0 if x > 0 else -1.0
    xu = abs(x) / R

    def kernel(v):
        # nodes that round onto the diagonal or onto |v| = 1 are moved one ulp off;
        # the kernel is continuous at both
        v = np.where(v == xu, np.nextafter(xu, np.inf), v)
        v = np.where(np.abs(v) <= 1.0, np.copysign(np.nextafter(1.0, 2.0), v), v)
        return green_exterior_unit(a, xu, v)

    def near(v):
        return kernel(v) * profile.speed_density(sign * R * v)

    def far(v):
        return kernel(-v) * profile.speed_density(-sign * R * v)

    # the kernel grows like |v|^(alpha-1) at infinity
    p_left, p_right = profile.tail_exponents()
    p_near, p_far = (p_right, p_left) if sign > 0 else (p_left, p_right)
    g = dict(levels=16, ratio=0.2)
    total = (integrate(near, 1.0, xu, ends="both", **g)
             + integrate_tail(near, xu, decay=p_near - a + 1.0, **g)
             + integrate_tail(far, 1.0, decay=p_far - a + 1.0, **g))
    return R ** a * total


@dataclass(frozen=True)
class EntranceDiagnostics:
    entrance_integral: float
    delta: float
    delta_argmax: float
    lambda0_lower: float

    @property
    def entrance_finite(self) -> bool:
        return math.isfinite(self.entrance_integral)


def entrance_diagnostics(profile: SigmaProfile) -> EntranceDiagnostics:
    d, xs = delta_search(profile)
    bound = 0.0 if math.isinf(d) else float(1.0 / (4.0 * omega_alpha(profile.alpha) * d))
    return EntranceDiagnostics(entrance_integral(profile), d, xs, bound)


def polynomial_family_diagnostics(alpha, gamma: float) -> EntranceDiagnostics:
    """Entrance diagnostics for the polynomial family, including gamma with alpha*gamma <= 1.

    There the speed measure has infinite mass, so both tail functionals diverge.
    """
    a = Alpha(alpha).value
    if a * gamma <= 1.0:
        return EntranceDiagnostics(DIVERGENT, DIVERGENT, math.inf, 0.0)
    return entrance_diagnostics(polynomial_sigma(a, gamma))


__all__ = [
    "DIVERGENT", "ProfileError", "IndeterminateTail", "SigmaProfile", "polynomial_sigma",
    "tabulated_sigma", "load_sigma_table", "entrance_integral", "tail_entrance_integral",
    "delta_search", "delta_bound", "lambda0_lower_bound", "hitting_time_upper_bound",
    "mean_hitting_time", "EntranceDiagnostics", "entrance_diagnostics",
    "polynomial_family_diagnostics",
]
