"""Nystrom discretisation of the Green operator of the process killed at 0.

The operator (G f)(x) = int G^0(x, y) f(y) mu(dy) acts on L^2(mu).  On a
symmetric composite Gauss-Legendre grid with mu-weights w it becomes the
symmetric matrix A = diag(sqrt w) G^0 diag(sqrt w); eigenvalues of A are the
reciprocals of the generator eigenvalues lambda_n.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import _io
from .model_measure import SigmaProfile, entrance_integral, hitting_time_upper_bound
from .quadrature import gauss_legendre, integrate, integrate_tail
from .stable_kernels import green_point_killed, omega_alpha

NOISE_FLOOR = 1e-10
TAIL_TARGET = 1e-8


class SpectralError(RuntimeError):
    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code


class TruncationWarning(UserWarning):
    """TRUNCATION_WARNING: the last retained mode is not negligible."""


@dataclass(frozen=True)
class QuadratureGrid:
    nodes: np.ndarray
    weights: np.ndarray
    L: float
    tail_error: float

    @property
    def size(self) -> int:
        return self.nodes.size

    def mirror_index(self) -> np.ndarray:
        return np.arange(self.size)[::-1]

    def nearest(self, x: float) -> int:
        return int(np.argmin(np.abs(self.nodes - x)))


@dataclass(frozen=True)
class DiscretizedOperator:
    grid: QuadratureGrid
    matrix: np.ndarray = field(repr=False)
    alpha: float


@dataclass(frozen=True)
class SpectralDecomposition:
    grid: QuadratureGrid
    alpha: float
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray = field(repr=False)  # psi_n at the nodes, column n
    hs_norm: float
    operator: DiscretizedOperator = field(repr=False)

    @property
    def lambda0(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def gap(self) -> float:
        return float(self.eigenvalues[1] - self.eigenvalues[0])

    @property
    def psi0(self) -> np.ndarray:
        return self.eigenvectors[:, 0]

    def mu_inner(self, f, g) -> float:
        return float(np.sum(self.grid.weights * f * g))


@dataclass(frozen=True)
class QsdResult:
    density: np.ndarray  # d nu / d mu at the nodes
    normalizer: float  # mu(psi_0)

    def masses(self, grid: QuadratureGrid) -> np.ndarray:
        return self.density * grid.weights


@dataclass(frozen=True)
class QedResult:
    density: np.ndarray  # d m / d mu = psi_0^2

    def masses(self, grid: QuadratureGrid) -> np.ndarray:
        return self.density * grid.weights


def _log_breaks(npan: int, lo: float, L: float, core: float) -> np.ndarray:
    # inverse CDF of a log-space density: flat floor plus a bump around the core scale
    z = np.linspace(math.log(lo), math.log(L), 4000)
    dens = 0.15 + np.exp(-0.5 * ((z - math.log(core)) / 2.0) ** 2)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(z))])
    cdf /= cdf[-1]
    return np.exp(np.interp(np.linspace(0.0, 1.0, npan), cdf, z))


def auto_truncation(profile: SigmaProfile, target: float = TAIL_TARGET) -> float:
    """Smallest L (to bisection accuracy) with omega int_{|y|>L} |y|^(alpha-1) dmu < target."""
    def excess(logL):
        return math.log(hitting_time_upper_bound(profile, math.exp(logL))) - math.log(target)

    hi = 1.0
    while excess(math.log(hi)) > 0:
        hi *= 8.0
        if hi > 1e300:
            raise SpectralError("TRUNCATION", "tail bound does not reach the target")
    lo = hi / 8.0
    if excess(math.log(lo)) <= 0:
        return lo
    return math.exp(brentq(excess, math.log(lo), math.log(hi), xtol=1e-6))


def build_grid(profile: SigmaProfile, n: int = 400, L: float | str = "auto", *,
               order: int = 4, inner: float = 1e-6) -> QuadratureGrid:
    """Symmetric panel grid on [-L, L] without the origin, n nodes in total.

    Panels are graded logarithmically between ``inner`` and L, concentrated
    around the scale where mu(|y| >= r) = 1/4, plus one panel [0, inner*core] per
    side.  When n/2 is not a multiple of ``order`` the leftover nodes form one
    lower-order panel at L.
    """
    if n < 16 or n % 2:
        raise ValueError("n must be an even count >= 16")
    if math.isinf(entrance_integral(profile)):
        raise SpectralError("DIVERGENT_ENTRANCE",
                            "entrance integral diverges; the Green operator is not Hilbert-Schmidt")
    if isinstance(L, str):
        if L.lower() != "auto":
            raise ValueError(f"L must be positive or 'auto', got {L!r}")
        L = auto_truncation(profile)
    L = float(L)
    if not L > inner:
        raise ValueError("truncation L must exceed the inner panel size")
    half = n // 2
    npan, rest = divmod(half, order)
    orders = [order] * npan + ([rest] if rest else [])
    core = profile.quantile_abs(0.75)
    brk = np.concatenate([[0.0], _log_breaks(len(orders), inner * core, L, core)])
    xs, ws = [], []
    for k, (a, b) in zip(orders, zip(brk[:-1], brk[1:])):
        t, w = gauss_legendre(k)
        xs.append(0.5 * (a + b) + 0.5 * (b - a) * t)
        ws.append(0.5 * (b - a) * w)
    x, wx = np.concatenate(xs), np.concatenate(ws)
    nodes = np.concatenate([-x[::-1], x])
    weights = np.concatenate([wx[::-1], wx]) * profile.speed_density(np.concatenate([-x[::-1], x]))
    tail = hitting_time_upper_bound(profile, L)
    return QuadratureGrid(nodes, weights, L, float(tail))


def assemble_operator(grid: QuadratureGrid, profile: SigmaProfile) -> DiscretizedOperator:
    s = np.sqrt(grid.weights)
    x = grid.nodes
    g = green_point_killed(profile.alpha, x[:, None], x[None, :])
    a = s[:, None] * g * s[None, :]
    # the kernel formula is symmetric up to the order of additions; make it exact
    a = np.triu(a) + np.triu(a, 1).T
    return DiscretizedOperator(grid, a, profile.alpha)


def hs_norm(op: DiscretizedOperator) -> float:
    return float(np.linalg.norm(op.matrix, "fro"))


def eigendecompose(op: DiscretizedOperator) -> SpectralDecomposition:
    kappa, vec = np.linalg.eigh(op.matrix)
    kappa, vec = kappa[::-1], vec[:, ::-1]
    if not kappa[0] > 0:
        raise SpectralError("NONPOSITIVE_SPECTRUM", f"largest Green eigenvalue {kappa[0]:.3e} <= 0")
    if kappa[-1] < -NOISE_FLOOR:
        raise SpectralError("NONPOSITIVE_SPECTRUM", f"Green eigenvalue {kappa[-1]:.3e} below the noise floor")
    keep = kappa > 0.0
    kappa, vec = kappa[keep], vec[:, keep]
    lam = 1.0 / kappa
    if lam.size < 2 or lam[1] - lam[0] < 1e-8:
        raise SpectralError("DEGENERATE_GAP", "lambda_1 - lambda_0 < 1e-8")
    s = np.sqrt(op.grid.weights)
    psi = vec / s[:, None]
    # sign: positive mu-mean where it is resolvable, otherwise the largest component positive
    means = vec.T @ s
    big = vec[np.argmax(np.abs(vec), axis=0), np.arange(vec.shape[1])]
    ref = np.where(np.abs(means) > 1e-8, means, big)
    psi *= np.where(ref < 0, -1.0, 1.0)[None, :]
    return SpectralDecomposition(op.grid, op.alpha, lam, psi, hs_norm(op), op)


def solve(profile: SigmaProfile, n: int = 400, L: float | str = "auto") -> SpectralDecomposition:
    grid = build_grid(profile, n, L)
    return eigendecompose(assemble_operator(grid, profile))


def ground_state_residual(dec: SpectralDecomposition, vector: np.ndarray | None = None,
                          lam: float | None = None) -> float:
    """L^2(mu) norm of G psi - psi / lambda on the grid (psi_0 by default)."""
    psi = dec.psi0 if vector is None else np.asarray(vector, dtype=float)
    lam = dec.lambda0 if lam is None else lam
    s = np.sqrt(dec.grid.weights)
    v = s * psi
    return float(np.linalg.norm(dec.operator.matrix @ v - v / lam))


def qsd(dec: SpectralDecomposition) -> QsdResult:
    psi = dec.psi0
    if np.any(psi <= 0):
        raise SpectralError("SIGN", "ground state is not strictly positive on the grid")
    z = float(np.sum(dec.grid.weights * psi))
    return QsdResult(psi / z, z)


def qed(dec: SpectralDecomposition) -> QedResult:
    return QedResult(dec.psi0 ** 2)


def parity_defect(dec: SpectralDecomposition, k: int, odd: bool = False) -> float:
    """max_i |psi_k(x_i) -+ psi_k(-x_i)| on the mirrored grid."""
    v = dec.eigenvectors[:, k]
    m = v[dec.grid.mirror_index()]
    return float(np.max(np.abs(v + m if odd else v - m)))


def _modes(dec: SpectralDecomposition, modes: int | None) -> int:
    total = dec.eigenvalues.size
    return total if modes is None else max(1, min(int(modes), total))


def survival_scaled(dec: SpectralDecomposition, times, modes: int | None = None) -> np.ndarray:
    """e^(lambda_0 t) P_x[t < T_0] at every node; rows follow ``times``."""
    t = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(t < 0):
        raise ValueError("times must be nonnegative")
    N = _modes(dec, modes)
    lam = dec.eigenvalues[:N]
    psi = dec.eigenvectors[:, :N]
    c = dec.grid.weights @ psi
    decay = np.exp(-np.outer(t, lam - lam[0]))
    terms = decay * c[None, :]
    if N < dec.eigenvalues.size:
        last = np.abs(terms[:, -1]) * np.abs(psi[:, -1]).max()
        total = np.abs(terms @ psi.T).max(axis=1)
        if np.any(last > 1e-12 * total):
            warnings.warn("TRUNCATION_WARNING: last retained mode exceeds 1e-12 of the sum",
                          TruncationWarning, stacklevel=2)
    return terms @ psi.T


def semigroup_survival(dec: SpectralDecomposition, t: float, x: int, modes: int | None = None) -> float:
    """P_x[t < T_0] at node index ``x`` from the truncated spectral expansion."""
    s = survival_scaled(dec, [t], modes)[0, x]
    return float(math.exp(-dec.lambda0 * t) * s)


def qsd_exit_law(dec: SpectralDecomposition, times) -> np.ndarray:
    """P_nu[t < T_0] = int survival(t, .) d nu on the grid."""
    t = np.atleast_1d(np.asarray(times, dtype=float))
    nu = qsd(dec).masses(dec.grid)
    return np.exp(-dec.lambda0 * t) * (survival_scaled(dec, t) @ nu)


def uniform_decay_rate(dec: SpectralDecomposition, t: float, modes: int | None = None) -> float:
    """-(1/t) log sup_x P_x[t < T_0] over the nodes."""
    if not t > 0:
        raise ValueError("t must be positive")
    sup = survival_scaled(dec, [t], modes)[0].max()
    return float(dec.lambda0 - math.log(sup) / t)


@dataclass(frozen=True)
class YaglomCurve:
    node: int
    times: np.ndarray
    tv: np.ndarray
    last_trusted: float


def conditioned_masses(dec: SpectralDecomposition, x: int, t: float, modes: int | None = None) -> np.ndarray:
    """Grid masses of P_x[Y_t in . | t < T_0]."""
    N = _modes(dec, modes)
    lam = dec.eigenvalues[:N]
    psi = dec.eigenvectors[:, :N]
    dens = psi @ (np.exp(-(lam - lam[0]) * t) * psi[x])
    m = dens * dec.grid.weights
    return m / m.sum()


def yaglom_tv_curve(dec: SpectralDecomposition, x: int, times, modes: int | None = None) -> YaglomCurve:
    """TV distance (half L1 over grid cells) between the conditioned law from node x and nu."""
    t = np.asarray(times, dtype=float)
    if np.any(np.diff(t) <= 0):
        raise ValueError("times must be strictly ascending")
    nu = qsd(dec).masses(dec.grid)
    tv = np.array([0.5 * np.abs(conditioned_masses(dec, x, ti, modes) - nu).sum() for ti in t])
    # below ~1e-12 the distance is rounding noise in the mode sums
    ok = tv > 1e-12
    last = float(t[ok][-1]) if ok.any() else float(t[0])
    return YaglomCurve(x, t, tv, last)


def fit_log_slope(times, values) -> float:
    t = np.asarray(times, dtype=float)
    y = np.log(np.asarray(values, dtype=float))
    return float(np.polyfit(t, y, 1)[0])


def yaglom_rate(dec: SpectralDecomposition, x: int, points: int = 41) -> float:
    """Fitted log-TV slope over t in [5/lambda_1, 15/lambda_1]."""
    l1 = float(dec.eigenvalues[1])
    curve = yaglom_tv_curve(dec, x, np.linspace(5.0 / l1, 15.0 / l1, points))
    keep = curve.times <= curve.last_trusted
    return fit_log_slope(curve.times[keep], curve.tv[keep])


def heat_kernel_diagonal(dec: SpectralDecomposition, t: float = 2.0) -> np.ndarray:
    """Truncated sum_n e^(-lambda_n t) psi_n(x)^2 at the nodes (a proxy, not a certificate)."""
    lam = dec.eigenvalues
    return (dec.eigenvectors ** 2) @ np.exp(-lam * t)


def interpolate_mode(dec: SpectralDecomposition, k: int, x) -> np.ndarray:
    """psi_k off the grid through the eigen-identity psi = lambda int G^0(., y) psi(y) mu(dy)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    wpsi = dec.grid.weights * dec.eigenvectors[:, k]
    out = np.empty_like(x)
    for i in range(0, x.size, 512):
        g = green_point_killed(dec.alpha, x[i:i + 512, None], dec.grid.nodes[None, :])
        out[i:i + 512] = dec.eigenvalues[k] * (g @ wpsi)
    return out


def law_bin_masses(dec: SpectralDecomposition, profile: SigmaProfile, edges, which: str = "qsd") -> np.ndarray:
    """Masses of nu (``"qsd"``) or m (``"qed"``) on the bins between ``edges`` (may be +-inf).

    The interpolated ground state has a weak cusp at every grid node, so the
    quadrature is split at the nodes as well as at the bin edges.
    """
    e = np.asarray(edges, dtype=float)
    if np.any(np.diff(e) <= 0):
        raise ValueError("edges must be strictly increasing")
    power = {"qsd": 1, "qed": 2}[which]

    def f(y):
        return interpolate_mode(dec, 0, y) ** power * profile.speed_density(y)

    L = dec.grid.L
    inner = e[np.isfinite(e)]
    cuts = np.unique(np.concatenate([dec.grid.nodes, inner, [0.0, -L, L]]))
    cuts = cuts[(cuts >= -L) & (cuts <= L)]
    rule = dict(levels=4, ratio=0.15, order=8)
    mids = 0.5 * (cuts[:-1] + cuts[1:])
    piece = np.array([integrate(f, a, b, **rule) for a, b in zip(cuts[:-1], cuts[1:])])
    tail_rule = dict(levels=20, ratio=0.3, order=12)
    left = integrate_tail(lambda u: f(-u), L, **tail_rule)
    right = integrate_tail(f, L, **tail_rule)
    # attribute each piece to the bin containing its midpoint, tails to the outer bins
    which_bin = np.clip(np.searchsorted(e, mids, side="right") - 1, 0, e.size - 2)
    out = np.bincount(which_bin, weights=piece, minlength=e.size - 1)
    out[np.clip(np.searchsorted(e, -L, side="right") - 1, 0, e.size - 2)] += left
    out[np.clip(np.searchsorted(e, L, side="left") - 1, 0, e.size - 2)] += right
    # normalise by the continuous total, which differs from the grid sum by discretisation error
    return out / out.sum()


def law_quantile_edges(dec: SpectralDecomposition, bins: int, which: str = "qsd") -> np.ndarray:
    """Bin edges at equal-mass quantiles of the discrete law, with infinite outer edges."""
    masses = (qsd(dec).masses(dec.grid) if which == "qsd" else qed(dec).masses(dec.grid))
    cdf = np.cumsum(masses) - 0.5 * masses
    inner = np.interp(np.arange(1, bins) / bins, cdf, dec.grid.nodes)
    return np.concatenate([[-np.inf], inner, [np.inf]])


@dataclass(frozen=True)
class ConvergenceReport:
    n: int
    eigenvalues_coarse: np.ndarray
    eigenvalues_fine: np.ndarray
    relative_change: np.ndarray  # k = 0, 1, 2
    psi0_change: float


def refine_and_compare(profile: SigmaProfile, n: int = 400, L: float | str = "auto") -> ConvergenceReport:
    coarse = solve(profile, n, L)
    fine = solve(profile, 2 * n, coarse.grid.L)
    k = 3
    rel = np.abs(coarse.eigenvalues[:k] - fine.eigenvalues[:k]) / fine.eigenvalues[:k]
    diff = interpolate_mode(coarse, 0, fine.grid.nodes) - fine.psi0
    change = math.sqrt(float(np.sum(fine.grid.weights * diff ** 2)))
    return ConvergenceReport(n, coarse.eigenvalues[:k].copy(), fine.eigenvalues[:k].copy(), rel, change)


def write_spectrum_csv(path, dec: SpectralDecomposition, count: int = 50):
    lam = dec.eigenvalues[:count]
    return _io.write_csv(path, ["n", "lambda_n"], [(i, v) for i, v in enumerate(lam)])


def write_qsd_csv(path, dec: SpectralDecomposition):
    nu, m = qsd(dec).density, qed(dec).density
    g = dec.grid
    rows = zip(g.nodes, g.weights, dec.psi0, nu, m)
    return _io.write_csv(path, ["x", "weight", "psi0", "qsd_density", "qed_density"], rows)


def decay_table(dec: SpectralDecomposition, x0: float, times) -> list[tuple[float, float, float, float]]:
    t = np.asarray(times, dtype=float)
    node = dec.grid.nearest(x0)
    scaled = survival_scaled(dec, t)
    sup = np.exp(-dec.lambda0 * t) * scaled.max(axis=1)
    curve = yaglom_tv_curve(dec, node, t)
    rows = []
    for ti, si, sc, tv in zip(t, sup, scaled.max(axis=1), curve.tv):
        rate = dec.lambda0 - math.log(sc) / ti if ti > 0 else math.nan
        rows.append((float(ti), float(si), float(rate), float(tv)))
    return rows


def write_decay_csv(path, dec: SpectralDecomposition, x0: float, times):
    return _io.write_csv(path, ["t", "sup_survival", "uniform_rate", "tv_at_x0"], decay_table(dec, x0, times))


def hs_bound(profile: SigmaProfile) -> float:
    """omega_alpha * I, the Hilbert-Schmidt norm bound of the continuous operator."""
    return omega_alpha(profile.alpha) * entrance_integral(profile)
