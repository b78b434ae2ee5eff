"""Monte Carlo for dY = sigma(Y-) dX killed near the origin.

Paths use an Euler scheme whose sub-steps shrink near the killing set: within
each output step dt, a sub-step of length h = (kappa * dist / sigma(y))^alpha is
taken, where dist is the distance to the killing set (floored at eps).  Each
sub-step moves the path by sigma(y) h^(1/alpha) S.  Every random number is
keyed by (seed, path, step, sub-step), so results are independent of the
thread schedule.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numba as nb
import numpy as np

from . import _io
from .model_measure import SigmaProfile
from .rng import cms_symmetric, path_key, uniform

ESCAPE = 1e12
ALIVE, KILLED, ESCAPED = 0, 1, 2
_CHUNK = 2048
_MASK64 = (1 << 64) - 1


class SimulationError(RuntimeError):
    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code


@dataclass(frozen=True)
class SimConfig:
    x0: float = 1.0
    eps: float = 1e-3
    dt: float = 1e-3
    horizon: float = 30.0
    n_paths: int = 100_000
    seed: int = 20240601
    R_target: float | None = None
    checkpoints: tuple[float, ...] = ()
    occupation_time: float | None = None
    survival_step: float = 0.01
    kappa: float = 0.1

    def __post_init__(self):
        problems = []
        if self.x0 == 0 or not math.isfinite(self.x0):
            problems.append("x0 must be a nonzero real")
        if not self.eps > 0:
            problems.append("eps must be positive")
        elif self.R_target is None and not self.eps < abs(self.x0):
            problems.append("eps must be smaller than |x0|")
        if not (0 < self.dt < self.horizon):
            problems.append("need 0 < dt < horizon")
        if self.n_paths < 1:
            problems.append("n_paths must be at least 1")
        if self.R_target is not None and not self.R_target > 0:
            problems.append("R_target must be positive")
        if not 0 < self.kappa <= 1:
            problems.append("kappa must lie in (0, 1]")
        for c in self.checkpoints:
            if not 0 < c <= self.horizon:
                problems.append(f"checkpoint {c} outside (0, horizon]")
        if self.occupation_time is not None and not 0 < self.occupation_time <= self.horizon:
            problems.append("occupation_time must lie in (0, horizon]")
        if problems:
            raise ValueError("; ".join(problems))

    @property
    def steps(self) -> int:
        return int(round(self.horizon / self.dt))


@nb.njit(inline="always", cache=True)
def _sigma(kind, scale, gamma, tx, tl, sl, sr, y):
    if kind == 0:
        return scale * (1.0 + abs(y)) ** gamma
    if y > tx[-1]:
        return scale * math.exp(tl[-1] + sr * math.log(y / tx[-1]))
    if y < tx[0]:
        return scale * math.exp(tl[0] + sl * math.log(y / tx[0]))
    i = np.searchsorted(tx, y)
    if i == 0:
        return scale * math.exp(tl[0])
    f = (y - tx[i - 1]) / (tx[i] - tx[i - 1])
    return scale * math.exp(tl[i - 1] + f * (tl[i] - tl[i - 1]))


@nb.njit(nogil=True, cache=True)
def _simulate_chunk(start, count, seed, x0, eps, R, dt, nsteps, alpha, kappa,
                    kind, scale, gamma, tx, tl, sl, sr,
                    ck_of_step, occ_edges, occ_time,
                    t_event, flag, positions, occupation, substeps):
    inv_a = 1.0 / alpha
    kill = R if R > 0.0 else eps
    nbins = occ_edges.size - 1
    for i in range(count):
        p = start + i
        key = path_key(seed, p)
        y = x0
        dead = False
        n_sub = 0
        if abs(y) <= kill:
            t_event[p] = 0.0
            flag[p] = 1
            dead = True
        for k in range(nsteps):
            if dead:
                break
            rem = dt
            j = 0
            while rem > 0.0:
                sig = _sigma(kind, scale, gamma, tx, tl, sl, sr, y)
                dist = abs(y) - R
                if dist < eps:
                    dist = eps
                h = (kappa * dist / sig) ** alpha
                if h >= rem:
                    h = rem
                now = k * dt + (dt - rem)
                if nbins > 0 and now < occ_time:
                    b = np.searchsorted(occ_edges, y, side="right") - 1
                    if b < 0:
                        b = 0
                    elif b >= nbins:
                        b = nbins - 1
                    occupation[p, b] += min(h, occ_time - now)
                s = cms_symmetric(alpha, uniform(key, k, 2 * j), uniform(key, k, 2 * j + 1))
                j += 1
                y_new = y + sig * h ** inv_a * s
                rem -= h
                n_sub += 1
                if abs(y_new) > 1e12:
                    t_event[p] = k * dt + (dt - rem)
                    flag[p] = 2
                    dead = True
                    break
                if abs(y_new) <= kill:
                    t_event[p] = k * dt + (dt - rem)
                    flag[p] = 1
                    dead = True
                    break
                y = y_new
            if not dead and ck_of_step[k] >= 0:
                positions[p, ck_of_step[k]] = y
        if not dead:
            t_event[p] = nsteps * dt
            flag[p] = 0
        substeps[p] = n_sub


def _sigma_params(profile: SigmaProfile):
    if profile.kind == "polynomial":
        empty = np.zeros(2)
        return 0, float(profile.scale), float(profile.gamma), empty, empty, 0.0, 0.0
    return (1, float(profile.scale), 0.0, np.ascontiguousarray(profile.table_x),
            np.ascontiguousarray(profile.table_log_sigma), float(profile.slope_left),
            float(profile.slope_right))


@dataclass
class PathEnsembleStats:
    config: SimConfig
    t_event: np.ndarray = field(repr=False)
    flag: np.ndarray = field(repr=False)
    positions: np.ndarray = field(repr=False)  # (paths, checkpoints), nan once dead
    occupation: np.ndarray | None = field(repr=False)  # (paths, bins) time per bin
    occupation_edges: np.ndarray | None
    substeps: np.ndarray = field(repr=False)
    survival_times: np.ndarray = field(repr=False)
    survival: np.ndarray = field(repr=False)
    survival_ci: np.ndarray = field(repr=False)

    @property
    def n_paths(self) -> int:
        return self.t_event.size

    @property
    def escaped(self) -> int:
        return int(np.sum(self.flag == ESCAPED))

    @property
    def killed(self) -> int:
        return int(np.sum(self.flag == KILLED))

    @property
    def hit_times(self) -> np.ndarray:
        return self.t_event[self.flag == KILLED]

    def survivors(self, checkpoint: int) -> np.ndarray:
        col = self.positions[:, checkpoint]
        return col[np.isfinite(col)]

    def checkpoint_index(self, t: float) -> int:
        ck = np.asarray(self.config.checkpoints)
        i = int(np.argmin(np.abs(ck - t)))
        if abs(ck[i] - t) > 0.5 * self.config.dt:
            raise KeyError(f"no checkpoint at t = {t}")
        return i

    def conditional_hist(self, checkpoint: int, edges) -> np.ndarray:
        pts = self.survivors(checkpoint)
        counts = _bin_counts(pts, edges)
        return counts / max(pts.size, 1)

    def occupation_survivors(self) -> np.ndarray:
        """Per-path normalised occupation of paths alive (and not escaped) at occupation_time."""
        if self.occupation is None:
            raise SimulationError("NO_OCCUPATION", "run was made without occupation bins")
        T = self.config.occupation_time
        alive = (self.t_event > T) & (self.flag != ESCAPED)
        occ = self.occupation[alive]
        return occ / T


def _bin_counts(points, edges) -> np.ndarray:
    e = np.asarray(edges, dtype=float)
    idx = np.clip(np.searchsorted(e, points, side="right") - 1, 0, e.size - 2)
    return np.bincount(idx, minlength=e.size - 1).astype(float)


def kaplan_meier(t_event, flag, times) -> np.ndarray:
    """Survival at ``times`` with escapes and horizon survivors treated as censored."""
    order = np.lexsort((flag != KILLED, t_event))  # kills before censoring at ties
    te, killed = t_event[order], flag[order] == KILLED
    n = te.size
    at_risk = n - np.arange(n)
    factor = np.where(killed, 1.0 - 1.0 / at_risk, 1.0)
    s = np.cumprod(factor)
    k = np.searchsorted(te, np.asarray(times, dtype=float), side="right")
    return np.where(k > 0, s[np.maximum(k - 1, 0)], 1.0)


def wilson_halfwidth(p, n: int, z: float = 1.959963984540054) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    return z / (1.0 + z * z / n) * np.sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n))


def run_ensemble(profile: SigmaProfile, config: SimConfig, *, occupation_edges=None,
                 threads: int = 1) -> PathEnsembleStats:
    """Simulate ``config.n_paths`` paths; bitwise identical for any ``threads``."""
    n = config.n_paths
    nsteps = config.steps
    ck_times = np.asarray(config.checkpoints, dtype=float)
    ck_of_step = np.full(nsteps, -1, dtype=np.int64)
    for c, t in enumerate(ck_times):
        ck_of_step[int(round(t / config.dt)) - 1] = c
    if occupation_edges is not None and config.occupation_time is not None:
        edges = np.asarray(occupation_edges, dtype=float)
        occupation = np.zeros((n, edges.size - 1))
        occ_time = float(config.occupation_time)
    else:
        edges, occupation, occ_time = np.zeros(1), np.zeros((n, 0)), 0.0

    t_event = np.empty(n)
    flag = np.empty(n, dtype=np.int8)
    positions = np.full((n, ck_times.size), np.nan)
    substeps = np.empty(n, dtype=np.int64)
    seed = np.uint64(int(config.seed) & _MASK64)
    R = float(config.R_target) if config.R_target is not None else 0.0
    params = _sigma_params(profile)

    def work(start):
        count = min(_CHUNK, n - start)
        _simulate_chunk(start, count, seed, float(config.x0), float(config.eps), R,
                        float(config.dt), nsteps, float(profile.alpha), float(config.kappa),
                        *params, ck_of_step, edges, occ_time,
                        t_event, flag, positions, occupation, substeps)

    starts = range(0, n, _CHUNK)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, starts))
    else:
        for s in starts:
            work(s)

    times = np.arange(0.0, config.horizon + 0.5 * config.survival_step, config.survival_step)
    surv = kaplan_meier(t_event, flag, times)
    return PathEnsembleStats(config, t_event, flag, positions,
                             occupation if occupation.shape[1] else None,
                             edges if occupation.shape[1] else None, substeps,
                             times, surv, wilson_halfwidth(surv, n))


def fit_decay_rate(stats: PathEnsembleStats, window: tuple[float, float]) -> tuple[float, float]:
    """Weighted least squares slope of log survival over ``window``: (lambda_hat, std_error).

    Weights n S / (1 - S) are the inverse delta-method variances of log S.
    """
    lo, hi = window
    n = stats.n_paths
    t, S = stats.survival_times, stats.survival
    sel = (t >= lo) & (t <= hi)
    floor = 10.0 / n
    if np.sum(sel & (S > floor)) < 5 or np.any(S[sel] <= floor):
        raise SimulationError("INSUFFICIENT_TAIL", f"fewer than 5 points above {floor:.2e} or survivors exhausted in {window}")
    return weighted_log_slope(t[sel], S[sel], n)


def weighted_log_slope(t, S, n: int) -> tuple[float, float]:
    t = np.asarray(t, dtype=float)
    S = np.asarray(S, dtype=float)
    w = n * S / np.maximum(1.0 - S, 1.0 / n)
    y = np.log(S)
    tw = np.sum(w * t) / w.sum()
    yw = np.sum(w * y) / w.sum()
    sxx = np.sum(w * (t - tw) ** 2)
    slope = np.sum(w * (t - tw) * (y - yw)) / sxx
    return float(-slope), float(math.sqrt(1.0 / sxx))


def tv_distance(p, q) -> float:
    return float(0.5 * np.abs(np.asarray(p) - np.asarray(q)).sum())


@dataclass(frozen=True)
class DistanceEstimate:
    tv: float
    ci_halfwidth: float
    samples: int

    def passes(self, threshold: float) -> bool:
        return self.tv < threshold + self.ci_halfwidth


def _bootstrap(values, reference, stat, resamples: int, seed: int) -> float:
    rng = np.random.default_rng(seed)
    n = values.shape[0]
    draws = np.empty(resamples)
    for b in range(resamples):
        draws[b] = tv_distance(stat(values[rng.integers(0, n, n)]), reference)
    lo, hi = np.quantile(draws, [0.025, 0.975])
    return float(0.5 * (hi - lo))


def conditional_law_distance(stats: PathEnsembleStats, t: float, edges, reference_masses, *,
                             resamples: int = 200, seed: int = 0, min_survivors: int = 100) -> DistanceEstimate:
    """TV between the survivor histogram at checkpoint t and reference bin masses."""
    pts = stats.survivors(stats.checkpoint_index(t))
    if pts.size < min_survivors:
        raise SimulationError("TOO_FEW_SURVIVORS", f"{pts.size} survivors at t = {t} (< {min_survivors})")
    ref = np.asarray(reference_masses, dtype=float)
    e = np.asarray(edges, dtype=float)

    def hist(sample):
        return _bin_counts(sample, e) / sample.size

    return DistanceEstimate(tv_distance(hist(pts), ref), _bootstrap(pts, ref, hist, resamples, seed), pts.size)


def occupation_distance(stats: PathEnsembleStats, reference_masses, *, resamples: int = 200,
                        seed: int = 0, min_survivors: int = 100) -> DistanceEstimate:
    """TV between the mean normalised occupation of survivors and reference bin masses."""
    occ = stats.occupation_survivors()
    if occ.shape[0] < min_survivors:
        raise SimulationError("TOO_FEW_SURVIVORS",
                              f"{occ.shape[0]} survivors at t = {stats.config.occupation_time} (< {min_survivors})")
    ref = np.asarray(reference_masses, dtype=float)

    def mean(sample):
        return sample.mean(axis=0)

    return DistanceEstimate(tv_distance(mean(occ), ref), _bootstrap(occ, ref, mean, resamples, seed), occ.shape[0])


@dataclass(frozen=True)
class MomentProbe:
    lam: float
    mean: float
    std_error: float
    top_decile_share: float

    @property
    def divergent(self) -> bool:
        return self.top_decile_share > 0.5


def exp_moment_probe(stats: PathEnsembleStats, lam: float) -> MomentProbe:
    """Sample mean of e^(lam T_0) over killed paths, with a tail-dominance indicator."""
    t = stats.hit_times
    if t.size == 0:
        raise SimulationError("NO_HITS", "no killed paths")
    if lam == 0:
        return MomentProbe(0.0, 1.0, 0.0, 0.1)
    # work relative to the largest term to avoid overflow
    z = lam * t
    top = z.max()
    v = np.exp(z - top)
    total = v.sum()
    k = max(1, t.size // 10)
    share = float(np.sort(v)[-k:].sum() / total)
    mean = math.exp(top) * total / t.size
    se = math.exp(top) * float(v.std(ddof=1)) / math.sqrt(t.size) if t.size > 1 else math.inf
    return MomentProbe(float(lam), float(mean), se, share)


@dataclass(frozen=True)
class HittingEstimate:
    mean: float
    std_error: float
    horizon_exceeded: float
    escaped: int


def interval_hitting_mc(profile: SigmaProfile, R: float, x0: float, config: SimConfig,
                        threads: int = 1) -> HittingEstimate:
    """Monte Carlo mean of the first entry time into [-R, R] from x0."""
    if abs(x0) <= R:
        return HittingEstimate(0.0, 0.0, 0.0, 0)
    cfg = replace(config, x0=float(x0), R_target=float(R), checkpoints=(), occupation_time=None)
    stats = run_ensemble(profile, cfg, threads=threads)
    done = stats.flag == KILLED
    t = stats.t_event[done]
    se = float(t.std(ddof=1) / math.sqrt(t.size)) if t.size > 1 else math.inf
    return HittingEstimate(float(t.mean()), se, float(np.mean(stats.flag == ALIVE)), stats.escaped)


def extrapolate_eps(eps_levels, rates, alpha: float) -> float:
    """Intercept of the linear fit of the rate against eps^(alpha-1)."""
    x = np.asarray(eps_levels, dtype=float) ** (alpha - 1.0)
    return float(np.polyfit(x, np.asarray(rates, dtype=float), 1)[1])


def write_survival_csv(path, stats: PathEnsembleStats):
    rows = zip(stats.survival_times, stats.survival, stats.survival_ci)
    return _io.write_csv(path, ["t", "fraction", "ci"], rows)


def write_bins_csv(path, edges, masses):
    e = np.asarray(edges, dtype=float)
    return _io.write_csv(path, ["bin_lo", "bin_hi", "mass"], zip(e[:-1], e[1:], masses))


def write_hits_csv(path, stats: PathEnsembleStats):
    rows = zip(range(stats.n_paths), stats.t_event, stats.flag.astype(int))
    return _io.write_csv(path, ["path_id", "t_hit", "flag"], rows)
