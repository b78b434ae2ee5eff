"""The acceptance suite: eighteen checks, each judged against an explicit tolerance."""
from __future__ import annotations

import filecmp
import math
import tempfile
import time
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.special import beta as beta_fn

from .config import ExperimentConfig
from .experiments import (cmd_analyze, cmd_simulate, cmd_spectrum, entrance_status, mc_targets, sim_config,
                          spectral_pipeline, spectral_summary, update_report)
from .model_measure import mean_hitting_time, hitting_time_upper_bound, polynomial_family_diagnostics
from .path_simulator import (SimulationError, conditional_law_distance, exp_moment_probe, extrapolate_eps,
                             fit_decay_rate, interval_hitting_mc, occupation_distance, run_ensemble)
from .spectral_solver import ground_state_residual, solve
from .stable_kernels import (exterior_limit_constant, green_exterior, green_exterior_unit, green_point_killed,
                             h_function, hitting_zero_probability, k_alpha_constant, omega_alpha)

PASS, FAIL, NOT_APPLICABLE, NOT_RUN = "PASS", "FAIL", "NOT_APPLICABLE", "NOT_RUN"


@dataclass
class CheckResult:
    id: int
    name: str
    status: str
    measured: object
    tolerance: object
    anchor: str
    detail: str = ""
    seconds: float = field(default=0.0, compare=False)

    def record(self) -> dict:
        # wall time is left out so that reports are reproducible byte for byte
        return {"id": self.id, "name": self.name, "status": self.status, "measured": self.measured,
                "tolerance": self.tolerance, "anchor": self.anchor, "detail": self.detail}

    def line(self) -> str:
        return f"[{self.status:>14}] {self.id:2d} {self.name}: measured={_short(self.measured)} tol={_short(self.tolerance)}"


def _short(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, dict):
        return "{" + ", ".join(f"{k}={_short(x)}" for k, x in v.items()) + "}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_short(x) for x in v) + "]"
    return str(v)


def _status(ok: bool) -> str:
    return PASS if ok else FAIL


class Context:
    """Lazily computed shared inputs of the checks."""

    def __init__(self, cfg: ExperimentConfig, out: Path, threads: int = 1, hooks: dict | None = None):
        self.cfg = cfg
        self.out = Path(out)
        self.threads = threads
        self.hooks = hooks or {}
        self.rng = np.random.default_rng(int(cfg["sim.seed"]))

    @cached_property
    def entrance(self):
        return entrance_status(self.cfg)

    @property
    def finite(self) -> bool:
        return self.entrance[1] == "FINITE"

    @cached_property
    def spectral(self):
        profile, dec = spectral_pipeline(self.cfg)
        return profile, dec, spectral_summary(self.cfg, profile, dec)

    @cached_property
    def fine(self):
        profile, dec, _ = self.spectral
        return solve(profile, 2 * int(self.cfg["grid.n"]), dec.grid.L)

    @cached_property
    def targets(self):
        return mc_targets(self.cfg, self.spectral[1])

    @cached_property
    def main_run(self):
        tg = self.targets
        sc = sim_config(self.cfg, checkpoints=[tg["t_cond"]], occupation_time=tg["t_occ"])
        return run_ensemble(self.cfg.profile(), sc, occupation_edges=tg["m_edges"], threads=self.threads)

    def lean_run(self, eps=None, seed=None):
        return run_ensemble(self.cfg.profile(), sim_config(self.cfg, eps=eps, seed=seed), threads=self.threads)


def check_kernel_identities(ctx: Context) -> CheckResult:
    tol = ctx.cfg.tol("kernel")
    n = int(ctx.cfg["validate.kernel_samples"])
    worst = {"symmetry": 0.0, "boundary": 0.0, "reflection": 0.0, "bound_excess": 0.0}
    positive = True
    for a in (1.1, 1.5, 1.9):
        x = ctx.rng.choice([-1.0, 1.0], n) * 10.0 ** ctx.rng.uniform(-3, 3, n)
        y = ctx.rng.choice([-1.0, 1.0], n) * 10.0 ** ctx.rng.uniform(-3, 3, n)
        g = green_point_killed(a, x, y)
        worst["symmetry"] = max(worst["symmetry"], float(np.abs(g - green_point_killed(a, y, x)).max()))
        worst["reflection"] = max(worst["reflection"], float(np.abs(g - green_point_killed(a, -x, -y)).max()))
        zero = np.zeros(n)
        edge = max(np.abs(green_point_killed(a, x, zero)).max(), np.abs(green_point_killed(a, zero, y)).max())
        worst["boundary"] = max(worst["boundary"], float(edge))
        bound = omega_alpha(a) * np.minimum(np.abs(x), np.abs(y)) ** (a - 1.0)
        worst["bound_excess"] = max(worst["bound_excess"], float(np.max(g - bound)))
        positive &= bool(np.all(g > 0))
    ok = all(v <= tol for v in worst.values()) and positive
    worst["strictly_positive"] = positive
    return CheckResult(1, "kernel identities", _status(ok), worst, tol,
                       "G0 symmetric, reflection invariant, zero on the axes, 0 < G0(x,y) <= omega*min(|x|,|y|)^(alpha-1)")


def check_exterior_limit(ctx: Context) -> CheckResult:
    a, x = 1.5, 1e4
    tol = ctx.cfg.tol("exterior_limit")
    ys = (1.5, 2.0, 3.0, 5.0)
    k = k_alpha_constant(a)
    g = np.array([green_exterior_unit(a, x, y) for y in ys])
    h = h_function(a, np.array(ys))
    dev = np.abs(g - k * h) / (k * h)
    lim = exterior_limit_constant(a)
    dev_true = np.abs(g - lim * h) / (lim * h)
    detail = (f"K_alpha={k:.6g}; ratio G/h at x=1e4: {[round(float(r), 6) for r in g / h]}; "
              f"lim G/h from the kernel itself={lim:.6g} (deviation at x=1e4 {float(dev_true.max()):.4g})")
    return CheckResult(2, "exterior kernel limit", _status(float(dev.max()) < tol),
                       {"max_relative_deviation": float(dev.max()),
                        "per_y": {str(y): float(d) for y, d in zip(ys, dev)}}, tol,
                       "G^{[-1,1]^c}(x,y) -> K_alpha h(y) as x -> infinity", detail)


def check_scaling(ctx: Context) -> CheckResult:
    tol = ctx.cfg.tol("scaling")
    n = int(ctx.cfg["validate.scaling_samples"])
    a = ctx.cfg.alpha
    R = 10.0 ** ctx.rng.uniform(-2, 2, n)
    x = ctx.rng.choice([-1.0, 1.0], n) * R * (1.0 + 10.0 ** ctx.rng.uniform(-3, 2, n))
    y = ctx.rng.choice([-1.0, 1.0], n) * R * (1.0 + 10.0 ** ctx.rng.uniform(-3, 2, n))
    keep = x != y
    R, x, y = R[keep], x[keep], y[keep]
    lhs = np.array([green_exterior(a, r, xi, yi) for r, xi, yi in zip(R, x, y)])
    rhs = R ** (a - 1.0) * green_exterior_unit(a, x / R, y / R)
    pos = rhs > 0
    err = float(np.max(np.abs(lhs[pos] - rhs[pos]) / rhs[pos])) if pos.any() else 0.0
    zero_mismatch = int(np.sum((lhs == 0) != (rhs == 0)))
    return CheckResult(3, "exterior kernel scaling", _status(err < tol and zero_mismatch == 0),
                       {"max_relative_error": err, "zero_mismatches": zero_mismatch}, tol,
                       "G^{[-R,R]^c}(x,y) = R^(alpha-1) G^{[-1,1]^c}(x/R, y/R)")


def check_entrance_values(ctx: Context) -> CheckResult:
    cfg = ctx.cfg
    anchor = "I = int |x|^(alpha-1) dmu, delta = sup |x|^(alpha-1) mu(|y|>=|x|), lambda0 >= 1/(4 omega delta)"
    if cfg["sigma.kind"] != "polynomial":
        return CheckResult(4, "entrance quantities", NOT_APPLICABLE, None, None, anchor,
                           "closed-form oracles exist for the polynomial family only")
    a, g = cfg.alpha, float(cfg["sigma.gamma"])
    diag = polynomial_family_diagnostics(a, g)
    if g <= 1.0:
        ok = math.isinf(diag.entrance_integral) and math.isinf(diag.delta)
        return CheckResult(4, "entrance quantities", _status(ok),
                           {"I": diag.entrance_integral, "delta": diag.delta}, "DIVERGENT", anchor,
                           "gamma <= 1: both functionals must be reported divergent")
    I_ref = (a * g - 1.0) * beta_fn(a, a * g - a)
    xs = (a - 1.0) / (a * (g - 1.0))
    d_ref = xs ** (a - 1.0) * (1.0 + xs) ** (1.0 - a * g)
    b_ref = 1.0 / (4.0 * omega_alpha(a) * d_ref)
    errs = {"I": abs(diag.entrance_integral - I_ref), "delta": abs(diag.delta - d_ref),
            "lambda0_lower": abs(diag.lambda0_lower - b_ref)}
    tols = {"I": cfg.tol("entrance"), "delta": cfg.tol("delta"), "lambda0_lower": cfg.tol("lambda_bound")}
    ok = all(errs[k] <= tols[k] for k in errs)
    measured = {"I": diag.entrance_integral, "delta": diag.delta, "lambda0_lower": diag.lambda0_lower,
                "abs_errors": errs}
    return CheckResult(4, "entrance quantities", _status(ok), measured, tols, anchor,
                       f"oracles: I={I_ref:.10g}, delta={d_ref:.10g} at x*={xs:.6g}, bound={b_ref:.10g}")


def check_entrance_dichotomy(ctx: Context) -> CheckResult:
    rows, mismatches = [], []
    for a in (1.2, 1.5, 1.8):
        for g in (0.5, 0.8, 1.0, 1.2, 2.0, 4.0):
            d = polynomial_family_diagnostics(a, g)
            fin_i, fin_d = math.isfinite(d.entrance_integral), math.isfinite(d.delta)
            want = g > 1.0
            rows.append({"alpha": a, "gamma": g, "I": d.entrance_integral, "delta": d.delta})
            if fin_i != want or fin_d != want:
                mismatches.append(f"alpha={a} gamma={g}: I {'finite' if fin_i else 'DIVERGENT'}, "
                                  f"delta {'finite' if fin_d else 'DIVERGENT'}")
    return CheckResult(5, "entrance dichotomy", _status(not mismatches),
                       {"mismatches": len(mismatches), "grid": rows}, "I and delta finite iff gamma > 1",
                       "I < infinity and delta < infinity exactly when gamma > 1", "; ".join(mismatches))


def _need_spectral(ctx: Context, cid: int, name: str, anchor: str):
    if not ctx.finite:
        return CheckResult(cid, name, NOT_APPLICABLE, None, None, anchor,
                           f"entrance integral {ctx.entrance[1]}: the Green operator is not Hilbert-Schmidt")
    return None


def check_hs_bound(ctx: Context) -> CheckResult:
    anchor = "||G0||_HS <= omega_alpha * I"
    if (na := _need_spectral(ctx, 6, "Hilbert-Schmidt bound", anchor)):
        return na
    profile, dec, _ = ctx.spectral
    bound = omega_alpha(profile.alpha) * ctx.entrance[0].entrance_integral
    tol = ctx.cfg.tol("hs")
    norms = {str(dec.grid.size): dec.hs_norm, str(ctx.fine.grid.size): ctx.fine.hs_norm}
    ok = all(v <= bound + tol for v in norms.values())
    return CheckResult(6, "Hilbert-Schmidt bound", _status(ok), {"hs_norm": norms, "bound": bound}, tol, anchor)


def check_spectrum(ctx: Context) -> CheckResult:
    anchor = "0 < lambda0 < lambda1, psi0 > 0, lambda0 >= 1/(4 omega delta), psi0/lambda0 = G0 psi0"
    if (na := _need_spectral(ctx, 7, "spectrum", anchor)):
        return na
    cfg = ctx.cfg
    profile, dec, s = ctx.spectral
    bound = ctx.entrance[0].lambda0_lower
    residual = s["residual"]
    if ctx.hooks.get("psi0_perturbation"):
        h = float(ctx.hooks["psi0_perturbation"])
        v = dec.psi0 + h * dec.eigenvectors[:, 1]
        v = v / math.sqrt(dec.mu_inner(v, v))
        residual = ground_state_residual(dec, v)
    rel = abs(dec.lambda0 - ctx.fine.lambda0) / ctx.fine.lambda0
    parts = {
        "lambda0": (dec.lambda0, dec.lambda0 > 0),
        "gap": (dec.gap, dec.gap > 0),
        "lambda0_over_bound": (dec.lambda0 / bound if bound > 0 else math.inf,
                               dec.lambda0 >= (1.0 - cfg.tol("bound_slack")) * bound),
        "psi0_min": (s["psi0_min"], s["psi0_min"] > 0),
        "orthonormality_error": (s["orthonormality_error"], s["orthonormality_error"] <= cfg.tol("orthonormal")),
        "residual": (residual, residual <= cfg.tol("residual")),
        "refine_relative_change": (rel, rel < cfg.tol("refine")),
    }
    failed = [k for k, (_, ok) in parts.items() if not ok]
    tols = {"orthonormal": cfg.tol("orthonormal"), "residual": cfg.tol("residual"),
            "refine": cfg.tol("refine"), "bound_slack": cfg.tol("bound_slack")}
    return CheckResult(7, "spectrum", _status(not failed), {k: v for k, (v, _) in parts.items()}, tols, anchor,
                       ("failed: " + ", ".join(failed)) if failed else f"lambda1={s['lambda1']:.8g}")


def check_masses(ctx: Context) -> CheckResult:
    anchor = "nu = psi0 dmu / mu(psi0) and m = psi0^2 dmu are probability measures; psi0 even for even sigma"
    if (na := _need_spectral(ctx, 8, "QSD/QED normalisation", anchor)):
        return na
    profile, dec, s = ctx.spectral
    cfg = ctx.cfg
    ok = s["qsd_mass_error"] <= cfg.tol("mass") and s["qed_mass_error"] <= cfg.tol("mass")
    if profile.is_even:
        ok &= s["psi0_parity_defect"] <= cfg.tol("parity")
    return CheckResult(8, "QSD/QED normalisation", _status(ok),
                       {"qsd_mass_error": s["qsd_mass_error"], "qed_mass_error": s["qed_mass_error"],
                        "psi0_parity_defect": s["psi0_parity_defect"]},
                       {"mass": cfg.tol("mass"), "parity": cfg.tol("parity")}, anchor)


def check_exit_law(ctx: Context) -> CheckResult:
    anchor = "P_nu[t < T_0] = exp(-lambda0 t)"
    if (na := _need_spectral(ctx, 9, "QSD exit law", anchor)):
        return na
    s = ctx.spectral[2]
    tol = ctx.cfg.tol("exit_law")
    return CheckResult(9, "QSD exit law", _status(s["exit_law_error"] <= tol),
                       {"max_abs_error_t_in_0_10_over_lambda0": s["exit_law_error"]}, tol, anchor)


def check_yaglom_rate(ctx: Context) -> CheckResult:
    anchor = "||P_x[Y_t in . | t < T_0] - nu||_TV <= C(x) exp(-(lambda1 - lambda0) t)"
    if (na := _need_spectral(ctx, 10, "Yaglom rate", anchor)):
        return na
    s = ctx.spectral[2]
    tol = ctx.cfg.tol("yaglom")
    rel = abs(s["yaglom_slope"] + s["gap"]) / s["gap"]
    return CheckResult(10, "Yaglom rate", _status(rel <= tol),
                       {"slope": s["yaglom_slope"], "minus_gap": -s["gap"], "relative_error": rel}, tol, anchor,
                       "window t in [5/lambda1, 15/lambda1]")


def check_uniform_rate(ctx: Context) -> CheckResult:
    anchor = "-(1/t) log sup_x P_x[T_0 > t] -> lambda0"
    if (na := _need_spectral(ctx, 11, "uniform decay rate", anchor)):
        return na
    s = ctx.spectral[2]
    tol = ctx.cfg.tol("uniform")
    rel = abs(s["uniform_rate_30"] - s["lambda0"]) / s["lambda0"]
    return CheckResult(11, "uniform decay rate", _status(rel <= tol),
                       {"rate_at_30_over_lambda0": s["uniform_rate_30"], "relative_error": rel}, tol, anchor)


def check_mc_rate(ctx: Context) -> CheckResult:
    anchor = "exp(lambda0 t) P_x[t < T_0] -> psi0(x) <psi0, 1>"
    if (na := _need_spectral(ctx, 12, "Monte Carlo decay rate", anchor)):
        return na
    cfg = ctx.cfg
    lam0 = ctx.spectral[1].lambda0
    window = tuple(float(v) for v in cfg["sim.fit_window"])
    levels = sorted({float(e) for e in cfg["sim.eps_levels"]} | {float(cfg["sim.eps"])}, reverse=True)
    rates, ses, escaped = [], [], 0
    for e in levels:
        st = ctx.main_run if e == float(cfg["sim.eps"]) else ctx.lean_run(eps=e)
        lam, se = fit_decay_rate(st, window)
        rates.append(lam)
        ses.append(se)
        escaped += st.escaped
    extrap = extrapolate_eps(levels, rates, cfg.alpha)
    rel = abs(extrap - lam0) / lam0
    monotone = bool(np.all(np.diff(rates) <= 0))
    tol = cfg.tol("mc_rate")
    measured = {"eps": levels, "lambda_hat": rates, "std_error": ses, "extrapolated": extrap,
                "spectral_lambda0": lam0, "relative_error": rel, "monotone_toward_lambda0": monotone,
                "escaped_paths": escaped}
    return CheckResult(12, "Monte Carlo decay rate", _status(rel <= tol), measured, tol, anchor,
                       f"fit window {window}, extrapolation linear in eps^(alpha-1)")


def check_mc_yaglom(ctx: Context) -> CheckResult:
    anchor = "P_x[Y_t in . | t < T_0] -> nu"
    if (na := _need_spectral(ctx, 13, "Monte Carlo Yaglom limit", anchor)):
        return na
    tg, st = ctx.targets, ctx.main_run
    tol = ctx.cfg.tol("tv")
    try:
        d = conditional_law_distance(st, tg["t_cond"], tg["nu_edges"], tg["nu_masses"], seed=int(ctx.cfg["sim.seed"]))
    except SimulationError as exc:
        return CheckResult(13, "Monte Carlo Yaglom limit", FAIL, {"error": exc.code}, tol, anchor, str(exc))
    return CheckResult(13, "Monte Carlo Yaglom limit", _status(d.passes(tol)),
                       {"t": tg["t_cond"], "tv": d.tv, "ci_halfwidth": d.ci_halfwidth, "survivors": d.samples},
                       tol, anchor, "pass rule: tv < tol + bootstrap CI half-width")


def check_mc_qed(ctx: Context) -> CheckResult:
    anchor = "(1/t) int_0^t 1_A(Y_s) ds given t < T_0 -> m(A) = int_A psi0^2 dmu"
    if (na := _need_spectral(ctx, 14, "Monte Carlo quasi-ergodic law", anchor)):
        return na
    tg, st = ctx.targets, ctx.main_run
    tol = ctx.cfg.tol("tv")
    try:
        d = occupation_distance(st, tg["m_masses"], seed=int(ctx.cfg["sim.seed"]))
    except SimulationError as exc:
        survivors = int(st.occupation_survivors().shape[0])
        return CheckResult(14, "Monte Carlo quasi-ergodic law", FAIL,
                           {"error": exc.code, "horizon": tg["t_occ"], "survivors": survivors}, tol, anchor, str(exc))
    return CheckResult(14, "Monte Carlo quasi-ergodic law", _status(d.passes(tol)),
                       {"horizon": tg["t_occ"], "tv": d.tv, "ci_halfwidth": d.ci_halfwidth, "survivors": d.samples},
                       tol, anchor, "pass rule: tv < tol + bootstrap CI half-width")


def check_exp_moments(ctx: Context) -> CheckResult:
    anchor = "sup_x E_x[exp(lambda T_0)] < infinity iff lambda < lambda0"
    if (na := _need_spectral(ctx, 15, "exponential moments", anchor)):
        return na
    cfg = ctx.cfg
    lam0 = ctx.spectral[1].lambda0
    seed0 = int(cfg["sim.seed"])
    runs = [ctx.main_run] + [ctx.lean_run(seed=seed0 + k) for k in range(1, int(cfg["sim.moment_seeds"]))]
    low = [exp_moment_probe(r, 0.5 * lam0) for r in runs]
    high = [exp_moment_probe(r, 1.5 * lam0) for r in runs]
    means = np.array([p.mean for p in low])
    ses = np.array([p.std_error for p in low])
    w = 1.0 / ses ** 2
    pooled = float(np.sum(w * means) / w.sum())
    z = np.abs(means - pooled) / ses
    stable = bool(np.all(z <= 3.0)) and all(math.isfinite(m) for m in means) and not any(p.divergent for p in low)
    flagged = all(p.divergent for p in high)
    measured = {"low_means": means.tolist(), "low_std_errors": ses.tolist(), "low_max_z": float(z.max()),
                "low_top_decile_share": [p.top_decile_share for p in low],
                "high_top_decile_share": [p.top_decile_share for p in high], "high_flagged": flagged}
    return CheckResult(15, "exponential moments", _status(stable and flagged), measured,
                       {"replicate_z": 3.0, "top_decile_share": 0.5}, anchor,
                       "lambda = 0.5 lambda0 must be finite and seed stable; lambda = 1.5 lambda0 must be flagged")


def check_hitting_closure(ctx: Context) -> CheckResult:
    anchor = "E_x[T_[-R,R]] = int G^{[-R,R]^c}(x,y) mu(dy) <= omega int_{|y|>R} |y|^(alpha-1) dmu"
    if (na := _need_spectral(ctx, 16, "hitting-time closure", anchor)):
        return na
    cfg = ctx.cfg
    profile = cfg.profile()
    R, x0 = float(cfg["sim.hit_R"]), float(cfg["sim.hit_x0"])
    quad = mean_hitting_time(profile, R, x0)
    bound = hitting_time_upper_bound(profile, R)
    base = sim_config(cfg, n_paths=int(cfg["sim.hit_paths"]))
    mc = interval_hitting_mc(profile, R, x0, base, threads=ctx.threads)
    half = interval_hitting_mc(profile, R, x0, replace(base, kappa=base.kappa / 2.0), threads=ctx.threads)
    bias = abs(mc.mean - half.mean)
    k = cfg.tol("hit_sigma")
    ok = abs(mc.mean - quad) <= k * mc.std_error + bias and quad <= bound
    measured = {"quadrature": quad, "mc_mean": mc.mean, "mc_std_error": mc.std_error,
                "mc_mean_half_step": half.mean, "bias_allowance": bias, "upper_bound": bound,
                "horizon_exceeded": mc.horizon_exceeded}
    return CheckResult(16, "hitting-time closure", _status(ok), measured,
                       {"std_errors": k, "bias_allowance": "|mean(kappa) - mean(kappa/2)|"}, anchor,
                       f"R={R}, x0={x0}")


def check_hitting_probability(ctx: Context) -> CheckResult:
    a, x = 1.5, 0.5
    tol = ctx.cfg.tol("hit_probability")
    radii = (1.0, 10.0, 100.0, 1000.0)
    p = [hitting_zero_probability(a, R, x) for R in radii]
    nondecreasing = bool(np.all(np.diff(p) >= 0))
    gap = 1.0 - p[-1]
    return CheckResult(17, "hitting probability ratio", _status(nondecreasing and gap <= tol),
                       {"probabilities": {str(R): v for R, v in zip(radii, p)}, "one_minus_p_at_1000": gap,
                        "nondecreasing": nondecreasing}, tol,
                       "P_x[T_0 < exit from (-R,R)] = G^{(-R,R)}(x,0)/G^{(-R,R)}(0,0) -> 1")


def check_determinism(ctx: Context) -> CheckResult:
    anchor = "identical outputs for identical seed and configuration, any thread count"
    cfg = ctx.cfg.with_overrides(**{"sim__n_paths": int(ctx.cfg["validate.determinism_paths"])})
    with tempfile.TemporaryDirectory() as tmp:
        dirs = []
        for threads in (1, 8, 1):
            d = Path(tmp) / f"run{len(dirs)}"
            d.mkdir()
            cmd_analyze(cfg, d)
            if ctx.finite:
                cmd_spectrum(cfg, d)
            cmd_simulate(cfg, d, threads=threads)
            dirs.append(d)
        names = sorted(p.name for p in dirs[0].iterdir())
        diffs = []
        for other in dirs[1:]:
            match, mismatch, errors = filecmp.cmpfiles(dirs[0], other, names, shallow=False)
            diffs += mismatch + errors
            if sorted(p.name for p in other.iterdir()) != names:
                diffs.append(f"file set differs in {other.name}")
    return CheckResult(18, "determinism", _status(not diffs), {"files": len(names), "differing": sorted(set(diffs))},
                       "byte identical", anchor, "threads 1, 8 and 1 again")


CHECKS = [
    ("kernels", check_kernel_identities), ("kernels", check_exterior_limit), ("kernels", check_scaling),
    ("entrance", check_entrance_values), ("entrance", check_entrance_dichotomy),
    ("spectral", check_hs_bound), ("spectral", check_spectrum), ("spectral", check_masses),
    ("spectral", check_exit_law), ("spectral", check_yaglom_rate), ("spectral", check_uniform_rate),
    ("mc", check_mc_rate), ("mc", check_mc_yaglom), ("mc", check_mc_qed), ("mc", check_exp_moments),
    ("mc", check_hitting_closure), ("kernels", check_hitting_probability), ("determinism", check_determinism),
]
NAMES = ["kernel identities", "exterior kernel limit", "exterior kernel scaling", "entrance quantities",
         "entrance dichotomy", "Hilbert-Schmidt bound", "spectrum", "QSD/QED normalisation", "QSD exit law",
         "Yaglom rate", "uniform decay rate", "Monte Carlo decay rate", "Monte Carlo Yaglom limit",
         "Monte Carlo quasi-ergodic law", "exponential moments", "hitting-time closure",
         "hitting probability ratio", "determinism"]


def run_validation(cfg: ExperimentConfig, out: Path, *, threads: int = 1, hooks: dict | None = None,
                   only: set[int] | None = None, echo=print) -> list[CheckResult]:
    """Run every check (or the ids in ``only``) and write report.json."""
    ctx = Context(cfg, out, threads, hooks)
    suites = cfg.suites()
    results = []
    for cid, (suite, fn) in enumerate(CHECKS, start=1):
        if suite not in suites or (only is not None and cid not in only):
            res = CheckResult(cid, NAMES[cid - 1], NOT_RUN, None, None, "", "suite not selected")
        else:
            t0 = time.perf_counter()
            try:
                res = fn(ctx)
            except Exception as exc:  # a crashing check is a failed check, never a silent pass
                res = CheckResult(cid, NAMES[cid - 1], FAIL, {"error": type(exc).__name__}, None, "", str(exc))
            res.seconds = time.perf_counter() - t0
        results.append(res)
        if echo:
            echo(res.line() + (f"  ({res.seconds:.1f}s)" if res.seconds else ""))
    section = {"config": cfg.echo(), "checks": [r.record() for r in results],
               "failed": sum(r.status == FAIL for r in results)}
    if ctx.finite and "spectrum" not in section and any(r.id in range(6, 17) and r.status in (PASS, FAIL) for r in results):
        section["spectral_summary"] = ctx.spectral[2]
    update_report(out, "validate", section)
    return results


def failures(results) -> int:
    return sum(r.status == FAIL for r in results)
