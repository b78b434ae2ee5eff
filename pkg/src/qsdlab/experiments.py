"""Pipelines behind the command line: entrance analysis, spectrum, simulation."""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from . import _io
from .config import ExperimentConfig
from .model_measure import (IndeterminateTail, entrance_diagnostics, hitting_time_upper_bound,
                            mean_hitting_time, polynomial_family_diagnostics)
from .path_simulator import (SimConfig, run_ensemble, write_bins_csv, write_hits_csv, write_survival_csv)
from .spectral_solver import (build_grid, assemble_operator, eigendecompose, ground_state_residual,
                              heat_kernel_diagonal, law_bin_masses, law_quantile_edges, parity_defect,
                              qed, qsd, qsd_exit_law, refine_and_compare, uniform_decay_rate, write_decay_csv,
                              write_qsd_csv, write_spectrum_csv, yaglom_rate)
from .stable_kernels import c_alpha, hitting_zero_probability, k_alpha_constant, omega_alpha

SCHEMA_VERSION = 1
BOUND_RADII = (0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0)
PROBABILITY_RADII = (1.0, 10.0, 100.0, 1000.0)


def update_report(out: Path, section: str, content: dict) -> Path:
    path = Path(out) / "report.json"
    report = json.loads(path.read_text()) if path.exists() else {}
    report["schema_version"] = SCHEMA_VERSION
    report[section] = content
    return _io.write_json(path, report)


def entrance_status(cfg: ExperimentConfig):
    """(diagnostics or None, status, reason) for the configured profile."""
    if cfg["sigma.kind"] == "polynomial":
        g = float(cfg["sigma.gamma"])
        diag = polynomial_family_diagnostics(cfg.alpha, g)
        if math.isinf(diag.entrance_integral):
            reason = "MU_NOT_FINITE" if cfg.alpha * g <= 1 else "TAIL_EXPONENT"
            return diag, "DIVERGENT", reason
        return diag, "FINITE", ""
    try:
        diag = entrance_diagnostics(cfg.profile())
    except IndeterminateTail as exc:
        return exc, "INDETERMINATE", f"partial={exc.partial:.6g};truncation={exc.truncation:.6g}"
    if math.isinf(diag.entrance_integral):
        return diag, "DIVERGENT", "TAIL_EXPONENT"
    return diag, "FINITE", ""


def cmd_analyze(cfg: ExperimentConfig, out: Path) -> tuple[dict, int]:
    out = Path(out)
    a = cfg.alpha
    diag, status, reason = entrance_status(cfg)
    rows = [("omega_alpha", omega_alpha(a), "FINITE", ""),
            ("c_alpha", c_alpha(a), "FINITE", ""),
            ("k_alpha", k_alpha_constant(a), "FINITE", "")]
    section: dict = {"status": status, "reason": reason}
    if status == "INDETERMINATE":
        rows.append(("entrance_integral", diag.partial, status, reason))
        section.update(entrance_integral=None, partial=diag.partial, truncation=diag.truncation)
    else:
        d_status = "DIVERGENT" if math.isinf(diag.delta) else "FINITE"
        rows += [("entrance_integral", diag.entrance_integral, status, reason),
                 ("delta", diag.delta, d_status, reason if d_status == "DIVERGENT" else ""),
                 ("delta_argmax", diag.delta_argmax, "FINITE" if math.isfinite(diag.delta_argmax) else "AT_INFINITY", ""),
                 ("lambda0_lower_bound", diag.lambda0_lower, "FINITE" if diag.lambda0_lower > 0 else "NO_BOUND", "")]
        section.update(entrance_integral=diag.entrance_integral, delta=diag.delta,
                       delta_argmax=diag.delta_argmax, lambda0_lower=diag.lambda0_lower)
    _io.write_csv(out / "entrance.csv", ["quantity", "value", "status", "reason"],
                  [(q, _io.fmt(v), s, r) for q, v, s, r in rows])

    bound_rows = []
    if status == "FINITE":
        prof = cfg.profile()
        for R in BOUND_RADII:
            bound_rows.append((R, hitting_time_upper_bound(prof, R), mean_hitting_time(prof, R, 2 * R)))
    else:
        bound_rows = [(R, math.inf, math.nan) for R in BOUND_RADII]
    _io.write_csv(out / "hitting_bound.csv", ["R", "upper_bound", "mean_hitting_time_at_2R"], bound_rows)
    probs = [(R, hitting_zero_probability(a, R, 0.5)) for R in PROBABILITY_RADII]
    _io.write_csv(out / "hitting_probability.csv", ["R", "probability_x0_0.5"], probs)
    section["hitting_bound"] = {str(R): b for R, b, _ in bound_rows}
    section["hitting_probability"] = {str(R): p for R, p in probs}
    update_report(out, "analyze", section)
    return section, 0


def spectral_pipeline(cfg: ExperimentConfig):
    profile = cfg.profile()
    grid = build_grid(profile, int(cfg["grid.n"]), cfg.grid_L())
    dec = eigendecompose(assemble_operator(grid, profile))
    return profile, dec


def spectral_summary(cfg: ExperimentConfig, profile, dec, *, refine: bool = True) -> dict:
    g = dec.grid
    V, W = dec.eigenvectors, g.weights
    ortho = float(np.abs((V * W[:, None]).T @ V - np.eye(V.shape[1])).max())
    nu, m = qsd(dec), qed(dec)
    t_exit = np.linspace(0.0, 10.0 / dec.lambda0, 41)
    exit_err = float(np.abs(qsd_exit_law(dec, t_exit) - np.exp(-dec.lambda0 * t_exit)).max())
    x0 = g.nearest(float(cfg["sim.x0"]))
    s = {
        "n": g.size, "L": g.L, "tail_error": g.tail_error, "mu_mass_on_grid": float(W.sum()),
        "lambda0": dec.lambda0, "lambda1": float(dec.eigenvalues[1]), "lambda2": float(dec.eigenvalues[2]),
        "gap": dec.gap, "hs_norm": dec.hs_norm, "residual": ground_state_residual(dec),
        "orthonormality_error": ortho, "psi0_min": float(dec.psi0.min()),
        "qsd_mass_error": abs(float(nu.masses(g).sum()) - 1.0),
        "qed_mass_error": abs(float(m.masses(g).sum()) - 1.0),
        "psi0_parity_defect": parity_defect(dec, 0) if profile.is_even else None,
        "psi1_parity_defect": parity_defect(dec, 1, odd=True) if profile.is_even else None,
        "exit_law_error": exit_err,
        "yaglom_slope": yaglom_rate(dec, x0),
        "uniform_rate_30": uniform_decay_rate(dec, 30.0 / dec.lambda0),
        "heat_diagonal_sup_t2": float(heat_kernel_diagonal(dec, 2.0).max()),
    }
    if refine:
        rep = refine_and_compare(profile, int(cfg["grid.n"]), cfg.grid_L())
        s["refine_relative_change"] = [float(v) for v in rep.relative_change]
        s["refine_psi0_change"] = rep.psi0_change
        s["lambda0_fine"] = float(rep.eigenvalues_fine[0])
    return s


def hard_invariants(summary: dict, cfg: ExperimentConfig) -> dict:
    ok = {
        "lambda0_positive": summary["lambda0"] > 0,
        "gap_positive": summary["gap"] > 0,
        "psi0_positive": summary["psi0_min"] > 0,
        "orthonormal": summary["orthonormality_error"] <= cfg.tol("orthonormal"),
        "residual": summary["residual"] <= cfg.tol("residual"),
        "qsd_mass": summary["qsd_mass_error"] <= cfg.tol("mass"),
        "qed_mass": summary["qed_mass_error"] <= cfg.tol("mass"),
    }
    return ok


def cmd_spectrum(cfg: ExperimentConfig, out: Path):
    out = Path(out)
    profile, dec = spectral_pipeline(cfg)
    summary = spectral_summary(cfg, profile, dec)
    write_spectrum_csv(out / "spectrum.csv", dec)
    write_qsd_csv(out / "qsd.csv", dec)
    times = np.linspace(0.0, 30.0 / dec.lambda0, 61)
    write_decay_csv(out / "decay.csv", dec, float(cfg["sim.x0"]), times)
    inv = hard_invariants(summary, cfg)
    summary["invariants"] = inv
    update_report(out, "spectrum", summary)
    return (profile, dec, summary), sum(not v for v in inv.values())


def round_up(t: float, dt: float) -> float:
    return round(math.ceil(t / dt - 1e-9) * dt, 12)


def sim_config(cfg: ExperimentConfig, *, eps=None, seed=None, n_paths=None, checkpoints=(),
               occupation_time=None) -> SimConfig:
    return SimConfig(x0=float(cfg["sim.x0"]), eps=float(cfg["sim.eps"] if eps is None else eps),
                     dt=float(cfg["sim.dt"]), horizon=float(cfg["sim.horizon"]),
                     n_paths=int(cfg["sim.n_paths"] if n_paths is None else n_paths),
                     seed=int(cfg["sim.seed"] if seed is None else seed),
                     checkpoints=tuple(sorted(set(checkpoints))), occupation_time=occupation_time,
                     survival_step=float(cfg["sim.survival_step"]), kappa=float(cfg["sim.kappa"]))


def mc_targets(cfg: ExperimentConfig, dec) -> dict:
    """Checkpoint and occupation horizon tied to the spectral gap, and reference bin masses."""
    profile = cfg.profile()
    dt = float(cfg["sim.dt"])
    bins = int(cfg["sim.bins"])
    t_cond = round_up(10.0 / dec.gap, dt)
    t_occ = min(round_up(20.0 / dec.gap, dt), float(cfg["sim.horizon"]))
    nu_edges = law_quantile_edges(dec, bins, "qsd")
    m_edges = law_quantile_edges(dec, bins, "qed")
    return {"t_cond": t_cond, "t_occ": t_occ, "nu_edges": nu_edges, "m_edges": m_edges,
            "nu_masses": law_bin_masses(dec, profile, nu_edges, "qsd"),
            "m_masses": law_bin_masses(dec, profile, m_edges, "qed")}


def _fallback_edges(bins: int) -> np.ndarray:
    r = np.geomspace(0.05, 20.0, max(bins // 2 - 1, 1))
    return np.concatenate([[-np.inf], -r[::-1], [0.0], r, [np.inf]])


def cmd_simulate(cfg: ExperimentConfig, out: Path, threads: int = 1, dec=None, n_paths=None):
    out = Path(out)
    profile = cfg.profile()
    _, status, _ = entrance_status(cfg)
    if dec is None and status == "FINITE":
        _, dec = spectral_pipeline(cfg)
    extra = [float(c) for c in cfg["sim.checkpoints"]]
    if dec is not None:
        tg = mc_targets(cfg, dec)
        checkpoints = extra + [tg["t_cond"]]
        occ_time, occ_edges, cond_edges = tg["t_occ"], tg["m_edges"], tg["nu_edges"]
    else:
        tg = None
        checkpoints = extra or [min(1.0, float(cfg["sim.horizon"]))]
        occ_time = float(max(checkpoints))
        occ_edges = cond_edges = _fallback_edges(int(cfg["sim.bins"]))
    sc = sim_config(cfg, checkpoints=checkpoints, occupation_time=occ_time, n_paths=n_paths)
    stats = run_ensemble(profile, sc, occupation_edges=occ_edges, threads=threads)

    write_survival_csv(out / "survival.csv", stats)
    for c, t in enumerate(stats.config.checkpoints):
        write_bins_csv(out / f"conditional_t{_io.fmt(t)}.csv", cond_edges, stats.conditional_hist(c, cond_edges))
    occ = stats.occupation_survivors()
    masses = occ.mean(axis=0) if occ.shape[0] else np.full(occ_edges.size - 1, np.nan)
    write_bins_csv(out / "occupation.csv", occ_edges, masses)
    write_hits_csv(out / "hits.csv", stats)
    section = {"n_paths": stats.n_paths, "killed": stats.killed, "escaped": stats.escaped,
               "alive_at_horizon": int(np.sum(stats.flag == 0)), "eps": sc.eps, "dt": sc.dt,
               "seed": sc.seed, "checkpoints": list(sc.checkpoints),
               "survivors_at_checkpoints": [int(stats.survivors(c).size) for c in range(len(sc.checkpoints))],
               "occupation_time": occ_time, "occupation_survivors": int(occ.shape[0]),
               "mean_substeps_per_path": float(stats.substeps.mean())}
    update_report(out, "simulate", section)
    return (stats, tg, dec), 0
