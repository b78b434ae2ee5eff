"""Experiment configuration: a TOML file of dotted keys such as ``sigma.gamma = 2``.

Every violation is collected before an error is raised, each with the key
path it concerns.
"""
from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .model_measure import SigmaProfile, load_sigma_table, polynomial_sigma


@dataclass(frozen=True)
class Violation:
    code: str
    key: str
    message: str

    def __str__(self):
        return f"{self.code} [{self.key}]: {self.message}"


class ConfigError(ValueError):
    def __init__(self, violations: list[Violation]):
        self.violations = list(violations)
        super().__init__("\n".join(str(v) for v in self.violations))

    @property
    def codes(self) -> list[str]:
        return [v.code for v in self.violations]


_NUM = (int, float)
# key -> (accepted types, default); a default of ... marks a required key
SCHEMA: dict[str, tuple[tuple[type, ...], object]] = {
    "alpha": (_NUM, ...),
    "output": ((str,), "out"),
    "threads": ((int,), 1),
    "sigma.kind": ((str,), "polynomial"),
    "sigma.gamma": (_NUM, None),
    "sigma.table": ((str,), None),
    "grid.n": ((int,), 400),
    "grid.L": (_NUM + (str,), "auto"),
    "sim.x0": (_NUM, 1.0),
    "sim.eps": (_NUM, 1e-3),
    "sim.eps_levels": ((list,), [1e-2, 10 ** -2.5, 1e-3]),
    "sim.dt": (_NUM, 1e-3),
    "sim.horizon": (_NUM, 30.0),
    "sim.n_paths": ((int,), 100_000),
    "sim.seed": ((int,), 20240601),
    "sim.checkpoints": ((list,), []),
    "sim.kappa": (_NUM, 0.1),
    "sim.survival_step": (_NUM, 0.01),
    "sim.fit_window": ((list,), [1.0, 3.5]),
    "sim.bins": ((int,), 10),
    "sim.moment_seeds": ((int,), 5),
    "sim.hit_R": (_NUM, 1.0),
    "sim.hit_x0": (_NUM, 2.0),
    "sim.hit_paths": ((int,), 100_000),
    "validate.suites": ((list,), ["kernels", "entrance", "spectral", "mc", "determinism"]),
    "validate.kernel_samples": ((int,), 100_000),
    "validate.scaling_samples": ((int,), 10_000),
    "validate.determinism_paths": ((int,), 4096),
    "validate.tol_kernel": (_NUM, 1e-12),
    "validate.tol_exterior_limit": (_NUM, 1e-2),
    "validate.tol_scaling": (_NUM, 1e-10),
    "validate.tol_entrance": (_NUM, 1e-6),
    "validate.tol_delta": (_NUM, 1e-4),
    "validate.tol_lambda_bound": (_NUM, 1e-4),
    "validate.tol_hs": (_NUM, 1e-6),
    "validate.tol_orthonormal": (_NUM, 1e-10),
    "validate.tol_residual": (_NUM, 1e-8),
    "validate.tol_refine": (_NUM, 1e-3),
    "validate.tol_bound_slack": (_NUM, 1e-2),
    "validate.tol_mass": (_NUM, 1e-8),
    "validate.tol_parity": (_NUM, 1e-6),
    "validate.tol_exit_law": (_NUM, 1e-6),
    "validate.tol_yaglom": (_NUM, 0.05),
    "validate.tol_uniform": (_NUM, 0.02),
    "validate.tol_mc_rate": (_NUM, 0.10),
    "validate.tol_tv": (_NUM, 0.05),
    "validate.tol_hit_sigma": (_NUM, 3.0),
    "validate.tol_hit_probability": (_NUM, 1e-2),
}
SUITES = ("kernels", "entrance", "spectral", "mc", "determinism")


@dataclass(frozen=True)
class ExperimentConfig:
    values: dict = field(repr=False)
    base_dir: Path = Path(".")

    def __getitem__(self, key):
        return self.values[key]

    @property
    def alpha(self) -> float:
        return float(self.values["alpha"])

    @property
    def output(self) -> Path:
        return Path(self.values["output"])

    def tol(self, name: str) -> float:
        return float(self.values[f"validate.tol_{name}"])

    def suites(self) -> set[str]:
        return set(self.values["validate.suites"])

    def grid_L(self):
        L = self.values["grid.L"]
        return "auto" if isinstance(L, str) else float(L)

    def profile(self) -> SigmaProfile:
        if self.values["sigma.kind"] == "polynomial":
            return polynomial_sigma(self.alpha, float(self.values["sigma.gamma"]))
        table = Path(self.values["sigma.table"])
        if not table.is_absolute():
            table = self.base_dir / table
        return load_sigma_table(self.alpha, table)

    def with_overrides(self, **kv) -> "ExperimentConfig":
        vals = dict(self.values)
        for k, v in kv.items():
            vals[k.replace("__", ".")] = v
        return ExperimentConfig(vals, self.base_dir)

    def echo(self) -> dict:
        return {k: self.values[k] for k in sorted(self.values)}


def _flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def _type_ok(value, types) -> bool:
    if isinstance(value, bool):
        return bool in types
    return isinstance(value, types)


def _constraints(v: dict, spectral: bool) -> list[Violation]:
    bad: list[Violation] = []

    def need(cond, key, msg, code="CONSTRAINT"):
        if not cond:
            bad.append(Violation(code, key, msg))

    a = float(v["alpha"])
    need(1.0 < a < 2.0, "alpha", f"alpha must lie in (1, 2), got {a}", "ALPHA_RANGE")
    kind = v["sigma.kind"]
    need(kind in ("polynomial", "tabulated"), "sigma.kind", f"unknown kind {kind!r}")
    if kind == "polynomial":
        g = v["sigma.gamma"]
        if g is None:
            bad.append(Violation("MISSING_KEY", "sigma.gamma", "polynomial profiles need gamma"))
        else:
            g = float(g)
            need(g > 0, "sigma.gamma", "gamma must be positive")
            if spectral and g <= 1.0:
                bad.append(Violation("ENTRANCE_FAIL", "sigma.gamma",
                                     f"gamma = {g} <= 1: the entrance integral diverges (finite only for gamma > 1), "
                                     "so the Green operator is not Hilbert-Schmidt"))
    elif kind == "tabulated" and v["sigma.table"] is None:
        bad.append(Violation("MISSING_KEY", "sigma.table", "tabulated profiles need a table path"))
    n = v["grid.n"]
    need(n >= 16 and n % 2 == 0, "grid.n", "n must be an even count >= 16")
    L = v["grid.L"]
    if isinstance(L, str):
        need(L.lower() == "auto", "grid.L", "L must be positive or 'auto'")
    else:
        need(L > 0, "grid.L", "L must be positive")
    need(v["threads"] >= 1, "threads", "threads must be >= 1")
    for key in ("sim.eps", "sim.dt", "sim.horizon", "sim.kappa", "sim.survival_step", "sim.hit_R"):
        need(float(v[key]) > 0, key, "must be positive")
    need(float(v["sim.x0"]) != 0 and abs(float(v["sim.x0"])) > float(v["sim.eps"]), "sim.x0",
         "x0 must be nonzero with |x0| > eps")
    need(float(v["sim.dt"]) < float(v["sim.horizon"]), "sim.dt", "dt must be below the horizon")
    need(float(v["sim.kappa"]) <= 1.0, "sim.kappa", "kappa must be <= 1")
    for key in ("sim.n_paths", "sim.hit_paths", "sim.moment_seeds", "sim.bins"):
        need(v[key] >= 1, key, "must be >= 1")
    need(0 <= v["sim.seed"] < 2 ** 64, "sim.seed", "seed must be an unsigned 64-bit integer")
    need(abs(float(v["sim.hit_x0"])) > float(v["sim.hit_R"]), "sim.hit_x0", "need |hit_x0| > hit_R")
    levels = v["sim.eps_levels"]
    need(len(levels) >= 2 and all(_type_ok(e, _NUM) and e > 0 for e in levels), "sim.eps_levels",
         "need at least two positive levels")
    win = v["sim.fit_window"]
    need(len(win) == 2 and all(_type_ok(e, _NUM) for e in win) and 0 <= win[0] < win[1], "sim.fit_window",
         "need [t_lo, t_hi] with 0 <= t_lo < t_hi")
    for c in v["sim.checkpoints"]:
        need(_type_ok(c, _NUM) and 0 < c <= float(v["sim.horizon"]), "sim.checkpoints",
             f"checkpoint {c!r} outside (0, horizon]")
    for s in v["validate.suites"]:
        need(s in SUITES, "validate.suites", f"unknown suite {s!r}")
    for key in v:
        if key.startswith("validate.tol_"):
            need(float(v[key]) > 0, key, "tolerances must be positive")
    return bad


def config_from_dict(raw: dict, base_dir: Path = Path("."), *, spectral: bool = False) -> ExperimentConfig:
    flat = _flatten(raw)
    bad: list[Violation] = []
    for key in sorted(flat):
        if key not in SCHEMA:
            bad.append(Violation("UNKNOWN_KEY", key, "not a recognised key"))
    values = {}
    for key, (types, default) in SCHEMA.items():
        if key in flat:
            val = flat[key]
            if not _type_ok(val, types):
                bad.append(Violation("TYPE_MISMATCH", key,
                                     f"expected {'/'.join(t.__name__ for t in types)}, got {type(val).__name__}"))
                continue
            values[key] = val
        elif default is ...:
            bad.append(Violation("MISSING_KEY", key, "required"))
        else:
            values[key] = list(default) if isinstance(default, list) else default
    if not bad:
        bad = _constraints(values, spectral)
    if bad:
        raise ConfigError(bad)
    return ExperimentConfig(values, Path(base_dir))


def parse_config(path, *, spectral: bool = False) -> ExperimentConfig:
    """Read and validate a configuration file; ``spectral`` requests the entrance check."""
    path = Path(path)
    try:
        with path.open("rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError([Violation("UNREADABLE", str(path), str(exc))]) from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([Violation("SYNTAX", str(path), str(exc))]) from exc
    return config_from_dict(raw, path.parent, spectral=spectral)


def default_config(alpha: float = 1.5, gamma: float = 2.0, **overrides) -> ExperimentConfig:
    raw: dict = {"alpha": alpha, "sigma": {"gamma": gamma}}
    cfg = config_from_dict(raw)
    return cfg.with_overrides(**overrides) if overrides else cfg
