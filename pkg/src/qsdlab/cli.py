"""Command line: ``qsdlab {analyze,spectrum,simulate,validate} [--config F] [--out D] [--seed S] [--threads N]``.

Exit status is 0 on full success.  For ``validate`` it is the number of failed
checks; configuration errors exit with 2.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ConfigError, ExperimentConfig, config_from_dict, parse_config
from .experiments import cmd_analyze, cmd_simulate, cmd_spectrum, entrance_status
from .model_measure import ProfileError
from .spectral_solver import SpectralError
from .validation import failures, run_validation

COMMANDS = ("analyze", "spectrum", "simulate", "validate")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qsdlab", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", type=Path, default=None, help="TOML file of dotted keys (defaults if omitted)")
    p.add_argument("--out", type=Path, default=None, help="output directory (overrides the config)")
    p.add_argument("--seed", type=int, default=None, help="unsigned 64-bit seed (overrides sim.seed)")
    p.add_argument("--threads", type=int, default=None, help="worker threads for path simulation")
    return p


def load(args) -> ExperimentConfig:
    spectral = args.command == "spectrum"
    if args.config is None:
        cfg = config_from_dict({"alpha": 1.5, "sigma": {"gamma": 2.0}}, spectral=spectral)
    else:
        cfg = parse_config(args.config, spectral=spectral)
    over = {}
    if args.seed is not None:
        if not 0 <= args.seed < 2 ** 64:
            raise SystemExit("--seed must be an unsigned 64-bit integer")
        over["sim__seed"] = args.seed
    if args.out is not None:
        over["output"] = str(args.out)
    if args.threads is not None:
        if args.threads < 1:
            raise SystemExit("--threads must be >= 1")
        over["threads"] = args.threads
    return cfg.with_overrides(**over) if over else cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load(args)
    except ConfigError as exc:
        print("configuration rejected:", file=sys.stderr)
        for v in exc.violations:
            print(f"  {v}", file=sys.stderr)
        return 2
    out = cfg.output
    out.mkdir(parents=True, exist_ok=True)
    threads = int(cfg["threads"])
    try:
        if args.command == "analyze":
            section, code = cmd_analyze(cfg, out)
            print(f"entrance: {section['status']} I={section.get('entrance_integral')} "
                  f"delta={section.get('delta')} lambda0_lower={section.get('lambda0_lower')}")
            return code
        if args.command == "spectrum":
            (_, dec, summary), code = cmd_spectrum(cfg, out)
            print(f"lambda0={summary['lambda0']:.10g} lambda1={summary['lambda1']:.10g} "
                  f"residual={summary['residual']:.3g} hs_norm={summary['hs_norm']:.6g}")
            for name, ok in summary["invariants"].items():
                if not ok:
                    print(f"invariant failed: {name}", file=sys.stderr)
            return code
        if args.command == "simulate":
            (stats, _, _), code = cmd_simulate(cfg, out, threads=threads)
            print(f"paths={stats.n_paths} killed={stats.killed} escaped={stats.escaped}")
            return code
        # validate: produce the artifacts first when they are missing
        if not (out / "entrance.csv").exists():
            cmd_analyze(cfg, out)
        finite = entrance_status(cfg)[1] == "FINITE"
        if finite and not (out / "spectrum.csv").exists():
            cmd_spectrum(cfg, out)
        if not (out / "survival.csv").exists():
            cmd_simulate(cfg, out, threads=threads)
        results = run_validation(cfg, out, threads=threads)
        n_fail = failures(results)
        print(f"{len(results)} checks, {n_fail} failed; report written to {out / 'report.json'}")
        return min(n_fail, 255)
    except (SpectralError, ProfileError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
