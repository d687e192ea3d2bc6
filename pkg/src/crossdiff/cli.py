"""Command-line entry points.

Exit codes: 0 on success with all verdicts passing, 1 when a study verdict
fails or a run diverges, 2 on usage or configuration errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .config import RunConfig, parse_config
from .errors import CrossDiffusionError, HypothesisH3Violated, NewtonDiverged, ParseError
from .experiments import (
    StudyResult,
    decay_study,
    epsilon_study,
    equilibration_study,
    heat_equivalence_study,
    stability_study,
)
from .grid import write_snapshot
from .model import classify_species, validate_hypotheses
from .solver import run

STUDY_COMMANDS = (
    "heat-check",
    "decay-study",
    "stability-study",
    "epsilon-study",
    "equilibration-study",
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crossdiff",
        description="Structure-preserving simulator for size-exclusion cross-diffusion",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    val = sub.add_parser("validate", help="check a coefficient table and classify species")
    val.add_argument("--config", help="configuration file with a [model] section")
    val.add_argument("--matrix", help="inline row-major table, comma separated")
    val.add_argument("--quiet", action="store_true")

    for name, desc in [
        ("simulate", "run the solver and emit snapshots plus a report"),
        ("heat-check", "two-species run against the exact diffusion solution"),
        ("decay-study", "fit the relative-entropy decay rate"),
        ("stability-study", "growth constants of perturbed runs"),
        ("epsilon-study", "vanishing-regularization limit"),
        ("equilibration-study", "long-horizon relaxation to the steady state"),
    ]:
        p = sub.add_parser(name, help=desc)
        p.add_argument("--config", required=True, help="configuration file")
        p.add_argument("--out", help="output directory (overrides [output] dir)")
        p.add_argument("--quiet", action="store_true")
    return parser


def _load_config(path: str) -> tuple[RunConfig, str]:
    text = Path(path).read_text()
    return parse_config(text), text


def _emit_config_copy(out_dir, text: str):
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.toml").write_text(text)


def _print_verdicts(result: StudyResult, quiet: bool):
    if not quiet:
        for v in result.verdicts:
            print(f"{'PASS' if v.passed else 'FAIL'} {v.criterion}: {v.detail}")


def _cmd_validate(args) -> int:
    if args.config:
        cfg, _ = _load_config(args.config)
        model, report = cfg.model, cfg.hypotheses
    elif args.matrix:
        flat = [float(tok) for tok in args.matrix.replace(";", ",").split(",") if tok.strip()]
        size = int(round(len(flat) ** 0.5))
        if size * size != len(flat) or size < 2:
            raise ParseError(f"--matrix needs a square table, got {len(flat)} entries")
        model, report = validate_hypotheses(np.asarray(flat).reshape(size, size))
    else:
        raise ParseError("validate needs --config or --matrix")
    payload = {"hypotheses": report.as_dict()}
    try:
        payload["classification"] = classify_species(model).as_dict()
    except HypothesisH3Violated:
        payload["classification"] = None
    if not args.quiet:
        print(json.dumps(payload, indent=2))
    return 0


def _cmd_simulate(args) -> int:
    cfg, text = _load_config(args.config)
    out_dir = args.out or cfg.output_dir
    initial = cfg.build_initial()
    result = run(initial, cfg.model, cfg.solver, cfg.grid)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.toml").write_text(text)
        result.report.to_csv(out / "report.csv")
        for t, fld in zip(result.times, result.fields):
            step = int(round(t / cfg.solver.tau))
            write_snapshot(out / f"snapshot_{step:06d}.csv", fld, cfg.grid)
    if not args.quiet:
        rep = result.report
        drift = float(np.abs(rep.mass - rep.mass[0]).max())
        print(
            f"steps={cfg.solver.steps} H(0)={rep.entropy[0]:.9g} "
            f"H(T)={rep.entropy[-1]:.9g} mass_drift={drift:.3e}"
        )
    return 0


def _run_study(name: str, args) -> int:
    cfg, text = _load_config(args.config)
    out_dir = args.out or cfg.output_dir
    study = cfg.study
    if name == "heat-check":
        result = heat_equivalence_study(
            cfg.model,
            cfg.grid,
            cfg.solver,
            out_dir=out_dir,
            check_refinement=study.get("refine", True),
        )
    elif name == "decay-study":
        result = decay_study(
            cfg.model,
            study.get("amplitude", 0.01),
            cfg.grid,
            cfg.solver,
            out_dir=out_dir,
        )
    elif name == "stability-study":
        result = stability_study(
            cfg.model,
            study.get("deltas", (1e-2, 1e-3, 1e-4)),
            study.get("horizon", cfg.solver.t_end),
            cfg.grid,
            cfg.solver,
            out_dir=out_dir,
        )
    elif name == "epsilon-study":
        result = epsilon_study(
            cfg.model,
            study.get("epsilons", (0.1, 0.05, 0.025, 0.0125)),
            cfg.grid,
            cfg.solver,
            initial=cfg.build_initial() if cfg.initial else None,
            out_dir=out_dir,
        )
    elif name == "equilibration-study":
        result = equilibration_study(
            cfg.model, cfg.build_initial(), cfg.grid, cfg.solver, out_dir=out_dir
        )
    else:  # pragma: no cover - guarded by the parser
        raise ParseError(f"unknown study {name}")
    _emit_config_copy(out_dir, text)
    _print_verdicts(result, args.quiet)
    return 0 if result.passed else 1


def cli(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "validate":
            return _cmd_validate(args)
        if args.command == "simulate":
            return _cmd_simulate(args)
        return _run_study(args.command, args)
    except NewtonDiverged as err:
        print(f"error: solver diverged: {err}", file=sys.stderr)
        return 1
    except (CrossDiffusionError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


def main():  # pragma: no cover - thin wrapper
    sys.exit(cli(sys.argv[1:]))


if __name__ == "__main__":  # pragma: no cover
    main()
