"""Command-line front end.

Subcommands
-----------
run            run every (topology, algorithm) pair of a config, one trace each
compare        aligned multi-algorithm table per topology
constants      step-size verdicts and bound constants as JSON
project-check  self-check of the l1 projection and conjugate map

Exit codes: 0 ok, 2 validation, 3 divergence, 4 oracle failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import expand, load_config, preset_names, topology_label
from .engine import ConfigError, compare, prepare, resolve_step, run
from .graph import TopologyError
from .problems import OracleFailure
from .theory import (
    ConstantsError,
    adda_stepsize_admissible,
    auto_dda_step,
    compute_constants,
    dda_stepsize_admissible,
    rho_M,
)

EXIT_OK, EXIT_VALIDATION, EXIT_DIVERGENCE, EXIT_ORACLE = 0, 2, 3, 4
OUT_ENV = "DECAVG_OUT"

log = logging.getLogger("decavg")


class CliError(Exception):
    def __init__(self, code, kind, message):
        super().__init__(message)
        self.code, self.kind = code, kind


def _emit_error(kind, message):
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)


def _out_dir(args, cfg) -> Path:
    base = Path(args.out or os.environ.get(OUT_ENV, "runs"))
    return base / cfg.get("name", "run")


def _load(args):
    try:
        cfg = load_config(args.config)
        return cfg, expand(cfg, args.seed)
    except FileNotFoundError as exc:
        raise CliError(EXIT_VALIDATION, "missing_file", str(exc))
    except ConfigError as exc:
        raise CliError(EXIT_VALIDATION, "schema", str(exc))


def _prepare(rc):
    try:
        return prepare(rc)
    except OracleFailure as exc:
        raise CliError(EXIT_ORACLE, "oracle", str(exc))
    except (TopologyError, ConfigError, ValueError) as exc:
        raise CliError(EXIT_VALIDATION, "validation", str(exc))


def cmd_run(args) -> int:
    cfg, groups = _load(args)
    out = _out_dir(args, cfg)
    instances = [[_prepare(rc) for rc in group] for group in groups]
    for group, insts in zip(groups, instances):
        for rc, inst in zip(group, insts):
            _, warnings = resolve_step(rc, inst)
            if warnings and not args.force:
                raise CliError(EXIT_VALIDATION, "inadmissible_step", f"{rc.algorithm}: {warnings[0]} (use --force)")
    failed = False
    for group, insts in zip(groups, instances):
        for rc, inst in zip(group, insts):
            trace = run(rc, inst)
            csv_path, _ = trace.write(out / f"{topology_label(rc.topology)}_{rc.algorithm}")
            print(csv_path)
            if trace.failure:
                failed = True
                _emit_error("divergence", f"{rc.algorithm}: {trace.failure['message']}")
    return EXIT_DIVERGENCE if failed else EXIT_OK


def cmd_compare(args) -> int:
    cfg, groups = _load(args)
    out = _out_dir(args, cfg)
    failed = False
    for group in groups:
        for rc in group:
            _prepare(rc)
        if not args.force:
            for rc in group:
                _, warnings = resolve_step(rc, prepare(rc))
                if warnings:
                    raise CliError(EXIT_VALIDATION, "inadmissible_step", f"{rc.algorithm}: {warnings[0]} (use --force)")
        try:
            comp = compare(group)
        except ConfigError as exc:
            raise CliError(EXIT_VALIDATION, "validation", str(exc))
        label = topology_label(group[0].topology)
        path = out / f"{label}_compare.csv"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(comp.to_csv())
        for name, tr in zip(comp.algorithms, comp.traces):
            tr.write(out / f"{label}_{name}")
            if tr.failure:
                failed = True
                _emit_error("divergence", f"{name}: {tr.failure['message']}")
        print(path)
    return EXIT_DIVERGENCE if failed else EXIT_OK


def _constants_for(rc, inst) -> dict:
    prob, mix, prox, ref = inst.problem, inst.mixing, inst.prox, inst.reference
    L, beta = prob.L, mix.beta
    a_dda = auto_dda_step(L, beta) if rc.step == "auto" else float(rc.step)
    verdict = dda_stepsize_admissible(a_dda, L, beta)
    entry = {
        "topology": rc.topology,
        "n": prob.n,
        "m": prob.m,
        "L": L,
        "beta": beta,
        "problem_hash": inst.digest,
        "f_star": ref.f_star,
        "dda": {
            "a": a_dda,
            "rho_M": rho_M(a_dda, L, beta),
            "admissible": verdict.admissible,
            "margin": verdict.margin,
            "explicit_bound": verdict.explicit_bound,
            "exact_bound": verdict.exact_bound,
            "scale": verdict.scale,
        },
    }
    try:
        entry["dda"].update(compute_constants(prob, mix, prox, a_dda, ref.x_star, "dda").to_dict())
    except ConstantsError as exc:
        entry["dda"]["error"] = str(exc)
    if prox.constraint.bounded:
        a_adda = 1.0 / (6.0 * L)
        entry["adda"] = compute_constants(prob, mix, prox, a_adda, ref.x_star, "adda").to_dict()
        entry["adda"]["admissible"] = adda_stepsize_admissible(a_adda, L)
    return entry


def cmd_constants(args) -> int:
    cfg, groups = _load(args)
    entries = [_constants_for(group[0], _prepare(group[0])) for group in groups]
    payload = json.dumps({"config": cfg.get("name"), "constants": entries}, indent=2, sort_keys=True)
    out = _out_dir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    (out / "constants.json").write_text(payload + "\n")
    print(payload)
    return EXIT_OK


def cmd_project_check(args) -> int:
    from .checks import projection_report

    report = projection_report(pairs=args.pairs, seed=args.seed or 0)
    payload = json.dumps(report, indent=2, sort_keys=True)
    out = Path(args.out or os.environ.get(OUT_ENV, "runs"))
    out.mkdir(parents=True, exist_ok=True)
    (out / "project_check.json").write_text(payload + "\n")
    print(payload)
    return EXIT_OK if report["ok"] else EXIT_VALIDATION


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="decavg", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required,
                       help=f"config file or preset name ({', '.join(preset_names())})")
        p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./runs)")
        p.add_argument("--seed", type=int, help="override the config seed")

    p = sub.add_parser("run", help="run each algorithm and write trace CSV + JSON sidecar")
    common(p)
    p.add_argument("--force", action="store_true", help="run even when a manual step violates its condition")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="aligned multi-algorithm table per topology")
    common(p)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("constants", help="print step verdicts and bound constants as JSON")
    common(p)
    p.set_defaults(func=cmd_constants)

    p = sub.add_parser("project-check", help="check the l1 projection against KKT and grid oracles")
    common(p, config_required=False)
    p.add_argument("--pairs", type=int, default=200)
    p.set_defaults(func=cmd_project_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s %(name)s: %(message)s")
    if args.seed is not None and args.seed < 0:
        _emit_error("validation", "seed must be non-negative")
        return EXIT_VALIDATION
    np.seterr(over="ignore", invalid="ignore")
    try:
        return args.func(args)
    except CliError as exc:
        _emit_error(exc.kind, str(exc))
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
