"""Command-line interface: persistence thresholds, eigenvalues and wave profiles for a moving habitat.

Exit codes: 0 success, 1 input error, 2 numerical failure, 3 audit failure.
A manifest is written to the output directory on every exit.
"""
from __future__ import annotations

import argparse
import json
import math
from pathlib import Path
import sys
import time

import numpy as np

from . import __version__, analysis, io
from .config import RunConfig
from .errors import AuditFailure, CFLError, ConfigError, NumericalError
from .frame_solver import evolve, simulate_fixed_frame, steady_state_from_above
from .grid import Field
from .periodic import periodization_limit
from .spectral import (characteristic_roots, principal_eigenvalue, spreading_speed)

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_AUDIT = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_INPUT)


def _floats(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _bracket(text: str) -> tuple:
    vals = _floats(text)
    if len(vals) != 2:
        raise argparse.ArgumentTypeError("--bracket takes lo,hi")
    return tuple(vals)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--out", help="output directory (default: config output_dir)")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--c", type=float, dest="c_override", help="override the habitat speed")
    common.add_argument("--L", type=float, dest="L_override", help="override the patch half-width")
    common.add_argument("--svg", action="store_true", help="also write SVG plots")

    parser = _Parser(prog="habitat-waves", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    sub.add_parser("speed", parents=[common], help="spreading speed c* and minimizer mu*")
    p = sub.add_parser("roots", parents=[common], help="roots mu-(lambda) < 0 < mu+(lambda)")
    p.add_argument("--lambda", type=float, default=0.0, dest="lam")
    p = sub.add_parser("eigen", parents=[common], help="principal eigenvalue lambda(c, L)")
    p.add_argument("--periodic", action="store_true", help="periodized habitat, p doubled --doublings times")
    p.add_argument("--p", type=float, help="base period (default 4(L+L0))")
    p.add_argument("--doublings", type=int, default=3)
    p.add_argument("--scheme", choices=("integral", "upwind"), default="integral")
    p.add_argument("--cross-check", action="store_true", help="compare with the growth-rate method")
    sub.add_parser("wave", parents=[common], help="steady state from above and tail audit")
    p = sub.add_parser("simulate", parents=[common], help="time-dependent run from a constant")
    p.add_argument("--fixed-frame", action="store_true")
    p.add_argument("--initial", type=float, default=1.0, help="constant initial value")
    p = sub.add_parser("lstar", parents=[common], help="critical patch half-width")
    p.add_argument("--bracket", type=_bracket, default=(0.01, 20.0))
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--steady", action="store_true", help="bisect on steady-state positivity instead")
    p = sub.add_parser("sweep", parents=[common], help="phase diagram over (c, L)")
    p.add_argument("--c-values", type=_floats)
    p.add_argument("--L-values", type=_floats)
    p.add_argument("--timings", action="store_true", help="add the wall_time column")
    sub.add_parser("classify", parents=[common], help="classify one (c, L) cell")
    p = sub.add_parser("audit", parents=[common], help="comparison/uniqueness/equivalence campaigns")
    p.add_argument("--kind", choices=("comparison", "uniqueness", "equivalence", "all"), default="all")
    p.add_argument("--pairs", type=int, default=100)
    return parser


def _load(args) -> RunConfig:
    data = {}
    if args.config:
        path = Path(args.config)
        try:
            data = json.loads(path.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
    if args.seed is not None:
        data["seed"] = args.seed
    if args.c_override is not None:
        data["c"] = args.c_override
    if args.L_override is not None:
        data.setdefault("growth", {})
        data["growth"] = dict(data["growth"], L=args.L_override)
    return RunConfig.from_dict(data)


def _print(obj):
    sys.stdout.write(io.dumps(obj))


def _tolerances(cfg: RunConfig) -> dict:
    return {"band": cfg.band, "steady_tol": cfg.steady_tol, "dt": cfg.dt, "t_max": cfg.t_max,
            "eigen_tol": 1e-12, "method": cfg.method}


# --- commands ----------------------------------------------------------------

def cmd_speed(cfg, args, out, man):
    c_star, mu_star = spreading_speed(cfg.kernel, cfg.growth.r)
    res = {"c_star": c_star, "mu_star": mu_star}
    man.outputs.append(str(io.emit_json(res, out / "speed.json")))
    _print(res)
    return EXIT_OK, res


def cmd_roots(cfg, args, out, man):
    roots = characteristic_roots(cfg.c, cfg.growth.q, cfg.kernel, args.lam)
    res = {"c": cfg.c, "q": cfg.growth.q, "lambda": args.lam, "mu_minus": roots.mu_minus,
           "mu_plus": roots.mu_plus, "residuals": list(roots.residuals)}
    man.outputs.append(str(io.emit_json(res, out / "roots.json")))
    _print(res)
    return EXIT_OK, res


def cmd_eigen(cfg, args, out, man):
    growth, grid, op = analysis._instance(cfg)
    if args.periodic:
        p = args.p if args.p is not None else 4 * growth.outer_edge
        per = periodization_limit(cfg.c, growth, p, args.doublings, op, scheme=args.scheme)
        res = {"c": cfg.c, "L": growth.L, "periods": per.periods, "lambda_p": per.values,
               "limit": per.limit, "max_increase": per.max_increase, "monotone": per.monotone,
               "scheme": args.scheme}
        man.outputs.append(str(io.emit_json(res, out / "eigen_periodic.json")))
        _print(res)
        return EXIT_OK, res
    rep = principal_eigenvalue(cfg.c, growth, grid, op, cross_check=args.cross_check,
                               method=cfg.method)
    res = rep.to_json()
    man.outputs.append(str(io.emit_json(res, out / "eigen.json")))
    man.outputs.append(str(io.write_profile(rep.eigenfunction, out / "eigenfunction.csv")))
    if args.svg:
        man.outputs.append(str(io.emit_svg(rep.eigenfunction, out / "eigenfunction.svg")))
    _print(res)
    return EXIT_OK, res


def cmd_wave(cfg, args, out, man):
    growth, grid, op = analysis._instance(cfg)
    steady = steady_state_from_above(cfg.c, op, growth, cfg.settings, grid)
    res = {"c": cfg.c, "L": growth.L, "kind": steady.kind, "steady_max": steady.steady_max,
           "residual": steady.residual, "newton_steps": steady.newton_steps,
           "max_increase": steady.max_increase}
    man.outputs.append(str(io.write_profile(steady.field, out / "wave.csv")))
    code = EXIT_OK
    fits = None
    if steady.positive:
        audit = analysis.wave_tail_audit(steady.field, cfg.c, growth, cfg.kernel)
        res["tail"] = {"slopes": audit.slopes, "bounds": audit.bounds, "window": audit.window,
                       "supersolution_excess": {f"{s}_{t:g}": e for (t, s), e in
                                                audit.supersolution_excess.items()},
                       "passed": audit.passed}
        lo, hi = audit.window
        fits = [(audit.slopes[0], (lo, hi)), (audit.slopes[1], (-hi, -lo))]
        if not audit.passed:
            code = EXIT_AUDIT
    if args.svg:
        man.outputs.append(str(io.emit_svg(steady.field, out / "wave.svg", tail_fits=fits)))
    man.outputs.append(str(io.emit_json(res, out / "wave.json")))
    _print(res)
    return code, res


def cmd_simulate(cfg, args, out, man):
    growth, grid, op = analysis._instance(cfg)
    if args.initial < 0:
        raise ConfigError("--initial must be nonnegative")
    if args.fixed_frame:
        traj = simulate_fixed_frame(Field.constant(grid, args.initial, "fixed"), cfg.c, op, growth,
                                    cfg.settings)
    else:
        traj = evolve(Field.constant(grid, args.initial), cfg.c, op, growth, cfg.settings)
    directory = out / ("trajectory_fixed" if args.fixed_frame else "trajectory")
    man.outputs.append(str(io.write_trajectory(traj.fields, directory, traj.reason)))
    if args.svg:
        man.outputs.append(str(io.emit_svg(traj.final, directory / "final.svg")))
    res = {"reason": traj.reason, "t_end": traj.final.time, "sup_final": traj.final.sup(),
           "frame": "fixed" if args.fixed_frame else "moving", "snapshots": len(traj.fields),
           "dt": traj.diagnostics.get("dt")}
    _print(res)
    return EXIT_OK, res


def cmd_lstar(cfg, args, out, man):
    search = analysis.steady_threshold if args.steady else analysis.critical_patch_size
    result = search(cfg.c, cfg, args.bracket, args.tol)
    res = result.to_json()
    man.outputs.append(str(io.emit_json(res, out / "lstar.json")))
    _print(res)
    if not result.finite and not math.isinf(result.L_crossing):
        return EXIT_NUMERIC, res
    if not result.finite and "no finite threshold" not in result.message:
        return EXIT_NUMERIC, res
    return EXIT_OK, res


def cmd_sweep(cfg, args, out, man):
    c_values = args.c_values or cfg.sweep_c
    L_values = args.L_values or cfg.sweep_L
    if not c_values or not L_values:
        raise ConfigError("sweep needs c and L values (config sweep block or --c-values/--L-values)")
    if any(c < 0 for c in c_values):
        raise ConfigError("sweep c values must be >= 0 (reflect x -> -x for habitats moving left)")
    cells = analysis.phase_sweep(c_values, L_values, cfg)
    man.outputs.append(str(io.write_sweep(cells, out / "sweep.csv", timings=args.timings)))
    if args.svg:
        man.outputs.append(str(io.emit_svg(cells, out / "phase.svg")))
    man.outcome["wall_time"] = [cell.wall_time for cell in cells]
    errors = [cell.error for cell in cells if cell.error]
    res = {"cells": len(cells), "errors": errors,
           "counts": {k: sum(cell.classification == k for cell in cells) for k in analysis.CLASSES},
           "row_monotone": analysis.row_monotone(cells)}
    _print(res)
    return (EXIT_NUMERIC if errors else EXIT_OK), res


def cmd_classify(cfg, args, out, man):
    cell = analysis.classify(cfg.c, cfg.growth.L, cfg)
    res = cell.to_json()
    man.outputs.append(str(io.emit_json(res, out / "classify.json")))
    _print(res)
    return EXIT_OK, res


def cmd_audit(cfg, args, out, man):
    kinds = ("comparison", "uniqueness", "equivalence") if args.kind == "all" else (args.kind,)
    res, failed = {}, []
    L = cfg.growth.L
    if "comparison" in kinds:
        rep = analysis.comparison_campaign(cfg.c, L, cfg, count=args.pairs)
        res["comparison"] = {"max_violation": rep.max_violation, "pairs": rep.pairs,
                             "passed": rep.passed}
        if not rep.passed:
            failed.append("comparison")
    if "uniqueness" in kinds:
        rep = analysis.uniqueness_audit(cfg.c, L, cfg)
        res["uniqueness"] = {"gap": rep.gap, "kinds": rep.kinds, "flags": rep.flags,
                             "passed": rep.passed}
        if not rep.passed:
            failed.append("uniqueness")
    if "equivalence" in kinds:
        c_values = cfg.sweep_c or [cfg.c]
        L_values = cfg.sweep_L or [L]
        rep = analysis.equivalence_audit(c_values, L_values, cfg)
        res["equivalence"] = {"agreement": rep.agreement, "disagreements": rep.disagreements,
                              "passed": rep.passed}
        if not rep.passed:
            failed.append("equivalence")
    res["failed"] = failed
    man.outputs.append(str(io.emit_json(res, out / "audit.json")))
    _print(res)
    if failed:
        raise AuditFailure(f"audit failed: {', '.join(failed)}", res)
    return EXIT_OK, res


COMMANDS = {"speed": cmd_speed, "roots": cmd_roots, "eigen": cmd_eigen, "wave": cmd_wave,
            "simulate": cmd_simulate, "lstar": cmd_lstar, "sweep": cmd_sweep,
            "classify": cmd_classify, "audit": cmd_audit}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code in (0, None):
            return EXIT_OK
        _usage_manifest(argv, "usage error")
        return EXIT_INPUT
    if args.command is None:
        parser.print_help(sys.stderr)
        _usage_manifest(argv, "no subcommand given")
        return EXIT_INPUT

    man = io.RunManifest(args.command, version=__version__)
    out = Path(args.out) if args.out else None
    t0 = time.perf_counter()
    code = EXIT_OK
    try:
        cfg = _load(args)
        out = out or Path(cfg.output_dir)
        man.config, man.config_hash, man.seed = cfg.to_dict(), cfg.content_hash(), cfg.seed
        man.tolerances = _tolerances(cfg)
        code, res = COMMANDS[args.command](cfg, args, out, man)
    except (ConfigError, CFLError) as exc:
        code = EXIT_INPUT
        man.outcome["error"] = str(exc)
        print(f"input error: {exc}", file=sys.stderr)
    except NumericalError as exc:
        code = EXIT_NUMERIC
        man.outcome.update(error=str(exc), diagnostics=_safe(exc.diagnostics))
        print(f"numerical failure: {exc}", file=sys.stderr)
    except AuditFailure as exc:
        code = EXIT_AUDIT
        man.outcome["error"] = str(exc)
        print(str(exc), file=sys.stderr)
    except (ValueError, OSError) as exc:
        code = EXIT_INPUT
        man.outcome["error"] = str(exc)
        print(f"error: {exc}", file=sys.stderr)
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        code = EXIT_NUMERIC
        man.outcome["error"] = f"{type(exc).__name__}: {exc}"
        print(f"numerical failure: {exc}", file=sys.stderr)
    man.finish(code, elapsed=time.perf_counter() - t0)
    try:
        man.write(out or Path("out"))
    except OSError as exc:
        print(f"could not write manifest: {exc}", file=sys.stderr)
    return code


def _usage_manifest(argv, message):
    argv = list(sys.argv[1:] if argv is None else argv)
    out = "out"
    for i, tok in enumerate(argv):
        if tok == "--out" and i + 1 < len(argv):
            out = argv[i + 1]
        elif tok.startswith("--out="):
            out = tok.split("=", 1)[1]
    man = io.RunManifest("usage", version=__version__, outcome={"error": message, "argv": argv})
    try:
        man.finish(EXIT_INPUT).write(out)
    except OSError:
        pass


def _safe(obj):
    try:
        json.dumps(io._jsonable(obj), allow_nan=False)
        return obj
    except (TypeError, ValueError):
        return repr(obj)


if __name__ == "__main__":
    sys.exit(main())
