"""Command-line front end.

Subcommands: synth, sweep, curve, toy, phase-map, validate. Options may come
from an INI config file (section per subcommand plus [common]); command-line
flags win. All outputs are plain CSV/JSON written atomically. Exit codes:
0 success, 2 config/usage error, 3 precondition violation, 4 numerical
failure.
"""
from __future__ import annotations

import argparse
import configparser
import json
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import bench, storage, tolerances
from .dynamics import error_curve
from .curves import frenet
from .errors import NumericalError, PreconditionError
from .synthesis import orange_slice_2d, phase_vs_twist, twisted_3d
from .validate import validate_design

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PRECONDITION = 3
EXIT_NUMERICAL = 4


class UsageError(Exception):
    pass


def _parse_number(text: str) -> float:
    """Float parser that also accepts simple pi expressions like pi/2000."""
    s = text.strip().lower().replace(" ", "")
    try:
        return float(s)
    except ValueError:
        pass
    if s.startswith("-"):
        return -_parse_number(s[1:])
    if s.startswith("pi/"):
        return float(np.pi / float(s[3:]))
    if s.startswith("pi*"):
        return float(np.pi * float(s[3:]))
    if s == "pi":
        return float(np.pi)
    raise UsageError(f"cannot parse number {text!r}")


def _build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="dogforge",
                                  description="doubly geometric pulse design")
    top.add_argument("--config", help="INI config file; flags override it")
    sub = top.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--output-dir", default="out")
        p.add_argument("--grid-points", type=int, default=None)
        p.add_argument("--omega0", default="1.0")
        p.add_argument("--seedless", action="store_true",
                       help="accepted for symmetry; every run is deterministic")

    p = sub.add_parser("synth", help="synthesize a design bundle")
    common(p)
    p.add_argument("--family", choices=["twisted", "orange2d"], required=True)
    p.add_argument("--xi", help="twist constant (twisted family)")
    p.add_argument("--phi0", help="gate opening angle (orange2d family)")

    p = sub.add_parser("sweep", help="noise-robustness fidelity sweep")
    common(p)
    p.add_argument("--axis", choices=["detuning", "amplitude"], required=True)
    p.add_argument("--designs", nargs="+", required=True,
                   help="specs like twisted:xi=pi/2000 orange2d:phi0=pi/2 "
                        "standard:phi0=pi/2,shape=square")
    p.add_argument("--rate-min", default="1e-3")
    p.add_argument("--rate-max", default="1e-1")
    p.add_argument("--rate-count", type=int, default=None)

    p = sub.add_parser("curve", help="emit curve and Frenet data tables")
    common(p)
    p.add_argument("--family", choices=["twisted", "orange2d", "standard",
                                        "square", "sech"], required=True)
    p.add_argument("--xi")
    p.add_argument("--phi0")
    p.add_argument("--shape", choices=["square", "sech"], default="square")

    p = sub.add_parser("toy", help="closed-form toy-model fidelity tables")
    common(p)
    p.add_argument("--phi", required=True)
    p.add_argument("--eps-max", default="0.2")
    p.add_argument("--eps-count", type=int, default=41)

    p = sub.add_parser("phase-map", help="geometric phase vs twist table")
    common(p)
    p.add_argument("--xi-min", default="pi/20000")
    p.add_argument("--xi-max", default="pi/2000")
    p.add_argument("--count", type=int, default=9)

    p = sub.add_parser("validate", help="re-check invariants of a stored bundle")
    p.add_argument("bundle")
    return top


def _apply_config(args: argparse.Namespace, argv: Sequence[str]) -> argparse.Namespace:
    """Fill in defaults from the INI file for options not given on the line."""
    if not args.config:
        return args
    cp = configparser.ConfigParser()
    read = cp.read(args.config)
    if not read:
        raise UsageError(f"cannot read config file {args.config}")
    given = {a.split("=")[0].lstrip("-").replace("-", "_")
             for a in argv if a.startswith("--")}
    for section in ("common", args.command):
        if not cp.has_section(section):
            continue
        for key, value in cp.items(section):
            attr = key.replace("-", "_")
            if attr in given or not hasattr(args, attr):
                continue
            current = getattr(args, attr)
            default = _build_parser().get_default(attr)
            if current == default:
                if isinstance(current, bool):
                    value = cp.getboolean(section, key)
                elif isinstance(current, int):
                    value = int(value)
                setattr(args, attr, value)
    return args


def _design_from_spec(spec: str, grid_points: int | None, omega0: float):
    if spec in ("none", ""):
        raise UsageError("empty design spec")
    try:
        family, _, rest = spec.partition(":")
        kv = dict(item.split("=", 1) for item in rest.split(",") if item)
    except ValueError as exc:
        raise UsageError(f"malformed design spec {spec!r}") from exc
    if family == "twisted":
        n = grid_points or tolerances.GRID_POINTS
        return twisted_3d(_parse_number(kv.pop("xi")), omega0, n)
    if family == "orange2d":
        n = grid_points or 20481
        return orange_slice_2d(_parse_number(kv.pop("phi0")), omega0, n)
    if family == "standard":
        n = grid_points or tolerances.GRID_POINTS
        shape = kv.pop("shape", "square")
        phi0 = _parse_number(kv.pop("phi0"))
        fields = bench.standard_orange_slice(phi0, shape, omega0, n)
        return (f"standard_{shape}[phi0={phi0:.6g}]", fields)
    raise UsageError(f"unknown design family in spec {spec!r}")


def _require(args, name: str) -> str:
    val = getattr(args, name, None)
    if val is None:
        raise UsageError(f"--{name.replace('_', '-')} is required for this command")
    return val


def _cmd_synth(args) -> int:
    omega0 = _parse_number(args.omega0)
    if args.family == "twisted":
        n = args.grid_points or tolerances.GRID_POINTS
        design = twisted_3d(_parse_number(_require(args, "xi")), omega0, n)
    else:
        n = args.grid_points or 20481
        design = orange_slice_2d(_parse_number(_require(args, "phi0")), omega0, n)
    storage.save_design(design, args.output_dir)
    report = validate_design(design)
    storage.write_text_atomic(Path(args.output_dir) / "validation.json",
                              storage.json_dumps(report) + "\n")
    if not all(chk["passed"] for chk in report.values()):
        raise NumericalError(f"synthesized design failed validation: "
                             f"{ {k: v for k, v in report.items() if not v['passed']} }")
    print(f"wrote design bundle to {args.output_dir}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    omega0 = _parse_number(args.omega0)
    designs = [_design_from_spec(s, args.grid_points, omega0)
               for s in args.designs]
    lo, hi = _parse_number(args.rate_min), _parse_number(args.rate_max)
    if args.rate_count:
        rates = np.geomspace(lo, hi, args.rate_count)
    else:
        rates = bench.default_rates(lo, hi)
    if args.axis == "detuning":
        sweep = bench.detuning_sweep(designs, rates)
    else:
        sweep = bench.amplitude_sweep(designs, rates)
    storage.save_sweep(sweep, args.output_dir,
                       {"design_specs": list(args.designs),
                        "tolerances": {"closure_per_length":
                                       tolerances.CLOSURE_TOL_PER_LENGTH}})
    print(f"wrote sweep to {args.output_dir}")
    return EXIT_OK


def _cmd_curve(args) -> int:
    omega0 = _parse_number(args.omega0)
    out = Path(args.output_dir)
    if args.family in ("twisted", "orange2d"):
        if args.family == "twisted":
            n = args.grid_points or tolerances.GRID_POINTS
            design = twisted_3d(_parse_number(_require(args, "xi")), omega0, n)
        else:
            n = args.grid_points or 20481
            design = orange_slice_2d(_parse_number(_require(args, "phi0")), omega0, n)
        curve = design.error_curve
        storage.write_text_atomic(out / "fields.csv",
                                  storage.fields_csv(design.fields))
    else:
        n = args.grid_points or tolerances.GRID_POINTS
        if args.family == "standard":
            fields = bench.standard_orange_slice(
                _parse_number(_require(args, "phi0")), args.shape, omega0, n)
        else:  # single pi pulse, square or sech
            fields = _single_pulse_fields(args.family, omega0, n)
        curve = error_curve(fields)
        storage.write_text_atomic(out / "fields.csv", storage.fields_csv(fields))
    storage.write_text_atomic(out / "curve.csv", storage.curve_csv(curve))
    storage.write_text_atomic(out / "frenet.csv", storage.frenet_csv(frenet(curve)))
    print(f"wrote curve tables to {out}")
    return EXIT_OK


def _single_pulse_fields(shape: str, omega0: float, n: int):
    from .dynamics import ControlFields
    if shape == "square":
        t = np.linspace(0.0, np.pi / omega0, n)
        omega = np.full(n, omega0)
    else:
        span = 2.0 * bench.SECH_HALF_SPAN / omega0
        t = np.linspace(0.0, span, n)
        omega = omega0 / np.cosh(omega0 * (t - 0.5 * span))
    return ControlFields(t=t, omega=omega, phi=np.zeros(n), delta=np.zeros(n),
                         metadata={"family": f"single_{shape}_pulse"})


def _cmd_toy(args) -> int:
    phi = _parse_number(args.phi)
    eps_values = np.linspace(0.0, _parse_number(args.eps_max), args.eps_count)
    results = []
    for scenario in ("parallel", "perpendicular", "omega"):
        for gate_kind in ("HG", "NHG"):
            for eps in eps_values:
                results.append(bench.toy_model_fidelities(phi, float(eps),
                                                          scenario, gate_kind))
    out = Path(args.output_dir)
    storage.write_text_atomic(out / "toy.csv", storage.toy_table_csv(results))
    crossover = bench.omega_noise_crossover()
    storage.write_text_atomic(out / "toy_meta.json", storage.json_dumps(
        {"phi": phi, "omega_noise_crossover": crossover,
         "omega_noise_crossover_over_pi": crossover / np.pi}) + "\n")
    print(f"wrote toy tables to {out} (crossover {crossover / np.pi:.4f} pi)")
    return EXIT_OK


def _cmd_phase_map(args) -> int:
    lo, hi = _parse_number(args.xi_min), _parse_number(args.xi_max)
    xis = np.linspace(lo, hi, args.count)
    n = args.grid_points or tolerances.GRID_POINTS
    table = phase_vs_twist(xis, _parse_number(args.omega0), n)
    out = Path(args.output_dir)
    storage.write_text_atomic(out / "phase_map.csv", storage.phase_map_csv(table))
    print(f"wrote phase map to {out}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    design = storage.load_design(args.bundle)
    report = validate_design(design)
    print(storage.json_dumps(report))
    if not all(chk["passed"] for chk in report.values()):
        failing = [k for k, v in report.items() if not v["passed"]]
        raise NumericalError(f"invariant checks failed: {', '.join(failing)}")
    return EXIT_OK


_COMMANDS = {
    "synth": _cmd_synth,
    "sweep": _cmd_sweep,
    "curve": _cmd_curve,
    "toy": _cmd_toy,
    "phase-map": _cmd_phase_map,
    "validate": _cmd_validate,
}


def _error_record(kind: str, exc: Exception) -> str:
    return json.dumps({"error": kind, "message": str(exc)})


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)       # argparse exits 2 on its own errors
        args = _apply_config(args, argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(_error_record("usage", exc), file=sys.stderr)
        return EXIT_USAGE
    except PreconditionError as exc:
        print(_error_record("precondition", exc), file=sys.stderr)
        return EXIT_PRECONDITION
    except NumericalError as exc:
        print(_error_record("numerical", exc), file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    raise SystemExit(main())
