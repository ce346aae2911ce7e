"""Command-line interface: experiments, calibration, PAM curves, grasp traces.

Exit codes: 0 all reference tolerances met, 1 a tolerance exceeded, 2 bad
arguments or invalid inputs, 3 I/O failure, 4 solver or fit failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import control, experiments, hand, mechanics, pam, scene
from .reporting import atomic_write_text, rows_to_json, sha256_hex, write_manifest, write_report

EXIT_OK = 0
EXIT_TOLERANCE = 1
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_SOLVER = 4

# Expected outcomes of the built-in grasp scenes (the heavy box must fail).
EXPECTED_GRASP_SUCCESS = {"sphere67": True, "box272": True, "box5000": False}


class _CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _load_hand(path: str | None) -> hand.HandDescription:
    if path is None:
        return hand.default_hand()
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise _CliError(EXIT_USAGE, f"cannot read hand description: {err}") from err
    try:
        desc = hand.parse_hand_description(text)
    except hand.HandParseError as err:
        lines = "\n".join(f"  {issue}" for issue in err.issues)
        raise _CliError(EXIT_USAGE, f"invalid hand description {path}:\n{lines}") from err
    violations = hand.validate(desc)
    if violations:
        lines = "\n".join(f"  {v}" for v in violations)
        raise _CliError(EXIT_USAGE, f"hand description fails validation:\n{lines}")
    return desc


def _load_targets(path: str | None) -> experiments.CalibrationTargets:
    if path is None:
        return experiments.CalibrationTargets()
    try:
        return experiments.targets_from_json(Path(path).read_text())
    except OSError as err:
        raise _CliError(EXIT_USAGE, f"cannot read targets: {err}") from err
    except (json.JSONDecodeError, TypeError) as err:
        raise _CliError(EXIT_USAGE, f"invalid targets file: {err}") from err


def _out_dir(args) -> Path:
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-probe"
        probe.write_text("")
        probe.unlink()
    except OSError as err:
        raise _CliError(EXIT_IO, f"output directory not writable: {err}") from err
    return out


def cmd_pam_curve(args) -> int:
    try:
        pressures = [float(p) for p in args.pressures.split(",") if p.strip()]
    except ValueError as err:
        raise _CliError(EXIT_USAGE, f"bad pressure list: {err}") from err
    if not pressures:
        raise _CliError(EXIT_USAGE, "no pressures given")
    if args.points < 2:
        raise _CliError(EXIT_USAGE, "need at least 2 points per curve")
    params = pam.reference_pam()
    if args.tube_stiffness > 0.0:
        params = pam.PamParams(
            rest_length_mm=params.rest_length_mm,
            d0_mm=params.d0_mm,
            theta0_deg=params.theta0_deg,
            tube_stiffness_n=args.tube_stiffness,
            max_pressure_mpa=params.max_pressure_mpa,
        )
    out = _out_dir(args)
    try:
        curves = pam.force_strain_table(params, pressures, args.points)
    except ValueError as err:
        raise _CliError(EXIT_USAGE, str(err)) from err
    for curve in curves:
        text = pam.curves_to_csv([curve])
        atomic_write_text(out / f"pam_curve_{curve.pressure_mpa:g}mpa.csv", text)
    print(f"wrote {len(curves)} curve files to {out}")
    return EXIT_OK


def _run_reports(args, which: str):
    desc = _load_hand(args.hand)
    config = experiments.default_experiment_config()
    targets = _load_targets(args.targets)
    reports = []
    gates = []
    if which in ("rom", "suite"):
        rom = experiments.rom_experiment(desc, config, targets)
        reports.append(rom)
        gates.append(rom.passed)
    if which in ("forces", "suite"):
        forces = experiments.force_experiment(desc, config, targets)
        reports.append(forces)
        gates.append(forces.passed)
    if which in ("kapandji", "suite"):
        kap = experiments.kapandji_test(desc, config)
        reports.append(kap)
        gates.append(kap.score == targets.kapandji_score)
    if which in ("grasp", "suite"):
        suite = experiments.grasp_object_suite(desc, None, config)
        reports.append(suite)
        gates.append(
            all(
                o.success == EXPECTED_GRASP_SUCCESS.get(o.object_name, o.success)
                for o in suite.outcomes
            )
        )
    return reports, gates


def cmd_run(args) -> int:
    out = _out_dir(args)
    try:
        reports, gates = _run_reports(args, args.experiment)
    except mechanics.NoConvergenceError as err:
        raise _CliError(EXIT_SOLVER, f"equilibrium solver failed: {err}") from err
    try:
        manifest = experiments.export_reports(reports, out, args.format)
    except OSError as err:
        raise _CliError(EXIT_IO, f"cannot write reports: {err}") from err
    for report, ok in zip(reports, gates):
        print(f"{report.name}: {'ok' if ok else 'DEVIATION'}")
    print(f"manifest: {manifest}")
    return EXIT_OK if all(gates) else EXIT_TOLERANCE


def cmd_calibrate(args) -> int:
    desc = _load_hand(args.hand)
    targets = _load_targets(args.targets)
    out = _out_dir(args)
    result = experiments.calibrate_hand(
        desc, targets, experiments.default_experiment_config(),
        max_iterations=args.max_iterations,
    )
    try:
        atomic_write_text(out / "calibrated_hand.json", hand.serialize(result.hand))
        atomic_write_text(
            out / "experiment_config.json", experiments.config_to_json(result.config)
        )
        entries = {}
        name, digest = write_report(
            out, result.report.name, result.report.header, result.report.to_rows(), args.format
        )
        entries[name] = digest
        entries["calibrated_hand.json"] = sha256_hex(hand.serialize(result.hand))
        entries["experiment_config.json"] = sha256_hex(
            experiments.config_to_json(result.config)
        )
        write_manifest(out, entries)
    except OSError as err:
        raise _CliError(EXIT_IO, f"cannot write calibration output: {err}") from err
    print(f"calibration {'succeeded' if result.report.success else 'FAILED'} "
          f"({result.report.reason}, {result.report.iterations} iterations, "
          f"cost {result.report.cost:.3e})")
    if not result.report.success:
        for rname, value in zip(result.report.residual_names, result.report.residuals):
            print(f"  residual {rname}: {value:.4f}")
        return EXIT_SOLVER
    return EXIT_OK


def _load_scene(args) -> scene.SceneObject:
    if args.scene is not None:
        try:
            doc = json.loads(Path(args.scene).read_text())
        except OSError as err:
            raise _CliError(EXIT_USAGE, f"cannot read scene: {err}") from err
        except json.JSONDecodeError as err:
            raise _CliError(EXIT_USAGE, f"invalid scene JSON: {err}") from err
        obj = doc.get("object", doc)
        shape = obj.get("shape")
        try:
            if shape == "sphere":
                return scene.Sphere(
                    center_mm=tuple(obj["center_mm"]), radius_mm=float(obj["radius_mm"]),
                    mass_g=float(obj.get("mass_g", 0.0)), name=obj.get("name", "sphere"),
                )
            if shape == "cylinder":
                return scene.Cylinder(
                    center_mm=tuple(obj["center_mm"]), radius_mm=float(obj["radius_mm"]),
                    half_length_mm=float(obj.get("half_length_mm", 60.0)),
                    mass_g=float(obj.get("mass_g", 0.0)), name=obj.get("name", "cylinder"),
                )
            if shape == "box":
                return scene.Box(
                    center_mm=tuple(obj["center_mm"]),
                    half_extents_mm=tuple(obj["half_extents_mm"]),
                    mass_g=float(obj.get("mass_g", 0.0)), name=obj.get("name", "box"),
                )
        except (KeyError, TypeError, ValueError) as err:
            raise _CliError(EXIT_USAGE, f"bad scene object: {err}") from err
        raise _CliError(EXIT_USAGE, f"unknown shape {shape!r}")
    factory = scene.OBJECT_LIBRARY.get(args.object)
    if factory is None:
        known = ", ".join(sorted(scene.OBJECT_LIBRARY))
        raise _CliError(EXIT_USAGE, f"unknown object {args.object!r} (have: {known})")
    return factory()


def cmd_grasp_sim(args) -> int:
    if args.dt <= 0.0 or args.duration <= 0.0:
        raise _CliError(EXIT_USAGE, "duration and dt must be positive")
    desc = _load_hand(args.hand)
    config = experiments.default_experiment_config()
    objects = [] if args.empty else [_load_scene(args)]
    out = _out_dir(args)
    state = control.GraspControllerState.initial(
        ramp_rate_mpa_per_s=config.ramp_rate_mpa_per_s,
        threshold_kpa=min(
            s.threshold_kpa for s in desc.sensors if s.location == "fingertip"
        ),
        pressure_cap_mpa=config.pressure_cap_mpa,
    )
    trace = control.run_closed_loop(
        desc, objects, args.duration, args.dt,
        controller=state, penalty_n_per_mm=config.penalty_n_per_mm,
    )
    text = control.trace_to_csv(trace)
    try:
        if args.format == "json":
            lines = text.strip().split("\n")
            header = lines[0].split(",")
            rows = [line.split(",") for line in lines[1:]]
            atomic_write_text(out / "trace.json", rows_to_json(header, rows))
        else:
            atomic_write_text(out / "trace.csv", text)
    except OSError as err:
        raise _CliError(EXIT_IO, f"cannot write trace: {err}") from err
    print(f"wrote trace with {len(trace)} steps to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="musclesim",
        description="Quasi-static simulator for the pneumatic tendon-driven hand",
    )
    parser.add_argument("--hand", help="hand description JSON (default: embedded)")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--format", choices=("csv", "json"), default="csv")
    parser.add_argument("--seed", type=int, default=0,
                        help="seed for randomized scenarios (reserved)")
    parser.add_argument("--targets", help="calibration targets JSON override")
    sub = parser.add_subparsers(dest="command", required=True)

    p_curve = sub.add_parser("pam-curve", help="export force-strain curves")
    p_curve.add_argument("--pressures", required=True, help="comma-separated MPa list")
    p_curve.add_argument("--points", type=int, default=50)
    p_curve.add_argument("--tube-stiffness", type=float, default=0.0,
                         help="elastomer correction in N per unit strain")
    p_curve.set_defaults(fn=cmd_pam_curve)

    p_run = sub.add_parser("run", help="run reproduction experiments")
    p_run.add_argument("experiment", choices=("rom", "forces", "grasp", "kapandji", "suite"))
    p_run.set_defaults(fn=cmd_run)

    p_cal = sub.add_parser("calibrate", help="fit mechanical parameters to the targets")
    p_cal.add_argument("--max-iterations", type=int, default=500)
    p_cal.set_defaults(fn=cmd_calibrate)

    p_sim = sub.add_parser("grasp-sim", help="closed-loop adaptive grasp trace")
    p_sim.add_argument("--object", default="sphere67",
                       help="built-in object name (default sphere67)")
    p_sim.add_argument("--scene", help="scene JSON file (overrides --object)")
    p_sim.add_argument("--empty", action="store_true", help="run without any object")
    p_sim.add_argument("--duration", type=float, default=3.2, help="seconds")
    p_sim.add_argument("--dt", type=float, default=0.01, help="controller step (s)")
    p_sim.set_defaults(fn=cmd_grasp_sim)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except _CliError as err:
        print(f"error: {err}", file=sys.stderr)
        return err.code
    except mechanics.NoConvergenceError as err:
        print(f"solver failure: {err}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
