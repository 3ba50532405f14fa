"""Command-line front end.

Exit codes: 0 success (whether or not a violation is found), 2 config or
parse error, 3 numerical validation failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from pathlib import Path

import numpy as np

from .formats import (
    FormatError,
    build_config,
    format_complex,
    format_layout,
    layout_records,
    load_config_file,
    read_matrix,
)
from .qudit import InvariantError, UnitaryChannel, random_unitary
from .reck import (
    CoherenceSpec,
    DEFAULT_BIREFRINGENCE,
    blind_measurement_layout,
    decompose,
    emit_layout,
    min_quartz_thickness,
    reconstruction_error,
)
from .shotnoise import DEFAULT_TOTAL, DetectorProfile, detector_partition, noise_sweep
from .witness import WitnessConfig, builtin_configs, full_report, optimal_config

SEED_ENV = "QWITNESS_SEED"
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
MAX_COMPILE_ERROR = 1e-8


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_CONFIG):
        super().__init__(message)
        self.code = code


def default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise CliError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


# --------------------------------------------------------------------------
# Rendering


def _dump_json(doc) -> str:
    return json.dumps(doc, indent=2) + "\n"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _f4(x) -> str:
    return "n/a" if x is None else f"{x:.4f}"


def _cplx(m) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.atleast_2d(m)]


# --------------------------------------------------------------------------
# Config resolution


def _resolve_config(args) -> WitnessConfig:
    sources = [args.builtin is not None, args.config is not None, args.dim is not None]
    if sum(sources) != 1:
        raise CliError("give exactly one of --builtin, --config or --dim")
    if args.builtin is not None:
        try:
            cfgs = builtin_configs(args.builtin)
        except KeyError as exc:
            raise CliError(str(exc.args[0])) from None
        return cfgs[args.which or "w"]
    if args.config is not None:
        cfg = load_config_file(args.config)
    else:
        coeffs = None
        if args.coeffs:
            coeffs = [complex(tok.replace("i", "j")) for tok in args.coeffs.split(",")]
        cfg = build_config(args.dim, u0=args.u0, u1=args.u1, projector_index=args.projector,
                           coefficients=coeffs)
    if args.which is not None and args.which != cfg.kind:
        raise CliError(f"--which {args.which} does not match the config's intervention ({cfg.kind})")
    return cfg


def _add_config_args(p):
    p.add_argument("--builtin", choices=["paper-qubit", "paper-qutrit"])
    p.add_argument("--config", help="JSON experiment description")
    p.add_argument("--dim", type=int, help="build a config from the flags below")
    p.add_argument("--which", choices=["w", "v"], help="witness to evaluate")
    p.add_argument("--u0", help="matrix file (or 'identity') for the phase channel; omit for W")
    p.add_argument("--u1", help="matrix file, 'identity' or 'optimal' (default) for the evolution")
    p.add_argument("--projector", type=int, help="basis index of the late outcome b (default N-1)")
    p.add_argument("--coeffs", help="comma-separated superposition coefficients, e.g. 0.7071,-0.7071")


def _add_output_args(p):
    p.add_argument("--output", choices=["table", "json", "csv"], default="table")
    p.add_argument("--output-path")


# --------------------------------------------------------------------------
# Commands


def cmd_witness(args) -> str:
    cfg = _resolve_config(args)
    rep = full_report(cfg)
    doc = {
        "command": "witness",
        "config": cfg.name,
        "which": rep.kind,
        "dim": cfg.dim,
        "control_values": list(rep.control_values),
        "superposition_value": rep.superposition_value,
        "p_b": rep.p_b,
        "p_after": rep.p_after,
        "violation_margin": rep.violation_margin,
        "lower_margin": rep.lower_margin,
        "violated": rep.violated,
    }
    if args.output == "json":
        return _dump_json(doc)
    sym = rep.kind.upper()
    if args.output == "csv":
        rows = [[f"{sym}_{i}", v] for i, v in enumerate(rep.control_values)]
        rows.append([f"{sym}_sigma", rep.superposition_value])
        return _csv(["quantity", "value"], rows)
    lines = [f"config: {cfg.name}  (N={cfg.dim}, witness {sym})"]
    lines += [f"  {sym}_{i:<6} {v: .4f}" for i, v in enumerate(rep.control_values)]
    lines += [
        f"  {sym}_sigma  {rep.superposition_value: .4f}",
        f"  P(b)     {rep.p_b: .4f}",
        f"  P_after  {rep.p_after: .4f}",
        f"  margin   {rep.violation_margin: .4f}  (upper)",
        f"  margin   {rep.lower_margin: .4f}  (lower)",
        f"  violated {str(rep.violated).lower()}",
    ]
    return "\n".join(lines) + "\n"


def cmd_optimal(args) -> str:
    if args.dim is None or args.dim < 2:
        raise CliError("--dim must be >= 2")
    w_cfg, v_cfg, spec = optimal_config(args.dim)
    rw, rv = full_report(w_cfg), full_report(v_cfg)
    doc = {
        "command": "optimal",
        "dim": spec.dim,
        "predicted_w": spec.predicted_w,
        "predicted_v": spec.predicted_v,
        "simulated_w": rw.superposition_value,
        "simulated_v": rv.superposition_value,
        "w_controls": list(rw.control_values),
        "v_controls": list(rv.control_values),
    }
    if args.output == "json":
        return _dump_json(doc)
    if args.output == "csv":
        return _csv(["witness", "predicted", "simulated", "max_abs_control"], [
            ["W", spec.predicted_w, rw.superposition_value, max(map(abs, rw.control_values))],
            ["V", spec.predicted_v, rv.superposition_value, max(map(abs, rv.control_values))],
        ])
    return (f"N={spec.dim}\n"
            f"  W  predicted {spec.predicted_w:.4f}  simulated {rw.superposition_value:.4f}\n"
            f"  V  predicted {spec.predicted_v:.4f}  simulated {rv.superposition_value:.4f}\n")


def cmd_compile(args) -> str:
    if (args.matrix is None) == (args.random is None):
        raise CliError("give exactly one of --matrix or --random")
    if args.matrix is not None:
        u = UnitaryChannel(read_matrix(args.matrix))
    else:
        if args.random < 1:
            raise CliError("--random dimension must be >= 1")
        u = random_unitary(args.random, args.seed)
    plan = decompose(u)
    err = reconstruction_error(u, plan)
    if err > MAX_COMPILE_ERROR:
        raise CliError(f"reconstruction error {err:.3e} exceeds {MAX_COMPILE_ERROR:g}", EXIT_NUMERICAL)
    layout = emit_layout(plan)
    if args.layout_path:
        Path(args.layout_path).write_text(format_layout(layout))
    doc = {
        "command": "compile",
        "dim": plan.dim,
        "rotations": [{"i": r.i, "j": r.j, "block": _cplx(r.block)} for r in plan.rotations],
        "phase_diag": [[float(z.real), float(z.imag)] for z in plan.phase_diag],
        "bd_count": layout.bd_count,
        "reconstruction_error": err,
        "encoding": layout.encoding,
        "output_reversed": layout.output_reversed,
        "output_slots": [list(s) for s in layout.output_slots],
        "layout": layout_records(layout),
    }
    if args.output == "json":
        return _dump_json(doc)
    if args.output == "csv":
        rows = [[r.i, r.j] + [format_complex(z) for z in r.block.reshape(-1)] for r in plan.rotations]
        return _csv(["i", "j", "b00", "b01", "b10", "b11"], rows)
    lines = [f"N={plan.dim}  rotations={len(plan.rotations)}  bd_count={layout.bd_count}  "
             f"reconstruction_error={err:.3e}"]
    for r in plan.rotations:
        b = r.block
        lines.append(f"  E[{r.i},{r.j}]  " + "  ".join(f"{z.real:+.4f}{z.imag:+.4f}i" for z in b.reshape(-1)))
    lines.append("  S  " + "  ".join(f"{z.real:+.4f}{z.imag:+.4f}i" for z in plan.phase_diag))
    return "\n".join(lines) + "\n"


def _parse_floats(text: str, what: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise CliError(f"{what} must be a comma-separated list of numbers") from None


def cmd_noise(args) -> str:
    cfg = _resolve_config(args)
    totals = _parse_floats(args.totals, "--totals")
    if args.efficiencies:
        profile = DetectorProfile(tuple(_parse_floats(args.efficiencies, "--efficiencies")))
    else:
        profile = DetectorProfile.ideal(len(detector_partition(cfg)[1]))
    results = noise_sweep(cfg, totals, profile, args.trials, args.seed, workers=args.workers)
    doc = {
        "command": "noise",
        "config": cfg.name,
        "which": cfg.kind,
        "efficiencies": list(profile.efficiencies),
        "results": [r.to_dict() for r in results],
    }
    if args.output == "json":
        return _dump_json(doc)
    n_ctrl = len(results[0].control_means)
    if args.output == "csv":
        header = ["expected_total", "trials", "seed", "witness_mean", "witness_std", "sd_of_violation"]
        for k in range(n_ctrl):
            header += [f"control_{k}_mean", f"control_{k}_std"]
        rows = []
        for r in results:
            row = [r.expected_total, r.trials, r.seed, r.witness_mean, r.witness_std,
                   "" if r.sd_of_violation is None else r.sd_of_violation]
            for m, s in zip(r.control_means, r.control_stds):
                row += [m, s]
            rows.append(row)
        return _csv(header, rows)
    sym = cfg.kind.upper()
    lines = [f"config: {cfg.name}  witness {sym}  trials={args.trials} seed={args.seed}",
             f"  {'total':>10}  {'mean':>8}  {'std':>8}  {'sd':>9}  max control"]
    for r in results:
        lines.append(f"  {r.expected_total:>10.0f}  {r.witness_mean:8.4f}  {r.witness_std:8.4f}  "
                     f"{_f4(r.sd_of_violation):>9}  {max(r.control_means):.4f}")
    return "\n".join(lines) + "\n"


def cmd_quartz(args) -> str:
    try:
        spec = CoherenceSpec(args.wavelength, args.bandwidth, args.birefringence)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    t = min_quartz_thickness(spec)
    doc = {
        "command": "quartz",
        "wavelength_nm": spec.wavelength_nm,
        "bandwidth_nm": spec.bandwidth_nm,
        "birefringence": spec.birefringence,
        "coherence_length_mm": spec.coherence_length_mm,
        "min_thickness_mm": t,
    }
    if args.dim is not None:
        layout = blind_measurement_layout(args.dim, spec)
        doc["crystals"] = [{"mode": e.mode, "thickness_mm": e.thickness_mm} for e in layout.elements]
    if args.output == "json":
        return _dump_json(doc)
    if args.output == "csv":
        return _csv(["quantity", "value"], [[k, v] for k, v in doc.items() if k not in ("command", "crystals")])
    lines = [f"coherence length  {spec.coherence_length_mm:.4f} mm",
             f"minimum thickness {t:.4f} mm"]
    for c in doc.get("crystals", []):
        lines.append(f"  path {c['mode']}: {c['thickness_mm']:.4f} mm")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qwitness", description="Error-tolerant macrorealism witness toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("witness", help="ideal witness values and compound-condition check")
    _add_config_args(p)
    _add_output_args(p)
    p.set_defaults(func=cmd_witness)

    p = sub.add_parser("optimal", help="optimal N-level configuration and predicted maxima")
    p.add_argument("--dim", type=int, required=True)
    _add_output_args(p)
    p.set_defaults(func=cmd_optimal)

    p = sub.add_parser("compile", help="two-level decomposition and optical layout of a unitary")
    p.add_argument("--matrix", help="matrix file")
    p.add_argument("--random", type=int, metavar="N", help="compile a seeded Haar-random N x N unitary")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--layout-path", help="write the element list as a text document")
    _add_output_args(p)
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("noise", help="Poisson shot-noise Monte Carlo of witness estimates")
    _add_config_args(p)
    p.add_argument("--totals", default=f"{DEFAULT_TOTAL:g}", help="comma-separated expected counts per run")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--efficiencies", help="comma-separated relative detector efficiencies")
    p.add_argument("--workers", type=int, default=1)
    _add_output_args(p)
    p.set_defaults(func=cmd_noise)

    p = sub.add_parser("quartz", help="minimum quartz thickness for a blind measurement")
    p.add_argument("--wavelength", type=float, default=801.6, help="nm")
    p.add_argument("--bandwidth", type=float, default=3.0, help="nm")
    p.add_argument("--birefringence", type=float, default=DEFAULT_BIREFRINGENCE)
    p.add_argument("--dim", type=int, help="also lay out crystals for an N-outcome blind measurement")
    _add_output_args(p)
    p.set_defaults(func=cmd_quartz)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "seed", 0) is None:
            args.seed = default_seed()
        text = args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (FormatError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.output_path:
        Path(args.output_path).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
