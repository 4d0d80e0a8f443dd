"""Command-line surface.

Subcommands: simulate, oracle, extract, radon, recover, preset, crosscut.
All module errors exit nonzero with a machine-readable JSON object on
stderr; outputs use the raw-f64 + JSON-sidecar and CSV formats.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import pipeline as pl
from . import serial
from . import solver as sv
from . import xray
from .errors import NlwaveError
from .harmonics import ExitTrace, WindowSpec, extract_Ak, spectrum
from .model import COMPLEX, REAL, ExperimentConfig, Grid2D
from .presets import PRESET_NAMES, preset


def _out_dir(args, config: ExperimentConfig | None = None) -> Path:
    d = getattr(args, "out_dir", None)
    if d is None and config is not None and config.out_dir:
        d = config.out_dir
    p = Path(d or ".")
    p.mkdir(parents=True, exist_ok=True)
    return p


def _threads(args) -> int:
    if args.threads is not None:
        return args.threads
    return int(os.environ.get("NLWAVE_THREADS", os.cpu_count() or 1))


def cmd_simulate(args) -> int:
    config = serial.load_config(args.config)
    if args.linear:
        config = config.linearized()
    out = _out_dir(args, config)
    state, caps = sv.run_experiment(config)
    name = "u_linear" if args.linear else "u"
    serial.save_field(caps[0], out / f"{name}_T")
    serial.write_manifest(out / f"{name}_manifest.json", config, state.dt,
                          state.step_index, [config.probe.T],
                          state.max_history)
    print(json.dumps({"capture": str(out / f'{name}_T'),
                      "dt": state.dt, "n_steps": state.step_index,
                      "max_abs_u": max(state.max_history)}))
    return 0


def cmd_oracle(args) -> int:
    from . import oracle
    config = serial.load_config(args.config)
    out = _out_dir(args, config)
    mode = args.mode
    if mode == "complex_odd":
        field = oracle.predict_complex_odd(config)
        serial.save_field(field, out / "oracle_complex_odd")
        print(json.dumps({"field": str(out / "oracle_complex_odd")}))
        return 0
    if mode == "poly_top":
        field = oracle.predict_polynomial_top(config)
        serial.save_field(field, out / "oracle_poly_top")
        print(json.dumps({"field": str(out / "oracle_poly_top")}))
        return 0
    if mode == "real_odd":
        ladder = oracle.predict_real_odd(config, k_max=args.k_max)
    elif mode == "quadratic":
        ladder = oracle.predict_quadratic(config)
    elif mode == "general":
        ladder = oracle.predict_general_nonodd(config, k_max=args.k_max)
    else:
        raise NlwaveError(f"unknown oracle mode {mode}")
    rows_k, rows_amp = [], []
    for k, f in sorted(ladder.a1.items()):
        if k < 1:
            continue
        serial.save_field(
            type(f)(f.grid, np.abs(f.values), REAL) if f.kind == COMPLEX
            else f, out / f"oracle_a1_abs_k{k}")
        rows_k.append(k)
        rows_amp.append(float(np.max(np.abs(f.values))))
    if ladder.u0_zero is not None:
        serial.save_field(ladder.u0_zero, out / "oracle_u0_zero")
    serial.write_csv(out / "oracle_ladder.csv", ["k", "max_abs_a1"],
                     [np.array(rows_k), np.array(rows_amp)])
    print(json.dumps({"ladder": str(out / "oracle_ladder.csv")}))
    return 0


def _load_trace(path: str) -> tuple[np.ndarray, np.ndarray]:
    data = np.genfromtxt(path, delimiter=",", names=True)
    s = data["s"]
    if "im" in (data.dtype.names or ()):
        v = data["re"] + 1j * data["im"]
    elif "re" in (data.dtype.names or ()):
        v = data["re"]
    else:
        v = data["value"]
    return s, v


def cmd_extract(args) -> int:
    s, v = _load_trace(args.trace)
    sL, vL = _load_trace(args.linear)
    meta = json.loads(Path(args.meta).read_text()) if args.meta else {}
    h = args.h or meta.get("h")
    bc = args.band_center if args.band_center is not None \
        else meta.get("band_center", 0.0)
    if h is None:
        raise NlwaveError("carrier scale h is required (--h or --meta)")
    omega = tuple(meta.get("omega", (0.0, 1.0)))
    tr = ExitTrace(s=s, values=v, h=h, omega=omega, band_center=bc)
    trL = ExitTrace(s=sL, values=vL, h=h, omega=omega, band_center=bc)
    window = WindowSpec(mu=args.mu, order=args.order)
    A = extract_Ak(tr, trL, args.k, window, sigma=args.sigma)
    print(json.dumps({"k": args.k, "A_k": A}))
    if args.out:
        serial.write_csv(args.out, ["k", "A_k"],
                         [np.array([args.k]), np.array([A])])
    return 0


def cmd_radon(args) -> int:
    if args.action == "forward":
        field = serial.load_field(args.input)
        sino = xray.radon_forward(field, args.angles, args.offsets, args.L)
        serial.save_sinogram(sino, args.output)
    else:
        sino = serial.load_sinogram(args.input)
        n = args.nx or sino.n_offsets
        L = args.L or sino.L
        grid = Grid2D(n, n, -L, L, -L, L)
        field = xray.radon_invert(sino, grid)
        serial.save_field(field, args.output)
    print(json.dumps({"output": args.output}))
    return 0


def cmd_recover(args) -> int:
    config = serial.load_config(args.config)
    out = _out_dir(args, config)
    truth = None
    if not config.nonlinearity.is_zero:
        from .model import OddSeparated, PolynomialNonlinearity
        nl = config.nonlinearity
        if isinstance(nl, OddSeparated):
            truth = nl.alpha
        elif isinstance(nl, PolynomialNonlinearity):
            truth = nl.terms[-1][1]
    task = pl.RecoveryTask(mode=args.mode, config=config,
                           n_angles=args.angles, n_offsets=args.offsets,
                           offset_max=args.L, k_max=args.k_max,
                           truth_alpha=truth)
    rec = pl.run_recovery(task, threads=_threads(args), progress=True)
    if rec.alpha is not None:
        serial.save_field(rec.alpha, out / f"recovered_alpha_{args.mode}")
    if rec.f0_table is not None:
        iy = rec.grid.ny // 2
        ix = rec.grid.nx // 2
        serial.write_csv(out / f"recovered_f0_center_{args.mode}.csv",
                         ["p", "f0"],
                         [rec.p_grid, rec.f0_table[:, iy, ix]])
    report = {"mode": args.mode, **rec.metrics,
              "params": {"n_angles": args.angles,
                         "n_offsets": args.offsets, "k_max": args.k_max}}
    (out / f"metrics_{args.mode}.json").write_text(json.dumps(report,
                                                              indent=1))
    print(json.dumps(report))
    return 0


def cmd_preset(args) -> int:
    config = preset(args.name, args.scale)
    out = args.out or f"{args.name}_{args.scale}.json"
    serial.save_config(config, out)
    print(json.dumps({"config": out, "nx": config.grid.nx,
                      "h": config.probe.h, "T": config.probe.T}))
    return 0


def cmd_crosscut(args) -> int:
    field = serial.load_field(args.field)
    g = field.grid
    if args.axis == "x":
        iy = int(round((args.at - g.ymin) / g.dy))
        iy = max(0, min(g.ny - 1, iy))
        coord, vals = g.x(), field.values[iy, :]
    else:
        ix = int(round((args.at - g.xmin) / g.dx))
        ix = max(0, min(g.nx - 1, ix))
        coord, vals = g.y(), field.values[:, ix]
    if field.kind == COMPLEX:
        serial.write_csv(args.out, ["coord", "re", "im"],
                         [coord, vals.real, vals.imag])
    else:
        serial.write_csv(args.out, ["coord", "value"], [coord, vals])
    print(json.dumps({"output": args.out, "n": len(coord)}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="nlwave",
        description="High-frequency probing lab for semilinear wave "
                    "equations")
    p.add_argument("--threads", type=int, default=None,
                   help="worker cap for per-angle parallelism "
                        "(default: NLWAVE_THREADS or all cores)")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run the FDTD experiment")
    s.add_argument("--config", required=True)
    s.add_argument("--linear", action="store_true",
                   help="run with the nonlinearity off")
    s.add_argument("--out-dir")
    s.set_defaults(fn=cmd_simulate)

    s = sub.add_parser("oracle", help="evaluate the asymptotic prediction")
    s.add_argument("--config", required=True)
    s.add_argument("--mode", required=True,
                   choices=["complex_odd", "real_odd", "quadratic",
                            "poly_top", "general"])
    s.add_argument("--k-max", type=int, default=5)
    s.add_argument("--out-dir")
    s.set_defaults(fn=cmd_oracle)

    s = sub.add_parser("extract", help="windowed harmonic projection A_k")
    s.add_argument("--trace", required=True, help="CSV with columns s,value")
    s.add_argument("--linear", required=True)
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--sigma", type=float, default=None)
    s.add_argument("--h", type=float, default=None)
    s.add_argument("--band-center", type=float, default=None)
    s.add_argument("--meta", help="JSON with h/band_center/omega")
    s.add_argument("--mu", type=float, default=0.5)
    s.add_argument("--order", type=int, default=2)
    s.add_argument("--out")
    s.set_defaults(fn=cmd_extract)

    s = sub.add_parser("radon", help="X-ray transform and its inverse")
    s.add_argument("action", choices=["forward", "invert"])
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out", dest="output", required=True)
    s.add_argument("--angles", type=int, default=360)
    s.add_argument("--offsets", type=int, default=1024)
    s.add_argument("--L", type=float, default=1.0)
    s.add_argument("--nx", type=int, default=None)
    s.set_defaults(fn=cmd_radon)

    s = sub.add_parser("recover", help="full nonlinearity recovery")
    s.add_argument("--config", required=True)
    s.add_argument("--mode", required=True, choices=list(pl.MODES))
    s.add_argument("--angles", type=int, default=180)
    s.add_argument("--offsets", type=int, default=257)
    s.add_argument("--L", type=float, default=0.7)
    s.add_argument("--k-max", type=int, default=3)
    s.add_argument("--out-dir")
    s.set_defaults(fn=cmd_recover)

    s = sub.add_parser("preset", help="materialize a named experiment")
    s.add_argument("--name", required=True, choices=list(PRESET_NAMES))
    s.add_argument("--scale", default="desk", choices=["desk", "paper"])
    s.add_argument("--out")
    s.set_defaults(fn=cmd_preset)

    s = sub.add_parser("crosscut", help="CSV cross-section of a field")
    s.add_argument("--field", required=True)
    s.add_argument("--axis", required=True, choices=["x", "y"])
    s.add_argument("--at", type=float, required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_crosscut)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except NlwaveError as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__,
                                     "message": str(exc)}) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
