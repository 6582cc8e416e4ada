"""Command-line entry point: gen-data | run | sweep | diagnose | export.

Every output directory receives the fully resolved configuration
(config.resolved) and a provenance.json with the tool version and SHA-256
hashes of any binary inputs, so artifacts are self-describing.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, parse_config
from .experiments import diagnostic_run, summary_dict, sweep
from .solver import (
    CflViolation,
    DiagnosticsRecorder,
    FlowState,
    run as solve,
)
from .spectral import (
    SpectralScalarField,
    UnderResolved,
    read_checkpoint,
    write_checkpoint,
)
from .initial_data import assemble_omega0
from .util import fmt_float


def _error_category(exc) -> str:
    if isinstance(exc, ConfigError):
        return "config"
    if isinstance(exc, UnderResolved):
        return "underresolved"
    if isinstance(exc, CflViolation):
        return "cfl"
    if isinstance(exc, OSError):
        return "io"
    return "runtime"


_EXIT_CODES = {"config": 3, "underresolved": 4, "cfl": 5, "io": 6, "runtime": 1}


def _write_provenance(outdir: Path, cfg, binary_inputs=()):
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "config.resolved").write_text(cfg.resolved_text())
    hashes = {}
    for p in binary_inputs:
        h = hashlib.sha256()
        with open(p, "rb") as fh:
            for chunk in iter(lambda: fh.read(1 << 20), b""):
                h.update(chunk)
        hashes[str(p)] = h.hexdigest()
    prov = {"tool": "thinflow", "version": __version__, "inputs": hashes}
    (outdir / "provenance.json").write_text(json.dumps(prov, indent=2, sort_keys=True) + "\n")


def _write_csv(path, fieldnames, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(fieldnames)
        for row in rows:
            w.writerow([fmt_float(v) if isinstance(v, float) else v for v in row])


def _overrides_from(args, mapping) -> dict:
    out = {}
    for attr, dotted in mapping.items():
        v = getattr(args, attr, None)
        if v is not None:
            out[dotted] = v
    return out


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen_data(args) -> int:
    cfg = parse_config(args.config, _overrides_from(args, {
        "N": "spectral_field.N", "n": "initial_data.n", "l0": "initial_data.l0",
        "epsilon": "initial_data.epsilon", "amplitude": "initial_data.amplitude",
        "small_scale_amplitude": "initial_data.small_scale_amplitude",
    }))
    from .spectral import Grid

    bc = cfg.bubble_config()
    grid = Grid(cfg.N)
    omega0 = assemble_omega0(bc, grid,
                             allow_underresolved=cfg.get("initial_data", "allow_underresolved"))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_checkpoint(out, omega0, t=0.0, nu=0.0)
    _write_provenance(out.parent, cfg)
    print(f"wrote {out} (N={grid.N}, n={bc.n}, l0={bc.l0})")
    return 0


def _load_init(args, cfg):
    from .spectral import Grid

    if args.init is not None:
        field, t, _ = read_checkpoint(args.init)
        return field, t, [args.init]
    bc = cfg.bubble_config()
    omega0 = assemble_omega0(bc, Grid(cfg.N),
                             allow_underresolved=cfg.get("initial_data", "allow_underresolved"))
    return omega0, 0.0, []


def cmd_run(args) -> int:
    cfg = parse_config(args.config, _overrides_from(args, {"N": "spectral_field.N"}))
    omega0, t0, inputs = _load_init(args, cfg)
    nu = args.nu if args.nu is not None else 0.0
    horizon = t0 + args.T
    outdir = Path(args.out)
    _write_provenance(outdir, cfg, inputs)
    sc = cfg.solver_config()
    state = FlowState.from_field(omega0, nu=nu, t=t0)
    rec = DiagnosticsRecorder(tail_threshold=sc.tail_threshold)
    every = cfg.get("solver", "checkpoint_every")
    next_ckpt = [t0 + every if every > 0 else np.inf]

    def checkpoint_cb(st):
        if st.t >= next_ckpt[0] - 1e-9:
            write_checkpoint(outdir / f"checkpoint-t{st.t:.4f}.bin", st.omega, st.t, st.nu)
            while next_ckpt[0] <= st.t + 1e-9:
                next_ckpt[0] += every

    solve(state, horizon, sc, callbacks=(rec.cadence_callback, checkpoint_cb),
          step_callbacks=(rec.step_callback,))
    cols = ["t", "energy", "enstrophy", "palinstrophy", "max_omega", "tail_fraction"]
    _write_csv(outdir / "diagnostics.csv", cols, [[r[c] for c in cols] for r in rec.rows])
    write_checkpoint(outdir / "final.bin", state.omega, state.t, state.nu)
    from .figures import diagnostics_figure

    diagnostics_figure(rec.rows, outdir / "diagnostics.png")
    print(f"run complete: t={fmt_float(state.t)} nu={fmt_float(nu)} "
          f"rows={len(rec.rows)} out={outdir}")
    return 0


def cmd_diagnose(args) -> int:
    cfg = parse_config(args.config, _overrides_from(args, {"N": "spectral_field.N"}))
    outdir = Path(args.out)
    inputs = [args.init] if args.init else []
    if args.tracers:
        inputs.append(args.tracers)
    _write_provenance(outdir, cfg, inputs)
    bc = cfg.bubble_config()
    nu = args.nu if args.nu is not None else 0.0
    tracer_points = None
    if args.tracers:
        tracer_points = np.loadtxt(args.tracers, delimiter=",", ndmin=2)
    quad = cfg.quadrature()
    radii = cfg.radii()
    d = diagnostic_run(
        bc, cfg.N, args.T, nu=nu, solver_config=cfg.solver_config(),
        with_origin=True, with_tracks=True, key_radii=radii, quad=quad,
        b_times=tuple(np.linspace(0.0, args.T, 6)) if args.T > 0 else (0.0,),
        b_region=(cfg.get("key_integral", "b_region_lo"),
                  cfg.get("key_integral", "b_region_hi")),
        tracer_points=tracer_points,
    )
    o = d.origin
    cols = ["t", "du11", "du22", "du12", "du21",
            "deta11", "deta22", "deta12", "deta21", "det"]
    _write_csv(outdir / "origin.csv", cols,
               [[float(o[c][i]) for c in cols] for i in range(len(o["t"]))])

    keys = list(d.key_I_k)
    sup_ratio = {round(rep["t"], 9): rep["ratio"] for rep in d.b_reports}
    rows = []
    for i, t in enumerate(d.key_times):
        ratio = sup_ratio.get(round(float(t), 9), "")
        rows.append([float(t), 0.0, float(d.key_I[i])]
                    + [float(d.key_I_k[k][i]) for k in keys] + [ratio])
        if d.key_radii is not None:
            for j, r in enumerate(d.key_radii):
                rows.append([float(t), float(r), float(d.key_I_r[i][j])]
                            + ["" for _ in keys] + [""])
    _write_csv(outdir / "key_integral.csv",
               ["t", "r", "I"] + [f"I_{k}" for k in keys] + ["supB_ratio"], rows)
    if tracer_points is not None:
        trows = []
        for t, pos, det in zip(d.tracer_times, d.tracer_pos, d.tracer_det):
            for idx in range(pos.shape[0]):
                trows.append([float(t), idx, float(pos[idx, 0]), float(pos[idx, 1]),
                              float(det[idx])])
        _write_csv(outdir / "tracers.csv", ["t", "index", "x1", "x2", "det"], trows)
    from .figures import key_integral_figure, origin_figure

    origin_figure(o, outdir / "origin.png")
    key_integral_figure(d.key_times, d.key_I, d.key_I_k, outdir / "key_integral.png")
    print(f"diagnose complete: T={fmt_float(args.T)} out={outdir}")
    return 0


def cmd_sweep(args) -> int:
    cfg = parse_config(args.plan)
    plan = cfg.experiment_plan()
    outdir = Path(args.out)
    _write_provenance(outdir, cfg)

    def progress(rec):
        print(f"  n={rec.n} nu={fmt_float(rec.nu)} chi={fmt_float(rec.chi)} "
              f"({rec.wall_time:.1f}s)", flush=True)

    result = sweep(plan, keep_gap_series=True, progress=progress)
    for rec in result["records"]:
        g = rec.gaps
        _write_csv(outdir / f"run-n{rec.n}.csv",
                   ["t", "u_gap", "omega_gap", "h1_gap"],
                   [[float(g.t[i]), float(g.u_gap[i]), float(g.omega_gap[i]),
                     float(g.h1_gap[i])] for i in range(g.t.size)])
    summary = summary_dict(result)
    (outdir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    from .figures import scaling_figure

    scaling_figure(result["records"], result["scaling_fit"], outdir / "scaling.png")
    fit = result["scaling_fit"]
    print(f"sweep complete: slope={fmt_float(fit.slope)} "
          f"ci=({fmt_float(fit.slope_ci[0])}, {fmt_float(fit.slope_ci[1])}) out={outdir}")
    return 0


def cmd_export(args) -> int:
    with open(args.summary) as fh:
        summary = json.load(fh)
    records = summary.get("records", [])
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    if args.format == "json":
        out.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    else:
        cols = ["n", "nu", "N", "T", "chi", "chi_budget", "enstrophy0", "enstrophyT",
                "u_gap_T", "omega_gap_T", "h1_gap_T",
                "resolved_until_euler", "resolved_until_ns", "wall_time"]
        _write_csv(out, cols, [[r.get(c, "") for c in cols] for r in records])
    print(f"exported {len(records)} records to {out}")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="thinflow",
                                description="2D vorticity simulation laboratory")
    p.add_argument("--version", action="version", version=f"thinflow {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="sample initial vorticity to a checkpoint")
    g.add_argument("--config")
    g.add_argument("--out", required=True)
    g.add_argument("--N", type=int)
    g.add_argument("--n", type=int)
    g.add_argument("--l0", type=int)
    g.add_argument("--epsilon", type=float)
    g.add_argument("--amplitude", type=float)
    g.add_argument("--small-scale-amplitude", dest="small_scale_amplitude", type=float)
    g.set_defaults(func=cmd_gen_data)

    r = sub.add_parser("run", help="evolve a state and emit diagnostics")
    r.add_argument("--config")
    r.add_argument("--init", help="checkpoint to start from (default: config data)")
    r.add_argument("--T", type=float, required=True)
    r.add_argument("--nu", type=float)
    r.add_argument("--out", required=True)
    r.add_argument("--N", type=int)
    r.set_defaults(func=cmd_run)

    d = sub.add_parser("diagnose", help="origin, key-integral, and tracer reports")
    d.add_argument("--config")
    d.add_argument("--init", help="unused data source override (config data is rebuilt)")
    d.add_argument("--T", type=float, required=True)
    d.add_argument("--nu", type=float)
    d.add_argument("--out", required=True)
    d.add_argument("--N", type=int)
    d.add_argument("--tracers", help="CSV file of seed points (x1,x2 per line)")
    d.set_defaults(func=cmd_diagnose)

    s = sub.add_parser("sweep", help="paired viscosity sweep and scaling fit")
    s.add_argument("--plan", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sweep)

    e = sub.add_parser("export", help="convert a sweep summary to CSV or JSON")
    e.add_argument("--summary", required=True)
    e.add_argument("--format", choices=("csv", "json"), default="csv")
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_export)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - single reporting point for the CLI
        category = _error_category(exc)
        print(f"error:{category}: {exc}", file=sys.stderr)
        return _EXIT_CODES[category]


if __name__ == "__main__":
    sys.exit(main())
