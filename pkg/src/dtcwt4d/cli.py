"""Command-line interface: ``dtcwt4d {transform,demo,reconstruct,validate-bank,export}``.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
Every command that writes output also writes ``run_manifest.json`` (atomic)
recording the argument vector, the resolved configuration, seed and versions.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import platform
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__, containers, demos, images, presets
from .filterbank import available_banks, builtin_filter_bank, load_filter_bank, validate_filter_bank

logger = logging.getLogger("dtcwt4d")

DEMOS = ("shift-invariance", "directionality", "growing-ball-subband")


class UsageError(Exception):
    pass


# -- helpers ------------------------------------------------------------------

def _versions():
    return {"dtcwt4d": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def write_run_manifest(outdir, command, argv, config, inputs, outputs, args, started):
    man = {
        "kind": "run-manifest",
        "command": command,
        "argv": list(argv),
        "config": config,
        "inputs": [str(p) for p in inputs],
        "outputs": sorted(str(p) for p in outputs),
        "seed": args.seed,
        "threads": args.threads,
        "versions": _versions(),
        "timing": {"wall_seconds": round(time.perf_counter() - started, 3)},
    }
    path = Path(outdir) / "run_manifest.json"
    containers.atomic_write_json(path, man)
    return path


def _load_json(path):
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"config file not found: {path}")
    try:
        with open(p) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise UsageError(f"cannot parse config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError(f"config {path} must hold a JSON object")
    # a run manifest replays its resolved configuration
    if data.get("kind") == "run-manifest":
        data = data["config"]
    return data


def _resolve_bank(args):
    if getattr(args, "bank_file", None):
        try:
            return load_filter_bank(args.bank_file)
        except FileNotFoundError as exc:
            raise UsageError(str(exc)) from None
    try:
        return builtin_filter_bank(args.bank)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(x) if isinstance(x, float) else x for x in r])


# -- transform ----------------------------------------------------------------

def cmd_transform(args, argv, started):
    from .transform4d import adjoint, forward, inner, inverse, max_levels

    fb = _resolve_bank(args)
    out = Path(args.output)
    config = {"direction": args.direction, "levels": args.levels, "bank": fb.name,
              "level1_details": not args.no_level1_details, "normalization": args.normalization,
              "random": args.random, "input": args.input}
    rng = np.random.default_rng(args.seed)
    if args.direction == "forward":
        if args.random:
            try:
                shape = tuple(int(s) for s in args.random.split(","))
            except ValueError:
                raise UsageError(f"--random expects four comma-separated extents, got {args.random!r}")
            v = rng.standard_normal(shape)
        elif args.input:
            v = containers.load_volume(args.input)
        else:
            raise UsageError("forward needs an input volume container or --random")
        try:
            jmax = max_levels(v.shape)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        if not 1 <= args.levels <= jmax:
            raise UsageError(f"--levels {args.levels} exceeds the bound 2^J <= min extent "
                             f"{min(v.shape)} (max J = {jmax})")
        c = forward(v, args.levels, fb, not args.no_level1_details, args.normalization)
        containers.save_coeffs(out / "coeffs", c)
        outputs = [out / "coeffs"]
        if args.random:
            containers.save_volume(out / "input", v)
            outputs.append(out / "input")
        if c.level1_details_included:
            err = np.linalg.norm(inverse(c, fb) - v) / max(np.linalg.norm(v), 1e-300)
            print(f"round-trip relative error: {err:.3e}")
    else:
        if not args.input:
            raise UsageError(f"{args.direction} needs a coefficient container")
        c = containers.load_coeffs(args.input)
        if args.direction == "inverse":
            try:
                v = inverse(c, fb, allow_lossy=args.allow_lossy)
            except ValueError as exc:
                raise UsageError(str(exc)) from None
        else:
            v = adjoint(c, fb, allow_lossy=True)
        containers.save_volume(out / "volume", v)
        outputs = [out / "volume"]
        if args.check_adjoint and args.direction == "adjoint":
            f = rng.standard_normal(c.shape)
            cf = forward(f, c.levels, fb, c.level1_details_included, c.normalization)
            lhs = inner(cf, c)
            rhs = float(np.sum(f * v))
            res = abs(lhs - rhs) / (np.sqrt(cf.energy() * c.energy()) or 1.0)
            print(f"dot-test residual: {res:.3e}")
    write_run_manifest(out, "transform", argv, config, [args.input] if args.input else [],
                       outputs, args, started)
    return 0


# -- demo ---------------------------------------------------------------------

def cmd_demo(args, argv, started):
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    fb = _resolve_bank(args)
    outputs = []
    config = {"demo": args.name, "levels": args.levels, "bank": fb.name}
    if args.name == "shift-invariance":
        r = demos.shift_invariance_experiment(levels=args.levels, bank=fb)
        path = out / "shift_invariance.csv"
        rows = [["dtcwt", s, i] + [float(e)] for s, row in enumerate(r["energies_dtcwt"])
                for i, e in enumerate(row)]
        rows += [["dwt", s, i, float(e)] for s, row in enumerate(r["energies_dwt"])
                 for i, e in enumerate(row)]
        _write_csv(path, ["transform", "shift", "subband", "energy"], rows)
        summary = out / "shift_invariance_cv.csv"
        _write_csv(summary, ["transform", "cv"], [["dtcwt", r["cv_dtcwt"]], ["dwt", r["cv_dwt"]]])
        outputs += [path, summary]
        print(f"coefficient of variation: dtcwt {r['cv_dtcwt']:.4g}  dwt {r['cv_dwt']:.4g}  "
              f"ratio {r['cv_dtcwt'] / r['cv_dwt']:.4g}")
    elif args.name == "directionality":
        r = demos.directionality_experiment(levels=args.levels, bank=fb)
        path = out / "directionality.csv"
        rows = [[z + 1] + [float(x) for x in r["shares"][z]] for z in range(8)]
        _write_csv(path, ["wave_orthant"] + [f"share_o{z}" for z in range(1, 9)], rows)
        outputs.append(path)
        print("matching-orthant energy share: " + " ".join(f"{x:.3f}" for x in r["matching"]))
    else:
        r = demos.growing_ball_subbands(levels=args.levels, kappa=args.kappa, zeta=args.orthant, bank=fb)
        path = out / "subband_energies.csv"
        rows = [["dtcwt", k + 1, z + 1, float(r["energies_dtcwt"][k, z])] for k in range(15) for z in range(8)]
        rows += [["dwt", k + 1, 0, float(r["energies_dwt"][k])] for k in range(15)]
        _write_csv(path, ["transform", "kappa", "orthant", "energy"], rows)
        outputs.append(path)
        nx, ny, nz, nt = r["phantom"].shape
        picks = [("xy", nz // 2, nt // 2), ("xz", ny // 2, nt // 2)]
        for name in ("phantom", "dtcwt", "dwt"):
            vol = r[name]
            lim = float(np.max(np.abs(vol))) or 1.0
            window = (0.0, lim) if name == "phantom" else (-lim, lim)
            paths, _ = images.export_slices(vol, picks, out / name, window)
            outputs += paths
        print(f"wrote single-subband reconstructions (kappa={args.kappa}, orthant={args.orthant}) to {out}")
    write_run_manifest(out, "demo", argv, config, [], outputs, args, started)
    return 0


# -- reconstruct --------------------------------------------------------------

def _reconstruct_config(args):
    if args.config:
        cfg = _load_json(args.config)
        base = presets.get_preset(cfg.pop("preset")) if "preset" in cfg else {}
        cfg = presets.merge(base, cfg)
    else:
        try:
            cfg = presets.get_preset(args.preset)
        except KeyError as exc:
            raise UsageError(exc.args[0]) from None
    unknown = set(cfg) - set(presets.SECTIONS) - {"picks", "seed", "window"}
    if unknown:
        raise UsageError(f"unknown config sections: {sorted(unknown)}")
    for sec in presets.SECTIONS:
        cfg.setdefault(sec, {})
    if not cfg["sparsifiers"]:
        cfg["sparsifiers"] = {"dtcwt": {}, "dwt": {}}
    if args.angles is not None:
        cfg["scan"]["n_angles"] = args.angles
    if args.noise is not None:
        cfg["scan"]["noise_rel"] = args.noise
    if args.max_iter is not None:
        cfg["solver"]["max_iter"] = args.max_iter
    if args.mu is not None:
        cfg["solver"]["mu0"] = args.mu
        cfg["solver"]["adapt_mu"] = False
    if args.sparsifier != "both":
        cfg["sparsifiers"] = {args.sparsifier: cfg["sparsifiers"].get(args.sparsifier, {})}
    if args.pick:
        cfg["picks"] = args.pick
    cfg.setdefault("seed", args.seed)
    return cfg


def cmd_reconstruct(args, argv, started):
    from .phantoms import PhantomSpec, fine_and_coarse
    from .solver import SolverConfig, metrics, solve
    from .tomo import operator_norm_sq, parallel_geometry, simulate_measurements

    cfg = _reconstruct_config(args)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    try:
        spec = PhantomSpec(**cfg["phantom"])
        solver_cfgs = {name: SolverConfig.from_dict({**cfg["solver"], **over, "sparsifier": name,
                                                     "seed": cfg["seed"]})
                       for name, over in cfg["sparsifiers"].items()}
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid configuration: {exc}") from None
    if not solver_cfgs:
        raise UsageError("no sparsifier selected")
    scan = cfg["scan"]
    nx, ny, nz, nt = spec.extents
    if nx != ny:
        raise UsageError("reconstruction needs square slices (nx == ny)")
    picks = [images.parse_pick(p) for p in cfg.get("picks") or []] or \
        [("xy", nz // 2, t) for t in sorted({0, nt // 2})]

    inputs = []
    fine, coarse = fine_and_coarse(spec)
    if args.sinogram:
        m, g = containers.load_sinogram(args.sinogram)
        inputs.append(args.sinogram)
    else:
        g = parallel_geometry(nx, nz, nt, int(scan.get("n_angles", 30)), scan.get("schedule", "same"),
                              scan.get("n_det"))
        phantom_hi = fine
        if spec.intra_step_motion:
            from .phantoms import intra_step_frames
            phantom_hi = intra_step_frames(spec, [a.size for a in g.angles])
        m = simulate_measurements(phantom_hi, g, float(scan.get("noise_rel", 0.05)), seed=cfg["seed"])
    outputs = [containers.save_volume(out / "reference", coarse),
               containers.save_sinogram(out / "sinogram", m, g)]
    L = operator_norm_sq(g, tol=1e-4, seed=cfg["seed"])
    table = []
    ref_window = images.default_window(coarse)
    for name, scfg in solver_cfgs.items():
        logger.info("reconstructing with %s", name)
        f, report = solve(m, g, scfg, op_norm_sq=L)
        met = metrics(f, coarse)
        last = report.history[-1]
        table.append([name, met["relative_error"], met["psnr"], report.iterations,
                      last["sparsity"], last["mu"]])
        outputs.append(containers.save_volume(out / f"recon_{name}", f))
        report.write_csv(out / f"convergence_{name}.csv")
        outputs.append(out / f"convergence_{name}.csv")
        paths, _ = images.export_slices(f, picks, out / f"slices_{name}", ref_window)
        outputs += paths
        print(f"{name:6s} relative error {100 * met['relative_error']:.1f}%  PSNR {met['psnr']:.2f} dB  "
              f"iterations {report.iterations}  sparsity {last['sparsity']:.3f}")
    paths, _ = images.export_slices(coarse, picks, out / "slices_reference", ref_window)
    outputs += paths
    _write_csv(out / "metrics.csv",
               ["sparsifier", "relative_error", "psnr_db", "iterations", "final_sparsity", "final_mu"], table)
    outputs.append(out / "metrics.csv")
    cfg["window"] = list(ref_window)
    write_run_manifest(out, "reconstruct", argv, cfg, inputs, outputs, args, started)
    return 0


# -- validate-bank / export ---------------------------------------------------

def cmd_validate_bank(args, argv, started):
    fb = _resolve_bank(args)
    report = validate_filter_bank(fb, seed=args.seed)
    print(report)
    return 0 if report.passed else 1


def cmd_export(args, argv, started):
    try:
        vol = containers.load_volume(args.input)
    except FileNotFoundError as exc:
        raise UsageError(str(exc)) from None
    window = None
    try:
        picks = [images.parse_pick(p) for p in args.pick]
        if args.window:
            lo, hi = (float(x) for x in args.window.split(","))
            window = (lo, hi)
        for pick in picks:
            images.extract(vol, *pick)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = Path(args.output)
    paths, window = images.export_slices(vol, picks, out, window)
    for p in paths:
        print(p)
    write_run_manifest(out, "export", argv, {"picks": args.pick, "window": list(window)},
                       [args.input], paths, args, started)
    return 0


# -- parser -------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="dtcwt4d", description="4D dual-tree complex wavelets and dynamic tomography")
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    p.add_argument("--threads", type=int, default=1,
                   help="recorded in the run manifest; kernels run single-threaded for reproducibility")
    p.add_argument("--config", help="JSON run config or a previous run_manifest.json to replay")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    def bank_args(sp):
        sp.add_argument("--bank", default="nearsym13_19+qshift14",
                        help=f"built-in filter bank ({', '.join(available_banks())})")
        sp.add_argument("--bank-file", help="filter bank text file (overrides --bank)")

    t = sub.add_parser("transform", help="forward, inverse or adjoint transform of a container")
    t.add_argument("input", nargs="?", help="volume container (forward) or coefficient container")
    t.add_argument("-o", "--output", required=True)
    t.add_argument("--direction", choices=("forward", "inverse", "adjoint"), default="forward")
    t.add_argument("--levels", type=int, default=2)
    t.add_argument("--no-level1-details", action="store_true")
    t.add_argument("--normalization", choices=("standard", "parseval"), default="standard")
    t.add_argument("--random", metavar="NX,NY,NZ,NT", help="transform a seeded random volume instead of INPUT")
    t.add_argument("--allow-lossy", action="store_true", help="inverse without level-1 details")
    t.add_argument("--check-adjoint", action="store_true", help="print a dot-product test residual")
    bank_args(t)

    d = sub.add_parser("demo", help="shift-invariance, directionality or growing-ball-subband")
    d.add_argument("name")
    d.add_argument("-o", "--output", required=True)
    d.add_argument("--levels", type=int, default=2)
    d.add_argument("--kappa", type=int, default=15, help="configuration kept in the subband demo")
    d.add_argument("--orthant", type=int, default=1)
    bank_args(d)

    r = sub.add_parser("reconstruct", help="simulate data and run PDFP reconstructions")
    r.add_argument("-o", "--output", required=True)
    r.add_argument("--preset", default="dsl-32", help=f"one of {sorted(presets.PRESETS)}")
    r.add_argument("--sparsifier", choices=("dtcwt", "dwt", "both"), default="both")
    r.add_argument("--angles", type=int)
    r.add_argument("--noise", type=float, help="noise std relative to the data maximum")
    r.add_argument("--mu", type=float, help="fixed regularization weight (disables mu control)")
    r.add_argument("--max-iter", type=int)
    r.add_argument("--sinogram", help="load measurements from a sinogram container")
    r.add_argument("--pick", action="append", help="slice pick PLANE,INDEX,TIME (repeatable)")

    v = sub.add_parser("validate-bank", help="check a filter bank")
    bank_args(v)

    e = sub.add_parser("export", help="write PGM slices of a volume container")
    e.add_argument("input")
    e.add_argument("-o", "--output", required=True)
    e.add_argument("--pick", action="append", required=True, help="PLANE,INDEX,TIME (repeatable)")
    e.add_argument("--window", help="LO,HI intensity window (default: volume min,max)")
    return p


COMMANDS = {
    "transform": cmd_transform,
    "demo": cmd_demo,
    "reconstruct": cmd_reconstruct,
    "validate-bank": cmd_validate_bank,
    "export": cmd_export,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "demo" and args.name not in DEMOS:
        parser.print_usage(sys.stderr)
        print(f"dtcwt4d: error: unknown demo {args.name!r}; choose from {', '.join(DEMOS)}", file=sys.stderr)
        return 2
    if args.config and args.command != "reconstruct":
        try:
            _load_json(args.config)
        except UsageError as exc:
            print(f"dtcwt4d: error: {exc}", file=sys.stderr)
            return 2
    started = time.perf_counter()
    try:
        return COMMANDS[args.command](args, argv, started)
    except UsageError as exc:
        print(f"dtcwt4d: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure
        logger.debug("failure", exc_info=True)
        print(f"dtcwt4d: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
