"""Command-line front end.

Subcommands: ``simulate`` writes a seeded synthetic scene, ``fuse`` runs
the solver on three rasters, ``evaluate`` scores an estimate against
ground truth, and ``runcase`` chains all three. Exit codes: 0 success,
1 usage or I/O error, 2 solver stopped at the iteration cap.

PNG previews map the first three bands to RGB; ``--png-scaling fixed``
clips samples to [0, 1] while ``minmax`` stretches each band by its own
range.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from pathlib import Path

from . import __version__
from . import report as reporting
from .fusion import FusionInput, default_params, fuse
from .metrics import evaluate
from .pipeline import run_case, write_fixture
from .ppds import StoppingRule
from .raster import RasterError, read_raster, to_png, write_raster
from .simulate import CASE_PRESETS, CaseConfig, FixtureSpec, make_fixture

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NOT_CONVERGED = 2


class _Parser(argparse.ArgumentParser):
    # argparse defaults to exit code 2 for usage errors; 2 is reserved for
    # non-convergence here, so remap to 1.
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _manifest(out_dir: Path, payload: dict) -> None:
    payload = {"tool": "rostf", "version": __version__,
               "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
               **payload}
    (out_dir / "manifest.json").write_text(json.dumps(payload, indent=2) + "\n")


def _read(path: str):
    try:
        return read_raster(path)
    except FileNotFoundError:
        raise SystemExit(_fail(f"cannot read raster: no such file: {path}"))
    except RasterError as exc:
        raise SystemExit(_fail(f"cannot decode {path}: {exc}"))


def _fail(message: str) -> int:
    print(f"rostf: error: {message}", file=sys.stderr)
    return EXIT_USAGE


def cmd_simulate(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    spec = FixtureSpec(height=args.size, width=args.size, bands=args.bands,
                       k=args.k, regions=args.regions, shift=args.shift,
                       seed=args.seed)
    fixture = make_fixture(spec, CaseConfig.preset(args.case, seed=args.seed))
    manifest = write_fixture(fixture, out_dir)
    _manifest(out_dir, {"command": "simulate", "case": args.case, **manifest})
    if args.png:
        for name in manifest["files"]:
            img = fixture.__getattribute__(name.split(".")[0])
            to_png(img, out_dir / name.replace(".bmr", ".png"), args.png_scaling)
    print(f"wrote {len(manifest['files'])} rasters to {out_dir}")
    return EXIT_OK


def cmd_fuse(args) -> int:
    h_r = _read(args.hr)
    l_r = _read(args.lr_ref)
    l_t = _read(args.lr_tgt)
    try:
        inp = FusionInput(h_r=h_r, l_r=l_r, l_t=l_t)
    except ValueError as exc:
        return _fail(str(exc))
    noise = CaseConfig(sigma_h=args.sigma_h, sigma_l=args.sigma_l,
                       r_h=args.r_h, r_l=args.r_l, seed=0)
    params = default_params(inp, noise, p=args.p)
    overrides = {name: getattr(args, name) for name in
                 ("lam", "alpha", "eta_h", "eta_l", "eps_h", "eps_l")
                 if getattr(args, name) is not None}
    if overrides:
        params = dataclasses.replace(params, **overrides)
    stop = StoppingRule(tol=args.tol, max_iters=args.max_iters)
    out = fuse(inp, params, stop=stop, trace_every=args.trace_every)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_raster(out.h_t_hat, out_dir / "h_t_est.bmr")
    write_raster(out.h_r_denoised, out_dir / "h_r_denoised.bmr")
    write_raster(out.s_hr, out_dir / "s_hr.bmr")
    write_raster(out.s_lr, out_dir / "s_lr.bmr")
    write_raster(out.s_lt, out_dir / "s_lt.bmr")
    out.trace.write_csv(out_dir / "trace.csv")
    (out_dir / "params.json").write_text(params.to_json() + "\n")
    _manifest(out_dir, {
        "command": "fuse",
        "inputs": {"hr": args.hr, "lr_ref": args.lr_ref, "lr_tgt": args.lr_tgt},
        "noise": {"sigma_h": args.sigma_h, "sigma_l": args.sigma_l,
                  "r_h": args.r_h, "r_l": args.r_l},
        "params": params.to_dict(),
        "stopping": {"tol": args.tol, "max_iters": args.max_iters},
        "converged": out.converged,
        "iterations": out.iterations,
        "rel_change": out.rel_change,
        "residuals": [float(v) for v in out.residuals],
    })
    if args.png:
        to_png(out.h_t_hat, out_dir / "h_t_est.png", args.png_scaling)
        to_png(out.h_r_denoised, out_dir / "h_r_denoised.png", args.png_scaling)
    if not args.no_figures:
        reporting.save_trace_figure(out.trace, out_dir / "trace.png",
                                    title=f"fuse p={args.p}")
    status = "converged" if out.converged else "hit iteration cap"
    print(f"{status} after {out.iterations} iterations "
          f"(relative change {out.rel_change:.3e})")
    return EXIT_OK if out.converged else EXIT_NOT_CONVERGED


def cmd_evaluate(args) -> int:
    est = _read(args.est)
    truth = _read(args.truth)
    try:
        rep = evaluate(est, truth)
    except ValueError as exc:
        return _fail(str(exc))
    row = {"name": "estimate", **rep.as_dict()}
    print(reporting.format_metrics_table([row]))
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "report.json").write_text(rep.to_json() + "\n")
        reporting.write_metrics_csv(out_dir / "report.csv", [row])
        if not args.no_figures:
            reporting.save_comparison_figure(
                [("estimate", est), ("truth", truth)],
                out_dir / "figures.png")
        _manifest(out_dir, {"command": "evaluate",
                            "inputs": {"est": args.est, "truth": args.truth},
                            "report": rep.as_dict()})
    return EXIT_OK


def cmd_runcase(args) -> int:
    p_variants = {"1": (1,), "2": (2,), "both": (1, 2)}[args.p]
    combined = run_case(
        case=args.case, seed=args.seed, size=args.size, bands=args.bands,
        k=args.k, regions=args.regions, shift=args.shift,
        p_variants=p_variants, tol=args.tol, max_iters=args.max_iters,
        trace_every=args.trace_every, out_dir=args.out,
        figures=not args.no_figures)
    print(reporting.format_metrics_table(combined["table"]))
    if args.out:
        _manifest(Path(args.out), {
            "command": "runcase",
            "case": args.case,
            "seed": args.seed,
            "geometry": combined["geometry"],
            "k": args.k,
            "regions": args.regions,
            "shift": args.shift,
            "stopping": combined["stopping"],
            "p_variants": list(p_variants),
        })
    converged = all(v["converged"] for v in combined["variants"].values())
    return EXIT_OK if converged else EXIT_NOT_CONVERGED


def _add_png_flags(p):
    p.add_argument("--png", action="store_true",
                   help="also write 8-bit PNG previews (first 3 bands as RGB)")
    p.add_argument("--png-scaling", choices=("fixed", "minmax"), default="fixed",
                   help="fixed: clip samples to [0,1]; minmax: per-band stretch")


def _add_stop_flags(p):
    p.add_argument("--tol", type=float, default=1e-5,
                   help="relative primal change threshold (default 1e-5)")
    p.add_argument("--max-iters", type=int, default=20000,
                   help="iteration cap (default 20000)")
    p.add_argument("--trace-every", type=int, default=10,
                   help="diagnostic cadence in iterations (default 10)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rostf",
                     description="Robust optimization-based spatiotemporal fusion")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a seeded synthetic scene")
    p.add_argument("--case", choices=sorted(CASE_PRESETS), required=True)
    p.add_argument("--size", type=int, default=64, help="square scene size")
    p.add_argument("--bands", type=int, default=4)
    p.add_argument("--k", type=int, default=8, help="HR/LR resolution factor")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--regions", type=int, default=6)
    p.add_argument("--shift", type=float, default=0.05,
                   help="max per-region brightness change between dates")
    p.add_argument("--out", required=True)
    _add_png_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fuse", help="fuse three rasters")
    p.add_argument("--hr", required=True, help="reference-date HR raster")
    p.add_argument("--lr-ref", required=True, help="reference-date LR raster")
    p.add_argument("--lr-tgt", required=True, help="target-date LR raster")
    p.add_argument("--p", type=int, choices=(1, 2), default=2,
                   help="edge-similarity norm (default 2)")
    p.add_argument("--sigma-h", type=float, default=0.0,
                   help="HR Gaussian noise std dev")
    p.add_argument("--sigma-l", type=float, default=0.0)
    p.add_argument("--r-h", type=float, default=0.0,
                   help="HR salt-and-pepper rate")
    p.add_argument("--r-l", type=float, default=0.0)
    for name in ("lam", "alpha", "eta-h", "eta-l", "eps-h", "eps-l"):
        p.add_argument(f"--{name}", type=float, default=None,
                       help=f"override the derived {name.replace('-', '_')}")
    p.add_argument("--out", required=True)
    p.add_argument("--no-figures", action="store_true")
    _add_stop_flags(p)
    _add_png_flags(p)
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("evaluate", help="score an estimate against ground truth")
    p.add_argument("--est", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("runcase", help="simulate, fuse, and evaluate one case")
    p.add_argument("--case", choices=sorted(CASE_PRESETS), required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--bands", type=int, default=4)
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--regions", type=int, default=6)
    p.add_argument("--shift", type=float, default=0.05)
    p.add_argument("--p", choices=("1", "2", "both"), default="both")
    p.add_argument("--out", default=None)
    p.add_argument("--no-figures", action="store_true")
    _add_stop_flags(p)
    p.set_defaults(func=cmd_runcase)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except ValueError as exc:
        return _fail(str(exc))
    except OSError as exc:
        return _fail(str(exc))


if __name__ == "__main__":
    sys.exit(main())
