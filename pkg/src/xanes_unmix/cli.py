"""Batch command-line surface.

Subcommands: simulate, unmix, endmembers, metrics, sweep, render. Every error
exits nonzero after a single 'error: ...' line on stderr; given identical
flags and seeds, runs are deterministic and outputs byte-identical.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .baselines import EdgeWindows, edge50_map, edge50_reference_energies, lcf_unmix
from .cubeio import read_cube, read_dictionary_csv, render_pgm, write_cube, write_dictionary_csv
from .datatypes import ImageGeometry, SpectralCube
from .denoisers import DenoiserSpec, denoise
from .errors import XanesUnmixError
from .simulate import SceneSpec, build_scene, default_grid, default_states, psnr, rmse, ssim
from .solver import SolverConfig, solve, write_diagnostics_csv
from .vca import VcaConfig, vca_extract

METHODS = ("edge50", "lcf", "tv", "pnp")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _parse_interval(text: str, flag: str) -> tuple[float, float]:
    parts = text.split(":")
    if len(parts) != 2:
        raise _UsageError(f"{flag} expects LO:HI, got {text!r}")
    return float(parts[0]), float(parts[1])


def _parse_floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _parse_denoiser_params(pairs: list[str]) -> dict:
    params = {}
    for pair in pairs:
        if "=" not in pair:
            raise _UsageError(f"--denoiser-param expects key=value, got {pair!r}")
        key, value = pair.split("=", 1)
        try:
            params[key] = int(value)
        except ValueError:
            try:
                params[key] = float(value)
            except ValueError:
                params[key] = value
    return params


def _cmd_simulate(args) -> int:
    grid = default_grid(args.bands, args.e_min, args.e_max)
    spec = SceneSpec(
        geometry=ImageGeometry(args.rows, args.cols),
        states=default_states(args.states),
        label_source=args.pattern,
        scaling_range=(args.scaling_lo, args.scaling_hi),
        sigma=args.sigma,
        seed=args.seed,
        grid=grid,
        noise_unit_frac=args.noise_unit_frac,
    )
    cube, gt, scaling, dictionary = build_scene(spec)
    write_cube(args.out_cube, cube)
    if args.out_gt:
        write_cube(args.out_gt, gt)
    if args.out_scaling:
        write_cube(args.out_scaling, scaling)
    if args.out_dict:
        write_dictionary_csv(args.out_dict, dictionary)
    return 0


def _cmd_unmix(args) -> int:
    cube = read_cube(args.infile, "cube")
    dictionary = read_dictionary_csv(args.dictionary)
    gt = read_cube(args.gt, "phase") if args.gt else None

    if args.method == "edge50":
        if dictionary.n_states != 2:
            raise XanesUnmixError(
                f"edge50 mapping needs exactly 2 reference states, dictionary has {dictionary.n_states}"
            )
        if args.pre_edge or args.post_edge:
            default = EdgeWindows.from_grid(cube.grid)
            win = EdgeWindows(
                pre_edge=_parse_interval(args.pre_edge, "--pre-edge") if args.pre_edge else default.pre_edge,
                post_edge=_parse_interval(args.post_edge, "--post-edge") if args.post_edge else default.post_edge,
            )
        else:
            win = EdgeWindows.from_grid(cube.grid)
        refs = edge50_reference_energies(dictionary, win)
        phase, _flags = edge50_map(cube, win, refs)
        write_cube(args.out, phase)
        return 0

    if args.method == "lcf":
        phase, _converged = lcf_unmix(dictionary, cube)
        write_cube(args.out, phase)
        return 0

    cfg = SolverConfig(
        lam=args.lam,
        rho=args.rho,
        max_iter=args.max_iter,
        re_tol=args.re_tol,
        cg_tol=args.cg_tol,
        cg_max_iter=args.cg_max_iter,
        prior=args.method,
        denoiser=args.denoiser,
        denoiser_params=_parse_denoiser_params(args.denoiser_param),
    )
    result = solve(cube, dictionary, cfg, gt)
    if result.error is not None:
        print(f"warning: {result.error}", file=sys.stderr)
    write_cube(args.out, result.phase_map)
    if args.out_scaling:
        write_cube(args.out_scaling, result.scaling)
    if args.diag:
        write_diagnostics_csv(args.diag, result.diagnostics)
    return 0


def _cmd_endmembers(args) -> int:
    cube = read_cube(args.infile, "cube")
    if args.predenoise:
        spec = DenoiserSpec(args.predenoise, _parse_denoiser_params(args.denoiser_param))
        values = np.empty_like(cube.values)
        for t in range(cube.n_bands):
            values[t] = denoise(cube.band_image(t), args.predenoise_sigma, spec).ravel()
        cube = SpectralCube(cube.geometry, cube.grid, values)
    cfg = VcaConfig(count=args.count, seed=args.seed, snr_override=args.snr_db)
    dictionary, _indices = vca_extract(cube, cfg)
    write_dictionary_csv(args.out, dictionary)
    return 0


def _cmd_metrics(args) -> int:
    est = read_cube(args.est, "phase")
    gt = read_cube(args.gt, "phase")
    p = psnr(est, gt, max_one=args.max_one)
    s = ssim(est, gt)
    r = rmse(est, gt)
    print("psnr_db,ssim,rmse")
    print(f"{p!r},{s!r},{r!r}")
    return 0


def _cmd_sweep(args) -> int:
    cube = read_cube(args.infile, "cube")
    dictionary = read_dictionary_csv(args.dictionary)
    gt = read_cube(args.gt, "phase")
    lambdas = _parse_floats(args.lambdas)
    rhos = _parse_floats(args.rhos)
    if not lambdas or not rhos:
        raise _UsageError("--lambdas and --rhos must each list at least one value")
    lines = ["lambda,rho,rmse"]
    for lam in lambdas:
        for rho in rhos:
            cfg = SolverConfig(
                lam=lam,
                rho=rho,
                max_iter=args.max_iter,
                prior=args.method,
                denoiser=args.denoiser,
                denoiser_params=_parse_denoiser_params(args.denoiser_param),
            )
            result = solve(cube, dictionary, cfg)
            lines.append(f"{lam!r},{rho!r},{rmse(result.phase_map, gt)!r}")
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_render(args) -> int:
    phase = read_cube(args.infile, "phase")
    render_pgm(phase, args.state, args.out)
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="xanes-unmix", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="generate a synthetic scene")
    p.add_argument("--rows", type=int, default=64)
    p.add_argument("--cols", type=int, default=64)
    p.add_argument("--states", type=int, default=2)
    p.add_argument("--pattern", default="disks", choices=("disks", "blocks", "blend"))
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scaling-lo", type=float, default=0.8)
    p.add_argument("--scaling-hi", type=float, default=1.2)
    p.add_argument("--bands", type=int, default=117)
    p.add_argument("--e-min", type=float, default=8180.0)
    p.add_argument("--e-max", type=float, default=8562.0)
    p.add_argument("--noise-unit-frac", type=float, default=0.1)
    p.add_argument("--out-cube", required=True)
    p.add_argument("--out-gt")
    p.add_argument("--out-scaling")
    p.add_argument("--out-dict")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("unmix", help="estimate a phase map from a cube")
    p.add_argument("--method", required=True, choices=METHODS)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--dict", dest="dictionary", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--out-scaling")
    p.add_argument("--diag")
    p.add_argument("--gt")
    p.add_argument("--lambda", dest="lam", type=float, default=0.01)
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--re-tol", type=float, default=0.0)
    p.add_argument("--cg-tol", type=float, default=1e-6)
    p.add_argument("--cg-max-iter", type=int, default=50)
    p.add_argument("--denoiser", default="nlm")
    p.add_argument("--denoiser-param", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--pre-edge", metavar="LO:HI")
    p.add_argument("--post-edge", metavar="LO:HI")
    p.set_defaults(func=_cmd_unmix)

    p = sub.add_parser("endmembers", help="extract reference spectra with VCA")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--snr-db", type=float, default=None)
    p.add_argument("--predenoise", metavar="DENOISER_ID")
    p.add_argument("--predenoise-sigma", type=float, default=0.1)
    p.add_argument("--denoiser-param", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_endmembers)

    p = sub.add_parser("metrics", help="PSNR/SSIM/RMSE of an estimate vs ground truth")
    p.add_argument("--est", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--max-one", action="store_true", help="use MAX=1 instead of max(estimate)")
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("sweep", help="RMSE over a lambda x rho grid")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--dict", dest="dictionary", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--lambdas", required=True, help="comma-separated values")
    p.add_argument("--rhos", required=True, help="comma-separated values")
    p.add_argument("--method", default="tv", choices=("tv", "pnp"))
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--denoiser", default="nlm")
    p.add_argument("--denoiser-param", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("render", help="write one state image as binary PGM")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--state", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_render)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (XanesUnmixError, OSError, ValueError, IndexError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
