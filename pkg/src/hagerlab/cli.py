"""Command-line entry point: ``hagerlab <subcommand> [config.json] [overrides]``."""

from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from .checks import curve_rows, profile_rows, run_verify
from .config import ExperimentConfig, load_config
from .ensemble import pseudospectrum_grid, run_spectrum_ensemble
from .errors import ConfigError, HagerlabError
from .report import RunManifest, write_outputs
from .symbol import action, bracket_factor
from .theory import density_components

log = logging.getLogger("hagerlab")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("config", nargs="?", help="JSON experiment config (defaults apply when omitted)")
    p.add_argument("--h", type=float, help="semiclassical parameter")
    p.add_argument("--delta", help="coupling: a number or exp(-c/h)")
    p.add_argument("--epsilon0", type=float, help="coupling through delta = sqrt(h) exp(-epsilon0/h)")
    p.add_argument("--n", type=int, dest="N", help="Fourier cutoff; matrices are (2N+1) x (2N+1)")
    p.add_argument("--trials", type=int, help="number of random perturbations")
    p.add_argument("--seed", type=int, help="64-bit master seed")
    p.add_argument("--box", type=float, nargs=4, metavar=("RE0", "RE1", "IM0", "IM1"), help="counting window")
    p.add_argument("--bins", type=int, help="number of Im bins in the profile")
    p.add_argument("--out", default="out", help="output directory (default: ./out)")
    p.add_argument("--workers", type=int, help="worker processes (default: CPU count, capped by HAGERLAB_THREADS)")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hagerlab",
        description="Eigenvalue statistics of randomly perturbed hD + g(x) on the circle.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="subcommand")

    p = sub.add_parser("spectrum", help="eigenvalues of an ensemble of perturbed matrices")
    _common(p)
    p = sub.add_parser("density-profile", help="empirical vs predicted density along Im z")
    _common(p)
    p = sub.add_parser("pseudospec", help="smallest singular value of H - z on a grid vs prediction")
    _common(p)
    p.add_argument("--grid", type=float, nargs=4, default=[-0.5, 0.5, -0.9, 0.9], metavar=("RE0", "RE1", "IM0", "IM1"))
    p.add_argument("--nx", type=int, default=20)
    p.add_argument("--ny", type=int, default=19)
    p = sub.add_parser("curves", help="level, gamma and Gamma curves across the Re window")
    _common(p)
    p = sub.add_parser("theory-eval", help="closed-form density components over an Im grid")
    _common(p)
    p.add_argument("--im-range", type=float, nargs=2, default=[-0.9, 0.9], metavar=("LO", "HI"))
    p.add_argument("--points", type=int, default=181)
    p.add_argument("--re", type=float, help="Re z of the evaluation line (default <Re g> + h/2)")
    p = sub.add_parser("verify", help="run the acceptance suite and write all outputs")
    _common(p)
    return parser


def _config(args) -> ExperimentConfig:
    overrides = {
        "h": args.h,
        "delta": args.delta,
        "epsilon0": args.epsilon0,
        "N": args.N,
        "trials": args.trials,
        "seed": args.seed,
        "box": args.box,
        "bins": args.bins,
    }
    if args.delta is not None and args.epsilon0 is not None:
        raise ConfigError("give exactly one of --delta and --epsilon0", field="delta")
    return load_config(args.config, overrides)


def _manifest(cfg: ExperimentConfig, **notes) -> RunManifest:
    return RunManifest(config=cfg.to_dict(), seed=cfg.seed, notes=notes)


def cmd_spectrum(args, cfg: ExperimentConfig) -> int:
    t0 = time.perf_counter()
    ens = run_spectrum_ensemble(cfg, workers=args.workers)
    m = _manifest(
        cfg,
        box_count_mean=float(ens.box_counts.mean()),
        hs_norm_exceedances=ens.hs_norm_exceedances,
    )
    m.wall_time = time.perf_counter() - t0
    write_outputs(args.out, m, spectra=ens.spectra)
    print(f"wrote {sum(len(e) for e in ens.spectra)} eigenvalues to {Path(args.out) / 'eigenvalues.csv'}")
    return 0


def cmd_density_profile(args, cfg: ExperimentConfig) -> int:
    t0 = time.perf_counter()
    ens = run_spectrum_ensemble(cfg, workers=args.workers)
    rows = profile_rows(ens, cfg.params)
    m = _manifest(cfg)
    m.wall_time = time.perf_counter() - t0
    write_outputs(args.out, m, profile=rows)
    print(f"wrote {len(rows)} profile rows to {Path(args.out) / 'profile.csv'}")
    return 0


def cmd_pseudospec(args, cfg: ExperimentConfig) -> int:
    t0 = time.perf_counter()
    re0, re1, im0, im1 = args.grid
    pts = pseudospectrum_grid(cfg.symbol, cfg.params, cfg.N, (re0, re1), (im0, im1), args.nx, args.ny)
    m = _manifest(cfg, grid=list(args.grid), nx=args.nx, ny=args.ny)
    m.wall_time = time.perf_counter() - t0
    write_outputs(args.out, m, pseudospec=[p[:5] for p in pts])
    print(f"wrote {len(pts)} grid points to {Path(args.out) / 'pseudospec.csv'}")
    return 0


def cmd_curves(args, cfg: ExperimentConfig) -> int:
    t0 = time.perf_counter()
    rows = curve_rows(cfg.symbol, cfg.params, cfg.box)
    m = _manifest(cfg)
    m.wall_time = time.perf_counter() - t0
    write_outputs(args.out, m, curves=rows)
    print(f"wrote {len(rows)} rows to {Path(args.out) / 'curves.csv'}")
    return 0


def theory_rows(cfg: ExperimentConfig, im_range, points: int, re: float | None):
    sym, params = cfg.symbol, cfg.params
    re = sym.mean.real + 0.5 * cfg.h if re is None else re
    rows = []
    for y in np.linspace(im_range[0], im_range[1], points):
        y = float(y)
        smp = action(sym, y)
        dv = density_components(sym, params, complex(re, y))
        rows.append((y, smp.s, smp.ds, bracket_factor(sym, y), dv.psi1, dv.log_psi2, dv.log_theta, dv.density))
    return rows


def cmd_theory_eval(args, cfg: ExperimentConfig) -> int:
    t0 = time.perf_counter()
    rows = theory_rows(cfg, args.im_range, args.points, args.re)
    m = _manifest(cfg, im_range=list(args.im_range), points=args.points, re=args.re)
    m.wall_time = time.perf_counter() - t0
    write_outputs(args.out, m, theory=rows)
    print(f"wrote {len(rows)} rows to {Path(args.out) / 'theory.csv'}")
    return 0


def cmd_verify(args, cfg: ExperimentConfig) -> int:
    run = run_verify(cfg, workers=args.workers)
    m = _manifest(cfg)
    m.wall_time = run.wall_time
    m.checks = [r.to_dict() for r in run.results]
    write_outputs(
        args.out,
        m,
        spectra=run.ensemble.spectra,
        profile=run.profile_rows,
        pseudospec=[p[:5] for p in run.pseudo_points],
        curves=run.curves,
    )
    for r in run.results:
        print(r.line())
    failed = [r for r in run.results if not r.passed]
    if failed:
        print("failed checks: " + ", ".join(f"{r.number} ({r.name})" for r in failed), file=sys.stderr)
        return 1
    return 0


COMMANDS = {
    "spectrum": cmd_spectrum,
    "density-profile": cmd_density_profile,
    "pseudospec": cmd_pseudospec,
    "curves": cmd_curves,
    "theory-eval": cmd_theory_eval,
    "verify": cmd_verify,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits 2 with usage on unknown subcommands
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(asctime)s %(message)s")
    try:
        cfg = _config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        return COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except HagerlabError as exc:
        print(f"numerical failure in {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
