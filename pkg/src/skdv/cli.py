"""Command line entry point: ``skdv simulate|ensemble|decompose|spectrum``."""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .grid import Grid
from .harness import (ConfigError, OutputError, load_config, simulate_ensemble, summarize,
                      write_outputs)
from .modulation import DecompositionError, decompose
from .spectral import build_weighted_operator, eigenvalues, near_zero, spectral_gap, write_eigenvalues


def _u64(text):
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def cmd_simulate(args):
    cfg = load_config(args.config, args.out)
    if args.seed is not None:
        cfg.seed = args.seed
        cfg.raw["run"]["seed"] = args.seed
    cfg.n_trajectories = 1
    cfg.raw["run"]["n_trajectories"] = 1
    records = simulate_ensemble(cfg)
    stats = summarize(records, cfg)
    write_outputs(stats, records, args.out, cfg)
    rec = records[0]
    print(f"t_end={rec.times[-1]:g} c={rec.c[-1]:.10g} xi={rec.xi[-1]:.10g} "
          f"failed={rec.failed} -> {args.out}")


def cmd_ensemble(args):
    cfg = load_config(args.config, args.out)
    if args.workers is not None:
        cfg.workers = args.workers
    records = simulate_ensemble(cfg)
    stats = summarize(records, cfg)
    write_outputs(stats, records, args.out, cfg)
    print(json.dumps(stats.summary(), indent=2))


def _read_snapshot(path):
    data = np.loadtxt(path, delimiter=",", ndmin=2, comments="#",
                      skiprows=1 if _has_header(path) else 0)
    if data.shape[1] == 1:
        return None, data[:, 0]
    return data[:, 0], data[:, 1]


def _has_header(path):
    with open(path) as fh:
        first = fh.readline()
    try:
        [float(t) for t in first.split(",")]
        return False
    except ValueError:
        return True


def cmd_decompose(args):
    x, u = _read_snapshot(args.snapshot)
    if x is not None:
        dx = x[1] - x[0]
        grid = Grid(dx * x.size, x.size, float(x[0]))
    else:
        grid = Grid(args.length, u.size)
    d = decompose(u, (args.c_guess, args.xi_guess), grid)
    print(json.dumps({"c": d.c, "xi": d.xi, "residuals": list(d.residuals),
                      "iterations": d.iterations,
                      "l2_v": float(np.sqrt(np.sum(d.v**2) * grid.dx))}, indent=2))


def cmd_spectrum(args):
    grid = Grid(args.length, args.n)
    op = build_weighted_operator(args.c, args.w, grid)
    vals = eigenvalues(op, filter_localized=args.localized_only)
    write_eigenvalues(args.out, vals)
    gap = spectral_gap(op)
    print(f"{vals.size} eigenvalues -> {args.out}; near zero: {near_zero(op).size}; "
          f"gap {gap:.6f} (free edge {args.w * (args.c - args.w**2):.6f})")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="skdv", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="one trajectory with modulation diagnostics")
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=_u64)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("ensemble", help="Monte Carlo exit-time statistics")
    e.add_argument("--config", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--workers", type=int)
    e.set_defaults(func=cmd_ensemble)

    d = sub.add_parser("decompose", help="fit a modulated soliton to a snapshot")
    d.add_argument("--snapshot", required=True, help="CSV with columns x,u (or u only)")
    d.add_argument("--c-guess", type=float, required=True)
    d.add_argument("--xi-guess", type=float, required=True)
    d.add_argument("--length", type=float, default=80.0, help="window length when x is absent")
    d.set_defaults(func=cmd_decompose)

    sp = sub.add_parser("spectrum", help="eigenvalues of the weighted linearization")
    sp.add_argument("--c", type=float, required=True)
    sp.add_argument("--w", type=float, required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--length", type=float, default=80.0)
    sp.add_argument("--out", required=True)
    sp.add_argument("--localized-only", action="store_true",
                    help="drop eigenvectors spread over the window")
    sp.set_defaults(func=cmd_spectrum)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (ConfigError, OutputError, DecompositionError, ValueError, OSError) as exc:
        print(f"skdv {args.command}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
