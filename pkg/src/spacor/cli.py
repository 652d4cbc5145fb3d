"""Command line entry point: ``spacor <experiment> [options]``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import ConfigError, SystemConfig, load_config
from .harness import KINDS, ExperimentSpec, run
from .radar import RecoveryError


def parse_sweep(text: str) -> tuple[float, ...]:
    """``"a,b,c"`` or an inclusive range ``"start:stop:step"``."""
    text = text.strip()
    try:
        if ":" in text:
            start, stop, step = (float(x) for x in text.split(":"))
            if step <= 0:
                raise ValueError("step must be positive")
            n = int(np.floor((stop - start) / step + 1e-9)) + 1
            return tuple(float(start + i * step) for i in range(n))
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad sweep {text!r}: {exc}") from None


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 1 << 64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spacor", description="Spatial-modulation DFRC experiments.")
    sub = p.add_subparsers(dest="kind", required=True)
    for kind in KINDS:
        s = sub.add_parser(kind)
        s.add_argument("--config", type=Path, help="key = value configuration file")
        s.add_argument("--seed", type=_u64, help="master seed (default 0)")
        s.add_argument("--trials", type=int, help="Monte Carlo trials (symbols for ber/mi)")
        s.add_argument("--out", type=Path, help="output directory (default ./results/<kind>)")
        s.add_argument("--plot", action="store_true", help="also write PNG figures")
        s.add_argument("--sweep", type=parse_sweep, help="sweep values, 'a,b,c' or 'start:stop:step'")
        s.add_argument("--workers", type=int, help="worker processes")
        if kind in ("resolve", "hitrate"):
            s.add_argument("--schemes", help="comma separated allocation schemes")
        if kind == "resolve":
            s.add_argument("--scene", type=Path, help="scene CSV (default: bundled scenes)")
        if kind in ("ber", "mi"):
            s.add_argument("--fading", choices=("rayleigh", "awgn"))
    return p


def spec_from_args(args: argparse.Namespace) -> ExperimentSpec:
    cfg, exp = (load_config(args.config) if args.config else (SystemConfig(), {}))
    options: dict = {k: v for k, v in exp.items() if k not in ("seed", "trials", "sweep", "out")}
    for key in ("scene", "schemes", "workers", "fading"):
        val = getattr(args, key, None)
        if val is not None:
            options[key] = str(val) if isinstance(val, Path) else val
    seed = args.seed if args.seed is not None else int(exp.get("seed", 0))
    trials = args.trials if args.trials is not None else int(exp.get("trials", 0))
    sweep = args.sweep if args.sweep is not None else (parse_sweep(exp["sweep"]) if "sweep" in exp else ())
    out = args.out or Path(exp.get("out", Path("results") / args.kind))
    return ExperimentSpec(args.kind, cfg, sweep, trials, seed, out, options)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = spec_from_args(args)
        table = run(spec)
        if args.plot:
            from .plotting import plot_outputs

            for path in plot_outputs(spec.kind, spec.out):
                print(f"wrote {path}")
    except (ConfigError, ValueError, FileNotFoundError, RecoveryError, RuntimeError) as exc:
        print(f"spacor {args.kind}: error: {exc}", file=sys.stderr)
        return 2
    print(f"{spec.kind}: {len(table.rows)} rows -> {spec.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
