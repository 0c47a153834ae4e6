"""Shared argument handling for the experiment scripts."""

from __future__ import annotations

import argparse
from pathlib import Path


def parser(description: str, *, B: int, R: int) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--out", type=Path, default=Path("results"), help="output directory")
    p.add_argument("--seed", type=int, default=2024)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--reps", type=int, default=B, help="calibration replicates B")
    p.add_argument("--power-reps", type=int, default=R, help="replicates per separation R")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--quick", action="store_true", help="tiny budgets for a smoke run")
    return p


def budgets(args) -> tuple[int, int]:
    return (300, 200) if args.quick else (args.reps, args.power_reps)
