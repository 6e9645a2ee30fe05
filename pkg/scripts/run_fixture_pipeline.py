#!/usr/bin/env python3
"""Run the full pipeline on the canned fixtures and write all artifacts.

Usage:
    python scripts/run_fixture_pipeline.py [--out OUT] [--nsamples N]
"""
import argparse
import sys
from pathlib import Path

from hwave.pipeline import PipelineConfig, run_pipeline


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=Path("out"))
    parser.add_argument("--nsamples", type=int, default=10000)
    parser.add_argument("--seed", type=int, default=1)
    args = parser.parse_args()

    failed = False
    for name in ("FIX-A", "FIX-B"):
        config = PipelineConfig(space=name, delta=0.25, seed=args.seed,
                                nsamples=args.nsamples,
                                out=str(args.out / name))
        result = run_pipeline(config)
        n_pass = sum(c.passed for c in result.checks)
        print(f"{name}: {n_pass}/{len(result.checks)} checks passed "
              f"-> {args.out / name}")
        if not result.ok:
            failed = True
            for c in result.checks:
                if not c.passed:
                    print("  " + c.line())
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
