#!/usr/bin/env python3
"""Run the four desk-scale convergence studies and print the fitted slopes.

Produces one output directory per study (CSV table, SVG log-log plot, JSON
summary) under the chosen root.  Expect a few minutes of runtime for the
full set; pass --quick for a coarse smoke-test version.
"""

import argparse
import json
from pathlib import Path

from cutslab.cli import run_convergence


def study_config(q, sweep, mu, quick):
    if sweep == "k":
        if q == 0:
            resolutions = [8, 16, 32, 64] if quick else [8, 16, 32, 64, 128, 256, 512]
            window = None
        else:
            resolutions = [4, 8, 16, 32] if quick else [4, 8, 16, 32, 64, 128]
            window = None if quick else [1, 3]
        disc = {"n0": 64 if quick else 512, "nG": 16 if quick else 128, "q": q}
    else:
        resolutions = [8, 16, 32, 64] if quick else [8, 16, 32, 64, 128, 256]
        if q == 0:
            disc = {"N": 256 if quick else 2048, "q": 0}
            window = None if quick else [1, 5]
        else:
            disc = {"N": 64 if quick else 256, "q": 1}
            window = None
    study = {"sweep": sweep, "resolutions": resolutions, "reference_slope": 0.5 if (q, sweep) == (0, "k") else (1.5 if (q, sweep) == (1, "k") else 1.0)}
    if window:
        study["fit_window"] = window
    return {
        "problem": {"manufactured": True, "T": 1.0},
        "overlap": {
            "length": 0.25,
            "initial_left": 0.125,
            "velocity": {"mode": "constant", "value": mu},
        },
        "discretization": disc,
        "study": study,
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--output-root", type=Path, default=Path("studies"))
    parser.add_argument("--velocities", type=float, nargs="+", default=[0.6, 0.0, 0.2])
    parser.add_argument("--quick", action="store_true", help="coarse, fast version")
    args = parser.parse_args()

    for q in (0, 1):
        for sweep in ("k", "h"):
            for mu in args.velocities:
                name = f"dg{q}_{sweep}_mu{mu:g}"
                out = args.output_root / name
                cfg = study_config(q, sweep, mu, args.quick)
                print(f"== {name} ==")
                rc = run_convergence(cfg, out, quiet=False, workers=1)
                if rc != 0:
                    print(f"  study {name} reported failures (exit {rc})")
                summary = json.loads((out / "summary.json").read_text())
                print(f"  slope {summary['slope']:.4f} -> {out}")


if __name__ == "__main__":
    main()
