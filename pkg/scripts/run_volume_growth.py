#!/usr/bin/env python3
"""Ball-volume growth fits for all three model spaces.

Usage: python scripts/run_volume_growth.py [outdir]
"""
import sys

from qclab.cli import RunConfig, dispatch

WINDOWS = {
    "heisenberg": (0.5, 0.7071, 1.0, 1.4142, 2.0, 2.8284, 4.0),
    "rototranslation": (8.0, 11.31, 16.0, 22.63, 32.0),
    "euclidean3": (0.5, 1.0, 2.0, 4.0),
}


def main():
    out = sys.argv[1] if len(sys.argv) > 1 else "outputs"
    for space, radii in WINDOWS.items():
        record = dispatch(RunConfig(command="growth-fit", space=space, radii=radii,
                                    seed=0, out_dir=out, fmt="csv"))
        fit = record.payload["fit"]
        print(f"{space:16s} exponent {fit['exponent']:.3f} over r in "
              f"[{radii[0]}, {radii[-1]}]")


if __name__ == "__main__":
    main()
