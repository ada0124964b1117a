#!/usr/bin/env python3
"""Dilatation, envelope, and area-growth numbers for the planar examples.

Usage: python scripts/run_planar_examples.py [outdir]
"""
import sys

from qclab.cli import RunConfig, dispatch


def main():
    out = sys.argv[1] if len(sys.argv) > 1 else "outputs"
    rec = dispatch(RunConfig(command="planar", example="exp_strip",
                             point=(0.0, 1.0), seed=0, out_dir=out))
    print("exp strip dilatation:", rec.payload["dilatation"]["H_estimates"])
    rec = dispatch(RunConfig(command="planar", example="radial_stretch",
                             lam=1.5, point=(1.0, 0.0), seed=0, out_dir=out))
    print("stretch dilatation:", rec.payload["dilatation"]["H_estimates"])
    print("envelope constant a:", rec.payload["shape_fit_a"])
    print("area growth exponent:", rec.payload["growth"]["exponent"])


if __name__ == "__main__":
    main()
