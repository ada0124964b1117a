"""Planar sharpness examples: conformal and quasiconformal maps between
unbounded plane domains, empirical dilatation estimates, and the image-shape
and area-growth fits for the radial stretch of a strip.

Three example maps:

* ``exp_half_strip``: z -> e^z from the half-strip {x >= 0, 0 <= y <= pi}
  onto the closed upper half-plane outside the unit disk.
* ``exp_strip``: z -> e^z from the full strip {0 <= y <= pi} onto the
  punctured closed upper half-plane (not proper: the puncture is the
  missing limit of far-left points).
* ``radial_stretch``: z -> z |z|^((lam-1)/(2-lam)) on the strip {|y| <= 1},
  quasiconformal for lam in (1, 2).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .volume import GrowthFit, fit_loglog

_EDGE_TOL = 1e-12


@dataclass(frozen=True)
class PlanarDomain:
    tag: str
    contains: Callable[[float, float], bool]


def _half_strip(x, y):
    return x >= -_EDGE_TOL and -_EDGE_TOL <= y <= math.pi + _EDGE_TOL


def _strip_pi(x, y):
    return -_EDGE_TOL <= y <= math.pi + _EDGE_TOL


def _upper_outside_disk(x, y):
    return y >= -_EDGE_TOL and x * x + y * y >= 1.0 - 1e-9


def _punctured_half_plane(x, y):
    return y >= -_EDGE_TOL and (abs(x) > 0 or abs(y) > 0)


def _stretch_strip(x, y):
    return abs(y) <= 1.0 + _EDGE_TOL


def stretch_exponent(lam: float) -> float:
    if not (1.0 < lam < 2.0):
        raise ValueError("lambda must lie in (1, 2)")
    return (lam - 1.0) / (2.0 - lam)


def radial_stretch(z: complex, lam: float) -> complex:
    a = stretch_exponent(lam)
    r = abs(z)
    if r == 0.0:
        return 0.0 + 0.0j
    return z * r ** a


def radial_stretch_inverse(w: complex, lam: float) -> complex:
    r = abs(w)
    if r == 0.0:
        return 0.0 + 0.0j
    # |w| = |z|^(1/(2-lam)) and the argument is unchanged
    return (w / r) * r ** (2.0 - lam)


def _stretched_strip_contains(lam: float):
    def contains(x, y):
        z = radial_stretch_inverse(complex(x, y), lam)
        return abs(z.imag) <= 1.0 + 1e-9

    return contains


_SOURCES = {
    "exp_half_strip": PlanarDomain("half-strip", _half_strip),
    "exp_strip": PlanarDomain("strip", _strip_pi),
    "radial_stretch": PlanarDomain("stretched strip", _stretch_strip),
}


def target_domain(example: str, lam: float | None = None) -> PlanarDomain:
    if example == "exp_half_strip":
        return PlanarDomain("half-plane minus disk", _upper_outside_disk)
    if example == "exp_strip":
        return PlanarDomain("punctured half-plane", _punctured_half_plane)
    if example == "radial_stretch":
        if lam is None:
            raise ValueError("radial stretch needs lambda")
        return PlanarDomain("stretched strip", _stretched_strip_contains(lam))
    raise ValueError(f"unknown example {example!r}")


def source_domain(example: str) -> PlanarDomain:
    if example not in _SOURCES:
        raise ValueError(f"unknown example {example!r}")
    return _SOURCES[example]


def planar_map(example: str, z, lam: float | None = None):
    """Apply the example map; validates source membership and checks the
    image against the target domain."""
    x, y = float(z[0]), float(z[1])
    src = source_domain(example)
    if not src.contains(x, y):
        raise ValueError(f"point {(x, y)} outside the {src.tag} source domain")
    if example in ("exp_half_strip", "exp_strip"):
        w = complex(math.exp(x) * math.cos(y), math.exp(x) * math.sin(y))
    else:
        w = radial_stretch(complex(x, y), lam)
    if not target_domain(example, lam).contains(w.real, w.imag):
        raise AssertionError(f"image {(w.real, w.imag)} escaped the target domain")
    return np.array([w.real, w.imag])


@dataclass
class DilatationEstimate:
    point: np.ndarray
    radii: np.ndarray
    H_estimates: np.ndarray
    sup_estimate: float


def dilatation_estimate(example: str, z, radii, samples_per_circle: int = 256,
                        lam: float | None = None) -> DilatationEstimate:
    """Finite-radius circle distortion max/min ratios.

    Definition-style quotient at finitely many radii; the reported sup is
    the maximum over the two smallest radii (the limsup proxy).
    """
    z = np.asarray(z, dtype=float)
    radii = np.sort(np.asarray(radii, dtype=float))[::-1]
    src = source_domain(example)
    fz = planar_map(example, z, lam)
    ests = []
    for r in radii:
        angles = np.linspace(0.0, 2.0 * math.pi, samples_per_circle, endpoint=False)
        pts = z[None, :] + r * np.stack([np.cos(angles), np.sin(angles)], axis=-1)
        ok = [src.contains(px, py) for px, py in pts]
        if not all(ok):
            raise ValueError(f"circle of radius {r} leaves the source domain")
        imgs = np.array([planar_map(example, p, lam) for p in pts])
        dist = np.hypot(imgs[:, 0] - fz[0], imgs[:, 1] - fz[1])
        ests.append(float(dist.max() / dist.min()))
    ests = np.array(ests)
    sup = float(ests[-2:].max()) if ests.size >= 2 else float(ests[-1])
    return DilatationEstimate(point=z, radii=radii, H_estimates=ests, sup_estimate=sup)


def shape_inclusion_fit(lam: float, boundary_samples: int = 10000,
                        x_range: float = 1e4) -> float:
    """Least a such that the stretched-strip image lies in the square
    [-a, a]^2 union {|y| <= a |x|^(lam-1)}, by bisection to 1e-3.

    Boundary samples are log-spaced along both strip edges.
    """
    stretch_exponent(lam)
    half = boundary_samples // 2
    xs = np.concatenate([
        np.linspace(0.0, 2.0, half // 2),
        np.geomspace(2.0, x_range, half - half // 2),
    ])
    xs = np.concatenate([xs, -xs])
    pts = []
    for sign in (1.0, -1.0):
        for x in xs:
            pts.append(radial_stretch(complex(x, sign * 1.0), lam))
    X = np.abs(np.array([w.real for w in pts]))
    Y = np.abs(np.array([w.imag for w in pts]))

    def passes(a):
        in_square = (X <= a) & (Y <= a)
        in_horn = Y <= a * np.maximum(X, 1e-300) ** (lam - 1.0)
        return bool(np.all(in_square | in_horn))

    hi = 1.0
    while not passes(hi):
        hi *= 2.0
        if hi > 1e12:
            raise RuntimeError("no finite envelope constant found")
    lo = 0.0
    while hi - lo > 1e-3:
        mid = 0.5 * (lo + hi)
        if passes(mid):
            hi = mid
        else:
            lo = mid
    return hi


def region_area(contains: Callable[[float, float], bool], r: float,
                depth: int = 12) -> float:
    """Area of {contains} inside the square [-r, r]^2 by adaptive midpoint
    quadrature: uniform cells refine only where corner/center samples
    disagree, down to ``depth`` dyadic levels."""

    def probe(x0, y0, size):
        pts = [(x0, y0), (x0 + size, y0), (x0, y0 + size), (x0 + size, y0 + size),
               (x0 + 0.5 * size, y0 + 0.5 * size)]
        vals = [contains(px, py) for px, py in pts]
        return all(vals), not any(vals)

    base = 16
    cell = 2.0 * r / base
    area = 0.0
    stack = []
    for i in range(base):
        for j in range(base):
            stack.append((-r + i * cell, -r + j * cell, cell, depth))
    while stack:
        x0, y0, size, lvl = stack.pop()
        full, empty = probe(x0, y0, size)
        if empty:
            continue
        if full or lvl == 0:
            if full:
                area += size * size
            else:
                # midpoint rule on the unresolved cell
                if contains(x0 + 0.5 * size, y0 + 0.5 * size):
                    area += size * size
            continue
        halfs = 0.5 * size
        stack.extend([
            (x0, y0, halfs, lvl - 1),
            (x0 + halfs, y0, halfs, lvl - 1),
            (x0, y0 + halfs, halfs, lvl - 1),
            (x0 + halfs, y0 + halfs, halfs, lvl - 1),
        ])
    return area


def stretched_strip_growth(lam: float, radii, depth: int = 12) -> GrowthFit:
    """Area of (stretched strip) intersect B(0, r) against r, log-log fit.

    The image shape forces the exponent lam for large r.
    """
    stretch_exponent(lam)
    contains = _stretched_strip_contains(lam)
    radii = np.sort(np.asarray(radii, dtype=float))
    areas = []
    for r in radii:
        disk = lambda x, y: contains(x, y) and x * x + y * y <= r * r
        areas.append(region_area(disk, r, depth=depth))
    return fit_loglog(radii, np.array(areas))
