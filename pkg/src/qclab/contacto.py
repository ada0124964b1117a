"""The explicit global contactomorphism from the roto-translation group to
the Heisenberg group.

    f(x, y, th) = (-x cos th - y sin th,
                   th,
                   4x sin th - 4y cos th - 2x th cos th - 2y th sin th)

f pulls the Heisenberg contact form back to four times the roto-translation
one, preserves the angle coordinate, and has constant Jacobian determinant
-4, so it is a global diffeomorphism mapping horizontal bundles to
horizontal bundles.  The Jacobian here is hand-differentiated; a finite-
difference cross-check lives in the tests.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import geodesics
from .spaces import as_point, get_space


@dataclass
class ContactMapResult:
    image: np.ndarray
    jacobian: np.ndarray


def rt_to_heis(p) -> np.ndarray:
    """Vectorized map; accepts (..., 3) arrays."""
    p = np.asarray(p, dtype=float)
    x, y, th = p[..., 0], p[..., 1], p[..., 2]
    c, s = np.cos(th), np.sin(th)
    return np.stack(
        [
            -x * c - y * s,
            th,
            4.0 * x * s - 4.0 * y * c - 2.0 * x * th * c - 2.0 * y * th * s,
        ],
        axis=-1,
    )


def jacobian(p) -> np.ndarray:
    """Analytic differential of the map at p, shape (..., 3, 3)."""
    p = np.asarray(p, dtype=float)
    x, y, th = p[..., 0], p[..., 1], p[..., 2]
    c, s = np.cos(th), np.sin(th)
    zero = np.zeros_like(th)
    one = np.ones_like(th)
    row_u = np.stack([-c, -s, x * s - y * c], axis=-1)
    row_v = np.stack([zero, zero, one], axis=-1)
    row_w = np.stack(
        [
            4.0 * s - 2.0 * th * c,
            -4.0 * c - 2.0 * th * s,
            2.0 * x * c + 2.0 * y * s + 2.0 * x * th * s - 2.0 * y * th * c,
        ],
        axis=-1,
    )
    return np.stack([row_u, row_v, row_w], axis=-2)


def jacobian_fd(p, h: float = 1e-5) -> np.ndarray:
    """Central-difference differential, the independent cross-check."""
    p = as_point(p)
    cols = []
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        cols.append((rt_to_heis(p + e) - rt_to_heis(p - e)) / (2.0 * h))
    return np.stack(cols, axis=-1)


def contacto_map(p) -> ContactMapResult:
    p = as_point(p)
    return ContactMapResult(image=rt_to_heis(p), jacobian=jacobian(p))


def contacto_inverse(q, tol: float = 1e-9) -> np.ndarray:
    """Invert the map: the angle passes through unchanged and (x, y) solve a
    2x2 linear system with determinant identically 4."""
    q = as_point(q)
    u, th, w = q[0], q[1], q[2]
    c, s = math.cos(th), math.sin(th)
    a = np.array([[-c, -s], [4.0 * s - 2.0 * th * c, -4.0 * c - 2.0 * th * s]])
    det = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
    if abs(det) < tol:
        raise ValueError(f"inverse system is singular (det={det}); bad input {q}")
    sol = np.linalg.solve(a, np.array([u, w]))
    return np.array([sol[0], sol[1], th])


def pullback_check(samples: int = 10000, tol: float = 1e-10, seed: int = 0,
                   use_fd: bool = False) -> float:
    """Max relative residual of (pullback of the Heisenberg form) - 4 *
    (roto-translation form) over random (point, vector) pairs."""
    if samples < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(seed)
    rt = get_space("rototranslation")
    heis = get_space("heisenberg")
    pts = rng.uniform(-3.0, 3.0, size=(samples, 3))
    vecs = rng.uniform(-1.0, 1.0, size=(samples, 3))
    if use_fd:
        jac = np.stack([jacobian_fd(p) for p in pts])
    else:
        jac = jacobian(pts)
    pushed = np.einsum("nij,nj->ni", jac, vecs)
    beta = heis.contact_form(rt_to_heis(pts), pushed)
    alpha = rt.contact_form(pts, vecs)
    resid = np.abs(beta - 4.0 * alpha) / (1.0 + np.abs(4.0 * alpha))
    return float(np.max(resid))


def pushforward_horizontality_check(samples: int = 10000, seed: int = 0) -> float:
    """Max contact-form value on the pushforward of the horizontal frame."""
    rng = np.random.default_rng(seed)
    rt = get_space("rototranslation")
    heis = get_space("heisenberg")
    pts = rng.uniform(-3.0, 3.0, size=(samples, 3))
    jac = jacobian(pts)
    frame = rt.frame(pts)
    defect = 0.0
    for k in range(2):
        pushed = np.einsum("nij,nj->ni", jac, frame[..., k])
        vals = heis.contact_form(rt_to_heis(pts), pushed)
        defect = max(defect, float(np.max(np.abs(vals))))
    return defect


def local_bilip_estimate(ball_radius: float, pairs: int = 40, *,
                         h: float | None = None, seed: int = 0):
    """Empirical two-sided distortion of the map on a small metric ball.

    Samples pairs in the CC ball of the roto-translation group, measures
    image distances in the Heisenberg group via flow graphs, and returns
    (min ratio, max ratio) of d_H(f p, f q) / d_RT(p, q).
    """
    if ball_radius > 2.0:
        raise ValueError("ball_radius is meant to be desk scale (<= 2)")
    rng = np.random.default_rng(seed)
    rt = get_space("rototranslation")
    heis = get_space("heisenberg")
    if h is None:
        h = ball_radius / 14.0
    g_rt = geodesics.build_flow_graph(rt, [0.0, 0.0, 0.0], ball_radius, h,
                                      stencil_level=2)
    d0 = geodesics.graph_distance(g_rt, g_rt.basepoint)
    inside = np.nonzero((d0 <= ball_radius) & (d0 > 0.25 * ball_radius))[0]
    picks = rng.choice(inside, size=min(pairs, inside.size), replace=False)
    sources = np.concatenate([[g_rt.basepoint], picks[: max(2, pairs // 8)]])

    images = rt_to_heis(g_rt.nodes[np.concatenate([picks, sources])])
    margin = 3.0 * ball_radius
    los, his = [], []
    for img in images:
        b_lo, b_hi = heis.coordinate_bounds(img, margin)
        los.append(b_lo)
        his.append(b_hi)
    lo = np.min(np.array(los), axis=0)
    hi = np.max(np.array(his), axis=0)
    g_h = geodesics.build_flow_graph(
        heis, images[-1], margin, max(h, ball_radius / 10.0),
        bounds=(lo, hi), stencil_level=2,
    )
    ratios = []
    for src in sources:
        d_rt = geodesics.graph_distance(g_rt, int(src))
        src_h = int(g_h.nearest_node(rt_to_heis(g_rt.nodes[int(src)])))
        d_h = geodesics.graph_distance(g_h, src_h)
        for tgt in picks:
            if int(tgt) == int(src) or not np.isfinite(d_rt[int(tgt)]) or d_rt[int(tgt)] <= 0:
                continue
            tgt_h = int(g_h.nearest_node(rt_to_heis(g_rt.nodes[int(tgt)])))
            if not np.isfinite(d_h[tgt_h]) or d_h[tgt_h] <= 0:
                continue
            ratios.append(d_h[tgt_h] / d_rt[int(tgt)])
    ratios = np.array(ratios)
    if ratios.size == 0:
        raise RuntimeError("no valid pairs sampled")
    return float(ratios.min()), float(ratios.max())
