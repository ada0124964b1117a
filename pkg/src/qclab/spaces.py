"""Left-invariant sub-Riemannian model spaces on R^3.

Three models: the Heisenberg group, the roto-translation group (universal
cover of SE(2), theta unwrapped), and Euclidean R^3 as a Riemannian
reference.  Each space exposes its group law, horizontal frame, contact
form, left-translation differential, and flows of constant-control
horizontal curves.  The inner product is always the one making the frame
orthonormal, so the length of a control segment is duration * |u|.

Points are plain numpy arrays of shape (3,); all operations broadcast over
leading batch dimensions.  For the roto-translation group the third
coordinate is the rotation angle, never reduced mod 2*pi.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

HEISENBERG = "heisenberg"
ROTO_TRANSLATION = "rototranslation"
EUCLIDEAN3 = "euclidean3"

_ALIASES = {
    "heis": HEISENBERG,
    "h1": HEISENBERG,
    "heisenberg": HEISENBERG,
    "rt": ROTO_TRANSLATION,
    "roto": ROTO_TRANSLATION,
    "rototranslation": ROTO_TRANSLATION,
    "roto-translation": ROTO_TRANSLATION,
    "e3": EUCLIDEAN3,
    "euclidean": EUCLIDEAN3,
    "euclidean3": EUCLIDEAN3,
}


def as_point(p) -> np.ndarray:
    """Coerce to a float (..., 3) array and require finite coordinates."""
    arr = np.asarray(p, dtype=float)
    if arr.shape[-1] != 3:
        raise ValueError(f"point must have 3 coordinates, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("point has nonfinite coordinates")
    return arr


def _sinc(x):
    """sin(x)/x with the removable singularity filled; safe for complex x."""
    xs = np.where(x == 0, 1.0, x)
    return np.where(x == 0, np.ones_like(x), np.sin(xs) / xs)


@dataclass(frozen=True)
class ControlPath:
    """Piecewise-constant controls along the horizontal frame.

    controls has shape (n_segments, k) where k is the frame dimension;
    durations are nonnegative.  Length is sum(duration * |u|).
    """

    start: np.ndarray
    controls: np.ndarray
    durations: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "start", as_point(self.start))
        ctr = np.atleast_2d(np.asarray(self.controls, dtype=float))
        dur = np.atleast_1d(np.asarray(self.durations, dtype=float))
        if ctr.shape[0] != dur.shape[0]:
            raise ValueError("controls and durations disagree in segment count")
        if not np.all(np.isfinite(ctr)):
            raise ValueError("nonfinite controls")
        if np.any(dur < 0) or not np.all(np.isfinite(dur)):
            raise ValueError("durations must be finite and nonnegative")
        object.__setattr__(self, "controls", ctr)
        object.__setattr__(self, "durations", dur)

    @property
    def n_segments(self) -> int:
        return self.controls.shape[0]

    def length(self) -> float:
        if self.n_segments == 0:
            return 0.0
        return float(np.sum(self.durations * np.linalg.norm(self.controls, axis=1)))


class SpaceModel:
    """Common interface of the three model spaces."""

    space_id: str
    frame_dim: int

    # -- group structure -------------------------------------------------
    def identity(self) -> np.ndarray:
        return np.zeros(3)

    def mul(self, p, q) -> np.ndarray:
        raise NotImplementedError

    def inverse(self, p) -> np.ndarray:
        raise NotImplementedError

    # -- horizontal structure --------------------------------------------
    def frame(self, p) -> np.ndarray:
        """Frame field matrix of shape (..., 3, frame_dim) at p."""
        raise NotImplementedError

    def contact_form(self, p, v):
        """Defining one-form of the horizontal bundle evaluated on v at p."""
        raise NotImplementedError

    def measure_density(self, p):
        """Haar = Lebesgue in these coordinates for all three models."""
        p = np.asarray(p, dtype=float)
        return np.ones(p.shape[:-1])

    def left_translation_differential(self, g) -> np.ndarray:
        raise NotImplementedError

    def left_translation_jacobian(self, g) -> float:
        """Determinant of dL_g, simplified by hand; exactly 1 for all models.

        Heisenberg: the differential is unit lower-triangular.  Roto-
        translation: the determinant is cos^2 + sin^2.  Euclidean:
        translation.  A finite-difference cross-check lives in the tests.
        """
        as_point(g)
        return 1.0

    # -- flows -------------------------------------------------------------
    def constant_flow(self, p, u, tau):
        """Endpoint of the horizontal curve with constant control u, time tau.

        Closed-form group flows (straight segments in Heisenberg planar
        coordinates, circular arcs in roto-translation).  Accepts complex
        inputs so derivative checks can use complex-step differentiation.
        """
        raise NotImplementedError

    def coordinate_bounds(self, center, r):
        """Coordinate box guaranteed to contain the metric ball B(center, r)."""
        raise NotImplementedError

    def velocity(self, p, u):
        """Tangent vector frame(p) @ u, complex-safe."""
        raise NotImplementedError

    def local_distance_upper(self, p, q):
        """Constructive upper bound on d(p, q) for nearby points, vectorized.

        Computed on the left-invariant displacement p^{-1} q, so it respects
        the group structure (and the dilations of the Heisenberg group).
        Used by the graph builder to charge snapping mismatches.
        """
        raise NotImplementedError

    def distance_lower_bound(self, p, q):
        """Rigorous lower bound on d(p, q): coordinate projections that are
        1-Lipschitz for the CC metric (vectorized)."""
        raise NotImplementedError

    def __repr__(self):
        return f"<SpaceModel {self.space_id}>"


class Heisenberg(SpaceModel):
    space_id = HEISENBERG
    frame_dim = 2

    def mul(self, p, q):
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        x, y, t = p[..., 0], p[..., 1], p[..., 2]
        a, b, c = q[..., 0], q[..., 1], q[..., 2]
        return np.stack([x + a, y + b, t + c - 2.0 * y * a + 2.0 * x * b], axis=-1)

    def inverse(self, p):
        return -np.asarray(p, dtype=float)

    def frame(self, p):
        p = np.asarray(p)
        x, y = p[..., 0], p[..., 1]
        zero = np.zeros_like(x)
        one = np.ones_like(x)
        X = np.stack([one, zero, 2.0 * y], axis=-1)
        Y = np.stack([zero, one, -2.0 * x], axis=-1)
        return np.stack([X, Y], axis=-1)

    def contact_form(self, p, v):
        p = np.asarray(p)
        v = np.asarray(v)
        x, y = p[..., 0], p[..., 1]
        return v[..., 2] - 2.0 * y * v[..., 0] + 2.0 * x * v[..., 1]

    def left_translation_differential(self, g):
        g = as_point(g)
        d = np.eye(3)
        d[2, 0] = -2.0 * g[1]
        d[2, 1] = 2.0 * g[0]
        return d

    def velocity(self, p, u):
        x, y = p[..., 0], p[..., 1]
        u1, u2 = u[..., 0], u[..., 1]
        return np.stack([u1, u2, 2.0 * (y * u1 - x * u2)], axis=-1)

    def constant_flow(self, p, u, tau):
        p = np.asarray(p)
        u = np.asarray(u)
        x, y, t = p[..., 0], p[..., 1], p[..., 2]
        u1, u2 = u[..., 0], u[..., 1]
        # planar part is a straight segment, so the t-drift rate is constant
        return np.stack(
            [
                x + u1 * tau,
                y + u2 * tau,
                t + 2.0 * (y * u1 - x * u2) * tau,
            ],
            axis=-1,
        )

    def coordinate_bounds(self, center, r):
        c = as_point(center)
        dxy = 1.02 * r
        # |t-drift| <= 2 |c_xy| r plus the intrinsic vertical reach 4 r^2 / pi
        dt = 1.05 * (4.0 * r * r / math.pi) + 2.0 * math.hypot(c[0], c[1]) * r * 1.02
        d = np.array([dxy, dxy, dt + 1e-12])
        return c - d, c + d

    def local_distance_upper(self, p, q):
        g = self.mul(self.inverse(np.asarray(p, dtype=float)), np.asarray(q, dtype=float))
        planar = np.hypot(g[..., 0], g[..., 1])
        # straight planar segment followed by a vertical geodesic loop
        return planar + np.sqrt(math.pi * np.abs(g[..., 2]))

    def distance_lower_bound(self, p, q):
        # the planar projection is 1-Lipschitz onto the Euclidean plane
        g = self.mul(self.inverse(np.asarray(p, dtype=float)), np.asarray(q, dtype=float))
        return np.hypot(g[..., 0], g[..., 1])


class RotoTranslation(SpaceModel):
    space_id = ROTO_TRANSLATION
    frame_dim = 2

    def mul(self, p, q):
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        x, y, th = p[..., 0], p[..., 1], p[..., 2]
        a, b, ph = q[..., 0], q[..., 1], q[..., 2]
        c, s = np.cos(th), np.sin(th)
        return np.stack([x + c * a - s * b, y + s * a + c * b, th + ph], axis=-1)

    def inverse(self, p):
        p = np.asarray(p, dtype=float)
        x, y, th = p[..., 0], p[..., 1], p[..., 2]
        c, s = np.cos(th), np.sin(th)
        return np.stack([-(c * x + s * y), s * x - c * y, -th], axis=-1)

    def frame(self, p):
        p = np.asarray(p)
        th = p[..., 2]
        zero = np.zeros_like(th)
        one = np.ones_like(th)
        X = np.stack([np.cos(th), np.sin(th), zero], axis=-1)
        Y = np.stack([zero, zero, one], axis=-1)
        return np.stack([X, Y], axis=-1)

    def contact_form(self, p, v):
        p = np.asarray(p)
        v = np.asarray(v)
        th = p[..., 2]
        return np.sin(th) * v[..., 0] - np.cos(th) * v[..., 1]

    def left_translation_differential(self, g):
        g = as_point(g)
        c, s = math.cos(g[2]), math.sin(g[2])
        return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])

    def velocity(self, p, u):
        th = p[..., 2]
        u1, u2 = u[..., 0], u[..., 1]
        return np.stack([u1 * np.cos(th), u1 * np.sin(th), u2], axis=-1)

    def constant_flow(self, p, u, tau):
        p = np.asarray(p)
        u = np.asarray(u)
        x, y, th = p[..., 0], p[..., 1], p[..., 2]
        u1, u2 = u[..., 0], u[..., 1]
        # circular arc: integrate cos/sin of a linearly varying angle
        half = 0.5 * u2 * tau
        chord = u1 * tau * _sinc(half)
        return np.stack(
            [
                x + chord * np.cos(th + half),
                y + chord * np.sin(th + half),
                th + u2 * tau,
            ],
            axis=-1,
        )

    def coordinate_bounds(self, center, r):
        c = as_point(center)
        # in the frame at the center the sideways reach is min(r, r^2/2)
        side = min(r, 0.5 * r * r)
        co, si = abs(math.cos(c[2])), abs(math.sin(c[2]))
        dx = 1.02 * (co * r + si * side) + 1e-12
        dy = 1.02 * (si * r + co * side) + 1e-12
        dth = 1.02 * r
        d = np.array([dx, dy, dth])
        return c - d, c + d

    def local_distance_upper(self, p, q):
        g = self.mul(self.inverse(np.asarray(p, dtype=float)), np.asarray(q, dtype=float))
        # g[0] is along the heading, g[1] transverse; a transverse step of
        # size b costs ~ 2 sqrt(pi b) at small scale (tangent-cone rate)
        return np.abs(g[..., 0]) + np.abs(g[..., 2]) + 2.0 * np.sqrt(math.pi * np.abs(g[..., 1]))

    def distance_lower_bound(self, p, q):
        # planar speed and angular speed are both bounded by the control norm
        g = self.mul(self.inverse(np.asarray(p, dtype=float)), np.asarray(q, dtype=float))
        return np.maximum(np.hypot(g[..., 0], g[..., 1]), np.abs(g[..., 2]))


class Euclidean3(SpaceModel):
    """R^3 with vector addition and the full orthonormal coordinate frame."""

    space_id = EUCLIDEAN3
    frame_dim = 3

    def mul(self, p, q):
        return np.asarray(p, dtype=float) + np.asarray(q, dtype=float)

    def inverse(self, p):
        return -np.asarray(p, dtype=float)

    def frame(self, p):
        p = np.asarray(p)
        shape = p.shape[:-1] + (3, 3)
        return np.broadcast_to(np.eye(3), shape).copy()

    def contact_form(self, p, v):
        # no contact structure; the defining form is identically zero
        p = np.asarray(p)
        return np.zeros(p.shape[:-1])

    def left_translation_differential(self, g):
        as_point(g)
        return np.eye(3)

    def velocity(self, p, u):
        return np.asarray(u) + np.zeros_like(np.asarray(p))

    def constant_flow(self, p, u, tau):
        p = np.asarray(p)
        u = np.asarray(u)
        return p + u * tau

    def coordinate_bounds(self, center, r):
        c = as_point(center)
        d = np.full(3, 1.02 * r + 1e-12)
        return c - d, c + d

    def local_distance_upper(self, p, q):
        diff = np.asarray(q, dtype=float) - np.asarray(p, dtype=float)
        return np.linalg.norm(diff, axis=-1)

    def distance_lower_bound(self, p, q):
        return self.local_distance_upper(p, q)


_SPACES = {
    HEISENBERG: Heisenberg(),
    ROTO_TRANSLATION: RotoTranslation(),
    EUCLIDEAN3: Euclidean3(),
}


def get_space(space_id: str) -> SpaceModel:
    key = _ALIASES.get(str(space_id).strip().lower())
    if key is None:
        raise ValueError(
            f"unknown space {space_id!r}; expected one of "
            f"{sorted(set(_ALIASES.values()))}"
        )
    return _SPACES[key]


# Thin functional aliases mirroring the operation names used by the CLI.
def group_mul(space: SpaceModel, p, q) -> np.ndarray:
    return space.mul(as_point(p), as_point(q))


def group_inverse(space: SpaceModel, p) -> np.ndarray:
    return space.inverse(as_point(p))


def frame_eval(space: SpaceModel, p):
    """Return the frame vectors (X(p), Y(p)[, Z(p)]) as rows."""
    mat = space.frame(as_point(p))
    return tuple(mat[..., k] for k in range(space.frame_dim))


def contact_form_eval(space: SpaceModel, p, v) -> float:
    return float(space.contact_form(as_point(p), np.asarray(v, dtype=float)))


def left_translation_jacobian(space: SpaceModel, g) -> float:
    return space.left_translation_jacobian(g)


def bracket_numeric(space: SpaceModel, p, h: float) -> np.ndarray:
    """Finite-difference Lie bracket [X, Y](p) via the flow commutator.

    Flows p along X, Y, -X, -Y for time h each and divides the displacement
    by h^2; the error is O(h).
    """
    if not (h > 0):
        raise ValueError("h must be positive")
    p = as_point(p)
    k = space.frame_dim
    e1 = np.zeros(k)
    e1[0] = 1.0
    e2 = np.zeros(k)
    e2[1] = 1.0
    q = space.constant_flow(p, e1, h)
    q = space.constant_flow(q, e2, h)
    q = space.constant_flow(q, -e1, h)
    q = space.constant_flow(q, -e2, h)
    return (q - p) / (h * h)


def horizontal_flow(space: SpaceModel, path: ControlPath, dt: float) -> np.ndarray:
    """Integrate the control path with classical RK4 at fixed step <= dt.

    Every segment gets at least 16 steps.  Returns the sampled trajectory
    including the start point.
    """
    if not (dt > 0):
        raise ValueError("dt must be positive")
    if not np.all(np.isfinite(path.controls)):
        raise ValueError("nonfinite controls")
    samples = [path.start.copy()]
    pt = path.start.astype(float)
    for u, dur in zip(path.controls, path.durations):
        if dur == 0.0:
            continue
        n_steps = max(16, int(math.ceil(dur / dt)))
        step = dur / n_steps

        def fld(x):
            return space.velocity(x, u)

        for _ in range(n_steps):
            k1 = fld(pt)
            k2 = fld(pt + 0.5 * step * k1)
            k3 = fld(pt + 0.5 * step * k2)
            k4 = fld(pt + step * k3)
            pt = pt + (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            samples.append(pt.copy())
    return np.array(samples)
