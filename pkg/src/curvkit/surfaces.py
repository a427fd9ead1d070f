"""
Analytic surfaces with exact normals and shape operators.

Every surface samples points uniformly with respect to area and is
oriented by its outward normal (upward for the plane and the paraboloid).
Curvature signs follow ``S = -dg``: the outward unit sphere has
``K = 1`` and ``H = -1``.

Each surface provides three independent views of its geometry, which the
tests cross-check against each other:

* ``normal_field``: the unit normal, extended smoothly off the surface;
* ``weingarten``: ``dg`` as a symmetric 3x3 tangential matrix;
* ``principal``: principal curvatures from closed-form expressions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cloud import OrientedPointCloud
from .errors import InvalidInputError
from .geometry import TangentFrame

_REJECTION_BATCH = 4096


def _unit(v):
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def _outer(u, v):
    return np.einsum("mi,mj->mij", u, v)


def _tangential(p_normals, M):
    """``P M P`` with ``P = I - n n^T`` per point."""
    P = np.eye(3) - _outer(p_normals, p_normals)
    return P @ M @ P


def _rejection(rng, n, propose, accept_prob):
    out = []
    have = 0
    while have < n:
        cand = propose(_REJECTION_BATCH)
        keep = rng.random(len(cand)) < accept_prob(cand)
        cand = cand[keep]
        out.append(cand)
        have += len(cand)
    return np.concatenate(out)[:n]


class GroundTruthSurface:
    kind = "surface"

    def sample_positions(self, n: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def normal_field(self, p: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def weingarten(self, p: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def principal(self, p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def tangents(self, p: np.ndarray) -> np.ndarray:
        """Two parametric tangent vectors per point, shape ``(m, 2, 3)``."""
        raise NotImplementedError

    @property
    def params(self) -> tuple:
        raise NotImplementedError

    def __str__(self) -> str:
        return f"{self.kind}({','.join(f'{v:g}' for v in self.params)})"


def _positive(name, *values):
    for v in values:
        if not (np.isfinite(v) and v > 0):
            raise InvalidInputError(f"{name} parameters must be positive and finite, got {values}")


@dataclass(frozen=True)
class Sphere(GroundTruthSurface):
    radius: float = 1.0
    kind = "sphere"

    def __post_init__(self):
        _positive("sphere", self.radius)

    @property
    def params(self):
        return (self.radius,)

    def sample_positions(self, n, rng):
        return self.radius * _unit(rng.standard_normal((n, 3)))

    def normal_field(self, p):
        return _unit(p)

    def weingarten(self, p):
        nrm = self.normal_field(p)
        return (np.eye(3) - _outer(nrm, nrm)) / self.radius

    def principal(self, p):
        k = np.full(len(p), -1.0 / self.radius)
        return k, k.copy()

    def tangents(self, p):
        x, y, z = p.T
        rxy = np.hypot(x, y)
        polar = np.arctan2(rxy, z)
        az = np.arctan2(y, x)
        d_az = np.stack([-y, x, np.zeros_like(x)], axis=1)
        d_polar = self.radius * np.stack(
            [np.cos(polar) * np.cos(az), np.cos(polar) * np.sin(az), -np.sin(polar)], axis=1
        )
        return np.stack([d_polar, d_az], axis=1)


@dataclass(frozen=True)
class Cylinder(GroundTruthSurface):
    """Open cylinder about the z axis, ``|z| <= height / 2``."""

    radius: float = 1.0
    height: float = 4.0
    kind = "cylinder"

    def __post_init__(self):
        _positive("cylinder", self.radius, self.height)

    @property
    def params(self):
        return (self.radius, self.height)

    def sample_positions(self, n, rng):
        phi = rng.uniform(0.0, 2.0 * np.pi, n)
        z = rng.uniform(-self.height / 2.0, self.height / 2.0, n)
        return np.stack([self.radius * np.cos(phi), self.radius * np.sin(phi), z], axis=1)

    def normal_field(self, p):
        radial = p.copy()
        radial[:, 2] = 0.0
        return _unit(radial)

    def weingarten(self, p):
        nrm = self.normal_field(p)
        axis = np.array([0.0, 0.0, 1.0])
        return (np.eye(3) - np.outer(axis, axis) - _outer(nrm, nrm)) / self.radius

    def principal(self, p):
        return np.zeros(len(p)), np.full(len(p), -1.0 / self.radius)

    def tangents(self, p):
        x, y, _ = p.T
        around = np.stack([-y, x, np.zeros_like(x)], axis=1)
        along = np.tile([0.0, 0.0, 1.0], (len(p), 1))
        return np.stack([around, along], axis=1)


@dataclass(frozen=True)
class Plane(GroundTruthSurface):
    """The square ``|x|, |y| <= half_width`` in ``z = 0``."""

    half_width: float = 1.0
    kind = "plane"

    def __post_init__(self):
        _positive("plane", self.half_width)

    @property
    def params(self):
        return (self.half_width,)

    def sample_positions(self, n, rng):
        xy = rng.uniform(-self.half_width, self.half_width, (n, 2))
        return np.column_stack([xy, np.zeros(n)])

    def normal_field(self, p):
        return np.tile([0.0, 0.0, 1.0], (len(p), 1))

    def weingarten(self, p):
        return np.zeros((len(p), 3, 3))

    def principal(self, p):
        return np.zeros(len(p)), np.zeros(len(p))

    def tangents(self, p):
        return np.tile(np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]), (len(p), 1, 1))


@dataclass(frozen=True)
class Torus(GroundTruthSurface):
    """Torus about the z axis; ``major`` is the tube-centre radius."""

    major: float = 5.0
    minor: float = 2.0
    kind = "torus"

    def __post_init__(self):
        _positive("torus", self.major, self.minor)
        if not self.major > self.minor:
            raise InvalidInputError("torus needs major radius > minor radius")

    @property
    def params(self):
        return (self.major, self.minor)

    def point(self, phi, theta):
        ring = self.major + self.minor * np.cos(theta)
        return np.stack([ring * np.cos(phi), ring * np.sin(phi), self.minor * np.sin(theta)], axis=-1)

    def angles(self, p):
        """Azimuth ``phi`` and tube angle ``theta`` (0 on the outer equator)."""
        phi = np.arctan2(p[:, 1], p[:, 0])
        theta = np.arctan2(p[:, 2], np.hypot(p[:, 0], p[:, 1]) - self.major)
        return phi, theta

    def sample_tube_angles(self, n, rng):
        R, r = self.major, self.minor
        theta = _rejection(
            rng, n,
            lambda m: rng.uniform(-np.pi, np.pi, m),
            lambda t: (R + r * np.cos(t)) / (R + r),
        )
        return theta

    def sample_positions(self, n, rng):
        theta = self.sample_tube_angles(n, rng)
        phi = rng.uniform(-np.pi, np.pi, n)
        return self.point(phi, theta)

    def normal_field(self, p):
        rxy = np.hypot(p[:, 0], p[:, 1])
        centre = np.zeros_like(p)
        centre[:, 0] = self.major * p[:, 0] / rxy
        centre[:, 1] = self.major * p[:, 1] / rxy
        return _unit(p - centre)

    def _frames(self, p):
        phi, theta = self.angles(p)
        t_phi = np.stack([-np.sin(phi), np.cos(phi), np.zeros_like(phi)], axis=1)
        t_theta = np.stack(
            [-np.sin(theta) * np.cos(phi), -np.sin(theta) * np.sin(phi), np.cos(theta)], axis=1
        )
        return phi, theta, t_phi, t_theta

    def weingarten(self, p):
        _, theta, t_phi, t_theta = self._frames(p)
        along_tube = np.cos(theta) / (self.major + self.minor * np.cos(theta))
        return _outer(t_theta, t_theta) / self.minor + along_tube[:, None, None] * _outer(t_phi, t_phi)

    def principal(self, p):
        _, theta = self.angles(p)
        tube = np.full(len(p), -1.0 / self.minor)
        ring = -np.cos(theta) / (self.major + self.minor * np.cos(theta))
        return np.maximum(tube, ring), np.minimum(tube, ring)

    def tangents(self, p):
        _, theta, t_phi, t_theta = self._frames(p)
        ring = self.major + self.minor * np.cos(theta)
        return np.stack([ring[:, None] * t_phi, self.minor * t_theta], axis=1)


@dataclass(frozen=True)
class Ellipsoid(GroundTruthSurface):
    """``x^2/a^2 + y^2/b^2 + z^2/c^2 = 1`` with semi-axes ``a, b, c``."""

    a: float = 6.0
    b: float = 6.0
    c: float = 8.0
    kind = "ellipsoid"

    def __post_init__(self):
        _positive("ellipsoid", self.a, self.b, self.c)

    @property
    def params(self):
        return (self.a, self.b, self.c)

    @property
    def _inv_sq(self):
        return np.array([self.a ** -2, self.b ** -2, self.c ** -2])

    def sample_positions(self, n, rng):
        axes = np.array([self.a, self.b, self.c])
        g_max = 1.0 / axes.min()

        def accept(u):
            # surface-area stretch of the map u -> axes * u, up to a constant
            return np.sqrt(np.sum(u * u / axes ** 2, axis=1)) / g_max

        u = _rejection(rng, n, lambda m: _unit(rng.standard_normal((m, 3))), accept)
        return u * axes

    def _gradient(self, p):
        return p * self._inv_sq

    def normal_field(self, p):
        return _unit(self._gradient(p))

    def weingarten(self, p):
        g = self._gradient(p)
        nrm = _unit(g)
        D = np.broadcast_to(np.diag(self._inv_sq), (len(p), 3, 3))
        return _tangential(nrm, D) / np.linalg.norm(g, axis=1)[:, None, None]

    def principal(self, p):
        a2, b2, c2 = self.a ** 2, self.b ** 2, self.c ** 2
        s = np.sum(p * p * self._inv_sq ** 2, axis=1)
        K = 1.0 / (a2 * b2 * c2 * s * s)
        H = (np.sum(p * p, axis=1) - a2 - b2 - c2) / (2.0 * a2 * b2 * c2 * s ** 1.5)
        root = np.sqrt(np.maximum(H * H - K, 0.0))
        return H + root, H - root

    def tangents(self, p):
        polar = np.arccos(np.clip(p[:, 2] / self.c, -1.0, 1.0))
        az = np.arctan2(p[:, 1] / self.b, p[:, 0] / self.a)
        cu, su, cv, sv = np.cos(polar), np.sin(polar), np.cos(az), np.sin(az)
        d_polar = np.stack([self.a * cu * cv, self.b * cu * sv, -self.c * su], axis=1)
        d_az = np.stack([-self.a * su * sv, self.b * su * cv, np.zeros_like(su)], axis=1)
        return np.stack([d_polar, d_az], axis=1)


@dataclass(frozen=True)
class Paraboloid(GroundTruthSurface):
    """Graph of ``z = a x^2 + b x y + c y^2`` over ``|x|, |y| <= half_width``."""

    a: float = 1.0
    b: float = 0.0
    c: float = 1.0
    half_width: float = 0.5
    kind = "paraboloid"

    def __post_init__(self):
        if not all(np.isfinite([self.a, self.b, self.c])):
            raise InvalidInputError("paraboloid coefficients must be finite")
        _positive("paraboloid extent", self.half_width)

    @property
    def params(self):
        return (self.a, self.b, self.c, self.half_width)

    def height(self, x, y):
        return self.a * x * x + self.b * x * y + self.c * y * y

    def _slopes(self, x, y):
        return 2.0 * self.a * x + self.b * y, self.b * x + 2.0 * self.c * y

    def _stretch(self, x, y):
        fx, fy = self._slopes(x, y)
        return np.sqrt(1.0 + fx * fx + fy * fy)

    def sample_positions(self, n, rng):
        h = self.half_width
        corners = np.array([[h, h], [h, -h], [-h, h], [-h, -h]])
        w_max = self._stretch(corners[:, 0], corners[:, 1]).max()
        xy = _rejection(
            rng, n,
            lambda m: rng.uniform(-h, h, (m, 2)),
            lambda q: self._stretch(q[:, 0], q[:, 1]) / w_max,
        )
        return np.column_stack([xy, self.height(xy[:, 0], xy[:, 1])])

    def normal_field(self, p):
        fx, fy = self._slopes(p[:, 0], p[:, 1])
        return _unit(np.stack([-fx, -fy, np.ones_like(fx)], axis=1))

    def weingarten(self, p):
        fx, fy = self._slopes(p[:, 0], p[:, 1])
        w = np.sqrt(1.0 + fx * fx + fy * fy)
        hess = -np.array([[2.0 * self.a, self.b, 0.0], [self.b, 2.0 * self.c, 0.0], [0.0, 0.0, 0.0]])
        nrm = self.normal_field(p)
        return _tangential(nrm, np.broadcast_to(hess, (len(p), 3, 3))) / w[:, None, None]

    def principal(self, p):
        fx, fy = self._slopes(p[:, 0], p[:, 1])
        fxx, fxy, fyy = 2.0 * self.a, self.b, 2.0 * self.c
        w2 = 1.0 + fx * fx + fy * fy
        K = (fxx * fyy - fxy * fxy) / (w2 * w2)
        H = ((1.0 + fy * fy) * fxx - 2.0 * fx * fy * fxy + (1.0 + fx * fx) * fyy) / (2.0 * w2 ** 1.5)
        root = np.sqrt(np.maximum(H * H - K, 0.0))
        return H + root, H - root

    def tangents(self, p):
        fx, fy = self._slopes(p[:, 0], p[:, 1])
        one, zero = np.ones_like(fx), np.zeros_like(fx)
        return np.stack([np.stack([one, zero, fx], axis=1), np.stack([zero, one, fy], axis=1)], axis=1)


SURFACES = {
    "sphere": Sphere,
    "cylinder": Cylinder,
    "plane": Plane,
    "torus": Torus,
    "ellipsoid": Ellipsoid,
    "paraboloid": Paraboloid,
}


def make_surface(kind: str, params=()) -> GroundTruthSurface:
    """Build a surface by name, e.g. ``make_surface("torus", (5, 2))``."""
    try:
        cls = SURFACES[kind]
    except KeyError:
        raise InvalidInputError(f"unknown surface {kind!r}; choose from {sorted(SURFACES)}") from None
    try:
        return cls(*[float(v) for v in params])
    except TypeError as exc:
        raise InvalidInputError(f"bad parameters for {kind}: {params}") from exc


@dataclass
class GroundTruthSample:
    surface: GroundTruthSurface
    cloud: OrientedPointCloud
    true_K: np.ndarray
    true_H: np.ndarray
    true_k1: np.ndarray
    true_k2: np.ndarray
    seed: int

    def __len__(self) -> int:
        return len(self.cloud)

    def shape_operators(self, frames: np.ndarray, ids=None, atol: float = 1e-9) -> np.ndarray:
        """True ``dg`` in each supplied frame, shape ``(m, 2, 2)``.

        ``frames`` are ``(m, 3, 3)`` arrays of rows ``e1, e2, n``; each
        frame normal must match the true normal of its point.
        """
        ids = np.arange(len(self)) if ids is None else np.asarray(ids)
        frames = np.asarray(frames, dtype=float).reshape(len(ids), 3, 3)
        true_n = self.cloud.normals[ids]
        if np.any(np.abs(frames[:, 2, :] - true_n) > atol):
            raise InvalidInputError("frame normal does not match the true surface normal")
        W = self.surface.weingarten(self.cloud.positions[ids])
        E = frames[:, :2, :]
        return E @ W @ np.transpose(E, (0, 2, 1))

    def shape_operator_in_frame(self, i: int, frame: TangentFrame) -> np.ndarray:
        return self.shape_operators(frame.as_matrix()[None], ids=[i])[0]


def sample_surface(surface: GroundTruthSurface, n: int, seed: int = 0) -> GroundTruthSample:
    """Draw ``n`` area-uniform points with exact normals and curvatures.

    The output is a deterministic function of ``surface``, ``n`` and
    ``seed`` (numpy's PCG64 generator, consumed sequentially).
    """
    if n < 1:
        raise InvalidInputError(f"sample size must be positive, got {n}")
    rng = np.random.default_rng(seed)
    p = surface.sample_positions(int(n), rng)
    nrm = surface.normal_field(p)
    k1, k2 = surface.principal(p)
    cloud = OrientedPointCloud(p, nrm)
    return GroundTruthSample(surface, cloud, k1 * k2, (k1 + k2) / 2.0, k1, k2, seed)


def add_gaussian_noise(cloud: OrientedPointCloud, sigma2: float, seed: int = 0) -> OrientedPointCloud:
    """Perturb positions by i.i.d. ``N(0, sigma2)`` per coordinate; normals are copied."""
    if not (np.isfinite(sigma2) and sigma2 >= 0):
        raise InvalidInputError(f"noise variance must be nonnegative, got {sigma2}")
    if sigma2 == 0:
        return OrientedPointCloud(cloud.positions.copy(), None if cloud.normals is None else cloud.normals.copy())
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, np.sqrt(sigma2), cloud.positions.shape)
    return OrientedPointCloud(cloud.positions + noise, cloud.normals)
