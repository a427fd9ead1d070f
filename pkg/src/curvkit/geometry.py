"""
Tangent frames, tangent-plane projections and curvature extraction.

Vectors are plain ``numpy`` arrays of shape ``(3,)`` and 2x2 matrices are
arrays of shape ``(2, 2)``. Most functions here also have a batched variant
(suffix ``_batch``) operating on a leading point axis; the single-point
functions are thin wrappers around those so both paths share one
implementation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError


@dataclass(frozen=True)
class TangentFrame:
    """Right-handed orthonormal basis ``{e1, e2, n}`` at a surface point."""

    e1: np.ndarray
    e2: np.ndarray
    n: np.ndarray

    def as_matrix(self) -> np.ndarray:
        """Rows are ``e1, e2, n``."""
        return np.stack([self.e1, self.e2, self.n])

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "TangentFrame":
        m = np.asarray(m, dtype=float)
        return cls(m[0].copy(), m[1].copy(), m[2].copy())


@dataclass(frozen=True)
class CurvatureSet:
    """Curvature quantities at one point.

    ``gaussian`` and ``mean`` come straight from the raw estimate; the
    principal pair comes from its symmetric part. ``asymmetry`` is the
    Frobenius norm of the skew part and bounds the mismatch between
    ``kappa1 * kappa2`` and ``gaussian``.
    """

    gaussian: float
    mean: float
    kappa1: float
    kappa2: float
    dir1: np.ndarray
    dir2: np.ndarray
    asymmetry: float


def _as_normals(n: np.ndarray) -> np.ndarray:
    n = np.asarray(n, dtype=float)
    if n.ndim == 1:
        n = n[None, :]
    if n.ndim != 2 or n.shape[1] != 3:
        raise InvalidInputError(f"expected normals of shape (m, 3), got {n.shape}")
    if not np.all(np.isfinite(n)):
        raise InvalidInputError("normal vector has non-finite components")
    norms = np.linalg.norm(n, axis=1)
    if np.any(norms == 0.0):
        raise InvalidInputError("cannot build a tangent frame from a zero vector")
    return n / norms[:, None]


def build_frames_batch(normals: np.ndarray) -> np.ndarray:
    """Tangent frames for a stack of normals.

    Returns an ``(m, 3, 3)`` array whose rows per point are ``e1, e2, n``.
    The seed axis for ``e1`` is the coordinate axis with the smallest
    absolute component of ``n`` (lowest index on ties), so the result is a
    deterministic function of ``n``.
    """
    n = _as_normals(normals)
    m = n.shape[0]
    axis = np.argmin(np.abs(n), axis=1)
    a = np.zeros((m, 3))
    a[np.arange(m), axis] = 1.0
    e1 = a - np.sum(a * n, axis=1)[:, None] * n
    e1 /= np.linalg.norm(e1, axis=1)[:, None]
    e2 = np.cross(n, e1)
    return np.stack([e1, e2, n], axis=1)


def build_tangent_frame(n) -> TangentFrame:
    """Extend a (not necessarily unit) normal to a right-handed orthonormal frame.

    Raises
    ------
    InvalidInputError
        If ``n`` is zero or has non-finite components.
    """
    return TangentFrame.from_matrix(build_frames_batch(n)[0])


def project_to_frame(frame: TangentFrame, v) -> tuple[float, float]:
    v = np.asarray(v, dtype=float)
    return float(v @ frame.e1), float(v @ frame.e2)


def curvatures_batch(G: np.ndarray, frames: np.ndarray) -> dict[str, np.ndarray]:
    """Vectorised :func:`curvatures_from_weingarten`.

    ``G`` has shape ``(m, 2, 2)`` and ``frames`` shape ``(m, 3, 3)``.
    Returns a dict with keys ``K, H, k1, k2, d1, d2, asym``.
    """
    G = np.asarray(G, dtype=float)
    frames = np.asarray(frames, dtype=float)
    g11, g12, g21, g22 = G[:, 0, 0], G[:, 0, 1], G[:, 1, 0], G[:, 1, 1]

    K = g11 * g22 - g12 * g21
    H = -(g11 + g22) / 2.0

    # S = -(G + G^T)/2 = [[p, q], [q, r]]
    p = -g11
    r = -g22
    q = -(g12 + g21) / 2.0
    half_diff = (p - r) / 2.0
    disc = np.hypot(half_diff, q)
    mid = (p + r) / 2.0
    k1 = mid + disc
    k2 = mid - disc

    # atan2(0, 0) = 0 puts umbilic points on the frame axes
    theta = 0.5 * np.arctan2(2.0 * q, p - r)
    c, s = np.cos(theta), np.sin(theta)
    e1 = frames[:, 0, :]
    e2 = frames[:, 1, :]
    d1 = c[:, None] * e1 + s[:, None] * e2
    d2 = -s[:, None] * e1 + c[:, None] * e2

    asym = np.abs(g12 - g21) / np.sqrt(2.0)
    return {"K": K, "H": H, "k1": k1, "k2": k2, "d1": d1, "d2": d2, "asym": asym}


def curvatures_from_weingarten(G, frame: TangentFrame) -> CurvatureSet:
    """Curvatures from a 2x2 estimate of the Gauss-map differential.

    Parameters
    ----------
    G : array_like, shape (2, 2)
        Matrix of ``dg`` in the basis ``{frame.e1, frame.e2}``; it need not
        be symmetric.
    frame : TangentFrame
        Frame in which ``G`` is expressed; used to lift principal
        directions back to 3-space.

    Returns
    -------
    CurvatureSet
        ``K = det(-G)``, ``H = trace(-G)/2``, principal curvatures and
        directions of ``-(G + G^T)/2`` with ``kappa1 >= kappa2``.
    """
    G = np.asarray(G, dtype=float)
    if G.shape != (2, 2):
        raise InvalidInputError(f"expected a 2x2 matrix, got shape {G.shape}")
    if not np.all(np.isfinite(G)):
        raise InvalidInputError("matrix has non-finite entries")
    out = curvatures_batch(G[None], frame.as_matrix()[None])
    return CurvatureSet(
        gaussian=float(out["K"][0]),
        mean=float(out["H"][0]),
        kappa1=float(out["k1"][0]),
        kappa2=float(out["k2"][0]),
        dir1=out["d1"][0],
        dir2=out["d2"][0],
        asymmetry=float(out["asym"][0]),
    )
