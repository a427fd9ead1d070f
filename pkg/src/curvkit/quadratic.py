"""
Local paraboloid fitting, the comparison baseline.

Neighbours are moved into the point's tangent frame (origin at the point,
``z`` along its normal) and ``z = a x^2 + b x y + c y^2`` is fitted by least
squares. With ``z`` along the supplied normal, ``K = 4ac - b^2`` and
``H = a + c`` use the same sign convention as the Weingarten estimator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cloud import OrientedPointCloud
from .errors import DegenerateNeighborhoodError, InvalidInputError
from .geometry import build_frames_batch, build_tangent_frame
from .spatial import SpatialIndex
from .wme import (
    DET_RTOL,
    FLAG_DEGENERATE,
    FLAG_REGULARIZED,
    RIDGE_RTOL,
    CurvatureField,
)

MIN_K = 6


@dataclass(frozen=True)
class ParaboloidFit:
    a: float
    b: float
    c: float
    residual: float
    k_used: int
    cond_flag: bool = False

    def weingarten(self) -> np.ndarray:
        """Gauss-map differential implied by the fit, in the fitting frame."""
        return -np.array([[2.0 * self.a, self.b], [self.b, 2.0 * self.c]])


def curvatures_from_fit(fit: ParaboloidFit) -> tuple[float, float]:
    return 4.0 * fit.a * fit.c - fit.b ** 2, fit.a + fit.c


def fit_paraboloid_batch(local: np.ndarray):
    """Fit stacked neighbourhoods given in local coordinates.

    ``local`` has shape ``(m, k, 3)``. Returns ``(coef, cond, resid,
    degenerate)`` with ``coef`` of shape ``(m, 3)`` holding ``a, b, c``.
    """
    x, y, z = local[..., 0], local[..., 1], local[..., 2]
    X = np.stack([x * x, x * y, y * y], axis=-1)
    M = np.einsum("mki,mkj->mij", X, X)
    rhs = np.einsum("mki,mk->mi", X, z)
    tr = np.trace(M, axis1=1, axis2=2)
    det = np.linalg.det(M)
    degenerate = ~(tr > np.finfo(float).tiny)
    cond = ~degenerate & (det < DET_RTOL * (tr / 3.0) ** 3)

    eye = np.eye(3)
    M = M + (np.where(cond, RIDGE_RTOL * tr, 0.0))[:, None, None] * eye
    M[degenerate] = eye
    coef = np.linalg.solve(M, rhs[..., None])[..., 0]
    resid = np.sum((z - np.einsum("mki,mi->mk", X, coef)) ** 2, axis=1)
    coef[degenerate] = np.nan
    resid[degenerate] = np.nan
    return coef, cond, resid, degenerate


def _check_k(k: int, n: int) -> None:
    if k < MIN_K or k > n - 1:
        raise InvalidInputError(f"quadratic fit needs {MIN_K} <= k <= n-1, got k={k}, n={n}")


def quadratic_fit_at(cloud: OrientedPointCloud, index: SpatialIndex, i: int, k: int) -> ParaboloidFit:
    """Fit the paraboloid at point ``i`` from its ``k`` nearest neighbours.

    Raises ``DegenerateNeighborhoodError`` if every neighbour projects onto
    the normal axis.
    """
    if cloud.normals is None:
        raise InvalidInputError("cloud has no normals; estimate them first")
    _check_k(k, len(cloud))
    frame = build_tangent_frame(cloud.normals[i]).as_matrix()
    nb = index.k_nearest(cloud.positions[i], k, exclude=i)
    local = (cloud.positions[nb.ids] - cloud.positions[i]) @ frame.T
    coef, cond, resid, bad = fit_paraboloid_batch(local[None])
    if bad[0]:
        raise DegenerateNeighborhoodError("neighbourhood has no tangential spread")
    a, b, c = coef[0]
    return ParaboloidFit(float(a), float(b), float(c), float(resid[0]), k, bool(cond[0]))


def quadratic_field(cloud: OrientedPointCloud, k: int = 100, index: SpatialIndex | None = None) -> CurvatureField:
    """Paraboloid-fit curvature at every point, packaged like the WME field."""
    if cloud.normals is None:
        raise InvalidInputError("cloud has no normals; estimate them first")
    n = len(cloud)
    _check_k(k, n)
    if index is None:
        index = SpatialIndex(cloud.positions)
    frames = build_frames_batch(cloud.normals)

    G = np.empty((n, 2, 2))
    resid = np.empty(n)
    flags = np.zeros(n, dtype=np.int64)
    for start, ids, _ in index.self_neighbors(k):
        stop = start + len(ids)
        f = frames[start:stop]
        d = cloud.positions[ids] - cloud.positions[start:stop, None, :]
        local = np.einsum("mkj,mtj->mkt", d, f)
        coef, cond, r, bad = fit_paraboloid_batch(local)
        a, b, c = coef[:, 0], coef[:, 1], coef[:, 2]
        G[start:stop, 0, 0] = -2.0 * a
        G[start:stop, 0, 1] = -b
        G[start:stop, 1, 0] = -b
        G[start:stop, 1, 1] = -2.0 * c
        resid[start:stop] = r
        flags[start:stop] = np.where(cond, FLAG_REGULARIZED, 0) | np.where(bad, FLAG_DEGENERATE, 0)
    return CurvatureField.from_matrices("quad", k, G, frames, resid, flags)
