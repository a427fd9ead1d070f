"""
PCA normal estimation and local orientation of neighbouring normals.

No global orientation pass is made: curvature estimation only needs the
normals of a neighbourhood to agree with the normal at its centre, which
:func:`orient_neighbors` enforces point by point.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .cloud import OrientedPointCloud
from .errors import InvalidInputError
from .spatial import SpatialIndex

DEFAULT_NORMAL = np.array([0.0, 0.0, 1.0])

# relative size of the middle covariance eigenvalue below which the
# neighbourhood is treated as rank < 2
_RANK_TOL = 1e-12
# components smaller than this are skipped by the sign rule
_SIGN_TOL = 1e-12


@dataclass(frozen=True)
class NormalEstimate:
    normals: np.ndarray
    degenerate: np.ndarray

    @property
    def n_degenerate(self) -> int:
        return int(np.count_nonzero(self.degenerate))


def canonical_sign(normals: np.ndarray) -> np.ndarray:
    """Flip each row so its first non-negligible component is positive."""
    normals = np.asarray(normals, dtype=float)
    big = np.abs(normals) > _SIGN_TOL
    first = np.argmax(big, axis=1)
    lead = normals[np.arange(len(normals)), first]
    sign = np.where(lead < 0.0, -1.0, 1.0)
    return normals * sign[:, None]


def estimate_normals_pca(cloud, k: int, index: SpatialIndex | None = None) -> NormalEstimate:
    """Unit normals from the smallest principal axis of each neighbourhood.

    The neighbourhood of a point is the point itself together with its
    ``k`` nearest other points. Signs are fixed by :func:`canonical_sign`
    and carry no global orientation.

    Parameters
    ----------
    cloud : OrientedPointCloud or array_like of shape (n, 3)
    k : int
        Neighbours per point, at least 3 and at most ``n - 1``.
    index : SpatialIndex, optional
        Reused if given, built otherwise.

    Returns
    -------
    NormalEstimate
        Normals plus a boolean mask of points whose neighbourhood had a
        rank < 2 covariance; those points get ``(0, 0, 1)`` and a warning
        is issued with their count.
    """
    positions = cloud.positions if isinstance(cloud, OrientedPointCloud) else np.asarray(cloud, float)
    n = len(positions)
    if k < 3 or k > n - 1:
        raise InvalidInputError(f"PCA normals need 3 <= k <= n-1, got k={k}, n={n}")
    if index is None:
        index = SpatialIndex(positions)

    normals = np.empty((n, 3))
    degenerate = np.zeros(n, dtype=bool)
    for start, ids, _ in index.self_neighbors(k):
        stop = start + len(ids)
        nbhd = np.concatenate([positions[start:stop, None, :], positions[ids]], axis=1)
        centered = nbhd - nbhd.mean(axis=1, keepdims=True)
        cov = np.einsum("mki,mkj->mij", centered, centered) / (k + 1)
        evals, evecs = np.linalg.eigh(cov)
        bad = evals[:, 1] <= _RANK_TOL * np.maximum(evals[:, 2], np.finfo(float).tiny)
        normals[start:stop] = evecs[:, :, 0]
        degenerate[start:stop] = bad

    normals /= np.linalg.norm(normals, axis=1)[:, None]
    normals = canonical_sign(normals)
    normals[degenerate] = DEFAULT_NORMAL
    if degenerate.any():
        warnings.warn(
            f"{int(degenerate.sum())} point(s) have degenerate PCA neighbourhoods; "
            "default normal assigned",
            RuntimeWarning,
            stacklevel=2,
        )
    return NormalEstimate(normals, degenerate)


def orient_neighbors(center_normal, neighbor_normals) -> np.ndarray:
    """Flip each neighbour normal whose dot product with the centre normal is negative."""
    c = np.asarray(center_normal, dtype=float)
    nb = np.asarray(neighbor_normals, dtype=float)
    dots = nb @ c
    return np.where((dots < 0.0)[..., None], -nb, nb)


def orient_neighbors_batch(center_normals: np.ndarray, neighbor_normals: np.ndarray) -> np.ndarray:
    """:func:`orient_neighbors` over ``(m, 3)`` centres and ``(m, k, 3)`` neighbours."""
    dots = np.einsum("mkj,mj->mk", neighbor_normals, center_normals)
    return np.where((dots < 0.0)[..., None], -neighbor_normals, neighbor_normals)
