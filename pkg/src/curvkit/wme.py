"""
Weingarten map estimation.

At each point the tangent-plane projections of neighbour position offsets
(rows of ``A``) and neighbour normal offsets (rows of ``B``) are related by
``B ~ A G`` where ``G`` is the differential of the Gauss map in the local
frame. ``G`` is the ordinary least-squares solution; curvatures follow from
:func:`curvkit.geometry.curvatures_batch`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cloud import OrientedPointCloud
from .errors import DegenerateNeighborhoodError, InvalidInputError
from .geometry import (
    CurvatureSet,
    TangentFrame,
    build_frames_batch,
    build_tangent_frame,
    curvatures_batch,
)
from .normals import orient_neighbors, orient_neighbors_batch
from .spatial import NeighborList, SpatialIndex

DET_RTOL = 1e-10
RIDGE_RTOL = 1e-9
MIN_AUTO_K = 10

FLAG_REGULARIZED = 1
FLAG_DEGENERATE = 2
FLAG_DEFAULT_NORMAL = 4


@dataclass(frozen=True)
class WeingartenEstimate:
    G: np.ndarray
    frame: TangentFrame
    k_used: int
    cond_flag: bool
    residual: float


@dataclass
class CurvatureField:
    """Per-point estimates aligned with the cloud's point order.

    ``G`` holds the raw 2x2 matrices, ``frames`` the ``(e1, e2, n)`` rows
    they are expressed in. Points that could not be estimated carry NaN
    values and have ``FLAG_DEGENERATE`` set in ``flags``.
    """

    method: str
    k: int
    G: np.ndarray
    frames: np.ndarray
    K: np.ndarray
    H: np.ndarray
    k1: np.ndarray
    k2: np.ndarray
    dir1: np.ndarray
    dir2: np.ndarray
    asym: np.ndarray
    residual: np.ndarray
    flags: np.ndarray

    def __len__(self) -> int:
        return len(self.K)

    @classmethod
    def from_matrices(cls, method, k, G, frames, residual, flags) -> "CurvatureField":
        c = curvatures_batch(G, frames)
        return cls(method, k, G, frames, c["K"], c["H"], c["k1"], c["k2"],
                   c["d1"], c["d2"], c["asym"], residual, flags)

    def curvature_set(self, i: int) -> CurvatureSet:
        return CurvatureSet(float(self.K[i]), float(self.H[i]), float(self.k1[i]),
                            float(self.k2[i]), self.dir1[i], self.dir2[i], float(self.asym[i]))

    def estimate(self, i: int) -> WeingartenEstimate:
        return WeingartenEstimate(self.G[i], TangentFrame.from_matrix(self.frames[i]), self.k,
                                  bool(self.flags[i] & FLAG_REGULARIZED), float(self.residual[i]))

    @property
    def failed(self) -> np.ndarray:
        return (self.flags & FLAG_DEGENERATE) != 0


def auto_k(n: int) -> int:
    """Neighbourhood size ``round(n^(2/3))`` clamped to ``[10, n-1]``."""
    return int(min(max(round(n ** (2.0 / 3.0)), MIN_AUTO_K), n - 1))


def resolve_k(k, n: int) -> int:
    if k is None or k == "auto":
        return auto_k(n)
    k = int(k)
    if k < 2 or k > n - 1:
        raise InvalidInputError(f"k={k} out of range [2, {n - 1}]")
    return k


def _require_normals(cloud: OrientedPointCloud) -> None:
    if cloud.normals is None:
        raise InvalidInputError("cloud has no normals; estimate them first")


def assemble_design_batch(positions, normals, centers, neighbor_ids, frames, local_orientation=True):
    """Design matrices for ``m`` centres at once.

    Shapes: ``centers (m,)``, ``neighbor_ids (m, k)``, ``frames (m, 3, 3)``.
    Returns ``A, B`` of shape ``(m, k, 2)``.
    """
    tangent = frames[:, :2, :]
    dP = positions[neighbor_ids] - positions[centers][:, None, :]
    center_n = normals[centers]
    nb = normals[neighbor_ids]
    if local_orientation:
        nb = orient_neighbors_batch(center_n, nb)
    dN = nb - center_n[:, None, :]
    A = np.einsum("mkj,mtj->mkt", dP, tangent)
    B = np.einsum("mkj,mtj->mkt", dN, tangent)
    return A, B


def assemble_design(cloud: OrientedPointCloud, i: int, neighbors, frame: TangentFrame,
                    local_orientation: bool = True):
    """Rows ``((P_j - P_i).e1, (P_j - P_i).e2)`` and the same for normal
    offsets, one row per neighbour.

    With ``local_orientation`` neighbour normals are first flipped into
    the hemisphere of the centre normal.
    """
    _require_normals(cloud)
    ids = neighbors.ids if isinstance(neighbors, NeighborList) else np.asarray(neighbors)
    tangent = np.stack([frame.e1, frame.e2], axis=1)
    dP = cloud.positions[ids] - cloud.positions[i]
    nb = cloud.normals[ids]
    if local_orientation:
        nb = orient_neighbors(cloud.normals[i], nb)
    dN = nb - cloud.normals[i]
    return dP @ tangent, dN @ tangent


def solve_weingarten_batch(A: np.ndarray, B: np.ndarray):
    """Least-squares ``G`` for stacked ``(m, k, 2)`` designs.

    Returns ``(G, cond_flag, residual, degenerate)``; degenerate entries
    (all-zero ``A``) get NaN ``G`` and residual.
    """
    M = np.einsum("mki,mkj->mij", A, A)
    R = np.einsum("mki,mkj->mij", A, B)
    tr = M[:, 0, 0] + M[:, 1, 1]
    det = M[:, 0, 0] * M[:, 1, 1] - M[:, 0, 1] * M[:, 1, 0]
    degenerate = ~(tr > np.finfo(float).tiny)
    cond = ~degenerate & (det < DET_RTOL * (tr / 2.0) ** 2)

    eye = np.eye(2)
    M = M + (np.where(cond, RIDGE_RTOL * tr, 0.0))[:, None, None] * eye
    M[degenerate] = eye
    G = np.linalg.solve(M, R)
    resid = np.sum((B - A @ G) ** 2, axis=(1, 2))
    G[degenerate] = np.nan
    resid[degenerate] = np.nan
    return G, cond, resid, degenerate


def solve_weingarten(A, B) -> tuple[np.ndarray, bool, float]:
    """Minimise ``||B - A G||_F^2`` over 2x2 matrices ``G``.

    When ``A^T A`` is nearly singular a ridge term proportional to its
    trace is added and ``cond_flag`` is set.

    Returns
    -------
    G : ndarray, shape (2, 2)
    cond_flag : bool
    residual : float
        Attained objective.

    Raises
    ------
    InvalidInputError
        Fewer than two rows, or mismatched shapes.
    DegenerateNeighborhoodError
        ``A`` is identically zero.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.ndim != 2 or A.shape[1] != 2 or A.shape != B.shape:
        raise InvalidInputError(f"A and B must both be (k, 2); got {A.shape} and {B.shape}")
    if len(A) < 2:
        raise InvalidInputError("need at least two neighbours")
    G, cond, resid, degenerate = solve_weingarten_batch(A[None], B[None])
    if degenerate[0]:
        raise DegenerateNeighborhoodError("all neighbour offsets project to zero")
    return G[0], bool(cond[0]), float(resid[0])


def estimate_at(cloud: OrientedPointCloud, index: SpatialIndex, i: int, k: int,
                local_orientation: bool = True) -> WeingartenEstimate:
    _require_normals(cloud)
    frame = build_tangent_frame(cloud.normals[i])
    neighbors = index.k_nearest(cloud.positions[i], k, exclude=i)
    A, B = assemble_design(cloud, i, neighbors, frame, local_orientation)
    G, cond, resid = solve_weingarten(A, B)
    return WeingartenEstimate(G, frame, k, cond, resid)


def estimate_field(cloud: OrientedPointCloud, k="auto", index: SpatialIndex | None = None,
                   local_orientation: bool = True) -> CurvatureField:
    """Estimate curvature at every point of an oriented cloud.

    Parameters
    ----------
    cloud : OrientedPointCloud
        Must carry normals.
    k : int or "auto"
        Neighbours per point; ``"auto"`` uses :func:`auto_k`.
    index : SpatialIndex, optional
        Prebuilt index over ``cloud.positions``.
    local_orientation : bool
        Flip neighbour normals into the centre normal's hemisphere before
        differencing. Needed for normals without a global orientation
        (e.g. from PCA). Turn it off for globally consistent normals: when
        a neighbourhood spans more than 90 degrees of normal rotation the
        flip corrupts correct normals.

    Points whose neighbourhood is degenerate are flagged rather than
    aborting the whole field.
    """
    _require_normals(cloud)
    n = len(cloud)
    if n < 4:
        raise InvalidInputError(f"need at least 4 points, got {n}")
    k = resolve_k(k, n)
    if index is None:
        index = SpatialIndex(cloud.positions)
    frames = build_frames_batch(cloud.normals)

    G = np.empty((n, 2, 2))
    resid = np.empty(n)
    flags = np.zeros(n, dtype=np.int64)
    for start, ids, _ in index.self_neighbors(k):
        stop = start + len(ids)
        centers = np.arange(start, stop)
        A, B = assemble_design_batch(cloud.positions, cloud.normals, centers, ids,
                                     frames[start:stop], local_orientation)
        g, cond, r, bad = solve_weingarten_batch(A, B)
        G[start:stop] = g
        resid[start:stop] = r
        flags[start:stop] = np.where(cond, FLAG_REGULARIZED, 0) | np.where(bad, FLAG_DEGENERATE, 0)
    return CurvatureField.from_matrices("wme", k, G, frames, resid, flags)
