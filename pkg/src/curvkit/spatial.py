"""
Exact k-nearest-neighbour queries.

Candidate neighbours come from ``scipy.spatial.cKDTree``; distances are then
recomputed with one fixed formula and re-sorted by ``(distance, id)`` so the
result is exact and ties always resolve to the lower point id.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import InvalidInputError


def worker_count() -> int:
    """Worker cap for tree queries, read from ``CURVKIT_THREADS`` (0 = all cores)."""
    raw = os.environ.get("CURVKIT_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        return 1
    return -1 if n <= 0 else n


def point_distances(points: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Euclidean distances, summing squared components in x, y, z order."""
    d = points - query
    return np.sqrt(d[..., 0] * d[..., 0] + d[..., 1] * d[..., 1] + d[..., 2] * d[..., 2])


@dataclass(frozen=True)
class NeighborList:
    ids: np.ndarray
    dists: np.ndarray

    def __len__(self) -> int:
        return len(self.ids)


class SpatialIndex:
    """Immutable k-d tree over a fixed set of positions."""

    def __init__(self, positions) -> None:
        pts = np.array(positions, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise InvalidInputError(f"expected positions of shape (n, 3), got {pts.shape}")
        if len(pts) == 0:
            raise InvalidInputError("cannot index an empty point set")
        if not np.all(np.isfinite(pts)):
            raise InvalidInputError("positions contain non-finite coordinates")
        pts.setflags(write=False)
        self.points = pts
        self._tree = cKDTree(pts, balanced_tree=True, compact_nodes=True)

    def __len__(self) -> int:
        return len(self.points)

    def _check_k(self, k: int, excluding: bool) -> None:
        limit = len(self) - (1 if excluding else 0)
        if k < 1 or k > limit:
            raise InvalidInputError(f"k={k} out of range [1, {limit}]")

    def query(self, queries, k: int, exclude=None) -> tuple[np.ndarray, np.ndarray]:
        """Batched exact k-NN.

        Parameters
        ----------
        queries : array_like, shape (m, 3)
        k : int
        exclude : array_like of int, shape (m,), optional
            Point id to drop from each query's result (typically the query
            point itself).

        Returns
        -------
        ids, dists : ndarray, shape (m, k)
            Sorted by ascending distance, ties by ascending id.
        """
        q = np.atleast_2d(np.asarray(queries, dtype=float))
        excluding = exclude is not None
        self._check_k(k, excluding)
        m = len(q)
        if m == 0:
            return np.empty((0, k), dtype=np.intp), np.empty((0, k))
        if excluding:
            exclude = np.broadcast_to(np.asarray(exclude, dtype=np.intp), (m,))

        n = len(self)
        # one spare candidate beyond what is needed reveals boundary ties
        want = min(k + (1 if excluding else 0) + 1, n)
        _, cand = self._tree.query(q, k=want, workers=worker_count())
        cand = np.asarray(cand, dtype=np.intp).reshape(m, want)
        d = point_distances(self.points[cand], q[:, None, :])

        if excluding:
            d = np.where(cand == exclude[:, None], np.inf, d)
        order = np.lexsort((cand, d), axis=-1)
        cand = np.take_along_axis(cand, order, axis=1)
        d = np.take_along_axis(d, order, axis=1)

        ids = cand[:, :k].copy()
        dists = d[:, :k].copy()

        # rows that may have equidistant points beyond the candidate set
        if want < n:
            last = dists[:, -1]
            spare = d[:, k] if k < want else np.full(m, np.inf)
            tied = spare <= last * (1.0 + 1e-12)
        else:
            tied = np.zeros(m, dtype=bool)
        for row in np.flatnonzero(tied):
            ids[row], dists[row] = self._query_tied(
                q[row], k, exclude[row] if excluding else None, dists[row, -1]
            )
        return ids, dists

    def _query_tied(self, point, k, exclude, radius):
        r = radius * (1.0 + 1e-9) + 1e-300
        cand = np.asarray(self._tree.query_ball_point(point, r), dtype=np.intp)
        if exclude is not None:
            cand = cand[cand != exclude]
        d = point_distances(self.points[cand], point)
        order = np.lexsort((cand, d))[:k]
        return cand[order], d[order]

    def k_nearest(self, query, k: int, exclude: int | None = None) -> NeighborList:
        q = np.asarray(query, dtype=float).reshape(1, 3)
        ex = None if exclude is None else np.array([exclude])
        ids, dists = self.query(q, k, exclude=ex)
        return NeighborList(ids[0], dists[0])

    def self_neighbors(self, k: int, chunk: int | None = None):
        """Yield ``(start, ids, dists)`` blocks of the k-NN of every indexed
        point, each point excluded from its own list."""
        n = len(self)
        self._check_k(k, True)
        if chunk is None:
            chunk = max(64, 1_000_000 // k)
        for start in range(0, n, chunk):
            stop = min(start + chunk, n)
            ids, dists = self.query(self.points[start:stop], k, exclude=np.arange(start, stop))
            yield start, ids, dists


def build_index(positions) -> SpatialIndex:
    return SpatialIndex(positions)


def k_nearest(index: SpatialIndex, query, k: int, exclude: int | None = None) -> NeighborList:
    """The ``k`` indexed points closest to ``query``.

    Raises ``InvalidInputError`` when ``k`` exceeds the number of eligible
    points.
    """
    return index.k_nearest(query, k, exclude=exclude)
