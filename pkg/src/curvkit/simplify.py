"""
Clustering simplification, uniform and curvature-adaptive.

Clusters are grown from randomly chosen unassigned seed points by adding
the unassigned points nearest to the seed until the cluster reaches its
target size. Uniform clustering uses the same target ``T`` everywhere.
Adaptive clustering shrinks the target at highly curved seeds:
``ceil((1 - c |curv_p| / max|curv|) T)``. Each cluster is replaced by the
mean of its members.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .cloud import OrientedPointCloud
from .errors import InvalidInputError
from .spatial import SpatialIndex, point_distances

CURVATURE_KINDS = ("gaussian", "mean", "principal-max")

# neighbours cached per point before falling back to fresh queries
_CACHE_K = 48


@dataclass(frozen=True)
class SimplifyParams:
    T: float = 50
    c: float = 0.9
    curvature_kind: str = "mean"
    seed: int = 0

    def __post_init__(self):
        if not self.T >= 1:
            raise InvalidInputError(f"T must be at least 1, got {self.T}")
        if not 0.0 < self.c < 1.0:
            raise InvalidInputError(f"c must lie in (0, 1), got {self.c}")
        if self.curvature_kind not in CURVATURE_KINDS:
            raise InvalidInputError(f"curvature kind must be one of {CURVATURE_KINDS}")


@dataclass
class SimplifiedCloud:
    representatives: np.ndarray
    rep_curvature: np.ndarray
    cluster_sizes: np.ndarray
    member_map: np.ndarray
    seeds: np.ndarray
    targets: np.ndarray

    def __len__(self) -> int:
        return len(self.representatives)


def select_curvature(kind: str, K, H, k1=None, k2=None) -> np.ndarray:
    """The per-point quantity whose magnitude drives adaptive cluster sizes."""
    if kind == "gaussian":
        return np.asarray(K, dtype=float)
    if kind == "mean":
        return np.asarray(H, dtype=float)
    if kind == "principal-max":
        if k1 is None or k2 is None:
            raise InvalidInputError("principal curvatures required")
        return np.maximum(np.abs(k1), np.abs(k2))
    raise InvalidInputError(f"unknown curvature kind {kind!r}")


def adaptive_target(abs_curv: float, max_abs: float, c: float, T: float) -> int:
    if max_abs <= 0:
        return max(1, math.ceil(T))
    return max(1, math.ceil((1.0 - c * abs_curv / max_abs) * T))


class _Clusterer:
    def __init__(self, positions: np.ndarray, index: SpatialIndex | None = None):
        self.positions = positions
        self.n = len(positions)
        self.index = index if index is not None else SpatialIndex(positions)
        self.cache_k = min(_CACHE_K, self.n)
        self.cache, _ = self.index.query(positions, self.cache_k)

    def _nearest_unassigned(self, seed, want, free):
        ids = self.cache[seed]
        k = self.cache_k
        while True:
            ids = ids[free[ids] & (ids != seed)]
            if len(ids) >= want - 1:
                return ids[: want - 1]
            if k >= self.n or 4 * k >= self.n:
                break
            k = min(2 * k, self.n)
            ids, _ = self.index.query(self.positions[seed], k)
            ids = ids[0]
        # few candidates remain near the seed: scan all unassigned points
        rest = np.flatnonzero(free)
        rest = rest[rest != seed]
        d = point_distances(self.positions[rest], self.positions[seed])
        return rest[np.lexsort((rest, d))[: want - 1]]

    def run(self, target_of, rng):
        free = np.ones(self.n, dtype=bool)
        member = np.full(self.n, -1, dtype=np.intp)
        remaining = self.n
        seeds, targets, sizes = [], [], []
        for seed in rng.permutation(self.n):
            if not free[seed]:
                continue
            target = target_of(seed)
            want = min(target, remaining)
            members = np.concatenate([[seed], self._nearest_unassigned(seed, want, free)])
            cid = len(seeds)
            free[members] = False
            member[members] = cid
            remaining -= len(members)
            seeds.append(seed)
            targets.append(target)
            sizes.append(len(members))
            if remaining == 0:
                break
        return member, np.array(seeds), np.array(targets), np.array(sizes)


def _positions(cloud) -> np.ndarray:
    pos = cloud.positions if isinstance(cloud, OrientedPointCloud) else np.asarray(cloud, dtype=float)
    if pos.ndim != 2 or pos.shape[1] != 3 or len(pos) == 0:
        raise InvalidInputError("need a nonempty (n, 3) point set")
    return pos


def _summarise(pos, curv, member, seeds, targets, sizes) -> SimplifiedCloud:
    m = len(seeds)
    reps = np.zeros((m, 3))
    np.add.at(reps, member, pos)
    reps /= sizes[:, None]
    if curv is None:
        rep_curv = np.full(m, np.nan)
    else:
        rep_curv = np.bincount(member, weights=curv, minlength=m) / sizes
    return SimplifiedCloud(reps, rep_curv, sizes, member, seeds, targets)


def _run(pos, curv, target_of, seed, clusterer=None):
    clusterer = clusterer or _Clusterer(pos)
    member, seeds, targets, sizes = clusterer.run(target_of, np.random.default_rng(seed))
    return _summarise(pos, curv, member, seeds, targets, sizes)


def simplify_uniform(cloud, T: float, seed: int = 0, curvatures=None) -> SimplifiedCloud:
    """Clusters of ``ceil(T)`` points (the last one may be smaller)."""
    pos = _positions(cloud)
    if not T >= 1:
        raise InvalidInputError(f"T must be at least 1, got {T}")
    curv = None if curvatures is None else np.asarray(curvatures, dtype=float)
    size = max(1, math.ceil(T))
    return _run(pos, curv, lambda _: size, seed)


def _check_curvatures(curvatures, n):
    curv = np.asarray(curvatures, dtype=float)
    if curv.shape != (n,):
        raise InvalidInputError(f"expected {n} curvature values, got shape {curv.shape}")
    if np.any(np.isnan(curv)):
        raise InvalidInputError("curvatures contain NaN")
    return curv


def simplify_adaptive(cloud, curvatures, params: SimplifyParams, _clusterer=None) -> SimplifiedCloud:
    """Curvature-adaptive clustering.

    Parameters
    ----------
    cloud : OrientedPointCloud or array_like of shape (n, 3)
    curvatures : array_like of shape (n,)
        Signed curvature per point; only magnitudes are used for sizing,
        and the representative curvature is the plain member mean.
    params : SimplifyParams

    Returns
    -------
    SimplifiedCloud
        ``targets`` records each cluster's target size so the size law can
        be audited; only a cluster that ran out of unassigned points is
        smaller than its target.
    """
    pos = _positions(cloud)
    curv = _check_curvatures(curvatures, len(pos))
    mag = np.abs(curv)
    top = float(mag.max())
    return _run(pos, curv, lambda p: adaptive_target(mag[p], top, params.c, params.T),
                params.seed, _clusterer)


def match_target_size(cloud, target: int, curvatures=None, params: SimplifyParams | None = None,
                      mode: str = "adaptive", rtol: float = 0.02, max_iter: int = 60):
    """Bisect a real-valued ``T`` until the output has ``target`` points within ``rtol``.

    Returns ``(result, T)``. In uniform mode the cluster size is the
    integer ``ceil(T)``, so some targets are unreachable; the closest
    result is returned with a warning in that case.
    """
    pos = _positions(cloud)
    n = len(pos)
    if not 1 <= target <= n:
        raise InvalidInputError(f"target size must lie in [1, {n}], got {target}")
    params = params or SimplifyParams()
    clusterer = _Clusterer(pos)
    if mode == "adaptive":
        curv = _check_curvatures(curvatures, n)

        def run(T):
            p = SimplifyParams(T, params.c, params.curvature_kind, params.seed)
            return simplify_adaptive(pos, curv, p, clusterer)
    elif mode == "uniform":
        curv = None if curvatures is None else np.asarray(curvatures, dtype=float)

        def run(T):
            size = max(1, math.ceil(T))
            return _run(pos, curv, lambda _: size, params.seed, clusterer)
    else:
        raise InvalidInputError(f"unknown mode {mode!r}")

    lo, hi = 1.0, float(n)
    best, best_T = None, None
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        res = run(mid)
        if best is None or abs(len(res) - target) < abs(len(best) - target):
            best, best_T = res, mid
        if abs(len(res) - target) <= rtol * target:
            return res, mid
        if len(res) > target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-9:
            break
    warnings.warn(
        f"closest reachable size is {len(best)} for target {target}", RuntimeWarning, stacklevel=2
    )
    return best, best_T
