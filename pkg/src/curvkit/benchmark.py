"""
Error metrics and experiment drivers.

* ``convergence_experiment``: matrix and scalar MSE against ground truth
  over a range of sample sizes, with the log-log slope of the matrix MSE.
* ``compare_methods``: WME against the paraboloid baseline on identical
  neighbourhoods and normals, optionally with position noise.
* ``holdout_evaluation``: ground-truth-free protocol for real scans.
  Curvature estimated on the full cloud serves as the reference, and
  test-point curvature is predicted from the nearest training points.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .cloud import OrientedPointCloud
from .errors import InvalidInputError
from .normals import estimate_normals_pca
from .quadratic import quadratic_field
from .spatial import SpatialIndex
from .surfaces import GroundTruthSample, GroundTruthSurface, add_gaussian_noise, sample_surface
from .wme import CurvatureField, auto_k, estimate_field

METHODS = ("wme", "quad")


@dataclass
class MseReport:
    method: str
    surface: str
    n: int
    k: int
    sigma2: float
    mse_matrix: float
    mse_K: float
    mse_H: float
    seconds: float
    seed: int
    trial: int | None = None
    agg: bool = False


@dataclass
class ConvergenceResult:
    rows: list[MseReport]
    slope: float
    intercept: float
    trials: list[MseReport] = field(default_factory=list)

    @property
    def all_reports(self) -> list[MseReport]:
        return self.trials + self.rows


def matrix_mse(sample: GroundTruthSample, estimates) -> float:
    """Mean squared Frobenius distance between true and estimated ``dg``.

    ``estimates`` is a :class:`CurvatureField` or a sequence of
    :class:`~curvkit.wme.WeingartenEstimate`, one per sample point; truth
    is evaluated in each estimate's own frame.
    """
    if isinstance(estimates, CurvatureField):
        G, frames = estimates.G, estimates.frames
    else:
        estimates = list(estimates)
        G = np.array([e.G for e in estimates])
        frames = np.array([e.frame.as_matrix() for e in estimates])
    if len(G) != len(sample):
        raise InvalidInputError(f"{len(G)} estimates for {len(sample)} sample points")
    truth = sample.shape_operators(frames)
    return float(np.mean(np.sum((truth - G) ** 2, axis=(1, 2))))


def scalar_mse(truth, est) -> float:
    truth = np.asarray(truth, dtype=float)
    est = np.asarray(est, dtype=float)
    if truth.shape != est.shape:
        raise InvalidInputError(f"length mismatch: {truth.shape} vs {est.shape}")
    return float(np.mean((truth - est) ** 2))


def fit_loglog_slope(points: Sequence[tuple[float, float]]) -> tuple[float, float]:
    """Least-squares line through ``(ln n, ln mse)``; returns ``(slope, intercept)``."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
        raise InvalidInputError("need at least two (n, mse) pairs")
    if not np.all(pts > 0) or not np.all(np.isfinite(pts)):
        raise InvalidInputError("log-log fit needs positive finite values")
    x = np.log(pts[:, 0])
    y = np.log(pts[:, 1])
    xc = x - x.mean()
    denom = np.dot(xc, xc)
    if denom == 0:
        raise InvalidInputError("log-log fit needs at least two distinct n")
    slope = float(np.dot(xc, y - y.mean()) / denom)
    return slope, float(y.mean() - slope * x.mean())


def parse_k_rule(rule) -> Callable[[int], int]:
    """``"pow23"`` (``ceil(n^(2/3))``), ``"auto"`` (:func:`auto_k`),
    ``"fixed:K"``, an int, or a callable ``n -> k``."""
    if callable(rule):
        return rule
    if isinstance(rule, int):
        return lambda n: min(rule, n - 1)
    if rule == "pow23":
        return lambda n: min(ceil_pow23(n), n - 1)
    if rule == "auto":
        return auto_k
    if isinstance(rule, str) and rule.startswith("fixed:"):
        try:
            k = int(rule.split(":", 1)[1])
        except ValueError:
            raise InvalidInputError(f"bad k rule {rule!r}") from None
        return lambda n: min(k, n - 1)
    raise InvalidInputError(f"bad k rule {rule!r}; use pow23, auto or fixed:K")


def trial_seed(seed: int, *keys: int) -> int:
    """Independent 32-bit seed for one ``(seed, keys...)`` combination."""
    return int(np.random.SeedSequence([seed, *keys]).generate_state(1)[0])


def estimate(method: str, cloud: OrientedPointCloud, k: int, index: SpatialIndex | None = None,
             local_orientation: bool = True) -> CurvatureField:
    if method == "wme":
        return estimate_field(cloud, k, index=index, local_orientation=local_orientation)
    if method == "quad":
        return quadratic_field(cloud, k, index=index)
    raise InvalidInputError(f"unknown method {method!r}; choose from {METHODS}")


def _timed(method, cloud, k, index=None, local_orientation=True):
    t0 = time.perf_counter()
    f = estimate(method, cloud, k, index, local_orientation)
    return f, time.perf_counter() - t0


def aggregate_reports(reports: list[MseReport]) -> MseReport:
    first = reports[0]
    mean = lambda attr: float(np.mean([getattr(r, attr) for r in reports]))
    return MseReport(first.method, first.surface, first.n, first.k, first.sigma2,
                     mean("mse_matrix"), mean("mse_K"), mean("mse_H"), mean("seconds"),
                     first.seed, None, True)


def convergence_experiment(
    surface: GroundTruthSurface,
    n_list: Sequence[int],
    k_rule="pow23",
    method: str = "wme",
    seed: int = 0,
    trials: int = 3,
) -> ConvergenceResult:
    """Average matrix and scalar MSE per sample size, exact normals.

    Exact outward normals are globally consistent, so no local
    re-orientation is applied. The slope is fitted to the trial-averaged
    matrix MSE.
    """
    n_list = [int(n) for n in n_list]
    if n_list != sorted(n_list):
        raise InvalidInputError("n_list must be ascending")
    if trials < 1:
        raise InvalidInputError("need at least one trial")
    k_of = parse_k_rule(k_rule)
    per_trial, rows = [], []
    for n in n_list:
        k = k_of(n)
        reports = []
        for t in range(trials):
            s = sample_surface(surface, n, trial_seed(seed, n, t))
            f, secs = _timed(method, s.cloud, k, local_orientation=False)
            reports.append(MseReport(
                method, str(surface), n, k, 0.0, matrix_mse(s, f),
                scalar_mse(s.true_K, f.K), scalar_mse(s.true_H, f.H), secs, seed, t,
            ))
        per_trial += reports
        rows.append(aggregate_reports(reports))
    slope, intercept = fit_loglog_slope([(r.n, r.mse_matrix) for r in rows])
    return ConvergenceResult(rows, slope, intercept, per_trial)


def _aligned_pca_normals(noisy: OrientedPointCloud, reference: np.ndarray, k: int, index) -> np.ndarray:
    # PCA signs are arbitrary; align with the true orientation so H is comparable
    est = estimate_normals_pca(noisy, k, index=index).normals
    flip = np.sum(est * reference, axis=1) < 0.0
    est[flip] *= -1.0
    return est


def compare_methods(
    surface: GroundTruthSurface,
    n_list: Sequence[int],
    k: int = 100,
    sigma2_list: Sequence[float] = (0.0,),
    seed: int = 0,
    trials: int = 1,
    normals: str = "auto",
) -> list[tuple[MseReport, MseReport]]:
    """WME and paraboloid-fit errors on identical inputs.

    Parameters
    ----------
    normals : {"auto", "exact", "pca"}
        ``"auto"`` keeps exact normals on clean data and re-estimates them
        by PCA (with the same ``k``) when noise is added. PCA normals are
        sign-aligned with the true normals before use.

    Returns
    -------
    list of (wme_report, quad_report)
        One pair per ``(n, sigma2, trial)``. Errors are measured against
        the clean surface's curvature at the clean sample positions.
        Matrix MSE is only defined with exact normals and is NaN
        otherwise.
    """
    if normals not in ("auto", "exact", "pca"):
        raise InvalidInputError(f"bad normals mode {normals!r}")
    out = []
    for n in n_list:
        kk = min(k, int(n) - 1)
        for s2 in sigma2_list:
            for t in range(trials):
                s = sample_surface(surface, int(n), trial_seed(seed, int(n), t))
                noisy = add_gaussian_noise(s.cloud, s2, trial_seed(seed, int(n), t, 1))
                index = SpatialIndex(noisy.positions)
                use_pca = normals == "pca" or (normals == "auto" and s2 > 0)
                if use_pca:
                    noisy = noisy.with_normals(_aligned_pca_normals(noisy, s.cloud.normals, kk, index))
                pair = []
                for method in METHODS:
                    f, secs = _timed(method, noisy, kk, index, local_orientation=use_pca)
                    mm = float("nan") if use_pca else matrix_mse(s, f)
                    pair.append(MseReport(
                        method, str(surface), int(n), kk, float(s2), mm,
                        scalar_mse(s.true_K, f.K), scalar_mse(s.true_H, f.H), secs, seed, t,
                    ))
                out.append(tuple(pair))
    return out


@dataclass
class HoldoutReference:
    """Full-cloud estimate reused across several train fractions."""

    cloud: OrientedPointCloud
    field: CurvatureField
    method: str
    k_est: int


def holdout_reference(cloud: OrientedPointCloud, k_est: int, method: str = "wme") -> HoldoutReference:
    if cloud.normals is None:
        cloud = cloud.with_normals(estimate_normals_pca(cloud, k_est).normals)
    return HoldoutReference(cloud, estimate(method, cloud, k_est), method, k_est)


def holdout_evaluation(
    cloud: OrientedPointCloud | HoldoutReference,
    train_fraction: float,
    k_est: int = 100,
    k_infer: int = 5,
    seed: int = 0,
    method: str = "wme",
) -> tuple[float, float]:
    """Held-out curvature MSE ``(mse_K, mse_H)``.

    The full-cloud estimate is the reference. A random ``train_fraction``
    of the points is re-estimated on its own, and each remaining point's
    curvature is predicted as the mean over its ``k_infer`` nearest
    training points. With ``train_fraction == 1`` every point is both
    trained on and tested.

    The split is a prefix of one seeded permutation, so calls with the
    same ``seed`` and growing fractions produce nested training sets.
    Pass a :class:`HoldoutReference` to reuse the full-cloud estimate.
    """
    if isinstance(cloud, HoldoutReference):
        ref = cloud
        if ref.method != method or ref.k_est != k_est:
            raise InvalidInputError("reference was built with a different method or k")
    else:
        ref = holdout_reference(cloud, k_est, method)
    if not 0.0 < train_fraction <= 1.0:
        raise InvalidInputError(f"train fraction must lie in (0, 1], got {train_fraction}")
    n = len(ref.cloud)
    perm = np.random.default_rng(seed).permutation(n)
    m = int(round(train_fraction * n))
    train = np.sort(perm[:m])
    test = np.arange(n) if m == n else np.sort(perm[m:])
    if len(test) == 0 or m < 5:
        raise InvalidInputError(f"degenerate split: {m} train / {len(test)} test points")
    if k_infer < 1 or k_infer > m:
        raise InvalidInputError(f"k_infer={k_infer} out of range [1, {m}]")

    sub = ref.cloud.subset(train)
    k_train = min(k_est, m - 1)
    index = SpatialIndex(sub.positions)
    f = estimate(method, sub, k_train, index)
    ids, _ = index.query(ref.cloud.positions[test], k_infer)
    K_pred = f.K[ids].mean(axis=1)
    H_pred = f.H[ids].mean(axis=1)
    return scalar_mse(ref.field.K[test], K_pred), scalar_mse(ref.field.H[test], H_pred)


def holdout_curve(cloud, fractions, k_est=100, k_infer=5, seed=0, method="wme") -> list[tuple[float, float, float]]:
    """``(fraction, mse_K, mse_H)`` for each train fraction, sharing one reference."""
    ref = cloud if isinstance(cloud, HoldoutReference) else holdout_reference(cloud, k_est, method)
    return [(fr, *holdout_evaluation(ref, fr, k_est, k_infer, seed, method)) for fr in fractions]


def count_inversions(values: Sequence[float]) -> int:
    """Adjacent increases in a sequence that should be nonincreasing."""
    return sum(1 for a, b in zip(values, values[1:]) if b > a)


def ceil_pow23(n: int) -> int:
    """Exact ``ceil(n^(2/3))`` in integer arithmetic."""
    k = max(1, int(math.floor(n ** (2.0 / 3.0))) - 1)
    while k ** 3 < n * n:
        k += 1
    return k
