import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from curvkit import InvalidInputError
from curvkit.simplify import (
    SimplifyParams,
    adaptive_target,
    match_target_size,
    select_curvature,
    simplify_adaptive,
    simplify_uniform,
)
from curvkit.surfaces import Torus, sample_surface


def check_partition(res, pos, curv=None):
    n = len(pos)
    m = len(res)
    assert res.member_map.shape == (n,)
    assert res.member_map.min() == 0 and res.member_map.max() == m - 1
    assert np.array_equal(np.bincount(res.member_map, minlength=m), res.cluster_sizes)
    assert res.cluster_sizes.sum() == n
    assert np.all(res.member_map[res.seeds] == np.arange(m))
    centroid = np.zeros((m, 3))
    np.add.at(centroid, res.member_map, pos)
    assert np.allclose(res.representatives, centroid / res.cluster_sizes[:, None])
    if curv is not None:
        mean = np.bincount(res.member_map, weights=curv, minlength=m) / res.cluster_sizes
        assert np.allclose(res.rep_curvature, mean)


def test_adaptive_target_formula():
    assert adaptive_target(0.0, 1.0, 0.9, 50) == 50
    assert adaptive_target(1.0, 1.0, 0.9, 50) == 5
    assert adaptive_target(0.5, 1.0, 0.9, 50) == math.ceil(0.55 * 50)
    assert adaptive_target(1.0, 1.0, 0.99, 10) == 1
    assert adaptive_target(3.0, 0.0, 0.9, 7.2) == 8


def test_uniform_sizes(rng):
    pos = rng.normal(size=(1003, 3))
    res = simplify_uniform(pos, 10, seed=1)
    check_partition(res, pos)
    assert np.all(res.cluster_sizes[:-1] == 10)
    assert len(res) == 101


def test_t_one_is_identity(rng):
    pos = rng.normal(size=(50, 3))
    res = simplify_uniform(pos, 1)
    assert len(res) == 50
    assert np.allclose(np.sort(res.representatives, axis=0), np.sort(pos, axis=0))


def test_adaptive_ceiling_law_and_partition():
    s = sample_surface(Torus(), 4000, seed=0)
    H = s.true_H
    params = SimplifyParams(T=30, c=0.9)
    res = simplify_adaptive(s.cloud, H, params)
    check_partition(res, s.cloud.positions, H)
    mag = np.abs(H)
    want = [adaptive_target(mag[p], mag.max(), 0.9, 30) for p in res.seeds]
    assert np.array_equal(res.targets, want)
    full = res.cluster_sizes == res.targets
    # only the clusters formed when too few points were left fall short
    assert np.all(res.cluster_sizes <= res.targets)
    assert (~full).sum() <= 1


def test_zero_curvature_is_uniform(rng):
    pos = rng.normal(size=(300, 3))
    a = simplify_adaptive(pos, np.zeros(300), SimplifyParams(T=7, seed=2))
    b = simplify_uniform(pos, 7, seed=2)
    assert np.array_equal(a.member_map, b.member_map)


def test_deterministic(rng):
    pos = rng.normal(size=(400, 3))
    curv = rng.normal(size=400)
    a = simplify_adaptive(pos, curv, SimplifyParams(T=12, seed=5))
    b = simplify_adaptive(pos, curv, SimplifyParams(T=12, seed=5))
    assert np.array_equal(a.member_map, b.member_map)


def test_validation(rng):
    pos = rng.normal(size=(20, 3))
    with pytest.raises(InvalidInputError):
        SimplifyParams(T=0.5)
    with pytest.raises(InvalidInputError):
        SimplifyParams(c=1.0)
    with pytest.raises(InvalidInputError):
        SimplifyParams(curvature_kind="weird")
    curv = np.ones(20)
    curv[3] = np.nan
    with pytest.raises(InvalidInputError):
        simplify_adaptive(pos, curv, SimplifyParams())
    with pytest.raises(InvalidInputError):
        simplify_adaptive(pos, np.ones(5), SimplifyParams())


def test_select_curvature():
    K, H = np.array([1.0, -2.0]), np.array([0.5, 0.1])
    k1, k2 = np.array([2.0, 1.0]), np.array([0.5, -2.0])
    assert np.array_equal(select_curvature("gaussian", K, H), K)
    assert np.array_equal(select_curvature("mean", K, H), H)
    assert np.array_equal(select_curvature("principal-max", K, H, k1, k2), [2.0, 2.0])


def test_match_target_size():
    s = sample_surface(Torus(), 3000, seed=1)
    res, T = match_target_size(s.cloud, 900, s.true_H, SimplifyParams(c=0.9))
    assert abs(len(res) - 900) <= 18
    assert T >= 1


def test_match_target_unreachable_warns(rng):
    pos = rng.normal(size=(100, 3))
    with pytest.warns(RuntimeWarning):
        res, _ = match_target_size(pos, 41, mode="uniform", rtol=0.0)
    assert len(res) in (34, 50)


@given(st.integers(1, 120), st.floats(1, 40), st.floats(0.01, 0.99), st.integers(0, 10))
def test_property_partition(n, T, c, seed):
    rng = np.random.default_rng(seed)
    pos = rng.normal(size=(n, 3))
    curv = rng.normal(size=n)
    res = simplify_adaptive(pos, curv, SimplifyParams(T=T, c=c, seed=seed))
    check_partition(res, pos, curv)
    assert np.all(res.cluster_sizes <= res.targets)
    assert np.sum(res.cluster_sizes < res.targets) <= 1


@pytest.mark.slow
def test_adaptive_keeps_more_points_where_curved():
    s = sample_surface(Torus(5, 2), 20000, seed=0)
    mag = np.abs(s.true_H)
    curved = mag >= np.quantile(mag, 0.75)
    # area-uniform samples: representatives per unit area in the region are
    # proportional to the number of cluster seeds that fall in it
    gains = []
    for seed in range(3):
        ada = simplify_adaptive(s.cloud, s.true_H, SimplifyParams(T=50, c=0.9, seed=seed))
        uni, _ = match_target_size(s.cloud, len(ada), mode="uniform", rtol=0.05,
                                   params=SimplifyParams(seed=seed))
        assert abs(len(uni) - len(ada)) <= 0.05 * len(ada)
        gains.append(curved[ada.seeds].sum() - curved[uni.seeds].sum())
    assert np.mean(gains) > 0
