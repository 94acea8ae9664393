import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uwdepth.errors import DegenerateError, InputError
from uwdepth.geometry import CameraIntrinsics, RigidPose, backproject, reproject, warp
from uwdepth.imagecore import DepthMap, luma
from uwdepth.photoloss import (
    SSIM_C1,
    SSIM_C2,
    LossConfig,
    LossMap,
    correlation_loss,
    l1_map,
    local_variation,
    lvw_mask,
    lvw_weighted_loss,
    mean_composite,
    min_composite,
    normalize_lvw,
    reprojection_loss_map,
    ssim_dissimilarity_map,
    total_loss,
    ulap,
)


def _window(x, i, j, k):
    r = k // 2
    padded = np.pad(x, r, mode="edge")
    return padded[i : i + k, j : j + k]


def ssim_oracle(a, b):
    """Scalar-loop SSIM dissimilarity averaged over channels."""
    H, W, C = a.shape
    out = np.zeros((H, W))
    for c in range(C):
        for i in range(H):
            for j in range(W):
                pa = _window(a[:, :, c], i, j, 3)
                pb = _window(b[:, :, c], i, j, 3)
                ma, mb = pa.mean(), pb.mean()
                va, vb = pa.var(), pb.var()
                cov = ((pa - ma) * (pb - mb)).mean()
                s = (2 * ma * mb + SSIM_C1) * (2 * cov + SSIM_C2) / ((ma**2 + mb**2 + SSIM_C1) * (va + vb + SSIM_C2))
                out[i, j] += min(max((1 - s) / 2, 0), 1) / C
    return out


def variance_oracle(x, k):
    H, W = x.shape
    return np.array([[_window(x, i, j, k).var() for j in range(W)] for i in range(H)])


# ---------------------------------------------------------------- L1 / SSIM


def test_l1_examples():
    a = np.zeros((2, 3, 3))
    assert (l1_map(a, a).values == 0).all()
    assert (l1_map(a, np.ones_like(a)).values == 1).all()
    x = np.broadcast_to([0.2, 0.4, 0.6], (2, 2, 3))
    y = np.broadcast_to([0.3, 0.4, 0.5], (2, 2, 3))
    assert np.allclose(l1_map(x, y).values, 0.2 / 3)
    assert l1_map(x, y).values[0, 0] == pytest.approx(0.0667, abs=1e-4)


def test_shape_mismatch():
    with pytest.raises(InputError):
        l1_map(np.zeros((2, 2, 3)), np.zeros((2, 3, 3)))
    with pytest.raises(InputError):
        ssim_dissimilarity_map(np.zeros((2, 2, 3)), np.zeros((2, 2, 1)))


def test_ssim_identical_is_zero(rng):
    a = rng.uniform(0, 1, (8, 9, 3))
    assert np.abs(ssim_dissimilarity_map(a, a).values).max() < 1e-12


def test_ssim_constant_black_vs_white():
    # Flat patches: variance terms reduce to C2 / C2, leaving the luminance term.
    lum = (2 * 0 * 1 + SSIM_C1) / (0 + 1 + SSIM_C1)
    expected = (1 - lum) / 2
    d = ssim_dissimilarity_map(np.zeros((5, 5, 3)), np.ones((5, 5, 3))).values
    assert np.allclose(d, expected, atol=1e-15)
    assert expected == pytest.approx((1 - 1e-4) / 2, abs=1e-8)


def test_ssim_matches_loop_oracle(rng):
    a = rng.uniform(0, 1, (7, 8, 3))
    b = np.clip(a + rng.normal(0, 0.2, a.shape), 0, 1)
    assert np.abs(ssim_dissimilarity_map(a, b).values - ssim_oracle(a, b)).max() < 1e-10


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**16))
def test_ssim_symmetric_and_bounded(seed):
    r = np.random.default_rng(seed)
    a, b = r.uniform(0, 1, (2, 6, 7, 3))
    dab = ssim_dissimilarity_map(a, b).values
    assert np.allclose(dab, ssim_dissimilarity_map(b, a).values, atol=1e-14)
    assert dab.min() >= 0 and dab.max() <= 1
    l1 = l1_map(a, b).values
    assert l1.min() >= 0 and l1.max() <= 1


# ---------------------------------------------------------------- reprojection map


@pytest.mark.parametrize("alpha", [0.0, 0.1, 0.15, 0.85, 1.0])
def test_reprojection_map_identical_zero(rng, alpha):
    a = rng.uniform(0, 1, (6, 6, 3))
    m = reprojection_loss_map(a, a, LossConfig(alpha=alpha))
    assert np.abs(m.values).max() < 1e-12


def test_reprojection_map_alpha_one_is_l1(rng):
    a, b = rng.uniform(0, 1, (2, 6, 7, 3))
    assert (reprojection_loss_map(a, b, LossConfig(alpha=1.0)).values == l1_map(a, b).values).all()


def test_reprojection_map_recomposition(rng):
    a, b = rng.uniform(0, 1, (2, 6, 7, 3))
    m = reprojection_loss_map(a, b, LossConfig(alpha=0.15)).values
    ref = 0.15 * l1_map(a, b).values + 0.85 * ssim_oracle(a, b)
    assert np.abs(m - ref).max() < 1e-10


def test_reprojection_map_respects_mask(rng):
    a, b = rng.uniform(0, 1, (2, 4, 4, 3))
    mask = np.ones((4, 4), bool)
    mask[0, 0] = False
    assert reprojection_loss_map(a, b, LossConfig(), mask).valid.tolist() == mask.tolist()


# ---------------------------------------------------------------- composites


def test_min_composite_examples(rng):
    m = LossMap.full(rng.uniform(size=(3, 4)))
    assert (min_composite([m]).values == m.values).all()
    zero = LossMap.full(np.zeros((3, 4)))
    assert (min_composite([m, zero]).values == 0).all()
    with pytest.raises(InputError):
        min_composite([])


def test_min_composite_brute_force(rng):
    maps = [LossMap(rng.uniform(size=(5, 6)), rng.uniform(size=(5, 6)) > 0.4) for _ in range(3)]
    out = min_composite(maps)
    for i in range(5):
        for j in range(6):
            vals = [m.values[i, j] for m in maps if m.valid[i, j]]
            assert out.valid[i, j] == bool(vals)
            if vals:
                assert out.values[i, j] == min(vals)
    for m in maps:
        both = out.valid & m.valid
        assert (out.values[both] <= m.values[both]).all()


def test_mean_composite(rng):
    a = LossMap(np.full((2, 2), 1.0), [[True, True], [False, False]])
    b = LossMap(np.full((2, 2), 3.0), [[True, False], [True, False]])
    out = mean_composite([a, b])
    assert out.valid.tolist() == [[True, True], [True, False]]
    assert out.values[0].tolist() == [2.0, 1.0]
    assert out.values[1, 0] == 3.0


# ---------------------------------------------------------------- LVW


def test_local_variation_constant_is_zero():
    assert (local_variation(np.full((30, 30, 3), 0.37), 25).values == 0).all()


def test_local_variation_checkerboard():
    board = (np.indices((9, 9)).sum(axis=0) % 2).astype(float)
    lv = local_variation(board, 3).values
    # Interior 3x3 windows hold five of one value and four of the other.
    assert np.allclose(lv[1:-1, 1:-1], (5 / 9) * (4 / 9), atol=1e-12)
    assert np.allclose(lv, variance_oracle(board, 3), atol=1e-12)


def test_local_variation_matches_oracle(rng):
    img = rng.uniform(0, 1, (16, 16, 3))
    for k in (3, 5, 7):
        ref = variance_oracle(luma(img), k)
        assert np.abs(local_variation(img, k).values - ref).max() < 1e-9


def test_local_variation_shift_invariant(rng):
    img = rng.uniform(0, 1, (12, 12))
    a = local_variation(img, 5).values
    b = local_variation(img + 3.0, 5).values
    assert np.abs(a - b).max() < 1e-12


def test_local_variation_errors():
    with pytest.raises(InputError):
        local_variation(np.zeros((10, 10)), 4)
    with pytest.raises(InputError):
        local_variation(np.zeros((10, 10)), 11)


def test_normalize_examples():
    out = normalize_lvw(LossMap.full(np.array([[1.0, 3.0, 5.0]])))
    assert out.values.tolist() == [[0.0, 0.5, 1.0]]
    assert (normalize_lvw(LossMap.full(np.full((2, 2), 4.0))).values == 0).all()
    with pytest.raises(DegenerateError):
        normalize_lvw(LossMap(np.zeros((2, 2)), np.zeros((2, 2), bool)))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**16))
def test_normalized_mask_extrema(seed):
    img = np.random.default_rng(seed).uniform(0, 1, (20, 24, 3))
    w = lvw_mask(img, 5).values
    assert w.min() == 0.0 and w.max() == 1.0


def test_lvw_weighting(rng):
    loss = LossMap(rng.uniform(size=(4, 5)), rng.uniform(size=(4, 5)) > 0.2)
    ones = LossMap.full(np.ones((4, 5)))
    same = lvw_weighted_loss(loss, ones)
    assert (same.values == loss.values).all() and (same.valid == loss.valid).all()
    assert (lvw_weighted_loss(loss, LossMap.full(np.zeros((4, 5)))).values == 0).all()
    w = LossMap(rng.uniform(size=(4, 5)), rng.uniform(size=(4, 5)) > 0.2)
    prod = lvw_weighted_loss(loss, w)
    assert (prod.values == loss.values * w.values).all()
    assert (prod.valid == (loss.valid & w.valid)).all()
    with pytest.raises(InputError):
        lvw_weighted_loss(loss, LossMap.full(np.full((4, 5), 1.5)))
    with pytest.raises(InputError):
        lvw_weighted_loss(loss, LossMap.full(np.ones((5, 4))))


# ---------------------------------------------------------------- ULAP and correlation


def test_ulap_examples():
    px = np.array([[[0.4, 0.4, 0.4], [0.1, 0.5, 0.8], [1.0, 0.0, 0.0]]])
    assert ulap(px).values[0].tolist() == pytest.approx([0.0, 0.7, -1.0], abs=1e-15)
    with pytest.raises(InputError):
        ulap(np.zeros((2, 2)))


def test_ulap_brute_force(rng):
    img = rng.uniform(0, 1, (5, 6, 3))
    u = ulap(img).values
    for i in range(5):
        for j in range(6):
            r, g, b = img[i, j]
            assert u[i, j] == max(b, g) - r


def test_correlation_examples(rng):
    d = DepthMap.from_array(rng.uniform(1, 10, (6, 7)))
    assert correlation_loss(d, LossMap.full(d.values)) == pytest.approx(0.0, abs=1e-12)
    assert correlation_loss(d, LossMap.full(-d.values)) == pytest.approx(2.0, abs=1e-12)
    assert correlation_loss(d, LossMap.full(3.5 * d.values - 7)) == pytest.approx(0.0, abs=1e-9)


def test_correlation_degenerate(rng):
    d = DepthMap.from_array(rng.uniform(1, 10, (4, 4)))
    with pytest.raises(DegenerateError):
        correlation_loss(d, LossMap.full(np.full((4, 4), 0.3)))
    with pytest.raises(DegenerateError):
        correlation_loss(DepthMap.from_array(np.full((4, 4), 2.0)), LossMap.full(rng.uniform(size=(4, 4))))
    one_valid = np.zeros((4, 4), bool)
    one_valid[0, 0] = True
    with pytest.raises(DegenerateError):
        correlation_loss(d, LossMap(rng.uniform(size=(4, 4)), one_valid))


def test_correlation_uses_joint_validity():
    d = DepthMap.from_array(np.array([[1.0, 2.0, 3.0, 0.0]]))
    prior = LossMap(np.array([[1.0, 2.0, 3.0, 100.0]]), np.array([[True, True, True, True]]))
    assert correlation_loss(d, prior) == pytest.approx(0.0, abs=1e-15)


@settings(max_examples=40, deadline=None)
@given(
    seed=st.integers(0, 2**16),
    a=st.floats(0.01, 100),
    b=st.floats(-100, 100),
    c=st.floats(0.01, 100),
)
def test_correlation_affine_invariance(seed, a, b, c):
    r = np.random.default_rng(seed)
    d = r.uniform(1, 10, (5, 5))
    u = 0.3 * d + r.normal(0, 1, (5, 5))
    base = correlation_loss(DepthMap.from_array(d), LossMap.full(u))
    moved = correlation_loss(DepthMap.from_array(c * d), LossMap.full(a * u + b))
    assert 0 <= base <= 2
    assert abs(base - moved) < 1e-9


# ---------------------------------------------------------------- total loss

K = CameraIntrinsics(40.0, 40.0, 15.5, 11.5)


def test_total_static_identical_is_zero(rng):
    img = rng.uniform(0, 1, (24, 32, 3))
    depth = DepthMap.from_array(rng.uniform(1, 5, (24, 32)))
    res = total_loss(img, [img, img], depth, [RigidPose(), RigidPose()], K, LossConfig(lvw_window=7, corr_weight=0))
    assert res.total == 0.0
    assert res.correlation is None


def test_total_adds_weighted_correlation():
    # Red channel proportional to depth, blue/green zero: ULAP = -R, perfectly anti-correlated.
    depth = np.linspace(1, 5, 24 * 32).reshape(24, 32)
    img = np.zeros((24, 32, 3))
    img[..., 0] = depth / 5
    res = total_loss(img, [img], DepthMap.from_array(depth), [RigidPose()], K, LossConfig(lvw_window=7, corr_weight=1e-5))
    assert res.correlation == pytest.approx(2.0, abs=1e-12)
    assert res.total == pytest.approx(2e-5, abs=1e-16)


def test_total_reduces_to_mean_reprojection(rng):
    img_t = rng.uniform(0, 1, (24, 32, 3))
    img_s = rng.uniform(0, 1, (24, 32, 3))
    depth = DepthMap.from_array(rng.uniform(2, 4, (24, 32)))
    T = RigidPose(np.eye(3), [0.05, -0.02, 0.1])
    cfg = LossConfig(alpha=0.15, use_lvw=False, corr_weight=0)
    res = total_loss(img_t, [img_s], depth, [T], K, cfg)
    warped, mask = warp(img_s, reproject(backproject(depth, K), T, K))
    ref = 0.15 * np.abs(img_t - warped).mean(axis=2) + 0.85 * ssim_oracle(img_t, warped)
    assert res.total == pytest.approx(ref[mask].mean(), abs=1e-10)


def test_total_monotone_in_corr_weight(rng):
    img = rng.uniform(0, 1, (24, 32, 3))
    src = np.roll(img, 1, axis=1)
    depth = DepthMap.from_array(rng.uniform(1, 5, (24, 32)))
    totals = [
        total_loss(img, [src], depth, [RigidPose()], K, LossConfig(lvw_window=5, corr_weight=w)).total
        for w in (0.0, 1e-5, 1e-3, 0.1, 1.0)
    ]
    assert all(b >= a for a, b in zip(totals, totals[1:]))


def test_total_min_composite_vs_mean(rng):
    img = rng.uniform(0, 1, (24, 32, 3))
    depth = DepthMap.from_array(np.full((24, 32), 3.0))
    srcs = [img, rng.uniform(0, 1, img.shape)]
    poses = [RigidPose(), RigidPose()]
    cfg = LossConfig(lvw_window=5, corr_weight=0)
    assert total_loss(img, srcs, depth, poses, K, cfg).total == 0.0
    assert total_loss(img, srcs, depth, poses, K, cfg.with_(use_min_composite=False)).total > 0


def test_total_errors(rng):
    img = rng.uniform(0, 1, (24, 32, 3))
    depth = DepthMap.from_array(np.ones((24, 32)))
    with pytest.raises(InputError):
        total_loss(img, [], depth, [], K)
    with pytest.raises(InputError):
        total_loss(img, [img], depth, [], K)
    with pytest.raises(InputError):
        total_loss(img, [img], DepthMap.from_array(np.ones((3, 3))), [RigidPose()], K)


# ---------------------------------------------------------------- config


def test_config_defaults_and_validation():
    cfg = LossConfig()
    assert (cfg.alpha, cfg.lvw_window, cfg.corr_weight, cfg.use_min_composite) == (0.1, 25, 1e-5, True)
    for bad in ({"alpha": 1.5}, {"alpha": -0.1}, {"lvw_window": 4}, {"lvw_window": 1}, {"corr_weight": -1}):
        with pytest.raises(InputError):
            LossConfig(**bad)


def test_config_files(tmp_path):
    (tmp_path / "c.json").write_text(json.dumps({"alpha": 0.15, "lvw_window": 9}))
    assert LossConfig.from_file(tmp_path / "c.json") == LossConfig(alpha=0.15, lvw_window=9)
    (tmp_path / "c.toml").write_text("[loss]\nalpha = 0.0\ncorr_weight = 0.001\nuse_min_composite = false\n")
    assert LossConfig.from_file(tmp_path / "c.toml") == LossConfig(alpha=0.0, corr_weight=1e-3, use_min_composite=False)
    (tmp_path / "bad.json").write_text(json.dumps({"alhpa": 0.1}))
    with pytest.raises(InputError):
        LossConfig.from_file(tmp_path / "bad.json")
