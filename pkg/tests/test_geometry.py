import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uwdepth.errors import InputError
from uwdepth.geometry import (
    CameraIntrinsics,
    PixelGrid,
    RigidPose,
    backproject,
    compose,
    invert,
    load_intrinsics,
    load_pose,
    project,
    relative_pose,
    reproject,
    rotation_about,
    save_intrinsics,
    save_pose,
    warp,
)
from uwdepth.imagecore import DepthMap

angles = st.floats(-np.pi, np.pi, allow_nan=False)
coords = st.floats(-10, 10, allow_nan=False)


def rot_z(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])


@st.composite
def poses(draw):
    axis = draw(st.tuples(coords, coords, coords).filter(lambda a: np.linalg.norm(a) > 1e-3))
    return RigidPose(rotation_about(axis, draw(angles)), np.array(draw(st.tuples(coords, coords, coords))))


def test_backproject_principal_point():
    K = CameraIntrinsics(100, 100, 2, 1)
    pts = backproject(DepthMap.from_array(np.full((3, 5), 2.0)), K)
    assert pts[1, 2].tolist() == [0.0, 0.0, 2.0]


def test_backproject_hand_value():
    K = CameraIntrinsics(100, 100, 50, 50)
    depth = np.ones((51, 151))
    pts = backproject(DepthMap.from_array(depth), K)
    # (u, v) = (150, 50): x = (150 - 50) / 100 = 1
    assert pts[50, 150].tolist() == [1.0, 0.0, 1.0]


def test_backproject_rejects_invalid_depth():
    d = np.ones((2, 2))
    d[0, 0] = 0.0
    with pytest.raises(InputError):
        backproject(DepthMap.from_array(d), CameraIntrinsics(1, 1, 0, 0))
    pts = backproject(DepthMap.from_array(d), CameraIntrinsics(1, 1, 0, 0), strict=False)
    assert np.isnan(pts[0, 0]).all()


def test_intrinsics_positive_focal():
    with pytest.raises(InputError):
        CameraIntrinsics(0, 1, 0, 0)


def test_reproject_identity_is_lattice():
    K = CameraIntrinsics(87.3, 91.1, 20.4, 13.7)
    rng = np.random.default_rng(0)
    depth = DepthMap.from_array(rng.uniform(0.5, 30, (24, 40)))
    grid = reproject(backproject(depth, K), RigidPose.identity(), K)
    lattice = PixelGrid.lattice(24, 40)
    assert (grid.u == lattice.u).all()
    assert (grid.v == lattice.v).all()
    assert grid.inside.all()


def test_reproject_z_translation_scales_radially():
    # Fronto-parallel plane at depth D; the source camera sits tz closer.
    # Similar triangles: offsets from the principal point grow by D / (D - tz).
    K = CameraIntrinsics(50, 50, 20, 15)
    D, tz = 4.0, 1.0
    pts = backproject(DepthMap.from_array(np.full((31, 41), D)), K)
    T = RigidPose(np.eye(3), [0, 0, -tz])
    grid = reproject(pts, T, K)
    v, u = np.mgrid[0:31, 0:41]
    assert np.allclose(grid.u - 20, (u - 20) * D / (D - tz), atol=1e-12)
    assert np.allclose(grid.v - 15, (v - 15) * D / (D - tz), atol=1e-12)


def test_reproject_behind_camera_out_of_bounds():
    K = CameraIntrinsics(10, 10, 1, 1)
    pts = backproject(DepthMap.from_array(np.full((3, 3), 1.0)), K)
    grid = reproject(pts, RigidPose(np.eye(3), [0, 0, -2.0]), K)
    assert not grid.inside.any()
    on_plane = reproject(pts, RigidPose(np.eye(3), [0, 0, -1.0]), K)
    assert not on_plane.inside.any()


@settings(max_examples=40, deadline=None)
@given(
    fx=st.floats(20, 500),
    fy=st.floats(20, 500),
    cx=st.floats(-5, 40),
    cy=st.floats(-5, 30),
    seed=st.integers(0, 2**16),
)
def test_round_trip_lattice(fx, fy, cx, cy, seed):
    K = CameraIntrinsics(fx, fy, cx, cy)
    depth = DepthMap.from_array(np.random.default_rng(seed).uniform(0.01, 100, (12, 17)))
    grid = reproject(backproject(depth, K), RigidPose.identity(), K)
    lattice = PixelGrid.lattice(12, 17)
    assert np.abs(grid.u - lattice.u).max() < 1e-5
    assert np.abs(grid.v - lattice.v).max() < 1e-5


@settings(max_examples=40, deadline=None)
@given(
    point=st.tuples(coords, coords, st.floats(0.1, 50)),
    lam=st.floats(1e-3, 1e3),
)
def test_projection_scale_invariant(point, lam):
    K = CameraIntrinsics(123.0, 97.0, 31.0, 17.0)
    p = np.array(point)[None, None, :]
    a = project(p, K, (64, 64))
    b = project(lam * p, K, (64, 64))
    assert abs(a.u[0, 0] - b.u[0, 0]) < 1e-6
    assert abs(a.v[0, 0] - b.v[0, 0]) < 1e-6


def test_inside_flag_bounds():
    K = CameraIntrinsics(1, 1, 0, 0)
    pts = np.array([[[0, 0, 1], [2, 1, 1], [2.0001, 0, 1], [-0.0001, 0, 1]]], dtype=float)
    grid = project(pts, K, (2, 3))
    assert grid.inside.tolist() == [[True, True, False, False]]


# ---------------------------------------------------------------- warp


def test_warp_identity_bit_exact(rng):
    img = rng.uniform(0, 1, (9, 13, 3))
    out, mask = warp(img, PixelGrid.lattice(9, 13))
    assert mask.all()
    assert (out == img).all()


def test_warp_half_pixel_shift_on_ramp():
    img = np.tile(np.arange(8.0) ** 1.5, (5, 1))[:, :, None]
    lat = PixelGrid.lattice(5, 8)
    u = lat.u + 0.5
    grid = PixelGrid(u, lat.v, u <= 7)
    out, mask = warp(img, grid)
    expected = 0.5 * (img[:, :-1, 0] + img[:, 1:, 0])
    assert np.allclose(out[:, :-1, 0], expected, atol=1e-14)
    assert not mask[:, -1].any()
    assert (out[:, -1] == 0).all()


def test_warp_matches_scalar_bilinear(rng):
    img = rng.uniform(0, 1, (6, 7, 1))
    u = rng.uniform(0, 6, (6, 7))
    v = rng.uniform(0, 5, (6, 7))
    out, _ = warp(img, PixelGrid(u, v, np.ones((6, 7), bool)))
    for i in range(6):
        for j in range(7):
            x, y = u[i, j], v[i, j]
            x0, y0 = int(np.floor(x)), int(np.floor(y))
            x1, y1 = min(x0 + 1, 6), min(y0 + 1, 5)
            ax, ay = x - x0, y - y0
            ref = (
                img[y0, x0, 0] * (1 - ax) * (1 - ay)
                + img[y0, x1, 0] * ax * (1 - ay)
                + img[y1, x0, 0] * (1 - ax) * ay
                + img[y1, x1, 0] * ax * ay
            )
            assert out[i, j, 0] == pytest.approx(ref, abs=1e-14)


def test_warp_fully_outside():
    img = np.ones((4, 4, 3))
    lat = PixelGrid.lattice(4, 4)
    out, mask = warp(img, PixelGrid(lat.u + 100, lat.v, np.zeros((4, 4), bool)))
    assert not mask.any()
    assert (out == 0).all()


def test_warp_shape_mismatch():
    with pytest.raises(InputError):
        warp(np.zeros((4, 4, 3)), PixelGrid.lattice(3, 4))


# ---------------------------------------------------------------- poses


def test_invert_identity():
    inv = invert(RigidPose.identity())
    assert (inv.rotation == np.eye(3)).all()
    assert (inv.translation == 0).all()


def test_invert_pure_translation():
    assert invert(RigidPose(np.eye(3), [1, 2, 3])).translation.tolist() == [-1, -2, -3]


@settings(max_examples=30, deadline=None)
@given(a=angles, b=angles)
def test_compose_z_rotations(a, b):
    c = compose(RigidPose(rot_z(a)), RigidPose(rot_z(b)))
    assert np.abs(c.rotation - rot_z(a + b)).max() < 1e-12


@settings(max_examples=50, deadline=None)
@given(poses())
def test_compose_with_inverse_is_identity(p):
    for c in (compose(p, invert(p)), compose(invert(p), p)):
        assert np.abs(c.matrix - np.eye(4)).max() < 1e-6


def test_pose_validation():
    with pytest.raises(InputError):
        RigidPose(np.diag([1, 1, -1.0]))
    with pytest.raises(InputError):
        RigidPose(2 * np.eye(3))
    with pytest.raises(InputError):
        RigidPose.from_matrix(np.ones((4, 4)))


def test_relative_pose_maps_target_points_into_source():
    target = RigidPose(rotation_about([0, 1, 0], 0.3), [1, 0, 2])
    source = RigidPose(rotation_about([1, 0, 0], -0.2), [0.5, 0.1, 1])
    x_target = np.array([0.2, -0.4, 3.0])
    world = target.apply(x_target)
    assert np.allclose(relative_pose(target, source).apply(x_target), invert(source).apply(world))


def test_json_files(tmp_path):
    K = CameraIntrinsics(100.0, 101.0, 50.0, 40.0, 101, 81)
    save_intrinsics(K, tmp_path / "k.json")
    assert load_intrinsics(tmp_path / "k.json") == K
    p = RigidPose(rotation_about([1, 2, 3], 0.7), [1, 2, 3])
    save_pose(p, tmp_path / "p.json")
    assert np.allclose(load_pose(tmp_path / "p.json").matrix, p.matrix)
    # a bare 4x4 list is accepted too
    (tmp_path / "bare.json").write_text(json.dumps(np.eye(4).tolist()))
    assert (load_pose(tmp_path / "bare.json").matrix == np.eye(4)).all()
    (tmp_path / "bad.json").write_text("{}")
    with pytest.raises(InputError):
        load_pose(tmp_path / "bad.json")
    with pytest.raises(InputError):
        load_intrinsics(tmp_path / "bad.json")
