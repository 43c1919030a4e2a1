import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nfisac.exceptions import InvalidConfigError
from nfisac.targets import (FREE_SPACE, METAL, TIRE, Material, MaterialJitterSpec, VoxelTarget,
                            contrast, ground_truth, load_voxel_file, make_procedural_target, place,
                            place_points, voxel_target_to_dict)

OMEGA = 2 * math.pi * 4.9e9
# sigma / (omega * eps0) for sigma = 1e4 S/m at 4.9 GHz, evaluated independently
METAL_LOSS = 36683.88486637213


def test_contrast_examples():
    assert contrast(FREE_SPACE, OMEGA) == 0
    assert contrast(Material(2.0, 0.0), OMEGA) == 1.0
    chi = contrast(METAL, OMEGA)
    assert chi.real == 2.0
    assert chi.imag == pytest.approx(-METAL_LOSS, rel=1e-12)
    assert chi.imag == pytest.approx(-3.667e4, rel=1e-3)
    with pytest.raises(InvalidConfigError):
        contrast(METAL, 0.0)


@given(a=st.floats(0, 50), b=st.floats(0, 50))
def test_contrast_linear_in_permittivity(a, b):
    ca = contrast(Material(1 + a), OMEGA)
    cb = contrast(Material(1 + b), OMEGA)
    cab = contrast(Material(1 + a + b), OMEGA)
    assert cab == pytest.approx(ca + cb, abs=1e-12)


@pytest.mark.parametrize("eps,sigma", [(0.5, 0.0), (2.0, -1.0), (math.nan, 0.0)])
def test_bad_material(eps, sigma):
    with pytest.raises(InvalidConfigError):
        Material(eps, sigma)


def _brute_shell(nx, ny, nz):
    count = 0
    for i, j, k in itertools.product(range(nx), range(ny), range(nz)):
        if i in (0, nx - 1) or j in (0, ny - 1) or k in (0, nz - 1):
            count += 1
    return count


def test_car_shell_count():
    car = make_procedural_target(1, (4.5, 1.8, 1.5), 0.3)
    assert car.n_voxels == _brute_shell(15, 6, 5) == 294
    assert set(car.voxel_materials) == {METAL, TIRE}
    assert np.max(np.abs(car.voxel_offsets.mean(axis=0))) < 1e-9


def test_motorbike_is_thin_slab():
    bike = make_procedural_target(0, (2.0, 0.7, 1.2), 0.3)
    assert np.ptp(bike.voxel_offsets[:, 1]) == 0
    assert bike.n_voxels == 6 * 4
    assert sum(m == TIRE for m in bike.voxel_materials) > 0


def test_degenerate_and_invalid_targets():
    single = make_procedural_target(1, (0.3, 0.3, 0.3), 0.3)
    assert single.n_voxels == 1
    with pytest.raises(InvalidConfigError):
        make_procedural_target(1, (1.0, 1.0, 1.0), 0.0)
    with pytest.raises(InvalidConfigError):
        make_procedural_target(1, (0.1, 1.0, 1.0), 0.3)
    with pytest.raises(InvalidConfigError):
        make_procedural_target(3, (1.0, 1.0, 1.0), 0.3)


def test_procedural_is_deterministic():
    a = make_procedural_target(1, (4.2, 1.7, 1.4), 0.3)
    b = make_procedural_target(1, (4.2, 1.7, 1.4), 0.3)
    np.testing.assert_array_equal(a.voxel_offsets, b.voxel_offsets)
    assert a.voxel_materials == b.voxel_materials


def test_voxel_target_invariants():
    with pytest.raises(InvalidConfigError):
        VoxelTarget(0, [[0, 0, 0], [0, 0, 0]], (METAL, METAL), 0.3)
    with pytest.raises(InvalidConfigError):
        VoxelTarget(0, [[1, 0, 0]], (METAL,), 0.3)
    with pytest.raises(InvalidConfigError):
        VoxelTarget(0, [[0, 0, 0]], (METAL, METAL), 0.3)


def test_identity_pose_and_rotation_period():
    car = make_procedural_target(1, (4.5, 1.8, 1.5), 0.3)
    scene = place(car, 0.0, (0, 0, 0), MaterialJitterSpec(0.0))
    np.testing.assert_array_equal(scene.world_positions, car.voxel_offsets)
    assert np.all(scene.jitter_factors == 1.0)
    once = place(car, math.pi, (0, 0, 0))
    twice = place(VoxelTarget(1, once.world_positions - once.world_positions.mean(axis=0),
                              car.voxel_materials, 0.3), math.pi, (0, 0, 0))
    np.testing.assert_allclose(twice.world_positions, car.voxel_offsets, atol=1e-12)


@given(heading=st.floats(-10, 10), cx=st.floats(-30, 30), cy=st.floats(-30, 30))
def test_rotation_preserves_distances(heading, cx, cy):
    bike = make_procedural_target(0, (2.0, 0.7, 1.2), 0.3)
    scene = place(bike, heading, (cx, cy, 0.1))
    d0 = np.linalg.norm(bike.voxel_offsets[:, None] - bike.voxel_offsets[None], axis=-1)
    d1 = np.linalg.norm(scene.world_positions[:, None] - scene.world_positions[None], axis=-1)
    np.testing.assert_allclose(d1, d0, atol=1e-12)
    assert -math.pi <= scene.heading < math.pi


def test_jitter_is_seeded_and_bounded():
    car = make_procedural_target(1, (4.5, 1.8, 1.5), 0.3)
    a = place(car, 0.3, (10, 2, 0), MaterialJitterSpec(0.1), seed=7)
    b = place(car, 0.3, (10, 2, 0), MaterialJitterSpec(0.1), seed=7)
    c = place(car, 0.3, (10, 2, 0), MaterialJitterSpec(0.1), seed=8)
    np.testing.assert_array_equal(a.jitter_factors, b.jitter_factors)
    assert not np.array_equal(a.jitter_factors, c.jitter_factors)
    assert a.jitter_factors.min() >= 0.9 and a.jitter_factors.max() <= 1.1
    with pytest.raises(InvalidConfigError):
        MaterialJitterSpec(1.0)


def test_ground_truth_examples():
    gt = ground_truth(place_points([[3, 4, 0]], METAL, 0.1))
    assert gt.range == 5.0 and gt.azimuth == pytest.approx(math.atan2(4, 3), abs=1e-15)
    sym = place(make_procedural_target(1, (4.5, 1.8, 1.5), 0.3), 0.0, (10, 0, 0.5))
    gt = ground_truth(sym)
    assert gt.range == pytest.approx(10.0, abs=1e-9) and gt.azimuth == pytest.approx(0.0, abs=1e-9)
    gt = ground_truth(place_points([[1, 0, 0], [3, 0, 0]], METAL, 0.1))
    assert gt.center_projected == pytest.approx((2.0, 0.0)) and gt.range == 2.0


@given(phi=st.floats(-math.pi, math.pi), r=st.floats(5, 50), az=st.floats(-1, 1))
def test_ground_truth_rotation_equivariance(phi, r, az):
    bike = make_procedural_target(0, (2.0, 0.7, 1.2), 0.3)
    scene = place(bike, 0.4, (r * math.cos(az), r * math.sin(az), 0.2))
    gt = ground_truth(scene)
    R = np.array([[math.cos(phi), -math.sin(phi), 0], [math.sin(phi), math.cos(phi), 0], [0, 0, 1]])
    rotated = place_points(scene.world_positions @ R.T, bike.voxel_materials, 0.3)
    gt2 = ground_truth(rotated)
    assert gt2.range == pytest.approx(gt.range, abs=1e-9)
    diff = (gt2.azimuth - gt.azimuth - phi + math.pi) % (2 * math.pi) - math.pi
    assert abs(diff) < 1e-9


def test_voxel_file_roundtrip(tmp_path):
    car = make_procedural_target(1, (4.5, 1.8, 1.5), 0.3, mesh_id="car-x")
    path = tmp_path / "car.json"
    path.write_text(json.dumps(voxel_target_to_dict(car)))
    back = load_voxel_file(path)
    np.testing.assert_allclose(back.voxel_offsets, car.voxel_offsets, atol=1e-12)
    assert back.voxel_materials == car.voxel_materials and back.mesh_id == "car-x"
    doc = voxel_target_to_dict(car)
    doc["extra"] = 1
    path.write_text(json.dumps(doc))
    with pytest.raises(InvalidConfigError):
        load_voxel_file(path)
