import io
import json
import math
import struct

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from nfisac.dataset import (CSV_COLUMNS, ChannelSample, add_complex_noise, apply_amplitude_scale,
                            apply_phase_offset, assign_splits, build_manifest, from_real_tensor,
                            read_container, rms, snr_equivalent_db, to_real_tensor, write_container,
                            write_labels_csv)
from nfisac.exceptions import ContainerError, InvalidConfigError
from nfisac.targets import GroundTruth


def _sample(rng, i, mesh="car-000", shape=(3, 4, 2)):
    H = (rng.normal(size=shape) + 1j * rng.normal(size=shape)).astype(np.complex64)
    truth = GroundTruth(i % 2, 10.0 + i, 0.1 * i, (10.0 + i, 0.0))
    return ChannelSample(H, truth, mesh, seed=i, metadata={"k": i}, sample_id=f"s{i:06d}")


def test_real_tensor_examples():
    H = np.array([[[1 + 2j]]])
    R = to_real_tensor(H)
    assert R.shape == (2, 1, 1, 1) and R[0, 0, 0, 0] == 1 and R[1, 0, 0, 0] == 2
    assert np.all(to_real_tensor(np.ones((2, 2, 2), complex))[1] == 0)


@given(arrays(np.complex64, (2, 3, 4), elements=st.complex_numbers(max_magnitude=1e6, allow_nan=False,
                                                                    width=64)))
def test_real_tensor_roundtrip_bit_exact(H):
    back = from_real_tensor(to_real_tensor(H))
    assert back.dtype == np.complex64
    assert back.tobytes() == H.tobytes()


def test_noise_examples(rng):
    s = _sample(rng, 0)
    same, sigma = add_complex_noise(s, 0.0, seed=1)
    assert same is s and sigma == 0.0
    assert snr_equivalent_db(0.10) == pytest.approx(20.0, abs=1e-12)
    assert snr_equivalent_db(0.0) == math.inf
    with pytest.raises(InvalidConfigError):
        add_complex_noise(s, -0.1)


def test_noise_level_statistics():
    rng = np.random.default_rng(0)
    H = rng.normal(size=(100, 100, 100)) + 1j * rng.normal(size=(100, 100, 100))
    noisy, sigma = add_complex_noise(H, 0.05, seed=3)
    ratio = rms(noisy - H) / rms(H)
    assert ratio == pytest.approx(0.05, rel=0.01)
    assert sigma == pytest.approx(0.05 * rms(H))
    again, _ = add_complex_noise(H, 0.05, seed=3)
    np.testing.assert_array_equal(noisy, again)


def test_phase_offset_properties(rng):
    s = _sample(rng, 1)
    assert np.array_equal(apply_phase_offset(s, 0.0).tensor, s.tensor)
    H = s.tensor.astype(np.complex128)
    for phi in (0.3, -2.0, 5.0):
        rot = apply_phase_offset(H, phi)
        np.testing.assert_allclose(np.abs(rot), np.abs(H), rtol=1e-12)
        assert rms(rot) == pytest.approx(rms(H), rel=1e-12)
    np.testing.assert_allclose(apply_phase_offset(apply_phase_offset(H, math.pi), math.pi), H, atol=1e-12)
    # phase then zero noise equals phase alone
    ph = apply_phase_offset(s, 0.4)
    assert add_complex_noise(ph, 0.0)[0] is ph


def test_amplitude_scale(rng):
    s = _sample(rng, 2)
    out = apply_amplitude_scale(s, 0.1, seed=4)
    f = out.metadata["amplitude_scale"]
    assert 0.9 <= f <= 1.1
    np.testing.assert_allclose(out.tensor, s.tensor * np.float32(f), rtol=1e-6)


def test_split_examples():
    assert set(assign_splits(["m"]).values()) <= {"train", "val", "test"}
    assert len(assign_splits(["m"])) == 1
    assert set(assign_splits(list("abcdef"), (1, 0, 0)).values()) == {"train"}
    meshes = [f"mesh-{i:03d}" for i in range(100)]
    split = assign_splits(meshes, (0.8, 0.1, 0.1), seed=2)
    counts = {name: sum(v == name for v in split.values()) for name in ("train", "val", "test")}
    assert counts == {"train": 80, "val": 10, "test": 10}
    assert set(split) == set(meshes)
    assert split == assign_splits(list(reversed(meshes)), (0.8, 0.1, 0.1), seed=2)
    with pytest.raises(InvalidConfigError):
        assign_splits(meshes, (0.5, 0.1, 0.1))


def _write(samples, path, splits=None):
    manifest = build_manifest(samples, splits)
    write_container(samples, manifest, path)
    return manifest


def test_container_roundtrip_bit_exact(tmp_path, rng):
    samples = [_sample(rng, i, mesh=f"car-{i % 2:03d}") for i in range(3)]
    p1, p2 = tmp_path / "a.nfct", tmp_path / "b.nfct"
    manifest = _write(samples, p1)
    back, m2 = read_container(p1)
    for a, b in zip(samples, back):
        assert a.tensor.tobytes() == b.tensor.tobytes()
        assert a.truth == b.truth and a.sample_id == b.sample_id and a.metadata == b.metadata
    assert m2.splits == manifest.splits
    write_container(back, m2, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_empty_container(tmp_path):
    p = tmp_path / "e.nfct"
    _write([], p)
    samples, manifest = read_container(p)
    assert samples == [] and manifest.records == []


def test_container_layout_and_offsets(tmp_path, rng):
    samples = [_sample(rng, i) for i in range(4)]
    p = tmp_path / "c.nfct"
    _write(samples, p)
    data = p.read_bytes()
    magic, version, hlen = struct.unpack_from("<4sII", data, 0)
    assert magic == b"NFCT" and version == 1
    header = json.loads(data[12:12 + hlen])
    base = 12 + hlen
    covered = np.zeros(len(data) - base, dtype=int)
    for rec, s in zip(header["records"], samples):
        lo, hi = base + rec["offset"], base + rec["offset"] + rec["length"]
        covered[rec["offset"]:rec["offset"] + rec["length"]] += 1
        # interleaved little-endian float32 re/im, row-major [rx][tx][k]
        raw = np.frombuffer(data[lo:hi], dtype="<f4").reshape(s.shape + (2,))
        np.testing.assert_array_equal(raw[..., 0], s.tensor.real)
        np.testing.assert_array_equal(raw[..., 1], s.tensor.imag)
    assert np.all(covered == 1)


@pytest.mark.parametrize("mutate,match", [
    (lambda d: b"XXXX" + d[4:], "NFCT"),
    (lambda d: d[:4] + struct.pack("<I", 9) + d[8:], "version"),
    (lambda d: d[:-5], "truncated"),
    (lambda d: d + b"\0", "trailing"),
    (lambda d: d[:6], "truncated"),
])
def test_corrupted_containers(tmp_path, rng, mutate, match):
    p = tmp_path / "c.nfct"
    _write([_sample(rng, 0)], p)
    p.write_bytes(mutate(p.read_bytes()))
    with pytest.raises(ContainerError, match=match):
        read_container(p)


def test_manifest_rejects_shape_mismatch_and_overlap(tmp_path, rng):
    samples = [_sample(rng, 0), _sample(rng, 1)]
    manifest = build_manifest(samples)
    manifest.records[1]["shape"] = [1, 1, 1]
    with pytest.raises(ContainerError):
        write_container(samples, manifest, tmp_path / "x.nfct")
    manifest = build_manifest(samples)
    manifest.records[1]["offset"] = 8
    with pytest.raises(ContainerError):
        manifest.validate()


def test_labels_csv(tmp_path, rng):
    samples = [_sample(rng, i) for i in (2, 0, 1)]
    manifest = build_manifest(samples)
    path = tmp_path / "labels.csv"
    write_labels_csv(manifest, path)
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert [line.split(",")[0] for line in lines[1:]] == ["s000000", "s000001", "s000002"]


def test_sample_validation(rng):
    with pytest.raises(InvalidConfigError):
        ChannelSample(np.zeros((2, 2)), GroundTruth(0, 1.0, 0.0, (1.0, 0.0)))
    with pytest.raises(InvalidConfigError):
        ChannelSample(np.zeros((2, 2, 1)), GroundTruth(0, math.nan, 0.0, (1.0, 0.0)))
