import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from splatkit.errors import ParseError
from splatkit.formats.splat_ply import (REQUIRED_PROPERTIES, read_splat_ply,
                                        write_splat_ply)
from splatkit.model import SplatCloud

from conftest import random_cloud


def empty_cloud():
    return SplatCloud(positions=np.zeros((0, 3)), log_scales=np.zeros((0, 3)),
                      rotations=np.zeros((0, 4)), opacity_logits=np.zeros(0),
                      sh_coeffs=np.zeros((0, 3, 16)))


def assert_f32_equal(a, b):
    np.testing.assert_array_equal(a.astype(np.float32), b.astype(np.float32))


def test_property_layout():
    assert len(REQUIRED_PROPERTIES) == 62
    assert REQUIRED_PROPERTIES[:6] == ["x", "y", "z", "nx", "ny", "nz"]
    assert REQUIRED_PROPERTIES[6] == "f_dc_0"
    assert REQUIRED_PROPERTIES[9] == "f_rest_0"
    assert REQUIRED_PROPERTIES[54] == "opacity"
    assert REQUIRED_PROPERTIES[55:58] == ["scale_0", "scale_1", "scale_2"]
    assert REQUIRED_PROPERTIES[58:] == ["rot_0", "rot_1", "rot_2", "rot_3"]


def test_single_gaussian_round_trip(tmp_path):
    cloud = empty_cloud()
    cloud = SplatCloud(positions=np.array([[1.0, 2.0, 3.0]]),
                       log_scales=np.zeros((1, 3)),
                       rotations=np.array([[1.0, 0.0, 0.0, 0.0]]),
                       opacity_logits=np.zeros(1),
                       sh_coeffs=np.zeros((1, 3, 16)))
    p = tmp_path / "one.ply"
    write_splat_ply(cloud, p)
    back = read_splat_ply(p)
    assert back.n == 1
    assert_f32_equal(back.positions, cloud.positions)


def test_large_round_trip_bitwise(tmp_path, rng):
    cloud = random_cloud(10000, rng)
    p = tmp_path / "big.ply"
    write_splat_ply(cloud, p)
    back = read_splat_ply(p)
    assert_f32_equal(back.positions, cloud.positions)
    assert_f32_equal(back.log_scales, cloud.log_scales)
    assert_f32_equal(back.rotations, cloud.rotations)
    assert_f32_equal(back.opacity_logits, cloud.opacity_logits)
    assert_f32_equal(back.sh_coeffs, cloud.sh_coeffs)


def test_write_is_byte_deterministic(tmp_path, rng):
    cloud = random_cloud(100, rng)
    a, b = tmp_path / "a.ply", tmp_path / "b.ply"
    write_splat_ply(cloud, a)
    write_splat_ply(cloud, b)
    assert a.read_bytes() == b.read_bytes()


def test_empty_cloud_round_trip(tmp_path):
    p = tmp_path / "empty.ply"
    write_splat_ply(empty_cloud(), p)
    assert read_splat_ply(p).n == 0


def test_missing_property_fatal(tmp_path, rng):
    p = tmp_path / "c.ply"
    write_splat_ply(random_cloud(2, rng), p)
    data = p.read_bytes()
    # drop the opacity property from the header and its column from the data
    header, _, body = data.partition(b"end_header\n")
    header = header.replace(b"property float opacity\n", b"")
    rec = np.frombuffer(body, dtype=np.float32).reshape(2, 62)
    body = np.delete(rec, 54, axis=1).tobytes()
    p.write_bytes(header + b"end_header\n" + body)
    with pytest.raises(ParseError, match="missing required property: opacity"):
        read_splat_ply(p)


def test_extra_property_skipped_with_warning(tmp_path, rng):
    p = tmp_path / "c.ply"
    write_splat_ply(random_cloud(3, rng), p)
    data = p.read_bytes()
    header, _, body = data.partition(b"end_header\n")
    header = header.replace(b"property float x\n",
                            b"property float x\nproperty float extra_field\n")
    rec = np.frombuffer(body, dtype=np.float32).reshape(3, 62)
    rec2 = np.insert(rec, 1, 99.0, axis=1)
    p.write_bytes(header + b"end_header\n" + rec2.tobytes())
    warnings = []
    back = read_splat_ply(p, warnings=warnings)
    assert back.n == 3
    assert any("extra_field" in w.message for w in warnings)
    np.testing.assert_array_equal(back.positions.astype(np.float32),
                                  rec[:, :3])


def test_ascii_ply_fatal(tmp_path):
    p = tmp_path / "a.ply"
    p.write_bytes(b"ply\nformat ascii 1.0\nelement vertex 0\nend_header\n")
    with pytest.raises(ParseError):
        read_splat_ply(p)


def test_wrong_magic_fatal(tmp_path):
    p = tmp_path / "a.ply"
    p.write_bytes(b"not a ply file")
    with pytest.raises(ParseError):
        read_splat_ply(p)


def test_truncated_payload_fatal(tmp_path, rng):
    p = tmp_path / "t.ply"
    write_splat_ply(random_cloud(5, rng), p)
    data = p.read_bytes()
    p.write_bytes(data[:-10])
    with pytest.raises(ParseError):
        read_splat_ply(p)


@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=0, max_value=40), st.integers(min_value=0, max_value=2 ** 32 - 1))
def test_round_trip_any_size(tmp_path_factory, n, seed):
    root = tmp_path_factory.mktemp("ply")
    cloud = random_cloud(n, np.random.default_rng(seed)) if n else empty_cloud()
    p = root / "c.ply"
    write_splat_ply(cloud, p)
    back = read_splat_ply(p)
    assert back.n == n
    assert_f32_equal(back.positions, cloud.positions)
    assert_f32_equal(back.sh_coeffs, cloud.sh_coeffs)
