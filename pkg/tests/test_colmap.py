import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from splatkit.errors import ParseError
from splatkit.formats.colmap import (CameraModel, SceneBundle,
                                     diagnose_registration, parse_colmap_dir,
                                     read_cameras_txt, read_images_txt,
                                     read_points3d_txt, write_colmap_dir)
from splatkit.formats.image import ImageBuffer, write_image

from conftest import make_intrinsics, make_pose


def write_minimal_dataset(root, n_views=3, drop_view=None):
    (root / "images").mkdir()
    cam = ["# comment", "1 PINHOLE 8 6 10.0 10.0 4.0 3.0"]
    (root / "cameras.txt").write_text("\n".join(cam) + "\n")
    img_lines = []
    for i in range(1, n_views + 1):
        if i == drop_view:
            continue
        angle = 2 * np.pi * i / n_views
        img_lines.append(f"{i} 1.0 0.0 0.0 0.0 {np.cos(angle)} {np.sin(angle)} 4.0 1 v{i}.ppm")
        img_lines.append("1.5 2.5 1 3.5 4.5 -1 5.5 6.5 2")
        write_image(ImageBuffer(np.zeros((6, 8, 3))), root / "images" / f"v{i}.ppm")
    (root / "images.txt").write_text("\n".join(img_lines) + "\n")
    pts = ["1 0.0 0.0 0.0 255 128 0 0.5 1 0 2 1",
           "2 1.0 2.0 3.0 0 0 255 0.1 1 1"]
    (root / "points3D.txt").write_text("\n".join(pts) + "\n")


def test_pinhole_camera_line(tmp_path):
    (tmp_path / "cameras.txt").write_text(
        "1 PINHOLE 1920 1080 1600.0 1600.0 960.0 540.0\n")
    cams, warns = read_cameras_txt(tmp_path / "cameras.txt")
    c = cams[1]
    assert c.model is CameraModel.PINHOLE
    assert (c.width, c.height) == (1920, 1080)
    assert c.fx == c.fy == 1600.0
    assert (c.cx, c.cy) == (960.0, 540.0)
    assert warns == []


def test_simple_pinhole_line(tmp_path):
    (tmp_path / "cameras.txt").write_text("2 SIMPLE_PINHOLE 100 100 50 50 50\n")
    cams, _ = read_cameras_txt(tmp_path / "cameras.txt")
    assert cams[2].fx == cams[2].fy == 50.0
    assert cams[2].cx == cams[2].cy == 50.0


def test_simple_radial_warns(tmp_path):
    (tmp_path / "cameras.txt").write_text(
        "1 SIMPLE_RADIAL 100 100 50 50 50 0.03\n")
    cams, warns = read_cameras_txt(tmp_path / "cameras.txt")
    assert cams[1].radial_k == 0.03
    assert len(warns) == 1


def test_unknown_model_fatal(tmp_path):
    (tmp_path / "cameras.txt").write_text("1 OPENCV 10 10 5 5 5 5 0 0 0 0\n")
    with pytest.raises(ParseError, match="OPENCV"):
        read_cameras_txt(tmp_path / "cameras.txt")


def test_malformed_number_names_line(tmp_path):
    (tmp_path / "cameras.txt").write_text(
        "# c\n1 PINHOLE 10 10 5.0 5.0 x 5.0\n")
    with pytest.raises(ParseError, match="2"):
        read_cameras_txt(tmp_path / "cameras.txt")


def test_identity_pose_maps_points_through(tmp_path):
    (tmp_path / "images.txt").write_text("1 1 0 0 0 0 0 0 1 a.ppm\n\n")
    poses = read_images_txt(tmp_path / "images.txt")
    from splatkit.geom import quat_to_rot
    p = quat_to_rot(poses[0].q) @ np.array([0.0, 0.0, 5.0]) + poses[0].t
    np.testing.assert_allclose(p, [0.0, 0.0, 5.0], atol=1e-15)


def test_observation_counts_only_valid_points(tmp_path):
    (tmp_path / "images.txt").write_text(
        "1 1 0 0 0 0 0 0 1 a.ppm\n1.0 2.0 5 3.0 4.0 -1 5.0 6.0 7\n")
    poses = read_images_txt(tmp_path / "images.txt")
    assert poses[0].num_points2d == 2


def test_quaternion_renormalized(tmp_path):
    (tmp_path / "images.txt").write_text("1 2 0 0 0 0 0 0 1 a.ppm\n\n")
    poses = read_images_txt(tmp_path / "images.txt")
    assert np.linalg.norm(poses[0].q) == pytest.approx(1.0, abs=1e-15)


def test_points_parse(tmp_path):
    (tmp_path / "points3D.txt").write_text(
        "# hdr\n7 1.0 2.0 3.0 255 0 128 0.5 1 0 2 1 3 2\n")
    pts = read_points3d_txt(tmp_path / "points3D.txt")
    np.testing.assert_array_equal(pts.positions, [[1.0, 2.0, 3.0]])
    np.testing.assert_array_equal(pts.colors, [[255.0, 0.0, 128.0]])
    assert pts.track_lengths[0] == 3


def test_parse_dir_cross_links(tmp_path):
    write_minimal_dataset(tmp_path)
    bundle = parse_colmap_dir(tmp_path)
    assert len(bundle.poses) == 3
    assert set(bundle.images) == {"v1.ppm", "v2.ppm", "v3.ppm"}
    assert len(bundle.points) == 2
    assert bundle.poses[0].num_points2d == 2  # the -1 observation dropped


def test_missing_file_fatal(tmp_path):
    write_minimal_dataset(tmp_path)
    (tmp_path / "points3D.txt").unlink()
    with pytest.raises(ParseError, match="points3D"):
        parse_colmap_dir(tmp_path)


def test_missing_image_fatal(tmp_path):
    write_minimal_dataset(tmp_path)
    (tmp_path / "images" / "v2.ppm").unlink()
    with pytest.raises(ParseError, match="v2.ppm"):
        parse_colmap_dir(tmp_path)


def test_diagnose_missing_view(tmp_path):
    write_minimal_dataset(tmp_path, n_views=8, drop_view=5)
    bundle = parse_colmap_dir(tmp_path)
    diags = diagnose_registration(bundle, expected_cameras=8)
    missing = [d for d in diags if d.kind == "missing_view"]
    assert len(missing) == 1
    assert "7 of 8" in missing[0].message


def test_diagnose_clean_rig(tmp_path):
    write_minimal_dataset(tmp_path, n_views=8)
    bundle = parse_colmap_dir(tmp_path)
    diags = diagnose_registration(bundle, expected_cameras=8)
    assert [d for d in diags if d.kind in ("missing_view", "merged_view")] == []


def test_diagnose_merged_views():
    intr = make_intrinsics(camera_id=1)
    poses = [make_pose(center=(2.0, 0.0, 0.0), image_id=1, name="a.ppm"),
             make_pose(center=(2.0, 0.0, 0.0), image_id=2, name="b.ppm"),
             make_pose(center=(-2.0, 0.0, 0.0), image_id=3, name="c.ppm")]
    for p in poses:
        p.num_points2d = 50
    from splatkit.formats.colmap import SparsePoints
    pts = SparsePoints(np.zeros((1, 3)), np.zeros((1, 3)), np.array([2]))
    bundle = SceneBundle({1: intr}, poses, pts, {}, [])
    diags = diagnose_registration(bundle, expected_cameras=3)
    merged = [d for d in diags if d.kind == "merged_view"]
    assert len(merged) == 1
    assert "a.ppm" in merged[0].message and "b.ppm" in merged[0].message


def test_diagnose_few_observations(tmp_path):
    write_minimal_dataset(tmp_path)
    bundle = parse_colmap_dir(tmp_path)
    diags = diagnose_registration(bundle, expected_cameras=3)
    few = [d for d in diags if d.kind == "few_observations"]
    assert len(few) == 3  # every view observes only 2 points


def test_serialize_parse_idempotent(tmp_path):
    write_minimal_dataset(tmp_path)
    b1 = parse_colmap_dir(tmp_path)
    out1 = tmp_path / "o1"
    out2 = tmp_path / "o2"
    write_colmap_dir(b1, out1)
    b2 = parse_colmap_dir(out1)
    write_colmap_dir(b2, out2)
    b3 = parse_colmap_dir(out2)
    for pa, pb in zip(b2.poses, b3.poses):
        np.testing.assert_array_equal(pa.q, pb.q)
        np.testing.assert_array_equal(pa.t, pb.t)
        assert pa.num_points2d == pb.num_points2d
        assert pa.image_name == pb.image_name
    np.testing.assert_array_equal(b2.points.positions, b3.points.positions)
    np.testing.assert_array_equal(b2.points.colors, b3.points.colors)
    np.testing.assert_array_equal(b2.points.track_lengths, b3.points.track_lengths)
    assert b2.intrinsics.keys() == b3.intrinsics.keys()
    for k in b2.intrinsics:
        assert b2.intrinsics[k] == b3.intrinsics[k]
    # re-parse also preserves the first parse's pose data
    for pa, pb in zip(b1.poses, b2.poses):
        np.testing.assert_allclose(pa.q, pb.q, atol=1e-15)
        np.testing.assert_allclose(pa.t, pb.t, atol=1e-15)


@settings(max_examples=50, deadline=None)
@given(st.binary(max_size=300))
def test_parser_never_crashes_unstructured(tmp_path_factory, data):
    root = tmp_path_factory.mktemp("fuzz")
    for name in ("cameras.txt", "images.txt", "points3D.txt"):
        (root / name).write_bytes(data)
    (root / "images").mkdir()
    try:
        parse_colmap_dir(root)
    except ParseError:
        pass
