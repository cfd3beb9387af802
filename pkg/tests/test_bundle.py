import json

import numpy as np
import pytest

from scenequery.bundle import (load_bundle, pgm_bytes, read_depth, read_mask,
                               read_pgm, read_ply, read_rgb, write_depth,
                               write_mask, write_ply, write_rgb)
from scenequery.errors import BundleError


class TestFormats:
    def test_ply_round_trip_with_color(self, tmp_path):
        rng = np.random.default_rng(0)
        xyz = rng.random((100, 3)).astype(np.float32).astype(np.float64)
        rgb = rng.integers(0, 256, size=(100, 3), dtype=np.uint8)
        path = tmp_path / "c.ply"
        write_ply(path, xyz, rgb)
        cloud = read_ply(path)
        assert np.array_equal(cloud.xyz, xyz)
        assert np.array_equal(cloud.rgb, rgb)

    def test_ply_round_trip_without_color(self, tmp_path):
        xyz = np.array([[1.5, -2.25, 0.125]])
        path = tmp_path / "c.ply"
        write_ply(path, xyz)
        cloud = read_ply(path)
        assert np.array_equal(cloud.xyz, xyz)
        assert cloud.rgb is None

    def test_ply_truncated_rejected(self, tmp_path):
        path = tmp_path / "c.ply"
        write_ply(path, np.random.default_rng(1).random((10, 3)))
        data = path.read_bytes()
        path.write_bytes(data[:-8])
        with pytest.raises(BundleError):
            read_ply(path)

    def test_depth_round_trip(self, tmp_path):
        depth = np.random.default_rng(2).random((24, 32)).astype(np.float32)
        path = tmp_path / "d.depth"
        write_depth(path, depth)
        back = read_depth(path, 32, 24)
        assert np.array_equal(back, depth.astype(np.float64))

    def test_depth_wrong_size_names_problem(self, tmp_path):
        path = tmp_path / "d.depth"
        write_depth(path, np.zeros((4, 4), dtype=np.float32))
        with pytest.raises(BundleError, match="expected"):
            read_depth(path, 10, 10)

    def test_mask_round_trip_16bit(self, tmp_path):
        mask = np.array([[0, 1, 2], [700, 65535, 3]], dtype=np.int64)
        path = tmp_path / "m.png"
        write_mask(path, mask)
        assert np.array_equal(read_mask(path), mask)

    def test_rgb_round_trip(self, tmp_path):
        rgb = np.random.default_rng(3).integers(0, 256, (8, 6, 3), dtype=np.uint8)
        path = tmp_path / "i.png"
        write_rgb(path, rgb)
        assert np.array_equal(read_rgb(path), rgb)

    def test_pgm_round_trip(self, tmp_path):
        occ = np.random.default_rng(4).random((12, 10)) < 0.4
        path = tmp_path / "g.pgm"
        path.write_bytes(pgm_bytes(occ))
        assert np.array_equal(read_pgm(path), occ)


class TestLoadBundle:
    def test_valid_bundle_loads(self, demo_bundle_dir):
        bundle = load_bundle(demo_bundle_dir)
        assert bundle.scene_id == "demo-room"
        assert len(bundle.frames()) == 10
        assert len(bundle.cloud()) > 0
        assert set(bundle.class_names.values()) >= {"chair", "sofa", "vase"}

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(BundleError, match="manifest"):
            load_bundle(tmp_path)

    def test_unsupported_version(self, tmp_path, demo_bundle_dir):
        import shutil
        dst = tmp_path / "copy"
        shutil.copytree(demo_bundle_dir, dst)
        manifest = json.loads((dst / "manifest.json").read_text())
        manifest["version"] = 99
        (dst / "manifest.json").write_text(json.dumps(manifest))
        with pytest.raises(BundleError, match="version"):
            load_bundle(dst)

    def test_corrupt_depth_names_frame(self, tmp_path, demo_bundle_dir):
        import shutil
        dst = tmp_path / "copy"
        shutil.copytree(demo_bundle_dir, dst, ignore=shutil.ignore_patterns("derived"))
        depth = dst / "frames" / "000" / "depth.depth"
        depth.write_bytes(depth.read_bytes()[:100])
        bundle = load_bundle(dst)  # lazy: loading succeeds
        with pytest.raises(BundleError, match="frames/000"):
            bundle.frames()

    def test_missing_frame_file_rejected_at_load(self, tmp_path, demo_bundle_dir):
        import shutil
        dst = tmp_path / "copy"
        shutil.copytree(demo_bundle_dir, dst, ignore=shutil.ignore_patterns("derived"))
        (dst / "frames" / "001" / "instance.png").unlink()
        with pytest.raises(BundleError, match="frames/001"):
            load_bundle(dst)
