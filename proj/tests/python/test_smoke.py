import json

import numpy as np
import pytest

import aofuse

TINY = {
    "camera": {"width": 24, "height": 18, "pixel_pitch": 0.0016},
    "sonar": {"n_range_bins": 24, "n_azimuth_bins": 12},
    "trajectory": {"n_poses": 3},
    "simulation": {"n_phi": 16},
    "sampling": {"camera_rays": 32, "sonar_bins": 48, "camera_samples": 16, "sonar_elevations": 4,
                 "sonar_radial": 16, "eikonal_uniform": 32},
    "field": {"resolution": 12},
    "training": {"iterations": 15},
    "evaluation": {"n_samples": 500},
}


def test_config_defaults_and_violations():
    cfg = aofuse.resolve_config({})
    assert cfg["trajectory"]["baseline"] == 0.24
    bad = aofuse.config_violations({"trajectory": {"baseline": -1}, "bogus": 1})
    assert sorted(p for p, _ in bad) == ["/bogus", "/trajectory/baseline"]
    with pytest.raises(aofuse.AofuseError, match="BadConfig"):
        aofuse.resolve_config({"seed": "x"})


def test_condition_number_matches_numpy():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(7, 3))
    s = np.linalg.svd(A, compute_uv=False)
    assert aofuse.condition_number(A) == pytest.approx(s[0] / s[-1], rel=1e-10)
    assert aofuse.singular_values(A) == pytest.approx(list(s), rel=1e-10)


def test_conditioning_is_deterministic():
    a = aofuse.conditioning(200, seed=5)
    b = aofuse.conditioning(200, seed=5, threads=2)
    assert a["kappa"].shape == (200, 3)
    assert np.array_equal(a["kappa"], b["kappa"])
    assert np.all(a["kappa"] >= 1.0)


def test_point_metrics():
    pts = np.random.default_rng(1).uniform(-1, 1, size=(100, 3))
    m = aofuse.point_metrics(pts, pts)
    assert m.chamfer_l1 == 0.0
    assert m.precision == 1.0 and m.recall == 1.0


def test_pipeline(tmp_path):
    aofuse.simulate(tmp_path / "data", TINY)
    manifest = json.loads((tmp_path / "data" / "manifest.json").read_text())
    assert len(manifest["frames"]) == 3
    trace = aofuse.reconstruct(tmp_path / "data", tmp_path / "rec", "fused", TINY, seed=3)
    assert len(trace["rows"]) == 15
    assert not trace["diverged"]
    assert (tmp_path / "rec" / "field.ckpt").exists()
    if (tmp_path / "rec" / "mesh.ply").exists():
        v, f = aofuse.read_ply(tmp_path / "rec" / "mesh.ply")
        assert v.shape[1] == 3 and f.shape[1] == 3
    try:
        m = aofuse.evaluate(tmp_path / "rec" / "field.ckpt", tmp_path / "data" / "manifest.json", seed=3,
                            n_samples=500)
    except aofuse.AofuseError as e:
        assert "EmptyMesh" in str(e)
    else:
        assert 0.0 <= m.precision <= 1.0 and m.chamfer_l1 >= 0.0


def test_cli_entry_point(tmp_path):
    assert aofuse.main(["frobnicate"]) == 2
    assert aofuse.main(["conditioning", "--samples", "10", "--out", str(tmp_path / "c")]) == 0
    assert (tmp_path / "c" / "kappa_medians.csv").exists()
