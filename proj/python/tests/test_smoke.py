import math

import numpy as np
import pytest

import radmesh


def random_points(n, seed):
    return np.random.default_rng(seed).uniform(-1.0, 1.0, size=(n, 3))


def test_triangulate_passes_audit():
    mesh = radmesh.triangulate(random_points(60, 1))
    assert mesh.num_points == 60
    assert mesh.tets.shape == (mesh.num_tets, 4)
    assert mesh.circumcenters.shape == (mesh.num_tets, 3)
    assert mesh.audit()["ok"]


def test_triangulate_rejects_bad_input():
    with pytest.raises(radmesh.Error, match="DimensionMismatch"):
        radmesh.triangulate(np.zeros((5, 2)))
    with pytest.raises(radmesh.Error):
        radmesh.triangulate(np.zeros((3, 3)))


def test_visibility_order_is_a_permutation():
    mesh = radmesh.Mesh(random_points(40, 2))
    order = mesh.visibility_order((3.0, 0.5, -0.2))
    assert sorted(order.tolist()) == list(range(mesh.num_tets))


def test_integrate_segment_matches_constant_color_formula():
    delta, alpha = radmesh.integrate_segment(2.0, 0.0, 0.5, (0.3, 0.6, 0.9), (0.3, 0.6, 0.9))
    assert alpha == pytest.approx(1.0 - math.exp(-1.0), rel=1e-14)
    assert delta == pytest.approx([c * alpha for c in (0.3, 0.6, 0.9)], rel=1e-12)


def test_render_empty_density_shows_background():
    mesh = radmesh.triangulate(random_points(30, 3))
    cam = radmesh.Camera.pinhole(16, 12, 14.0, 14.0, 8.0, 6.0).look_at((0, -3, 0), (0, 0, 0))
    img = radmesh.render(mesh, np.zeros(mesh.num_tets), np.ones((mesh.num_tets, 3)), cam,
                         background=(0.25, 0.5, 0.75))
    assert img.shape == (12, 16, 3)
    assert np.allclose(img, [0.25, 0.5, 0.75])


def test_fisheye_render_of_synthetic_scene():
    scene = radmesh.synthetic_scene("boxes", 1)
    cam = radmesh.Camera.fisheye(24, 24, 24 / math.pi, 12.0, 12.0, math.pi).look_at((0, -3, 0), (0, 0, 0))
    img = scene.render(cam, threads=1)
    assert img.shape == (24, 24, 3)
    assert np.isfinite(img).all()
    assert img.max() > 0.0


def test_train_save_load_extract(tmp_path):
    teacher = radmesh.random_teacher(20, 3)
    cams = radmesh.orbit_cameras(4, 16, 16, distance=2.5, fov_degrees=45.0)
    views = [(c, teacher.render(c, threads=1)) for c in cams]
    config = {
        "train": {"iterations": 30, "densify_every": 15, "threads": 1, "seed": 4},
        "field": {"grid": {"levels": 3, "log2_table_size": 8}, "heads": {"hidden": 8}},
    }
    trainer = radmesh.Trainer(teacher.mesh.points, views, config)
    first = trainer.evaluate()["loss"]
    seen = []
    trainer.run(lambda s: seen.append(s["iteration"]))
    assert seen == list(range(1, 31))
    assert trainer.evaluate()["loss"] < first
    assert trainer.points.shape[0] >= teacher.mesh.num_points

    trainer.save(str(tmp_path / "ck"))
    ck = radmesh.load_checkpoint(str(tmp_path / "ck"))
    assert ck.iteration == 30
    assert np.array_equal(ck.points, trainer.points)
    assert np.allclose(ck.render(cams[0], threads=1), trainer.render(cams[0]))
    surface = ck.extract(cams, threshold=0.0, threads=1)
    assert surface["triangles"].shape[1] == 3
    assert len(surface["open_edges"]) == surface["num_components"]


def test_config_errors_are_reported():
    teacher = radmesh.random_teacher(20, 3)
    cam = radmesh.orbit_cameras(1, 8, 8)[0]
    with pytest.raises(radmesh.Error, match="Format"):
        radmesh.Trainer(teacher.mesh.points, [(cam, np.zeros((8, 8, 3)))], {"train": {"bogus": 1}})
    with pytest.raises(radmesh.Error, match="Io"):
        radmesh.load_checkpoint("/nonexistent/checkpoint")


def test_selftest_passes():
    results = radmesh.selftest(1)
    assert results
    assert all(r["passed"] for r in results), [r["detail"] for r in results if not r["passed"]]
