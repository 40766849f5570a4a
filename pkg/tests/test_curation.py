import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cuboidlayout.curation import (
    CurationConfig,
    avoid_intersections,
    curate_dataset,
    overlap_gradient,
    total_overlap,
)
from cuboidlayout.errors import ValidationError
from cuboidlayout.geometry import Cuboid
from cuboidlayout.metrics import scene_iou_matrix
from cuboidlayout.scene import Pose, SceneObject, save_scene
from cuboidlayout.synthetic import make_dataset, simple_scene, unit_cube_object

FULL = (Cuboid((0.5, 0.5, 0.5), (1, 1, 1)),)


def pair(offset=0.5):
    return simple_scene([unit_cube_object((0, 0.5, 0), obj_id="a"), unit_cube_object((offset, 0.5, 0), obj_id="b")])


def solid(scene):
    """Same layout with every object reduced to one full box."""
    return scene.replace_objects([SceneObject(o.label, o.pose, FULL, o.id) for o in scene.objects])


def shifted(scene, i, dx, dz):
    objs = list(scene.objects)
    x, y, z = objs[i].pose.translation
    objs[i] = objs[i].with_translation((x + dx, y, z + dz))
    return scene.replace_objects(objs)


def test_total_overlap_values():
    assert total_overlap(pair(3.0)) == 0.0
    assert total_overlap(pair()) == pytest.approx(1 / 3)


def test_total_overlap_equals_matrix_sum():
    scene = make_dataset(1, 1.0, seed=21, n_objects=(6, 6))[0]
    assert total_overlap(scene) == float(np.sum(scene_iou_matrix(scene).upper()))


def test_gradient_isolated_object_is_zero():
    assert overlap_gradient(pair(3.0), 1) == (0.0, 0.0)


def test_gradient_matches_slab_formula():
    # Along x the pair IoU is (1 - d) / (1 + d) for center distance d < 1.
    gx, gz = overlap_gradient(pair(), 1, 0.01)
    slab = lambda d: (1 - d) / (1 + d)  # noqa: E731
    assert gx == pytest.approx((slab(0.51) - slab(0.49)) / 0.02, abs=1e-12)
    assert gx < 0
    assert gz == 0.0


def test_gradient_at_symmetric_point_vanishes():
    gx, gz = overlap_gradient(pair(0.0), 0)
    assert gx == 0.0 and gz == 0.0


def test_gradient_index_checked():
    with pytest.raises(IndexError):
        overlap_gradient(pair(), 2)


@pytest.mark.parametrize("seed", [3, 8])
def test_gradient_equals_full_scene_difference(seed):
    scene = make_dataset(1, 1.0, seed=seed, n_objects=(5, 5))[0]
    h = 0.01
    for i in range(len(scene.objects)):
        gx, gz = overlap_gradient(scene, i, h)
        fx = (total_overlap(shifted(scene, i, h, 0)) - total_overlap(shifted(scene, i, -h, 0))) / (2 * h)
        fz = (total_overlap(shifted(scene, i, 0, h)) - total_overlap(shifted(scene, i, 0, -h))) / (2 * h)
        assert gx == pytest.approx(fx, abs=1e-9)
        assert gz == pytest.approx(fz, abs=1e-9)


def test_config_validation():
    for bad in ({"eta": 0}, {"clip_norm": -1}, {"max_iters": 0}, {"epsilon_stop": -1}, {"fd_step": 0}):
        with pytest.raises(ValidationError):
            CurationConfig(**bad)


def test_overlap_free_scene_is_untouched():
    scene = pair(3.0)
    out, report = avoid_intersections(scene)
    assert out is scene
    assert report.iterations == 0 and report.converged


def test_two_cubes_separate():
    out, report = avoid_intersections(pair(), CurationConfig(eta=0.05, clip_norm=1.0, max_iters=500))
    assert report.converged
    assert total_overlap(out) <= 1e-4
    xa, xb = out.objects[0].pose.translation[0], out.objects[1].pose.translation[0]
    assert abs(xb - xa) >= 1.0 - 1e-3


def test_symmetric_stationary_point_stalls():
    out, report = avoid_intersections(pair(0.0))
    assert not report.converged
    assert report.stalled
    assert report.final_overlap == pytest.approx(1.0)
    assert out.objects == pair(0.0).objects


def test_y_and_untouched_objects_are_bitwise_preserved():
    scene = simple_scene(
        [
            unit_cube_object((0, 0.5, 0), obj_id="a"),
            unit_cube_object((0.6, 0.5, 0.1), obj_id="b"),
            unit_cube_object((5.123456789, 0.5, 3.3), theta=0.7, obj_id="far"),
        ]
    )
    out, _ = avoid_intersections(scene)
    for o0, o1 in zip(scene.objects, out.objects):
        assert o0.pose.translation[1] == o1.pose.translation[1]
    assert out.objects[2].pose.translation == scene.objects[2].pose.translation


def test_total_overlap_never_increases_on_box_scenes():
    for scene in make_dataset(30, 1.0, seed=11):
        _, report = avoid_intersections(solid(scene))
        assert np.all(np.diff(report.history) <= 0), report.history


@settings(max_examples=15, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(-0.9, 0.9), st.floats(0, math.pi / 2))
def test_pair_descent_property(dx, dz, theta):
    scene = simple_scene([unit_cube_object((0, 0.5, 0)), unit_cube_object((dx, 0.5, dz), theta=theta)])
    out, report = avoid_intersections(scene, CurationConfig(max_iters=200))
    assert report.final_overlap <= report.initial_overlap
    assert [o.pose.translation[1] for o in out.objects] == [0.5, 0.5]


# --- dataset driver ---------------------------------------------------------


def test_clean_dataset_unchanged():
    scenes = make_dataset(5, 0.0, seed=1)
    curated, summary = curate_dataset(scenes)
    assert summary["nirate_before"] == summary["nirate_after"] == 100.0
    assert summary["mean_displacement"] == 0.0
    assert [s.objects for s in curated] == [s.objects for s in scenes]


def test_unreadable_file_is_recorded(tmp_path):
    good = tmp_path / "good.json"
    save_scene(pair(), good)
    bad = tmp_path / "bad.json"
    bad.write_text("{ nope")
    curated, summary = curate_dataset([bad, good])
    assert len(curated) == 1
    assert summary["n_errors"] == 1
    assert summary["scenes"][0]["error"] and summary["scenes"][1]["error"] is None


def test_injected_collisions_are_repaired():
    scenes = make_dataset(10, 0.4, seed=6)
    _, summary = curate_dataset(scenes)
    assert summary["nirate_after"] > summary["nirate_before"]
    assert summary["n_curated"] == 10


def test_parallel_matches_serial():
    scenes = make_dataset(4, 1.0, seed=2)
    a, sa = curate_dataset(scenes, workers=1)
    b, sb = curate_dataset(scenes, workers=2)
    assert a == b
    assert sa == sb


def test_pose_theta_is_not_modified():
    scene = simple_scene([unit_cube_object((0, 0.5, 0), theta=0.3), unit_cube_object((0.4, 0.5, 0), theta=1.1)])
    out, _ = avoid_intersections(scene)
    assert [o.pose.theta for o in out.objects] == [0.3, 1.1]
    assert [o.pose.size for o in out.objects] == [o.pose.size for o in scene.objects]
    assert isinstance(out.objects[0].pose, Pose)


@pytest.mark.xfail(
    strict=True,
    reason="thin-part assemblies make the IoU landscape nonconvex; simultaneous steps raise the overlap "
    "in 3 of 200 scenes (indices 60, 141, 174)",
)
def test_total_overlap_never_increases_on_furniture_scenes():
    increased = []
    for k, scene in enumerate(make_dataset(200, 0.6, seed=0)):
        _, report = avoid_intersections(scene)
        if np.any(np.diff(report.history) > 0):
            increased.append(k)
    assert increased == []
