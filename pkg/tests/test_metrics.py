import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cuboidlayout.errors import UndefinedMetricError
from cuboidlayout.geometry import Cuboid, intersection_volume
from cuboidlayout.metrics import (
    average_cuboid_iou,
    candidate_pairs,
    ciou,
    ckl,
    cross_entity_intersection,
    metrics_report,
    nirate,
    scene_iou_matrix,
)
from cuboidlayout.scene import Pose, SceneObject
from cuboidlayout.synthetic import make_dataset, simple_scene, unit_cube_object

from oracles import voxel_masks

FULL = (Cuboid((0.5, 0.5, 0.5), (1, 1, 1)),)


def box_object(t, size, theta, label="desk", cuboids=FULL):
    return SceneObject(label, Pose(t, size, theta), cuboids)


def test_single_object_matrix_is_zero():
    two_parts = (Cuboid.from_bounds((0, 0, 0), (1, 0.6, 1)), Cuboid.from_bounds((0, 0.4, 0), (1, 1, 1)))
    m = scene_iou_matrix(simple_scene([box_object((0, 0.5, 0), (1, 1, 1), 0, cuboids=two_parts)]))
    assert not m.values.any()


def test_half_overlap_pair():
    scene = simple_scene([unit_cube_object((0, 0.5, 0)), unit_cube_object((0.5, 0.5, 0))])
    m = scene_iou_matrix(scene).values
    assert m[0, 1] == m[1, 0] == pytest.approx(1 / 3, abs=1e-15)
    assert m[0, 0] == m[1, 1] == 0


def three_object_scene():
    return simple_scene(
        [
            box_object((0, 0.5, 0), (1, 1, 1), 0.0),
            box_object((0.5, 0.6, 0.3), (1, 0.8, 1.2), 0.4),
            box_object((0.2, 0.25, -0.4), (2, 0.5, 1), 1.0),
        ]
    )


def test_iou_matrix_matches_voxel_oracle():
    scene = three_object_scene()
    m = scene_iou_matrix(scene).values
    boxes, _ = scene.world_cuboids()
    masks, _ = voxel_masks(boxes, 256)
    for i in range(3):
        for j in range(i + 1, 3):
            inter = np.count_nonzero(masks[i] & masks[j])
            union = np.count_nonzero(masks[i] | masks[j])
            assert m[i, j] == pytest.approx(inter / union, abs=5e-3)
            assert m[i, j] > 0


def five_object_scene():
    return simple_scene(
        [
            box_object((0, 0.5, 0), (1, 1, 1), 0.0),
            box_object((0.7, 0.4, 0.2), (0.8, 0.8, 1.4), 0.5),
            box_object((-0.6, 0.3, -0.5), (1.2, 0.6, 0.7), -0.3),
            box_object((1.4, 0.5, -0.6), (0.9, 1.0, 0.9), 1.1),
            box_object((0.2, 1.1, 0.1), (1.5, 0.2, 1.5), 0.2),
        ]
    )


def test_ciou_matches_voxel_oracle():
    scene = five_object_scene()
    boxes, owners = scene.world_cuboids()
    masks, cell = voxel_masks(boxes, 256)
    inter = sum(
        np.count_nonzero(masks[i] & masks[j])
        for i in range(len(boxes))
        for j in range(i + 1, len(boxes))
        if owners[i] != owners[j]
    )
    total = sum(np.count_nonzero(m) for m in masks)
    oracle = 1000.0 * inter / total
    assert ciou(scene) == pytest.approx(oracle, rel=0.01)


def test_ciou_forced_arithmetic():
    # Two 5 m^3 slabs sharing 0.01 m^3: total 10, intersection 0.01.
    a = box_object((0, 0.5, 0), (5, 1, 1), 0.0)
    b = box_object((5 - 0.01, 0.5, 0), (5, 1, 1), 0.0)
    scene = simple_scene([a, b])
    assert ciou(scene) == pytest.approx(1.0, rel=1e-9)


def test_ciou_overlap_free_and_undefined():
    scene = simple_scene([unit_cube_object((0, 0.5, 0)), unit_cube_object((3, 0.5, 0))])
    assert ciou(scene) == 0.0
    with pytest.raises(UndefinedMetricError):
        ciou(simple_scene([]))


def test_same_object_overlaps_are_ignored():
    parts = (Cuboid.from_bounds((0, 0, 0), (1, 0.7, 1)), Cuboid.from_bounds((0, 0.3, 0), (1, 1, 1)))
    assert ciou(simple_scene([box_object((0, 0.5, 0), (1, 1, 1), 0.0, cuboids=parts)])) == 0.0


def test_nirate_counts():
    clean = simple_scene([unit_cube_object((0, 0.5, 0)), unit_cube_object((3, 0.5, 0))])
    dirty = simple_scene([unit_cube_object((0, 0.5, 0)), unit_cube_object((0.5, 0.5, 0))])
    assert nirate([clean] * 4) == 100.0
    assert nirate([clean, clean, clean, dirty]) == 75.0
    assert nirate([simple_scene([])]) == 100.0
    with pytest.raises(UndefinedMetricError):
        nirate([])


def test_nirate_threshold_is_inclusive():
    a = box_object((0, 0.5, 0), (5, 1, 1), 0.0)
    b = box_object((5 - 0.01, 0.5, 0), (5, 1, 1), 0.0)
    scene = simple_scene([a, b])  # CIoU == 1.0 up to rounding
    value = ciou(scene)
    assert nirate([scene], threshold=value) == 100.0
    assert nirate([scene], threshold=math.nextafter(value, 0)) == 0.0


def test_curated_suite_raises_nirate():
    from cuboidlayout.curation import curate_dataset

    raw = make_dataset(10, 0.4, seed=5)
    curated, _ = curate_dataset(raw)
    assert nirate(curated) > nirate(raw)


def test_ckl_values():
    assert ckl({"a": 3, "b": 1}, {"a": 3, "b": 1}) == 0.0
    eps = 1e-6
    p = np.array([1 + eps, eps]) / (1 + 2 * eps)
    q = np.array([1 + eps, 1 + eps]) / (2 + 2 * eps)
    expected = 0.01 * float(np.sum(p * np.log(p / q)))
    assert ckl({"A": 1}, {"A": 1, "B": 1}) == pytest.approx(expected, rel=1e-12)
    assert ckl({"A": 1}, {"A": 1, "B": 1}) == pytest.approx(0.00693, abs=1e-5)
    assert math.isfinite(ckl({"Z": 5}, {"A": 1}))
    with pytest.raises(UndefinedMetricError):
        ckl({"A": 1}, {})


def test_average_cuboid_iou_modes():
    scene = simple_scene(
        [unit_cube_object((0, 0.5, 0)), unit_cube_object((0.5, 0.5, 0)), unit_cube_object((5, 0.5, 0))]
    )
    assert average_cuboid_iou(scene) == pytest.approx(1 / 3)
    assert average_cuboid_iou(scene, "all") == pytest.approx(1 / 9)
    assert average_cuboid_iou(simple_scene([])) == 0.0
    with pytest.raises(ValueError):
        average_cuboid_iou(scene, "median")


def test_metrics_report_schema():
    scenes = make_dataset(4, 0.5, seed=2)
    report = metrics_report(scenes, reference=scenes)
    assert set(report) == {"ciou", "nirate", "ckl", "n_scenes", "threshold"}
    assert report["ckl"] == 0.0
    assert report["n_scenes"] == 4
    assert metrics_report(scenes)["ckl"] is None


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_candidate_pairs_never_drop_an_overlap(seed):
    rng = np.random.default_rng(seed)
    objs = [
        box_object(
            (rng.uniform(-2, 2), rng.uniform(0.2, 1), rng.uniform(-2, 2)),
            tuple(rng.uniform(0.2, 1.5, 3)),
            rng.uniform(-math.pi, math.pi),
        )
        for _ in range(8)
    ]
    scene = simple_scene(objs)
    boxes, owners = scene.world_cuboids()
    kept = set(candidate_pairs(boxes, owners))
    for i in range(len(boxes)):
        for j in range(i + 1, len(boxes)):
            if (i, j) not in kept:
                assert intersection_volume(boxes[i], boxes[j]) == 0.0
    inter, total = cross_entity_intersection(scene)
    assert 0.0 <= inter <= total
