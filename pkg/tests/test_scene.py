import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cuboidlayout.errors import ValidationError
from cuboidlayout.geometry import Cuboid
from cuboidlayout.scene import (
    MAX_OBJECTS,
    SEP,
    ClassVocabulary,
    FloorPlan,
    Pose,
    Scene,
    SceneObject,
    attribute_vector,
    dumps_scene,
    from_token_sequence,
    load_scene,
    loads_scene,
    save_scene,
    scene_to_json,
    to_token_sequence,
    world_cuboid,
)
from cuboidlayout.synthetic import ASSEMBLIES, make_dataset, simple_scene, unit_cube_object

UNIT_LOCAL = Cuboid((0.5, 0.5, 0.5), (1, 1, 1))


def obj_with(pose, cuboids=(UNIT_LOCAL,), label="desk"):
    return SceneObject(label, pose, cuboids)


def test_world_cuboid_identity():
    w = world_cuboid(obj_with(Pose((0, 0, 0), (1, 1, 1), 0.0)), UNIT_LOCAL)
    assert w.center == (0, 0, 0) and w.extents == (1, 1, 1) and w.theta == 0


def test_world_cuboid_keeps_rotation_separate():
    w = world_cuboid(obj_with(Pose((0, 0, 0), (2, 1, 1), math.pi / 2)), UNIT_LOCAL)
    assert w.extents == (2, 1, 1)
    assert w.theta == math.pi / 2


def test_world_cuboid_affine_chain_by_hand():
    local = Cuboid((0.75, 0.5, 0.5), (0.5, 1, 1))
    w = world_cuboid(obj_with(Pose((1, 0, 2), (2, 2, 2), 0.0), (local,)), local)
    assert w.center == (1.5, 0, 2)
    assert w.extents == (1, 2, 2)


def test_world_cuboid_rotated_offset():
    # Local +x offset of 0.5 m turned by +90 degrees lands on world -z.
    local = Cuboid((0.75, 0.5, 0.5), (0.5, 1, 1))
    w = world_cuboid(obj_with(Pose((0, 0, 0), (2, 1, 1), math.pi / 2), (local,)), local)
    np.testing.assert_allclose(w.center, (0, 0, -0.5), atol=1e-15)


def test_pose_sincos_invariant():
    p = Pose.from_sincos((0, 0, 0), (1, 1, 1), 1.0, 0.0)
    assert p.theta == pytest.approx(math.pi / 2)
    with pytest.raises(ValidationError):
        Pose.from_sincos((0, 0, 0), (1, 1, 1), math.sqrt(0.45), math.sqrt(0.45))
    with pytest.raises(ValidationError):
        Pose((0, 0, 0), (1, 0, 1))


def test_local_cuboids_must_stay_in_unit_cube():
    with pytest.raises(ValidationError):
        obj_with(Pose((0, 0, 0), (1, 1, 1)), (Cuboid((0.5, 0.5, 0.5), (1.2, 1, 1)),))


def test_floor_plan_validation():
    with pytest.raises(ValidationError):
        FloorPlan(((0, 0), (1, 0)))
    with pytest.raises(ValidationError):
        FloorPlan(((0, 0), (0, 1), (1, 1), (1, 0)))  # clockwise
    with pytest.raises(ValidationError):
        FloorPlan(((0, 0), (1, 1), (1, 0), (0, 1)))  # bow tie
    assert FloorPlan.rectangle(2, 3).signed_area() == 6


def test_object_limit():
    with pytest.raises(ValidationError):
        simple_scene([unit_cube_object((k, 0.5, 0)) for k in range(MAX_OBJECTS + 1)])


def test_vocabulary_and_attribute_vector():
    vocab = ClassVocabulary.load()
    assert "double_bed" in vocab
    obj = SceneObject("double_bed", Pose((1, 2, 3), (4, 5, 6), math.pi / 2), ASSEMBLIES["double_bed"])
    vec = attribute_vector(obj, vocab)
    assert len(vec) == len(vocab) + 8
    assert vec[vocab.index("double_bed")] == 1.0 and vec[: len(vocab)].sum() == 1.0
    np.testing.assert_allclose(vec[len(vocab) :], [1, 2, 3, 4, 5, 6, 1, 0], atol=1e-15)
    with pytest.raises(ValidationError):
        vocab.index("spaceship")


# --- tokens -----------------------------------------------------------------


def test_empty_scene_tokens():
    tokens = to_token_sequence(simple_scene([]))
    assert [t.kind for t in tokens] == ["floor"]


def test_three_cuboid_object_tokens_sorted_by_bottom():
    parts = (
        Cuboid.from_bounds((0, 0.6, 0), (1, 1, 1)),
        Cuboid.from_bounds((0, 0, 0), (1, 0.3, 1)),
        Cuboid.from_bounds((0, 0.3, 0), (1, 0.6, 1)),
    )
    tokens = to_token_sequence(simple_scene([obj_with(Pose((0, 1, 0), (1, 2, 1)), parts)]))
    assert [t.kind for t in tokens] == ["floor", "entity", "cuboid", "cuboid", "cuboid"]
    assert tokens[1].class_label == SEP
    bottoms = [t.translation[1] - t.size[1] / 2 for t in tokens[2:]]
    assert bottoms == sorted(bottoms)


def test_permutation_is_seeded():
    scene = simple_scene([unit_cube_object((k * 2.0, 0.5, 0), obj_id=f"o{k}") for k in range(5)])
    plain = to_token_sequence(scene)
    xs = [t.translation[0] for t in plain if t.kind == "entity"]
    assert xs == [0, 2, 4, 6, 8]
    a = to_token_sequence(scene, permute=True, seed=7)
    b = to_token_sequence(scene, permute=True, seed=7)
    assert a == b
    expected = [2.0 * k for k in np.random.default_rng(7).permutation(5)]
    assert [t.translation[0] for t in a if t.kind == "entity"] == expected


def test_token_round_trip_preserves_world_geometry():
    for scene in make_dataset(3, 0.5, seed=4):
        back = from_token_sequence(to_token_sequence(scene))
        assert back.room_type == scene.room_type and back.floor == scene.floor
        assert [o.label for o in back.objects] == [o.label for o in scene.objects]
        for o0, o1 in zip(scene.objects, back.objects):
            w0 = sorted(o0.world_cuboids(), key=lambda w: (w.bottom, w.center[2], w.center[0]))
            for a, b in zip(w0, o1.world_cuboids()):
                np.testing.assert_allclose(a.center, b.center, atol=1e-9)
                np.testing.assert_allclose(a.extents, b.extents, atol=1e-9)


# --- JSON -------------------------------------------------------------------


def test_save_load_round_trip(tmp_path):
    scene = make_dataset(1, 1.0, seed=9)[0]
    save_scene(scene, tmp_path / "s.json")
    back = load_scene(tmp_path / "s.json")
    assert back == scene
    save_scene(back, tmp_path / "t.json")
    assert (tmp_path / "s.json").read_bytes() == (tmp_path / "t.json").read_bytes()


def test_missing_floor_is_reported():
    data = scene_to_json(simple_scene([unit_cube_object()]))
    del data["floor"]
    with pytest.raises(ValidationError, match="floor"):
        loads_scene(json.dumps(data))


def test_bad_sincos_in_json_names_the_pose():
    data = scene_to_json(simple_scene([unit_cube_object()]))
    obj = data["objects"][0]
    del obj["theta"]
    obj["sin_theta"], obj["cos_theta"] = math.sqrt(0.45), math.sqrt(0.45)
    with pytest.raises(ValidationError) as info:
        loads_scene(json.dumps(data))
    assert info.value.field.startswith("objects[0].pose")


def test_sincos_keys_accepted_when_consistent():
    data = scene_to_json(simple_scene([unit_cube_object(theta=0.3)]))
    data["objects"][0].update(sin_theta=math.sin(0.3), cos_theta=math.cos(0.3))
    assert loads_scene(json.dumps(data)).objects[0].pose.theta == pytest.approx(0.3)


def test_invalid_json_text():
    with pytest.raises(ValidationError):
        loads_scene("{not json")


real = st.floats(-50, 50, allow_nan=False, allow_infinity=False)
positive = st.floats(0.01, 10, allow_nan=False)


@st.composite
def scenes(draw):
    objs = []
    for k in range(draw(st.integers(0, 5))):
        pose = Pose((draw(real), draw(real), draw(real)), (draw(positive), draw(positive), draw(positive)), draw(real))
        lo = [draw(st.floats(0, 0.5)) for _ in range(3)]
        hi = [draw(st.floats(0.5, 1)) for _ in range(3)]
        objs.append(SceneObject(draw(st.sampled_from(["desk", "wardrobe"])), pose, (Cuboid.from_bounds(lo, hi),), f"o{k}"))
    return Scene("bedroom", FloorPlan.rectangle(draw(positive), draw(positive), (draw(real), draw(real))), tuple(objs))


@settings(max_examples=60, deadline=None)
@given(scenes())
def test_json_round_trip_property(scene):
    text = dumps_scene(scene)
    back = loads_scene(text)
    assert back == scene
    assert dumps_scene(back) == text
