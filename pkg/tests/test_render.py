import re

import pytest

from cuboidlayout.errors import ValidationError
from cuboidlayout.render import RenderSpec, class_color, render_png, render_topdown, save_svg
from cuboidlayout.scene import FloorPlan
from cuboidlayout.synthetic import make_dataset, simple_scene, unit_cube_object

ROOM = FloorPlan.rectangle(10, 10)


def polygons(svg):
    return re.findall(r'<polygon class="(\w+)"(?: data-label="(\w+)")? points="([^"]+)"', svg)


def coords(points):
    return [tuple(float(v) for v in p.split(",")) for p in points.split()]


def test_empty_scene_draws_only_the_floor():
    polys = polygons(render_topdown(simple_scene([], floor=ROOM)))
    assert [p[0] for p in polys] == ["floor"]
    # 5% margin on 256 px: the 10 m floor spans 12.8 .. 243.2.
    xs, ys = zip(*coords(polys[0][2]))
    assert min(xs) == min(ys) == pytest.approx(12.8)
    assert max(xs) == max(ys) == pytest.approx(243.2)


def test_single_cube_lands_where_projected():
    scene = simple_scene([unit_cube_object((2, 0.5, 3), label="desk")], floor=ROOM)
    polys = polygons(render_topdown(scene))
    assert [p[:2] for p in polys] == [("floor", ""), ("cuboid", "desk")]
    xs, ys = zip(*coords(polys[1][2]))
    # Scale 23.04 px/m and offset 12.8 px.
    assert (min(xs), max(xs)) == (pytest.approx(47.36), pytest.approx(70.4))
    assert (min(ys), max(ys)) == (pytest.approx(70.4), pytest.approx(93.44))


def test_taller_parts_are_painted_later():
    low = unit_cube_object((5, 0.25, 5), label="desk")
    high = unit_cube_object((5, 1.5, 5), label="wardrobe")
    labels = [p[1] for p in polygons(render_topdown(simple_scene([high, low], floor=ROOM)))[1:]]
    assert labels == ["desk", "wardrobe"]


def test_render_is_deterministic():
    scene = make_dataset(1, 1.0, seed=3)[0]
    assert render_topdown(scene) == render_topdown(scene)
    assert class_color("desk") == class_color("desk") != class_color("wardrobe")
    palette = RenderSpec(palette={"desk": "#123456"})
    assert 'fill="#123456"' in render_topdown(simple_scene([unit_cube_object(label="desk")]), palette)


def test_spec_validation():
    with pytest.raises(ValidationError):
        RenderSpec(width=15)
    with pytest.raises(ValidationError):
        RenderSpec(height=8)


def test_file_exports(tmp_path):
    pytest.importorskip("PIL")
    from PIL import Image

    scene = simple_scene([unit_cube_object((2, 0.5, 3), label="desk")], floor=ROOM)
    save_svg(scene, tmp_path / "a.svg")
    assert (tmp_path / "a.svg").read_text() == render_topdown(scene)
    render_png(scene, tmp_path / "a.png", RenderSpec(width=64, height=32))
    img = Image.open(tmp_path / "a.png")
    assert img.size == (64, 32)
    assert img.getpixel((0, 0)) == (255, 255, 255)
