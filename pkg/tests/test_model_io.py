import numpy as np
import pytest

from lod3recon import model_io
from lod3recon.errors import ParseError, ValidationError
from lod3recon.model_io import BuildingSolid, Face, OpeningTemplate, Ring


def test_box_solid_volume_and_validation():
    s = model_io.box_solid("b1", (1.0, 2.0, 0.0), (10.0, 5.0, 4.0))
    assert s.volume() == pytest.approx(200.0, rel=1e-12)
    assert model_io.validate_solid(s) == []
    labels = sorted(f.label for f in s.faces)
    assert labels == ["ground", "roof", "wall", "wall", "wall", "wall"]


def test_box_solid_rejects_bad_size():
    with pytest.raises(ValidationError):
        model_io.box_solid("b", (0, 0, 0), (1.0, 0.0, 1.0))


def test_ring_needs_three_points():
    with pytest.raises(ValidationError):
        Ring(((0, 0, 0), (1, 0, 0)))


def test_face_plane():
    f = model_io.box_solid("b", (0, 0, 0), (2, 3, 4)).face("wall_front")
    n, d = f.plane()
    np.testing.assert_allclose(n, [0, -1, 0], atol=1e-12)
    assert d == pytest.approx(0.0)


def test_validate_detects_flipped_face():
    s = model_io.box_solid("b", (0, 0, 0), (1, 1, 1))
    faces = list(s.faces)
    faces[0] = Face(faces[0].face_id, faces[0].label, faces[0].outer.reversed())
    bad = BuildingSolid("b", 2, tuple(faces))
    assert model_io.validate_solid(bad)


def test_validate_detects_off_plane_ring():
    pts = ((0, 0, 0), (1, 0, 0), (1, 0, 1), (0, 0.01, 1))
    s = model_io.box_solid("b", (0, 0, 0), (1, 1, 1))
    faces = list(s.faces)
    faces[0] = Face("warp", "wall", Ring(pts))
    bad = BuildingSolid("b", 2, tuple(faces))
    assert any("off-plane" in v for v in model_io.validate_solid(bad))


def test_validate_detects_inner_ring_winding():
    s = model_io.box_solid("b", (0, 0, 0), (4, 4, 4))
    wall = s.face("wall_front")
    # same winding as outer: wrong
    inner = Ring(((1, 0, 1), (3, 0, 1), (3, 0, 3), (1, 0, 3)))
    n, _ = wall.plane()
    if float(np.asarray(model_io.geom.newell_area_vector(inner.points)) @ n) < 0:
        inner = inner.reversed()
    faces = [f if f.face_id != "wall_front" else
             Face(f.face_id, f.label, f.outer, (inner,)) for f in s.faces]
    bad = BuildingSolid("b", 2, tuple(faces))
    assert any("wind opposite" in v for v in model_io.validate_solid(bad))


def test_validate_detects_duplicate_face_ids():
    s = model_io.box_solid("b", (0, 0, 0), (1, 1, 1))
    faces = list(s.faces) + [s.faces[0]]
    bad = BuildingSolid("b", 2, tuple(faces))
    assert any("duplicate face id" in v for v in model_io.validate_solid(bad))


def test_solid_file_round_trip(tmp_path):
    s = model_io.box_solid("house_7", (0.125, -3.5, 0.0), (9.33, 5.77, 4.21))
    path = tmp_path / "solid.txt"
    model_io.write_solid(s, path)
    back = model_io.read_solid(path)
    assert back == s  # exact: floats are written with repr


def test_solid_file_round_trip_with_inner_rings(tmp_path):
    s = model_io.box_solid("b", (0, 0, 0), (10, 5, 4))
    inner = Ring(((2, 0, 1), (2, 0, 3), (4, 0, 3), (4, 0, 1)))
    faces = [f if f.face_id != "wall_front" else
             Face(f.face_id, f.label, f.outer, (inner,)) for f in s.faces]
    s2 = BuildingSolid("b", 3, tuple(faces))
    path = tmp_path / "solid.txt"
    model_io.write_solid(s2, path)
    assert model_io.read_solid(path) == s2


@pytest.mark.parametrize("text, fragment", [
    ("", "empty"),
    ("solid b\n", "expected 'solid"),
    ("solid b lod=two\nend\n", "integer"),
    ("solid b lod=2\nend\n", "no faces"),
    ("solid b lod=2\nface f label=wall\nouter 0 0 0 1 0 0\nend\nend\n", "3*k"),
    ("solid b lod=2\nface f label=wall\ninner 0 0 0 1 0 0 1 1 0\nend\nend\n", "misplaced"),
    ("solid b lod=2\nface f label=wall\nouter 0 0 0 1 0 0 1 1 x\nend\nend\n", "bad number"),
    ("solid b lod=2\nface f label=wall\nouter 0 0 0 1 0 0 1 1 0\nend\n", "missing final"),
    ("solid b lod=2\nbogus 1 2 3\nend\n", "unknown keyword"),
])
def test_solid_parse_errors(tmp_path, text, fragment):
    path = tmp_path / "bad.txt"
    path.write_text(text)
    with pytest.raises(ParseError, match=fragment):
        model_io.read_solid(path)


def test_comments_and_blank_lines_ignored(tmp_path):
    path = tmp_path / "solid.txt"
    path.write_text(
        "# prior model\n\nsolid b lod=2  # id and level\n"
        "face f label=wall\n"
        "outer 0 0 0  1 0 0  1 0 1  0 0 1\n"
        "end\nend\n")
    s = model_io.read_solid(path)
    assert s.solid_id == "b" and len(s.faces) == 1


def test_default_templates_validate():
    lib = model_io.default_template_library()
    assert sorted(t.label for t in lib.values()) == ["door", "window"]
    assert lib["flat_panel"].depth == 0.0
    assert lib["mid_pane"].depth == pytest.approx(0.1)


def test_template_rejects_open_mesh():
    a0, a1, a2, a3 = model_io.TEMPLATE_ANCHOR
    with pytest.raises(ValidationError, match="close"):
        OpeningTemplate("broken", "door", 0.0, ((a0, a1, a2),))


def test_template_rejects_bad_label_and_depth():
    tris = model_io.default_template_library()["flat_panel"].triangles
    with pytest.raises(ValidationError):
        OpeningTemplate("t", "balcony", 0.0, tris)
    with pytest.raises(ValidationError):
        OpeningTemplate("t", "door", -0.5, tris)


def test_template_library_round_trip(tmp_path):
    lib = model_io.default_template_library()
    path = tmp_path / "templates.txt"
    model_io.write_template_library(lib, path)
    back = model_io.read_template_library(path)
    assert back == lib


def test_template_parse_errors(tmp_path):
    path = tmp_path / "t.txt"
    path.write_text("template a label=door depth=0\ntri 0 0 0 1 0 0\nend\n")
    with pytest.raises(ParseError, match="9 coordinates"):
        model_io.read_template_library(path)
    path.write_text("end\n")
    with pytest.raises(ParseError, match="stray"):
        model_io.read_template_library(path)
