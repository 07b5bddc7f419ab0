import numpy as np
import pytest

from topoflow.errors import EmptyMesh, ParseError
from topoflow.obj import load_obj, write_obj
from topoflow.synth import make_box, make_hand


def write(tmp_path, text, name="mesh.obj"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_minimal_file(tmp_path):
    path = write(tmp_path, "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n")
    mesh = load_obj(path)
    assert mesh.num_vertices == 3
    assert mesh.num_faces == 1
    assert mesh.face_uvs is None


def test_quad_fan_triangulation(tmp_path):
    path = write(tmp_path, "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n")
    mesh = load_obj(path)
    np.testing.assert_array_equal(mesh.faces, [[0, 1, 2], [0, 2, 3]])


def test_vt_records_populate_face_uvs(tmp_path):
    text = (
        "v 0 0 0\nv 1 0 0\nv 0 1 0\n"
        "vt 0.1 0.2\nvt 0.9 0.2\nvt 0.1 0.8\n"
        "f 1/1 2/2 3/3\n"
    )
    path = write(tmp_path, text)
    mesh = load_obj(path)
    assert mesh.face_uvs.shape == (1, 3, 2)
    assert ((mesh.face_uvs >= 0) & (mesh.face_uvs <= 1)).all()
    # v axis flipped to image convention
    np.testing.assert_allclose(mesh.face_uvs[0, 0], [0.1, 0.8])


def test_uv_count_against_independent_reader(tmp_path):
    # cross-check against a dumb line scanner on a YCB-style asset
    mesh = make_box()
    path = tmp_path / "box.obj"
    write_obj(path, mesh)

    vt_lines = 0
    f_lines = 0
    for line in path.read_text().splitlines():
        tag = line.split(" ", 1)[0]
        if tag == "vt":
            vt_lines += 1
        elif tag == "f":
            f_lines += 1
    loaded = load_obj(path)
    assert loaded.face_uvs.shape == (f_lines, 3, 2)
    assert vt_lines == 3 * f_lines
    assert ((loaded.face_uvs >= 0) & (loaded.face_uvs <= 1)).all()


def test_vn_and_full_syntax(tmp_path):
    text = (
        "v 0 0 0\nv 1 0 0\nv 0 1 0\n"
        "vt 0 0\nvt 1 0\nvt 0 1\n"
        "vn 0 0 1\n"
        "f 1/1/1 2/2/1 3/3/1\n"
    )
    mesh = load_obj(write(tmp_path, text))
    assert mesh.num_faces == 1
    assert mesh.face_uvs is not None


def test_negative_indices(tmp_path):
    path = write(tmp_path, "v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n")
    mesh = load_obj(path)
    np.testing.assert_array_equal(mesh.faces, [[0, 1, 2]])


def test_empty_mesh(tmp_path):
    with pytest.raises(EmptyMesh):
        load_obj(write(tmp_path, "v 0 0 0\nv 1 0 0\n"))


@pytest.mark.parametrize(
    "text,fragment",
    [
        ("v 0 0\nf 1 1 1\n", "'v' record needs 3"),
        ("v 0 0 zero\n", "bad float"),
        ("v 0 0 0\nf 1 2 3\n", "out of range"),
        ("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2\n", "face with 2 corners"),
        ("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 0 1 2\n", "index 0"),
    ],
)
def test_parse_errors(tmp_path, text, fragment):
    with pytest.raises(ParseError) as err:
        load_obj(write(tmp_path, text))
    assert fragment in str(err.value)


def test_mixed_uv_faces_rejected(tmp_path):
    text = (
        "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\n"
        "vt 0 0\nvt 1 0\nvt 0 1\n"
        "f 1/1 2/2 3/3\nf 1 2 4\n"
    )
    with pytest.raises(ParseError):
        load_obj(write(tmp_path, text))


def test_comments_and_blanks(tmp_path):
    text = "# header\n\nv 0 0 0  # inline\nv 1 0 0\nv 0 1 0\nf 1 2 3\n"
    mesh = load_obj(write(tmp_path, text))
    assert mesh.num_vertices == 3


@pytest.mark.parametrize("mesh", [make_box(), make_box(with_uvs=False), make_hand()])
def test_round_trip(tmp_path, mesh):
    first = tmp_path / "a.obj"
    second = tmp_path / "b.obj"
    write_obj(first, mesh)
    loaded = load_obj(first)
    write_obj(second, loaded)
    again = load_obj(second)
    np.testing.assert_allclose(loaded.vertices, mesh.vertices, atol=1e-6)
    np.testing.assert_allclose(again.vertices, loaded.vertices, atol=1e-6)
    np.testing.assert_array_equal(again.faces, loaded.faces)
    np.testing.assert_array_equal(loaded.faces, mesh.faces)
    if mesh.face_uvs is not None:
        np.testing.assert_allclose(loaded.face_uvs, mesh.face_uvs, atol=1e-6)
    else:
        assert loaded.face_uvs is None
