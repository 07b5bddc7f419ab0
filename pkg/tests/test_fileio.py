import io
import json
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from topoflow.errors import (
    BadMagic,
    FormatError,
    SchemaError,
    TopologyMismatch,
    TruncatedPayload,
    UnsupportedVersion,
)
from topoflow.fileio import (
    load_image_rgba,
    load_png_raw,
    parse_scene,
    read_flow_field,
    read_tflo,
    save_face_map_png,
    save_mask_png,
    save_png,
    write_tflo,
)
from topoflow.flow import FlowField, TopologyMap
from topoflow.obj import write_obj
from topoflow.synth import make_box, make_hand


class TestTfloFormat:
    def test_tiny_flow_byte_layout(self, tmp_path):
        vec = np.array([[[2.0, 3.0]]], dtype=np.float32)
        flow = FlowField(vectors=vec, valid=np.ones((1, 1), bool))
        path = tmp_path / "f.tflo"
        write_tflo(path, flow)
        raw = path.read_bytes()
        assert len(raw) == 20 + 8
        magic, version, w, h, c = struct.unpack_from("<4sIIII", raw)
        assert (magic, version, w, h, c) == (b"TFLO", 1, 1, 1, 2)
        assert raw[20:] == bytes([0x00, 0x00, 0x00, 0x40, 0x00, 0x00, 0x40, 0x40])

    def test_round_trip_with_nans(self, tmp_path):
        rng = np.random.default_rng(0)
        vec = rng.normal(size=(13, 9, 2)).astype(np.float32)
        valid = rng.random((13, 9)) < 0.6
        flow = FlowField(vectors=vec, valid=valid)
        path = tmp_path / "f.tflo"
        write_tflo(path, flow)
        back = read_flow_field(path)
        np.testing.assert_array_equal(back.valid, valid)
        np.testing.assert_array_equal(
            back.vectors[valid], flow.vectors[valid]
        )
        assert np.isnan(back.vectors[~valid]).all()

    def test_payload_size_64x64(self, tmp_path):
        vec = np.zeros((64, 64, 2), dtype=np.float32)
        path = tmp_path / "f.tflo"
        write_tflo(path, FlowField(vectors=vec, valid=np.ones((64, 64), bool)))
        assert path.stat().st_size == 20 + 32768

    def test_topology_magic(self, tmp_path):
        topo = TopologyMap(values=np.zeros((4, 4, 2), dtype=np.float32))
        path = tmp_path / "t.tmap"
        write_tflo(path, topo)
        assert path.read_bytes()[:4] == b"TMAP"
        kind, data = read_tflo(path)
        assert kind == "topology"
        assert data.shape == (4, 4, 2)

    def test_depth_single_channel(self, tmp_path):
        depth = np.linspace(0, 1, 12, dtype=np.float32).reshape(3, 4)
        path = tmp_path / "d.tflo"
        write_tflo(path, depth)
        kind, data = read_tflo(path)
        assert kind == "depth"
        np.testing.assert_array_equal(data[:, :, 0], depth)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "x.tflo"
        path.write_bytes(b"XFLO" + struct.pack("<IIII", 1, 1, 1, 2) + b"\x00" * 8)
        with pytest.raises(BadMagic):
            read_tflo(path)

    def test_truncated_payload(self, tmp_path):
        vec = np.zeros((4, 4, 2), dtype=np.float32)
        path = tmp_path / "f.tflo"
        write_tflo(path, FlowField(vectors=vec, valid=np.ones((4, 4), bool)))
        raw = path.read_bytes()
        path.write_bytes(raw[:-4])
        with pytest.raises(TruncatedPayload):
            read_tflo(path)

    def test_oversize_payload_rejected(self, tmp_path):
        vec = np.zeros((4, 4, 2), dtype=np.float32)
        path = tmp_path / "f.tflo"
        write_tflo(path, FlowField(vectors=vec, valid=np.ones((4, 4), bool)))
        path.write_bytes(path.read_bytes() + b"\x00\x00\x00\x00")
        with pytest.raises(TruncatedPayload):
            read_tflo(path)

    def test_unsupported_version(self, tmp_path):
        path = tmp_path / "v.tflo"
        path.write_bytes(b"TFLO" + struct.pack("<IIII", 7, 1, 1, 2) + b"\x00" * 8)
        with pytest.raises(UnsupportedVersion):
            read_tflo(path)

    def test_bad_channel_count(self, tmp_path):
        path = tmp_path / "c.tflo"
        path.write_bytes(b"TFLO" + struct.pack("<IIII", 1, 1, 1, 5) + b"\x00" * 20)
        with pytest.raises(FormatError):
            read_tflo(path)

    def test_header_too_short(self, tmp_path):
        path = tmp_path / "h.tflo"
        path.write_bytes(b"TFL")
        with pytest.raises(TruncatedPayload):
            read_tflo(path)

    @settings(max_examples=200, deadline=None)
    @given(
        w=st.integers(1, 8),
        h=st.integers(1, 8),
        c=st.sampled_from([1, 2]),
        seed=st.integers(0, 2**31 - 1),
        nan_rate=st.floats(0, 1),
    )
    def test_fuzz_round_trip(self, w, h, c, seed, nan_rate):
        rng = np.random.default_rng(seed)
        data = rng.normal(size=(h, w, c)).astype(np.float32)
        data[rng.random((h, w, c)) < nan_rate] = np.nan
        buf = io.BytesIO()
        write_tflo(buf, data, kind="depth" if c == 1 else "flow")
        buf.seek(0)
        _, back = read_tflo(buf)
        np.testing.assert_array_equal(
            back.view(np.uint32), data.view(np.uint32)
        )


class TestPng:
    def test_rgba_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        img = rng.integers(0, 256, (21, 17, 4), dtype=np.uint8)
        path = tmp_path / "img.png"
        save_png(path, img)
        np.testing.assert_array_equal(load_image_rgba(path), img)

    def test_mask_round_trip(self, tmp_path):
        rng = np.random.default_rng(2)
        mask = rng.random((9, 11)) < 0.5
        path = tmp_path / "mask.png"
        save_mask_png(path, mask)
        back = load_png_raw(path)
        assert back.dtype == np.uint8
        assert set(np.unique(back)) <= {0, 255}
        np.testing.assert_array_equal(back > 0, mask)

    def test_face_map_16bit(self, tmp_path):
        face = np.array([[-1, 0], [70000, 42]], dtype=np.int64)
        path = tmp_path / "face.png"
        save_face_map_png(path, face)
        back = load_png_raw(path)
        assert back.dtype in (np.uint16, np.int32)
        np.testing.assert_array_equal(back, [[0, 1], [65535, 43]])

    def test_deterministic_bytes(self, tmp_path):
        rng = np.random.default_rng(3)
        img = rng.integers(0, 256, (32, 32, 4), dtype=np.uint8)
        p1, p2 = tmp_path / "a.png", tmp_path / "b.png"
        save_png(p1, img)
        save_png(p2, img)
        assert p1.read_bytes() == p2.read_bytes()


def write_scene_files(tmp_path, *, mutate=None, hand_target=None):
    hand = make_hand()
    box = make_box()
    write_obj(tmp_path / "hand_s.obj", hand)
    write_obj(tmp_path / "hand_t.obj", hand_target if hand_target is not None else hand)
    write_obj(tmp_path / "box.obj", box)
    save_png(tmp_path / "tex.png", np.full((8, 8, 4), 200, dtype=np.uint8))
    doc = {
        "camera": {"fx": 200, "fy": 200, "cx": 64, "cy": 64, "width": 128, "height": 128},
        "object_texture": "tex.png",
        "source": {
            "hand_obj": "hand_s.obj",
            "object_obj": "box.obj",
            "object_translation": [0.0, 0.0, 0.6],
        },
        "target": {
            "hand_obj": "hand_t.obj",
            "object_obj": "box.obj",
            "object_translation": [0.01, 0.0, 0.6],
        },
        "output": {"atlas_size": 256},
    }
    if mutate:
        mutate(doc)
    path = tmp_path / "scene.json"
    path.write_text(json.dumps(doc))
    return path


class TestParseScene:
    def test_minimal_config_shared_camera(self, tmp_path):
        path = write_scene_files(tmp_path)
        source, target, options = parse_scene(path)
        assert source.camera == target.camera
        assert source.camera.fx == 200
        assert source.hand is not None and source.object is not None
        assert options["atlas_size"] == 256
        assert options["object_texture"].endswith("tex.png")

    def test_missing_camera_field(self, tmp_path):
        def drop_fx(doc):
            doc["source"]["camera"] = {
                "fy": 200, "cx": 64, "cy": 64, "width": 128, "height": 128
            }
            del doc["camera"]
            doc["target"]["camera"] = {
                "fx": 200, "fy": 200, "cx": 64, "cy": 64, "width": 128, "height": 128
            }

        path = write_scene_files(tmp_path, mutate=drop_fx)
        with pytest.raises(SchemaError) as err:
            parse_scene(path)
        assert err.value.path == "source.camera.fx"

    def test_no_camera_anywhere(self, tmp_path):
        def drop(doc):
            del doc["camera"]

        path = write_scene_files(tmp_path, mutate=drop)
        with pytest.raises(SchemaError) as err:
            parse_scene(path)
        assert "camera" in err.value.path

    def test_topology_mismatch(self, tmp_path):
        other = make_hand()
        other.faces = other.faces[:-1]
        path = write_scene_files(tmp_path, hand_target=other)
        with pytest.raises(TopologyMismatch):
            parse_scene(path)

    def test_missing_obj_file(self, tmp_path):
        def break_path(doc):
            doc["source"]["hand_obj"] = "nope.obj"

        path = write_scene_files(tmp_path, mutate=break_path)
        with pytest.raises(FileNotFoundError):
            parse_scene(path)

    def test_instance_required(self, tmp_path):
        def strip(doc):
            del doc["source"]["hand_obj"]
            del doc["source"]["object_obj"]

        path = write_scene_files(tmp_path, mutate=strip)
        with pytest.raises(SchemaError):
            parse_scene(path)

    def test_hand_presence_must_match(self, tmp_path):
        def strip(doc):
            del doc["target"]["hand_obj"]

        path = write_scene_files(tmp_path, mutate=strip)
        with pytest.raises(SchemaError):
            parse_scene(path)

    def test_rotation_length_checked(self, tmp_path):
        def bad_rot(doc):
            doc["source"]["object_rotation"] = [1, 0, 0]

        path = write_scene_files(tmp_path, mutate=bad_rot)
        with pytest.raises(SchemaError) as err:
            parse_scene(path)
        assert "object_rotation" in err.value.path

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(SchemaError):
            parse_scene(path)
