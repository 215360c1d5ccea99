import json

import numpy as np
import pytest

from ovavss.config import DataConfig
from ovavss.data import build_roster
from ovavss.data.render import render_canonical
from ovavss.errors import ConfigurationError, DatasetLoadError, EmptyMaskError, InputError
from ovavss.openvocab import (
    EmbeddingTable,
    FrozenImageEncoder,
    build_class_table,
    classify,
    classify_track,
    crop_object,
    load_table,
    mask_bbox,
    similarity,
    square_crop,
)
from ovavss.openvocab.crop import square_window

SMALL_ENCODER = {"embed_dim": 16, "widths": (8, 8, 16, 16), "stem_width": 8, "groups": 4}


@pytest.fixture(scope="module")
def encoder():
    return FrozenImageEncoder(**SMALL_ENCODER)


@pytest.fixture(scope="module")
def roster():
    return build_roster(DataConfig().roster, seed=42)


def _box_mask(x0, y0, x1, y1, size=64):
    mask = np.zeros((size, size), dtype=bool)
    mask[y0:y1, x0:x1] = True
    return mask


def test_square_crop_geometry(rng):
    frame = rng.uniform(size=(3, 64, 64))
    crop, spec = square_crop(frame, _box_mask(10, 20, 30, 60))
    assert spec.side == 40
    assert spec.center == (20.0, 40.0)
    assert spec.window == (0, 20, 40, 60)
    assert spec.clamp_pad == (0, 0, 0, 0)
    assert crop.shape == (3, 32, 32)


def test_square_window_pads_outside_the_frame(rng):
    frame = rng.uniform(size=(3, 64, 64))
    window, spec = square_window(frame, _box_mask(0, 0, 4, 20))
    assert spec.window == (-8, 0, 12, 20)
    assert spec.clamp_pad == (8, 0, 0, 0)
    assert not window[:, :, :8].any()
    assert np.array_equal(window[:, :, 8:12], frame[:, 0:20, 0:4])
    # background is zeroed before cropping
    assert not window[:, :, 12:].any()


def test_single_pixel_mask_fills_the_crop(rng):
    frame = rng.uniform(size=(3, 64, 64))
    crop, spec = square_crop(frame, _box_mask(5, 7, 6, 8))
    assert spec.side == 1
    assert np.allclose(crop, frame[:, 7, 5].reshape(3, 1, 1))


@pytest.mark.parametrize("strategy", ["none", "crop_resize", "square_crop"])
def test_every_strategy_shapes_and_empty_masks(strategy, rng):
    frame = rng.uniform(size=(3, 64, 64))
    assert crop_object(frame, _box_mask(10, 20, 30, 60), strategy, 24).shape == (3, 24, 24)
    with pytest.raises(EmptyMaskError):
        crop_object(frame, np.zeros((64, 64), dtype=bool), strategy)


def test_full_frame_keeps_only_the_object(rng):
    frame = rng.uniform(size=(3, 32, 32))
    mask = _box_mask(4, 4, 8, 8, size=32)
    out = crop_object(frame, mask, "none", 32)
    assert np.array_equal(out, frame * mask[None])


def test_crop_rejects_unknown_strategy_and_misaligned_mask(rng):
    frame = rng.uniform(size=(3, 64, 64))
    with pytest.raises(ConfigurationError):
        crop_object(frame, _box_mask(0, 0, 4, 4), "letterbox")
    with pytest.raises(InputError):
        crop_object(frame, np.ones((32, 32), dtype=bool))


def test_mask_bbox_is_half_open():
    assert mask_bbox(_box_mask(3, 5, 9, 6)) == (3, 5, 9, 6)


def test_similarity_on_orthogonal_table():
    table = EmbeddingTable(["a", "b", "c", "d"], np.eye(4), temperature=2.0)
    scores = similarity(np.eye(4)[:1], table)[0]
    expected = np.exp(2.0) / (np.exp(2.0) + 3.0)
    assert scores[0] == pytest.approx(expected)
    assert np.allclose(scores[1:], (1.0 - expected) / 3.0)
    assert np.allclose(similarity(np.eye(4)[:1], table, temperature=0.0), 0.25)


def test_similarity_needs_classes():
    with pytest.raises(InputError):
        similarity(np.ones((1, 4)) / 2.0, EmbeddingTable([], np.zeros((0, 4))))


def test_table_rejects_duplicates_and_normalizes():
    with pytest.raises(InputError):
        EmbeddingTable(["a", "a"], np.eye(2))
    table = EmbeddingTable(["a", "b"], np.array([[3.0, 4.0], [0.0, 2.0]]))
    assert np.allclose(table.vector("a"), [0.6, 0.8])


def test_encoder_is_frozen_unit_and_seeded(encoder, rng):
    crops = rng.uniform(size=(3, 3, 32, 32))
    out = encoder(crops)
    assert out.shape == (3, 16)
    assert np.allclose(np.linalg.norm(out, axis=1), 1.0)
    assert not any(p.requires_grad for p in encoder.parameters())
    assert np.array_equal(FrozenImageEncoder(**SMALL_ENCODER)(crops), out)


def test_canonical_renders_classify_perfectly(encoder, roster):
    table = build_class_table(roster, "toy", encoder, views=(0,))
    crops = [render_canonical(spec, 32, 0) for spec in roster]
    assert [c.name for c in classify(crops, table, encoder)] == [spec.name for spec in roster]


def test_table_file_round_trip(tmp_path, encoder, roster):
    table = build_class_table(roster, "toy", encoder, views=(0, 1))
    table.save(tmp_path / "emb.json")
    names = [c.name for c in roster]
    loaded = build_class_table(roster, "file", embedding_file=tmp_path / "emb.json")
    assert loaded.names == names
    assert np.allclose(loaded.vectors, table.vectors)
    reordered = load_table(tmp_path / "emb.json", names[::-1])
    assert np.allclose(reordered.vectors, table.vectors[::-1])


def test_table_file_errors(tmp_path):
    with pytest.raises(DatasetLoadError, match="missing file"):
        load_table(tmp_path / "none.json", ["a"])
    path = tmp_path / "emb.json"
    path.write_text(json.dumps({"dim": 2, "classes": {"a": [1.0, 0.0]}}))
    with pytest.raises(DatasetLoadError, match="missing classes"):
        load_table(path, ["a", "b"])
    path.write_text(json.dumps({"dim": 3, "classes": {"a": [1.0, 0.0]}}))
    with pytest.raises(DatasetLoadError, match="dim=3"):
        load_table(path, ["a"])
    path.write_text("{not json")
    with pytest.raises(DatasetLoadError, match="malformed"):
        load_table(path, ["a"])


def test_file_provider_needs_a_path(roster):
    with pytest.raises(ConfigurationError):
        build_class_table(roster, "file")


def test_track_label_skips_empty_frames(encoder, roster):
    table = build_class_table(roster, "toy", encoder, views=(0,))
    spec = roster[3]
    frames = np.zeros((3, 3, 32, 32))
    frames[1] = render_canonical(spec, 32, 0)
    masks = np.zeros((3, 32, 32), dtype=bool)
    masks[1] = frames[1].any(axis=0)
    result = classify_track(frames, masks, table, encoder, strategy="none")
    assert result.name == spec.name
    assert result.scores.sum() == pytest.approx(1.0)
    assert classify_track(frames, np.zeros_like(masks), table, encoder) is None


def test_single_view_table_is_that_views_encoding(encoder, roster):
    table = build_class_table(roster[:1], "toy", encoder, views=(2,))
    expected = encoder(render_canonical(roster[0], 32, 2)[None])[0]
    assert np.allclose(table.vectors[0], expected, atol=1e-12)
    repeated = build_class_table(roster[:1], "toy", encoder, views=(2, 2, 2))
    assert np.allclose(repeated.vectors, table.vectors, atol=1e-12)
