import numpy as np
import pytest

from landseg import (
    LabelRaster,
    extract_tiles,
    plan_tiles,
    split_samples,
    stitch_center,
)
from landseg.tiling import TilePlan, reflect_pad_to, split_counts
from conftest import random_labels, random_raster


def one_hot_predictions(labels: LabelRaster, plan: TilePlan, k: int):
    """Ground-truth one-hot patches cut from the (padded) label raster."""
    padded = reflect_pad_to(labels.labels, plan.padded_height, plan.padded_width)
    p = plan.patch
    preds = []
    for ar, ac in plan.anchors:
        y = padded[ar:ar + p, ac:ac + p]
        probs = np.zeros((p, p, k))
        probs[np.arange(p)[:, None], np.arange(p)[None, :], y] = 1.0
        preds.append(((ar, ac), probs))
    return preds


# -------------------------------------------------------------------- plan

def test_plan_512_patch256_stride128():
    plan = plan_tiles(512, 512, patch=256, stride=128)
    assert len(plan.anchors) == 9
    assert plan.anchors[0] == (0, 0)
    assert plan.anchors[-1] == (256, 256)


def test_plan_single_tile():
    plan = plan_tiles(256, 256, patch=256)
    assert plan.anchors == [(0, 0)]


def test_plan_clamped_final_anchor():
    plan = plan_tiles(300, 300, patch=256, stride=128)
    assert sorted({a[0] for a in plan.anchors}) == [0, 44]
    assert len(plan.anchors) == 4


def test_plan_monotone_in_stride():
    for patch in (64, 128):
        last = None
        for stride in range(patch, 0, -16):
            n = len(plan_tiles(500, 300, patch=patch, stride=stride).anchors)
            if last is not None:
                assert n >= last
            last = n


def test_plan_rejects_bad_dims():
    with pytest.raises(ValueError, match="positive"):
        plan_tiles(0, 100, patch=64)
    with pytest.raises(ValueError, match="stride"):
        plan_tiles(100, 100, patch=64, stride=65)


def test_plan_json_round_trip(tmp_path):
    plan = plan_tiles(300, 200, patch=128, stride=64)
    plan.save(tmp_path / "plan.json")
    back = TilePlan.load(tmp_path / "plan.json")
    assert back == plan


# ----------------------------------------------------------------- extract

def test_extract_nine_tiles(rng):
    r = random_raster(rng, 512, 512, n_bands=2)
    l = random_labels(rng, 512, 512)
    plan = plan_tiles(512, 512, patch=256, stride=128)
    s = extract_tiles(r, l, plan)
    assert len(s.tiles) == 9
    assert s.dropped == 0


def test_extract_drops_all_nodata(rng):
    r = random_raster(rng, 512, 512)
    l = LabelRaster(512, 512, np.full((512, 512), 255, np.uint8))
    plan = plan_tiles(512, 512, patch=256, stride=128)
    s = extract_tiles(r, l, plan)
    assert len(s.tiles) == 0
    assert s.dropped == 9


def test_half_overlap_yields_more_tiles(rng):
    r = random_raster(rng, 512, 512)
    l = random_labels(rng, 512, 512)
    nine = extract_tiles(r, l, plan_tiles(512, 512, 256, 128))
    four = extract_tiles(r, l, plan_tiles(512, 512, 256, 256))
    assert (len(nine.tiles), len(four.tiles)) == (9, 4)


def test_extract_geometry_mismatch(rng):
    r = random_raster(rng, 128, 128)
    l = random_labels(rng, 130, 128)
    with pytest.raises(ValueError, match="geometry"):
        extract_tiles(r, l, plan_tiles(128, 128, 64))


# ------------------------------------------------------------------- split

def test_split_exact_proportions():
    assert split_counts(10) == {"train": 6, "val": 2, "test": 2}
    # 9 tiles: floors 5/1/1, two seats left, val and test carry the larger
    # remainders
    assert split_counts(9) == {"train": 5, "val": 2, "test": 2}
    assert split_counts(7) == {"train": 4, "val": 2, "test": 1}


def test_split_tags_and_determinism(rng):
    r = random_raster(rng, 512, 512)
    l = random_labels(rng, 512, 512)
    s = extract_tiles(r, l, plan_tiles(512, 512, 256, 128))
    a = split_samples(s, seed=7)
    b = split_samples(s, seed=7)
    assert a.split_tags == b.split_tags
    assert sorted(a.split_tags).count("train") == 5
    c = split_samples(s, seed=8)
    assert a.split_tags != c.split_tags  # overwhelmingly likely


def test_split_needs_five_tiles(rng):
    r = random_raster(rng, 256, 256)
    l = random_labels(rng, 256, 256)
    s = extract_tiles(r, l, plan_tiles(256, 256, 256))
    with pytest.raises(ValueError, match="at least 5"):
        split_samples(s, seed=0)


# ------------------------------------------------------------------ stitch

def test_stitch_single_tile(rng):
    l = random_labels(rng, 256, 256, n_classes=3)
    plan = plan_tiles(256, 256, patch=256)
    preds = one_hot_predictions(l, plan, k=3)
    out, probs = stitch_center(preds, plan)
    assert np.array_equal(out.labels, l.labels)
    assert probs.shape == (3, 256, 256)


def test_stitch_two_tile_ownership():
    plan = plan_tiles(384, 256, patch=256, stride=128)
    assert sorted({a[1] for a in plan.anchors}) == [0, 128]
    left = np.zeros((256, 256, 2))
    left[:, :, 0] = 1.0
    right = np.zeros((256, 256, 2))
    right[:, :, 1] = 1.0
    out, _ = stitch_center([((0, 0), left), ((0, 128), right)], plan)
    assert (out.labels[:, :192] == 0).all()
    assert (out.labels[:, 192:] == 1).all()


def test_stitch_consistent_predictions_seamless(rng):
    # tiles cut from one global probability field stitch back to that
    # field's argmax: no seam effects anywhere
    plan = plan_tiles(512, 512, patch=256, stride=128)
    field = rng.random((512, 512, 4))
    field /= field.sum(axis=2, keepdims=True)
    preds = [((ar, ac), field[ar:ar + 256, ac:ac + 256])
             for ar, ac in plan.anchors]
    out, _ = stitch_center(preds, plan)
    assert np.array_equal(out.labels, np.argmax(field, axis=2).astype(np.uint8))


def test_stitch_constant_predictions(rng):
    plan = plan_tiles(512, 512, patch=256, stride=128)
    vec = rng.random(4)
    vec /= vec.sum()
    probs = np.broadcast_to(vec, (256, 256, 4))
    out, stitched = stitch_center([(a, probs) for a in plan.anchors], plan)
    assert (out.labels == np.argmax(vec)).all()
    assert np.allclose(stitched, vec[:, None, None])


def test_stitch_round_trip_random_geometries(rng):
    for _ in range(15):
        w = int(rng.integers(64, 700))
        h = int(rng.integers(64, 700))
        patch = int(rng.choice([64, 128, 256]))
        k = int(rng.integers(2, 7))
        l = random_labels(rng, w, h, n_classes=k)
        plan = plan_tiles(w, h, patch=patch)
        preds = one_hot_predictions(l, plan, k)
        out, probs = stitch_center(preds, plan)
        assert np.array_equal(out.labels, l.labels)
        # ownership partition: every pixel written exactly once
        assert np.allclose(probs.sum(axis=0), 1.0)


def test_stitch_missing_anchor(rng):
    plan = plan_tiles(384, 256, patch=256, stride=128)
    pred = np.ones((256, 256, 2)) / 2
    with pytest.raises(ValueError, match="missing"):
        stitch_center([((0, 0), pred)], plan)


def test_stitch_patch_size_mismatch():
    plan = plan_tiles(256, 256, patch=256)
    with pytest.raises(ValueError, match="shape"):
        stitch_center([((0, 0), np.ones((128, 128, 2)))], plan)


def test_reflect_pad_small_image():
    arr = np.arange(12, dtype=np.float64).reshape(3, 4)
    out = reflect_pad_to(arr, 9, 9)
    assert out.shape == (9, 9)
    assert np.array_equal(out[:3, :4], arr)
