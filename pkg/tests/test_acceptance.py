"""Acceptance criteria, one test per criterion, each printing a pass line.

The network-training criteria retrain models and dominate the runtime of
the suite (tens of minutes); everything else finishes in seconds.
"""

import json
import warnings

import numpy as np
import pytest

from landseg import (
    ConfusionMatrix,
    SceneSpec,
    augment,
    class_metrics,
    ensemble_average,
    extract_tiles,
    generate_scene,
    plan_tiles,
    rf_train,
    stitch_center,
)
from landseg.cli import main as cli_main
from landseg.experiment import robustness_experiment, table2_experiment
from landseg.nn import build_network, default_config, ops
from landseg.nn.networks import PyramidPool
from landseg.nn.train import band_stats
from landseg.tiling import Tile, reflect_pad_to


def ok(line):
    print(f"PASS  {line}")


def round_half_up_2(x):
    return np.floor(x * 100.0 + 0.5) / 100.0


# ---------------------------------------------------------------------------
# Criterion 1: F1 equation fidelity against the published metric triples.
# The displayed (UA, PA) values are themselves rounded, so each case uses an
# integer confusion matrix whose exact marginals round to the displayed pair
# and whose exact F1 rounds to the displayed F1.

TABLE3_CASES = [
    # (diag, row_total, col_total, ua_2dp, pa_2dp, f1_2dp)
    (33, 103, 38, 0.87, 0.32, 0.47),
    (10, 200, 15, 0.67, 0.05, 0.09),
    (70, 94, 104, 0.67, 0.74, 0.71),
    (15, 19, 100, 0.15, 0.79, 0.25),
]


def test_criterion_1_f1_equation_fidelity():
    for diag, row, col, ua_ref, pa_ref, f1_ref in TABLE3_CASES:
        counts = np.array([
            [diag, row - diag],
            [col - diag, 0],
        ], dtype=np.int64)
        cm = ConfusionMatrix(counts=counts)
        ua, pa, f1, _ = class_metrics(cm, 0)
        assert round_half_up_2(ua) == pytest.approx(ua_ref)
        assert round_half_up_2(pa) == pytest.approx(pa_ref)
        assert round_half_up_2(f1) == pytest.approx(f1_ref)
    ok("criterion 1: class_metrics reproduces all four published "
       "(UA, PA) -> F1 triples at 2-decimal round-half-up")


# ---------------------------------------------------------------------------
# Criterion 2: gradient correctness of every network op by central finite
# differences, >= 20 random small tensors each, max relative error < 1e-4.

GRAD_TOL = 1e-4
N_TENSORS = 20


def _num_grad(fn, x, h=1e-6):
    g = np.zeros_like(x)
    flat, gf = x.reshape(-1), g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = fn()
        flat[i] = orig - h
        down = fn()
        flat[i] = orig
        gf[i] = (up - down) / (2 * h)
    return g


def _max_rel_err(a, n):
    return float((np.abs(a - n) / np.maximum(1.0, np.maximum(np.abs(a), np.abs(n)))).max())


def _check(forward, backward, tensors, rng):
    out = forward()
    proj = rng.standard_normal(out.shape)
    grads = backward(proj)
    worst = 0.0
    for x, g in zip(tensors, grads):
        n = _num_grad(lambda: float((forward() * proj).sum()), x)
        worst = max(worst, _max_rel_err(g, n))
    assert worst < GRAD_TOL
    return worst


def test_criterion_2_gradient_correctness():
    rng = np.random.default_rng(2026)
    worst = {}

    for trial in range(N_TENSORS):
        # conv2d, dilations 1 and 2
        for dilation in (1, 2):
            x = rng.standard_normal((1, 2, 5, 5))
            w = rng.standard_normal((2, 2, 3, 3)) * 0.5
            b = rng.standard_normal(2) * 0.1
            cache = {}

            def fwd():
                y, cache["c"] = ops.conv2d_forward(x, w, b, dilation=dilation)
                return y

            def bwd(proj):
                fwd()
                return list(ops.conv2d_backward(proj, cache["c"]))

            key = f"conv2d(d={dilation})"
            worst[key] = max(worst.get(key, 0), _check(fwd, bwd, [x, w, b], rng))

        # relu (inputs kept off the kink)
        x = rng.standard_normal((1, 3, 4, 4))
        x[np.abs(x) < 0.05] = 0.3
        cache = {}

        def fwd():
            y, cache["k"] = ops.relu_forward(x)
            return y

        def bwd(proj):
            fwd()
            return [ops.relu_backward(proj, cache["k"])]

        worst["relu"] = max(worst.get("relu", 0), _check(fwd, bwd, [x], rng))

        # maxpool + unpool chain (distinct values keep argmax stable)
        x = (rng.permutation(36).astype(np.float64)).reshape(1, 1, 6, 6)
        x = x + rng.standard_normal((1, 1, 6, 6)) * 0.01
        cache = {}

        def fwd():
            pooled, cache["i"] = ops.maxpool_forward(x)
            return ops.max_unpool(pooled, cache["i"], (6, 6))

        def bwd(proj):
            fwd()
            d = ops.max_unpool_backward(proj, cache["i"])
            return [ops.maxpool_backward(d, cache["i"])]

        worst["maxpool+unpool"] = max(
            worst.get("maxpool+unpool", 0), _check(fwd, bwd, [x], rng)
        )

        # upsample + skip concat
        dec = rng.standard_normal((1, 2, 3, 3))
        skip = rng.standard_normal((1, 2, 6, 6))
        cache = {}

        def fwd():
            up = ops.upsample2x_forward(dec)
            y, cache["s"] = ops.concat_forward([skip, up])
            return y

        def bwd(proj):
            fwd()
            ds, dup = ops.concat_backward(proj, cache["s"])
            return [ds, ops.upsample2x_backward(dup)]

        worst["upsample_concat"] = max(
            worst.get("upsample_concat", 0), _check(fwd, bwd, [skip, dec], rng)
        )

        # pyramid pooling block, input and all conv params
        layer = PyramidPool("py", in_ch=2, reduced=1)
        layer.init_weights(rng)
        x = rng.standard_normal((1, 2, 8, 8))
        tensors = [x]
        for conv in layer.convs:
            tensors += [conv.w, conv.b]

        def fwd():
            return layer.forward(x)

        def bwd(proj):
            layer.zero_grads()
            fwd()
            dx = layer.backward(proj)
            return [dx] + layer.grads()

        worst["pyramid_pool"] = max(
            worst.get("pyramid_pool", 0), _check(fwd, bwd, tensors, rng)
        )

        # weighted cross-entropy with nodata
        logits = rng.standard_normal((1, 3, 3, 3))
        labels = rng.integers(0, 3, size=(1, 3, 3)).astype(np.uint8)
        labels[0, 0, 0] = 255
        weights = np.array([2.0, 1.0, 0.5])
        _, grad = ops.weighted_ce_loss(logits, labels, weights)
        num = _num_grad(
            lambda: ops.weighted_ce_loss(logits, labels, weights)[0], logits
        )
        err = _max_rel_err(grad, num)
        assert err < GRAD_TOL
        worst["weighted_ce_loss"] = max(worst.get("weighted_ce_loss", 0), err)

    summary = ", ".join(f"{k}={v:.1e}" for k, v in worst.items())
    ok(f"criterion 2: {N_TENSORS} random tensors per op, "
       f"max relative errors {summary} (< {GRAD_TOL})")


# ---------------------------------------------------------------------------
# Criterion 3: tiling round trip and ownership partition on 50 random
# geometries.

def test_criterion_3_tiling_round_trip():
    rng = np.random.default_rng(33)
    for trial in range(50):
        w = int(rng.integers(64, 701))
        h = int(rng.integers(64, 701))
        patch = int(rng.choice([64, 128, 256]))
        k = int(rng.integers(2, 8))
        labels = rng.integers(0, k, size=(h, w)).astype(np.uint8)
        plan = plan_tiles(w, h, patch=patch)
        padded = reflect_pad_to(labels, plan.padded_height, plan.padded_width)
        preds = []
        for ar, ac in plan.anchors:
            y = padded[ar:ar + patch, ac:ac + patch]
            onehot = np.zeros((patch, patch, k))
            onehot[np.arange(patch)[:, None], np.arange(patch)[None, :], y] = 1.0
            preds.append(((ar, ac), onehot))
        from landseg import LabelRaster
        stitched, probs = stitch_center(preds, plan)
        assert np.array_equal(stitched.labels, labels)
        assert np.allclose(probs.sum(axis=0), 1.0)
    ok("criterion 3: 50 random geometries (64-700, patch 64/128/256) "
       "round-trip exactly; ownership partitions the image")


# ---------------------------------------------------------------------------
# Criterion 4: augmentation algebra.

def test_criterion_4_augmentation_algebra():
    rng = np.random.default_rng(4)
    for _ in range(25):
        size = int(rng.choice([4, 8, 16]))
        y = rng.integers(0, 6, size=(size, size)).astype(np.uint8)
        x = rng.standard_normal((3, size, size)).astype(np.float32)
        t = Tile(anchor=(0, 0), x=x, y=y, mask=np.ones((size, size), bool))
        rot_cw, rot_ccw, flip, mirror = augment(t)
        assert np.array_equal(augment(mirror)[3].y, y)
        assert np.array_equal(augment(flip)[2].y, y)
        assert np.array_equal(augment(rot_ccw)[0].y, y)
        assert np.array_equal(augment(rot_cw)[1].y, y)
        base = np.sort(y.reshape(-1))
        for v in (rot_cw, rot_ccw, flip, mirror):
            assert np.array_equal(np.sort(v.y.reshape(-1)), base)
            assert np.array_equal(np.sort(v.x.reshape(-1)), np.sort(x.reshape(-1)))
    ok("criterion 4: mirror^2 = flip^2 = rot+90.rot-90 = identity; "
       "label multisets preserved on random patches")


# ---------------------------------------------------------------------------
# Criterion 5: out-of-bag fraction of the bootstrap.

def test_criterion_5_oob_fraction():
    rng = np.random.default_rng(5)
    x = rng.random((1000, 2))
    y = rng.integers(0, 2, size=1000)
    forest = rf_train(x, y, n_trees=300, max_depth=1, seed=5)
    frac = float(forest.oob_fractions().mean())
    assert abs(frac - 0.368) < 0.02
    ok(f"criterion 5: mean per-tree OOB fraction {frac:.4f} "
       f"within 0.368 +/- 0.02 over 300 trees (n=1000)")


# ---------------------------------------------------------------------------
# Criterion 6: terrain bands improve CART and RF; DEM ranks first.

def test_criterion_6_dem_slope_improvement():
    report = table2_experiment(
        seed=2026, n_scenes=5, n_per_class=300,
        algorithms=("cart", "rf"), n_trees=300,
    )
    gains = report["gain_7band"]
    assert gains["cart"] >= 0.02
    assert gains["rf"] >= 0.02
    assert report["dem_ranked_first_count"] == 5
    ok(f"criterion 6: mean overall-F1 gain 7band-5band cart=+{gains['cart']:.3f} "
       f"rf=+{gains['rf']:.3f} (>= 0.02); DEM most important on 5/5 scenes")


# ---------------------------------------------------------------------------
# Criterion 7: each architecture overfits one 64x64 tile at its
# paper-assigned optimizer. psp_mini (SGD 0.05/0.9) meets the 500-step
# form; Adam 1e-5 cannot reach 99% in 5000 steps at desk scale, so
# segnet/unet use the criterion's configured-lr-with-more-steps branch.

OVERFIT_TILE_SPEC = SceneSpec(width=128, height=128, seed=11, n_classes=3,
                              spectral_noise=1.5)
STEP_CAPS = {"segnet_mini": 16000, "unet_mini": 10000, "psp_mini": 500}


def _overfit_tile():
    stack, labels, _ = generate_scene(OVERFIT_TILE_SPEC)
    plan = plan_tiles(128, 128, patch=64, stride=64)
    return extract_tiles(stack, labels, plan).tiles[0]


@pytest.mark.parametrize("arch", ["psp_mini", "segnet_mini", "unet_mini"])
def test_criterion_7_network_trainability(arch):
    tile = _overfit_tile()
    x = tile.x[None].astype(np.float64)
    y = tile.y[None]
    valid = tile.mask[None] & (y != 255)
    weights = np.ones(3)

    net = build_network(arch, in_ch=7, n_classes=3, width=16, patch=64, seed=0)
    net.set_band_norm(*band_stats([tile]))
    cfg = default_config(arch)
    opt = cfg.make_optimizer()

    cap = STEP_CAPS[arch]
    losses = []
    reached = None
    for step in range(1, cap + 1):
        net.zero_grads()
        logits = net.forward(x)
        loss, dlogits = ops.weighted_ce_loss(logits, y, weights, valid)
        net.backward(dlogits)
        opt.step(net.param_arrays(), net.grads())
        losses.append(loss)
        if step % 25 == 0:
            acc = float((np.argmax(logits, axis=1) == y)[valid].mean())
            if acc >= 0.99:
                reached = step
                break
    assert reached is not None, (
        f"{arch} did not reach 99% within {cap} steps at "
        f"{cfg.optimizer} lr={cfg.lr}"
    )
    assert losses[min(499, len(losses) - 1)] < losses[0]
    if arch == "psp_mini":
        branch = "99% within 500 steps at the paper optimizer"
        assert reached <= 500
    else:
        branch = ("configured lr with steps increased "
                  f"(Adam 1e-5, cap {cap}); loss decreased over the first "
                  "500 steps")
    ok(f"criterion 7 [{arch}]: {cfg.optimizer} lr={cfg.lr}, 99% pixel "
       f"accuracy at step {reached}; branch: {branch}")


# ---------------------------------------------------------------------------
# Criteria 8 and 9 share one trained robustness battery.

@pytest.fixture(scope="module")
def robustness():
    report, details = robustness_experiment(
        seed=2026, n_pairs=2, n_trees=300, epochs=25, keep_details=True,
    )
    return report, details


def test_criterion_8_ensemble_definition(robustness):
    report, details = robustness
    rng = np.random.default_rng(8)
    archs = ("segnet_mini", "unet_mini", "psp_mini")
    for pair in details:
        members = [pair["probs_in"][a] for a in archs]
        merged = ensemble_average(members)
        sums = merged.sum(axis=0)
        assert np.abs(sums - 1.0).max() < 1e-12
        # hand-computed mean on sampled pixels
        k, h, w = merged.shape
        for _ in range(10):
            r, c = int(rng.integers(h)), int(rng.integers(w))
            hand = (members[0][:, r, c] + members[1][:, r, c]
                    + members[2][:, r, c]) / 3.0
            assert np.abs(merged[:, r, c] - hand).max() < 1e-12

    soft_ok = True
    for entry in report["pairs"]:
        oa = entry["oa_in"]
        best_single = max(oa[a] for a in archs)
        if oa["merged"] < best_single - 0.02:
            soft_ok = False
            warnings.warn(
                f"soft check: merged OA {oa['merged']:.3f} below best "
                f"individual {best_single:.3f} - 0.02 on pair {entry['pair']}"
            )
    merged_oa = report["mean_oa_in"]["merged"]
    ok(f"criterion 8: merged vectors sum to 1 within 1e-12 and equal the "
       f"hand mean; merged OA {merged_oa:.3f} vs individuals "
       f"(soft check {'met' if soft_ok else 'WARNED'})")


def test_criterion_9_robustness_direction(robustness):
    report, _ = robustness
    deg = report["mean_degradation"]
    assert deg["merged"] < deg["rf"], (
        f"merged degradation {deg['merged']:.3f} not below RF {deg['rf']:.3f}"
    )
    ok(f"criterion 9: OA degradation under cross-year drift merged="
       f"{deg['merged']:.3f} < rf={deg['rf']:.3f} over "
       f"{report['n_pairs']} scene pairs")


# ---------------------------------------------------------------------------
# Criterion 10: byte-identical experiment reruns.

def test_criterion_10_experiment_determinism(tmp_path):
    args = ["experiment", "table2", "--seed", "77", "--scenes", "2",
            "--n-per-class", "120", "--svm-per-class", "60",
            "--trees", "100", "--scene-size", "128"]
    assert cli_main(args + ["--out", str(tmp_path / "a.json")]) == 0
    assert cli_main(args + ["--out", str(tmp_path / "b.json")]) == 0
    a = (tmp_path / "a.json").read_bytes()
    b = (tmp_path / "b.json").read_bytes()
    assert a == b
    rep = json.loads(a)
    assert rep["protocol"] == "table2"
    assert set(rep["mean_overall_f1"]) == {"cart", "rf", "svm"}
    ok("criterion 10: `experiment table2` reruns with one seed are "
       "byte-identical (cart+rf+svm grid)")
