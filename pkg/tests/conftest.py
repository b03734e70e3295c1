import numpy as np
import pytest

from landseg import LabelRaster, Raster


def random_raster(rng, width, height, n_bands=3, masked_frac=0.0):
    data = rng.standard_normal((n_bands, height, width)).astype(np.float32) * 50
    mask = np.ones((height, width), dtype=bool)
    if masked_frac > 0:
        mask = rng.random((height, width)) >= masked_frac
    names = [f"b{i}" for i in range(n_bands)]
    return Raster(width, height, names, data, mask)


def random_labels(rng, width, height, n_classes=4, nodata_frac=0.0):
    labels = rng.integers(0, n_classes, size=(height, width)).astype(np.uint8)
    if nodata_frac > 0:
        labels[rng.random((height, width)) < nodata_frac] = 255
    return LabelRaster(width, height, labels)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
