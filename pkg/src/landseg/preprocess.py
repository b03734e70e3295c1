"""Radiometric alignment, cloud masking, terrain derivatives and band stacking.

All operations are pure functions over immutable inputs. Band-level helpers
work on plain arrays plus a validity mask; raster-level wrappers handle the
multi-band containers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .raster import Raster, SPECTRAL_BANDS, STACK_BANDS


@dataclass
class HistogramMap:
    """256-bin CDFs of source and reference plus the value remap table."""

    source_cdf: np.ndarray
    reference_cdf: np.ndarray
    lut: np.ndarray


def scale_to_u8(values: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
    """Linear map of [valid min, valid max] onto [0, 255], round half up.

    Constant bands map to 0. Masked cells come out 0 and stay masked.
    """
    values = np.asarray(values, dtype=np.float64)
    if mask is None:
        mask = np.ones(values.shape, dtype=bool)
    if not mask.any():
        raise ValueError("band has no valid pixels")
    lo = values[mask].min()
    hi = values[mask].max()
    out = np.zeros(values.shape, dtype=np.uint8)
    if hi > lo:
        scaled = (values[mask] - lo) * (255.0 / (hi - lo))
        out[mask] = np.clip(np.floor(scaled + 0.5), 0, 255).astype(np.uint8)
    return out


def _cdf_u8(values: np.ndarray, mask: np.ndarray) -> np.ndarray:
    counts = np.bincount(values[mask].astype(np.int64), minlength=256)
    return np.cumsum(counts) / counts.sum()


def histogram_match(
    source: np.ndarray,
    reference: np.ndarray,
    source_mask: np.ndarray | None = None,
    reference_mask: np.ndarray | None = None,
):
    """Remap a u8 band so its value distribution tracks the reference's.

    Each valid source value v maps to the smallest reference value r with
    reference_cdf(r) >= source_cdf(v). Masked pixels pass through unchanged.
    Returns (remapped band, HistogramMap).
    """
    source = np.asarray(source)
    reference = np.asarray(reference)
    if source.dtype != np.uint8 or reference.dtype != np.uint8:
        raise ValueError("histogram matching operates on u8-quantized bands")
    if source_mask is None:
        source_mask = np.ones(source.shape, dtype=bool)
    if reference_mask is None:
        reference_mask = np.ones(reference.shape, dtype=bool)
    if not source_mask.any() or not reference_mask.any():
        raise ValueError("histogram matching needs >=1 valid pixel per band")

    src_cdf = _cdf_u8(source, source_mask)
    ref_cdf = _cdf_u8(reference, reference_mask)
    # Smallest r with ref_cdf[r] >= src_cdf[v]; clamp the all-ones tail.
    lut = np.searchsorted(ref_cdf, src_cdf, side="left")
    lut = np.minimum(lut, 255).astype(np.uint8)

    out = source.copy()
    out[source_mask] = lut[source[source_mask]]
    return out, HistogramMap(source_cdf=src_cdf, reference_cdf=ref_cdf, lut=lut)


def apply_cloud_mask(r: Raster, cloud: np.ndarray) -> Raster:
    """Clear the validity mask wherever the cloud grid is nonzero/true."""
    cloud = np.asarray(cloud)
    if cloud.shape != (r.height, r.width):
        raise ValueError(
            f"cloud grid shape {cloud.shape} does not match raster "
            f"({r.height}, {r.width})"
        )
    out = r.copy()
    out.valid_mask &= ~(cloud.astype(bool))
    return out


def slope_from_dem(dem: Raster, cell_size: float) -> Raster:
    """Slope in degrees from a single-band DEM using Horn's 3x3 stencil.

    Borders are reflected so the output geometry equals the input's. A pixel
    with any masked cell in its 3x3 neighborhood becomes nodata.
    """
    if cell_size <= 0:
        raise ValueError("cell_size must be positive")
    if dem.n_bands != 1:
        raise ValueError("dem must be a single-band raster")
    if dem.height < 3 or dem.width < 3:
        raise ValueError("dem must be at least 3x3")

    z = np.pad(dem.data[0].astype(np.float64), 1, mode="reflect")
    m = np.pad(dem.valid_mask, 1, mode="reflect")

    nw, n_, ne = z[:-2, :-2], z[:-2, 1:-1], z[:-2, 2:]
    w_, e_ = z[1:-1, :-2], z[1:-1, 2:]
    sw, s_, se = z[2:, :-2], z[2:, 1:-1], z[2:, 2:]

    gx = ((ne + 2.0 * e_ + se) - (nw + 2.0 * w_ + sw)) / (8.0 * cell_size)
    gy = ((sw + 2.0 * s_ + se) - (nw + 2.0 * n_ + ne)) / (8.0 * cell_size)
    slope_deg = np.degrees(np.arctan(np.hypot(gx, gy)))

    ok = (
        m[:-2, :-2] & m[:-2, 1:-1] & m[:-2, 2:]
        & m[1:-1, :-2] & m[1:-1, 1:-1] & m[1:-1, 2:]
        & m[2:, :-2] & m[2:, 1:-1] & m[2:, 2:]
    )
    slope_deg[~ok] = 0.0
    return Raster(
        dem.width, dem.height, ["slope"],
        slope_deg.astype(np.float32)[None], ok,
    )


def stack_bands(spectral: Raster, dem: Raster, slope: Raster) -> Raster:
    """Stack blue..nir + dem + slope into the canonical 7-band raster."""
    if spectral.bands != SPECTRAL_BANDS:
        raise ValueError(
            f"spectral raster must carry bands {SPECTRAL_BANDS}, "
            f"got {spectral.bands}"
        )
    for name, r in (("dem", dem), ("slope", slope)):
        if r.n_bands != 1:
            raise ValueError(f"{name} must be a single-band raster")
        if (r.width, r.height) != (spectral.width, spectral.height):
            raise ValueError(f"{name} geometry does not match spectral raster")
    data = np.concatenate([spectral.data, dem.data, slope.data], axis=0)
    mask = spectral.valid_mask & dem.valid_mask & slope.valid_mask
    return Raster(spectral.width, spectral.height, list(STACK_BANDS), data, mask)


def normalize_to_reference(source: Raster, reference: Raster):
    """Scale both rasters' bands to u8 and match source to reference per band.

    Returns (matched raster, {band name: HistogramMap}).
    """
    if source.bands != reference.bands:
        raise ValueError("source and reference must carry the same bands")
    out = source.copy()
    maps = {}
    for i, name in enumerate(source.bands):
        s8 = scale_to_u8(source.data[i], source.valid_mask)
        r8 = scale_to_u8(reference.data[i], reference.valid_mask)
        matched, hm = histogram_match(
            s8, r8, source.valid_mask, reference.valid_mask
        )
        out.data[i] = matched.astype(np.float32)
        maps[name] = hm
    return out, maps
