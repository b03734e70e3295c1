#!/usr/bin/env python3
# Walk-through: radiometric alignment and terrain derivatives -- the steps
# that turn raw acquisitions into the 7-band training stack.

import numpy as np

from landseg import (
    Raster, SceneSpec, apply_cloud_mask, generate_scene, histogram_match,
    normalize_to_reference, scale_to_u8, slope_from_dem, stack_bands,
)

rng = np.random.default_rng(3)

# scale_to_u8 maps each band's valid range onto [0, 255] with round-half-up.
band = rng.normal(1200.0, 300.0, size=(64, 64))
u8 = scale_to_u8(band)
print("scaled range:", int(u8.min()), "..", int(u8.max()))

# Histogram matching remaps one u8 band so its value distribution tracks a
# reference band -- the mosaic trick that removes scene-to-scene brightness
# steps. Matching a band against itself is the identity.
darker = np.clip(u8.astype(np.int32) - 40, 0, 255).astype(np.uint8)
matched, hm = histogram_match(darker, u8)
print("mean before/after matching: "
      f"{darker.mean():6.1f} -> {matched.mean():6.1f} (reference {u8.mean():6.1f})")
print("lut is monotone:", bool((np.diff(hm.lut.astype(int)) >= 0).all()))

# One scene acts as the acquisition, a second as the radiometric reference.
scene = generate_scene(SceneSpec(width=160, height=160, seed=11, cloud_fraction=0.05))
reference = generate_scene(SceneSpec(width=160, height=160, seed=12))
stack, labels, cloud = scene
spectral = stack.select(stack.bands[:5])
ref_spectral = reference[0].select(stack.bands[:5])

aligned, maps = normalize_to_reference(spectral, ref_spectral)
print("\nper-band u8 alignment against the reference scene:")
for name in aligned.bands:
    print(f"  {name:<9} source mean {spectral.band(name).mean():6.1f}"
          f" -> aligned {aligned.band(name).mean():6.1f}")

# Cloud pixels become nodata; they never reach training or evaluation.
masked = apply_cloud_mask(aligned, cloud)
print("\nvalid pixels before clouds:", int(aligned.valid_mask.sum()),
      "after:", int(masked.valid_mask.sum()))

# Slope comes from Horn's 3x3 stencil over the DEM. A 45-degree ramp is the
# classic sanity check: one height unit per ground unit.
cell = 10.0
ramp = np.tile(np.arange(64) * cell, (64, 1)).astype(np.float32)
ramp_r = Raster(64, 64, ["dem"], ramp[None], np.ones((64, 64), bool))
ramp_slope = slope_from_dem(ramp_r, cell_size=cell)
print("\nramp slope at interior pixels:",
      float(ramp_slope.data[0][10, 10]), "degrees")

dem = stack.select(["dem"])
slope = slope_from_dem(dem, cell_size=30.0)
seven = stack_bands(masked, dem, slope)
print("stacked bands:", seven.bands)
print("stack valid pixels:", int(seven.valid_mask.sum()))
