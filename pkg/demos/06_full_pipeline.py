#!/usr/bin/env python3
# Walk-through: the whole workflow through the CLI, stage by stage, inside
# a temporary directory. Every stage exchanges the same raster container.

import json
import tempfile
from pathlib import Path

from landseg.cli import main

tmp = Path(tempfile.mkdtemp(prefix="landseg_demo_"))
print("working in", tmp)

def stage(*argv):
    print("\n$ landseg " + " ".join(argv))
    rc = main(list(argv))
    assert rc == 0, f"stage failed with exit code {rc}"

# 1. Synthesize a scene: raw spectral bands, DEM, cloud grid, truth labels.
stage("synth", "--seed", "33", "--out", str(tmp))

# 2. Preprocess: histogram-match against a reference (here: itself), apply
#    the cloud mask, derive slope, stack to 7 bands.
stage("preprocess",
      "--in", str(tmp / "spectral"), "--reference", str(tmp / "spectral"),
      "--dem", str(tmp / "dem"), "--cloud", str(tmp / "cloud"),
      "--out", str(tmp / "prep"))

# 3. Tile with half-patch overlap and split 60/20/20.
stage("tile", "--stack", str(tmp / "stack"), "--labels", str(tmp / "labels"),
      "--patch", "128", "--stride", "64", "--seed", "1",
      "--out", str(tmp / "plan.json"))

# 4. Train a random forest on stratified pixel samples (Table-3 defaults:
#    300 trees, minimum leaf 5).
stage("train-pixel", "--algo", "rf", "--stack", str(tmp / "stack"),
      "--labels", str(tmp / "labels"), "--legend", str(tmp / "legend.json"),
      "--samples", "250", "--seed", "2", "--out", str(tmp / "rf.json"))

# 5. Train a quick mini network on the tile splits.
(tmp / "netcfg.json").write_text(json.dumps(
    {"optimizer": "sgd", "lr": 0.05, "momentum": 0.9, "epochs": 4, "width": 8}))
stage("train-net", "--arch", "psp_mini", "--stack", str(tmp / "stack"),
      "--labels", str(tmp / "labels"), "--legend", str(tmp / "legend.json"),
      "--plan", str(tmp / "plan.json"), "--config", str(tmp / "netcfg.json"),
      "--seed", "3", "--out", str(tmp / "psp"))

# 6. Predict with both models; the network path stitches tile probabilities.
stage("predict", "--model", str(tmp / "rf.json"), "--stack", str(tmp / "stack"),
      "--out", str(tmp / "rf_pred"))
stage("predict", "--model", str(tmp / "psp"), "--stack", str(tmp / "stack"),
      "--plan", str(tmp / "plan.json"), "--out", str(tmp / "psp_pred"))

# 7. Ensemble probability maps (demo: rf + psp + psp).
stage("ensemble", "--probs", str(tmp / "rf_pred_probs"),
      str(tmp / "psp_pred_probs"), str(tmp / "psp_pred_probs"),
      "--out", str(tmp / "merged"))

# 8. Evaluate everything against the truth labels.
for name in ("rf_pred", "psp_pred", "merged"):
    stage("evaluate", "--pred", str(tmp / f"{name}_labels"),
          "--truth", str(tmp / "labels"), "--legend", str(tmp / "legend.json"),
          "--out", str(tmp / f"{name}_report.json"))

for name in ("rf_pred", "psp_pred", "merged"):
    rep = json.loads((tmp / f"{name}_report.json").read_text())
    print(f"{name:<10} overall accuracy {rep['overall_accuracy']:.3f}")

print("\nmanifest:")
for line in (tmp / "run_manifest.jsonl").read_text().splitlines():
    entry = json.loads(line)
    print(f"  {entry['stage']:<14} -> {len(entry['outputs'])} outputs")
