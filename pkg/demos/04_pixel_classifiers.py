#!/usr/bin/env python3
# Walk-through: the three from-scratch pixel classifiers on a synthetic
# scene, with the 5-band vs 7-band comparison and RF feature importance.

import numpy as np

from landseg import (
    SceneSpec, cart_train, generate_scene, permutation_importance,
    rf_train, stratified_sample, svm_train,
)
from landseg.evaluate import confusion_from_arrays, overall_accuracy

spec = SceneSpec(width=192, height=192, seed=9)
stack, labels, _ = generate_scene(spec)
legend = spec.legend()

# Balanced pixel samples; one without-replacement draw split into disjoint
# train and evaluation halves.
table = stratified_sample(stack, labels, legend, n_per_class=400, seed=1)
train_idx = np.concatenate([np.flatnonzero(table.y == c)[:200] for c in range(6)])
eval_idx = np.concatenate([np.flatnonzero(table.y == c)[200:] for c in range(6)])
x_tr, y_tr = table.x[train_idx], table.y[train_idx]
x_ev, y_ev = table.x[eval_idx], table.y[eval_idx]

def oa(model, cols):
    pred = model.predict(x_ev[:, cols])
    return overall_accuracy(confusion_from_arrays(y_ev, pred, 6))

five, seven = list(range(5)), list(range(7))
print("algorithm       5-band OA   7-band OA")
cart5 = cart_train(x_tr[:, five], y_tr, n_classes=6)
cart7 = cart_train(x_tr[:, seven], y_tr, n_classes=6)
print(f"cart            {oa(cart5, five):9.3f}   {oa(cart7, seven):9.3f}")

rf5 = rf_train(x_tr[:, five], y_tr, n_trees=120, n_classes=6, seed=0)
rf7 = rf_train(x_tr[:, seven], y_tr, n_trees=120, n_classes=6, seed=0)
print(f"random forest   {oa(rf5, five):9.3f}   {oa(rf7, seven):9.3f}")
print(f"  (forest OOB error, 7-band: {rf7.oob_error:.3f})")

svm5 = svm_train(x_tr[:, five][::2], y_tr[::2], n_classes=6)
svm7 = svm_train(x_tr[:, seven][::2], y_tr[::2], n_classes=6)
print(f"svm (rbf)       {oa(svm5, five):9.3f}   {oa(svm7, seven):9.3f}")

# Permutation importance: shuffle one feature among each tree's out-of-bag
# rows and measure the error increase. Terrain dominates by construction.
imp = permutation_importance(rf7, x_tr[:, seven], y_tr)
print("\npermutation importance (7-band forest):")
for name, val in sorted(zip(stack.bands, imp), key=lambda kv: -kv[1]):
    print(f"  {name:<9} {val:+.4f}")
