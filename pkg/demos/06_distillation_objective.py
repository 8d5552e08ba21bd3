"""The alignment objective: cosine distance summed over per-level readouts,
its closed-form gradient, and a small projection fit that drives it down."""

import numpy as np

from wavetok.distill import distill_loss, distill_loss_grad, fit_projection

rng = np.random.RandomState(0)
teacher = rng.randn(16)

# perfectly aligned readouts cost nothing; an antipodal one costs 2
aligned = np.stack([teacher, 2.0 * teacher, 0.5 * teacher])
print(f"loss of three aligned readouts: {distill_loss(aligned, teacher):.2e}")
print(f"loss of one antipodal readout:  {distill_loss(-teacher, teacher):.2f}")

# the gradient never pushes along v itself (cosine ignores scale)
v = rng.randn(16)
g = distill_loss_grad(v, teacher)
print(f"<grad, v> = {float(g @ v):+.2e}  (always ~0)")

# finite differences agree with the closed form
h = 1e-6
fd = np.array([
    (distill_loss(v + h * e, teacher) - distill_loss(v - h * e, teacher)) / (2 * h)
    for e in np.eye(16)
])
print(f"max |closed-form - finite-diff| = {np.abs(g - fd).max():.2e}")

# train just a projection: 8 hidden states onto 8 teacher directions
hidden = rng.randn(8, 12)
targets = rng.randn(8, 16)
result = fit_projection(hidden, targets, steps=200, learning_rate=0.5)
print("\nprojection fit (cosine loss, 8 samples):")
for step in (0, 10, 50, 100, 200):
    print(f"  step {step:3d}: loss {result.history[step]:.4f}")
print(f"diverged: {result.diverged}")
