"""
Evolving weights versus descending gradients
============================================

Fit a noisy sine with the same network twice: once by the genetic
algorithm (population 100, 100 generations) and once by per-sample
gradient descent, then let backprop fine-tune the GA result.
"""

import numpy as np

from deeprbf import GaConfig, NetworkSpec, TrainingConfig, evolve, init_network, train
from deeprbf.training import mean_loss

rng = np.random.default_rng(1)
X = np.sort(rng.uniform(size=(80, 1)), axis=0)
Y = 0.5 + 0.4 * np.sin(2 * np.pi * X) + rng.normal(0, 0.03, size=X.shape)

spec = NetworkSpec(1, hidden_units=(10,), hidden_outputs=(4,), sigma=0.15)
start = init_network(spec, np.random.default_rng(2), "sample_from_data", data=X)
print(f"initial MSE        {mean_loss(start, X, Y):.5f}")

ga_net, fit = evolve(spec, X, Y, GaConfig(seed=3), geometry=start.geometry)
print(f"GA best MSE        {fit.best[-1]:.5f}  (generation 0: {fit.best[0]:.5f})")

cfg = TrainingConfig(learning_rate=0.05, num_epochs=200, batch_mode="per_sample", seed=4)
bp_net, hist = train(start, X, Y, cfg)
print(f"backprop MSE       {mean_loss(bp_net, X, Y):.5f}")

hy_net, _ = train(ga_net, X, Y, cfg)
print(f"GA + backprop MSE  {mean_loss(hy_net, X, Y):.5f}")

# elitism keeps the best genome, so the best-fitness curve never rises
assert all(b <= a for a, b in zip(fit.best, fit.best[1:]))
