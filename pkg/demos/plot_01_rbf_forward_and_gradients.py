"""
A stacked RBF network by hand
=============================

Build a two-layer Gaussian RBF network, run one forward pass, and check the
analytic gradients against central differences.
"""

import numpy as np

from deeprbf import NetworkSpec, backprop, finite_difference_gradients, init_network, network_forward
from deeprbf.training import max_relative_error

rng = np.random.default_rng(0)

# two hidden layers: 5 kernels -> 3 outputs, then 4 kernels -> 2 outputs
spec = NetworkSpec(input_dim=3, hidden_units=(5, 4), hidden_outputs=(3, 2), sigma=0.8)
net = init_network(spec, rng)

x = rng.uniform(size=3)
trace = network_forward(x, net)
for i, (a, h) in enumerate(zip(trace.rbf_activations, trace.affine_outputs)):
    print(f"layer {i}: kernel activations {np.round(a, 3)} -> affine output {np.round(h, 3)}")
print("network output", trace.output)

# every activation lies in (0, 1]; a point sitting on a center scores exactly 1
c0 = net.hidden_layers[0].centers[0]
print("activation at first center:", network_forward(c0, net).rbf_activations[0][0])

target = np.array([0.5])
analytic = backprop(net, trace, target)
numeric = finite_difference_gradients(net, x, target)
print("max relative gradient error:", max_relative_error(analytic, numeric))
