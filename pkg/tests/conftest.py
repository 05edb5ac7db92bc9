import numpy as np
import pytest

from deeprbf.network import NetworkSpec, init_network


def random_spec(rng, max_layers=2, activation=None, output_dim=None):
    depth = int(rng.integers(0, max_layers + 1))
    if activation is None:
        activation = str(rng.choice(["linear", "sigmoid", "softmax"]))
    if output_dim is None:
        output_dim = 1 if activation == "sigmoid" else int(rng.integers(1, 4))
    if activation == "softmax":
        output_dim = max(output_dim, 2)
    return NetworkSpec(
        input_dim=int(rng.integers(1, 5)),
        hidden_units=tuple(int(u) for u in rng.integers(1, 6, size=depth)),
        hidden_outputs=tuple(int(u) for u in rng.integers(1, 5, size=depth)),
        sigma=float(rng.uniform(0.5, 2.0)),
        output_dim=output_dim,
        output_activation=activation,
    )


def random_net(rng, **kw):
    spec = random_spec(rng, **kw)
    net = init_network(spec, rng, weight_bound=1.0)
    # perturb widths and biases so no parameter sits at a special value
    geometry = [(c, w * rng.uniform(0.7, 1.3, size=w.shape)) for c, w in net.geometry]
    hidden = [(l.weights, rng.normal(0, 0.3, size=l.biases.shape)) for l in net.hidden_layers]
    out = (net.output_weights, rng.normal(0, 0.3, size=net.output_biases.shape))
    return net.with_parameters(hidden=hidden, output=out, geometry=geometry)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
