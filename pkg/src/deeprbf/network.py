"""Deep RBF network: data model, forward pass, initialization and model files.

Each hidden layer is a bank of Gaussian kernels followed by an affine map;
the output layer is affine followed by a linear, sigmoid or softmax
activation.  All arrays are float64 and read-only once a network is built.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, DimensionError

ACTIVATIONS = ("linear", "sigmoid", "softmax")
CENTER_STRATEGIES = ("random_uniform", "sample_from_data")


def _frozen(a, ndim, name):
    arr = np.array(a, dtype=np.float64)
    if arr.ndim != ndim:
        raise DimensionError(f"{name} must be {ndim}-D, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class NetworkSpec:
    """Architecture hyperparameters.

    ``hidden_units[i]`` is the number of RBF kernels in hidden layer ``i`` and
    ``hidden_outputs[i]`` the width of that layer's affine output.
    """

    input_dim: int
    hidden_units: tuple[int, ...] = ()
    hidden_outputs: tuple[int, ...] = ()
    sigma: float = 1.0
    output_dim: int = 1
    output_activation: str = "linear"

    def __post_init__(self):
        object.__setattr__(self, "hidden_units", tuple(int(u) for u in self.hidden_units))
        object.__setattr__(self, "hidden_outputs", tuple(int(u) for u in self.hidden_outputs))
        if int(self.input_dim) < 1 or int(self.output_dim) < 1:
            raise ConfigError("input_dim and output_dim must be >= 1")
        if len(self.hidden_units) != len(self.hidden_outputs):
            raise ConfigError("hidden_units and hidden_outputs must have equal length")
        if any(u < 1 for u in self.hidden_units + self.hidden_outputs):
            raise ConfigError("hidden unit counts and output dims must be >= 1")
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ConfigError(f"sigma must be positive and finite, got {self.sigma}")
        if self.output_activation not in ACTIVATIONS:
            raise ConfigError(f"unknown output activation {self.output_activation!r}")

    def to_dict(self):
        return {
            "input_dim": int(self.input_dim),
            "hidden_units": list(self.hidden_units),
            "hidden_outputs": list(self.hidden_outputs),
            "sigma": float(self.sigma),
            "output_dim": int(self.output_dim),
            "output_activation": self.output_activation,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            input_dim=d["input_dim"],
            hidden_units=tuple(d.get("hidden_units", ())),
            hidden_outputs=tuple(d.get("hidden_outputs", ())),
            sigma=d.get("sigma", 1.0),
            output_dim=d.get("output_dim", 1),
            output_activation=d.get("output_activation", "linear"),
        )

    def layout(self):
        """``([(W_shape, b_shape) per hidden layer], (W_shape, b_shape) of the output)``."""
        shapes = []
        fan_in = self.input_dim
        for units, out in zip(self.hidden_units, self.hidden_outputs):
            shapes.append(((out, units), (out,)))
            fan_in = out
        return shapes, ((self.output_dim, fan_in), (self.output_dim,))

    def fingerprint(self):
        """Hash of the parameter layout; ``sigma`` is an init value and is excluded."""
        d = self.to_dict()
        del d["sigma"]
        blob = json.dumps(d, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class RbfUnit:
    center: np.ndarray
    width: float

    def __post_init__(self):
        if not self.width > 0:
            raise ConfigError(f"RBF width must be > 0, got {self.width}")


@dataclass(frozen=True, eq=False)
class RbfLayer:
    """A kernel bank of ``M`` Gaussian units followed by ``weights @ a + biases``."""

    centers: np.ndarray  # (M, input_dim)
    widths: np.ndarray  # (M,)
    weights: np.ndarray  # (output_dim, M)
    biases: np.ndarray  # (output_dim,)

    def __post_init__(self):
        centers = _frozen(self.centers, 2, "centers")
        widths = _frozen(self.widths, 1, "widths")
        weights = _frozen(self.weights, 2, "weights")
        biases = _frozen(self.biases, 1, "biases")
        if widths.shape[0] != centers.shape[0]:
            raise DimensionError("one width per center required")
        if not np.all(widths > 0):
            raise ConfigError("all RBF widths must be > 0")
        if weights.shape[1] != centers.shape[0]:
            raise DimensionError(
                f"weights have {weights.shape[1]} columns but layer has {centers.shape[0]} units"
            )
        if biases.shape[0] != weights.shape[0]:
            raise DimensionError("biases length must equal weights row count")
        for name, arr in (("centers", centers), ("widths", widths), ("weights", weights), ("biases", biases)):
            object.__setattr__(self, name, arr)

    @classmethod
    def from_units(cls, units: Sequence[RbfUnit], weights, biases):
        if not units:
            raise DimensionError("a layer needs at least one unit")
        dims = {np.asarray(u.center).shape for u in units}
        if len(dims) != 1:
            raise DimensionError("all units in a layer must share one input dimension")
        return cls(np.stack([u.center for u in units]), [u.width for u in units], weights, biases)

    @property
    def units(self):
        return tuple(RbfUnit(c, float(w)) for c, w in zip(self.centers, self.widths))

    @property
    def input_dim(self):
        return self.centers.shape[1]

    @property
    def n_units(self):
        return self.centers.shape[0]

    @property
    def output_dim(self):
        return self.weights.shape[0]

    def __eq__(self, other):
        if not isinstance(other, RbfLayer):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, n), getattr(other, n))
            for n in ("centers", "widths", "weights", "biases")
        )


@dataclass(frozen=True, eq=False)
class RbfNetwork:
    input_dim: int
    hidden_layers: tuple[RbfLayer, ...]
    output_weights: np.ndarray
    output_biases: np.ndarray
    output_activation: str = "linear"

    def __post_init__(self):
        object.__setattr__(self, "hidden_layers", tuple(self.hidden_layers))
        w = _frozen(self.output_weights, 2, "output_weights")
        b = _frozen(self.output_biases, 1, "output_biases")
        object.__setattr__(self, "output_weights", w)
        object.__setattr__(self, "output_biases", b)
        if self.output_activation not in ACTIVATIONS:
            raise ConfigError(f"unknown output activation {self.output_activation!r}")
        dim = int(self.input_dim)
        for i, layer in enumerate(self.hidden_layers):
            if layer.input_dim != dim:
                raise DimensionError(
                    f"hidden layer {i} expects input dim {layer.input_dim}, previous stage gives {dim}"
                )
            dim = layer.output_dim
        if w.shape[1] != dim:
            raise DimensionError(f"output_weights need {dim} columns, got {w.shape[1]}")
        if b.shape[0] != w.shape[0]:
            raise DimensionError("output_biases length must equal output_weights row count")

    @property
    def output_dim(self):
        return self.output_biases.shape[0]

    @property
    def spec(self) -> NetworkSpec:
        sigmas = [float(l.widths[0]) for l in self.hidden_layers]
        return NetworkSpec(
            input_dim=self.input_dim,
            hidden_units=tuple(l.n_units for l in self.hidden_layers),
            hidden_outputs=tuple(l.output_dim for l in self.hidden_layers),
            sigma=sigmas[0] if sigmas else 1.0,
            output_dim=self.output_dim,
            output_activation=self.output_activation,
        )

    @property
    def geometry(self):
        """Per-layer ``(centers, widths)``; the part of the model held fixed by default."""
        return tuple((l.centers, l.widths) for l in self.hidden_layers)

    def with_parameters(self, hidden, output, geometry=None) -> "RbfNetwork":
        """Copy of this network with new ``[(W, b), ...]`` hidden and ``(W, b)`` output parameters."""
        geometry = self.geometry if geometry is None else geometry
        layers = tuple(
            RbfLayer(c, s, w, b) for (c, s), (w, b) in zip(geometry, hidden)
        )
        return RbfNetwork(self.input_dim, layers, output[0], output[1], self.output_activation)

    def __eq__(self, other):
        if not isinstance(other, RbfNetwork):
            return NotImplemented
        return (
            self.input_dim == other.input_dim
            and self.output_activation == other.output_activation
            and self.hidden_layers == other.hidden_layers
            and np.array_equal(self.output_weights, other.output_weights)
            and np.array_equal(self.output_biases, other.output_biases)
        )


@dataclass(frozen=True)
class ForwardTrace:
    """Every intermediate vector of one forward pass (rows are samples for batch input)."""

    input: np.ndarray
    rbf_activations: tuple[np.ndarray, ...]
    affine_outputs: tuple[np.ndarray, ...]
    output_pre_activation: np.ndarray
    output: np.ndarray

    def layer_input(self, i):
        return self.input if i == 0 else self.affine_outputs[i - 1]

    @property
    def last_hidden(self):
        return self.affine_outputs[-1] if self.affine_outputs else self.input


def gaussian_rbf(x, c, sigma) -> float:
    """exp(-||x - c||^2 / (2 sigma^2))."""
    x = np.asarray(x, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    if x.shape != c.shape:
        raise DimensionError(f"input shape {x.shape} does not match center shape {c.shape}")
    if not sigma > 0:
        raise ConfigError(f"sigma must be > 0, got {sigma}")
    d = x - c
    return float(np.exp(-np.dot(d.ravel(), d.ravel()) / (2.0 * sigma * sigma)))


def kernel_bank(h, centers, widths):
    """Gaussian activations of a batch ``h`` (n, d) against ``centers`` (M, d)."""
    diff = h[:, None, :] - centers[None, :, :]
    sq = np.einsum("nmd,nmd->nm", diff, diff)
    return np.exp(-sq / (2.0 * widths * widths))


def _as_batch(x, dim):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    batch = x[None, :] if single else x
    if batch.ndim != 2 or batch.shape[1] != dim:
        raise DimensionError(f"expected input dimension {dim}, got shape {x.shape}")
    return batch, single


def rbf_layer_forward(input, layer: RbfLayer):
    """Return ``(rbf_activations, affine_output)`` for a vector or a batch of rows."""
    h, single = _as_batch(input, layer.input_dim)
    a = kernel_bank(h, layer.centers, layer.widths)
    z = a @ layer.weights.T + layer.biases
    if single:
        return a[0], z[0]
    return a, z


def output_activation_apply(z, kind):
    z = np.asarray(z, dtype=np.float64)
    if z.size == 0 or z.shape[-1] == 0:
        raise DimensionError("activation of an empty vector")
    if kind == "linear":
        return z.copy()
    if kind == "sigmoid":
        # split by sign so exp never overflows
        out = np.empty_like(z)
        pos = z >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
        ez = np.exp(z[~pos])
        out[~pos] = ez / (1.0 + ez)
        return out
    if kind == "softmax":
        e = np.exp(z - z.max(axis=-1, keepdims=True))
        return e / e.sum(axis=-1, keepdims=True)
    raise ConfigError(f"unknown output activation {kind!r}")


def network_forward(input, net: RbfNetwork) -> ForwardTrace:
    x, single = _as_batch(input, net.input_dim)
    acts, affs = [], []
    h = x
    for layer in net.hidden_layers:
        a, h = rbf_layer_forward(h, layer)
        acts.append(a)
        affs.append(h)
    pre = h @ net.output_weights.T + net.output_biases
    out = output_activation_apply(pre, net.output_activation)
    if single:
        return ForwardTrace(x[0], tuple(a[0] for a in acts), tuple(z[0] for z in affs), pre[0], out[0])
    return ForwardTrace(x, tuple(acts), tuple(affs), pre, out)


def predict(net: RbfNetwork, X) -> np.ndarray:
    return network_forward(X, net).output


def init_network(
    spec: NetworkSpec,
    rng: np.random.Generator,
    center_strategy: str = "random_uniform",
    data=None,
    weight_bound: Optional[float] = None,
) -> RbfNetwork:
    """Randomly initialize a network for ``spec``.

    Weights are uniform in ``[-w0, w0]`` with ``w0 = 1/sqrt(fan_in)`` unless
    ``weight_bound`` is given; biases start at zero and every width at
    ``spec.sigma``.  With ``random_uniform`` the first layer's centers are
    drawn from the unit cube (inputs are min-max normalized) and deeper
    layers' from ``[-1, 1]``.  With ``sample_from_data`` first-layer centers
    are rows of ``data`` and deeper centers are those rows propagated through
    the layers already built.
    """
    if not isinstance(spec, NetworkSpec):
        raise ConfigError("spec must be a NetworkSpec")
    if center_strategy not in CENTER_STRATEGIES:
        raise ConfigError(f"unknown center strategy {center_strategy!r}")
    if weight_bound is not None and weight_bound < 0:
        raise ConfigError("weight_bound must be >= 0")
    if center_strategy == "sample_from_data":
        if data is None:
            raise ConfigError("sample_from_data needs a dataset")
        pool = np.asarray(data, dtype=np.float64)
        if pool.ndim != 2 or pool.shape[0] == 0:
            raise ConfigError("sample_from_data needs a non-empty 2-D dataset")
        if pool.shape[1] != spec.input_dim:
            raise DimensionError(f"dataset has {pool.shape[1]} features, spec expects {spec.input_dim}")

    def bound(fan_in):
        return 1.0 / math.sqrt(fan_in) if weight_bound is None else float(weight_bound)

    layers = []
    dim = spec.input_dim
    for depth, (units, out) in enumerate(zip(spec.hidden_units, spec.hidden_outputs)):
        if center_strategy == "sample_from_data":
            idx = rng.choice(pool.shape[0], size=units, replace=pool.shape[0] < units)
            centers = pool[idx]
        elif depth == 0:
            centers = rng.uniform(0.0, 1.0, size=(units, dim))
        else:
            centers = rng.uniform(-1.0, 1.0, size=(units, dim))
        w0 = bound(units)
        weights = rng.uniform(-w0, w0, size=(out, units))
        layer = RbfLayer(centers, np.full(units, spec.sigma), weights, np.zeros(out))
        layers.append(layer)
        if center_strategy == "sample_from_data":
            pool = rbf_layer_forward(pool, layer)[1]
        dim = out
    w0 = bound(dim)
    out_w = rng.uniform(-w0, w0, size=(spec.output_dim, dim))
    return RbfNetwork(spec.input_dim, tuple(layers), out_w, np.zeros(spec.output_dim), spec.output_activation)


# -- model files -------------------------------------------------------------

def network_to_dict(net: RbfNetwork, norm_stats=None, seed=None, **extra):
    d = {
        "spec": net.spec.to_dict(),
        "layers": [
            {
                "centers": l.centers.tolist(),
                "widths": l.widths.tolist(),
                "weights": l.weights.tolist(),
                "biases": l.biases.tolist(),
            }
            for l in net.hidden_layers
        ],
        "output": {
            "weights": net.output_weights.tolist(),
            "biases": net.output_biases.tolist(),
            "activation": net.output_activation,
        },
        "norm_stats": norm_stats,
        "seed": seed,
    }
    d.update(extra)
    return d


def network_from_dict(d) -> RbfNetwork:
    spec = d["spec"]
    layers = tuple(
        RbfLayer(l["centers"], l["widths"], l["weights"], l["biases"]) for l in d["layers"]
    )
    out = d["output"]
    return RbfNetwork(int(spec["input_dim"]), layers, out["weights"], out["biases"], out["activation"])


def dumps_model(net: RbfNetwork, norm_stats=None, seed=None, **extra) -> str:
    # json writes floats with repr(), the shortest string that round-trips exactly
    return json.dumps(network_to_dict(net, norm_stats, seed, **extra), indent=1, allow_nan=False) + "\n"


def loads_model(text: str):
    """Parse a model file; returns ``(network, full_document)``."""
    doc = json.loads(text)
    return network_from_dict(doc), doc


def network_hash(net: RbfNetwork) -> str:
    return hashlib.sha256(dumps_model(net).encode()).hexdigest()[:16]
