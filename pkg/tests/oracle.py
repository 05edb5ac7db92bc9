"""Plain-Python reference forward pass: explicit loops and math.exp, no numpy."""

import math


def rbf(x, c, s):
    d2 = sum((xi - ci) ** 2 for xi, ci in zip(x, c))
    return math.exp(-d2 / (2.0 * s * s))


def affine(W, b, v):
    return [sum(wij * vj for wij, vj in zip(row, v)) + bi for row, bi in zip(W, b)]


def activate(z, kind):
    if kind == "linear":
        return list(z)
    if kind == "sigmoid":
        return [1.0 / (1.0 + math.exp(-v)) for v in z]
    m = max(z)
    e = [math.exp(v - m) for v in z]
    total = sum(e)
    return [v / total for v in e]


def forward(net, x):
    h = [float(v) for v in x]
    for layer in net.hidden_layers:
        a = [rbf(h, c.tolist(), float(s)) for c, s in zip(layer.centers, layer.widths)]
        h = affine(layer.weights.tolist(), layer.biases.tolist(), a)
    z = affine(net.output_weights.tolist(), net.output_biases.tolist(), h)
    return activate(z, net.output_activation)
