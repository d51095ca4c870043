"""
Small fully-connected networks on flat weight vectors with hand-written backprop.

Flat layout, layer by layer from the input side: the weight matrix of shape
``(out, in)`` in row-major order, then the ``out`` biases. Every layer is
``a = act(W @ x + b)``.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

_ACTIVATIONS = ("tanh", "identity")


@dataclass(frozen=True)
class MlpLayout:
    input_dim: int
    hidden_dims: Tuple[int, ...] = (64, 64)
    output_dim: int = 1
    hidden_activation: str = "tanh"
    output_activation: str = "identity"

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        dims = (self.input_dim,) + self.hidden_dims + (self.output_dim,)
        if min(dims) < 1:
            raise ValueError(f"all layer sizes must be >= 1, got {dims}")
        for act in (self.hidden_activation, self.output_activation):
            if act not in _ACTIVATIONS:
                raise ValueError(f"unknown activation {act!r}")

    @property
    def dims(self):
        return (self.input_dim,) + self.hidden_dims + (self.output_dim,)

    @property
    def shapes(self):
        d = self.dims
        return [(d[i + 1], d[i]) for i in range(len(d) - 1)]

    @property
    def n_params(self):
        return sum((n_in + 1) * n_out for n_out, n_in in self.shapes)

    def activation(self, layer):
        return self.output_activation if layer == len(self.hidden_dims) else self.hidden_activation


class MlpParams:
    """A layout plus the flat parameter vector it indexes."""

    def __init__(self, layout, weights):
        weights = np.ascontiguousarray(weights, dtype=float)
        if weights.shape != (layout.n_params,):
            raise ValueError(f"expected {layout.n_params} weights for {layout}, got shape {weights.shape}")
        self.layout = layout
        self.weights = weights

    def layers(self):
        """Views ``[(W, b), ...]`` into the flat vector (no copies)."""
        return unflatten(self.layout, self.weights)

    def copy(self):
        return MlpParams(self.layout, self.weights.copy())

    def with_weights(self, weights):
        return MlpParams(self.layout, weights)

    def __repr__(self):
        return f"MlpParams({self.layout.dims}, n={self.weights.size})"


def unflatten(layout, flat):
    out, i = [], 0
    for n_out, n_in in layout.shapes:
        W = flat[i:i + n_out * n_in].reshape(n_out, n_in)
        i += n_out * n_in
        b = flat[i:i + n_out]
        i += n_out
        out.append((W, b))
    return out


def flatten(layers):
    return np.concatenate([np.concatenate((W.ravel(), b.ravel())) for W, b in layers])


def init(layout, seed):
    """Uniform fan-in initialization in [-1/sqrt(fan_in), 1/sqrt(fan_in)]; zero biases."""
    rng = np.random.default_rng(seed)
    parts = []
    for n_out, n_in in layout.shapes:
        bound = 1.0 / np.sqrt(n_in)
        parts.append(rng.uniform(-bound, bound, size=n_out * n_in))
        parts.append(np.zeros(n_out))
    return MlpParams(layout, np.concatenate(parts))


@dataclass
class Cache:
    """Per-layer inputs and post-activations from a forward pass."""
    layout: MlpLayout
    inputs: list
    outputs: list
    batched: bool


def forward(params, x):
    """Evaluate the network on one input ``(in,)`` or a batch ``(n, in)``.

    Returns ``(output, cache)``; the cache feeds :func:`backward`.
    """
    x = np.asarray(x, dtype=float)
    layout = params.layout
    batched = x.ndim == 2
    if x.shape[-1] != layout.input_dim or x.ndim not in (1, 2):
        raise ValueError(f"input shape {x.shape} does not match input_dim {layout.input_dim}")
    a = x
    inputs, outputs = [], []
    for k, (W, b) in enumerate(params.layers()):
        inputs.append(a)
        z = a @ W.T + b
        a = np.tanh(z) if layout.activation(k) == "tanh" else z
        outputs.append(a)
    return a, Cache(layout, inputs, outputs, batched)


def backward(params, cache, output_grad):
    """Gradients of ``sum(output_grad * output)`` w.r.t. the weights and the input.

    For a batch, parameter gradients are summed over samples and the input
    gradient keeps the batch axis.
    """
    layout = params.layout
    if cache.layout != layout:
        raise ValueError("cache was produced by a network with a different layout")
    g = np.asarray(output_grad, dtype=float)
    if g.shape != cache.outputs[-1].shape:
        raise ValueError(f"output_grad shape {g.shape} != output shape {cache.outputs[-1].shape}")

    layers = params.layers()
    grads = [None] * len(layers)
    for k in range(len(layers) - 1, -1, -1):
        W, _ = layers[k]
        if layout.activation(k) == "tanh":
            a = cache.outputs[k]
            g = g * (1.0 - a * a)
        x_in = cache.inputs[k]
        if cache.batched:
            gW = g.T @ x_in
            gb = g.sum(axis=0)
        else:
            gW = np.outer(g, x_in)
            gb = g
        grads[k] = (gW, gb)
        g = g @ W
    return flatten(grads), g


def clip_by_norm(grad, clip_norm):
    norm = np.sqrt(grad @ grad)
    if norm > clip_norm:
        return grad * (clip_norm / norm)
    return grad


def sgd_step(params, grad, lr, clip_norm=np.inf, l2=0.0):
    """One clipped, L2-regularized gradient-descent step; returns new params.

    The gradient is rescaled to global norm ``clip_norm`` before the L2 term
    is added, so the decay is not clipped.
    """
    if not lr > 0 or not clip_norm > 0 or l2 < 0:
        raise ValueError(f"invalid step settings lr={lr}, clip_norm={clip_norm}, l2={l2}")
    g = clip_by_norm(np.asarray(grad, dtype=float), clip_norm)
    if l2:
        g = g + l2 * params.weights
    return params.with_weights(params.weights - lr * g)


def huber(e, kappa):
    """Huber loss value and slope at residual ``e``."""
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    if abs(e) <= kappa:
        return 0.5 * e * e, e
    return kappa * abs(e) - 0.5 * kappa * kappa, kappa * np.sign(e)


def mse(e):
    return 0.5 * e * e, e
