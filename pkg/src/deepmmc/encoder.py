"""Multi-layer logistic encoder: forward mapping, backprop, serialization.

A network is an ordered list of weight tables, each (fan_in + 1) x fan_out;
the last row of every table multiplies a constant 1 appended to the layer
input, which is how biases are carried.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numeric import logistic_map

MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class DeepNet:
    """Immutable stack of layer weight tables with chained dimensions."""

    layers: tuple[np.ndarray, ...]

    def __post_init__(self):
        if not self.layers:
            raise ValueError("DeepNet needs at least one layer")
        layers = tuple(np.asarray(t, dtype=float) for t in self.layers)
        for idx, table in enumerate(layers):
            if table.ndim != 2 or table.shape[0] < 2 or table.shape[1] < 1:
                raise ValueError(f"layer {idx} table must be (fan_in+1) x fan_out")
            if not np.isfinite(table).all():
                raise ValueError(f"layer {idx} has non-finite entries")
            if idx > 0 and layers[idx - 1].shape[1] != table.shape[0] - 1:
                raise ValueError(
                    f"layer {idx} input width {table.shape[0] - 1} does not chain "
                    f"with layer {idx - 1} output width {layers[idx - 1].shape[1]}"
                )
        object.__setattr__(self, "layers", layers)

    @property
    def input_dim(self) -> int:
        return self.layers[0].shape[0] - 1

    @property
    def code_dim(self) -> int:
        return self.layers[-1].shape[1]

    @property
    def depth(self) -> int:
        return len(self.layers)


@dataclass(frozen=True)
class EncodeTrace:
    """Input batch plus every layer activation, kept for backprop."""

    x: np.ndarray
    activations: tuple[np.ndarray, ...]

    @property
    def h(self) -> np.ndarray:
        """Top-layer codes, one row per input row."""
        return self.activations[-1]


def from_rbm_stack(stack) -> DeepNet:
    """Adopt a pretrained RBM stack: each weight table (with its hidden-bias
    row already in place) becomes one encoder layer."""
    if not stack:
        raise ValueError("RBM stack is empty")
    for idx in range(1, len(stack)):
        if stack[idx].d_vis != stack[idx - 1].d_hid:
            raise ValueError(
                f"RBM {idx} visible width {stack[idx].d_vis} does not chain with "
                f"RBM {idx - 1} hidden width {stack[idx - 1].d_hid}"
            )
    return DeepNet(tuple(layer.weights.copy() for layer in stack))


def encode(net: DeepNet, x) -> EncodeTrace:
    """Apply the layer stack: a_l = logistic([a_{l-1}, 1] theta_l), a_0 = x."""
    a = np.asarray(x, dtype=float)
    if a.ndim != 2 or a.shape[1] != net.input_dim:
        raise ValueError(f"expected batch x {net.input_dim} input, got {a.shape}")
    activations = []
    for table in net.layers:
        a = logistic_map(a @ table[:-1] + table[-1])
        activations.append(a)
    return EncodeTrace(x=np.asarray(x, dtype=float), activations=tuple(activations))


def backprop(net: DeepNet, trace: EncodeTrace, dh) -> list[np.ndarray]:
    """Per-layer weight gradients for an upstream code gradient dh.

    delta at the top is dh * a_L * (1 - a_L); below, delta flows through the
    next layer's table with the bias row dropped (the constant-1 channel has
    no upstream input).  Gradient l is [a_{l-1}, 1]^T delta_l.
    """
    dh = np.asarray(dh, dtype=float)
    if len(trace.activations) != net.depth or trace.x.shape[1] != net.input_dim:
        raise ValueError("trace does not belong to this net")
    if dh.shape != trace.h.shape:
        raise ValueError(f"dh shape {dh.shape} must match codes {trace.h.shape}")
    grads: list[np.ndarray | None] = [None] * net.depth
    a_top = trace.activations[-1]
    delta = dh * a_top * (1.0 - a_top)
    for l in reversed(range(net.depth)):
        below = trace.x if l == 0 else trace.activations[l - 1]
        grads[l] = np.vstack([below.T @ delta, delta.sum(axis=0)[None, :]])
        if l > 0:
            delta = (delta @ net.layers[l][:-1].T) * below * (1.0 - below)
    return grads  # type: ignore[return-value]


def apply_update(net: DeepNet, grads, rate: float) -> DeepNet:
    """New net with theta_l <- theta_l - rate * grad_l."""
    if rate < 0:
        raise ValueError("rate must be >= 0")
    if len(grads) != net.depth:
        raise ValueError("one gradient table per layer required")
    updated = []
    for table, grad in zip(net.layers, grads):
        grad = np.asarray(grad, dtype=float)
        if grad.shape != table.shape:
            raise ValueError(f"gradient shape {grad.shape} != layer shape {table.shape}")
        updated.append(table - rate * grad)
    return DeepNet(tuple(updated))


def save_net(path, net: DeepNet, extra_arrays=None, metadata=None) -> None:
    """Write the net (and optional named arrays / scalar metadata) as .npz.

    Container layout, format version 1: key "format_version"; "layer_count";
    "layer_<i>" for each row-major weight table; "extra_<name>" for caller
    arrays; "meta_<name>" for scalar metadata.
    """
    payload = {
        "format_version": np.asarray(MODEL_FORMAT_VERSION),
        "layer_count": np.asarray(net.depth),
    }
    for idx, table in enumerate(net.layers):
        payload[f"layer_{idx}"] = table
    for name, arr in (extra_arrays or {}).items():
        payload[f"extra_{name}"] = np.asarray(arr)
    for name, value in (metadata or {}).items():
        payload[f"meta_{name}"] = np.asarray(value)
    with open(path, "wb") as fh:
        np.savez(fh, **payload)


def load_net(path) -> tuple[DeepNet, dict, dict]:
    """Read a container written by save_net.

    Returns (net, extra_arrays, metadata); metadata values come back as
    python scalars.
    """
    with np.load(path) as data:
        version = int(data["format_version"])
        if version != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported model format version {version}")
        count = int(data["layer_count"])
        layers = tuple(data[f"layer_{idx}"] for idx in range(count))
        extra = {
            key[len("extra_"):]: data[key] for key in data.files if key.startswith("extra_")
        }
        meta = {
            key[len("meta_"):]: data[key].item()
            for key in data.files
            if key.startswith("meta_")
        }
    return DeepNet(layers), extra, meta
