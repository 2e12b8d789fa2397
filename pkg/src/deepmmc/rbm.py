"""Greedy layer-wise pretraining with one-step contrastive divergence.

Each RBM stores its visible-to-hidden weights and hidden bias in a single
(D_vis + 1) x D_hid table whose last row is the hidden bias, matching the
bias-row convention of the encoder that the trained stack initializes.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .numeric import BINARY, CONTINUOUS, DataMatrix, logistic_map

logger = logging.getLogger(__name__)

GAUSSIAN = "gaussian"

# Initial weights are Normal(0, INIT_STD); biases start at zero.
INIT_STD = 0.01

DEFAULT_BINARY_RATE = 0.05
DEFAULT_GAUSSIAN_RATE = 0.01


@dataclass(frozen=True)
class RbmLayer:
    """One restricted Boltzmann machine.

    weights is (D_vis + 1) x D_hid with the hidden bias as the last row;
    the visible bias lives in its own length-D_vis vector.  visible_kind
    "gaussian" marks real-valued unit-variance visibles (first layer of a
    stack over continuous data); "binary" marks Bernoulli visibles.
    """

    weights: np.ndarray
    visible_bias: np.ndarray
    visible_kind: str = BINARY

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=float)
        vbias = np.asarray(self.visible_bias, dtype=float)
        if weights.ndim != 2 or weights.shape[0] < 2 or weights.shape[1] < 1:
            raise ValueError(f"weights must be (D_vis+1) x D_hid, got {weights.shape}")
        if vbias.shape != (weights.shape[0] - 1,):
            raise ValueError("visible_bias length must equal D_vis")
        if not (np.isfinite(weights).all() and np.isfinite(vbias).all()):
            raise ValueError("RBM parameters must be finite")
        if self.visible_kind not in (BINARY, GAUSSIAN):
            raise ValueError(f"unknown visible_kind {self.visible_kind!r}")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "visible_bias", vbias)

    @property
    def d_vis(self) -> int:
        return self.weights.shape[0] - 1

    @property
    def d_hid(self) -> int:
        return self.weights.shape[1]


@dataclass(frozen=True)
class PretrainConfig:
    """CD-1 hyperparameters.

    learning_rate None selects the per-kind default: DEFAULT_BINARY_RATE
    for binary visibles, DEFAULT_GAUSSIAN_RATE for gaussian visibles.
    """

    epochs: int = 50
    minibatch_size: int = 32
    learning_rate: float | None = None
    momentum: float = 0.5
    weight_decay: float = 2e-4
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.minibatch_size < 1:
            raise ValueError("minibatch_size must be >= 1")
        if self.learning_rate is not None and not 0 < self.learning_rate < np.inf:
            raise ValueError("learning_rate must be positive and finite")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must be in [0, 1)")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be >= 0")

    def rate_for(self, visible_kind: str) -> float:
        if self.learning_rate is not None:
            return self.learning_rate
        return DEFAULT_GAUSSIAN_RATE if visible_kind == GAUSSIAN else DEFAULT_BINARY_RATE


@dataclass
class Cd1State:
    """Momentum velocities carried across cd1_step calls within one layer."""

    w_velocity: np.ndarray  # (D_vis+1) x D_hid, covers the hidden-bias row
    v_velocity: np.ndarray  # D_vis

    @classmethod
    def zeros(cls, layer: RbmLayer) -> "Cd1State":
        return cls(np.zeros_like(layer.weights), np.zeros_like(layer.visible_bias))


def init_rbm_layer(d_vis: int, d_hid: int, visible_kind: str, rng) -> RbmLayer:
    """Fresh layer: Normal(0, INIT_STD) weights, zero biases."""
    if d_vis < 1 or d_hid < 1:
        raise ValueError("layer dimensions must be >= 1")
    w = rng.normal(0.0, INIT_STD, size=(d_vis, d_hid))
    weights = np.vstack([w, np.zeros((1, d_hid))])
    return RbmLayer(weights, np.zeros(d_vis), visible_kind)


def hidden_activation(layer: RbmLayer, v) -> np.ndarray:
    """Hidden-unit probabilities logistic(v W + hidden bias), row per instance."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 2 or v.shape[1] != layer.d_vis:
        raise ValueError(f"expected batch x {layer.d_vis} visibles, got {v.shape}")
    return logistic_map(v @ layer.weights[:-1] + layer.weights[-1])


def visible_reconstruction(layer: RbmLayer, h) -> np.ndarray:
    """Visible probabilities (binary) or linear means (gaussian) given h."""
    h = np.asarray(h, dtype=float)
    if h.ndim != 2 or h.shape[1] != layer.d_hid:
        raise ValueError(f"expected batch x {layer.d_hid} hiddens, got {h.shape}")
    pre = h @ layer.weights[:-1].T + layer.visible_bias
    if layer.visible_kind == GAUSSIAN:
        return pre
    return logistic_map(pre)


def cd1_step(
    layer: RbmLayer,
    batch,
    cfg: PretrainConfig,
    rng,
    state: Cd1State | None = None,
) -> tuple[RbmLayer, float]:
    """One CD-1 update on a minibatch.

    Positive phase uses hidden probabilities; the hidden states driving the
    reconstruction are sampled; the reconstruction and negative-phase hidden
    values are probabilities/means (never sampled).  Weight decay applies to
    the visible-to-hidden block only, not to biases.  Passing a Cd1State
    carries momentum across calls (it is updated in place).

    Returns the updated layer and the batch mean squared reconstruction
    error.
    """
    batch = np.asarray(batch, dtype=float)
    if batch.ndim != 2 or batch.shape[1] != layer.d_vis:
        raise ValueError(f"expected batch x {layer.d_vis} visibles, got {batch.shape}")
    b = batch.shape[0]

    h_pos = hidden_activation(layer, batch)
    h_sample = (rng.random(h_pos.shape) < h_pos).astype(float)
    v_recon = visible_reconstruction(layer, h_sample)
    h_neg = hidden_activation(layer, v_recon)

    dw = (batch.T @ h_pos - v_recon.T @ h_neg) / b - cfg.weight_decay * layer.weights[:-1]
    dhb = (h_pos - h_neg).mean(axis=0)
    dvb = (batch - v_recon).mean(axis=0)

    if state is None:
        state = Cd1State.zeros(layer)
    rate = cfg.rate_for(layer.visible_kind)
    grad = np.vstack([dw, dhb[None, :]])
    state.w_velocity = cfg.momentum * state.w_velocity + rate * grad
    state.v_velocity = cfg.momentum * state.v_velocity + rate * dvb

    updated = RbmLayer(
        layer.weights + state.w_velocity,
        layer.visible_bias + state.v_velocity,
        layer.visible_kind,
    )
    err = float(np.mean((batch - v_recon) ** 2))
    return updated, err


def train_rbm_layer(
    layer: RbmLayer, data, cfg: PretrainConfig, rng
) -> tuple[RbmLayer, np.ndarray]:
    """Run cfg.epochs of shuffled minibatch CD-1 over the full data matrix.

    Returns the trained layer and the per-epoch mean reconstruction error
    trace (length cfg.epochs).
    """
    data = np.asarray(data, dtype=float)
    n = data.shape[0]
    bs = min(cfg.minibatch_size, n)
    state = Cd1State.zeros(layer)
    errors = np.zeros(cfg.epochs)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        total, seen = 0.0, 0
        for start in range(0, n, bs):
            idx = order[start : start + bs]
            layer, err = cd1_step(layer, data[idx], cfg, rng, state)
            total += err * len(idx)
            seen += len(idx)
        errors[epoch] = total / seen
    return layer, errors


def pretrain_stack(
    x: DataMatrix, layer_sizes: list[int], cfg: PretrainConfig, rng
) -> list[RbmLayer]:
    """Train one RBM per requested layer size, greedily bottom-up.

    The first RBM has gaussian visibles iff the data is continuous; every
    other layer (and binary-kind data) uses binary visibles.  Each layer is
    trained on the deterministic hidden probabilities of the layer below.
    """
    if not layer_sizes:
        raise ValueError("layer_sizes must be non-empty")
    if any(int(s) < 1 for s in layer_sizes):
        raise ValueError("layer sizes must be positive")
    first_kind = GAUSSIAN if x.feature_kind == CONTINUOUS else BINARY
    stack: list[RbmLayer] = []
    current = x.values
    for depth, size in enumerate(layer_sizes):
        kind = first_kind if depth == 0 else BINARY
        layer = init_rbm_layer(current.shape[1], int(size), kind, rng)
        layer, _ = train_rbm_layer(layer, current, cfg, rng)
        stack.append(layer)
        current = hidden_activation(layer, current)
    return stack
