"""The selector network: a compact residual CNN over density-map images.

Layout: 3x3 stem to the first stage width, then three stages of residual
blocks (two 3x3 convs each, identity skip).  The first block of stages two
and three halves the spatial resolution with stride 2 and projects its skip
through a strided 1x1 conv.  Global average pooling and a zero-initialized
affine head produce one logit (or predicted time) per portfolio member.

No normalization layers anywhere: He-initialized weights plus per-image
input scaling keep activations in range at this depth, and gradients stay
exactly checkable against finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ParameterError, ShapeError
from ..rng import child_rng
from . import layers


@dataclass(frozen=True)
class ModelConfig:
    input_side: int = 64
    stage_channels: tuple[int, ...] = (16, 32, 64)
    blocks_per_stage: int = 2
    outputs: int = 2

    def validate(self) -> None:
        if self.input_side < 4 or self.input_side % 4:
            raise ParameterError(f"input_side must be a positive multiple of 4, got {self.input_side}")
        if len(self.stage_channels) != 3 or any(c < 1 for c in self.stage_channels):
            raise ParameterError(f"stage_channels must be three positive widths, got {self.stage_channels}")
        if self.blocks_per_stage < 1:
            raise ParameterError(f"blocks_per_stage must be >= 1, got {self.blocks_per_stage}")
        if self.outputs < 2:
            raise ParameterError(f"outputs must be >= 2, got {self.outputs}")


def _block_specs(config: ModelConfig):
    """Yield (name, c_in, c_out, stride) for every residual block in order."""
    c_prev = config.stage_channels[0]
    for s, c_out in enumerate(config.stage_channels):
        for b in range(config.blocks_per_stage):
            stride = 2 if (s > 0 and b == 0) else 1
            yield f"s{s}b{b}", c_prev, c_out, stride
            c_prev = c_out


def init_params(config: ModelConfig, seed: int) -> dict[str, np.ndarray]:
    """He-normal conv weights, zero biases, zero head: initial logits are 0."""
    config.validate()
    rng = child_rng(seed, 0x1A1)
    params: dict[str, np.ndarray] = {}

    def he_conv(name: str, k: int, c_in: int, c_out: int) -> None:
        std = np.sqrt(2.0 / (c_in * k * k))
        params[f"{name}.w"] = rng.normal(0.0, std, size=(c_out, c_in, k, k))
        params[f"{name}.b"] = np.zeros(c_out)

    he_conv("stem", 3, 1, config.stage_channels[0])
    for name, c_in, c_out, stride in _block_specs(config):
        he_conv(f"{name}.conv1", 3, c_in, c_out)
        he_conv(f"{name}.conv2", 3, c_out, c_out)
        if stride != 1 or c_in != c_out:
            he_conv(f"{name}.proj", 1, c_in, c_out)
    params["head.w"] = np.zeros((config.outputs, config.stage_channels[-1]))
    params["head.b"] = np.zeros(config.outputs)
    return params


def param_count(config: ModelConfig) -> int:
    """Closed-form parameter total; asserted against init_params in tests."""
    c0 = config.stage_channels[0]
    total = c0 * 9 + c0  # stem
    for _, c_in, c_out, stride in _block_specs(config):
        total += c_in * c_out * 9 + c_out  # conv1
        total += c_out * c_out * 9 + c_out  # conv2
        if stride != 1 or c_in != c_out:
            total += c_in * c_out + c_out  # 1x1 projection
    total += config.stage_channels[-1] * config.outputs + config.outputs
    return total


def forward(params: dict[str, np.ndarray], config: ModelConfig, x: np.ndarray):
    """(B, 1, side, side) -> (B, outputs) logits plus the backward cache."""
    if x.ndim != 4 or x.shape[1] != 1 or x.shape[2] != config.input_side or x.shape[3] != config.input_side:
        raise ShapeError(
            f"input must be (batch, 1, {config.input_side}, {config.input_side}), got {x.shape}"
        )
    cache = {}
    h, cache["stem.conv"] = layers.conv2d(x, params["stem.w"], params["stem.b"], stride=1, pad=1)
    h, cache["stem.relu"] = layers.relu(h)
    for name, c_in, c_out, stride in _block_specs(config):
        skip_in = h
        h, cache[f"{name}.conv1"] = layers.conv2d(h, params[f"{name}.conv1.w"], params[f"{name}.conv1.b"], stride=stride, pad=1)
        h, cache[f"{name}.relu1"] = layers.relu(h)
        h, cache[f"{name}.conv2"] = layers.conv2d(h, params[f"{name}.conv2.w"], params[f"{name}.conv2.b"], stride=1, pad=1)
        if f"{name}.proj.w" in params:
            skip, cache[f"{name}.proj"] = layers.conv2d(skip_in, params[f"{name}.proj.w"], params[f"{name}.proj.b"], stride=stride, pad=0)
        else:
            skip = skip_in
        h = h + skip
        h, cache[f"{name}.relu2"] = layers.relu(h)
    pooled, cache["pool"] = layers.global_avg_pool(h)
    logits, cache["head"] = layers.affine(pooled, params["head.w"], params["head.b"])
    return logits, cache


def backward(params: dict[str, np.ndarray], config: ModelConfig, cache, dlogits: np.ndarray) -> dict[str, np.ndarray]:
    """Exact reverse-mode gradients for every parameter."""
    grads: dict[str, np.ndarray] = {}
    dpooled, grads["head.w"], grads["head.b"] = layers.affine_backward(dlogits, cache["head"])
    dh = layers.global_avg_pool_backward(dpooled, cache["pool"])
    for name, c_in, c_out, stride in reversed(list(_block_specs(config))):
        dh = layers.relu_backward(dh, cache[f"{name}.relu2"])
        dskip = dh
        dmain = dh
        dmain, grads[f"{name}.conv2.w"], grads[f"{name}.conv2.b"] = layers.conv2d_backward(dmain, cache[f"{name}.conv2"])
        dmain = layers.relu_backward(dmain, cache[f"{name}.relu1"])
        dmain, grads[f"{name}.conv1.w"], grads[f"{name}.conv1.b"] = layers.conv2d_backward(dmain, cache[f"{name}.conv1"])
        if f"{name}.proj.w" in params:
            dskip, grads[f"{name}.proj.w"], grads[f"{name}.proj.b"] = layers.conv2d_backward(dskip, cache[f"{name}.proj"])
        dh = dmain + dskip
    dh = layers.relu_backward(dh, cache["stem.relu"])
    _, grads["stem.w"], grads["stem.b"] = layers.conv2d_backward(dh, cache["stem.conv"])
    return grads
