"""Toy multi-level backbone, FPN fusion, RPN head, and loss functions.

The network is deliberately small and untrained: its job is to provide a
deterministic forward path with the right shapes, not accuracy.  Weights
are drawn uniformly from [-1/sqrt(fan_in), +1/sqrt(fan_in)] using numpy's
PCG64 generator, whose integer stream (and the 53-bit uniform mapping on
top of it) is identical on every platform; biases start at zero.  Draw
order is the layer construction order documented in each function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ShapeError

DEFAULT_LATERAL_CHANNELS = 16


@dataclass(frozen=True, eq=False)
class FeatureMap:
    """Dense (channels, height, width) float64 grid, immutable after creation."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float64)
        if arr.ndim != 3:
            raise ShapeError(f"feature map must be 3-D, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ShapeError("feature map contains non-finite values")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class PyramidSpec:
    """Per-level stride and channel width for the C2..C5 taps."""

    levels: tuple[int, ...] = (2, 3, 4, 5)
    strides: tuple[int, ...] = (4, 8, 16, 32)
    channels: tuple[int, ...] = (8, 16, 32, 64)

    def __post_init__(self):
        if not (len(self.levels) == len(self.strides) == len(self.channels)):
            raise ValueError("levels, strides and channels must align")
        if any(b <= a for a, b in zip(self.strides, self.strides[1:])):
            raise ValueError("strides must be strictly increasing")


DEFAULT_PYRAMID = PyramidSpec()


def _init_conv(rng: np.random.Generator, c_out: int, c_in: int, k: int):
    limit = 1.0 / math.sqrt(c_in * k * k)
    w = rng.uniform(-limit, limit, size=(c_out, c_in, k, k))
    return w, np.zeros(c_out)


def _conv2d(x: np.ndarray, w: np.ndarray, b: np.ndarray, stride: int = 1) -> np.ndarray:
    """'Same' zero-padded convolution; stride 2 halves even spatial sizes."""
    k = w.shape[2]
    if k == 1:
        out = np.tensordot(w[:, :, 0, 0], x, axes=(1, 0))
    else:
        pad = k // 2
        xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
        view = sliding_window_view(xp, (k, k), axis=(1, 2))
        if stride != 1:
            view = view[:, ::stride, ::stride]
        out = np.tensordot(w, view, axes=([1, 2, 3], [0, 3, 4]))
    return out + b[:, None, None]


def _relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def _residual_block(x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    c = x.shape[0]
    w1, b1 = _init_conv(rng, c, c, 3)
    w2, b2 = _init_conv(rng, c, c, 3)
    return _relu(x + _conv2d(_relu(_conv2d(x, w1, b1)), w2, b2))


def backbone_forward(image: FeatureMap, seed: int,
                     spec: PyramidSpec = DEFAULT_PYRAMID) -> list[FeatureMap]:
    """Run the seeded toy backbone; returns the C2..C5 taps.

    The input must have 1-3 channels and spatial sides divisible by 32.
    Weight draw order: two stride-2 stem convolutions, the C2 residual
    block, then per level a stride-2 downsample convolution followed by a
    residual block.
    """
    if not 1 <= image.channels <= 3:
        raise ShapeError(f"expected 1-3 input channels, got {image.channels}")
    if image.height % 32 or image.width % 32:
        raise ShapeError(
            f"image sides must be divisible by 32, got {image.height}x{image.width}")

    rng = np.random.Generator(np.random.PCG64(seed))
    x = image.data
    w, b = _init_conv(rng, spec.channels[0], image.channels, 3)
    x = _relu(_conv2d(x, w, b, stride=2))
    w, b = _init_conv(rng, spec.channels[0], spec.channels[0], 3)
    x = _relu(_conv2d(x, w, b, stride=2))
    x = _residual_block(x, rng)
    taps = [x]
    for c_out in spec.channels[1:]:
        w, b = _init_conv(rng, c_out, x.shape[0], 3)
        x = _relu(_conv2d(x, w, b, stride=2))
        x = _residual_block(x, rng)
        taps.append(x)
    return [FeatureMap(t) for t in taps]


def upsample2x(x: np.ndarray, mode: str = "nearest") -> np.ndarray:
    """Double the spatial size of a (C, H, W) array."""
    if mode == "nearest":
        return np.repeat(np.repeat(x, 2, axis=1), 2, axis=2)
    if mode == "bilinear":
        c, h, w = x.shape

        def coords(n):
            # output pixel centers in input coordinates, edges replicated
            src = np.clip((np.arange(2 * n) + 0.5) / 2.0 - 0.5, 0.0, n - 1.0)
            lo = np.floor(src).astype(int)
            return lo, np.minimum(lo + 1, n - 1), src - lo

        i0, i1, ty = coords(h)
        rows = x[:, i0, :] * (1 - ty)[None, :, None] + x[:, i1, :] * ty[None, :, None]
        j0, j1, tx = coords(w)
        return rows[:, :, j0] * (1 - tx)[None, None, :] + rows[:, :, j1] * tx[None, None, :]
    raise ValueError(f"unknown upsample mode {mode!r}")


def fpn_fuse(c_maps: Sequence[FeatureMap], lateral_channels: int = DEFAULT_LATERAL_CHANNELS,
             seed: int = 0, mode: str = "nearest") -> list[FeatureMap]:
    """Top-down fusion: P5 = lateral(C5); P_k = lateral(C_k) + up2(P_{k+1}).

    Lateral 1x1 convolution weights are drawn per level in ascending level
    order (C2 first).  Each input map must be exactly twice the spatial
    size of the next coarser one.
    """
    for fine, coarse in zip(c_maps, c_maps[1:]):
        if fine.height != 2 * coarse.height or fine.width != 2 * coarse.width:
            raise ShapeError(
                f"pyramid spatial sizes must halve: {fine.height}x{fine.width} "
                f"-> {coarse.height}x{coarse.width}")
    rng = np.random.Generator(np.random.PCG64(seed))
    laterals = []
    for c_map in c_maps:
        w, b = _init_conv(rng, lateral_channels, c_map.channels, 1)
        laterals.append(_conv2d(c_map.data, w, b))
    fused = [laterals[-1]]
    for lat in reversed(laterals[:-1]):
        fused.append(lat + upsample2x(fused[-1], mode))
    return [FeatureMap(f) for f in reversed(fused)]


def rpn_head(p_map: FeatureMap, num_shapes: int, seed: int) -> tuple[FeatureMap, FeatureMap]:
    """Objectness and per-corner offsets over one pyramid level.

    A 3x3 convolution with rectifier feeds two sibling 1x1 convolutions:
    ``num_shapes`` sigmoid objectness channels and ``8 * num_shapes``
    offset channels (channel 8k+c is component c of shape k's Delta8).
    Draw order: hidden conv, objectness conv, offset conv.
    """
    if num_shapes < 1:
        raise ValueError("num_shapes must be >= 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    c = p_map.channels
    w, b = _init_conv(rng, c, c, 3)
    hidden = _relu(_conv2d(p_map.data, w, b))
    w, b = _init_conv(rng, num_shapes, c, 1)
    logits = _conv2d(hidden, w, b)
    objectness = 1.0 / (1.0 + np.exp(-logits))
    w, b = _init_conv(rng, 8 * num_shapes, c, 1)
    deltas = _conv2d(hidden, w, b)
    return FeatureMap(objectness), FeatureMap(deltas)


def smooth_l1(pred: Sequence[float], target: Sequence[float]) -> tuple[float, tuple[float, ...]]:
    """Smooth L1 loss summed over components, with its analytic gradient.

    Per component d = pred - target: 0.5*d**2 inside |d| < 1, |d| - 0.5
    outside; the gradient w.r.t. pred is d inside and sign(d) outside.
    """
    if len(pred) != len(target):
        raise ValueError("pred and target lengths differ")
    loss = 0.0
    grad = []
    for p, t in zip(pred, target):
        d = float(p) - float(t)
        if abs(d) < 1.0:
            loss += 0.5 * d * d
            grad.append(d)
        else:
            loss += abs(d) - 0.5
            grad.append(1.0 if d > 0 else -1.0)
    return loss, tuple(grad)


def softmax_ce(logits: Sequence[float], label: int) -> tuple[float, tuple[float, ...]]:
    """Cross-entropy of softmax(logits) against ``label``, with gradient.

    Stabilized by max subtraction; the gradient is softmax(logits) minus
    the one-hot label.  Raises IndexError for an out-of-range label.
    """
    n = len(logits)
    if n < 2:
        raise ValueError("need at least 2 classes")
    if not 0 <= label < n:
        raise IndexError(f"label {label} out of range for {n} classes")
    m = max(float(v) for v in logits)
    exps = [math.exp(float(v) - m) for v in logits]
    z = math.fsum(exps)
    loss = math.log(z) - (float(logits[label]) - m)
    grad = tuple(e / z - (1.0 if i == label else 0.0) for i, e in enumerate(exps))
    return loss, grad
