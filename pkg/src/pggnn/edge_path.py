"""Edge translation path: residual multi-branch blocks over the pairwise map."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import (Module, Tensor, conv2d, elu, instance_norm, matmul, parameter,
                       softmax)


class NonFiniteActivationError(FloatingPointError):
    pass


def _uniform(rng, shape, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, shape)


def pointwise(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """1×1 convolution: channel mixing at every (i, j)."""
    c, h, w = x.shape
    out = matmul(weight, x.reshape(c, h * w))
    if bias is not None:
        out = out + bias.reshape(-1, 1)
    return out.reshape(weight.shape[0], h, w)


def edge_to_edge_conv(A: Tensor, w_row: Tensor, w_col: Tensor, bias: Tensor | None = None,
                      act=elu, normalize: bool = True) -> Tensor:
    """Cross-shaped filter: out(i, j) = act(W·Σ_n A(i, n) + H·Σ_n A(n, j) + b).

    Row and column sums are divided by L when ``normalize`` is set.  ``w_row``
    and ``w_col`` are C_out×C_in channel mixers; ``act=None`` skips the
    nonlinearity.
    """
    c, L, _ = A.shape
    row = A.sum(axis=2)                                     # C×L, indexed by i
    col = A.sum(axis=1)                                     # C×L, indexed by j
    if normalize:
        row, col = row * (1.0 / L), col * (1.0 / L)
    r = matmul(w_row, row)
    k = matmul(w_col, col)
    if bias is not None:
        r = r + bias.reshape(-1, 1)
    c_out = w_row.shape[0]
    out = r.reshape(c_out, L, 1) + k.reshape(c_out, 1, L)
    return act(out) if act is not None else out


class EdgeBlock(Module):
    """Identity + edge-to-edge branch + N-layer conv branch, summed."""

    def __init__(self, channels: int, layers: int, dilations, rng: np.random.Generator):
        C = channels
        self.dilations = tuple(dilations)
        self.e2e_row = parameter(_uniform(rng, (C, C), 2 * C, C))
        self.e2e_col = parameter(_uniform(rng, (C, C), 2 * C, C))
        self.e2e_bias = parameter(np.zeros(C))
        self.kernels = [parameter(_uniform(rng, (C, C, 3, 3), 9 * C, 9 * C)) for _ in range(layers)]
        self.gammas = [parameter(np.ones(C)) for _ in range(layers)]
        self.betas = [parameter(np.zeros(C)) for _ in range(layers)]

    def __call__(self, A: Tensor) -> Tensor:
        e2e = edge_to_edge_conv(A, self.e2e_row, self.e2e_col, self.e2e_bias)
        x = A
        for kernel, gamma, beta, dil in zip(self.kernels, self.gammas, self.betas, self.dilations):
            x = elu(instance_norm(conv2d(x, kernel, dil), gamma, beta))
        return A + e2e + x


@dataclass
class EdgePathOutput:
    logits: Tensor          # B×L×L, symmetrized
    probabilities: Tensor   # B×L×L, softmax over bins

    @property
    def contact_map(self) -> np.ndarray:
        return self.probabilities.data[0]


class EdgePath(Module):
    def __init__(self, in_channels: int, channels: int = 48, blocks: int = 10, layers: int = 4,
                 bins: int = 2, dilations=(1, 2, 4, 1), rng: np.random.Generator | None = None):
        rng = rng or np.random.default_rng(0)
        dilations = tuple(dilations) if dilations else (1,) * layers
        if len(dilations) != layers:
            raise ValueError(f"need {layers} dilation rates, got {dilations}")
        self.proj = parameter(_uniform(rng, (channels, in_channels), in_channels, channels))
        self.proj_bias = parameter(np.zeros(channels))
        self.blocks = [EdgeBlock(channels, layers, dilations, rng) for _ in range(blocks)]
        self.classifier = parameter(_uniform(rng, (bins, channels), channels, bins))
        self.classifier_bias = parameter(np.zeros(bins))

    def __call__(self, x: Tensor) -> EdgePathOutput:
        A = pointwise(x, self.proj, self.proj_bias)
        for s, block in enumerate(self.blocks):
            A = block(A)
            if not np.all(np.isfinite(A.data)):
                raise NonFiniteActivationError(f"non-finite activation after edge block {s}")
        raw = pointwise(A, self.classifier, self.classifier_bias)
        logits = (raw + raw.transpose(0, 2, 1)) * 0.5
        return EdgePathOutput(logits, softmax(logits, axis=0))
