"""Node translation path: edge-conditioned message passing, GRU updates, readout."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import GRUParams, Module, Tensor, gru_cell, matmul, parameter, relu


def _uniform(rng, shape, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, shape)


class EdgeNetwork(Module):
    """Two-layer perceptron mapping a B-vector e_vw to a d_h×d_h matrix A_vw."""

    def __init__(self, bins: int, hidden_dim: int, state_dim: int, rng: np.random.Generator):
        self.state_dim = state_dim
        self.w1 = parameter(_uniform(rng, (bins, hidden_dim), bins, hidden_dim))
        self.b1 = parameter(np.zeros(hidden_dim))
        self.w2 = parameter(_uniform(rng, (hidden_dim, state_dim * state_dim), hidden_dim, state_dim))
        self.b2 = parameter(np.zeros(state_dim * state_dim))

    def hidden(self, e: Tensor) -> Tensor:
        return relu(e @ self.w1 + self.b1)

    def matrices(self, e: np.ndarray) -> np.ndarray:
        """Explicit A_vw for every row of ``e`` (n×B -> n×d_h×d_h); used for inspection."""
        z = np.maximum(e @ self.w1.data + self.b1.data, 0.0)
        d = self.state_dim
        return (z @ self.w2.data + self.b2.data).reshape(-1, d, d)


def message_step(h: Tensor, e: Tensor, net: EdgeNetwork, pair_mask: np.ndarray | None = None) -> Tensor:
    """m_v = (1/L) Σ_{w≠v} A(e_vw) h_w with A produced by ``net``.

    ``e`` is L×L×B.  The perceptron's last layer is linear, so the sum is taken
    over its hidden units instead of materializing L² matrices.
    ``pair_mask`` (L×L, optional) further restricts which w contribute to v.
    """
    L, d = h.shape
    B = e.shape[2]
    q = net.w1.shape[1]
    keep = 1.0 - np.eye(L)
    if pair_mask is not None:
        keep = keep * pair_mask
    z = net.hidden(e.reshape(L * L, B)) * Tensor(keep.reshape(L * L, 1))   # (v,w)×q
    # w2[k, i*d + j] -> G[(w, k), i] = Σ_j w2[k, i, j] h[w, j]
    w2 = net.w2.reshape(q, d, d).transpose(2, 0, 1).reshape(d, q * d)
    G = matmul(h, w2).reshape(L * q, d)
    m = matmul(z.reshape(L, L * q), G)
    bias = net.b2.reshape(d, d)
    m = m + matmul(matmul(Tensor(keep), h), bias.transpose(1, 0))
    return m * (1.0 / L)


def node_update(h: Tensor, m: Tensor, gru: GRUParams) -> Tensor:
    return gru_cell(h, m, gru)


def init_gru(dim: int, rng: np.random.Generator) -> GRUParams:
    def w():
        return parameter(_uniform(rng, (dim, dim), dim, dim))

    def b():
        return parameter(np.zeros(dim))

    return GRUParams(w(), w(), b(), w(), w(), b(), w(), w(), b())


class Readout(Module):
    """Shared per-node MLP d_h -> hidden (ReLU) -> 4."""

    def __init__(self, state_dim: int, hidden_dim: int, rng: np.random.Generator):
        self.w1 = parameter(_uniform(rng, (state_dim, hidden_dim), state_dim, hidden_dim))
        self.b1 = parameter(np.zeros(hidden_dim))
        self.w2 = parameter(_uniform(rng, (hidden_dim, 4), hidden_dim, 4))
        self.b2 = parameter(np.zeros(4))

    def __call__(self, h: Tensor) -> Tensor:
        return relu(h @ self.w1 + self.b1) @ self.w2 + self.b2


def recover_angles(v) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(φ, ψ) in degrees from (sin φ, cos φ, sin ψ, cos ψ) columns.

    Returns ``(phi, psi, defined)``, where ``defined`` is L×2 and false for a
    zero (sin, cos) pair.
    """
    v = np.asarray(v.data if isinstance(v, Tensor) else v, dtype=np.float64)
    phi = np.degrees(np.arctan2(v[:, 0], v[:, 1]))
    psi = np.degrees(np.arctan2(v[:, 2], v[:, 3]))
    phi[phi <= -180.0] = 180.0
    psi[psi <= -180.0] = 180.0
    defined = np.stack([(v[:, 0] != 0) | (v[:, 1] != 0), (v[:, 2] != 0) | (v[:, 3] != 0)], axis=1)
    return phi, psi, defined


def encode_angles(phi, psi) -> np.ndarray:
    p, s = np.radians(phi), np.radians(psi)
    return np.stack([np.sin(p), np.cos(p), np.sin(s), np.cos(s)], axis=1)


def top_k_pair_mask(contact_map: np.ndarray, k: int) -> np.ndarray:
    """Keep, for every node, its k most probable contact partners (made symmetric)."""
    L = contact_map.shape[0]
    scores = np.where(np.eye(L, dtype=bool), -np.inf, contact_map)
    order = np.argsort(-scores, axis=1, kind="stable")[:, :k]
    mask = np.zeros((L, L))
    np.put_along_axis(mask, order, 1.0, axis=1)
    return np.maximum(mask, mask.T)


@dataclass
class NodePathOutput:
    v: Tensor          # L×4
    phi: np.ndarray
    psi: np.ndarray


class NodePath(Module):
    def __init__(self, in_dim: int, bins: int = 2, state_dim: int = 64, edge_hidden: int = 16,
                 readout_hidden: int = 64, rounds: int = 6, sparsify_topk: int | None = None,
                 rng: np.random.Generator | None = None):
        rng = rng or np.random.default_rng(0)
        self.rounds = rounds
        self.sparsify_topk = sparsify_topk
        self.embed = parameter(_uniform(rng, (in_dim, state_dim), in_dim, state_dim))
        self.embed_bias = parameter(np.zeros(state_dim))
        self.edge_net = EdgeNetwork(bins, edge_hidden, state_dim, rng)
        self.gru = init_gru(state_dim, rng)
        self.readout = Readout(state_dim, readout_hidden, rng)

    def __call__(self, F, probabilities: Tensor) -> NodePathOutput:
        """``probabilities`` is the edge path's B×L×L bin distribution."""
        F = F if isinstance(F, Tensor) else Tensor(F)
        e = probabilities.transpose(1, 2, 0)
        mask = None
        if self.sparsify_topk:
            mask = top_k_pair_mask(probabilities.data[0], self.sparsify_topk)
        h = F @ self.embed + self.embed_bias
        for _ in range(self.rounds):
            h = node_update(h, message_step(h, e, self.edge_net, mask), self.gru)
        v = self.readout(h)
        phi, psi, _ = recover_angles(v.data)
        return NodePathOutput(v, phi, psi)
