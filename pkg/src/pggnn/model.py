"""The joint two-path protein graph model."""
from __future__ import annotations

from contextlib import nullcontext
from dataclasses import dataclass

import numpy as np

from .autodiff import Module, Tensor, no_grad
from .edge_path import EdgePath, EdgePathOutput
from .features import InputGraph, SequenceConv1D, build_pairwise_input
from .node_path import NodePath, NodePathOutput


@dataclass
class ModelOutput:
    edge: EdgePathOutput
    node: NodePathOutput


class PGGNN(Module):
    """Sequence-conv featurizer -> edge path -> node path conditioned on edge probabilities."""

    def __init__(self, node_dim: int, edge_dim: int = 0, *, pair_dim: int = 24, channels: int = 48,
                 edge_blocks: int = 10, conv_layers: int = 4, bins: int = 2, dilations=(1, 2, 4, 1),
                 state_dim: int = 64, edge_hidden: int = 16, readout_hidden: int = 64, rounds: int = 6,
                 sparsify_topk: int | None = None, stop_gradient: bool = False, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.stop_gradient = stop_gradient
        self.freeze_edge = False          # run the edge path without recording a graph
        self.transform = SequenceConv1D(node_dim, pair_dim, rng)
        self.edge_path = EdgePath(2 * pair_dim + edge_dim, channels, edge_blocks, conv_layers, bins,
                                  dilations, rng)
        self.node_path = NodePath(node_dim, bins, state_dim, edge_hidden, readout_hidden, rounds,
                                  sparsify_topk, rng)

    def __call__(self, graph: InputGraph) -> ModelOutput:
        F = Tensor(graph.node_features)
        with no_grad() if self.freeze_edge else nullcontext():
            edge = self.edge_path(build_pairwise_input(F, graph.edge_features, self.transform))
        probs = edge.probabilities
        if self.stop_gradient:
            probs = probs.detach()
        node = self.node_path(F, probs)
        return ModelOutput(edge, node)

    @classmethod
    def from_config(cls, config, node_dim: int, edge_dim: int = 0) -> PGGNN:
        return cls(node_dim, edge_dim, pair_dim=config.pair_dim, channels=config.channels,
                   edge_blocks=config.edge_blocks, conv_layers=config.conv_layers, bins=config.bins,
                   dilations=tuple(config.dilations) if config.dilations else None,
                   state_dim=config.state_dim, edge_hidden=config.edge_hidden,
                   readout_hidden=config.readout_hidden, rounds=config.rounds,
                   sparsify_topk=config.sparsify_topk, stop_gradient=config.stop_gradient,
                   seed=config.seed)
