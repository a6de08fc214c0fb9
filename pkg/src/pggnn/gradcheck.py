"""Finite-difference suites for every differentiable operation and the joint model."""
from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor, finite_diff_check, parameter
from .edge_path import EdgeBlock, edge_to_edge_conv
from .features import SequenceConv1D, build_pairwise_input
from .model import PGGNN
from .node_path import EdgeNetwork, NodePath, Readout, init_gru, message_step
from .protein import DistanceBinSpec, target_geometry
from .synthetic import synthetic_protein
from .training import edge_loss, example_losses, make_example, node_loss

RTOL, ATOL = 1e-3, 1e-6


def _rand(rng, *shape, scale=1.0):
    return parameter(rng.normal(0.0, scale, shape))


def _weighted_sum(rng, shape):
    """Random fixed projection so the check is not just a sum."""
    w = Tensor(rng.normal(size=shape))
    return lambda y: (y * w).sum()


def op_checks(seed: int):
    """(name, report) for each primitive at one seed."""
    rng = np.random.default_rng(seed)
    out = []

    a, b = _rand(rng, 3, 4), _rand(rng, 4, 2)
    proj = _weighted_sum(rng, (3, 2))
    out.append(("matmul", finite_diff_check(lambda a, b: proj(a @ b), [a, b], RTOL, ATOL)))

    for dil in (1, 2):
        x, k = _rand(rng, 2, 6, 6), _rand(rng, 3, 2, 3, 3)
        proj = _weighted_sum(rng, (3, 6, 6))
        out.append((f"conv2d[d={dil}]",
                    finite_diff_check(lambda x, k: proj(ad.conv2d(x, k, dil)), [x, k], RTOL, ATOL)))

    for kind in ("elu", "relu", "sigmoid", "tanh"):
        x = parameter(rng.choice([-1.5, -0.1, 0.1, 2.0], size=5) + rng.normal(0, 0.02, 5))
        proj = _weighted_sum(rng, (5,))
        out.append((f"activation[{kind}]",
                    finite_diff_check(lambda x: proj(ad.activation(x, kind)), x, RTOL, ATOL)))

    x, g, bt = _rand(rng, 2, 4, 4), _rand(rng, 2), _rand(rng, 2)
    proj = _weighted_sum(rng, (2, 4, 4))
    out.append(("instance_norm", finite_diff_check(lambda x, g, b: proj(ad.instance_norm(x, g, b)),
                                                   [x, g, bt], RTOL, ATOL)))

    x = _rand(rng, 3, 4, 4)
    proj = _weighted_sum(rng, (3, 4, 4))
    out.append(("softmax", finite_diff_check(lambda x: proj(ad.softmax(x, axis=0)), x, RTOL, ATOL)))

    logits = _rand(rng, 3, 3, 4)
    labels = rng.integers(0, 4, (3, 3))
    mask = rng.random((3, 3)) > 0.2
    mask[0, 0] = True
    out.append(("softmax_cross_entropy",
                finite_diff_check(lambda z: ad.softmax_cross_entropy(z, labels, mask), logits, RTOL, ATOL)))

    h, m = _rand(rng, 2, 3), _rand(rng, 2, 3)
    gru = init_gru(3, rng)
    for t in gru.tensors().values():
        t.data += rng.normal(0, 0.3, t.shape)
    proj = _weighted_sum(rng, (2, 3))
    tensors = [h, m, *gru.tensors().values()]

    def gru_f(h, m, *params):
        return proj(ad.gru_cell(h, m, ad.GRUParams(*params)))

    out.append(("gru_cell", finite_diff_check(gru_f, tensors, RTOL, ATOL)))

    A, W, H, bias = _rand(rng, 3, 5, 5), _rand(rng, 2, 3), _rand(rng, 2, 3), _rand(rng, 2)
    proj = _weighted_sum(rng, (2, 5, 5))
    out.append(("edge_to_edge_conv",
                finite_diff_check(lambda A, W, H, b: proj(edge_to_edge_conv(A, W, H, b)), [A, W, H, bias],
                                  RTOL, ATOL)))

    F = Tensor(rng.normal(size=(5, 4)))
    conv = SequenceConv1D(4, 3, rng)
    E = rng.normal(size=(5, 5, 2))
    proj = _weighted_sum(rng, (8, 5, 5))
    out.append(("build_pairwise_input",
                finite_diff_check(lambda *_: proj(build_pairwise_input(F, E, conv)),
                                  [conv.kernel, conv.bias], RTOL, ATOL)))

    block = EdgeBlock(4, 4, (1, 2, 4, 1), rng)
    A = _rand(rng, 4, 6, 6)
    out.append(("etp_block", finite_diff_check(lambda A, *_: block(A).sum(), [A, *block.parameters()],
                                               RTOL, ATOL)))

    net = EdgeNetwork(2, 5, 3, rng)
    h = _rand(rng, 4, 3)
    e = Tensor(ad._softmax_np(rng.normal(size=(4, 4, 2)), -1))
    proj = _weighted_sum(rng, (4, 3))
    out.append(("message_step", finite_diff_check(lambda h, *_: proj(message_step(h, e, net)),
                                                  [h, *net.parameters()], RTOL, ATOL)))

    readout = Readout(3, 5, rng)
    h = Tensor(rng.normal(size=(4, 3)))
    out.append(("readout", finite_diff_check(lambda *_: readout(h).sum(), readout.parameters(), RTOL, ATOL)))

    path = NodePath(4, bins=2, state_dim=3, edge_hidden=4, readout_hidden=4, rounds=6, rng=rng)
    # move ReLU pre-activations off the kink the zero-initialized biases put them near
    for t in path.parameters():
        t.data += rng.normal(0.0, 0.3, t.shape)
    F = Tensor(rng.normal(size=(5, 4)))
    probs = parameter(ad._softmax_np(rng.normal(size=(2, 5, 5)), 0))
    proj = _weighted_sum(rng, (5, 4))
    out.append(("node_path[S_V=6]", finite_diff_check(lambda p, *_: proj(path(F, p).v),
                                                      [probs, *path.parameters()], RTOL, ATOL)))

    rec = synthetic_protein(6, rng)
    tg = target_geometry(rec)
    logits = _rand(rng, 2, 6, 6)
    out.append(("edge_loss", finite_diff_check(lambda z: edge_loss(z, tg.bin_labels, tg.contact_mask),
                                               logits, RTOL, ATOL)))
    v = _rand(rng, 6, 4)
    out.append(("node_loss", finite_diff_check(lambda v: node_loss(v, tg.phi, tg.psi, tg.phi_mask, tg.psi_mask),
                                               v, RTOL, ATOL)))
    return out


def reduced_model(seed: int = 0) -> PGGNN:
    """Full-depth model at reduced widths (C=8, d_h=8, B=2)."""
    return PGGNN(20, 0, pair_dim=4, channels=8, bins=2, state_dim=8, edge_hidden=4, readout_hidden=8,
                 seed=seed)


def joint_model_check(seed: int = 0, max_coords: int = 6):
    """Total loss of the reduced joint model at L=6.

    Every parameter tensor is checked at ``max_coords`` sampled coordinates.
    """
    rng = np.random.default_rng(seed)
    model = reduced_model(seed)
    # perturb away from the zero-initialized biases / unit gammas
    for p in model.parameters():
        p.data += rng.normal(0.0, 0.05, p.shape)
    rec = synthetic_protein(6, rng)
    ex = make_example(rec, DistanceBinSpec())
    return finite_diff_check(lambda *_: example_losses(model, ex, 1.0)[2], model.parameters(), RTOL, ATOL,
                             max_coords=max_coords, rng=rng)


def run_suite(full: bool = False, seeds=range(5)):
    results = []
    for seed in seeds:
        for name, rep in op_checks(seed):
            results.append((f"{name} (seed {seed})", rep))
    if full:
        results.append(("joint model L=6", joint_model_check(0)))
    return results
