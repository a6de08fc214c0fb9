import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pggnn.autodiff import Tensor, finite_diff_check, parameter
from pggnn.features import (AlignmentError, InputGraph, SequenceConv1D, Standardizer, assemble_node_features,
                            build_input_graph, build_pairwise_input, one_hot, read_edge_features,
                            read_node_features, write_edge_features, write_node_features)
from pggnn.synthetic import synthetic_protein


def record(L, seed=0):
    return synthetic_protein(L, np.random.default_rng(seed), "p")


def test_one_hot_ac():
    x = one_hot("AC")
    assert x.shape == (2, 20)
    assert np.array_equal(x.sum(axis=1), [1, 1]) and x[0, 0] == 1 and x[1, 1] == 1


def test_unknown_residue_spreads_uniformly():
    assert np.allclose(one_hot("X")[0], 1 / 20)


def test_pssm_plus_one_hot(tmp_path):
    rec = record(7)
    write_node_features(tmp_path / "p.pssm", np.random.default_rng(0).normal(size=(7, 20)))
    F, columns = assemble_node_features(rec, [tmp_path / "p.pssm"])
    assert F.shape == (7, 40) and len(columns) == 40


def test_short_feature_file_is_alignment_error(tmp_path):
    rec = record(7)
    write_node_features(tmp_path / "p.feat", np.zeros((6, 3)))
    with pytest.raises(AlignmentError, match="p.feat.*L=7"):
        assemble_node_features(rec, [tmp_path / "p.feat"])


def test_feature_files_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    F, E = rng.normal(size=(5, 3)), rng.normal(size=(5, 5, 2))
    write_node_features(tmp_path / "n", F)
    write_edge_features(tmp_path / "e", E)
    assert np.array_equal(read_node_features(tmp_path / "n"), F)
    assert np.array_equal(read_edge_features(tmp_path / "e"), E)
    with pytest.raises(AlignmentError):
        read_edge_features(tmp_path / "e", expected_length=4)


def test_build_input_graph_with_edges(tmp_path):
    rec = record(6)
    write_edge_features(tmp_path / "e", np.ones((6, 6, 3)))
    g = build_input_graph(rec, None, tmp_path / "e")
    assert g.node_features.shape == (6, 20) and g.edge_features.shape == (6, 6, 3)


def test_input_graph_rejects_non_finite():
    with pytest.raises(ValueError):
        InputGraph(np.array([[np.nan]]), None)


def delta_transform(D):
    conv = SequenceConv1D(D, D, np.random.default_rng(0))
    k = np.zeros((3, D, D))
    k[1] = np.eye(D)
    conv.kernel.data[...] = k
    return conv


def test_delta_kernel_gives_outer_concat():
    F = np.random.default_rng(2).normal(size=(5, 3))
    out = build_pairwise_input(F, None, delta_transform(3)).data
    assert out.shape == (6, 5, 5)
    for i in range(5):
        for j in range(5):
            assert np.array_equal(out[:, i, j], np.concatenate([F[i], F[j]]))


def test_swap_symmetry_with_symmetric_edges():
    rng = np.random.default_rng(3)
    F = rng.normal(size=(6, 4))
    E = rng.normal(size=(6, 6, 2))
    E = E + E.transpose(1, 0, 2)
    conv = SequenceConv1D(4, 3, rng)
    out = build_pairwise_input(F, E, conv).data
    assert np.array_equal(out[:3], out[3:6].transpose(0, 2, 1))
    assert np.array_equal(out[6:], out[6:].transpose(0, 2, 1))


def test_window_three_conv_oracle():
    rng = np.random.default_rng(4)
    F = rng.normal(size=(6, 4))
    conv = SequenceConv1D(4, 3, rng)
    conv.bias.data[...] = rng.normal(size=3)
    got = conv(Tensor(F)).data
    k, b = conv.kernel.data, conv.bias.data
    pad = np.vstack([np.zeros(4), F, np.zeros(4)])
    for i in range(6):
        want = b + pad[i] @ k[0] + pad[i + 1] @ k[1] + pad[i + 2] @ k[2]
        assert np.max(np.abs(got[i] - want)) < 1e-12


def test_pairwise_gradient_fd():
    rng = np.random.default_rng(5)
    F = Tensor(rng.normal(size=(5, 4)))
    conv = SequenceConv1D(4, 3, rng)
    conv.bias.data[...] = rng.normal(size=3)
    rep = finite_diff_check(lambda *_: build_pairwise_input(F, None, conv).sum(), [conv.kernel, conv.bias],
                            rtol=1e-4, atol=1e-7)
    assert rep.passed, rep
    # gradient also reaches the node features themselves
    Fp = parameter(F.data.copy())
    rep = finite_diff_check(lambda f: (build_pairwise_input(f, None, conv) ** 2).sum(), Fp, rtol=1e-4, atol=1e-7)
    assert rep.passed, rep


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 40), st.integers(0, 3))
def test_pairwise_shape_any_length(L, K):
    rng = np.random.default_rng(L)
    conv = SequenceConv1D(5, 2, rng)
    out = build_pairwise_input(rng.normal(size=(L, 5)), rng.normal(size=(L, L, K)), conv)
    assert out.shape == (4 + K, L, L)


def test_standardizer_moments():
    rng = np.random.default_rng(6)
    graphs = [InputGraph(rng.normal(3.0, 5.0, size=(L, 4)), None) for L in (10, 17, 23)]
    graphs.append(InputGraph(np.ones((4, 4)), None))
    std = Standardizer.fit(graphs)
    rows = np.concatenate([std.apply(g).node_features for g in graphs])
    assert np.all(np.abs(rows.mean(axis=0)) < 1e-9)
    assert np.all(np.abs(rows.var(axis=0) - 1) < 1e-6)


def test_one_hot_rows_sum_to_one():
    F, _ = assemble_node_features(record(30, 7))
    assert np.array_equal(F.sum(axis=1), np.ones(30))
