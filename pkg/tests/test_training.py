import numpy as np
import pytest

import pggnn.training as tr
from pggnn.autodiff import ContractError, Tensor
from pggnn.node_path import encode_angles
from pggnn.protein import DistanceBinSpec
from pggnn.synthetic import synthetic_dataset, synthetic_protein
from pggnn.training import (Checkpoint, ConfigError, TrainingConfig, TrainingError, edge_loss, example_losses,
                            fit_examples, make_example, make_optimizer, node_loss, total_loss, train_step,
                            validate)

TINY = dict(channels=4, pair_dim=3, edge_blocks=1, state_dim=4, edge_hidden=3, readout_hidden=4, rounds=2)


def tiny_config(**kw):
    return TrainingConfig(**{**TINY, **kw})


def examples(n, seed=0, lo=8, hi=12):
    return [make_example(r, DistanceBinSpec()) for r in synthetic_dataset(n, seed, lo, hi)]


# -- losses --------------------------------------------------------------------------------

def test_edge_loss_perfect_and_uniform():
    labels = np.random.default_rng(0).integers(0, 2, (5, 5))
    mask = np.ones((5, 5), bool)
    perfect = np.stack([100.0 * (labels == 0), 100.0 * (labels == 1)])
    assert edge_loss(Tensor(perfect), labels, mask).item() < 1e-6
    assert abs(edge_loss(Tensor(np.zeros((2, 5, 5))), labels, mask).item() - np.log(2)) < 1e-15


def edge_loss_oracle(z, labels, mask):
    total, n = 0.0, 0
    for i in range(z.shape[1]):
        for j in range(z.shape[2]):
            if mask[i, j]:
                p = np.exp(z[:, i, j]) / np.exp(z[:, i, j]).sum()
                total -= np.log(p[labels[i, j]])
                n += 1
    return total / n


def test_edge_loss_loop_oracle():
    rng = np.random.default_rng(1)
    for _ in range(100):
        B, L = rng.integers(2, 5), rng.integers(1, 6)
        z = rng.normal(0, 3, (B, L, L))
        labels = rng.integers(0, B, (L, L))
        mask = rng.random((L, L)) > 0.3
        mask[0, 0] = True
        assert abs(edge_loss(Tensor(z), labels, mask).item() - edge_loss_oracle(z, labels, mask)) < 1e-12


def test_edge_loss_fully_masked():
    with pytest.raises(ContractError):
        edge_loss(Tensor(np.zeros((2, 3, 3))), np.zeros((3, 3), int), np.zeros((3, 3), bool))


def test_node_loss_examples():
    rng = np.random.default_rng(2)
    phi, psi = rng.uniform(-180, 180, 7), rng.uniform(-180, 180, 7)
    m = np.ones(7, bool)
    assert node_loss(Tensor(encode_angles(phi, psi)), phi, psi, m, m).item() < 1e-30
    assert abs(node_loss(Tensor(np.zeros((7, 4))), phi, psi, m, m).item() - 2.0) < 1e-15


def node_loss_oracle(v, phi, psi, pm, sm):
    a = sum((np.sin(np.radians(phi[i])) - v[i, 0]) ** 2 + (np.cos(np.radians(phi[i])) - v[i, 1]) ** 2
            for i in range(len(phi)) if pm[i]) / pm.sum()
    b = sum((np.sin(np.radians(psi[i])) - v[i, 2]) ** 2 + (np.cos(np.radians(psi[i])) - v[i, 3]) ** 2
            for i in range(len(psi)) if sm[i]) / sm.sum()
    return a + b


def test_node_loss_formula_oracle():
    rng = np.random.default_rng(3)
    for _ in range(100):
        L = rng.integers(2, 10)
        v = rng.normal(size=(L, 4))
        phi, psi = rng.uniform(-180, 180, L), rng.uniform(-180, 180, L)
        pm, sm = rng.random(L) > 0.3, rng.random(L) > 0.3
        pm[0] = sm[-1] = True
        got = node_loss(Tensor(v), phi, psi, pm, sm).item()
        assert abs(got - node_loss_oracle(v, phi, psi, pm, sm)) < 1e-12


def test_node_loss_fully_masked():
    with pytest.raises(ValueError):
        node_loss(Tensor(np.zeros((3, 4))), np.zeros(3), np.zeros(3), np.zeros(3, bool), np.ones(3, bool))


def test_total_loss_arithmetic():
    assert total_loss(0.5, 0.25, 1.0) == 0.75
    assert total_loss(0.5, 0.25, 0.0) == 0.5


def test_fan_out_additivity():
    ex = examples(1)[0]
    model = tr.PGGNN.from_config(tiny_config(), 20)
    grads = {}
    for name in ("edge", "node", "total"):
        for p in model.parameters():
            p.grad = None
        le, ln, lt, _ = example_losses(model, ex, 1.0)
        {"edge": le, "node": ln, "total": lt}[name].backward()
        grads[name] = model.transform.kernel.grad.copy()
    assert np.allclose(grads["total"], grads["edge"] + grads["node"], rtol=1e-12, atol=1e-15)


# -- optimization -------------------------------------------------------------------------------

def test_lambda_zero_readout_gets_no_gradient():
    ex = examples(1)[0]
    config = tiny_config(lam=0.0)
    model = tr.PGGNN.from_config(config, 20)
    _, _, lt, _ = example_losses(model, ex, 0.0)
    lt.backward()
    for p in model.node_path.readout.parameters():
        assert p.grad is None or not np.any(p.grad)
    assert np.any(model.edge_path.classifier.grad)


def test_loss_decreases_on_one_protein():
    ex = examples(1, seed=4)[0]
    config = tiny_config(learning_rate=1e-3)
    model = tr.PGGNN.from_config(config, 20)
    opt = make_optimizer(model, config)
    losses = [train_step(model, [ex], opt, config)["total"] for _ in range(11)]
    assert all(b < a for a, b in zip(losses, losses[1:])), losses


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_empty_batch_and_non_finite_loss():
    config = tiny_config()
    model = tr.PGGNN.from_config(config, 20)
    opt = make_optimizer(model, config)
    with pytest.raises(TrainingError):
        train_step(model, [], opt, config)
    ex = examples(1)[0]
    ex.id = "bad"
    model.node_path.readout.b2.data[...] = np.inf
    with pytest.raises(TrainingError, match="bad"):
        train_step(model, [ex], opt, config)


def test_batch_accumulates_over_varying_lengths():
    exs = examples(3, seed=5, lo=6, hi=14)
    assert len({e.graph.length for e in exs}) > 1
    config = tiny_config(batch_size=3)
    model = tr.PGGNN.from_config(config, 20)
    res = train_step(model, exs, make_optimizer(model, config), config)
    assert np.isfinite(res["total"]) and res["grad_norm"] > 0


def test_seeded_training_is_bit_reproducible():
    train, val = examples(3, 6), examples(1, 7)
    config = tiny_config(max_epochs=3, learning_rate=1e-3)
    a, b = fit_examples(train, val, config), fit_examples(train, val, config)
    assert a.history == b.history
    assert a.best.to_bytes() == b.best.to_bytes()


def test_config_validation():
    with pytest.raises(ConfigError):
        TrainingConfig(lam=-1)
    with pytest.raises(ConfigError):
        TrainingConfig(learning_rate=0)
    with pytest.raises(ConfigError):
        TrainingConfig(patience=0)
    with pytest.raises(ConfigError, match="bogus"):
        TrainingConfig.from_dict({"bogus": 1})
    assert TrainingConfig.from_dict(TrainingConfig().to_dict()) == TrainingConfig()


# -- fit / checkpoint -------------------------------------------------------------------------------

def test_patience_one_constant_validation(monkeypatch):
    const = {"edge": 1.0, "node": 1.0, "total": 2.0, "contact_acc": 0.5, "mae_phi": 90.0, "mae_psi": 90.0}
    monkeypatch.setattr(tr, "validate", lambda *a, **k: dict(const))
    result = fit_examples(examples(2), examples(1, 1), tiny_config(patience=1, max_epochs=50))
    assert len(result.history) == 2 and result.best.epoch == 1


def test_empty_split_is_config_error():
    with pytest.raises(ConfigError):
        fit_examples(examples(1), [], tiny_config())


def test_checkpoint_round_trip(tmp_path):
    train, val = examples(2, 8), examples(2, 9)
    config = tiny_config(max_epochs=2)
    result = fit_examples(train, val, config)
    path = tmp_path / "a.ckpt"
    result.best.save(path)
    loaded = Checkpoint.load(path)
    assert loaded.to_bytes() == path.read_bytes()
    for k, v in result.best.params.items():
        assert np.array_equal(loaded.params[k], v)
    assert loaded.adam.step == result.best.adam.step
    model, cfg, _ = loaded.build_model()
    again = validate(model, val, cfg)
    for k, v in result.best.metrics.items():
        assert abs(again[k] - v) <= 1e-12


def test_checkpoint_rejects_bad_magic():
    with pytest.raises(ValueError, match="magic"):
        Checkpoint.from_bytes(b"XXXX" + b"\0" * 20)


def test_stop_gradient_blocks_node_loss_into_edge_path():
    ex = make_example(synthetic_protein(8, np.random.default_rng(10)), DistanceBinSpec())
    model = tr.PGGNN.from_config(tiny_config(stop_gradient=True), 20)
    _, ln, _, _ = example_losses(model, ex, 1.0)
    ln.backward()
    assert model.edge_path.classifier.grad is None or not np.any(model.edge_path.classifier.grad)


def test_node_only_optimizer_freezes_edge_path():
    ex = examples(1, 11)[0]
    config = tiny_config(learning_rate=1e-2)
    model = tr.PGGNN.from_config(config, 20)
    opt = tr.node_only_optimizer(model, config)
    assert all(k.startswith("node_path.") for k in opt.params)
    edge_before = {k: p.data.copy() for k, p in model.named_parameters().items() if not k.startswith("node_path.")}
    node_before = model.node_path.readout.w2.data.copy()
    train_step(model, [ex], opt, config)
    for k, p in model.named_parameters().items():
        if k in edge_before:
            assert np.array_equal(p.data, edge_before[k]), k
    assert not np.array_equal(model.node_path.readout.w2.data, node_before)
