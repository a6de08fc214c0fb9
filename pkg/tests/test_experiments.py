from pggnn.experiments import joint_vs_two_stage, node_mae, overfit, synthetic_examples
from pggnn.model import PGGNN
from pggnn.training import TrainingConfig

TINY = dict(channels=4, pair_dim=3, edge_blocks=1, state_dim=4, edge_hidden=3, readout_hidden=4, rounds=2)


def test_overfit_reports_failure_within_budget():
    res = overfit(TrainingConfig(**TINY, max_epochs=2), n=2, check_every=1)
    assert not res.passed and res.epochs == 2 and 0 <= res.metrics["contact_acc"] <= 1


def test_overfit_trivial_targets_pass_immediately():
    res = overfit(TrainingConfig(**TINY, max_epochs=5), n=2, check_every=1, contact_target=0.0, mae_target=180.0)
    assert res.passed and res.epochs == 1


def test_joint_comparison_runs_and_is_deterministic():
    cfg = TrainingConfig(**TINY)
    a = joint_vs_two_stage(cfg, 0, 2, n_train=2, n_test=1)
    b = joint_vs_two_stage(cfg, 0, 2, n_train=2, n_test=1)
    assert a == b and a.steps == 4
    assert 0 <= a.joint_mae <= 180 and 0 <= a.two_stage_mae <= 180


def test_node_mae_range():
    exs = synthetic_examples(2, 5, TrainingConfig().bin_spec, 10, 12)
    assert 0 <= node_mae(PGGNN(20, **TINY), exs) <= 180
