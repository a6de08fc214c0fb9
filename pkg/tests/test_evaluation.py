import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pggnn.evaluation import (MetricsReport, aggregate, evaluate_examples, protein_metrics, read_angles,
                              read_contacts, write_angles, write_contacts)
from pggnn.metrics import RANGES, TOP_K, angle_mae, contact_accuracy_topk, select_top_pairs, wrapped_difference
from pggnn.model import PGGNN
from pggnn.protein import DistanceBinSpec, target_geometry
from pggnn.synthetic import synthetic_protein
from pggnn.training import make_example


def brute_force_top(cm, mask, seq_range, count):
    lo, hi = RANGES[seq_range]
    L = cm.shape[0]
    cands = [(-cm[i, j], i, j) for i in range(L) for j in range(i + 1, L)
             if mask[i, j] and j - i >= lo and (hi is None or j - i <= hi)]
    return {(i, j) for _, i, j in sorted(cands)[:count]}


def test_top_k_matches_sort_oracle():
    rng = np.random.default_rng(0)
    for _ in range(100):
        L = int(rng.integers(10, 60))
        cm = rng.random((L, L))
        cm = np.round(cm, 1)                 # force ties
        cm = (cm + cm.T) / 2
        mask = rng.random((L, L)) > 0.1
        for r in RANGES:
            for k in TOP_K:
                got = {tuple(p) for p in select_top_pairs(cm, mask, r, L // k)}
                assert got == brute_force_top(cm, mask, r, L // k)


def test_floor_count():
    cm = np.random.default_rng(1).random((10, 10))
    res = contact_accuracy_topk(cm, np.zeros((10, 10)), np.ones((10, 10), bool), "SR", 5)
    assert res.selected == 2 and res.accuracy == 1.0


def test_all_correct_and_no_eligible():
    L = 40
    d = np.full((L, L), 20.0)
    cm = np.zeros((L, L))
    for i in range(L - 30):
        d[i, i + 30] = d[i + 30, i] = 5.0
        cm[i, i + 30] = cm[i + 30, i] = 0.9
    res = contact_accuracy_topk(cm, d, np.ones((L, L), bool), "LR", 5)
    assert res.accuracy == 1.0 and res.selected == 8
    short = contact_accuracy_topk(np.zeros((8, 8)), np.zeros((8, 8)), np.ones((8, 8), bool), "LR", 1)
    assert short.accuracy is None and short.shortfall == 8


def test_shortfall_recorded():
    res = contact_accuracy_topk(np.zeros((13, 13)), np.zeros((13, 13)), np.ones((13, 13), bool), "MR", 1)
    assert res.selected == 1 and res.shortfall == 12


def test_top_k_rejects_bad_k():
    with pytest.raises(ValueError):
        contact_accuracy_topk(np.zeros((5, 5)), np.zeros((5, 5)), np.ones((5, 5), bool), "SR", 3)


def test_angle_mae_examples():
    assert angle_mae([179.0], [-179.0]) == pytest.approx(2.0, abs=1e-12)
    assert angle_mae([10.0, -20.0], [10.0, -20.0]) == 0.0
    assert angle_mae([1.0], [2.0], [False]) is None


def test_uniform_random_mae_is_ninety():
    rng = np.random.default_rng(2)
    a, b = rng.uniform(-180, 180, 100_000), rng.uniform(-180, 180, 100_000)
    assert abs(angle_mae(a, b) - 90.0) < 1.0


@settings(max_examples=100, deadline=None)
@given(st.floats(-720, 720), st.floats(-720, 720))
def test_wrapped_difference_properties(a, b):
    d = wrapped_difference(a, b)
    assert 0 <= d <= 180
    assert d == pytest.approx(wrapped_difference(b, a), abs=1e-9)
    assert d == pytest.approx(wrapped_difference(a + 360, b), abs=1e-9)


def model_and_examples(n=2, L=9):
    rng = np.random.default_rng(3)
    exs = [make_example(synthetic_protein(L + 2 * i, rng, f"p{i}"), DistanceBinSpec()) for i in range(n)]
    model = PGGNN(20, channels=4, pair_dim=3, edge_blocks=1, state_dim=4, edge_hidden=3, readout_hidden=4,
                  rounds=2)
    return model, exs


def test_report_round_trip_and_err():
    model, exs = model_and_examples(3, 30)
    report = evaluate_examples(model, exs)
    assert MetricsReport.parse(report.render()) == report
    for acc, err in [(report.acc, report.err)] + [(p.acc, p.err) for p in report.proteins]:
        for r, row in acc.items():
            for k, a in row.items():
                assert (a is None and err[r][k] is None) or (0 <= a <= 1 and err[r][k] == 1.0 - a)


def test_single_protein_dataset():
    model, exs = model_and_examples(1, 30)
    report = evaluate_examples(model, exs)
    p = report.proteins[0]
    assert report.n_proteins == 1 and report.acc == p.acc
    assert report.mae_phi == p.mae_phi and report.mae_psi == p.mae_psi


def test_reevaluation_identical():
    model, exs = model_and_examples(2, 12)
    a, b = evaluate_examples(model, exs), evaluate_examples(model, exs)
    assert a == b


def test_pooled_aggregate():
    rng = np.random.default_rng(4)
    recs = [synthetic_protein(L, rng) for L in (30, 60)]
    metrics = []
    for rec in recs:
        t = target_geometry(rec)
        metrics.append(protein_metrics(rec.id, rng.random((rec.length,) * 2), t, t.phi, t.psi))
    pooled = aggregate(metrics, pooled=True)["SR"]["5"]
    a = [(m.acc["SR"]["5"], m.length // 5) for m in metrics]
    assert pooled == pytest.approx(sum(x * n for x, n in a) / sum(n for _, n in a), abs=1e-15)
    assert metrics[0].mae_phi == 0.0


def test_contacts_file_round_trip(tmp_path):
    rng = np.random.default_rng(5)
    p = rng.random((3, 6, 6))
    p = (p + p.transpose(0, 2, 1)) / 2
    p /= p.sum(axis=0)
    np.einsum("bii->bi", p)[...] = 0.0
    write_contacts(tmp_path / "x.contacts", p)
    assert np.array_equal(read_contacts(tmp_path / "x.contacts"), p)
    assert (tmp_path / "x.contacts").read_text().splitlines()[1].startswith("1 2 ")


def test_angles_file_round_trip(tmp_path):
    rng = np.random.default_rng(6)
    phi, psi = rng.uniform(-180, 180, 7), rng.uniform(-180, 180, 7)
    ok = np.ones(7, bool)
    ok[0] = False
    write_angles(tmp_path / "x.angles", phi, psi, ok, ok[::-1])
    p2, s2 = read_angles(tmp_path / "x.angles")
    assert np.isnan(p2[0]) and np.isnan(s2[-1])
    assert np.array_equal(p2[1:], phi[1:]) and np.array_equal(s2[:-1], psi[:-1])
