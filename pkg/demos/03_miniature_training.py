"""
Training the two-path model on synthetic proteins
==================================================

Fit a small model jointly on edge (contact) and node (torsion) losses, save the
best checkpoint, reload it and evaluate.  Widths are reduced so this runs in
well under a minute; `pggnn.experiments.overfit()` runs the default model.
"""

import tempfile
from pathlib import Path

from pggnn.evaluation import evaluate_examples
from pggnn.experiments import synthetic_examples
from pggnn.training import Checkpoint, TrainingConfig, fit_examples

config = TrainingConfig(channels=16, pair_dim=8, edge_blocks=3, state_dim=32, readout_hidden=32,
                        learning_rate=1e-3, max_epochs=15, patience=5)
train = synthetic_examples(6, seed=0, spec=config.bin_spec)
val = synthetic_examples(2, seed=1, spec=config.bin_spec, prefix="val")

result = fit_examples(train, val, config)
for entry in result.history:
    print(f"epoch {entry['epoch']:2d}  L_E {entry['train_edge']:.3f}  L_F {entry['train_node']:.3f}  "
          f"val total {entry['val_total']:.3f}")
print("best epoch", result.best.epoch)

# checkpoint round trip
path = Path(tempfile.mkdtemp()) / "best.ckpt"
result.best.save(path)
model, cfg, _ = Checkpoint.load(path).build_model()

report = evaluate_examples(model, val, cfg)
print("validation: SR top-L/5 ACC", report.acc["SR"]["5"], " MAE phi", round(report.mae_phi, 1),
      " psi", round(report.mae_psi, 1))
