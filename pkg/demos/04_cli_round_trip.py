"""
The command line: train, eval and predict
==========================================

Write a synthetic dataset as PDB files plus a manifest, then drive the `pggnn`
command end to end.  Equivalent shell commands are printed along the way.
"""

import json
import tempfile
from pathlib import Path

from pggnn.cli import main
from pggnn.evaluation import read_angles, read_contacts
from pggnn.protein import ManifestEntry, to_pdb, write_manifest
from pggnn.synthetic import synthetic_dataset

work = Path(tempfile.mkdtemp())
entries = []
for rec, split in zip(synthetic_dataset(5, seed=3, min_length=15, max_length=25),
                      ["train", "train", "train", "val", "test"]):
    (work / f"{rec.id}.pdb").write_text(to_pdb(rec))
    entries.append(ManifestEntry(rec.id, work / f"{rec.id}.pdb", "A", None, None, split))
write_manifest(work / "manifest.tsv", entries)

config = {"channels": 8, "pair_dim": 4, "edge_blocks": 2, "state_dim": 16, "max_epochs": 3,
          "learning_rate": 1e-3, "manifest": str(work / "manifest.tsv"), "output_dir": str(work / "run")}
(work / "config.json").write_text(json.dumps(config))


def run(*argv):
    print("$ pggnn", " ".join(argv))
    code = main(list(argv))
    print("exit", code)


run("train", "--config", str(work / "config.json"))
run("eval", "--checkpoint", str(work / "run/best.ckpt"), "--manifest", str(work / "manifest.tsv"),
    "--split", "test", "--out", str(work / "eval"))
print((work / "eval/per_protein.tsv").read_text())

run("predict", "--checkpoint", str(work / "run/best.ckpt"), "--pdb", str(work / "syn004.pdb"), "--chain", "A",
    "--out", str(work / "pred"))
print((work / "pred/syn004.contacts").read_text().splitlines()[:3])
probs = read_contacts(work / "pred/syn004.contacts")
phi, psi = read_angles(work / "pred/syn004.angles")
print("contact probabilities", probs.shape, "angles", phi.shape)

# a usage error exits 1
run("eval", "--manifest", "x")
