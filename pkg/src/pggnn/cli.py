"""Command line: train / eval / predict / gradcheck.

Exit codes: 0 success, 1 validation or usage error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import gradcheck as gc
from .evaluation import evaluate_dataset, predict, write_angles, write_contacts
from .features import build_input_graph
from .protein import LengthFilterError, ManifestError, PDBParseError, load_manifest, read_pdb
from .training import Checkpoint, ConfigError, TrainingConfig, fit

log = logging.getLogger("pggnn")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pggnn", description="Protein graph model: distances and backbone torsions.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="fit a model from a manifest")
    p.add_argument("--config", required=True, help="JSON config (TrainingConfig fields, plus manifest/output_dir)")
    p.add_argument("--manifest", help="overrides the config's 'manifest'")
    p.add_argument("--out", help="output directory (overrides 'output_dir')")

    p = sub.add_parser("eval", help="evaluate a checkpoint on one manifest split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", required=True, choices=["train", "val", "test"])
    p.add_argument("--out", required=True)
    p.add_argument("--pooled", action="store_true", help="pool pairs across proteins instead of per-protein mean")

    p = sub.add_parser("predict", help="write contact and angle predictions for one chain")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--pdb", required=True)
    p.add_argument("--chain", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--node-features")
    p.add_argument("--edge-features")

    p = sub.add_parser("gradcheck", help="finite-difference checks of every differentiable op")
    p.add_argument("--full", action="store_true", help="also check the joint two-path model")
    p.add_argument("--seeds", type=int, default=5)
    return parser


def cmd_train(args) -> int:
    raw = json.loads(Path(args.config).read_text())
    manifest = args.manifest or raw.pop("manifest", None)
    out_dir = Path(args.out or raw.pop("output_dir", "run"))
    raw.pop("manifest", None)
    raw.pop("output_dir", None)
    if manifest is None:
        raise ConfigError("no manifest given (config 'manifest' or --manifest)")
    config = TrainingConfig.from_dict(raw)
    out_dir.mkdir(parents=True, exist_ok=True)
    result = fit(manifest, config)
    result.best.save(out_dir / "best.ckpt")
    (out_dir / "training_log.json").write_text(json.dumps(result.history, indent=2))
    print(f"best epoch {result.best.epoch}: val total loss {result.best.metrics['total']:.6f}")
    return 0


def cmd_eval(args) -> int:
    ckpt = Checkpoint.load(args.checkpoint)
    entries = load_manifest(args.manifest).split(args.split)
    report = evaluate_dataset(entries, ckpt, pooled=args.pooled)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.json").write_text(report.render())
    lines = ["id\tL\tLR_L5\tMR_L5\tSR_L5\tMAE_phi\tMAE_psi"]
    for p in report.proteins:
        cells = [p.acc["LR"]["5"], p.acc["MR"]["5"], p.acc["SR"]["5"], p.mae_phi, p.mae_psi]
        lines.append("\t".join([p.id, str(p.length)] + ["NA" if c is None else f"{c:.4f}" for c in cells]))
    (out / "per_protein.tsv").write_text("\n".join(lines) + "\n")
    print(f"{report.n_proteins} proteins, {len(report.exclusions)} excluded; "
          f"LR L/5 ACC {report.acc['LR']['5']}, MAE phi {report.mae_phi}, psi {report.mae_psi}")
    return 0


def cmd_predict(args) -> int:
    ckpt = Checkpoint.load(args.checkpoint)
    model, _, std = ckpt.build_model()
    rec = read_pdb(args.pdb, args.chain)
    graph = build_input_graph(rec, args.node_features, args.edge_features)
    probs, phi, psi, defined = predict(model, graph, std)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_contacts(out / f"{rec.id}.contacts", probs)
    write_angles(out / f"{rec.id}.angles", phi, psi, defined[:, 0], defined[:, 1])
    print(f"wrote {rec.id}.contacts and {rec.id}.angles to {out}")
    return 0


def cmd_gradcheck(args) -> int:
    t0 = time.time()
    results = gc.run_suite(full=args.full, seeds=range(args.seeds))
    ok = True
    for name, report in results:
        ok &= report.passed
        print(f"{name:<28s} {report}")
    print(f"{'PASS' if ok else 'FAIL'} ({len(results)} checks, {time.time() - t0:.1f}s)")
    return 0 if ok else 2


COMMANDS = {"train": cmd_train, "eval": cmd_eval, "predict": cmd_predict, "gradcheck": cmd_gradcheck}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:          # --help
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ManifestError, PDBParseError, LengthFilterError, FileNotFoundError,
            json.JSONDecodeError, ValueError) as exc:
        print(f"pggnn {args.command}: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - any other failure is a runtime error
        log.exception("runtime failure")
        print(f"pggnn {args.command}: runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
