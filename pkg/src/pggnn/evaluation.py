"""Dataset-level evaluation, the metrics report and prediction file formats."""
from __future__ import annotations

import json
import subprocess
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .autodiff import no_grad
from .metrics import RANGES, TOP_K, angle_mae, contact_accuracy_topk, contact_pair_accuracy
from .node_path import recover_angles
from .training import Checkpoint, load_examples

RANGE_NAMES = tuple(RANGES)


@dataclass
class ProteinMetrics:
    id: str
    length: int
    acc: dict                     # acc[range][str(k)] -> float | None
    mae_phi: float | None
    mae_psi: float | None
    pair_acc: float | None = None
    shortfall: dict = field(default_factory=dict)

    @property
    def err(self) -> dict:
        return _err(self.acc)


def _err(acc: dict) -> dict:
    return {r: {k: (None if a is None else 1.0 - a) for k, a in row.items()} for r, row in acc.items()}


@dataclass
class MetricsReport:
    acc: dict
    mae_phi: float | None
    mae_psi: float | None
    n_proteins: int
    proteins: list[ProteinMetrics] = field(default_factory=list)
    exclusions: list[dict] = field(default_factory=list)
    pair_acc: float | None = None
    config: dict = field(default_factory=dict)
    version: str = ""

    @property
    def err(self) -> dict:
        return _err(self.acc)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["err"] = self.err
        for p, pm in zip(d["proteins"], self.proteins):
            p["err"] = pm.err
        return d

    def render(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def parse(cls, text: str) -> MetricsReport:
        d = json.loads(text)
        d.pop("err", None)
        proteins = []
        for p in d.pop("proteins"):
            p.pop("err", None)
            proteins.append(ProteinMetrics(**p))
        return cls(proteins=proteins, **d)


def protein_metrics(pid: str, contact_map, target, phi_pred, psi_pred) -> ProteinMetrics:
    acc, shortfall = {}, {}
    for r in RANGE_NAMES:
        acc[r], shortfall[r] = {}, {}
        for k in TOP_K:
            res = contact_accuracy_topk(contact_map, target.distance, target.contact_mask, r, k)
            acc[r][str(k)] = res.accuracy
            shortfall[r][str(k)] = res.shortfall
    return ProteinMetrics(pid, int(contact_map.shape[0]), acc,
                          angle_mae(phi_pred, target.phi, target.phi_mask),
                          angle_mae(psi_pred, target.psi, target.psi_mask),
                          contact_pair_accuracy(contact_map, target.distance, target.contact_mask),
                          shortfall)


def _mean(values):
    values = [v for v in values if v is not None]
    return float(np.mean(values)) if values else None


def aggregate(proteins: list[ProteinMetrics], pooled: bool = False) -> dict:
    """Dataset means per cell; ``pooled`` weights proteins by selected-pair count."""
    acc = {}
    for r in RANGE_NAMES:
        acc[r] = {}
        for k in TOP_K:
            key = str(k)
            if pooled:
                pairs = [(p.acc[r][key], p.length // k - p.shortfall[r][key]) for p in proteins
                         if p.acc[r][key] is not None]
                n = sum(c for _, c in pairs)
                acc[r][key] = float(sum(a * c for a, c in pairs) / n) if n else None
            else:
                acc[r][key] = _mean(p.acc[r][key] for p in proteins)
    return acc


def version_string() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], capture_output=True,
                             text=True, timeout=5, cwd=Path(__file__).parent)
        if out.returncode == 0 and out.stdout.strip():
            return f"v{__version__}-g{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return f"v{__version__}"


def evaluate_examples(model, examples, config=None, pooled: bool = False) -> MetricsReport:
    proteins, exclusions = [], []
    with no_grad():
        for ex in examples:
            try:
                out = model(ex.graph)
            except (FloatingPointError, ValueError) as exc:
                exclusions.append({"id": ex.id, "reason": str(exc)})
                continue
            proteins.append(protein_metrics(ex.id, out.edge.contact_map, ex.target,
                                            out.node.phi, out.node.psi))
    return MetricsReport(aggregate(proteins, pooled), _mean(p.mae_phi for p in proteins),
                         _mean(p.mae_psi for p in proteins), len(proteins), proteins, exclusions,
                         _mean(p.pair_acc for p in proteins),
                         config.to_dict() if config is not None else {}, version_string())


def evaluate_dataset(entries, checkpoint: Checkpoint, pooled: bool = False) -> MetricsReport:
    if not entries:
        raise ValueError("evaluation split is empty")
    model, config, std = checkpoint.build_model()
    examples = load_examples(entries, config.bin_spec)
    if std is not None:
        for ex in examples:
            ex.graph = std.apply(ex.graph)
    return evaluate_examples(model, examples, config, pooled)


# -- prediction files ------------------------------------------------------------------

def write_contacts(path, probabilities: np.ndarray) -> None:
    """``L B`` header, then ``i j p_contact p_bin0 ... p_bin{B-1}`` for i<j (1-based)."""
    B, L, _ = probabilities.shape
    lines = [f"{L} {B}"]
    for i in range(L):
        for j in range(i + 1, L):
            probs = " ".join(repr(float(x)) for x in probabilities[:, i, j])
            lines.append(f"{i + 1} {j + 1} {float(probabilities[0, i, j])!r} {probs}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_contacts(path) -> np.ndarray:
    """Inverse of :func:`write_contacts`; returns the symmetric B×L×L array (diagonal 0)."""
    lines = Path(path).read_text().splitlines()
    L, B = (int(x) for x in lines[0].split())
    out = np.zeros((B, L, L))
    for ln in lines[1:]:
        parts = ln.split()
        i, j = int(parts[0]) - 1, int(parts[1]) - 1
        probs = np.array([float(x) for x in parts[3:]])
        if len(probs) != B:
            raise ValueError(f"{path}: pair ({i + 1}, {j + 1}) has {len(probs)} bins, expected {B}")
        out[:, i, j] = out[:, j, i] = probs
    return out


def write_angles(path, phi, psi, phi_defined=None, psi_defined=None) -> None:
    L = len(phi)
    phi_defined = np.ones(L, bool) if phi_defined is None else phi_defined
    psi_defined = np.ones(L, bool) if psi_defined is None else psi_defined

    def fmt(x, ok):
        return repr(float(x)) if ok and np.isfinite(x) else "NA"

    lines = [str(L)] + [f"{i + 1} {fmt(phi[i], phi_defined[i])} {fmt(psi[i], psi_defined[i])}" for i in range(L)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_angles(path) -> tuple[np.ndarray, np.ndarray]:
    lines = Path(path).read_text().splitlines()
    L = int(lines[0])
    phi, psi = np.full(L, np.nan), np.full(L, np.nan)
    for ln in lines[1:]:
        i, a, b = ln.split()
        phi[int(i) - 1] = np.nan if a == "NA" else float(a)
        psi[int(i) - 1] = np.nan if b == "NA" else float(b)
    return phi, psi


def predict(model, graph, std=None):
    """Return (probabilities B×L×L, phi, psi, defined L×2) for one input graph."""
    if std is not None:
        graph = std.apply(graph)
    with no_grad():
        out = model(graph)
    phi, psi, defined = recover_angles(out.node.v.data)
    return out.edge.probabilities.data, phi, psi, defined
