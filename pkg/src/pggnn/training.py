"""Losses, joint optimization and the binary checkpoint format."""
from __future__ import annotations

import copy
import io
import json
import logging
import struct
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .autodiff import Adam, AdamState, Tensor, clip_grad_norm, no_grad, softmax_cross_entropy
from .features import InputGraph, Standardizer, build_input_graph
from .metrics import angle_mae, contact_pair_accuracy
from .model import PGGNN
from .node_path import encode_angles
from .protein import DistanceBinSpec, ProteinRecord, TargetGeometry, load_manifest, read_pdb, target_geometry

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


class ConfigError(ValueError):
    pass


@dataclass
class TrainingConfig:
    lam: float = 1.0
    learning_rate: float = 0.00013
    max_epochs: int = 500
    patience: int = 20
    batch_size: int = 1
    seed: int = 0
    clip_norm: float = 1.0
    edge_blocks: int = 10
    conv_layers: int = 4
    rounds: int = 6
    channels: int = 48
    pair_dim: int = 24
    state_dim: int = 64
    edge_hidden: int = 16
    readout_hidden: int = 64
    bin_boundaries: list = field(default_factory=lambda: [8.0])
    dilations: list = field(default_factory=lambda: [1, 2, 4, 1])
    stop_gradient: bool = False
    sparsify_topk: int | None = None
    standardize: bool = False

    def __post_init__(self):
        if self.lam < 0:
            raise ConfigError("lam must be >= 0")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if self.patience < 1:
            raise ConfigError("patience must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        self.bin_boundaries = [float(b) for b in self.bin_boundaries]
        self.dilations = [int(d) for d in self.dilations] if self.dilations else []
        DistanceBinSpec(tuple(self.bin_boundaries))

    @property
    def bins(self) -> int:
        return len(self.bin_boundaries) + 1

    @property
    def bin_spec(self) -> DistanceBinSpec:
        return DistanceBinSpec(tuple(self.bin_boundaries))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> TrainingConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {', '.join(sorted(unknown))}")
        return cls(**data)


@dataclass
class Example:
    id: str
    graph: InputGraph
    target: TargetGeometry


def make_example(rec: ProteinRecord, spec: DistanceBinSpec, node_feature_path=None,
                 edge_feature_path=None) -> Example:
    return Example(rec.id, build_input_graph(rec, node_feature_path, edge_feature_path),
                   target_geometry(rec, spec))


# -- losses --------------------------------------------------------------------------

def edge_loss(logits: Tensor, bin_labels, contact_mask) -> Tensor:
    """Masked mean cross-entropy over all ordered pairs (bins on axis 0)."""
    return softmax_cross_entropy(logits, bin_labels, contact_mask, axis=0)


def node_loss(v: Tensor, phi, psi, phi_mask, psi_mask) -> Tensor:
    """Squared error between v and (sin φ, cos φ, sin ψ, cos ψ), each angle averaged over its valid residues."""
    phi_mask = np.asarray(phi_mask, bool)
    psi_mask = np.asarray(psi_mask, bool)
    n_phi, n_psi = int(phi_mask.sum()), int(psi_mask.sum())
    if n_phi == 0 or n_psi == 0:
        raise ValueError("node loss needs at least one unmasked φ and one unmasked ψ")
    target = encode_angles(np.where(phi_mask, phi, 0.0), np.where(psi_mask, psi, 0.0))
    weight = np.zeros_like(target)
    weight[:, :2] = phi_mask[:, None] / n_phi
    weight[:, 2:] = psi_mask[:, None] / n_psi
    return (Tensor(weight) * (v - Tensor(target)) ** 2).sum()


def total_loss(l_edge, l_node, lam: float):
    return l_edge + l_node * lam


def example_losses(model: PGGNN, ex: Example, lam: float):
    out = model(ex.graph)
    t = ex.target
    le = edge_loss(out.edge.logits, t.bin_labels, t.contact_mask)
    ln = node_loss(out.node.v, t.phi, t.psi, t.phi_mask, t.psi_mask)
    return le, ln, total_loss(le, ln, lam), out


# -- optimization ------------------------------------------------------------------------

def make_optimizer(model: PGGNN, config: TrainingConfig, state: AdamState | None = None) -> Adam:
    return Adam(model.named_parameters(), lr=config.learning_rate, state=state)


def node_only_optimizer(model: PGGNN, config: TrainingConfig) -> Adam:
    """Freeze the edge path and optimize the node path alone (two-stage baseline)."""
    model.freeze_edge = True
    return Adam(model.node_path.named_parameters("node_path."), lr=config.learning_rate)


def train_step(model: PGGNN, batch, optimizer: Adam, config: TrainingConfig) -> dict:
    """Accumulate gradients over whole proteins, clip, and apply one Adam step."""
    if not batch:
        raise TrainingError("empty batch")
    optimizer.zero_grad()
    sums = {"edge": 0.0, "node": 0.0, "total": 0.0}
    for ex in batch:
        le, ln, lt, _ = example_losses(model, ex, config.lam)
        if not np.isfinite(lt.item()):
            raise TrainingError(f"non-finite loss on protein {ex.id}; step aborted")
        (lt * (1.0 / len(batch))).backward()
        sums["edge"] += le.item()
        sums["node"] += ln.item()
        sums["total"] += lt.item()
    grad_norm = clip_grad_norm(optimizer.params.values(), config.clip_norm)
    optimizer.step()
    out = {k: v / len(batch) for k, v in sums.items()}
    out["grad_norm"] = grad_norm
    return out


def train_epoch(model, examples, optimizer, config, rng: np.random.Generator) -> dict:
    order = rng.permutation(len(examples))
    totals = {"edge": 0.0, "node": 0.0, "total": 0.0}
    for start in range(0, len(order), config.batch_size):
        batch = [examples[i] for i in order[start:start + config.batch_size]]
        res = train_step(model, batch, optimizer, config)
        for k in totals:
            totals[k] += res[k] * len(batch)
    return {k: v / len(examples) for k, v in totals.items()}


def validate(model: PGGNN, examples, config: TrainingConfig) -> dict:
    """Mean losses plus all-pairs contact accuracy and angle MAE, no gradients recorded."""
    keys = ("edge", "node", "total", "contact_acc", "mae_phi", "mae_psi")
    acc = {k: [] for k in keys}
    with no_grad():
        for ex in examples:
            le, ln, lt, out = example_losses(model, ex, config.lam)
            t = ex.target
            vals = (le.item(), ln.item(), lt.item(),
                    contact_pair_accuracy(out.edge.contact_map, t.distance, t.contact_mask),
                    angle_mae(out.node.phi, t.phi, t.phi_mask),
                    angle_mae(out.node.psi, t.psi, t.psi_mask))
            for k, v in zip(keys, vals):
                if v is not None:
                    acc[k].append(v)
    return {k: float(np.mean(v)) if v else None for k, v in acc.items()}


# -- checkpoint ----------------------------------------------------------------------------

MAGIC = b"PGNN"
FORMAT_VERSION = 1


def _write_array(buf, name: str, arr: np.ndarray) -> None:
    raw = name.encode("utf-8")
    buf.write(struct.pack("<I", len(raw)))
    buf.write(raw)
    buf.write(struct.pack("<I", arr.ndim))
    buf.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
    buf.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def _read_array(buf) -> tuple[str, np.ndarray]:
    (n,) = struct.unpack("<I", buf.read(4))
    name = buf.read(n).decode("utf-8")
    (ndim,) = struct.unpack("<I", buf.read(4))
    shape = struct.unpack(f"<{ndim}Q", buf.read(8 * ndim))
    count = int(np.prod(shape)) if ndim else 1
    data = np.frombuffer(buf.read(8 * count), dtype="<f8").astype(np.float64).reshape(shape)
    return name, data


@dataclass
class Checkpoint:
    params: dict[str, np.ndarray]
    adam: AdamState | None
    epoch: int
    metrics: dict
    config: dict
    extra: dict = field(default_factory=dict)   # model dims, standardizer
    version: int = FORMAT_VERSION

    def to_bytes(self) -> bytes:
        buf = io.BytesIO()
        buf.write(MAGIC)
        buf.write(struct.pack("<I", self.version))
        buf.write(struct.pack("<I", len(self.params)))
        for name, arr in self.params.items():
            _write_array(buf, name, arr)
        adam = self.adam or AdamState()
        buf.write(struct.pack("<B", self.adam is not None))
        buf.write(struct.pack("<Q4d", adam.step, adam.lr, adam.beta1, adam.beta2, adam.eps))
        buf.write(struct.pack("<I", len(adam.m)))
        for name in adam.m:
            _write_array(buf, name, adam.m[name])
            _write_array(buf, name, adam.v[name])
        doc = json.dumps({"epoch": self.epoch, "metrics": self.metrics, "config": self.config,
                          "extra": self.extra}, sort_keys=True).encode("utf-8")
        buf.write(struct.pack("<I", len(doc)))
        buf.write(doc)
        return buf.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> Checkpoint:
        buf = io.BytesIO(data)
        if buf.read(4) != MAGIC:
            raise ValueError("not a PGNN checkpoint (bad magic bytes)")
        (version,) = struct.unpack("<I", buf.read(4))
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported checkpoint format version {version}")
        (n,) = struct.unpack("<I", buf.read(4))
        params = dict(_read_array(buf) for _ in range(n))
        (has_adam,) = struct.unpack("<B", buf.read(1))
        step, lr, b1, b2, eps = struct.unpack("<Q4d", buf.read(40))
        (n_moments,) = struct.unpack("<I", buf.read(4))
        m, v = {}, {}
        for _ in range(n_moments):
            name, arr = _read_array(buf)
            m[name] = arr
            _, v[name] = _read_array(buf)
        adam = AdamState(lr, b1, b2, eps, step, m, v) if has_adam else None
        (doc_len,) = struct.unpack("<I", buf.read(4))
        doc = json.loads(buf.read(doc_len).decode("utf-8"))
        return cls(params, adam, doc["epoch"], doc["metrics"], doc["config"], doc["extra"], version)

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> Checkpoint:
        return cls.from_bytes(Path(path).read_bytes())

    def build_model(self) -> tuple[PGGNN, TrainingConfig, Standardizer | None]:
        config = TrainingConfig.from_dict(self.config)
        model = PGGNN.from_config(config, self.extra["node_dim"], self.extra.get("edge_dim", 0))
        load_parameters(model, self.params)
        std = None
        if self.extra.get("standardizer"):
            s = self.extra["standardizer"]
            std = Standardizer(np.array(s["mean"]), np.array(s["std"]))
        return model, config, std


def snapshot(model: PGGNN, optimizer: Adam | None, epoch: int, metrics: dict, config: TrainingConfig,
             extra: dict) -> Checkpoint:
    params = {k: p.data.copy() for k, p in model.named_parameters().items()}
    return Checkpoint(params, copy.deepcopy(optimizer.state) if optimizer else None, epoch,
                      dict(metrics), config.to_dict(), dict(extra))


def load_parameters(model: PGGNN, params: dict[str, np.ndarray]) -> None:
    named = model.named_parameters()
    if set(named) != set(params):
        missing = sorted(set(named) ^ set(params))
        raise ValueError(f"checkpoint parameters do not match the model: {missing[:5]}")
    for k, p in named.items():
        if p.shape != params[k].shape:
            raise ValueError(f"parameter {k}: checkpoint shape {params[k].shape}, model {p.shape}")
        p.data[...] = params[k]


# -- fitting -------------------------------------------------------------------------------

@dataclass
class FitResult:
    best: Checkpoint
    history: list[dict]
    model: PGGNN


def fit_examples(train, val, config: TrainingConfig, extra: dict | None = None, callback=None) -> FitResult:
    """Epoch loop with seeded shuffling, per-epoch validation and early stopping.

    ``callback(epoch, entry, model)`` may return True to stop early.
    """
    if not train or not val:
        raise ConfigError("training needs nonempty train and val splits")
    extra = dict(extra or {})
    extra.setdefault("node_dim", train[0].graph.node_features.shape[1])
    extra.setdefault("edge_dim", train[0].graph.edge_features.shape[2])
    model = PGGNN.from_config(config, extra["node_dim"], extra["edge_dim"])
    optimizer = make_optimizer(model, config)
    rng = np.random.default_rng(config.seed)
    history, best, best_loss, stale = [], None, np.inf, 0
    for epoch in range(1, config.max_epochs + 1):
        train_losses = train_epoch(model, train, optimizer, config, rng)
        val_metrics = validate(model, val, config)
        entry = {"epoch": epoch, "lam": config.lam,
                 **{f"train_{k}": v for k, v in train_losses.items()},
                 **{f"val_{k}": v for k, v in val_metrics.items()}}
        history.append(entry)
        log.info("epoch %d L_E=%.4f L_F=%.4f val_total=%.4f", epoch, train_losses["edge"],
                 train_losses["node"], val_metrics["total"])
        if val_metrics["total"] < best_loss:
            best_loss, stale = val_metrics["total"], 0
            best = snapshot(model, optimizer, epoch, val_metrics, config, extra)
        else:
            stale += 1
        if stale >= config.patience:
            break
        if callback is not None and callback(epoch, entry, model):
            break
    return FitResult(best, history, model)


def load_examples(entries, spec: DistanceBinSpec) -> list[Example]:
    return [make_example(read_pdb(e.pdb_path, e.chain, e.id), spec, e.node_feature_path, e.edge_feature_path)
            for e in entries]


def fit(manifest, config: TrainingConfig, callback=None) -> FitResult:
    manifest = load_manifest(manifest) if not hasattr(manifest, "entries") else manifest
    spec = config.bin_spec
    train = load_examples(manifest.split("train"), spec)
    val = load_examples(manifest.split("val"), spec)
    if not train or not val:
        raise ConfigError("manifest needs nonempty train and val splits")
    extra = {}
    if config.standardize:
        std = Standardizer.fit([ex.graph for ex in train])
        for ex in train + val:
            ex.graph = std.apply(ex.graph)
        extra["standardizer"] = {"mean": std.mean.tolist(), "std": std.std.tolist()}
    return fit_examples(train, val, config, extra, callback)
