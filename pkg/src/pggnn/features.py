"""Input graph assembly: node features F, edge features E and the pairwise map."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .autodiff import Module, Tensor, concat, matmul, parameter
from .protein import ProteinRecord

AMINO_ACIDS = "ACDEFGHIKLMNPQRSTVWY"


class AlignmentError(ValueError):
    pass


@dataclass
class InputGraph:
    node_features: np.ndarray              # L×D
    edge_features: np.ndarray              # L×L×K
    columns: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.node_features = np.asarray(self.node_features, dtype=np.float64)
        L = self.node_features.shape[0]
        if self.edge_features is None:
            self.edge_features = np.zeros((L, L, 0))
        self.edge_features = np.asarray(self.edge_features, dtype=np.float64)
        if self.node_features.ndim != 2 or self.node_features.shape[1] < 1:
            raise ValueError(f"node features must be L×D with D >= 1, got {self.node_features.shape}")
        if self.edge_features.shape[:2] != (L, L) or self.edge_features.ndim != 3:
            raise ValueError(f"edge features must be {L}×{L}×K, got {self.edge_features.shape}")
        if not (np.all(np.isfinite(self.node_features)) and np.all(np.isfinite(self.edge_features))):
            raise ValueError("input features contain non-finite values")

    @property
    def length(self) -> int:
        return self.node_features.shape[0]


def one_hot(sequence: str) -> np.ndarray:
    """20-column amino-acid encoding; unknown residues spread uniformly."""
    out = np.zeros((len(sequence), len(AMINO_ACIDS)))
    for i, aa in enumerate(sequence):
        k = AMINO_ACIDS.find(aa)
        if k < 0:
            out[i] = 1.0 / len(AMINO_ACIDS)
        else:
            out[i, k] = 1.0
    return out


def read_node_features(path, expected_length: int | None = None) -> np.ndarray:
    path = Path(path)
    lines = path.read_text().split("\n")
    try:
        L, D = (int(x) for x in lines[0].split())
        rows = [list(map(float, ln.split())) for ln in lines[1:] if ln.strip()]
    except ValueError as exc:
        raise ValueError(f"{path}: malformed feature file ({exc})") from None
    if expected_length is not None and (L != expected_length or len(rows) != expected_length):
        raise AlignmentError(f"{path}: has {len(rows)} rows (header L={L}), expected L={expected_length}")
    data = np.array(rows, dtype=np.float64).reshape(len(rows), -1)
    if data.shape != (L, D):
        raise ValueError(f"{path}: header says {L}×{D}, body is {data.shape}")
    return data


def write_node_features(path, data: np.ndarray) -> None:
    data = np.asarray(data, dtype=np.float64)
    body = "\n".join(" ".join(repr(float(x)) for x in row) for row in data)
    Path(path).write_text(f"{data.shape[0]} {data.shape[1]}\n{body}\n")


def read_edge_features(path, expected_length: int | None = None) -> np.ndarray:
    path = Path(path)
    lines = path.read_text().split("\n")
    try:
        L1, L2, K = (int(x) for x in lines[0].split())
        rows = [list(map(float, ln.split())) for ln in lines[1:] if ln.strip() or K == 0]
    except ValueError as exc:
        raise ValueError(f"{path}: malformed edge feature file ({exc})") from None
    if L1 != L2:
        raise ValueError(f"{path}: edge header must be 'L L K', got {L1} {L2} {K}")
    if expected_length is not None and L1 != expected_length:
        raise AlignmentError(f"{path}: edge features for L={L1}, expected L={expected_length}")
    rows = rows[:L1 * L1]
    if len(rows) != L1 * L1:
        raise AlignmentError(f"{path}: has {len(rows)} pair rows, expected {L1 * L1}")
    return np.array(rows, dtype=np.float64).reshape(L1, L1, K)


def write_edge_features(path, data: np.ndarray) -> None:
    data = np.asarray(data, dtype=np.float64)
    L, _, K = data.shape
    body = "\n".join(" ".join(repr(float(x)) for x in row) for row in data.reshape(L * L, K))
    Path(path).write_text(f"{L} {L} {K}\n{body}\n")


def assemble_node_features(rec: ProteinRecord, sources=(), include_one_hot: bool = True):
    """Column-concatenate feature files (in order) and the one-hot encoding.

    Returns ``(F, columns)``.  With no files this is the synthetic mode (D = 20).
    """
    blocks, columns = [], []
    for src in sources:
        data = read_node_features(src, rec.length)
        blocks.append(data)
        columns += [f"{Path(src).name}:{j}" for j in range(data.shape[1])]
    if include_one_hot or not blocks:
        blocks.append(one_hot(rec.sequence))
        columns += [f"onehot:{a}" for a in AMINO_ACIDS]
    return np.concatenate(blocks, axis=1), columns


def build_input_graph(rec: ProteinRecord, node_feature_path=None, edge_feature_path=None) -> InputGraph:
    sources = [node_feature_path] if node_feature_path else []
    F, columns = assemble_node_features(rec, sources)
    E = read_edge_features(edge_feature_path, rec.length) if edge_feature_path else None
    return InputGraph(F, E, columns)


class Standardizer:
    """Per-column z-scoring fitted on the rows of a training split."""

    def __init__(self, mean: np.ndarray, std: np.ndarray):
        self.mean = np.asarray(mean, dtype=np.float64)
        self.std = np.asarray(std, dtype=np.float64)

    @classmethod
    def fit(cls, graphs) -> Standardizer:
        rows = np.concatenate([g.node_features for g in graphs], axis=0)
        mean = rows.mean(axis=0)
        std = rows.std(axis=0)
        # constant columns are centred but not scaled
        std[std < 1e-12] = 1.0
        return cls(mean, std)

    def apply(self, graph: InputGraph) -> InputGraph:
        return InputGraph((graph.node_features - self.mean) / self.std, graph.edge_features, graph.columns)


# -- pairwise input ------------------------------------------------------------------

def _shift_matrix(L: int, offset: int) -> np.ndarray:
    """S with (S @ X)[i] = X[i + offset], zero outside the sequence."""
    return np.eye(L, k=offset)


class SequenceConv1D(Module):
    """Window-3, same-padded 1D convolution along the sequence (D -> d channels)."""

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator):
        limit = np.sqrt(6.0 / (3 * in_dim + out_dim))
        self.kernel = parameter(rng.uniform(-limit, limit, (3, in_dim, out_dim)))
        self.bias = parameter(np.zeros(out_dim))

    def __call__(self, F: Tensor) -> Tensor:
        L, D = F.shape
        window = concat([matmul(Tensor(_shift_matrix(L, -1)), F), F,
                         matmul(Tensor(_shift_matrix(L, 1)), F)], axis=1)
        return window @ self.kernel.reshape(3 * D, -1) + self.bias


def build_pairwise_input(F, E, transform) -> Tensor:
    """Pairwise feature map (2d+K)×L×L with channels (T_i, T_j, E_ij) at (i, j)."""
    F = F if isinstance(F, Tensor) else Tensor(F)
    T = transform(F)                                   # L×d
    L, d = T.shape
    Tt = T.transpose(1, 0)                              # d×L
    rows = Tt.reshape(d, L, 1).broadcast_to((d, L, L))
    cols = Tt.reshape(d, 1, L).broadcast_to((d, L, L))
    E = np.asarray(E if E is not None else np.zeros((L, L, 0)), dtype=np.float64)
    blocks = [rows, cols]
    if E.shape[2]:
        blocks.append(Tensor(E.transpose(2, 0, 1)))
    return concat(blocks, axis=0)
