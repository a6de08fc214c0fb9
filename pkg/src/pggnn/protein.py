"""Backbone parsing and ground-truth geometry (Cα distances, φ/ψ, distance bins)."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAX_LENGTH = 300
CONTACT_CUTOFF = 8.0
BACKBONE_ATOMS = ("N", "CA", "C")
# C(i-1)-N(i) longer than this is treated as a chain break; peptide bonds are ~1.33 Å
PEPTIDE_BREAK = 2.0

THREE_TO_ONE = {
    "ALA": "A", "ARG": "R", "ASN": "N", "ASP": "D", "CYS": "C", "GLN": "Q", "GLU": "E",
    "GLY": "G", "HIS": "H", "ILE": "I", "LEU": "L", "LYS": "K", "MET": "M", "PHE": "F",
    "PRO": "P", "SER": "S", "THR": "T", "TRP": "W", "TYR": "Y", "VAL": "V", "MSE": "M",
    "SEC": "C", "PYL": "K",
}
ONE_TO_THREE = {v: k for k, v in THREE_TO_ONE.items() if k not in ("MSE", "SEC", "PYL")}


class PDBParseError(ValueError):
    pass


class EmptyChainError(PDBParseError):
    pass


class LengthFilterError(ValueError):
    pass


class ManifestError(ValueError):
    pass


@dataclass
class ProteinRecord:
    """Backbone of one chain.  ``backbone`` is L×3×3 (N, CA, C), NaN where absent."""

    id: str
    chain: str
    sequence: str
    backbone: np.ndarray
    res_ids: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.backbone = np.asarray(self.backbone, dtype=np.float64)
        if self.backbone.shape != (len(self.sequence), 3, 3):
            raise ValueError(f"backbone shape {self.backbone.shape} does not match sequence length {len(self.sequence)}")
        if not self.res_ids:
            self.res_ids = [str(i + 1) for i in range(len(self.sequence))]

    @property
    def length(self) -> int:
        return len(self.sequence)

    def transformed(self, rotation: np.ndarray, translation: np.ndarray) -> ProteinRecord:
        coords = self.backbone @ np.asarray(rotation).T + np.asarray(translation)
        return ProteinRecord(self.id, self.chain, self.sequence, coords, list(self.res_ids))

    def __eq__(self, other):
        if not isinstance(other, ProteinRecord):
            return NotImplemented
        return (self.id == other.id and self.chain == other.chain and self.sequence == other.sequence
                and self.res_ids == other.res_ids
                and np.array_equal(self.backbone, other.backbone, equal_nan=True))


@dataclass(frozen=True)
class DistanceBinSpec:
    """Distance discretization; d lands in label = number of boundaries <= d."""

    boundaries: tuple[float, ...] = (CONTACT_CUTOFF,)

    def __post_init__(self):
        b = np.asarray(self.boundaries, dtype=float)
        if b.size == 0 or np.any(b <= 0) or np.any(np.diff(b) <= 0):
            raise ValueError(f"bin boundaries must be strictly ascending positive values, got {self.boundaries}")

    @property
    def n_bins(self) -> int:
        return len(self.boundaries) + 1

    @classmethod
    def multi(cls) -> DistanceBinSpec:
        return cls(tuple(float(x) for x in range(4, 21, 2)))


@dataclass
class TargetGeometry:
    distance: np.ndarray
    bin_labels: np.ndarray
    contact_mask: np.ndarray
    phi: np.ndarray
    psi: np.ndarray
    phi_mask: np.ndarray
    psi_mask: np.ndarray


# -- PDB ---------------------------------------------------------------------------

def parse_pdb_backbone(text: str, chain: str, protein_id: str = "protein",
                       max_length: int = MAX_LENGTH) -> ProteinRecord:
    """Extract N/CA/C coordinates of one chain from fixed-column ATOM records."""
    residues: dict[tuple[int, str], dict] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if line.startswith("ENDMDL"):
            break
        if not line.startswith("ATOM  "):
            continue
        if len(line) < 54:
            raise PDBParseError(f"line {lineno}: ATOM record shorter than 54 columns")
        if line[21] != chain:
            continue
        atom = line[12:16].strip()
        try:
            seq_num = int(line[22:26])
            xyz = [float(line[30:38]), float(line[38:46]), float(line[46:54])]
        except ValueError:
            raise PDBParseError(f"line {lineno}: malformed residue number or coordinates") from None
        if not np.all(np.isfinite(xyz)):
            raise PDBParseError(f"line {lineno}: non-finite coordinate")
        key = (seq_num, line[26])
        res = residues.setdefault(key, {"name": line[17:20].strip(), "atoms": {}})
        if atom in BACKBONE_ATOMS and atom not in res["atoms"]:
            res["atoms"][atom] = xyz
    if not residues:
        raise EmptyChainError(f"no ATOM records on chain {chain!r}")
    keys = sorted(residues)
    if len(keys) > max_length:
        raise LengthFilterError(f"chain {chain!r} has {len(keys)} residues, limit is {max_length}")
    if len(keys) < 2:
        raise LengthFilterError(f"chain {chain!r} has {len(keys)} residue(s), need at least 2")
    backbone = np.full((len(keys), 3, 3), np.nan)
    seq = []
    for i, key in enumerate(keys):
        res = residues[key]
        seq.append(THREE_TO_ONE.get(res["name"], "X"))
        for a, name in enumerate(BACKBONE_ATOMS):
            if name in res["atoms"]:
                backbone[i, a] = res["atoms"][name]
    res_ids = [f"{n}{ic}".strip() for n, ic in keys]
    return ProteinRecord(protein_id, chain, "".join(seq), backbone, res_ids)


def read_pdb(path, chain: str, protein_id: str | None = None) -> ProteinRecord:
    path = Path(path)
    return parse_pdb_backbone(path.read_text(), chain, protein_id or path.stem)


def to_pdb(rec: ProteinRecord) -> str:
    """Render the backbone as ATOM records (absent atoms are omitted)."""
    lines, serial = [], 1
    for i, aa in enumerate(rec.sequence):
        rid = rec.res_ids[i]
        icode = rid[-1] if rid and not rid[-1].isdigit() else " "
        num = int(rid[:-1] if icode != " " else rid)
        for a, name in enumerate(BACKBONE_ATOMS):
            x, y, z = rec.backbone[i, a]
            if np.isnan(x):
                continue
            lines.append(
                f"ATOM  {serial:5d}  {name:<3s} {ONE_TO_THREE.get(aa, 'UNK'):>3s} {rec.chain}{num:4d}{icode}   "
                f"{x:8.3f}{y:8.3f}{z:8.3f}  1.00  0.00           {name[0]}"
            )
            serial += 1
    lines.append("END")
    return "\n".join(lines) + "\n"


# -- geometry ------------------------------------------------------------------------

def ca_distance_matrix(rec: ProteinRecord) -> tuple[np.ndarray, np.ndarray]:
    ca = rec.backbone[:, 1]
    present = ~np.isnan(ca).any(axis=1)
    diff = ca[:, None, :] - ca[None, :, :]
    dist = np.sqrt((diff ** 2).sum(-1))
    mask = present[:, None] & present[None, :]
    dist = np.where(mask, dist, 0.0)
    np.fill_diagonal(dist, 0.0)
    return dist, mask


def dihedral(p0, p1, p2, p3) -> float:
    """Signed dihedral p0-p1-p2-p3 in degrees, (-180, 180]; NaN if a plane is degenerate."""
    b1 = np.asarray(p1, float) - p0
    b2 = np.asarray(p2, float) - p1
    b3 = np.asarray(p3, float) - p2
    n1 = np.cross(b1, b2)
    n2 = np.cross(b2, b3)
    nb2 = np.linalg.norm(b2)
    scale = np.linalg.norm(b1) * nb2 * np.linalg.norm(b3)
    if nb2 == 0 or np.linalg.norm(n1) <= 1e-10 * scale or np.linalg.norm(n2) <= 1e-10 * scale:
        return float("nan")
    y = nb2 * np.dot(b1, n2)
    x = np.dot(n1, n2)
    angle = float(np.degrees(np.arctan2(y, x)))
    return 180.0 if angle <= -180.0 else angle


def backbone_dihedrals(rec: ProteinRecord):
    """φ_i = (C_{i-1}, N_i, CA_i, C_i) and ψ_i = (N_i, CA_i, C_i, N_{i+1}), in degrees.

    Returns ``(phi, psi, phi_mask, psi_mask)``; masked entries hold NaN.
    """
    bb = rec.backbone
    L = rec.length
    phi = np.full(L, np.nan)
    psi = np.full(L, np.nan)
    degenerate = 0
    for i in range(L):
        if i > 0:
            quad = (bb[i - 1, 2], bb[i, 0], bb[i, 1], bb[i, 2])
            if _usable(quad) and _bonded(bb[i - 1, 2], bb[i, 0]):
                phi[i] = dihedral(*quad)
                degenerate += np.isnan(phi[i])
        if i < L - 1:
            quad = (bb[i, 0], bb[i, 1], bb[i, 2], bb[i + 1, 0])
            if _usable(quad) and _bonded(bb[i, 2], bb[i + 1, 0]):
                psi[i] = dihedral(*quad)
                degenerate += np.isnan(psi[i])
    if degenerate:
        warnings.warn(f"{rec.id}: {degenerate} dihedral(s) masked because three atoms are colinear",
                      RuntimeWarning, stacklevel=2)
    return phi, psi, ~np.isnan(phi), ~np.isnan(psi)


def _usable(points) -> bool:
    return not any(np.isnan(p).any() for p in points)


def _bonded(c_prev, n_next) -> bool:
    return float(np.linalg.norm(np.asarray(c_prev) - n_next)) <= PEPTIDE_BREAK


def bin_distances(distance: np.ndarray, spec: DistanceBinSpec = DistanceBinSpec()) -> np.ndarray:
    d = np.asarray(distance, dtype=float)
    if np.any(d < 0):
        raise ValueError("distances must be non-negative")
    return np.searchsorted(np.asarray(spec.boundaries), d, side="right").astype(np.int64)


def target_geometry(rec: ProteinRecord, spec: DistanceBinSpec = DistanceBinSpec()) -> TargetGeometry:
    dist, mask = ca_distance_matrix(rec)
    phi, psi, pm, sm = backbone_dihedrals(rec)
    return TargetGeometry(dist, bin_distances(dist, spec), mask, phi, psi, pm, sm)


# -- manifest ---------------------------------------------------------------------------

SPLITS = ("train", "val", "test")


@dataclass(frozen=True)
class ManifestEntry:
    id: str
    pdb_path: Path
    chain: str
    node_feature_path: Path | None
    edge_feature_path: Path | None
    split: str


@dataclass
class DatasetManifest:
    entries: list[ManifestEntry]
    path: Path | None = None

    def split(self, tag: str) -> list[ManifestEntry]:
        if tag not in SPLITS:
            raise ManifestError(f"unknown split {tag!r}")
        return [e for e in self.entries if e.split == tag]


def load_manifest(path) -> DatasetManifest:
    """Read a tab-separated manifest; relative paths resolve against its directory."""
    path = Path(path)
    if not path.is_file():
        raise ManifestError(f"manifest not found: {path}")
    base = path.parent
    entries, seen, missing = [], set(), []

    def resolve(value: str) -> Path | None:
        if value == "-":
            return None
        p = Path(value)
        p = p if p.is_absolute() else base / p
        if not p.exists():
            missing.append(str(p))
        return p

    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 6:
            raise ManifestError(f"{path}:{lineno}: expected 6 tab-separated fields, got {len(fields)}")
        pid, pdb, chain, node, edge, split = (f.strip() for f in fields)
        if pid in seen:
            raise ManifestError(f"{path}:{lineno}: duplicate id {pid!r}")
        if split not in SPLITS:
            raise ManifestError(f"{path}:{lineno}: unknown split {split!r}")
        if len(chain) != 1:
            raise ManifestError(f"{path}:{lineno}: chain must be one character, got {chain!r}")
        seen.add(pid)
        entries.append(ManifestEntry(pid, resolve(pdb), chain, resolve(node), resolve(edge), split))
    if missing:
        raise ManifestError("manifest references missing files: " + ", ".join(missing))
    return DatasetManifest(entries, path)


def write_manifest(path, entries) -> None:
    rows = []
    for e in entries:
        rows.append("\t".join([e.id, str(e.pdb_path), e.chain,
                               str(e.node_feature_path) if e.node_feature_path else "-",
                               str(e.edge_feature_path) if e.edge_feature_path else "-", e.split]))
    Path(path).write_text("\n".join(rows) + "\n")
