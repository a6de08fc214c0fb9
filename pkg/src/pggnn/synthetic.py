"""Seeded synthetic backbones grown as self-avoiding walks in torsion space.

Each residue type has a preferred (φ, ψ) basin, so torsions are predictable from
sequence the way real residue propensities are; jitter around the basin and
rejection of steric clashes make every chain distinct.
"""
from __future__ import annotations

import numpy as np

from .protein import ProteinRecord

AMINO_ACIDS = "ACDEFGHIKLMNPQRSTVWY"

# ideal backbone geometry (Å, degrees)
BOND_N_CA, BOND_CA_C, BOND_C_N = 1.458, 1.525, 1.329
ANGLE_N_CA_C, ANGLE_CA_C_N, ANGLE_C_N_CA = 111.2, 116.2, 121.7
OMEGA = 180.0

BASINS = {
    "helix": (-63.0, -42.0),
    "strand": (-120.0, 130.0),
    "ppii": (-70.0, 145.0),
    "left": (60.0, 40.0),
}
PREFERENCE = {
    **dict.fromkeys("AELMQKRHC", "helix"),
    **dict.fromkeys("VIYFWT", "strand"),
    **dict.fromkeys("PSD", "ppii"),
    **dict.fromkeys("GN", "left"),
}
CLASH_DISTANCE = 4.0


def place_atom(a, b, c, bond: float, angle: float, torsion: float) -> np.ndarray:
    """Position d so that |cd| = bond, angle(b, c, d) = angle and dihedral(a, b, c, d) = torsion."""
    angle, torsion = np.radians(angle), np.radians(torsion)
    bc = c - b
    bc /= np.linalg.norm(bc)
    n = np.cross(b - a, bc)
    n /= np.linalg.norm(n)
    m = np.cross(n, bc)
    d2 = np.array([-bond * np.cos(angle),
                   bond * np.sin(angle) * np.cos(torsion),
                   bond * np.sin(angle) * np.sin(torsion)])
    return c + d2[0] * bc + d2[1] * m + d2[2] * n


def build_backbone(phi, psi) -> np.ndarray:
    """Chain of N/CA/C atoms (L×3×3) realizing the given torsions (φ_0 and ψ_{L-1} unused)."""
    L = len(phi)
    bb = np.zeros((L, 3, 3))
    bb[0, 0] = [0.0, 0.0, 0.0]
    bb[0, 1] = [BOND_N_CA, 0.0, 0.0]
    t = np.radians(180.0 - ANGLE_N_CA_C)
    bb[0, 2] = bb[0, 1] + BOND_CA_C * np.array([np.cos(t), np.sin(t), 0.0])
    for i in range(1, L):
        _extend(bb, i, phi[i], psi[i - 1])
    return bb


def _extend(bb, i, phi_i, psi_prev):
    n_prev, ca_prev, c_prev = bb[i - 1]
    bb[i, 0] = place_atom(n_prev, ca_prev, c_prev, BOND_C_N, ANGLE_CA_C_N, psi_prev)
    bb[i, 1] = place_atom(ca_prev, c_prev, bb[i, 0], BOND_N_CA, ANGLE_C_N_CA, OMEGA)
    bb[i, 2] = place_atom(c_prev, bb[i, 0], bb[i, 1], BOND_CA_C, ANGLE_N_CA_C, phi_i)


# (probability, min length, max length) of a run of one basin class
SEGMENTS = {"helix": (0.4, 6, 14), "strand": (0.3, 4, 9), "ppii": (0.2, 3, 6), "left": (0.1, 1, 2)}
MEMBERS = {cls: [a for a in AMINO_ACIDS if PREFERENCE[a] == cls] for cls in BASINS}


def random_sequence(length: int, rng: np.random.Generator) -> str:
    """Runs of residues sharing a basin class, like secondary-structure segments."""
    names = list(SEGMENTS)
    probs = [SEGMENTS[n][0] for n in names]
    out = []
    while len(out) < length:
        cls = names[rng.choice(len(names), p=probs)]
        _, lo, hi = SEGMENTS[cls]
        out += list(rng.choice(MEMBERS[cls], size=int(rng.integers(lo, hi + 1))))
    return "".join(out[:length])


def _clashes(bb, i) -> bool:
    return i >= 3 and np.min(np.linalg.norm(bb[:i - 2, 1] - bb[i, 1], axis=1)) < CLASH_DISTANCE


def synthetic_protein(length: int, rng: np.random.Generator, protein_id: str = "synthetic",
                      jitter: float = 4.0, max_tries: int = 50, backtrack: int = 4) -> ProteinRecord:
    """Grow a random-sequence chain residue by residue, resampling torsions on clashes.

    A residue that cannot be placed sends the walk back ``backtrack`` residues
    (further on repeated dead ends); a try that exhausts its budget restarts
    with a new sequence.
    """
    if length < 2:
        raise ValueError("length must be at least 2")
    for _ in range(max_tries):
        seq = random_sequence(length, rng)
        means = np.array([BASINS[PREFERENCE[a]] for a in seq])
        phi = np.empty(length)
        psi = np.empty(length)
        bb = np.zeros((length, 3, 3))
        phi[0], psi[0] = means[0] + rng.normal(0.0, jitter, 2)
        bb[:1] = build_backbone(phi[:1], psi[:1])
        i, budget, frontier, dead_ends = 1, 100 * length, 1, 0
        while i < length and budget > 0:
            for _attempt in range(30):
                budget -= 1
                phi_i, psi_i = means[i] + rng.normal(0.0, jitter, 2)
                _extend(bb, i, phi_i, psi[i - 1])
                if not _clashes(bb, i):
                    phi[i], psi[i] = phi_i, psi_i
                    i += 1
                    if i > frontier:
                        frontier, dead_ends = i, 0
                    break
                # the clash may come from ψ_{i-1}: resample it as well
                psi[i - 1] = means[i - 1][1] + rng.normal(0.0, 3 * jitter)
            else:
                dead_ends += 1
                i = max(1, i - backtrack * dead_ends)
        if i == length:
            return ProteinRecord(protein_id, "A", seq, bb)
    raise RuntimeError(f"could not grow a self-avoiding chain of length {length}")


def synthetic_dataset(n: int, seed: int, min_length: int = 20, max_length: int = 40,
                      prefix: str = "syn") -> list[ProteinRecord]:
    rng = np.random.default_rng(seed)
    lengths = rng.integers(min_length, max_length + 1, size=n)
    return [synthetic_protein(int(L), rng, f"{prefix}{k:03d}") for k, L in enumerate(lengths)]


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q *= np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] *= -1
    return q
