"""Contact and torsion metrics for a single protein."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .protein import CONTACT_CUTOFF

RANGES = {"SR": (6, 11), "MR": (12, 23), "LR": (24, None)}
TOP_K = (10, 5, 2, 1)


@dataclass
class TopKResult:
    accuracy: float | None      # None when no pair is eligible
    selected: int
    requested: int

    @property
    def shortfall(self) -> int:
        return self.requested - self.selected


def select_top_pairs(contact_map: np.ndarray, mask: np.ndarray, seq_range: str, count: int) -> np.ndarray:
    """Indices (n×2) of the ``count`` most confident eligible pairs i<j.

    Ties are broken by (i, j) in lexicographic order.
    """
    lo, hi = RANGES[seq_range]
    L = contact_map.shape[0]
    i, j = np.triu_indices(L, k=1)
    sep = j - i
    ok = (sep >= lo) & np.asarray(mask, bool)[i, j]
    if hi is not None:
        ok &= sep <= hi
    i, j = i[ok], j[ok]
    p = contact_map[i, j]
    order = np.lexsort((j, i, -p))[:count]
    return np.stack([i[order], j[order]], axis=1)


def contact_accuracy_topk(contact_map, distance, mask, seq_range: str, k: int) -> TopKResult:
    if k not in TOP_K:
        raise ValueError(f"k must be one of {TOP_K}, got {k}")
    if seq_range not in RANGES:
        raise ValueError(f"range must be one of {sorted(RANGES)}, got {seq_range!r}")
    contact_map = np.asarray(contact_map, dtype=float)
    requested = contact_map.shape[0] // k
    pairs = select_top_pairs(contact_map, mask, seq_range, requested)
    if len(pairs) == 0:
        return TopKResult(None, 0, requested)
    hits = np.asarray(distance)[pairs[:, 0], pairs[:, 1]] < CONTACT_CUTOFF
    return TopKResult(float(hits.mean()), len(pairs), requested)


def wrapped_difference(pred, true) -> np.ndarray:
    d = np.abs(np.asarray(pred, float) - np.asarray(true, float)) % 360.0
    return np.minimum(d, 360.0 - d)


def angle_mae(pred, true, mask=None) -> float | None:
    """Mean wrapped absolute difference in degrees; None if nothing is unmasked."""
    pred = np.asarray(pred, dtype=float)
    true = np.asarray(true, dtype=float)
    mask = np.ones(pred.shape, bool) if mask is None else np.asarray(mask, bool)
    if not mask.any():
        return None
    return float(wrapped_difference(pred[mask], true[mask]).mean())


def contact_pair_accuracy(contact_map, distance, mask, threshold: float = 0.5) -> float | None:
    """Fraction of unmasked pairs i<j whose thresholded prediction matches the true contact."""
    L = np.asarray(contact_map).shape[0]
    i, j = np.triu_indices(L, k=1)
    ok = np.asarray(mask, bool)[i, j]
    if not ok.any():
        return None
    pred = np.asarray(contact_map)[i, j][ok] >= threshold
    truth = np.asarray(distance)[i, j][ok] < CONTACT_CUTOFF
    return float((pred == truth).mean())
