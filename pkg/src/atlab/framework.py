"""Batch-in-batch generation: duplicate, jointly initialize, attack, select.

``bb_generate`` runs the whole pipeline for one training batch:

    B_bgn  = m stacked copies of the original batch (copy 0 first)
    delta0 = NOISE(m, n, d)           joint design for all copies
    B_adv  = ATTACK(B_bgn + delta0)
    B_f    = SELECT(B_adv [, B_ori])  one of: pass-through, closest
             misclassified per row, all misclassified, or all misclassified
             among clean + adversarial

Selected samples keep their provenance (original index, duplicate index, or
-1 for a clean original) so any sample can be traced back to the grid.
An empty selection is returned as an explicit empty batch; the trainer
skips the update for it.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .attacks import AttackKind, AttackSpec, run_attack
from .models import Model, classify
from .noise import NoiseSpec, initial_perturbation

__all__ = [
    "SelectKind",
    "SelectSpec",
    "AdvGrid",
    "SelectedBatch",
    "validate_bb_config",
    "bb_generate",
    "select_none",
    "select_cp",
    "select_gs",
    "select_bg",
]

CLEAN_DUPLICATE = -1  # duplicate index marking a selected clean original


class SelectKind(str, Enum):
    NONE = "none"
    CP = "cp"
    GS = "gs"
    BG = "bg"


@dataclass(frozen=True)
class SelectSpec:
    kind: SelectKind = SelectKind.NONE

    def __post_init__(self):
        object.__setattr__(self, "kind", SelectKind(self.kind))


@dataclass
class AdvGrid:
    """n x m grid of adversarial samples with cached l-infinity distances.

    ``adv[j, i]`` is duplicate j of original i.  ``linf_dist[j, i]`` caches
    ``max|adv[j, i] - originals[i]|`` and must agree with a recompute.
    """

    originals: np.ndarray      # (n, d)
    labels: np.ndarray         # (n,)
    adv: np.ndarray            # (m, n, d)
    linf_dist: np.ndarray      # (m, n)

    @classmethod
    def build(cls, originals: np.ndarray, labels: np.ndarray, adv_batch: np.ndarray,
              m: int) -> "AdvGrid":
        n, d = originals.shape
        adv = adv_batch.reshape(m, n, d)
        dist = np.max(np.abs(adv - originals[None, :, :]), axis=2)
        return cls(originals, labels, adv, dist)

    @property
    def n(self) -> int:
        return self.originals.shape[0]

    @property
    def m(self) -> int:
        return self.adv.shape[0]

    def recompute_distances(self) -> np.ndarray:
        return np.max(np.abs(self.adv - self.originals[None, :, :]), axis=2)

    def as_batch(self) -> np.ndarray:
        """Adversarial grid in batch layout: row j*n+i is duplicate j of i."""
        m, n, d = self.adv.shape
        return self.adv.reshape(m * n, d)


@dataclass
class SelectedBatch:
    """Final training batch with per-sample provenance."""

    x: np.ndarray                # (k, d)
    y: np.ndarray                # (k,)
    origin_index: np.ndarray     # (k,) original-sample index i
    duplicate_index: np.ndarray  # (k,) duplicate j, or CLEAN_DUPLICATE

    @classmethod
    def empty(cls, d: int) -> "SelectedBatch":
        return cls(np.empty((0, d)), np.empty(0, dtype=np.intp),
                   np.empty(0, dtype=np.intp), np.empty(0, dtype=np.intp))

    @property
    def size(self) -> int:
        return self.x.shape[0]

    @property
    def is_empty(self) -> bool:
        return self.size == 0

    @property
    def clean_count(self) -> int:
        return int(np.sum(self.duplicate_index == CLEAN_DUPLICATE))


def validate_bb_config(m: int, noise: NoiseSpec, attack: AttackSpec) -> None:
    """Reject inconsistent pipeline settings before any work happens.

    The initializer radius must be k*epsilon for the unclipped single-step
    attack and must not exceed epsilon for PGD (its precondition).
    """
    if m < 1:
        raise ValueError(f"bb_generate: m must be >= 1, got {m}")
    if noise.m != m:
        raise ValueError(f"bb_generate: NoiseSpec.m = {noise.m} does not match m = {m}")
    if attack.kind is AttackKind.NFGSM:
        want = attack.k * attack.epsilon
        if abs(noise.radius - want) > 1e-12 * max(want, 1.0):
            raise ValueError(
                f"bb_generate: noise radius {noise.radius} != k*epsilon = {want} "
                "required by the single-step attack"
            )
    else:
        if noise.radius > attack.epsilon * (1.0 + 1e-12):
            raise ValueError(
                f"bb_generate: noise radius {noise.radius} exceeds the PGD ball "
                f"epsilon = {attack.epsilon}"
            )


def bb_generate(x: np.ndarray, y: np.ndarray, model: Model, m: int, noise: NoiseSpec,
                attack: AttackSpec, select: SelectSpec) -> tuple[SelectedBatch, AdvGrid]:
    """Run the duplicate/initialize/attack/select pipeline for one batch."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y)
    validate_bb_config(m, noise, attack)
    n, d = x.shape

    x_bgn = np.tile(x, (m, 1))
    y_bgn = np.tile(y, m)
    delta0 = initial_perturbation(noise, n, d)
    adv = run_attack(model, attack, x_bgn + delta0, x_bgn, y_bgn)
    grid = AdvGrid.build(x, y, adv, m)

    if select.kind is SelectKind.NONE:
        batch = select_none(grid)
    elif select.kind is SelectKind.CP:
        batch = select_cp(grid, model)
    elif select.kind is SelectKind.GS:
        batch = select_gs(grid, model)
    else:
        batch = select_bg(grid, x, model)
    return batch, grid


def select_none(grid: AdvGrid) -> SelectedBatch:
    """Pass-through: the whole adversarial batch in its batch layout."""
    m, n = grid.m, grid.n
    dup, orig = np.divmod(np.arange(m * n), n)
    return SelectedBatch(grid.as_batch(), np.tile(grid.labels, m), orig, dup)


def select_cp(grid: AdvGrid, model) -> SelectedBatch:
    """Closest misclassified duplicate per row, exactly one sample per row.

    When every duplicate of a row is classified correctly, the duplicate
    with the largest l-infinity distance is taken instead.  Ties break
    toward the lowest duplicate index.
    """
    m, n = grid.m, grid.n
    pred = classify(model, grid.as_batch()).reshape(m, n)
    mis = pred != grid.labels[None, :]
    picks = np.empty(n, dtype=np.intp)
    for i in range(n):
        hit = np.nonzero(mis[:, i])[0]
        if hit.size:
            picks[i] = hit[np.argmin(grid.linf_dist[hit, i])]
        else:
            picks[i] = int(np.argmax(grid.linf_dist[:, i]))
    rows = np.arange(n)
    return SelectedBatch(grid.adv[picks, rows], grid.labels.copy(), rows, picks)


def select_gs(grid: AdvGrid, model) -> SelectedBatch:
    """All misclassified adversarial samples, in row-major grid order (i, then j)."""
    m, n = grid.m, grid.n
    pred = classify(model, grid.as_batch()).reshape(m, n)
    mis = pred != grid.labels[None, :]
    orig, dup = np.nonzero(mis.T)  # sorted by original index, then duplicate
    if orig.size == 0:
        return SelectedBatch.empty(grid.originals.shape[1])
    return SelectedBatch(grid.adv[dup, orig], grid.labels[orig], orig, dup)


def select_bg(grid: AdvGrid, originals: np.ndarray, model) -> SelectedBatch:
    """Greedy selection over clean originals and adversarials together.

    Misclassified clean originals come first (by sample index), then the
    misclassified adversarials in grid order.
    """
    clean_pred = classify(model, originals)
    clean_idx = np.nonzero(clean_pred != grid.labels)[0]
    adv_part = select_gs(grid, model)
    if clean_idx.size == 0:
        return adv_part
    clean = SelectedBatch(
        originals[clean_idx],
        grid.labels[clean_idx],
        clean_idx.astype(np.intp),
        np.full(clean_idx.size, CLEAN_DUPLICATE, dtype=np.intp),
    )
    if adv_part.is_empty:
        return clean
    return SelectedBatch(
        np.concatenate([clean.x, adv_part.x]),
        np.concatenate([clean.y, adv_part.y]),
        np.concatenate([clean.origin_index, adv_part.origin_index]),
        np.concatenate([clean.duplicate_index, adv_part.duplicate_index]),
    )
