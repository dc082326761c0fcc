"""Initial-perturbation generators and the space-filling distance metric.

Three generators cover the NOISE slot of the batch-in-batch pipeline:

  * ``uniform_noise``: i.i.d. entries on the half-open box [-r, r).
  * ``sign_normal_noise``: entries are +-step, the sign of a normal draw.
  * ``tlhs_design`` + ``tile_design``: a stratified hypercube design drawn
    once per batch and shared by every original sample.  Per column the m
    rows occupy the m distinct strata of [-r, r), so joint perturbations of
    the m duplicates spread out instead of clustering.

All generators are pure functions of their arguments plus a seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "NoiseKind",
    "NoiseSpec",
    "uniform_noise",
    "sign_normal_noise",
    "tlhs_design",
    "tile_design",
    "initial_perturbation",
    "min_pairwise_distance",
]


class NoiseKind(str, Enum):
    UNIFORM = "uniform"
    SIGN_NORMAL = "sign_normal"
    TLHS = "tlhs"


@dataclass(frozen=True)
class NoiseSpec:
    """Configuration for one NOISE invocation.

    ``radius`` is the half-width of the initialization box (k*epsilon for
    the unclipped single-step attack, epsilon otherwise).  ``m`` is the
    duplication count the design is built for.
    """

    kind: NoiseKind
    radius: float
    m: int = 1
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", NoiseKind(self.kind))
        if self.radius <= 0:
            raise ValueError(f"NoiseSpec: radius must be positive, got {self.radius}")
        if self.m < 1:
            raise ValueError(f"NoiseSpec: m must be >= 1, got {self.m}")


def uniform_noise(rows: int, d: int, radius: float, seed: int) -> np.ndarray:
    """i.i.d. uniform entries on [-radius, radius), deterministic per seed."""
    if radius <= 0:
        raise ValueError(f"uniform_noise: radius must be positive, got {radius}")
    if rows < 1 or d < 1:
        raise ValueError(f"uniform_noise: rows and d must be >= 1, got {rows}x{d}")
    rng = np.random.default_rng(seed)
    return rng.uniform(-radius, radius, size=(rows, d))


def sign_normal_noise(rows: int, d: int, step: float, seed: int) -> np.ndarray:
    """Entries exactly +-step, signed by a standard normal draw.

    A zero draw (measure zero, but possible in floating point) maps to
    +step so the output never leaves {-step, +step}.
    """
    if step <= 0:
        raise ValueError(f"sign_normal_noise: step must be positive, got {step}")
    if rows < 1 or d < 1:
        raise ValueError(f"sign_normal_noise: rows and d must be >= 1, got {rows}x{d}")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(size=(rows, d))
    return np.where(z >= 0.0, step, -step)


def tlhs_design(m: int, d: int, radius: float, seed: int) -> np.ndarray:
    """Stratified m x d design on [-radius, radius).

    Per column: the stratum offsets (0, 1/m, ..., (m-1)/m) are randomly
    permuted, jittered by i.i.d. uniform [0, 1/m), and affinely cast onto
    [-radius, radius).  Every column therefore hits each of the m strata
    exactly once.  The result is ``radius * base`` with ``base`` independent
    of radius, so scaling the radius rescales the design linearly.
    """
    if m < 1:
        raise ValueError(f"tlhs_design: m must be >= 1, got {m}")
    if d < 1:
        raise ValueError(f"tlhs_design: d must be >= 1, got {d}")
    if radius <= 0:
        raise ValueError(f"tlhs_design: radius must be positive, got {radius}")
    rng = np.random.default_rng(seed)
    # argsort of i.i.d. uniforms = independent uniform permutation per column
    strata = np.argsort(rng.random(size=(m, d)), axis=0)
    jitter = rng.uniform(0.0, 1.0 / m, size=(m, d))
    base = 2.0 * (strata / m + jitter) - 1.0
    return radius * base


def tile_design(design: np.ndarray, n: int, batch_shape: tuple[int, ...] | None = None) -> np.ndarray:
    """Tile an m x d design over n originals: row j*n+i equals design row j.

    Duplicate-block j of the enlarged batch (rows j*n .. j*n+n-1) receives
    design row j for every original sample.  ``batch_shape``, when given,
    must hold exactly m*n*d elements and is applied as the output layout.
    """
    design = np.asarray(design, dtype=np.float64)
    if design.ndim != 2:
        raise ValueError(f"tile_design: design must be 2-D, got shape {design.shape}")
    if n < 1:
        raise ValueError(f"tile_design: n must be >= 1, got {n}")
    m, d = design.shape
    out = np.repeat(design, n, axis=0)
    if batch_shape is not None:
        if int(np.prod(batch_shape)) != m * n * d:
            raise ValueError(
                f"tile_design: layout {batch_shape} incompatible with m*n*d = {m * n * d}"
            )
        out = out.reshape(batch_shape)
    return out


def initial_perturbation(spec: NoiseSpec, n: int, d: int) -> np.ndarray:
    """(m*n) x d initial perturbation for an m-duplicated batch of n samples."""
    if spec.kind is NoiseKind.UNIFORM:
        return uniform_noise(spec.m * n, d, spec.radius, spec.seed)
    if spec.kind is NoiseKind.SIGN_NORMAL:
        return sign_normal_noise(spec.m * n, d, spec.radius, spec.seed)
    design = tlhs_design(spec.m, d, spec.radius, spec.seed)
    return tile_design(design, n)


def min_pairwise_distance(samples: np.ndarray) -> float:
    """Minimum euclidean distance over all pairs of rows."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 2 or samples.shape[0] < 2:
        raise ValueError(
            f"min_pairwise_distance: need a 2-D array with >= 2 rows, got shape {samples.shape}"
        )
    diff = samples[:, None, :] - samples[None, :, :]
    sq = np.einsum("ijk,ijk->ij", diff, diff)
    iu = np.triu_indices(samples.shape[0], k=1)
    return float(np.sqrt(sq[iu].min()))
