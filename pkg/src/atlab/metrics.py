"""Evaluation diagnostics: accuracies, attack success, confidence, landscapes.

All functions are pure in (model snapshot, dataset, seed).  Attack-based
metrics draw their initializers from seeds derived off the caller's seed so
repeated evaluation is reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attacks import AttackSpec, pgd_attack, run_attack
from .data import Dataset
from .models import Model, classify, loss_and_input_grad
from .noise import NoiseKind, sign_normal_noise, tlhs_design, uniform_noise
from .seeding import derive_seed
from .tensor import Tensor

__all__ = [
    "accuracy_clean",
    "accuracy_adversarial",
    "attack_success_rate",
    "success_rate_gap",
    "confidence_uniform_ce",
    "uniform_ce_from_probs",
    "predict_probs",
    "per_sample_loss",
    "LandscapeGrid",
    "loss_landscape_grid",
    "loss_std_diversity",
]

PROB_FLOOR = 1e-12


def accuracy_clean(model: Model, dataset: Dataset) -> float:
    if len(dataset) == 0:
        raise ValueError("accuracy_clean: dataset is empty")
    pred = classify(model, dataset.features)
    return float(np.mean(pred == dataset.labels))


def accuracy_adversarial(model: Model, dataset: Dataset, epsilon: float, steps: int = 50,
                         alpha: float | None = None, seed: int = 0,
                         init: str = "uniform") -> float:
    """Accuracy under a PGD attack with a uniform epsilon-ball initializer.

    ``init="zero"`` starts from the clean point instead; in that mode the
    attack can only remove correctness, so the result is bounded above by
    clean accuracy on the same set.
    """
    if len(dataset) == 0:
        raise ValueError("accuracy_adversarial: dataset is empty")
    if epsilon <= 0:
        raise ValueError(f"accuracy_adversarial: epsilon must be positive, got {epsilon}")
    x, y = dataset.features, dataset.labels
    if init == "uniform":
        delta0 = uniform_noise(len(dataset), dataset.dim, epsilon, derive_seed(seed, "evalatk"))
    elif init == "zero":
        delta0 = np.zeros_like(x)
    else:
        raise ValueError(f"accuracy_adversarial: unknown init {init!r}")
    step = alpha if alpha is not None else epsilon / 4.0
    adv = pgd_attack(model, x + delta0, x, y, epsilon, step, steps)
    return float(np.mean(classify(model, adv) == y))


def attack_success_rate(model: Model, dataset: Dataset, attack: AttackSpec,
                        seed: int = 0) -> float:
    """Fraction of samples misclassified after the attack.

    The initializer is uniform at the attack's expected radius (k*epsilon
    for the unclipped single-step attack, epsilon for PGD).
    """
    if len(dataset) == 0:
        raise ValueError("attack_success_rate: dataset is empty")
    x, y = dataset.features, dataset.labels
    delta0 = uniform_noise(len(dataset), dataset.dim, attack.init_radius,
                           derive_seed(seed, "evalatk"))
    adv = run_attack(model, attack, x + delta0, x, y)
    return float(np.mean(classify(model, adv) != y))


def success_rate_gap(records) -> list[tuple[int, float]]:
    """Per-epoch (epoch, sr_multi - sr_single) from trainer epoch records."""
    out = []
    for rec in records:
        if rec.get("sr_multi") is None or rec.get("sr_single") is None:
            continue
        out.append((rec["epoch"], rec["sr_multi"] - rec["sr_single"]))
    return out


def predict_probs(model: Model, x: np.ndarray) -> np.ndarray:
    """Softmax probabilities, log-sum-exp stabilized."""
    z = model.logits(Tensor._from_array(np.asarray(x, dtype=np.float64))).data
    shifted = z - z.max(axis=1, keepdims=True)
    ez = np.exp(shifted)
    return ez / ez.sum(axis=1, keepdims=True)


def uniform_ce_from_probs(probs: np.ndarray) -> float:
    """Mean over samples of -(1/C) * sum_c log p_c, probabilities floored.

    Minimized (value ln C) exactly by the uniform prediction; larger for
    any assertive predictor.
    """
    probs = np.maximum(np.asarray(probs, dtype=np.float64), PROB_FLOOR)
    c = probs.shape[1]
    return float(np.mean(-np.log(probs).sum(axis=1) / c))


def confidence_uniform_ce(model: Model, dataset: Dataset) -> float:
    """Cross-entropy of the predicted distribution against uniform."""
    if len(dataset) == 0:
        raise ValueError("confidence_uniform_ce: dataset is empty")
    return uniform_ce_from_probs(predict_probs(model, dataset.features))


def per_sample_loss(model: Model, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Per-sample softmax cross-entropy (no reduction, no gradients)."""
    z = model.logits(Tensor._from_array(np.asarray(x, dtype=np.float64))).data
    zmax = z.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z - zmax).sum(axis=1)) + zmax[:, 0]
    idx = np.asarray(y).astype(np.intp)
    return lse - z[np.arange(z.shape[0]), idx]


@dataclass
class LandscapeGrid:
    """Loss surface probe around one sample.

    ``losses[a, b]`` is the loss at ``x + ts[a] * r_grad + ts[b] * r_rand``.
    ``degenerate`` flags a zero input gradient at the probe point (the
    gradient direction is then the zero vector).
    """

    ts: np.ndarray        # (resolution,)
    losses: np.ndarray    # (resolution, resolution)
    std: float
    r_grad: np.ndarray    # (d,) sign of the input gradient at x
    r_rand: np.ndarray    # (d,) +-1 random direction
    degenerate: bool

    @property
    def center_loss(self) -> float:
        mid = len(self.ts) // 2
        return float(self.losses[mid, mid])


def loss_landscape_grid(model: Model, x: np.ndarray, y: int, half_width: float = 0.1,
                        resolution: int = 21, seed: int = 0) -> LandscapeGrid:
    """Probe the loss on a 2-D slice spanned by the gradient-sign direction
    and a random +-1 direction, over [-half_width, half_width]^2."""
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    y_arr = np.asarray([int(y)])
    if resolution < 2:
        raise ValueError(f"loss_landscape_grid: resolution must be >= 2, got {resolution}")
    _, grad = loss_and_input_grad(model, x, y_arr)
    r_grad = np.sign(grad[0])
    degenerate = not np.any(r_grad)
    rng = np.random.default_rng(derive_seed(seed, "landscape"))
    r_rand = rng.integers(0, 2, size=x.shape[1]).astype(np.float64) * 2.0 - 1.0

    ts = np.linspace(-half_width, half_width, resolution)
    ts[np.abs(ts) < 1e-15] = 0.0  # keep the center exactly on the sample
    t1, t2 = np.meshgrid(ts, ts, indexing="ij")
    points = (x[0][None, :]
              + t1.reshape(-1, 1) * r_grad[None, :]
              + t2.reshape(-1, 1) * r_rand[None, :])
    losses = per_sample_loss(model, points, np.full(points.shape[0], int(y))).reshape(
        resolution, resolution
    )
    # a flat grid must report exactly zero spread; np.std of identical values
    # picks up summation rounding otherwise
    std = 0.0 if np.ptp(losses) == 0.0 else float(losses.std())
    return LandscapeGrid(ts, losses, std, r_grad, r_rand, degenerate)


def loss_std_diversity(model: Model, dataset: Dataset, attack: AttackSpec,
                       noise_kind: NoiseKind, reps: int = 4, seed: int = 0) -> float:
    """Mean per-sample standard deviation of losses over repeated attacks.

    Each sample is attacked ``reps`` times with independent initializations
    of the given kind; the stratified kind designs the reps jointly (one
    row per repetition, shared across samples).
    """
    if reps < 2:
        raise ValueError(f"loss_std_diversity: reps must be >= 2, got {reps}")
    if len(dataset) == 0:
        raise ValueError("loss_std_diversity: dataset is empty")
    noise_kind = NoiseKind(noise_kind)
    x, y = dataset.features, dataset.labels
    n, d = x.shape
    radius = attack.init_radius
    losses = np.empty((reps, n))
    if noise_kind is NoiseKind.TLHS:
        design = tlhs_design(reps, d, radius, derive_seed(seed, "diversity"))
    for r in range(reps):
        if noise_kind is NoiseKind.UNIFORM:
            delta0 = uniform_noise(n, d, radius, derive_seed(seed, "diversity", r))
        elif noise_kind is NoiseKind.SIGN_NORMAL:
            delta0 = sign_normal_noise(n, d, radius, derive_seed(seed, "diversity", r))
        else:
            delta0 = np.tile(design[r], (n, 1))
        adv = run_attack(model, attack, x + delta0, x, y)
        losses[r] = per_sample_loss(model, adv, y)
    return float(np.mean(losses.std(axis=0)))
