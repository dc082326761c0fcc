"""SGD training loop with batch-in-batch generation and per-epoch diagnostics.

Each step: generate the training batch via the duplicate/attack/select
pipeline, skip the update entirely when the selection comes back empty,
otherwise backprop and apply momentum SGD.  Each epoch: evaluate clean and
multi-step adversarial accuracy, single/multi-step attack success rates,
and prediction confidence on a fixed test subsample, and keep the
checkpoint with the best adversarial accuracy.

All randomness (shuffling, initializers, evaluation attacks) is derived
from the root seed by labeled paths, so runs are bit-reproducible except
for wall-clock timing columns.
"""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .attacks import AttackKind, AttackSpec
from .data import Dataset, batch_iter, subsample
from .framework import SelectSpec, bb_generate, validate_bb_config
from .metrics import (
    accuracy_adversarial,
    accuracy_clean,
    attack_success_rate,
    confidence_uniform_ce,
)
from .models import Model, loss_and_param_grads, mlp_init
from .noise import NoiseSpec
from .seeding import derive_seed
from .tensor import Tensor

__all__ = [
    "TrainConfig",
    "OptState",
    "TrainResult",
    "lr_at_epoch",
    "sgd_step",
    "train_run",
    "detect_co",
    "timing_report",
]

METRIC_COLUMNS = [
    "config_hash", "epoch", "step", "lr", "batch_selected",
    "clean_acc", "adv_acc_pgd50", "sr_single", "sr_multi", "conf_ce", "step_ms",
    "strategy", "n", "m", "selected_count", "selected_clean_count", "loss",
]


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for one training run.

    Defaults follow the standard recipe for this setup: momentum SGD at
    lr 0.01 with weight decay 5e-4, decayed by 0.1 at epochs 28 and 56.
    """

    noise: NoiseSpec
    attack: AttackSpec
    select: SelectSpec = field(default_factory=SelectSpec)
    m: int = 1
    epochs: int = 75
    lr0: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 5e-4
    decay_epochs: tuple[int, ...] = (28, 56)
    decay_factor: float = 0.1
    batch_size: int = 128
    seed: int = 0
    hidden_dims: tuple[int, ...] = (64, 64)
    eval_subsample: int = 512
    eval_steps: int = 50

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"TrainConfig: epochs must be >= 1, got {self.epochs}")
        if self.lr0 <= 0:
            raise ValueError(f"TrainConfig: lr0 must be positive, got {self.lr0}")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError(f"TrainConfig: momentum must be in [0, 1), got {self.momentum}")
        if self.weight_decay < 0:
            raise ValueError(f"TrainConfig: weight_decay must be >= 0, got {self.weight_decay}")
        if self.batch_size < 1:
            raise ValueError(f"TrainConfig: batch_size must be >= 1, got {self.batch_size}")
        if self.m < 1:
            raise ValueError(f"TrainConfig: m must be >= 1, got {self.m}")


class OptState:
    """Momentum buffers, one per parameter, zero-initialized."""

    def __init__(self, model: Model):
        self.velocity = [np.zeros_like(p.data) for p in model.parameters()]


def lr_at_epoch(config: TrainConfig, epoch: int) -> float:
    """lr0 scaled by decay_factor once per decay epoch already reached."""
    if not 0 <= epoch < config.epochs:
        raise ValueError(f"lr_at_epoch: epoch {epoch} outside [0, {config.epochs})")
    n_decays = sum(1 for e in config.decay_epochs if e <= epoch)
    return config.lr0 * config.decay_factor ** n_decays


def sgd_step(model: Model, grads: list[np.ndarray], state: OptState, lr: float,
             momentum: float, weight_decay: float) -> None:
    """Classical momentum update with decay folded into the gradient:
    g' = g + wd * theta;  v <- mu * v + g';  theta <- theta - lr * v."""
    params = model.parameters()
    if len(grads) != len(params):
        raise ValueError(f"sgd_step: {len(grads)} grads for {len(params)} parameters")
    new_params = []
    for i, (p, g) in enumerate(zip(params, grads)):
        if g.shape != p.data.shape:
            raise ValueError(
                f"sgd_step: grad shape {g.shape} does not match parameter {p.data.shape}"
            )
        g_eff = g + weight_decay * p.data
        v = momentum * state.velocity[i] + g_eff
        state.velocity[i] = v
        new_params.append(Tensor(p.data - lr * v, requires_grad=True))
    for i in range(len(model.weights)):
        model.weights[i] = new_params[2 * i]
        model.biases[i] = new_params[2 * i + 1]


@dataclass
class TrainResult:
    model: Model                 # best checkpoint by adversarial accuracy
    final_model: Model
    best_epoch: int
    best_clean_acc: float
    best_adv_acc: float
    records: list[dict]
    adv_history: list[float]
    co_flagged: bool
    co_epoch: int | None
    total_steps: int
    skipped_steps: int
    epoch_skips: list[int]
    epoch_steps: list[int]
    mean_step_ms: float | None
    config_hash: str


def _default_hash(config: TrainConfig) -> str:
    return hashlib.sha256(repr(config).encode("utf-8")).hexdigest()


def _record(config_hash: str, **kw) -> dict:
    rec = {k: None for k in METRIC_COLUMNS}
    rec["config_hash"] = config_hash
    rec.update(kw)
    return rec


def train_run(config: TrainConfig, train_set: Dataset, test_set: Dataset,
              config_hash: str | None = None, model: Model | None = None) -> TrainResult:
    """Train a dense classifier under the configured pipeline.

    Returns the best checkpoint (by test-subsample adversarial accuracy),
    the full metrics log, and bookkeeping about skipped steps and timing.
    """
    validate_bb_config(config.m, replace(config.noise, m=config.m), config.attack)
    if train_set.dim != test_set.dim:
        raise ValueError(
            f"train_run: train dim {train_set.dim} != test dim {test_set.dim}"
        )
    n_classes = max(train_set.n_classes, test_set.n_classes)
    if model is None:
        dims = [train_set.dim, *config.hidden_dims, n_classes]
        model = mlp_init(dims, derive_seed(config.seed, "init"))
    if model.input_dim != train_set.dim:
        raise ValueError(
            f"train_run: model input dim {model.input_dim} != dataset dim {train_set.dim}"
        )
    if model.n_classes < n_classes:
        raise ValueError(
            f"train_run: model has {model.n_classes} outputs, datasets need {n_classes}"
        )

    chash = config_hash or _default_hash(config)
    state = OptState(model)
    eval_ds = subsample(test_set, config.eval_subsample, derive_seed(config.seed, "evalset"))
    eps = config.attack.epsilon
    sr_single_spec = AttackSpec(AttackKind.NFGSM, eps, k=config.attack.k)
    sr_multi_spec = AttackSpec(AttackKind.PGD, eps, steps=10)

    records: list[dict] = []
    adv_history: list[float] = []
    step_times: list[float] = []
    epoch_skips: list[int] = []
    epoch_steps: list[int] = []
    best = (-1.0, -1, None, -1.0)  # adv_acc, epoch, model copy, clean_acc
    total_steps = skipped = 0

    for epoch in range(config.epochs):
        lr = lr_at_epoch(config, epoch)
        n_steps = n_skips = 0
        for step, (bx, by) in enumerate(
            batch_iter(train_set, config.batch_size, derive_seed(config.seed, "shuffle", epoch))
        ):
            t0 = time.perf_counter()
            noise = replace(config.noise, m=config.m,
                            seed=derive_seed(config.seed, "noise", epoch, step))
            selected, _ = bb_generate(bx, by, model, config.m, noise,
                                      config.attack, config.select)
            total_steps += 1
            n_steps += 1
            base = dict(
                epoch=epoch, step=step, lr=lr,
                strategy=config.select.kind.value, n=bx.shape[0], m=config.m,
                selected_count=selected.size, batch_selected=selected.size,
                selected_clean_count=selected.clean_count,
            )
            if selected.is_empty:
                skipped += 1
                n_skips += 1
                records.append(_record(chash, **base))
                continue
            loss, grads = loss_and_param_grads(model, selected.x, selected.y)
            sgd_step(model, grads, state, lr, config.momentum, config.weight_decay)
            ms = (time.perf_counter() - t0) * 1000.0
            step_times.append(ms)
            records.append(_record(chash, loss=loss, step_ms=ms, **base))

        epoch_steps.append(n_steps)
        epoch_skips.append(n_skips)

        clean = accuracy_clean(model, eval_ds)
        adv = accuracy_adversarial(model, eval_ds, eps, steps=config.eval_steps,
                                   seed=derive_seed(config.seed, "evalatk", epoch, 0))
        sr_single = attack_success_rate(model, eval_ds, sr_single_spec,
                                        seed=derive_seed(config.seed, "evalatk", epoch, 1))
        sr_multi = attack_success_rate(model, eval_ds, sr_multi_spec,
                                       seed=derive_seed(config.seed, "evalatk", epoch, 2))
        conf = confidence_uniform_ce(model, eval_ds)
        epoch_ms = [r["step_ms"] for r in records
                    if r["epoch"] == epoch and r["step_ms"] is not None]
        records.append(_record(
            chash, epoch=epoch, lr=lr, clean_acc=clean, adv_acc_pgd50=adv,
            sr_single=sr_single, sr_multi=sr_multi, conf_ce=conf,
            step_ms=float(np.mean(epoch_ms)) if epoch_ms else None,
        ))
        adv_history.append(adv)
        if adv > best[0]:
            best = (adv, epoch, model.copy(), clean)

    co_flagged, co_epoch = detect_co(adv_history)
    best_adv, best_epoch, best_model, best_clean = best
    return TrainResult(
        model=best_model if best_model is not None else model.copy(),
        final_model=model,
        best_epoch=best_epoch,
        best_clean_acc=best_clean,
        best_adv_acc=best_adv,
        records=records,
        adv_history=adv_history,
        co_flagged=co_flagged,
        co_epoch=co_epoch,
        total_steps=total_steps,
        skipped_steps=skipped,
        epoch_skips=epoch_skips,
        epoch_steps=epoch_steps,
        mean_step_ms=float(np.mean(step_times)) if step_times else None,
        config_hash=chash,
    )


def detect_co(history, floor: float = 0.01, peak: float = 0.10) -> tuple[bool, int | None]:
    """Flag catastrophic overfitting in a multi-step adversarial-accuracy history.

    Returns (flagged, epoch) for the first entry below ``floor`` after some
    earlier entry exceeded ``peak``; a model that never got above ``peak``
    never learned, which is not the collapse pattern.
    """
    history = list(history)
    if not history:
        raise ValueError("detect_co: history is empty")
    seen_peak = False
    for i, value in enumerate(history):
        if seen_peak and value < floor:
            return True, i
        if value > peak:
            seen_peak = True
    return False, None


def timing_report(records: list[dict], baseline_records: list[dict]) -> dict:
    """Mean non-skipped step time against an m=1 baseline run.

    The duplication factor is read from the run's own step records; the
    claim of interest is ratio < m.
    """

    def mean_ms(recs):
        vals = [r["step_ms"] for r in recs if r.get("step") is not None
                and r.get("step_ms") is not None]
        if not vals:
            raise ValueError("timing_report: no timed steps in records")
        return float(np.mean(vals))

    def read_m(recs):
        ms = {r["m"] for r in recs if r.get("m") is not None}
        if len(ms) != 1:
            raise ValueError(f"timing_report: ambiguous duplication count {ms}")
        return ms.pop()

    run_ms = mean_ms(records)
    base_ms = mean_ms(baseline_records)
    m = read_m(records)
    return {
        "m": m,
        "mean_step_ms": run_ms,
        "baseline_mean_step_ms": base_ms,
        "ratio": run_ms / base_ms,
        "under_m_times": bool(run_ms < m * base_ms),
    }
