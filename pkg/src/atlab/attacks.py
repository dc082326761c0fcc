"""Adversarial example generation: single-step sign attack and PGD.

Both attacks take the already-initialized batch ``x_init = x_orig + delta0``
so the initializer stays injectable.  The single-step variant keeps the
unclipped convention: it adds ``epsilon * sign(grad)`` to the initialized
point and applies no projection back to the epsilon ball, so the total
perturbation may reach (k+1)*epsilon when the initializer used radius
k*epsilon.  PGD projects onto the ball after every step.

Gradients are evaluated at the perturbed point in both cases.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .models import Model, loss_and_input_grad
from .tensor import ShapeError

__all__ = [
    "AttackKind",
    "AttackSpec",
    "project_linf",
    "n_fgsm",
    "pgd_attack",
    "run_attack",
]


class AttackKind(str, Enum):
    NFGSM = "nfgsm"
    PGD = "pgd"


@dataclass(frozen=True)
class AttackSpec:
    """Attack configuration.

    ``epsilon`` is the attack radius in feature units.  ``k`` only matters
    for the single-step attack (initializer radius k*epsilon).  ``alpha``
    defaults to epsilon/4 when unset.  ``steps`` is the PGD iteration count.
    """

    kind: AttackKind
    epsilon: float
    k: float = 2.0
    alpha: float | None = None
    steps: int = 10
    clamp_input_domain: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", AttackKind(self.kind))
        if self.epsilon <= 0:
            raise ValueError(f"AttackSpec: epsilon must be positive, got {self.epsilon}")
        if self.k < 1:
            raise ValueError(f"AttackSpec: k must be >= 1, got {self.k}")
        if self.alpha is not None and self.alpha <= 0:
            raise ValueError(f"AttackSpec: alpha must be positive, got {self.alpha}")
        if self.steps < 1:
            raise ValueError(f"AttackSpec: steps must be >= 1, got {self.steps}")

    @property
    def step_length(self) -> float:
        return self.alpha if self.alpha is not None else self.epsilon / 4.0

    @property
    def init_radius(self) -> float:
        """Radius the initializer is expected to use for this attack."""
        if self.kind is AttackKind.NFGSM:
            return self.k * self.epsilon
        return self.epsilon


def project_linf(delta: np.ndarray, epsilon: float) -> np.ndarray:
    """Entrywise clip onto the l-infinity ball of radius epsilon.  Idempotent."""
    if epsilon <= 0:
        raise ValueError(f"project_linf: epsilon must be positive, got {epsilon}")
    return np.clip(delta, -epsilon, epsilon)


def _check_batch_shapes(op: str, x_init: np.ndarray, x_orig: np.ndarray, y: np.ndarray) -> None:
    if x_init.shape != x_orig.shape:
        raise ShapeError(f"{op}: x_init shape {x_init.shape} != x_orig shape {x_orig.shape}")
    if x_init.ndim != 2:
        raise ShapeError(f"{op}: batches must be 2-D, got {x_init.shape}")
    if y.shape != (x_init.shape[0],):
        raise ShapeError(f"{op}: labels shape {y.shape} does not match batch {x_init.shape}")


def n_fgsm(model: Model, x_init: np.ndarray, x_orig: np.ndarray, y: np.ndarray,
           epsilon: float, clamp_input_domain: bool = False) -> np.ndarray:
    """One sign-gradient step of length epsilon from the initialized point.

    No clipping and no ball projection: the returned perturbation relative
    to ``x_orig`` is ``delta0 + epsilon * sign(grad)``.
    """
    x_init = np.asarray(x_init, dtype=np.float64)
    x_orig = np.asarray(x_orig, dtype=np.float64)
    y = np.asarray(y)
    _check_batch_shapes("n_fgsm", x_init, x_orig, y)
    if epsilon <= 0:
        raise ValueError(f"n_fgsm: epsilon must be positive, got {epsilon}")
    _, grad = loss_and_input_grad(model, x_init, y)
    adv = x_init + epsilon * np.sign(grad)
    if clamp_input_domain:
        adv = np.clip(adv, 0.0, 1.0)
    return adv


def pgd_attack(model: Model, x_init: np.ndarray, x_orig: np.ndarray, y: np.ndarray,
               epsilon: float, alpha: float, steps: int,
               clamp_input_domain: bool = False) -> np.ndarray:
    """Iterated sign-gradient ascent with l-infinity projection.

    Requires the initializer inside the epsilon ball.  Maintains the
    invariant ``max|delta| <= epsilon`` after every iteration and returns
    ``x_orig + delta_final``.
    """
    x_init = np.asarray(x_init, dtype=np.float64)
    x_orig = np.asarray(x_orig, dtype=np.float64)
    y = np.asarray(y)
    _check_batch_shapes("pgd_attack", x_init, x_orig, y)
    if epsilon <= 0:
        raise ValueError(f"pgd_attack: epsilon must be positive, got {epsilon}")
    if alpha <= 0 or steps < 1:
        raise ValueError(f"pgd_attack: need alpha > 0 and steps >= 1, got {alpha}, {steps}")
    delta = x_init - x_orig
    worst = float(np.max(np.abs(delta))) if delta.size else 0.0
    if worst > epsilon:
        raise ValueError(
            f"pgd_attack: initializer outside the epsilon ball, max |delta0| = {worst} > {epsilon}"
        )
    for _ in range(steps):
        _, grad = loss_and_input_grad(model, x_orig + delta, y)
        delta = project_linf(delta + alpha * np.sign(grad), epsilon)
    adv = x_orig + delta
    if clamp_input_domain:
        adv = np.clip(adv, 0.0, 1.0)
    return adv


def run_attack(model: Model, spec: AttackSpec, x_init: np.ndarray, x_orig: np.ndarray,
               y: np.ndarray) -> np.ndarray:
    """Dispatch on the attack kind."""
    if spec.kind is AttackKind.NFGSM:
        return n_fgsm(model, x_init, x_orig, y, spec.epsilon, spec.clamp_input_domain)
    return pgd_attack(model, x_init, x_orig, y, spec.epsilon, spec.step_length,
                      spec.steps, spec.clamp_input_domain)
