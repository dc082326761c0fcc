"""Desk-scale adversarial training laboratory.

Dense classifiers on a minimal autodiff core, single- and multi-step
input attacks, batch-in-batch training-batch generation with stratified
joint initializers and sample selection, plus the diagnostics to measure
all of it.
"""

from .attacks import AttackKind, AttackSpec, n_fgsm, pgd_attack, project_linf
from .data import Dataset, batch_iter, emit_metrics, gen_gaussian_blobs, load_idx_dataset
from .framework import (
    AdvGrid,
    SelectedBatch,
    SelectKind,
    SelectSpec,
    bb_generate,
    select_bg,
    select_cp,
    select_gs,
)
from .metrics import (
    accuracy_adversarial,
    accuracy_clean,
    attack_success_rate,
    confidence_uniform_ce,
    loss_landscape_grid,
    loss_std_diversity,
)
from .models import Model, classify, load_model, loss_and_input_grad, mlp_init, save_model
from .noise import (
    NoiseKind,
    NoiseSpec,
    min_pairwise_distance,
    sign_normal_noise,
    tile_design,
    tlhs_design,
    uniform_noise,
)
from .tensor import Tensor
from .trainer import TrainConfig, detect_co, lr_at_epoch, sgd_step, train_run

__version__ = "0.1.0"
