"""Run configuration: strict JSON parsing, defaults, hashing, round-trips.

The config file is a single JSON object with sections ``dataset``,
``model``, ``train``, ``attack``, ``noise``, ``select``, ``eval`` plus
top-level ``seed`` and ``output_dir``.  Only ``dataset`` and
``attack.epsilon`` are required; every other field has the documented
default.  Unknown keys are rejected with their path so typos cannot
silently change a run.

The config hash is the sha256 of the fully resolved canonical JSON and is
embedded in every artifact a run produces.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace

from .attacks import AttackKind, AttackSpec
from .data import Dataset, gen_gaussian_blobs, load_idx_dataset
from .framework import SelectKind, SelectSpec, validate_bb_config
from .noise import NoiseKind, NoiseSpec
from .seeding import derive_seed
from .trainer import TrainConfig

__all__ = [
    "ConfigError",
    "DatasetSpec",
    "EvalSettings",
    "RunConfig",
    "parse_run_config",
    "parse_config_dict",
    "serialize_run_config",
    "config_hash",
]


class ConfigError(ValueError):
    """Configuration file problem; maps to exit code 1 in the CLI."""


@dataclass(frozen=True)
class DatasetSpec:
    kind: str = "blobs"
    classes: int = 3
    dim: int = 20
    n_per_class: int = 300
    test_n_per_class: int = 100
    spread: float = 0.1
    train_images: str | None = None
    train_labels: str | None = None
    test_images: str | None = None
    test_labels: str | None = None

    def __post_init__(self):
        if self.kind not in ("blobs", "idx"):
            raise ConfigError(f"dataset.kind must be 'blobs' or 'idx', got {self.kind!r}")
        if self.kind == "idx":
            missing = [k for k in ("train_images", "train_labels", "test_images", "test_labels")
                       if getattr(self, k) is None]
            if missing:
                raise ConfigError(f"dataset: idx datasets need {', '.join(missing)}")


@dataclass(frozen=True)
class EvalSettings:
    epsilons: tuple[float, ...] = ()
    steps: int = 50
    subsample: int = 512

    def __post_init__(self):
        if self.steps < 1:
            raise ConfigError(f"eval.steps must be >= 1, got {self.steps}")
        if self.subsample < 1:
            raise ConfigError(f"eval.subsample must be >= 1, got {self.subsample}")
        if any(e <= 0 for e in self.epsilons):
            raise ConfigError(f"eval.epsilons must be positive, got {self.epsilons}")


@dataclass(frozen=True)
class RunConfig:
    dataset: DatasetSpec
    attack: AttackSpec
    noise: NoiseSpec
    select: SelectSpec
    hidden_dims: tuple[int, ...]
    epochs: int
    lr0: float
    momentum: float
    weight_decay: float
    decay_epochs: tuple[int, ...]
    decay_factor: float
    batch_size: int
    m: int
    eval: EvalSettings
    seed: int = 0
    output_dir: str = "runs/out"

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            noise=self.noise,
            attack=self.attack,
            select=self.select,
            m=self.m,
            epochs=self.epochs,
            lr0=self.lr0,
            momentum=self.momentum,
            weight_decay=self.weight_decay,
            decay_epochs=self.decay_epochs,
            decay_factor=self.decay_factor,
            batch_size=self.batch_size,
            seed=self.seed,
            hidden_dims=self.hidden_dims,
            eval_subsample=self.eval.subsample,
            eval_steps=self.eval.steps,
        )

    def build_datasets(self) -> tuple[Dataset, Dataset]:
        ds = self.dataset
        if ds.kind == "blobs":
            train = gen_gaussian_blobs(ds.classes, ds.dim, ds.n_per_class, ds.spread,
                                       derive_seed(self.seed, "data", "train"), name="blobs-train")
            test = gen_gaussian_blobs(ds.classes, ds.dim, ds.test_n_per_class, ds.spread,
                                      derive_seed(self.seed, "data", "test"), name="blobs-test")
            return train, test
        train = load_idx_dataset(ds.train_images, ds.train_labels, name="idx-train")
        test = load_idx_dataset(ds.test_images, ds.test_labels, name="idx-test")
        return train, test

    def to_dict(self) -> dict:
        ds = self.dataset
        d = {
            "seed": self.seed,
            "output_dir": self.output_dir,
            "dataset": {
                "kind": ds.kind,
                "classes": ds.classes,
                "dim": ds.dim,
                "n_per_class": ds.n_per_class,
                "test_n_per_class": ds.test_n_per_class,
                "spread": ds.spread,
                "train_images": ds.train_images,
                "train_labels": ds.train_labels,
                "test_images": ds.test_images,
                "test_labels": ds.test_labels,
            },
            "model": {"hidden_dims": list(self.hidden_dims)},
            "train": {
                "epochs": self.epochs,
                "lr0": self.lr0,
                "momentum": self.momentum,
                "weight_decay": self.weight_decay,
                "decay_epochs": list(self.decay_epochs),
                "decay_factor": self.decay_factor,
                "batch_size": self.batch_size,
                "m": self.m,
            },
            "attack": {
                "kind": self.attack.kind.value,
                "epsilon": self.attack.epsilon,
                "k": self.attack.k,
                "alpha": self.attack.alpha,
                "steps": self.attack.steps,
                "clamp_input_domain": self.attack.clamp_input_domain,
            },
            "noise": {"kind": self.noise.kind.value, "radius": self.noise.radius},
            "select": {"kind": self.select.kind.value},
            "eval": {
                "epsilons": list(self.eval.epsilons),
                "steps": self.eval.steps,
                "subsample": self.eval.subsample,
            },
        }
        return d


def config_hash(config: RunConfig) -> str:
    canonical = json.dumps(config.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def serialize_run_config(config: RunConfig) -> str:
    return json.dumps(config.to_dict(), indent=2) + "\n"


class _Section:
    """Key-checked view over one JSON object."""

    def __init__(self, data: dict, path: str):
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected an object, got {type(data).__name__}")
        self.data = data
        self.path = path
        self.seen: set[str] = set()

    def get(self, key, default=None, kind=None):
        self.seen.add(key)
        value = self.data.get(key, default)
        if value is not None and kind is not None:
            if kind is float and isinstance(value, int) and not isinstance(value, bool):
                value = float(value)
            if kind in (int, float, str, bool) and not isinstance(value, kind) \
                    or (kind is int and isinstance(value, bool)):
                raise ConfigError(
                    f"{self.path}.{key}: expected {kind.__name__}, got {type(value).__name__}"
                )
            if kind is list and not isinstance(value, list):
                raise ConfigError(f"{self.path}.{key}: expected a list")
        return value

    def finish(self):
        unknown = set(self.data) - self.seen
        if unknown:
            raise ConfigError(f"{self.path}: unknown key {sorted(unknown)[0]!r}")


def _num_list(values, path, kind=float):
    out = []
    for i, v in enumerate(values):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{path}[{i}]: expected a number")
        out.append(kind(v))
    return out


def parse_config_dict(raw: dict) -> RunConfig:
    top = _Section(raw, "config")
    seed = top.get("seed", 0, int)
    output_dir = top.get("output_dir", "runs/out", str)

    ds_raw = top.get("dataset")
    if ds_raw is None:
        raise ConfigError("config: missing required section 'dataset'")
    ds = _Section(ds_raw, "dataset")
    dataset = DatasetSpec(
        kind=ds.get("kind", "blobs", str),
        classes=ds.get("classes", 3, int),
        dim=ds.get("dim", 20, int),
        n_per_class=ds.get("n_per_class", 300, int),
        test_n_per_class=ds.get("test_n_per_class", 100, int),
        spread=ds.get("spread", 0.1, float),
        train_images=ds.get("train_images", None, str),
        train_labels=ds.get("train_labels", None, str),
        test_images=ds.get("test_images", None, str),
        test_labels=ds.get("test_labels", None, str),
    )
    ds.finish()

    atk_raw = top.get("attack")
    if atk_raw is None or "epsilon" not in atk_raw:
        raise ConfigError("config: attack.epsilon is required")
    atk = _Section(atk_raw, "attack")
    try:
        attack = AttackSpec(
            kind=AttackKind(atk.get("kind", "nfgsm", str)),
            epsilon=atk.get("epsilon", None, float),
            k=atk.get("k", 2.0, float),
            alpha=atk.get("alpha", None, float),
            steps=atk.get("steps", 10, int),
            clamp_input_domain=atk.get("clamp_input_domain", False, bool),
        )
    except ValueError as exc:
        raise ConfigError(f"attack: {exc}") from None
    atk.finish()

    noi = _Section(top.get("noise", {}) or {}, "noise")
    noise_kind = noi.get("kind", "uniform", str)
    radius = noi.get("radius", None, float)
    if radius is None:
        radius = attack.init_radius
    try:
        noise = NoiseSpec(kind=NoiseKind(noise_kind), radius=radius)
    except ValueError as exc:
        raise ConfigError(f"noise: {exc}") from None
    noi.finish()

    sel = _Section(top.get("select", {}) or {}, "select")
    try:
        select = SelectSpec(kind=SelectKind(sel.get("kind", "none", str)))
    except ValueError as exc:
        raise ConfigError(f"select: {exc}") from None
    sel.finish()

    mdl = _Section(top.get("model", {}) or {}, "model")
    hidden = tuple(_num_list(mdl.get("hidden_dims", [64, 64], list), "model.hidden_dims", int))
    mdl.finish()

    tr = _Section(top.get("train", {}) or {}, "train")
    train_kw = dict(
        epochs=tr.get("epochs", 75, int),
        lr0=tr.get("lr0", 0.01, float),
        momentum=tr.get("momentum", 0.9, float),
        weight_decay=tr.get("weight_decay", 5e-4, float),
        decay_epochs=tuple(_num_list(tr.get("decay_epochs", [28, 56], list),
                                     "train.decay_epochs", int)),
        decay_factor=tr.get("decay_factor", 0.1, float),
        batch_size=tr.get("batch_size", 128, int),
        m=tr.get("m", 1, int),
    )
    tr.finish()

    ev = _Section(top.get("eval", {}) or {}, "eval")
    eval_settings = EvalSettings(
        epsilons=tuple(_num_list(ev.get("epsilons", [attack.epsilon], list),
                                 "eval.epsilons", float)),
        steps=ev.get("steps", 50, int),
        subsample=ev.get("subsample", 512, int),
    )
    ev.finish()
    top.finish()

    try:
        config = RunConfig(
            dataset=dataset,
            attack=attack,
            noise=noise,
            select=select,
            hidden_dims=hidden,
            eval=eval_settings,
            seed=seed,
            output_dir=output_dir,
            **train_kw,
        )
        # surface radius/attack inconsistencies at parse time
        config.train_config()
        validate_bb_config(config.m, replace(config.noise, m=config.m), config.attack)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return config


def parse_run_config(path) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return parse_config_dict(raw)
