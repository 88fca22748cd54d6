"""Flat ``key = value`` experiment configuration with a round-trippable echo."""

from __future__ import annotations

import dataclasses
import math
import os
from dataclasses import dataclass, fields

from .games import BatchPlan, GameConfig

SCENARIOS = ("baseline", "cgan", "cgan-augmented", "acgan", "three-player", "frozen-classifier-game")
TOY_DATASETS = ("toy-separable", "toy-overlap")
THREE_PLAYER_MODES = ("joint", "frozen-retrain")
REQUIRED = ("scenario", "seed")


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str
    seed: int
    # data
    dataset: str = "toy-separable"  # toy-separable | toy-overlap | path to a CSV file
    test_dataset: str = ""  # CSV test set; required when dataset is a CSV file
    train_per_class: int = 8
    data_seed: int = 100
    test_per_class: int = 1000
    test_seed: int = 999
    repeats: int = 1  # runs seeds seed..seed+repeats-1, data_seed shifted alike
    # networks
    latent_dim: int = 8
    g_hidden: tuple = (32, 32)
    d_hidden: tuple = (32, 32)
    c_hidden: tuple = ()
    activation: str = "relu"
    classifier_loss: str = "hinge"
    # training lengths
    batch_size: int = 64
    cgan_iters: int = 3000
    game_iters: int = 600
    classifier_iters: int = 1000
    # optimisers
    lr_g: float = 1e-3
    lr_d: float = 1e-3
    lr_c: float = 1e-2
    gan_beta1: float = 0.0
    gan_beta2: float = 0.9
    c_beta1: float = 0.5
    c_beta2: float = 0.999
    weight_decay: float = 1e-4
    c_decay_period: int = 0
    # game
    w_c: float = 0.1
    alpha: float = 10.0
    beta: float = 0.75
    plan_real: float = 1 / 3
    plan_initial: float = 1 / 3
    plan_current: float = 1 / 3
    nonsaturating: bool = False
    lr_decay: bool = True
    cgan_lr_decay: bool = True
    augment_fraction: float = 0.5
    three_player_mode: str = "joint"  # joint | frozen-retrain
    # evaluation and artifacts
    eval_samples: int = 1000
    tau: float = 0.5
    overlap_every: int = 100
    raster_min: float = -3.0
    raster_max: float = 3.0
    raster_resolution: int = 200
    checkpoint: str = ""
    out: str = "out"

    def __post_init__(self):
        _validate(self)

    @property
    def plan(self) -> BatchPlan:
        return BatchPlan(self.plan_real, self.plan_initial, self.plan_current)

    @property
    def is_toy(self) -> bool:
        return self.dataset in TOY_DATASETS

    def game_config(self, num_classes: int = 2, data_dim: int = 2, seed: int | None = None) -> GameConfig:
        shared = {f.name for f in fields(GameConfig)} & {f.name for f in fields(self)}
        kw = {k: getattr(self, k) for k in shared}
        kw.update(num_classes=num_classes, data_dim=data_dim, plan=self.plan,
                  seed=self.seed if seed is None else seed)
        return GameConfig(**kw)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def echo(self) -> str:
        """Every effective value, one ``key = value`` line each; parse_config reads it back."""
        return "".join(f"{f.name} = {_format(getattr(self, f.name))}\n" for f in fields(self))

    def missing_files(self, base_dir: str = ".") -> list[str]:
        paths = [] if self.is_toy else [self.dataset, self.test_dataset]
        if self.checkpoint:
            paths.append(self.checkpoint)
        return [p for p in paths if not os.path.isfile(os.path.join(base_dir, p))]


_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _validate(cfg: ExperimentConfig) -> None:
    # messages start with the offending key so parse_config can attach its line
    def bad(msg):
        raise ConfigError(msg)

    if cfg.scenario not in SCENARIOS:
        bad(f"scenario must be one of {', '.join(SCENARIOS)}, got {cfg.scenario!r}")
    if cfg.three_player_mode not in THREE_PLAYER_MODES:
        bad(f"three_player_mode must be one of {', '.join(THREE_PLAYER_MODES)}")
    if cfg.activation not in ("relu", "tanh"):
        bad(f"activation must be relu or tanh, got {cfg.activation!r}")
    if cfg.classifier_loss not in ("hinge", "softmax"):
        bad(f"classifier_loss must be hinge or softmax, got {cfg.classifier_loss!r}")
    if cfg.seed < 0 or cfg.data_seed < 0 or cfg.test_seed < 0:
        bad("seed values must be nonnegative")
    for name in ("train_per_class", "test_per_class", "repeats", "latent_dim", "batch_size",
                 "eval_samples", "overlap_every", "raster_resolution"):
        if getattr(cfg, name) < 1:
            bad(f"{name} must be positive, got {getattr(cfg, name)}")
    for name in ("cgan_iters", "game_iters", "classifier_iters", "c_decay_period"):
        if getattr(cfg, name) < 0:
            bad(f"{name} must be nonnegative, got {getattr(cfg, name)}")
    for name in ("lr_g", "lr_d", "lr_c", "alpha", "beta"):
        if not getattr(cfg, name) > 0:
            bad(f"{name} must be positive, got {getattr(cfg, name)}")
    if cfg.w_c < 0:
        bad(f"w_c must be nonnegative, got {cfg.w_c}")
    if cfg.weight_decay < 0:
        bad(f"weight_decay must be nonnegative, got {cfg.weight_decay}")
    for name in ("gan_beta1", "gan_beta2", "c_beta1", "c_beta2"):
        if not 0 <= getattr(cfg, name) < 1:
            bad(f"{name} must be in [0, 1), got {getattr(cfg, name)}")
    if not 0 <= cfg.augment_fraction <= 1:
        bad(f"augment_fraction must be in [0, 1], got {cfg.augment_fraction}")
    if not 0 < cfg.tau < 1:
        bad(f"tau must be in (0, 1), got {cfg.tau}")
    if not cfg.raster_min < cfg.raster_max:
        bad("raster_min must be below raster_max")
    if any(h < 1 for h in (*cfg.g_hidden, *cfg.d_hidden, *cfg.c_hidden)):
        bad("hidden widths must be positive")
    try:
        cfg.plan
    except ValueError as exc:
        bad(f"plan_real {exc}")
    if cfg.is_toy:
        if cfg.data_seed <= cfg.test_seed < cfg.data_seed + cfg.repeats:
            bad("test_seed must differ from every training data seed")
    elif not cfg.test_dataset:
        bad("test_dataset is required when dataset is a CSV file")


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _convert(kind: str, text: str):
    if kind == "str":
        return text
    if kind == "bool":
        if text not in ("true", "false"):
            raise ValueError("expected true or false")
        return text == "true"
    if kind == "int":
        return int(text, 10)
    if kind == "float":
        value = float(text)
        if not math.isfinite(value):
            raise ValueError("expected a finite number")
        return value
    if kind == "tuple":
        return tuple(int(p.strip(), 10) for p in text.split(",")) if text else ()
    raise AssertionError(kind)


def parse_config(text: str) -> ExperimentConfig:
    """Parse a flat ``key = value`` document; ``#`` starts a comment."""
    values, lines = {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in values:
            raise ConfigError(f"duplicate key {key!r} (first set on line {lines[key]})", lineno)
        kind = _FIELD_TYPES[key]
        try:
            values[key] = _convert(kind, value)
        except ValueError as exc:
            raise ConfigError(f"{key}: expected {kind}, got {value!r} ({exc})", lineno) from None
        lines[key] = lineno
    missing = [k for k in REQUIRED if k not in values]
    if missing:
        raise ConfigError(f"missing required key(s): {', '.join(missing)}", len(text.splitlines()) + 1)
    try:
        return ExperimentConfig(**values)
    except ConfigError as exc:
        key = str(exc).split()[0]
        raise ConfigError(str(exc), lines.get(key)) from None


def load_config(path: str) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
