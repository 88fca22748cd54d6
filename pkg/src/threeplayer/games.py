"""Conditional GAN, three-player game, ACGAN and plain classifier training loops.

All randomness flows through per-purpose generators derived from one integer
seed, so the discriminator, generator and classifier batch streams never
perturb each other. That is what makes a three-player run with ``w_c = 0``
replay continued cGAN training bit for bit.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import autodiff as ad
from .nets import (AdamState, MlpSpec, ScheduleParams, adam_step, classification_loss,
                   cross_entropy_loss, init_xavier_sqrt2, lambda_schedule, log_clamped,
                   lr_schedule, mlp_forward, step_decay)

RNG_ALGORITHM = "numpy.PCG64/SeedSequence"

_STREAMS = {"init_g": 1, "init_d": 2, "init_c": 3, "d": 11, "g": 12, "c": 13, "eval": 21}


def stream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for one named purpose under ``seed``."""
    return np.random.default_rng([int(seed), _STREAMS[name]])


def stream_seed(seed: int, name: str) -> int:
    return int(np.random.SeedSequence([int(seed), _STREAMS[name]]).generate_state(1)[0])


class TrainingDiverged(RuntimeError):
    def __init__(self, message, iteration=None):
        super().__init__(message if iteration is None else f"{message} (iteration {iteration})")
        self.iteration = iteration


@dataclass(frozen=True)
class BatchPlan:
    """Fractions of a classifier batch from real data, the initial and the current generator."""

    real: float = 1 / 3
    initial: float = 1 / 3
    current: float = 1 / 3

    def __post_init__(self):
        fr = (self.real, self.initial, self.current)
        if any(f < 0 for f in fr) or abs(sum(fr) - 1.0) > 1e-9:
            raise ValueError(f"batch plan fractions must be nonnegative and sum to 1, got {fr}")

    def counts(self, m: int) -> tuple[int, int, int]:
        return tuple(largest_remainder((self.real, self.initial, self.current), m))


def largest_remainder(fractions, total: int) -> list[int]:
    quotas = [f * total for f in fractions]
    counts = [int(math.floor(q)) for q in quotas]
    left = total - sum(counts)
    # stable sort: earlier entries win ties
    order = sorted(range(len(quotas)), key=lambda i: -(quotas[i] - counts[i]))
    for i in order[:left]:
        counts[i] += 1
    return counts


@dataclass
class GameConfig:
    num_classes: int = 2
    data_dim: int = 2
    latent_dim: int = 8
    g_hidden: tuple = (32, 32)
    d_hidden: tuple = (32, 32)
    c_hidden: tuple = ()  # empty: linear classifier
    activation: str = "relu"
    classifier_loss: str = "hinge"
    batch_size: int = 64
    cgan_iters: int = 3000
    game_iters: int = 600
    classifier_iters: int = 1000
    lr_g: float = 1e-3
    lr_d: float = 1e-3
    lr_c: float = 1e-2
    gan_beta1: float = 0.0
    gan_beta2: float = 0.9
    c_beta1: float = 0.5
    c_beta2: float = 0.999
    weight_decay: float = 1e-4
    c_decay_period: int = 0  # iterations between x0.1 learning-rate drops; 0 disables
    w_c: float = 0.1
    alpha: float = 10.0
    beta: float = 0.75
    plan: BatchPlan = field(default_factory=BatchPlan)
    nonsaturating: bool = False
    lr_decay: bool = True
    augment_fraction: float = 0.5
    seed: int = 0

    def g_spec(self) -> MlpSpec:
        k = self.num_classes
        return MlpSpec((self.latent_dim + k, *self.g_hidden, self.data_dim), self.activation, "linear", k)

    def d_spec(self) -> MlpSpec:
        k = self.num_classes
        return MlpSpec((self.data_dim + k, *self.d_hidden, 1), self.activation, "sigmoid", k)

    def c_spec(self) -> MlpSpec:
        out = 1 if self.classifier_loss == "hinge" else self.num_classes
        return MlpSpec((self.data_dim, *self.c_hidden, out), self.activation, "linear")

    def acgan_d_spec(self) -> MlpSpec:
        return MlpSpec((self.data_dim, *self.d_hidden, 1 + self.num_classes), self.activation, "linear")

    def gan_adam(self) -> AdamState:
        return AdamState(self.gan_beta1, self.gan_beta2)

    def c_adam(self) -> AdamState:
        return AdamState(self.c_beta1, self.c_beta2)


@dataclass
class Classifier:
    """A trained network viewed as a classifier.

    ``loss == "hinge"`` reads the single output as a signed score for class 1.
    Otherwise columns from ``logit_start`` on are class logits (ACGAN's
    discriminator keeps its source logit in column 0).
    """

    spec: MlpSpec
    params: dict
    loss: str = "hinge"
    logit_start: int = 0

    def forward(self, x) -> ad.Node:
        out = mlp_forward(self.spec, self.params, x)
        if self.logit_start:
            out = ad.slice_cols(out, self.logit_start, out.shape[1])
        return out

    def loss_on(self, x, y) -> ad.Node:
        return classification_loss(self.loss, self.forward(x), y)

    def decide(self, x) -> tuple[np.ndarray, np.ndarray]:
        out = self.forward(np.asarray(x, dtype=np.float64)).value
        if self.loss == "hinge":
            score = out[:, 0]
            classes = np.where(score > 0, 1, np.where(score < 0, 0, -1))
            return classes, score
        top2 = np.sort(out, axis=1)[:, -2:]
        if out.shape[1] == 2:
            score = out[:, 1] - out[:, 0]
        else:
            score = top2[:, 1] - top2[:, 0]
        classes = np.where(top2[:, 1] == top2[:, 0], -1, np.argmax(out, axis=1))
        return classes, score

    def predict(self, x) -> np.ndarray:
        return self.decide(x)[0]

    def accuracy(self, x, y) -> float:
        return float(np.mean(self.predict(x) == np.asarray(y)))

    def linear_normal(self) -> np.ndarray:
        """Decision normal of a linear two-class classifier (points toward class 1)."""
        if self.spec.num_layers != 1 or self.logit_start:
            raise ValueError("linear_normal needs a single-layer classifier")
        w = self.params["W0"]
        if self.loss == "hinge":
            return w[:, 0].copy()
        if w.shape[1] != 2:
            raise ValueError("linear_normal needs exactly two classes")
        return w[:, 1] - w[:, 0]


@dataclass
class GameState:
    config: GameConfig
    g_spec: MlpSpec
    d_spec: MlpSpec
    c_spec: MlpSpec
    g: dict
    d: dict
    c: Optional[dict]
    g0: dict
    g_opt: AdamState
    d_opt: AdamState
    c_opt: AdamState
    rng_d: np.random.Generator
    rng_g: np.random.Generator
    rng_c: np.random.Generator
    iteration: int = 0

    @property
    def m(self) -> int:
        return self.config.batch_size

    def classifier(self) -> Classifier:
        return Classifier(self.c_spec, self.c, self.config.classifier_loss)


def new_game_state(config: GameConfig, g=None, d=None, c=None, *, with_classifier=True) -> GameState:
    """Fresh optimizer states and batch streams; unspecified networks get seeded init."""
    if config.batch_size <= 0:
        raise ValueError(f"batch size must be positive, got {config.batch_size}")
    g_spec, d_spec, c_spec = config.g_spec(), config.d_spec(), config.c_spec()
    seed = config.seed
    g = _copy_params(g) if g is not None else init_xavier_sqrt2(g_spec, stream_seed(seed, "init_g"))
    d = _copy_params(d) if d is not None else init_xavier_sqrt2(d_spec, stream_seed(seed, "init_d"))
    if c is not None:
        c = _copy_params(c)
    elif with_classifier:
        c = init_xavier_sqrt2(c_spec, stream_seed(seed, "init_c"))
    return GameState(config, g_spec, d_spec, c_spec, g, d, c, _copy_params(g),
                     config.gan_adam(), config.gan_adam(), config.c_adam(),
                     stream(seed, "d"), stream(seed, "g"), stream(seed, "c"))


def _copy_params(params) -> dict:
    return {k: np.array(v, dtype=np.float64) for k, v in params.items()}


def _check_finite(value: float, what: str) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise TrainingDiverged(f"{what} is not finite ({value})")
    return value


# --- sampling ----------------------------------------------------------------

def _draw_latent(rng: np.random.Generator, m: int, latent_dim: int, num_classes: int):
    y = rng.integers(0, num_classes, size=m)
    z = rng.standard_normal((m, latent_dim))
    return z, y


def sample_generator(g_spec: MlpSpec, g_params, m: int, rng: np.random.Generator):
    """Draw ``m`` labelled samples G(z, y): z standard normal, y uniform over classes."""
    if m <= 0:
        raise ValueError(f"sample size must be positive, got {m}")
    z, y = _draw_latent(rng, m, g_spec.input_width, g_spec.num_labels)
    return mlp_forward(g_spec, g_params, z, y).value, y


def sample_real(x: np.ndarray, y: np.ndarray, m: int, rng: np.random.Generator):
    if len(x) == 0:
        raise ValueError("real data is empty")
    idx = rng.integers(0, len(x), size=m)
    return x[idx], y[idx]


# --- the three updates -------------------------------------------------------

def discriminator_step(state: GameState, real, fake, lr: float | None = None) -> float:
    """Ascend mean log D(x, y) + mean log(1 - D(x_g, y_g)); return the objective before the step.

    ``real`` and ``fake`` are (features, labels) array pairs, so nothing
    flows back into the generator.
    """
    (xr, yr), (xf, yf) = real, fake
    if len(xr) != len(xf):
        raise ValueError(f"real and fake batches differ in size ({len(xr)} vs {len(xf)})")
    dl = ad.leaves(state.d)
    objective = (ad.mean(log_clamped(mlp_forward(state.d_spec, dl, xr, yr)))
                 + ad.mean(log_clamped(1.0 - mlp_forward(state.d_spec, dl, xf, yf))))
    value = _check_finite(objective.value, "discriminator objective")
    grads = ad.backward(-objective, wrt=dl)
    state.d, state.d_opt = adam_step(state.d, grads, state.d_opt, lr or state.config.lr_d)
    return value


def _gan_term(config: GameConfig, d_out: ad.Node) -> ad.Node:
    if config.nonsaturating:
        return -ad.mean(log_clamped(d_out))
    return ad.mean(log_clamped(1.0 - d_out))


def class_path_loss(xg: ad.Node, y, classify: Callable, lam: float, reverse: bool = True) -> ad.Node:
    """Classifier term of a generator objective.

    With ``reverse`` the samples pass a gradient-reversal gate, so descending
    this term pushes the generator to *raise* the classification loss,
    scaled by ``lam``. Without it (ACGAN) the generator lowers it.
    """
    if reverse:
        return classify(ad.gradient_reversal(xg, lam), y)
    return lam * classify(xg, y)


def generator_class_gradient(g_spec: MlpSpec, g_params, z, y, classify: Callable, lam: float,
                             reverse: bool = True) -> dict:
    """Gradient that the classifier term alone injects into the generator parameters."""
    gl = ad.leaves(g_params)
    xg = mlp_forward(g_spec, gl, z, y)
    return ad.backward(class_path_loss(xg, y, classify, lam, reverse), wrt=gl)


def _classify_fn(state: GameState) -> Callable:
    spec, params, kind = state.c_spec, state.c, state.config.classifier_loss
    return lambda x, y: classification_loss(kind, mlp_forward(spec, params, x), y)


def generator_step(state: GameState, lam: float | None = None, lr: float | None = None):
    """One descent step on the generator; returns (gan loss, classification loss).

    ``lam=None`` is a plain conditional-GAN step (classification loss is NaN).
    Otherwise generated samples also reach the classifier through a reversal
    gate with weight ``lam``. Discriminator and classifier stay fixed.
    """
    if lam is not None and lam < 0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")
    z, y = _draw_latent(state.rng_g, state.m, state.g_spec.input_width, state.config.num_classes)
    gl = ad.leaves(state.g)
    xg = mlp_forward(state.g_spec, gl, z, y)
    gan = _gan_term(state.config, mlp_forward(state.d_spec, state.d, xg, y))
    total, cls_value = gan, float("nan")
    if lam is not None:
        if state.c is None:
            raise ValueError("three-player generator step needs a classifier")
        cls = class_path_loss(xg, y, _classify_fn(state), lam)
        cls_value = _check_finite(cls.value, "generator classification loss")
        total = gan + cls
    gan_value = _check_finite(gan.value, "generator GAN loss")
    grads = ad.backward(total, wrt=gl)
    state.g, state.g_opt = adam_step(state.g, grads, state.g_opt, lr or state.config.lr_g)
    return gan_value, cls_value


def classifier_step(state: GameState, plan: BatchPlan, real_x, real_y, lr: float | None = None) -> float:
    """Descend the classification loss on a mixed batch; return the loss before the step.

    Generated samples are plain arrays labelled with their conditioning
    labels, so neither generator receives gradient.
    """
    if len(real_x) == 0:
        raise ValueError("classifier_step needs real data")
    n_real, n_init, n_cur = plan.counts(state.m)
    rng = state.rng_c
    xs, ys = [], []
    if n_real:
        xr, yr = sample_real(real_x, real_y, n_real, rng)
        xs.append(xr); ys.append(yr)
    if n_init:
        x0, y0 = sample_generator(state.g_spec, state.g0, n_init, rng)
        xs.append(x0); ys.append(y0)
    if n_cur:
        x1, y1 = sample_generator(state.g_spec, state.g, n_cur, rng)
        xs.append(x1); ys.append(y1)
    x, y = np.concatenate(xs), np.concatenate(ys)
    cl = ad.leaves(state.c)
    loss = classification_loss(state.config.classifier_loss, mlp_forward(state.c_spec, cl, x), y)
    value = _check_finite(loss.value, "classifier loss")
    grads = ad.backward(loss, wrt=cl)
    state.c, state.c_opt = adam_step(state.c, grads, state.c_opt, lr or state.config.lr_c,
                                     state.config.weight_decay)
    return value


# --- training loops ------------------------------------------------------------

def progress(iteration: int, total: int) -> float:
    return iteration / (total - 1) if total > 1 else 0.0


def _scheduled_lr(config: GameConfig, base: float, p: float, enabled: bool) -> float:
    if not enabled:
        return base
    return lr_schedule(ScheduleParams(p, config.w_c, config.alpha, config.beta, base))


@dataclass
class CganResult:
    g_spec: MlpSpec
    d_spec: MlpSpec
    g: dict
    d: dict
    d_trace: list
    g_trace: list


def train_cgan(config: GameConfig, x, y, g=None, d=None, iterations: int | None = None,
               lr_decay: bool = False) -> CganResult:
    """Alternate discriminator and plain generator steps.

    Passing ``g``/``d`` continues training from those parameters with fresh
    optimizer state. ``lr_decay`` applies the same learning-rate schedule the
    three-player game uses.
    """
    x, y = np.asarray(x, dtype=np.float64), np.asarray(y)
    if len(x) == 0:
        raise ValueError("training data is empty")
    total = config.cgan_iters if iterations is None else iterations
    state = new_game_state(config, g, d, with_classifier=False)
    d_trace, g_trace = [], []
    for it in range(total):
        p = progress(it, total)
        try:
            real = sample_real(x, y, state.m, state.rng_d)
            fake = sample_generator(state.g_spec, state.g, state.m, state.rng_d)
            d_trace.append(discriminator_step(state, real, fake,
                                              _scheduled_lr(config, config.lr_d, p, lr_decay)))
            g_trace.append(generator_step(state, None,
                                          _scheduled_lr(config, config.lr_g, p, lr_decay))[0])
        except TrainingDiverged as exc:
            raise TrainingDiverged(str(exc), it) from exc
        state.iteration += 1
    return CganResult(state.g_spec, state.d_spec, state.g, state.d, d_trace, g_trace)


@dataclass
class ThreePlayerResult:
    g: dict
    d: dict
    c: dict
    g0: dict
    classifier: Classifier
    traces: dict


def train_three_player(config: GameConfig, x, y, g, d, c=None, *, freeze_classifier: bool = False,
                       iterations: int | None = None,
                       callback: Callable[[int, GameState], None] | None = None) -> ThreePlayerResult:
    """Run the three-player game from a pretrained conditional GAN.

    Each iteration updates the discriminator, then the generator with
    lambda(p), then (unless frozen) the classifier, p running linearly from
    0 to 1. The initial generator is snapshotted before the first update.
    """
    if g is None or d is None:
        raise ValueError("the three-player game starts from a pretrained generator and discriminator")
    x, y = np.asarray(x, dtype=np.float64), np.asarray(y)
    if len(x) == 0:
        raise ValueError("training data is empty")
    total = config.game_iters if iterations is None else iterations
    state = new_game_state(config, g, d, c)
    traces = {k: [] for k in ("d_objective", "gan_loss", "cls_loss", "c_loss", "lambda", "lr_scale")}
    for it in range(total):
        p = progress(it, total)
        lam = lambda_schedule(ScheduleParams(p, config.w_c, config.alpha, config.beta))
        lr_scale = _scheduled_lr(config, 1.0, p, config.lr_decay)
        try:
            real = sample_real(x, y, state.m, state.rng_d)
            fake = sample_generator(state.g_spec, state.g, state.m, state.rng_d)
            # same expression as train_cgan, so w_c = 0 replays it bit for bit
            lr_d = _scheduled_lr(config, config.lr_d, p, config.lr_decay)
            traces["d_objective"].append(discriminator_step(state, real, fake, lr_d))
            gan, cls = generator_step(state, lam, _scheduled_lr(config, config.lr_g, p, config.lr_decay))
            traces["gan_loss"].append(gan)
            traces["cls_loss"].append(cls)
            if freeze_classifier:
                traces["c_loss"].append(float("nan"))
            else:
                traces["c_loss"].append(classifier_step(state, config.plan, x, y,
                                                        _scheduled_lr(config, config.lr_c, p, config.lr_decay)))
        except TrainingDiverged as exc:
            raise TrainingDiverged(str(exc), it) from exc
        traces["lambda"].append(lam)
        traces["lr_scale"].append(lr_scale)
        state.iteration += 1
        if callback is not None:
            callback(it, state)
    return ThreePlayerResult(state.g, state.d, state.c, state.g0, state.classifier(), traces)


@dataclass
class AcganResult:
    g_spec: MlpSpec
    d_spec: MlpSpec
    g: dict
    d: dict
    classifier: Classifier
    d_trace: list
    g_trace: list


def _acgan_heads(spec: MlpSpec, params, x):
    out = mlp_forward(spec, params, x)
    return ad.sigmoid(ad.slice_cols(out, 0, 1)), ad.slice_cols(out, 1, out.shape[1])


def train_acgan(config: GameConfig, x, y, iterations: int | None = None) -> AcganResult:
    """Auxiliary-classifier GAN: the discriminator also predicts the class.

    The discriminator ascends the source objective and descends the class
    loss on real and generated samples; the generator descends both its GAN
    term and the class loss, the opposite sign to the three-player game.
    """
    x, y = np.asarray(x, dtype=np.float64), np.asarray(y)
    if len(x) == 0:
        raise ValueError("training data is empty")
    total = config.cgan_iters if iterations is None else iterations
    d_spec = config.acgan_d_spec()
    g_spec = config.g_spec()
    g = init_xavier_sqrt2(g_spec, stream_seed(config.seed, "init_g"))
    d = init_xavier_sqrt2(d_spec, stream_seed(config.seed, "init_d"))
    g_opt, d_opt = config.gan_adam(), config.gan_adam()
    rng_d, rng_g = stream(config.seed, "d"), stream(config.seed, "g")
    m = config.batch_size

    def aux_loss(params):
        return lambda xs, ys: cross_entropy_loss(_acgan_heads(d_spec, params, xs)[1], ys)

    d_trace, g_trace = [], []
    for it in range(total):
        try:
            xr, yr = sample_real(x, y, m, rng_d)
            xf, yf = sample_generator(g_spec, g, m, rng_d)
            dl = ad.leaves(d)
            src_r, cls_r = _acgan_heads(d_spec, dl, xr)
            src_f, cls_f = _acgan_heads(d_spec, dl, xf)
            source = ad.mean(log_clamped(src_r)) + ad.mean(log_clamped(1.0 - src_f))
            d_loss = -source + cross_entropy_loss(cls_r, yr) + cross_entropy_loss(cls_f, yf)
            d_trace.append(_check_finite(d_loss.value, "ACGAN discriminator loss"))
            d, d_opt = adam_step(d, ad.backward(d_loss, wrt=dl), d_opt, config.lr_d)

            z, yg = _draw_latent(rng_g, m, g_spec.input_width, config.num_classes)
            gl = ad.leaves(g)
            xg = mlp_forward(g_spec, gl, z, yg)
            g_loss = (_gan_term(config, _acgan_heads(d_spec, d, xg)[0])
                      + class_path_loss(xg, yg, aux_loss(d), 1.0, reverse=False))
            g_trace.append(_check_finite(g_loss.value, "ACGAN generator loss"))
            g, g_opt = adam_step(g, ad.backward(g_loss, wrt=gl), g_opt, config.lr_g)
        except TrainingDiverged as exc:
            raise TrainingDiverged(str(exc), it) from exc
    return AcganResult(g_spec, d_spec, g, d, Classifier(d_spec, d, "softmax", logit_start=1),
                       d_trace, g_trace)


@dataclass
class ClassifierResult:
    classifier: Classifier
    loss_trace: list
    accuracy_trace: list


def train_classifier(config: GameConfig, x, y, generator=None, init=None, iterations: int | None = None,
                     augment_fraction: float | None = None) -> ClassifierResult:
    """Supervised training, optionally mixing in generated samples.

    ``generator`` is a (spec, params) pair; each batch then draws
    ``augment_fraction`` of its samples from it, labelled by the
    conditioning label. The accuracy trace is measured on the real data.
    """
    x, y = np.asarray(x, dtype=np.float64), np.asarray(y)
    if len(x) == 0:
        raise ValueError("training data is empty")
    total = config.classifier_iters if iterations is None else iterations
    frac = config.augment_fraction if augment_fraction is None else augment_fraction
    spec = config.c_spec()
    params = _copy_params(init) if init is not None else init_xavier_sqrt2(spec, stream_seed(config.seed, "init_c"))
    opt = config.c_adam()
    rng = stream(config.seed, "c")
    n_real, n_gen = (config.batch_size, 0) if generator is None else largest_remainder((1 - frac, frac), config.batch_size)
    losses, accs = [], []
    for it in range(total):
        xs, ys = [], []
        if n_real:
            xr, yr = sample_real(x, y, n_real, rng)
            xs.append(xr); ys.append(yr)
        if n_gen:
            xg, yg = sample_generator(generator[0], generator[1], n_gen, rng)
            xs.append(xg); ys.append(yg)
        cl = ad.leaves(params)
        loss = classification_loss(config.classifier_loss, mlp_forward(spec, cl, np.concatenate(xs)),
                                   np.concatenate(ys))
        try:
            losses.append(_check_finite(loss.value, "classifier loss"))
        except TrainingDiverged as exc:
            raise TrainingDiverged(str(exc), it) from exc
        lr = config.lr_c
        if config.c_decay_period:
            lr = step_decay(it, lr, config.c_decay_period, 0.1)
        params, opt = adam_step(params, ad.backward(loss, wrt=cl), opt, lr, config.weight_decay)
        accs.append(Classifier(spec, params, config.classifier_loss).accuracy(x, y))
    return ClassifierResult(Classifier(spec, params, config.classifier_loss), losses, accs)


def train_classifier_on_plan(config: GameConfig, x, y, g0, g, init=None,
                             iterations: int | None = None) -> ClassifierResult:
    """Train a classifier with the game's own classifier update and nothing else.

    Batches mix real data, samples of ``g0`` and samples of ``g`` per
    ``config.plan``. This retrains a classifier after a frozen-classifier
    game has moved ``g`` towards hard samples.
    """
    x, y = np.asarray(x, dtype=np.float64), np.asarray(y)
    if len(x) == 0:
        raise ValueError("training data is empty")
    total = config.classifier_iters if iterations is None else iterations
    state = new_game_state(config, g, None, init)
    state.g0 = _copy_params(g0)
    losses, accs = [], []
    for it in range(total):
        lr = config.lr_c
        if config.c_decay_period:
            lr = step_decay(it, lr, config.c_decay_period, 0.1)
        try:
            losses.append(classifier_step(state, config.plan, x, y, lr))
        except TrainingDiverged as exc:
            raise TrainingDiverged(str(exc), it) from exc
        accs.append(state.classifier().accuracy(x, y))
    return ClassifierResult(state.classifier(), losses, accs)


def snapshot(state: GameState) -> dict:
    """Deep copy of every parameter store in a game state (for update-ownership checks)."""
    return {"g": copy.deepcopy(state.g), "d": copy.deepcopy(state.d),
            "c": copy.deepcopy(state.c), "g0": copy.deepcopy(state.g0)}
