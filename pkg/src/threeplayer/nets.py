"""Small label-conditioned MLPs, losses, Adam and the training schedules."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from . import autodiff as ad
from .autodiff import Node

ParameterStore = dict  # name -> np.ndarray, insertion ordered: W0, b0, W1, b1, ...

LOG_CLAMP = 1e-12
_ACTIVATIONS = {"relu": ad.relu, "tanh": ad.tanh}
_HEADS = ("linear", "sigmoid", "none")


@dataclass(frozen=True)
class MlpSpec:
    """Layer widths including the input; ``sizes[0]`` counts the one-hot label columns.

    ``num_labels`` > 0 makes the network conditional: a one-hot encoding of
    the label is appended to the raw input before the first layer.
    """

    sizes: tuple[int, ...]
    activation: str = "relu"
    head: str = "linear"
    num_labels: int = 0

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))
        if len(self.sizes) < 2:
            raise ValueError(f"MlpSpec needs at least one layer, got sizes {self.sizes}")
        if any(s <= 0 for s in self.sizes):
            raise ValueError(f"layer sizes must be positive, got {self.sizes}")
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.head not in _HEADS:
            raise ValueError(f"unknown output head {self.head!r}")
        if self.num_labels < 0 or (self.num_labels and self.num_labels >= self.sizes[0]):
            raise ValueError(f"num_labels={self.num_labels} leaves no room for input features")

    @property
    def input_width(self) -> int:
        return self.sizes[0] - self.num_labels

    @property
    def output_width(self) -> int:
        return self.sizes[-1]

    @property
    def num_layers(self) -> int:
        return len(self.sizes) - 1

    def shapes(self) -> dict[str, tuple[int, ...]]:
        out = {}
        for k in range(self.num_layers):
            out[f"W{k}"] = (self.sizes[k], self.sizes[k + 1])
            out[f"b{k}"] = (self.sizes[k + 1],)
        return out


def init_xavier_sqrt2(spec: MlpSpec, seed: int) -> ParameterStore:
    """Normal weights with std sqrt(2) * sqrt(2 / (fan_in + fan_out)), zero biases."""
    rng = np.random.default_rng(seed)
    params = {}
    for k in range(spec.num_layers):
        fan_in, fan_out = spec.sizes[k], spec.sizes[k + 1]
        std = math.sqrt(2.0) * math.sqrt(2.0 / (fan_in + fan_out))
        params[f"W{k}"] = rng.normal(0.0, std, size=(fan_in, fan_out))
        params[f"b{k}"] = np.zeros(fan_out)
    return params


def one_hot(labels, num_classes: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise ValueError(f"labels must lie in [0, {num_classes}), got range [{labels.min()}, {labels.max()}]")
    out = np.zeros((labels.shape[0], num_classes))
    out[np.arange(labels.shape[0]), labels.astype(np.int64)] = 1.0
    return out


def mlp_forward(spec: MlpSpec, params: Mapping, x, labels=None) -> Node:
    """Forward pass; ``params`` values may be arrays (constants) or nodes."""
    x = ad._wrap(x)
    if x.value.ndim != 2:
        raise ad.ShapeError(f"mlp input must be [batch, features], got {x.shape}")
    if spec.num_labels:
        if labels is None:
            raise ValueError("conditional network needs labels")
        x = ad.concat([x, one_hot(labels, spec.num_labels)], axis=1)
    if x.shape[1] != spec.sizes[0]:
        raise ad.ShapeError(
            f"input width {x.shape[1] - spec.num_labels} does not match network input "
            f"{spec.input_width} (plus {spec.num_labels} label columns)")
    act = _ACTIVATIONS[spec.activation]
    h = x
    for k in range(spec.num_layers):
        h = ad.matmul(h, params[f"W{k}"]) + ad._wrap(params[f"b{k}"])
        if k < spec.num_layers - 1:
            h = act(h)
    if spec.head == "sigmoid":
        h = ad.sigmoid(h)
    return h


def log_clamped(v) -> Node:
    return ad.log(ad.clip(v, LOG_CLAMP, 1.0))


def hinge_loss(score, labels) -> Node:
    """Mean of max(0, 1 - y * score) with y in {-1, +1}."""
    score = ad._wrap(score)
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    if not np.all((y == 1.0) | (y == -1.0)):
        raise ValueError("hinge labels must be -1 or +1")
    if score.value.ndim == 2:
        score = ad.reshape(score, (score.shape[0],))
    if score.shape != y.shape:
        raise ad.ShapeError(f"hinge: score shape {score.shape} vs {y.shape[0]} labels")
    return ad.mean(ad.relu(1.0 - ad.mul(score, y)))


def cross_entropy_loss(logits, labels) -> Node:
    logits = ad._wrap(logits)
    if logits.value.ndim != 2:
        raise ad.ShapeError(f"cross entropy expects [batch, classes] logits, got {logits.shape}")
    picks = one_hot(labels, logits.shape[1])
    return -ad.mean(ad.sum(ad.log_softmax(logits) * picks, axis=1))


def classification_loss(kind: str, outputs, labels) -> Node:
    """L_C: ``hinge`` maps class 1 to +1 and class 0 to -1; ``softmax`` is cross entropy."""
    if kind == "hinge":
        labels = np.asarray(labels)
        if np.any((labels != 0) & (labels != 1)):
            raise ValueError("hinge classifier supports exactly two classes")
        return hinge_loss(outputs, np.where(labels == 1, 1.0, -1.0))
    if kind == "softmax":
        return cross_entropy_loss(outputs, labels)
    raise ValueError(f"unknown classification loss {kind!r}")


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: Mapping[str, np.ndarray], grads: Mapping[str, np.ndarray], state: AdamState,
              lr: float, weight_decay: float = 0.0) -> tuple[ParameterStore, AdamState]:
    """One bias-corrected Adam update; returns new params and state, inputs untouched.

    Weight decay (``weight_decay * theta``) is added to the gradient of
    weight matrices only (names starting with ``W``), before the moments.
    """
    if not lr > 0:
        raise ValueError(f"learning rate must be positive, got {lr!r}")
    t = state.t + 1
    b1, b2 = state.beta1, state.beta2
    bc1, bc2 = 1.0 - b1 ** t, 1.0 - b2 ** t
    new_params, new_m, new_v = {}, {}, {}
    for name, theta in params.items():
        g = grads[name]
        if g.shape != theta.shape:
            raise ad.ShapeError(f"adam: gradient for {name} has shape {g.shape}, parameter {theta.shape}")
        if weight_decay and name.startswith("W"):
            g = g + weight_decay * theta
        m = b1 * state.m.get(name, 0.0) + (1.0 - b1) * g
        v = b2 * state.v.get(name, 0.0) + (1.0 - b2) * (g * g)
        new_params[name] = theta - lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
        new_m[name], new_v[name] = m, v
    return new_params, AdamState(b1, b2, state.eps, t, new_m, new_v)


@dataclass(frozen=True)
class ScheduleParams:
    p: float
    w_c: float = 0.1
    alpha: float = 10.0
    beta: float = 0.75
    mu0: float = 1e-3

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"progress p must be in [0, 1], got {self.p}")
        # w_c = 0 is allowed: it switches the classifier game off
        if not self.w_c >= 0:
            raise ValueError(f"w_c must be nonnegative, got {self.w_c}")
        for name in ("alpha", "beta", "mu0"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")


def lambda_schedule(s: ScheduleParams) -> float:
    # w_c scales the whole ramp, so lambda runs from 0 toward w_c
    return s.w_c * (2.0 / (1.0 + math.exp(-10.0 * s.p)) - 1.0)


def lr_schedule(s: ScheduleParams) -> float:
    return s.mu0 / (1.0 + s.alpha * s.p) ** s.beta


def step_decay(epoch: int, mu0: float, period: int = 60, factor: float = 0.1) -> float:
    if epoch < 0 or period <= 0 or not 0 < factor < 1:
        raise ValueError("step_decay needs epoch >= 0, period > 0 and 0 < factor < 1")
    return mu0 * factor ** (epoch // period)
