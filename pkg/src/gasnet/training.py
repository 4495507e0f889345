"""Levenberg-Marquardt training with validation-based early stopping.

One epoch is one accepted full-batch update x <- x - (J^T J + mu I)^{-1} J^T e.
A candidate that fails to reduce the training MSE (or produces non-finite
numbers) is rejected: mu is multiplied up and the same epoch is retried with
the Jacobian unchanged. Accepted steps multiply mu down. Training returns the
weights of the epoch with the lowest validation MSE.
"""

import csv
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .numerics import NotPositiveDefinite, solve_spd
from .network import flatten, forward_batch, unflatten

MU_FLOOR = 1e-20


class ShapeMismatch(ValueError):
    """Prediction and target tables disagree in shape."""


@dataclass(frozen=True)
class TrainConfig:
    """Knobs of the LM loop; defaults follow the classical Marquardt recipe."""

    mu_init: float = 1e-3
    mu_increase: float = 10.0
    mu_decrease: float = 0.1
    mu_max: float = 1e10
    max_epochs: int = 1000
    goal_mse: float = 1e-3
    max_fail: int = 6

    def __post_init__(self):
        if self.mu_init <= 0:
            raise ValueError("mu_init must be > 0")
        if self.mu_increase <= 1:
            raise ValueError("mu_increase must be > 1")
        if not 0 < self.mu_decrease < 1:
            raise ValueError("mu_decrease must be in (0, 1)")
        if self.goal_mse < 0:
            raise ValueError("goal_mse must be >= 0")
        if self.max_epochs < 0 or self.max_fail < 1:
            raise ValueError("max_epochs >= 0 and max_fail >= 1 required")

    def to_dict(self):
        return {
            "mu_init": self.mu_init,
            "mu_increase": self.mu_increase,
            "mu_decrease": self.mu_decrease,
            "mu_max": self.mu_max,
            "max_epochs": self.max_epochs,
            "goal_mse": self.goal_mse,
            "max_fail": self.max_fail,
        }


class EpochStats(NamedTuple):
    epoch: int
    train_mse: float
    validation_mse: float
    mu: float


class StepEvent(NamedTuple):
    accepted: bool
    candidate_mse: float
    mu_after: float


@dataclass
class TrainingRecord:
    """Full trace of one training run.

    epochs holds one row per accepted step; steps additionally records every
    rejected candidate so the mu schedule can be audited step by step.
    """

    epochs: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    stop_reason: str = "max_epochs"
    best_epoch: int = 0
    best_params: np.ndarray = None

    def to_csv(self, fileobj):
        writer = csv.writer(fileobj, lineterminator="\n")
        writer.writerow(["epoch", "train_mse", "validation_mse", "mu"])
        for row in self.epochs:
            writer.writerow([row.epoch, repr(row.train_mse), repr(row.validation_mse), repr(row.mu)])


def mse(predictions, targets):
    """Mean squared residual over all n*m entries of equal-shaped tables."""
    predictions = np.asarray(predictions, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if predictions.shape != targets.shape:
        raise ShapeMismatch(f"shapes differ: {predictions.shape} vs {targets.shape}")
    if predictions.size == 0:
        raise ShapeMismatch("empty tables")
    diff = predictions - targets
    return float(np.mean(diff * diff))


def _forward_trace(net, inputs):
    """Forward pass keeping per-layer augmented activations and derivatives."""
    n = inputs.shape[0]
    ones = np.ones((n, 1))
    a = inputs
    augmented = []
    derivs = []
    from .network import _ACTIVATION_FNS  # local import keeps the public surface clean

    for kind, w in zip(net.architecture.layer_activations, net.layer_weights):
        a_aug = np.hstack([ones, a])
        z = a_aug @ w
        a, d = _ACTIVATION_FNS[kind](z)
        augmented.append(a_aug)
        derivs.append(d)
    return a, augmented, derivs


def jacobian(net, inputs):
    """Jacobian of per-sample, per-output residuals w.r.t. the flat parameters.

    Row k*m + o, column p holds d e_{k,o} / d x_p, accumulated by one
    reverse-mode sweep shared across all samples. Column order matches
    flatten(): layer-major, neuron-major, bias first within a neuron.
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    outputs, augmented, derivs = _forward_trace(net, inputs)
    n, m = outputs.shape
    layers = len(net.layer_weights)
    # delta[k, o, j] = d y_o[k] / d z^l_j[k], seeded at the output layer
    delta = np.zeros((n, m, m))
    idx = np.arange(m)
    delta[:, idx, idx] = derivs[-1]
    blocks = [None] * layers
    for l in range(layers - 1, -1, -1):
        grad = np.einsum("koj,ki->koji", delta, augmented[l])
        blocks[l] = grad.reshape(n, m, -1)
        if l > 0:
            w_nobias = net.layer_weights[l][1:, :]
            delta = np.einsum("koj,ij->koi", delta, w_nobias) * derivs[l - 1][:, None, :]
    full = np.concatenate(blocks, axis=2)
    return full.reshape(n * m, full.shape[2])


def residuals(net, inputs, targets):
    """Flat error vector (prediction - target), sample-major then output."""
    pred = forward_batch(net, inputs)
    targets = np.asarray(targets, dtype=np.float64)
    if pred.shape != targets.shape:
        raise ShapeMismatch(f"targets shape {targets.shape}, predictions {pred.shape}")
    return (pred - targets).ravel()


def lm_step(params, J, e, mu):
    """One damped Gauss-Newton update: params - (J^T J + mu I)^{-1} J^T e.

    Raises NotPositiveDefinite when the damped normal matrix fails to
    factor; the training loop reacts by raising mu and retrying.
    """
    if mu <= 0:
        raise ValueError("mu must be > 0")
    params = np.asarray(params, dtype=np.float64)
    hessian = J.T @ J
    hessian[np.diag_indices_from(hessian)] += mu
    gradient = J.T @ e
    return params - solve_spd(hessian, gradient)


def train(net, train_inputs, train_targets, val_inputs, val_targets, config=None):
    """Run the LM loop and return (best network, TrainingRecord).

    Stops on: training MSE at or below goal_mse, the accepted-epoch budget,
    max_fail consecutive accepted epochs without a new best validation MSE,
    or mu exceeding mu_max. The returned network carries the weights of the
    best-validation epoch (the initial weights if nothing was accepted).
    """
    config = config or TrainConfig()
    train_inputs = np.asarray(train_inputs, dtype=np.float64)
    train_targets = np.asarray(train_targets, dtype=np.float64)
    val_inputs = np.asarray(val_inputs, dtype=np.float64)
    val_targets = np.asarray(val_targets, dtype=np.float64)
    if train_inputs.shape[0] == 0 or val_inputs.shape[0] == 0:
        raise ShapeMismatch("training and validation sets must be nonempty")

    arch = net.architecture
    params = flatten(net)
    record = TrainingRecord(best_params=params.copy())
    mu = config.mu_init
    current = net.copy()
    train_mse = mse(forward_batch(current, train_inputs), train_targets)
    best_val = np.inf
    fail_streak = 0
    epoch = 0
    record.stop_reason = "max_epochs"

    while epoch < config.max_epochs:
        J = jacobian(current, train_inputs)
        e = residuals(current, train_inputs, train_targets)
        accepted = False
        while True:
            try:
                candidate = lm_step(params, J, e, mu)
            except NotPositiveDefinite:
                candidate = None
            if candidate is not None and np.all(np.isfinite(candidate)):
                cand_net = unflatten(arch, candidate)
                cand_mse = mse(forward_batch(cand_net, train_inputs), train_targets)
            else:
                cand_net, cand_mse = None, np.inf
            if np.isfinite(cand_mse) and cand_mse < train_mse:
                mu = max(mu * config.mu_decrease, MU_FLOOR)
                record.steps.append(StepEvent(True, cand_mse, mu))
                params, current, train_mse = candidate, cand_net, cand_mse
                accepted = True
                break
            mu = mu * config.mu_increase
            record.steps.append(StepEvent(False, cand_mse, mu))
            if mu > config.mu_max:
                record.stop_reason = "mu_exceeded"
                break
        if not accepted:
            break

        epoch += 1
        val_mse = mse(forward_batch(current, val_inputs), val_targets)
        record.epochs.append(EpochStats(epoch, train_mse, val_mse, mu))
        if val_mse < best_val:
            best_val = val_mse
            record.best_epoch = epoch
            record.best_params = params.copy()
            fail_streak = 0
        else:
            fail_streak += 1

        if train_mse <= config.goal_mse:
            record.stop_reason = "goal_reached"
            break
        if fail_streak >= config.max_fail:
            record.stop_reason = "validation_stall"
            break
    else:
        record.stop_reason = "max_epochs"

    return unflatten(arch, record.best_params), record
