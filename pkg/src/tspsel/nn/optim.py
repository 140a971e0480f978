"""Adam with bias correction and plateau-triggered learning-rate decay."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import NumericError, ParameterError


@dataclass
class AdamState:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    decay_rate: float = 0.9
    patience: int = 10
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    best_loss: float = float("inf")
    stagnant_epochs: int = 0

    def validate(self) -> None:
        if not (0.0 < self.lr):
            raise ParameterError(f"learning rate must be positive, got {self.lr}")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ParameterError("Adam betas must lie in [0, 1)")
        if not (0.0 < self.decay_rate <= 1.0):
            raise ParameterError(f"decay_rate must lie in (0, 1], got {self.decay_rate}")
        if self.patience < 1:
            raise ParameterError(f"patience must be >= 1, got {self.patience}")


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray], state: AdamState) -> None:
    """One in-place update of every parameter; raises on NaN gradients."""
    state.step += 1
    b1c = 1.0 - state.beta1**state.step
    b2c = 1.0 - state.beta2**state.step
    for name in sorted(params):
        g = grads[name]
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for parameter {name!r} at step {state.step}")
        if name not in state.m:
            state.m[name] = np.zeros_like(params[name])
            state.v[name] = np.zeros_like(params[name])
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        params[name] -= state.lr * (m / b1c) / (np.sqrt(v / b2c) + state.eps)


_IMPROVE_ATOL = 1e-12  # an epoch must beat the best by more than this to reset patience


def decay_on_plateau(state: AdamState, epoch_losses: list[float]) -> bool:
    """Feed the latest epoch loss; decays lr after `patience` flat epochs.

    Returns True when a decay fired.  Call once per epoch with the loss
    history so far (last entry is the new epoch).
    """
    if not epoch_losses:
        raise ParameterError("epoch_losses must be nonempty")
    loss = epoch_losses[-1]
    if loss < state.best_loss - _IMPROVE_ATOL:
        state.best_loss = loss
        state.stagnant_epochs = 0
        return False
    state.stagnant_epochs += 1
    if state.stagnant_epochs >= state.patience:
        state.lr *= state.decay_rate
        state.stagnant_epochs = 0
        return True
    return False
