"""FGSM and PGD adversarial example generation for regression models.

Attacks differentiate the plain MSE loss (per-example, so a batch
gradient is the per-example gradient stacked), with the encoder noise
frozen at its mean for a deterministic white-box adversary.  Outputs
live inside the requested l_inf ball exactly; clipping to [0, 1] is
opt-in.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .conditional import mse
from .errors import ConfigError, DimensionError
from .kernels import as_sample_matrix
from .nn import ModelGraph, build_forward, predict


@dataclass(frozen=True)
class AttackConfig:
    kind: str = "fgsm"
    epsilon: float = 0.1  # FGSM l_inf perturbation
    rho: float = 0.3  # PGD radius
    alpha: float = 0.1  # PGD step size
    steps: int = 5  # PGD iterations
    clip_unit: bool = False  # clip adversarial inputs to [0, 1]

    def __post_init__(self):
        if self.kind not in ("fgsm", "pgd"):
            raise ConfigError(f"unknown attack kind {self.kind!r}")
        # epsilon = 0 is a valid no-op probe (clean == attacked).
        if self.epsilon < 0 or self.rho <= 0 or self.alpha <= 0:
            raise ConfigError("epsilon must be >= 0; rho and alpha positive")
        if self.steps < 1:
            raise ConfigError("steps must be >= 1")


def _mse_input_gradient(model: ModelGraph, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Gradient of the MSE loss w.r.t. the inputs, noise at its mean."""
    graph = build_forward(model, x, noise=None)
    diff = graph.y_hat - ad.Var(y)
    loss = ad.vsum(ad.square(diff)) * (1.0 / x.shape[0])
    ad.backward(loss)
    return graph.input_gradient()


def fgsm(model: ModelGraph, x, y, epsilon: float) -> np.ndarray:
    """Single-step signed-gradient attack: x + epsilon * sign(dMSE/dx).

    Warns and returns x unchanged where the gradient is exactly zero
    everywhere (e.g. predictions already exact).
    """
    x = as_sample_matrix(x, "x")
    y = as_sample_matrix(y, "y")
    if x.shape[0] != y.shape[0]:
        raise DimensionError("x and y must have equal row counts")
    grad = _mse_input_gradient(model, x, y)
    if not np.any(grad):
        warnings.warn("MSE gradient is exactly zero; returning inputs unchanged", stacklevel=2)
        return x.copy()
    return x + epsilon * np.sign(grad)


def pgd(model: ModelGraph, x, y, rho: float, alpha: float, steps: int) -> np.ndarray:
    """Iterated signed-gradient attack projected onto the l_inf ball.

    The perturbation is maintained in delta form, so the final
    |x' - x0|_inf <= rho holds exactly.
    """
    x0 = as_sample_matrix(x, "x")
    y = as_sample_matrix(y, "y")
    if x0.shape[0] != y.shape[0]:
        raise DimensionError("x and y must have equal row counts")
    delta = np.zeros_like(x0)
    saw_gradient = False
    for _ in range(int(steps)):
        grad = _mse_input_gradient(model, x0 + delta, y)
        saw_gradient = saw_gradient or bool(np.any(grad))
        delta = np.clip(delta + alpha * np.sign(grad), -rho, rho)
    if not saw_gradient:
        warnings.warn("MSE gradient is exactly zero; returning inputs unchanged", stacklevel=2)
        return x0.copy()
    return x0 + delta


def attack_inputs(model: ModelGraph, x, y, cfg: AttackConfig) -> np.ndarray:
    """Dispatch on the configured attack; optionally clip to [0, 1]."""
    if cfg.kind == "fgsm":
        adv = fgsm(model, x, y, cfg.epsilon)
    else:
        adv = pgd(model, x, y, cfg.rho, cfg.alpha, cfg.steps)
    if cfg.clip_unit:
        adv = np.clip(adv, 0.0, 1.0)
    return adv


def evaluate_robustness(model: ModelGraph, x, y, cfg: AttackConfig) -> dict:
    """Clean vs attacked RMSE on a (normalized) test set."""
    x = as_sample_matrix(x, "x")
    y = as_sample_matrix(y, "y")
    clean_rmse = float(np.sqrt(mse(y, predict(model, x))))
    adv = attack_inputs(model, x, y, cfg)
    attacked_rmse = float(np.sqrt(mse(y, predict(model, adv))))
    params = {"epsilon": cfg.epsilon} if cfg.kind == "fgsm" else {
        "rho": cfg.rho,
        "alpha": cfg.alpha,
        "steps": cfg.steps,
    }
    params["clip_unit"] = cfg.clip_unit
    return {
        "attack": cfg.kind,
        "params": params,
        "clean_rmse": clean_rmse,
        "attacked_rmse": attacked_rmse,
        "n": int(x.shape[0]),
    }
