"""Smooth losses, separable regularizers, and the composite objective.

The composite objective over a dataset is

    F(w) = (1/n) * sum_i f(x_i @ w; y_i) + (gamma/2) * ||w||^2 + R(w)

with the ridge kept inside the smooth part (it is what makes the smooth
part strongly convex) and R the nonsmooth l1 term.  An elastic-net
regularizer contributes its quadratic half to the ridge via
:func:`effective_ridge` and only its l1 half to R.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .data import SparseDataset, margins

__all__ = [
    "SmoothLoss",
    "Regularizer",
    "RidgeSplit",
    "loss_point",
    "loss_terms",
    "reg_value",
    "prox",
    "shifted_prox",
    "effective_ridge",
    "full_objective",
    "full_gradient",
    "objective_terms",
]

_LOSS_KINDS = ("logistic", "squared")
_REG_KINDS = ("l1", "elastic-net", "none")


@dataclass(frozen=True)
class SmoothLoss:
    """Pointwise loss f(u; y) with value, derivative and curvature in u.

    ``logistic`` expects labels in {-1, +1}; ``squared`` fits u to y directly.
    """

    kind: str

    def __post_init__(self) -> None:
        if self.kind not in _LOSS_KINDS:
            raise ValueError(f"unknown loss {self.kind!r}; expected one of {_LOSS_KINDS}")

    @property
    def max_curvature(self) -> float:
        """Global upper bound on f''(u; y)."""
        return 0.25 if self.kind == "logistic" else 1.0

    def check_labels(self, labels: np.ndarray) -> None:
        if self.kind == "logistic" and not np.all(np.abs(labels) == 1.0):
            raise ValueError("logistic loss requires labels in {-1, +1}")


@dataclass(frozen=True)
class Regularizer:
    """Separable nonsmooth term lam1 * ||w||_1 (plus a quadratic for elastic-net).

    The quadratic part lam2 never appears in prox computations here; fold it
    into the ridge with :func:`effective_ridge` before building solvers.
    """

    kind: str = "none"
    lam1: float = 0.0
    lam2: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in _REG_KINDS:
            raise ValueError(f"unknown regularizer {self.kind!r}; expected one of {_REG_KINDS}")
        if self.lam1 < 0 or self.lam2 < 0:
            raise ValueError("regularization strengths must be nonnegative")
        if self.kind == "none" and (self.lam1 or self.lam2):
            raise ValueError("kind='none' requires lam1 = lam2 = 0")
        if self.kind == "l1" and self.lam2:
            raise ValueError("kind='l1' does not take lam2")


@dataclass(frozen=True)
class RidgeSplit:
    """Strong-convexity modulus of the smooth part (gamma/2 * ||w||^2)."""

    gamma: float

    def __post_init__(self) -> None:
        if not self.gamma > 0 or not np.isfinite(self.gamma):
            raise ValueError(f"ridge gamma must be positive and finite, got {self.gamma}")


def effective_ridge(reg: Regularizer, gamma: float) -> RidgeSplit:
    """Fold an elastic-net quadratic into the ridge: gamma + lam2."""
    return RidgeSplit(gamma=gamma + (reg.lam2 if reg.kind == "elastic-net" else 0.0))


def loss_terms(
    loss: SmoothLoss, u: np.ndarray, y: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized (value, derivative, curvature) of f at margins u.

    The logistic branch works on t = y*u and never exponentiates a large
    positive number: log1p(exp(-|t|)) via logaddexp and sigmoids via expit.
    """
    u = np.asarray(u, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if loss.kind == "logistic":
        t = y * u
        vals = np.logaddexp(0.0, -t)
        s_neg = expit(-t)
        derivs = -y * s_neg
        curvs = expit(t) * s_neg
        return vals, derivs, curvs
    r = u - y
    return 0.5 * r * r, r, np.ones_like(r)


def loss_point(loss: SmoothLoss, u: float, y: float) -> tuple[float, float, float]:
    """Scalar (value, derivative, curvature) of f at a single margin."""
    vals, derivs, curvs = loss_terms(loss, np.array([u]), np.array([y]))
    return float(vals[0]), float(derivs[0]), float(curvs[0])


def reg_value(reg: Regularizer, w: np.ndarray) -> float:
    """The nonsmooth value R(w) = lam1 * ||w||_1 (quadratic part excluded)."""
    if reg.kind == "none" or reg.lam1 == 0.0:
        return 0.0
    return float(reg.lam1 * np.abs(w).sum())


def prox(reg: Regularizer, z: np.ndarray, alpha: float) -> np.ndarray:
    """argmin_w R(w) + ||w - z||^2 / (2*alpha): soft-thresholding at alpha*lam1."""
    if alpha <= 0:
        raise ValueError(f"prox step alpha must be positive, got {alpha}")
    z = np.asarray(z, dtype=np.float64)
    if reg.kind == "none" or reg.lam1 == 0.0:
        return z.copy()
    thr = alpha * reg.lam1
    return np.sign(z) * np.maximum(np.abs(z) - thr, 0.0)


def shifted_prox(reg: Regularizer, anchor: np.ndarray, z: np.ndarray, alpha: float) -> np.ndarray:
    """Prox of the shifted penalty v -> R(anchor + v): prox(anchor + z) - anchor.

    Subproblems optimize a step v with the penalty evaluated at anchor + v;
    this is their projection step, exact by a change of variables.
    """
    return prox(reg, np.asarray(anchor) + np.asarray(z), alpha) - np.asarray(anchor)


def objective_terms(
    data: SparseDataset, loss: SmoothLoss, w: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """One fused pass: margins u and pointwise (vals, derivs, curvs) at w.

    Callers that need several of F, grad, and curvature at the same point
    should use this to pay for the margin pass once.
    """
    u = margins(data, w)
    vals, derivs, curvs = loss_terms(loss, u, data.labels)
    return u, vals, derivs, curvs


def full_objective(
    data: SparseDataset,
    loss: SmoothLoss,
    reg: Regularizer,
    ridge: RidgeSplit,
    w: np.ndarray,
) -> float:
    """F(w) = mean loss + (gamma/2)||w||^2 + lam1||w||_1."""
    _, vals, _, _ = objective_terms(data, loss, w)
    w = np.asarray(w, dtype=np.float64)
    return float(vals.mean() + 0.5 * ridge.gamma * (w @ w) + reg_value(reg, w))


def full_gradient(
    data: SparseDataset, loss: SmoothLoss, ridge: RidgeSplit, w: np.ndarray
) -> np.ndarray:
    """Gradient of the smooth part: (1/n) X^T f'(u) + gamma * w."""
    _, _, derivs, _ = objective_terms(data, loss, w)
    return data.matrix.T @ derivs / data.n + ridge.gamma * np.asarray(w, dtype=np.float64)
