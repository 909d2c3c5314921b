"""First-order baselines on the same composite objective.

Three reference solvers sharing the trace schema: FISTA with function-value
momentum restarts (also the package's high-accuracy optimum oracle), the
classic full-problem Prox-SVRG, and SAGA with a scalar gradient table.

Auto step sizes come from safe Lipschitz bounds: the trace bound
max f'' * mean ||x_i||^2 + gamma for the full gradient (FISTA), and the
per-component bound max f'' * max ||x_i||^2 + gamma for the stochastic
methods.  Objective values logged per epoch are telemetry and are not
billed to the evaluation counters.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .data import SparseDataset
from .errors import NumericsError
from .objectives import (
    Regularizer,
    RidgeSplit,
    SmoothLoss,
    full_objective,
    loss_terms,
    objective_terms,
    prox,
    reg_value,
)
from .trace import TraceRecord

__all__ = [
    "FistaConfig",
    "SvrgConfig",
    "SagaConfig",
    "fista_solve",
    "prox_svrg_full",
    "saga_solve",
    "full_lipschitz",
    "component_lipschitz",
]


def full_lipschitz(data: SparseDataset, loss: SmoothLoss, ridge: RidgeSplit) -> float:
    """Trace bound on the smooth part's gradient Lipschitz constant."""
    return float(loss.max_curvature * data.row_norms_sq().mean() + ridge.gamma)


def component_lipschitz(data: SparseDataset, loss: SmoothLoss, ridge: RidgeSplit) -> float:
    """Smoothness bound for a single-sample stochastic gradient."""
    return float(loss.max_curvature * data.row_norms_sq().max() + ridge.gamma)


@dataclass
class FistaConfig:
    """``map_tol`` > 0 stops on the prox-gradient mapping norm; 1e-12 gives a
    reference-quality optimum for gap measurements."""

    step: float | None = None
    max_iters: int = 5000
    map_tol: float = 0.0
    eval_budget: int | None = None
    record_every: int = 1


@dataclass
class SvrgConfig:
    step: float | None = None
    epochs: int = 50
    m: int | None = None
    seed: int = 0
    eval_budget: int | None = None


@dataclass
class SagaConfig:
    step: float | None = None
    epochs: int = 50
    seed: int = 0
    eval_budget: int | None = None


def _deriv_scalar(loss: SmoothLoss, u: float, y: float) -> float:
    # Scalar hot path for the stochastic loops; branch keeps exp bounded.
    if loss.kind == "logistic":
        t = y * u
        if t >= 0:
            e = math.exp(-t)
            return -y * e / (1.0 + e)
        return -y / (1.0 + math.exp(t))
    return u - y


def fista_solve(
    data: SparseDataset,
    loss: SmoothLoss,
    reg: Regularizer,
    ridge: RidgeSplit,
    config: FistaConfig,
) -> tuple[np.ndarray, list[TraceRecord]]:
    """Accelerated proximal gradient with momentum restart on objective increase.

    Each iteration costs one gradient pass at the extrapolated point plus one
    objective pass for the restart test (counted as 2n component evaluations).
    """
    loss.check_labels(data.labels)
    n, d = data.n, data.d
    eta = config.step if config.step is not None else 1.0 / full_lipschitz(data, loss, ridge)
    w = np.zeros(d)
    w_prev = w.copy()
    y = w.copy()
    tau = 1.0
    F_prev = full_objective(data, loss, reg, ridge, w)
    records: list[TraceRecord] = []
    comp = 0
    fullg = 0
    start = time.perf_counter()
    for it in range(1, config.max_iters + 1):
        _, _, derivs, _ = objective_terms(data, loss, y)
        grad = data.matrix.T @ derivs / n + ridge.gamma * y
        comp += 2 * n
        fullg += 1
        w_new = prox(reg, y - eta * grad, eta)
        map_norm = float(np.linalg.norm(y - w_new)) / eta
        F_new = float(
            _smooth_value(data, loss, ridge, w_new) + reg_value(reg, w_new)
        )
        if not math.isfinite(F_new):
            raise NumericsError(f"objective became non-finite at iteration {it}", records)
        tau_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * tau * tau))
        if F_new > F_prev:
            # Momentum has overshot; restart the inertial sequence.
            tau = 1.0
            tau_next = 1.0
        y = w_new + ((tau - 1.0) / tau_next) * (w_new - w)
        w_prev, w = w, w_new
        tau = tau_next
        F_prev = F_new
        if it % config.record_every == 0 or it == config.max_iters:
            records.append(
                TraceRecord(
                    t=it,
                    phase="-",
                    lambda_tilde=math.nan,
                    F=F_new,
                    eta=eta,
                    inner_epochs=0,
                    certified=False,
                    comp_grad_evals=comp,
                    full_grad_evals=fullg,
                    wall_ms=(time.perf_counter() - start) * 1e3,
                )
            )
        if config.map_tol > 0 and map_norm <= config.map_tol:
            break
        if config.eval_budget is not None and comp >= config.eval_budget:
            break
    return w, records


def _smooth_value(data, loss, ridge, w) -> float:
    _, vals, _, _ = objective_terms(data, loss, w)
    return float(vals.mean() + 0.5 * ridge.gamma * (w @ w))


def prox_svrg_full(
    data: SparseDataset,
    loss: SmoothLoss,
    reg: Regularizer,
    ridge: RidgeSplit,
    config: SvrgConfig,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, list[TraceRecord]]:
    """Prox-SVRG on the full composite problem.

    Epoch length defaults to one percent of n (at least 1); the snapshot is
    the last iterate of the previous epoch.  Costs: n evaluations per
    snapshot, 2 per stochastic step.
    """
    loss.check_labels(data.labels)
    if rng is None:
        rng = np.random.default_rng(config.seed)
    n, d = data.n, data.d
    gamma = ridge.gamma
    eta = (
        config.step
        if config.step is not None
        else 0.1 / component_lipschitz(data, loss, ridge)
    )
    m = config.m if config.m is not None else max(1, round(0.01 * n))
    w = np.zeros(d)
    records: list[TraceRecord] = []
    comp = 0
    fullg = 0
    start = time.perf_counter()
    for epoch in range(1, config.epochs + 1):
        snap = w.copy()
        u_snap, _, derivs_snap, _ = objective_terms(data, loss, snap)
        g_snap = data.matrix.T @ derivs_snap / n + gamma * snap
        comp += n
        fullg += 1
        ks = rng.integers(0, n, size=m)
        for k in ks:
            cols, vals = data.row(int(k))
            uk = float(vals @ w[cols])
            dnew = _deriv_scalar(loss, uk, data.labels[k])
            dold = derivs_snap[k]
            direction = g_snap + gamma * (w - snap)
            direction[cols] += (dnew - dold) * vals
            w = prox(reg, w - eta * direction, eta)
        comp += 2 * m
        F = float(_smooth_value(data, loss, ridge, w) + reg_value(reg, w))
        if not math.isfinite(F):
            raise NumericsError(f"objective became non-finite at epoch {epoch}", records)
        records.append(
            TraceRecord(
                t=epoch,
                phase="-",
                lambda_tilde=math.nan,
                F=F,
                eta=eta,
                inner_epochs=0,
                certified=False,
                comp_grad_evals=comp,
                full_grad_evals=fullg,
                wall_ms=(time.perf_counter() - start) * 1e3,
            )
        )
        if config.eval_budget is not None and comp >= config.eval_budget:
            break
    return w, records


def saga_solve(
    data: SparseDataset,
    loss: SmoothLoss,
    reg: Regularizer,
    ridge: RidgeSplit,
    config: SagaConfig,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, list[TraceRecord]]:
    """SAGA with a scalar derivative table (one float per sample).

    The table is initialized by a full pass at the start point; each step
    updates one entry and maintains the running table-gradient average
    incrementally.  Cost: n for the init pass, 1 per step.
    """
    loss.check_labels(data.labels)
    if rng is None:
        rng = np.random.default_rng(config.seed)
    n, d = data.n, data.d
    gamma = ridge.gamma
    eta = (
        config.step
        if config.step is not None
        else 1.0 / (3.0 * component_lipschitz(data, loss, ridge))
    )
    w = np.zeros(d)
    u0, _, table, _ = objective_terms(data, loss, w)
    table = table.copy()
    avg = data.matrix.T @ table / n
    comp = n
    fullg = 1
    records: list[TraceRecord] = []
    start = time.perf_counter()
    done = False
    for epoch in range(1, config.epochs + 1):
        ks = rng.integers(0, n, size=n)
        for k in ks:
            cols, vals = data.row(int(k))
            uk = float(vals @ w[cols])
            dnew = _deriv_scalar(loss, uk, data.labels[k])
            delta = dnew - table[k]
            direction = avg + gamma * w
            direction[cols] += delta * vals
            w = prox(reg, w - eta * direction, eta)
            avg[cols] += delta * vals / n
            table[k] = dnew
            comp += 1
            if config.eval_budget is not None and comp >= config.eval_budget:
                done = True
                break
        F = float(_smooth_value(data, loss, ridge, w) + reg_value(reg, w))
        if not math.isfinite(F):
            raise NumericsError(f"objective became non-finite at epoch {epoch}", records)
        records.append(
            TraceRecord(
                t=epoch,
                phase="-",
                lambda_tilde=math.nan,
                F=F,
                eta=eta,
                inner_epochs=0,
                certified=False,
                comp_grad_evals=comp,
                full_grad_evals=fullg,
                wall_ms=(time.perf_counter() - start) * 1e3,
            )
        )
        if done:
            break
    return w, records
