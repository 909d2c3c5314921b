"""Stochastic solvers for the sampled quadratic subproblem.

Both entry points minimize f_sub(v) + R(anchor + v) over the step v:

- :func:`prox_svrg`: variance-reduced proximal stochastic gradient over the
  model's b components, one snapshot matvec per epoch.
- :func:`catalyst_solve`: the same solver inside an inertial outer sequence
  that repeatedly smooths the model, for badly conditioned models.

In ``certificate`` mode the solver checks a verifiable optimality residual
at every epoch end and stops as soon as the residual's dual norm clears the
target; budget exhaustion doubles the budget up to three times before
giving up (the report then carries ``certified=False``).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .objectives import Regularizer, shifted_prox
from .subproblem import (
    SubsampledQuadratic,
    _dual_norm_info,
    newton_decrement,
    quad_matvec,
    residual_certificate,
    subproblem_value,
)

__all__ = [
    "InnerConfig",
    "InnerReport",
    "estimate_lipschitz",
    "prox_svrg",
    "catalyst_solve",
]


@dataclass
class InnerConfig:
    """Knobs for one inner solve.

    ``epochs`` is the exact epoch count in ``fixed`` mode and the initial
    attempt budget in ``certificate`` mode (each retry doubles it).  Exactly
    one of ``target``/``target_rel`` should be set in certificate mode; the
    relative form multiplies the current post-prox iterate's decrement.
    """

    mode: str = "fixed"
    epochs: int = 3
    m: int | None = None
    step: float | None = None
    target: float | None = None
    target_rel: float | None = None
    max_retries: int = 3
    use_catalyst: bool = False
    zeta: float | None = None
    stage_epochs: int = 1
    lipschitz: tuple[float, float] | None = None
    cert_tol: float = 1e-2
    cert_max_iter: int = 50
    track_values: bool = False

    def __post_init__(self) -> None:
        if self.mode not in ("fixed", "certificate"):
            raise ValueError(f"unknown inner mode {self.mode!r}")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.mode == "certificate":
            has_abs = self.target is not None and self.target > 0
            has_rel = self.target_rel is not None and self.target_rel > 0
            if not (has_abs or has_rel):
                raise ValueError("certificate mode needs a positive target or target_rel")
        if not 0 <= self.max_retries <= 3:
            raise ValueError("max_retries must be in [0, 3]")
        if self.stage_epochs < 1:
            raise ValueError("stage_epochs must be at least 1")


@dataclass
class InnerReport:
    """Outcome of one inner solve.

    ``evals`` counts component-gradient units: 2 per stochastic step, b per
    matvec (snapshots, certificates, dual-norm CG, power iterations run
    inside the solve).  ``history`` holds (cumulative evals, model value)
    pairs when value tracking was requested; model values are telemetry and
    are not billed to ``evals``.
    """

    v: np.ndarray
    epochs: int
    evals: int
    certified: bool
    dual_norm: float | None = None
    target: float | None = None
    history: list[tuple[int, float]] = field(default_factory=list)


def estimate_lipschitz(Q: SubsampledQuadratic) -> tuple[float, float]:
    """(L_B, mu_B) for the model's quadratic: power iteration and the ridge.

    The ridge is a guaranteed lower spectral bound because the sampled term
    is PSD, so mu_B = gamma exactly; L_B is a Rayleigh-quotient estimate
    converged to 0.1% relative change (at most 30 matvecs).
    """
    L, _, _ = _power_iteration(Q)
    return L, Q.gamma


def _power_iteration(
    Q: SubsampledQuadratic,
    start: np.ndarray | None = None,
    max_iter: int = 30,
    rtol: float = 1e-3,
) -> tuple[float, np.ndarray, int]:
    """Top eigenvalue of B: (estimate, eigenvector, matvec count).

    ``start`` warm-starts from a previous model's eigenvector; outer loops
    pass the one from the last iteration and typically converge in a few
    matvecs.
    """
    if start is None:
        v = np.random.default_rng(0).standard_normal(Q.d)
    else:
        v = np.asarray(start, dtype=np.float64).copy()
    nrm = float(np.linalg.norm(v))
    if nrm == 0.0:
        v = np.ones(Q.d)
        nrm = float(np.linalg.norm(v))
    v /= nrm
    lam = Q.gamma
    matvecs = 0
    for _ in range(max_iter):
        Bv = quad_matvec(Q, v)
        matvecs += 1
        lam_new = float(v @ Bv)
        nb = float(np.linalg.norm(Bv))
        v = Bv / nb
        if abs(lam_new - lam) <= rtol * abs(lam_new):
            lam = lam_new
            break
        lam = lam_new
    return max(lam, Q.gamma), v, matvecs


def _check_certificate(
    Q: SubsampledQuadratic,
    reg: Regularizer,
    v: np.ndarray,
    alpha: float,
    config: InnerConfig,
) -> tuple[np.ndarray, bool, float, float, int]:
    """Certificate evaluation at v: (v_post, passed, dual, target, evals)."""
    v_post, r = residual_certificate(Q, reg, v, alpha)
    evals = 2 * Q.b
    if config.target is not None and config.target > 0:
        target = config.target
    else:
        lam_post = newton_decrement(Q, v_post)
        evals += Q.b
        target = config.target_rel * lam_post  # type: ignore[operator]
    dual, cg_matvecs = _dual_norm_info(Q, r, config.cert_tol, config.cert_max_iter)
    evals += cg_matvecs * Q.b
    return v_post, dual <= target, dual, target, evals


def _epoch_budgets(config: InnerConfig) -> list[int]:
    if config.mode == "fixed":
        return [config.epochs]
    return [config.epochs * (1 << k) for k in range(config.max_retries + 1)]


def prox_svrg(
    Q: SubsampledQuadratic,
    reg: Regularizer,
    v0: np.ndarray,
    config: InnerConfig,
    rng: np.random.Generator,
) -> InnerReport:
    """Variance-reduced proximal SGD on the model's b-component finite sum.

    Each epoch snapshots the full model gradient (one matvec), then runs m
    steps of the form

        v <- shifted_prox(v - eta * (grad phi_k(v) - grad phi_k(snapshot)
                                     + snapshot_grad))

    with k uniform over slots.  The next snapshot is the last iterate.  With
    a single slot the correction cancels and this is exactly deterministic
    proximal gradient descent.
    """
    if config.lipschitz is not None:
        L, _ = config.lipschitz
        evals = 0
    else:
        L, _, pm = _power_iteration(Q)
        evals = pm * Q.b
    eta = config.step if config.step is not None else 0.1 / L
    alpha = 1.0 / L
    m = config.m if config.m is not None else Q.b
    if m < 1:
        raise ValueError("epoch length m must be at least 1")

    b = Q.b
    anchor = Q.anchor
    rows = Q.rows
    weights = Q.weights
    gamma = Q.gamma
    v = np.asarray(v0, dtype=np.float64).copy()
    history: list[tuple[int, float]] = []
    if config.track_values:
        history.append((evals, subproblem_value(Q, reg, v)))

    certified = False
    dual: float | None = None
    target: float | None = None
    epochs_run = 0
    for budget in _epoch_budgets(config):
        for _ in range(budget):
            snap = v.copy()
            t_snap = rows @ snap
            g_snap = rows.T @ (weights * t_snap) + gamma * snap + Q.g
            evals += b
            ks = rng.integers(0, b, size=m)
            for k in ks:
                cols, vals = Q.data.row(int(Q.idx[k]))
                mult = b * weights[k] * (vals @ v[cols] - t_snap[k])
                direction = g_snap + gamma * (v - snap)
                direction[cols] += mult * vals
                v = shifted_prox(reg, anchor, v - eta * direction, eta)
            evals += 2 * m
            epochs_run += 1
            if config.track_values:
                history.append((evals, subproblem_value(Q, reg, v)))
            if config.mode == "certificate":
                v_post, ok, dual, target, cert_evals = _check_certificate(
                    Q, reg, v, alpha, config
                )
                evals += cert_evals
                v = v_post
                if config.track_values:
                    history.append((evals, subproblem_value(Q, reg, v)))
                if ok:
                    certified = True
                    break
        if certified:
            break
    return InnerReport(
        v=v,
        epochs=epochs_run,
        evals=evals,
        certified=certified,
        dual_norm=dual,
        target=target,
        history=history,
    )


def _alpha_next(alpha: float, q: float) -> float:
    """Positive root of a'^2 + alpha^2 a' - alpha^2 - q alpha = 0.

    The inertial weight recursion; at alpha = sqrt(q) it is a fixed point.
    """
    disc = alpha**4 + 4.0 * (alpha**2 + q * alpha)
    return 0.5 * (-(alpha**2) + np.sqrt(disc))


def _smoothed_model(Q: SubsampledQuadratic, zeta: float, y: np.ndarray) -> SubsampledQuadratic:
    """The model plus (zeta/2)||v - y||^2, folded into gradient and ridge."""
    return SubsampledQuadratic(
        data=Q.data,
        g=Q.g - zeta * y,
        idx=Q.idx,
        weights=Q.weights,
        gamma=Q.gamma + zeta,
        anchor=Q.anchor,
        draws=Q.draws,
    )


def catalyst_solve(
    Q: SubsampledQuadratic,
    reg: Regularizer,
    v0: np.ndarray,
    config: InnerConfig,
    rng: np.random.Generator,
) -> InnerReport:
    """Inertial acceleration around :func:`prox_svrg`.

    Each stage runs ``stage_epochs`` epochs of SVRG on the model smoothed by
    (zeta/2)||v - y||^2 at the current prediction y, then extrapolates.  The
    smoothing weight defaults to max(L_B/b - mu_B, 0), the value that evens
    out the stage condition number against the component count; when that is
    zero the model is already in SVRG's good regime and the plain solver is
    called unchanged (same rng stream, so results are bit-identical to a
    direct call).

    Certificates, when enabled, are always evaluated against the original
    model, never the smoothed one.
    """
    if config.lipschitz is not None:
        L, mu = config.lipschitz
        evals = 0
    else:
        L, _, pm = _power_iteration(Q)
        mu = Q.gamma
        evals = pm * Q.b
    zeta = config.zeta if config.zeta is not None else max(L / Q.b - mu, 0.0)
    if zeta <= 0.0:
        sub = dataclasses.replace(config, lipschitz=(L, mu), use_catalyst=False)
        rep = prox_svrg(Q, reg, v0, sub, rng)
        rep.evals += evals
        return rep

    q = mu / (mu + zeta)
    alpha_mom = np.sqrt(q)
    alpha_cert = 1.0 / L
    stage_step = config.step if config.step is not None else 0.1 / (L + zeta)
    x = np.asarray(v0, dtype=np.float64).copy()
    y = x.copy()
    history: list[tuple[int, float]] = []
    if config.track_values:
        history.append((evals, subproblem_value(Q, reg, x)))

    certified = False
    dual: float | None = None
    target: float | None = None
    epochs_run = 0
    for budget in _epoch_budgets(config):
        while budget > 0:
            stage = min(config.stage_epochs, budget)
            budget -= stage
            stage_cfg = InnerConfig(
                mode="fixed",
                epochs=stage,
                m=config.m,
                step=stage_step,
                lipschitz=(L + zeta, mu + zeta),
            )
            rep = prox_svrg(_smoothed_model(Q, zeta, y), reg, x, stage_cfg, rng)
            x_new = rep.v
            evals += rep.evals
            epochs_run += rep.epochs
            if config.mode == "certificate":
                x_new, ok, dual, target, cert_evals = _check_certificate(
                    Q, reg, x_new, alpha_cert, config
                )
                evals += cert_evals
            else:
                ok = False
            # Nesterov-style extrapolation.
            alpha_next = _alpha_next(alpha_mom, q)
            beta_mom = alpha_mom * (1.0 - alpha_mom) / (alpha_mom**2 + alpha_next)
            y = x_new + beta_mom * (x_new - x)
            x = x_new
            alpha_mom = alpha_next
            if config.track_values:
                history.append((evals, subproblem_value(Q, reg, x)))
            if ok:
                certified = True
                break
        if certified:
            break
    return InnerReport(
        v=x,
        epochs=epochs_run,
        evals=evals,
        certified=certified,
        dual_norm=dual,
        target=target,
        history=history,
    )
