"""The sampled quadratic model and its certificate machinery.

One outer iteration freezes a model of the smooth part around the anchor
point w_t:

    f_sub(v) = g @ v + (1/2) v @ B v,      B = sum_k c_k x_k x_k^T + gamma I

over stored sample slots k (duplicates merged), plus the shifted penalty
v -> R(anchor + v).  B is never materialized; everything below works through
matvecs against the slot rows.

The model is also a finite sum: with b the slot count and components

    phi_k(v) = g @ v + (b c_k / 2) (x_k @ v)^2 + (gamma/2) ||v||^2,

the b-average of component gradients is exactly g + B v, which is what the
stochastic inner solvers consume.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .data import SparseDataset
from .objectives import Regularizer, reg_value, shifted_prox

__all__ = [
    "SubsampledQuadratic",
    "quad_matvec",
    "subproblem_value",
    "component_gradient",
    "newton_decrement",
    "residual_certificate",
    "dual_norm_estimate",
]


@dataclass(eq=False)
class SubsampledQuadratic:
    """Frozen quadratic model of the smooth part at one anchor point.

    Parameters
    ----------
    data:
        The dataset the slot indices point into.
    g:
        Full gradient of the smooth part at the anchor.
    idx:
        Row indices of the stored slots, duplicates already merged.
    weights:
        Nonnegative slot weights c_k (curvature over inclusion probability;
        merged duplicates sum their weights).
    gamma:
        Ridge added to the sampled curvature term.
    anchor:
        The outer iterate w_t; the penalty is evaluated at anchor + v.
    draws:
        Nominal with-replacement draw count before merging (reporting only).
    """

    data: SparseDataset
    g: np.ndarray
    idx: np.ndarray
    weights: np.ndarray
    gamma: float
    anchor: np.ndarray
    draws: int
    _rows: sparse.csr_matrix | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        self.g = np.ascontiguousarray(self.g, dtype=np.float64)
        self.idx = np.ascontiguousarray(self.idx, dtype=np.int64)
        self.weights = np.ascontiguousarray(self.weights, dtype=np.float64)
        self.anchor = np.ascontiguousarray(self.anchor, dtype=np.float64)
        d = self.data.d
        if self.g.shape != (d,) or self.anchor.shape != (d,):
            raise ValueError("gradient/anchor dimension does not match the data")
        if self.idx.shape != self.weights.shape:
            raise ValueError("idx and weights must have equal length")
        if len(self.idx) == 0:
            raise ValueError("model needs at least one sample slot")
        if np.any(self.weights < 0):
            raise ValueError("slot weights must be nonnegative")
        if not self.gamma > 0:
            raise ValueError("model ridge gamma must be positive")

    @property
    def b(self) -> int:
        """Number of stored slots; the finite-sum component count."""
        return int(len(self.idx))

    @property
    def d(self) -> int:
        return self.data.d

    @property
    def rows(self) -> sparse.csr_matrix:
        """Slot rows as a b x d CSR matrix (cached)."""
        if self._rows is None:
            self._rows = self.data.matrix[self.idx]
        return self._rows


def quad_matvec(Q: SubsampledQuadratic, v: np.ndarray) -> np.ndarray:
    """B @ v through the slot rows: X_B^T (c * (X_B v)) + gamma v."""
    v = np.asarray(v, dtype=np.float64)
    t = Q.rows @ v
    return Q.rows.T @ (Q.weights * t) + Q.gamma * v


def subproblem_value(Q: SubsampledQuadratic, reg: Regularizer, v: np.ndarray) -> float:
    """Model objective g@v + v@Bv/2 + R(anchor + v) - R(anchor).

    R is measured relative to the anchor so that v = 0 always scores 0; the
    offset cancels in every gap the solvers compare.
    """
    v = np.asarray(v, dtype=np.float64)
    t = Q.rows @ v
    quad = float(Q.weights @ (t * t)) + Q.gamma * float(v @ v)
    pen = reg_value(reg, Q.anchor + v) - reg_value(reg, Q.anchor)
    return float(Q.g @ v) + 0.5 * quad + pen


def component_gradient(Q: SubsampledQuadratic, k: int, v: np.ndarray) -> np.ndarray:
    """Gradient of component phi_k at v; the b-average over k is g + B v."""
    if not 0 <= k < Q.b:
        raise IndexError(f"component index {k} out of range [0, {Q.b})")
    v = np.asarray(v, dtype=np.float64)
    cols, vals = Q.data.row(int(Q.idx[k]))
    mult = Q.b * Q.weights[k] * float(vals @ v[cols])
    out = Q.g + Q.gamma * v
    out[cols] += mult * vals
    return out


def newton_decrement(Q: SubsampledQuadratic, v: np.ndarray) -> float:
    """sqrt(v @ B v), the model's measure of step length.

    Raises if the quadratic form comes out negative beyond roundoff, which
    would mean the model lost positive-definiteness.
    """
    v = np.asarray(v, dtype=np.float64)
    t = Q.rows @ v
    q = float(Q.weights @ (t * t)) + Q.gamma * float(v @ v)
    scale = Q.gamma * float(v @ v) + 1.0
    if q < -1e-12 * scale:
        raise RuntimeError(f"negative curvature {q} in decrement; model is not PSD")
    return float(np.sqrt(max(q, 0.0)))


def residual_certificate(
    Q: SubsampledQuadratic,
    reg: Regularizer,
    v_in: np.ndarray,
    alpha: float,
) -> tuple[np.ndarray, np.ndarray]:
    """One prox-gradient step on the model and its exact subgradient residual.

    Returns ``(v_post, r)`` where v_post is the post-prox point and

        r = (1/alpha) (v_in - v_post) - B (v_in - v_post)

    satisfies r in grad f_sub(v_post) + subdiff R(anchor + v_post) exactly, by
    the prox optimality condition; this holds for every alpha > 0, though
    alpha = 1/L_B is the natural choice.  The certified direction is v_post,
    not v_in: callers that accept the certificate must also accept the point.
    """
    if alpha <= 0:
        raise ValueError(f"certificate step alpha must be positive, got {alpha}")
    v_in = np.asarray(v_in, dtype=np.float64)
    grad = Q.g + quad_matvec(Q, v_in)
    v_post = shifted_prox(reg, Q.anchor, v_in - alpha * grad, alpha)
    diff = v_in - v_post
    r = diff / alpha - quad_matvec(Q, diff)
    return v_post, r


def dual_norm_estimate(
    Q: SubsampledQuadratic,
    r: np.ndarray,
    tol: float = 1e-2,
    max_iter: int = 50,
) -> float:
    """Estimate ||r||_{B^{-1}} = sqrt(r @ B^{-1} r) by conjugate gradients.

    CG runs on B z = r until the residual drops below ``tol * ||r||`` and
    returns sqrt(r @ z).  If CG stalls (iteration cap, or loss of positive
    curvature from roundoff), the guaranteed upper bound ||r||_2 / sqrt(gamma)
    is returned instead, so the result never under-reports against an
    acceptance threshold.
    """
    val, _ = _dual_norm_info(Q, r, tol, max_iter)
    return val


def _dual_norm_info(
    Q: SubsampledQuadratic, r: np.ndarray, tol: float, max_iter: int
) -> tuple[float, int]:
    """(estimate, matvec count) pair backing :func:`dual_norm_estimate`."""
    r = np.asarray(r, dtype=np.float64)
    rnorm = float(np.linalg.norm(r))
    if rnorm == 0.0:
        return 0.0, 0
    fallback = rnorm / np.sqrt(Q.gamma)
    z = np.zeros_like(r)
    res = r.copy()
    p = res.copy()
    rs = float(res @ res)
    matvecs = 0
    for _ in range(max_iter):
        Bp = quad_matvec(Q, p)
        matvecs += 1
        curv = float(p @ Bp)
        if curv <= 0:
            return fallback, matvecs
        step = rs / curv
        z += step * p
        res -= step * Bp
        rs_new = float(res @ res)
        if np.sqrt(rs_new) <= tol * rnorm:
            quad = float(r @ z)
            if quad < 0:
                return fallback, matvecs
            return float(np.sqrt(quad)), matvecs
        p = res + (rs_new / rs) * p
        rs = rs_new
    return fallback, matvecs
