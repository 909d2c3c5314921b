"""Curvature-weighted leverage scores and the Hessian row-sampling plan.

The smooth part's Hessian at an anchor point is X^T D X + gamma I with
D = diag(dvals), dvals_i = f''(u_i; y_i) / n.  Rows are sampled with
probabilities mixing exact leverage scores of D^{1/2} X with a uniform
floor, then reweighted unbiasedly, so the sampled curvature matrix matches
the true one in expectation and, at the planned sample size, spectrally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import SparseDataset
from .objectives import SmoothLoss, objective_terms
from .subproblem import SubsampledQuadratic

__all__ = [
    "CurvatureDiag",
    "SamplingPlan",
    "curvature",
    "leverage_scores",
    "sampling_plan",
    "draw_subsample",
    "exact_model",
]


@dataclass(frozen=True)
class CurvatureDiag:
    """Per-row curvature weights dvals_i = f''(u_i; y_i) / n at one anchor."""

    dvals: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "dvals", np.ascontiguousarray(self.dvals, dtype=np.float64))
        if self.dvals.ndim != 1:
            raise ValueError("dvals must be a vector")
        if np.any(self.dvals < 0) or not np.all(np.isfinite(self.dvals)):
            raise ValueError("dvals must be nonnegative and finite")


def curvature(data: SparseDataset, loss: SmoothLoss, w: np.ndarray) -> CurvatureDiag:
    """Curvature diagonal of the mean loss at w."""
    _, _, _, curvs = objective_terms(data, loss, w)
    return CurvatureDiag(dvals=curvs / data.n)


def leverage_scores(data: SparseDataset, curv: CurvatureDiag) -> np.ndarray:
    """Exact leverage scores of D^{1/2} X: squared row norms of its thin Q.

    Rows with zero curvature get score zero.  The scores of the active rows
    sum to rank(D^{1/2} X), which the caller can rely on to machine accuracy.

    Raises
    ------
    ValueError
        If every row has zero curvature ("Hessian numerically zero"): no
        sampling distribution exists.
    """
    dvals = curv.dvals
    if dvals.shape != (data.n,):
        raise ValueError("curvature length does not match the dataset")
    active = np.flatnonzero(dvals > 0)
    if len(active) == 0:
        raise ValueError("Hessian numerically zero: all rows have zero curvature")
    M = data.matrix[active].toarray() * np.sqrt(dvals[active])[:, None]
    scores = np.zeros(data.n)
    scores[active] = _orthonormal_row_norms_sq(M)
    return scores


def _orthonormal_row_norms_sq(M: np.ndarray) -> np.ndarray:
    """Squared row norms of a thin orthonormal column basis of range(M).

    Unpivoted QR is the fast path; if the R diagonal signals (near) rank
    deficiency the SVD route decides rank from singular values, so scores
    still sum to the numerical rank.
    """
    if M.shape[0] >= M.shape[1]:
        q, r = np.linalg.qr(M, mode="reduced")
        rdiag = np.abs(np.diag(r))
        if rdiag.size and rdiag.min() > 1e-10 * max(rdiag.max(), 1e-300):
            return np.einsum("ij,ij->i", q, q)
    u, s, _ = np.linalg.svd(M, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros(M.shape[0])
    rank = int(np.sum(s > s[0] * max(M.shape) * np.finfo(np.float64).eps))
    u = u[:, :rank]
    return np.einsum("ij,ij->i", u, u)


@dataclass(frozen=True)
class SamplingPlan:
    """Frozen row-sampling distribution for one outer iteration.

    ``b`` is the with-replacement draw count; ``eps_sketch`` the spectral
    sketch accuracy beta/(1-beta) the size formula was solved for.
    """

    scores: np.ndarray
    probs: np.ndarray
    mix_nu: float
    b: int
    eps_sketch: float


def sampling_plan(
    scores: np.ndarray,
    beta: float,
    nu: float = 0.1,
    c_b: float = 4.0,
    d: int | None = None,
    n: int | None = None,
    allow_oversample: bool = False,
) -> SamplingPlan:
    """Mix leverage scores with a uniform floor and size the sample.

    Probabilities are (1 - nu) * scores/sum(scores) + nu/n.  The sample size
    is b = ceil(c_b * d * ln(d + 1) / eps^2) with eps = beta/(1-beta),
    capped at n unless ``allow_oversample`` (with-replacement draws beyond n
    are legal, just pointless at desk scale).

    ``beta`` must lie in (0, 1/3]: above 1/3 the outer loop's decrease
    guarantee has no room left.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if n is None:
        n = len(scores)
    if d is None:
        raise ValueError("sampling_plan needs the feature dimension d")
    if not 0.0 < beta <= 1.0 / 3.0:
        raise ValueError(f"beta must be in (0, 1/3], got {beta}")
    if not 0.0 <= nu < 1.0:
        raise ValueError(f"mixing weight nu must be in [0, 1), got {nu}")
    if n <= 0 or d <= 0:
        raise ValueError("sampling_plan needs positive n and d")
    total = float(scores.sum())
    if total <= 0:
        raise ValueError("leverage scores sum to zero; nothing to sample")
    eps = beta / (1.0 - beta)
    raw = math.ceil(c_b * d * math.log(d + 1) / eps**2)
    b = raw if allow_oversample else min(n, raw)
    if b <= 0:
        raise ValueError("computed sample size is not positive")
    probs = (1.0 - nu) * scores / total + nu / n
    probs = probs / probs.sum()  # renormalize away roundoff
    return SamplingPlan(scores=scores, probs=probs, mix_nu=nu, b=b, eps_sketch=eps)


def draw_subsample(
    data: SparseDataset,
    plan: SamplingPlan,
    curv: CurvatureDiag,
    g: np.ndarray,
    gamma: float,
    anchor: np.ndarray,
    rng: np.random.Generator,
) -> SubsampledQuadratic:
    """Draw b rows with replacement and build the unbiased sampled model.

    Slot weights are count * dvals_i / (b * p_i) after merging duplicate
    rows, which makes E[B] = X^T D X + gamma I exactly, and the merge leaves
    the matrix itself unchanged.
    """
    n = data.n
    if plan.probs.shape != (n,):
        raise ValueError("plan does not match the dataset size")
    picks = rng.choice(n, size=plan.b, replace=True, p=plan.probs)
    uniq, counts = np.unique(picks, return_counts=True)
    weights = counts * curv.dvals[uniq] / (plan.b * plan.probs[uniq])
    return SubsampledQuadratic(
        data=data,
        g=g,
        idx=uniq,
        weights=weights,
        gamma=gamma,
        anchor=anchor,
        draws=plan.b,
    )


def exact_model(
    data: SparseDataset,
    curv: CurvatureDiag,
    g: np.ndarray,
    gamma: float,
    anchor: np.ndarray,
) -> SubsampledQuadratic:
    """Deterministic full-inclusion model: B equals the exact Hessian.

    Every row with positive curvature enters once at weight dvals_i.  Used by
    the exact-Hessian mode, where sampling error must be identically zero.
    """
    idx = np.flatnonzero(curv.dvals > 0)
    if len(idx) == 0:
        raise ValueError("Hessian numerically zero: all rows have zero curvature")
    return SubsampledQuadratic(
        data=data,
        g=g,
        idx=idx,
        weights=curv.dvals[idx].copy(),
        gamma=gamma,
        anchor=anchor,
        draws=data.n,
    )
