"""Maps between the differently constrained problems, and fixed-point checks.

Each map is a columnwise rescaling that preserves the reconstruction or
shifts the objective by a known constant, so solutions, iterates, and
fixed points travel between the unconstrained, W-normalized,
both-normalized, penalized, and Bayesian formulations.  Global optimality
itself is not certifiable; everything here is stated and checked at the
level of objective-value identities and one-step residuals.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateColumnError, NumericalError
from .mu import (
    mu_step_alternating,
    mu_step_joint_bothnorm,
    mu_step_joint_wnorm,
    mu_step_sparse,
)
from .types import (
    Factorization,
    Priors,
    TermDocMatrix,
    VariationalState,
    normalize_columns,
)
from .vi import dp_vi_step, gap_vi_step


@dataclass(frozen=True)
class NormalizationMatrix:
    """Diagonal of columnwise p-norms used to absorb a normalization constraint."""

    p: float
    scales: np.ndarray

    def __post_init__(self):
        if not self.p > 0:
            raise ValueError("the norm exponent must be positive")
        scales = np.asarray(self.scales, dtype=float).reshape(-1)
        if np.any(scales <= 0):
            raise ValueError("scales must be strictly positive")
        object.__setattr__(self, "scales", scales)

    def matrix(self) -> np.ndarray:
        return np.diag(self.scales)


def absorb_scaling(W, H) -> tuple[np.ndarray, np.ndarray]:
    """Push the column scales of ``W`` into ``H``: ``(W / s_k, s_k * H)``.

    The product is unchanged; the returned ``W`` is columnwise normalized.
    """
    W = np.asarray(W, dtype=float)
    H = np.asarray(H, dtype=float)
    W_tilde, scales = normalize_columns(W)
    return W_tilde, scales[:, None] * H


def map_c1_to_c2(X: TermDocMatrix, W, H) -> tuple[np.ndarray, np.ndarray]:
    """Rescale topic weights by the document totals: ``h_kd -> h_kd / lambda_d``.

    For a converged (or fixed-point) W-normalized model the result has
    simplex columns, because such models satisfy ``sum_k h_kd =
    lambda_d``; for arbitrary input the rescaling is still exact but the
    columns need not sum to one.
    """
    lam = X.col_sums
    if np.any(lam == 0):
        raise DegenerateColumnError(int(np.argmax(lam == 0)), "document column")
    return np.asarray(W, dtype=float).copy(), np.asarray(H, dtype=float) / lam[None, :]


def map_c2_to_c1(X: TermDocMatrix, W, H) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of :func:`map_c1_to_c2`: ``h_kd -> lambda_d * h_kd``."""
    lam = X.col_sums
    if np.any(lam == 0):
        raise DegenerateColumnError(int(np.argmax(lam == 0)), "document column")
    return np.asarray(W, dtype=float).copy(), np.asarray(H, dtype=float) * lam[None, :]


def map_sparse_solution(W, H, lambda_sparsity: float, direction: str) -> tuple[np.ndarray, np.ndarray]:
    """Move between the plain and l1-penalized problems: ``H -> H / (1 + lambda)``
    (forward) or ``H -> (1 + lambda) H`` (inverse).

    On the mapped pair the penalized objective exceeds the plain objective
    of the original by exactly ``log(1 + lambda) * sum(X)``.
    """
    if lambda_sparsity <= 0:
        raise ValueError("lambda_sparsity must be positive for the solution map")
    W = np.asarray(W, dtype=float).copy()
    H = np.asarray(H, dtype=float)
    if direction == "forward":
        return W, H / (1.0 + lambda_sparsity)
    if direction == "inverse":
        return W, H * (1.0 + lambda_sparsity)
    raise ValueError(f"direction must be 'forward' or 'inverse', got {direction!r}")


def map_gap_lda_state(state: VariationalState, priors: Priors, direction: str) -> VariationalState:
    """Attach or drop the Gamma rates: ``b = 1 + rate_a`` (to_gap) or none (to_lda).

    ``beta`` is carried over untouched.  The iterate/fixed-point identity
    between the two models holds only for a uniform rate vector; a
    non-uniform one triggers a warning.
    """
    if direction == "to_gap":
        if priors.rate_a is None:
            raise ValueError("to_gap requires priors with rate_a")
        if not np.all(priors.rate_a == priors.rate_a[0]):
            warnings.warn(
                "non-uniform rate_a: the Gamma/Dirichlet iterate identity is not guaranteed",
                UserWarning,
                stacklevel=2,
            )
        b = np.broadcast_to((1.0 + priors.rate_a)[:, None], state.beta.shape).copy()
        return VariationalState(state.beta, b)
    if direction == "to_lda":
        return VariationalState(state.beta, None)
    raise ValueError(f"direction must be 'to_gap' or 'to_lda', got {direction!r}")


def absorb_penalty_general(W, H, p: float, penalty, X: TermDocMatrix | None = None):
    """Absorb an lp normalization constraint on ``W`` into the penalty on ``H``.

    With ``s_k = ||w_k||_p``, maps ``(W, H)`` to ``(W / s, s * H)`` and
    evaluates the penalty both as ``penalty(D_p(W) H)`` on the original
    pair and as ``penalty(H~)`` on the mapped pair.  When ``X`` is given,
    the full objectives (KL term included) are compared instead.  The two
    values must agree to 1e-10 relative; disagreement raises
    ``NumericalError``.

    Returns ``(W~, H~, NormalizationMatrix, (value_general, value_constrained))``.
    """
    W = np.asarray(W, dtype=float)
    H = np.asarray(H, dtype=float)
    if not p > 0:
        raise ValueError("the norm exponent must be positive")
    scales = np.sum(np.abs(W) ** p, axis=0) ** (1.0 / p)
    if np.any(scales == 0):
        raise DegenerateColumnError(int(np.argmax(scales == 0)))
    norm = NormalizationMatrix(p, scales)
    W_tilde = W / scales[None, :]
    H_tilde = scales[:, None] * H

    value_general = float(penalty(norm.scales[:, None] * H))
    value_constrained = float(penalty(H_tilde))
    if X is not None:
        from .objectives import kl_divergence

        value_general += kl_divergence(X, W, H)
        value_constrained += kl_divergence(X, W_tilde, H_tilde)
    gap = abs(value_general - value_constrained)
    if gap > 1e-10 * max(1.0, abs(value_general)):
        raise NumericalError(
            f"penalty absorption objectives disagree by {gap!r}: "
            f"{value_general!r} vs {value_constrained!r}"
        )
    return W_tilde, H_tilde, norm, (value_general, value_constrained)


def fixed_point_residual(
    X: TermDocMatrix,
    method: str,
    model,
    priors: Priors | None = None,
    lambda_sparsity: float = 0.0,
    epsilon_floor: float = 1e-12,
) -> float:
    """Max-norm parameter change under one step of the named solver.

    ``model`` is a :class:`Factorization` for the multiplicative methods
    and a ``(W, VariationalState)`` pair for ``lda`` / ``gap``.
    """
    if method in ("mu", "mu-joint", "plsa", "sparse"):
        f: Factorization = model
        if method == "mu":
            out = mu_step_alternating(X, f, epsilon_floor=epsilon_floor)
        elif method == "mu-joint":
            out = mu_step_joint_wnorm(X, f, epsilon_floor=epsilon_floor)
        elif method == "plsa":
            out = mu_step_joint_bothnorm(X, f, epsilon_floor=epsilon_floor)
        else:
            out = mu_step_sparse(X, f, lambda_sparsity, epsilon_floor=epsilon_floor)
        g = out.factorization
        return float(max(np.abs(g.W - f.W).max(), np.abs(g.H - f.H).max()))
    if method in ("lda", "gap"):
        if priors is None:
            raise ValueError("variational residuals require priors")
        W, state = model
        W = np.asarray(W, dtype=float)
        if method == "lda":
            W_new, state_new, _ = dp_vi_step(X, W, priors, state, epsilon_floor=epsilon_floor)
        else:
            W_new, state_new, _ = gap_vi_step(X, W, priors, state, epsilon_floor=epsilon_floor)
        return float(max(np.abs(W_new - W).max(), np.abs(state_new.beta - state.beta).max()))
    raise ValueError(f"unknown method {method!r}")
