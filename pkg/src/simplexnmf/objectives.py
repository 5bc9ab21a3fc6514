"""Objective, likelihood, and bound evaluators.

All values drop additive constants that depend only on the observed counts
(the multinomial "bagging" constant, ``log x!`` terms, and so on), so they
are comparable across iterations of a fit but not across data sets.  The
convention ``0 * log 0 = 0`` is built in: stored entries of a
``TermDocMatrix`` are strictly positive, and absent entries contribute only
through reconstruction totals.
"""

from __future__ import annotations

import numpy as np

from .errors import InfiniteDivergenceError, UnrepresentableTermError
from .specfun import digamma, log_gamma
from .types import (
    Priors,
    TermDocMatrix,
    VariationalState,
    reconstruct_nonzeros,
    reconstruction_total,
)


def _checked_reconstruction(X: TermDocMatrix, W, H, error=InfiniteDivergenceError) -> np.ndarray:
    recon = reconstruct_nonzeros(X, W, H)
    bad = recon <= 0.0
    if bad.any():
        e = int(np.argmax(bad))
        raise error(int(X.rows[e]), int(X.cols[e]))
    return recon


def kl_divergence(X: TermDocMatrix, W, H) -> float:
    """Generalized KL divergence ``sum x log(x / (WH)) - x + (WH)``.

    The sum over ``x log(x/..) - x`` runs over the nonzeros of ``X``; the
    ``+ (WH)`` term is added in closed form over the full matrix.
    """
    recon = _checked_reconstruction(X, W, H)
    x = X.vals
    return float(np.sum(x * np.log(x / recon) - x) + reconstruction_total(W, H))


def plsa_log_likelihood(X: TermDocMatrix, W, H) -> float:
    """Count-weighted log reconstruction ``sum x log (WH)``.

    This is the document/word log-likelihood of the mixture model when both
    factors are column-normalized, but the formula is evaluated for any
    non-negative pair.
    """
    recon = _checked_reconstruction(X, W, H)
    return float(np.sum(X.vals * np.log(recon)))


def sparse_objective(X: TermDocMatrix, W, H, lambda_sparsity: float) -> float:
    """KL divergence plus the l1 penalty ``lambda * sum |h|``."""
    return kl_divergence(X, W, H) + float(lambda_sparsity) * float(np.sum(np.abs(H)))


def joint_aux(X: TermDocMatrix, candidate, anchor) -> float:
    """Majorizer of the KL objective in both factors jointly.

    With responsibilities ``phi_vkd = w'_vk h'_kd / (W'H')_vd`` taken at the
    anchor, returns

        - sum_{v,k,d} x_vd phi_vkd log(w_vk h_kd / phi_vkd) + sum_{v,d} (WH)_vd.

    At ``candidate == anchor`` this equals the KL divergence up to the
    dropped count-only constant ``sum x log x - sum x``.
    """
    W, H = (np.asarray(m, dtype=float) for m in candidate)
    Wa, Ha = (np.asarray(m, dtype=float) for m in anchor)
    recon_anchor = _checked_reconstruction(X, Wa, Ha)
    # per-entry topic responsibilities at the anchor, shape (nnz, K)
    phi = (Wa[X.rows, :] * Ha[:, X.cols].T) / recon_anchor[:, None]
    cand = W[X.rows, :] * H[:, X.cols].T
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.where(phi > 0, phi * np.log(cand / np.where(phi > 0, phi, 1.0)), 0.0)
    weighted = X.vals[:, None] * logs
    return float(-np.sum(weighted) + reconstruction_total(W, H))


# ---------------------------------------------------------------------------
# Posterior expectations of the topic weights


def expected_log_h_dirichlet(beta) -> np.ndarray:
    """``exp(E[log h])`` under columnwise Dirichlet(beta_d): ``exp(psi(beta) - psi(sum_k beta))``."""
    beta = np.asarray(beta, dtype=float)
    if beta.ndim != 2 or np.any(beta <= 0):
        raise ValueError("beta must be a strictly positive 2-d array")
    return np.exp(digamma(beta) - digamma(beta.sum(axis=0, keepdims=True)))


def expected_log_h_gamma(beta, b_rate) -> np.ndarray:
    """``exp(E[log h])`` under entrywise Gamma(beta, b): ``exp(psi(beta)) / b``."""
    beta = np.asarray(beta, dtype=float)
    b = np.asarray(b_rate, dtype=float)
    if beta.ndim != 2 or np.any(beta <= 0):
        raise ValueError("beta must be a strictly positive 2-d array")
    if b.shape != beta.shape or np.any(b <= 0):
        raise ValueError("b_rate must be strictly positive with the same shape as beta")
    return np.exp(digamma(beta)) / b


# ---------------------------------------------------------------------------
# Variational lower bounds


def lda_elbo(X: TermDocMatrix, W, priors: Priors, state: VariationalState) -> float:
    """Variational bound of the Dirichlet topic model, count-only constants dropped.

    The responsibilities are the optimal ``phi_vkd ∝ w_vk h~_kd``, for which
    the mixture term collapses to ``sum x log (W h~)``:

        sum_{v,d} x log (W h~)_vd
        + sum_d [ logG(sum alpha) - logG(sum beta_d) ]
        + sum_{k,d} [ logG(beta) - logG(alpha) + (alpha - beta) E[log h] ].
    """
    beta = state.beta
    alpha = priors.alpha
    elog = digamma(beta) - digamma(beta.sum(axis=0, keepdims=True))
    h_tilde = np.exp(elog)
    recon = _checked_reconstruction(X, W, h_tilde, error=UnrepresentableTermError)
    mixture = float(np.sum(X.vals * np.log(recon)))
    per_doc = log_gamma(float(alpha.sum())) - log_gamma(beta.sum(axis=0))
    per_cell = log_gamma(beta) - log_gamma(alpha)[:, None] + (alpha[:, None] - beta) * elog
    return mixture + float(per_doc.sum()) + float(per_cell.sum())


def gap_elbo(X: TermDocMatrix, W, priors: Priors, state: VariationalState) -> float:
    """Variational bound of the Gamma topic-weight model, count-only constants dropped.

    Uses ``E[h] = beta / b`` and ``E[log h] = psi(beta) - log b``; the
    unnormalized weights add ``- sum E[h]`` and the Gamma entropy terms:

        sum_{v,d} x log (W h~)_vd - sum_{k,d} E[h]
        + sum_{k,d} [ alpha log a - beta log b ]
        + sum_{k,d} [ logG(beta) - logG(alpha) + (alpha - beta) E[log h] + (b - a) E[h] ].
    """
    if state.b_rate is None:
        raise ValueError("gap_elbo requires a state with b_rate")
    if priors.rate_a is None:
        raise ValueError("gap_elbo requires priors with rate_a")
    beta, b = state.beta, state.b_rate
    alpha, a = priors.alpha, priors.rate_a
    elog = digamma(beta) - np.log(b)
    eh = beta / b
    h_tilde = np.exp(elog)
    recon = _checked_reconstruction(X, W, h_tilde, error=UnrepresentableTermError)
    mixture = float(np.sum(X.vals * np.log(recon)))
    per_cell = (
        -eh
        + (alpha * np.log(a))[:, None]
        - beta * np.log(b)
        + log_gamma(beta)
        - log_gamma(alpha)[:, None]
        + (alpha[:, None] - beta) * elog
        + (b - a[:, None]) * eh
    )
    return mixture + float(per_cell.sum())


# ---------------------------------------------------------------------------
# Marginal likelihoods of the single-document generative models


def poisson_marginal_loglik(x, W, h) -> float:
    """Log marginal of independent Poisson counts with mean ``(Wh)_v``.

    Includes the ``exp(-sum (Wh))`` and ``1/x!`` factors.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    y = np.asarray(W, dtype=float) @ np.asarray(h, dtype=float).reshape(-1)
    if np.any(x < 0):
        raise ValueError("counts must be non-negative")
    pos = x > 0
    if np.any(pos & (y <= 0)):
        raise InfiniteDivergenceError(int(np.argmax(pos & (y <= 0))))
    ll = -float(y.sum()) - float(log_gamma(x + 1.0).sum())
    ll += float(np.sum(x[pos] * np.log(y[pos])))
    return ll


def multinomial_marginal_loglik(x, W, h, n_total) -> float:
    """Log marginal of multinomial counts with cell probabilities ``(Wh) / sum(Wh)``."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if np.any(x < 0):
        raise ValueError("counts must be non-negative")
    if abs(float(x.sum()) - float(n_total)) > 1e-9 * max(1.0, float(n_total)):
        raise ValueError(f"count mismatch: entries sum to {x.sum()}, expected {n_total}")
    y = np.asarray(W, dtype=float) @ np.asarray(h, dtype=float).reshape(-1)
    total = float(y.sum())
    pos = x > 0
    if np.any(pos & (y <= 0)) or (pos.any() and total <= 0):
        raise InfiniteDivergenceError(int(np.argmax(pos & (y <= 0))))
    ll = float(log_gamma(float(n_total) + 1.0)) - float(log_gamma(x + 1.0).sum())
    ll += float(np.sum(x[pos] * np.log(y[pos] / total)))
    return ll
