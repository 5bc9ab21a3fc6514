"""Variational solvers for the Dirichlet- and Gamma-prior topic models.

Both steppers work without ever materializing per-word responsibilities:
the expected-log topic weights ``h~ = exp(E[log h])`` stand in for ``H``,
one shared reconstruction ``(W h~)`` at the nonzeros of ``X`` serves both
the ``W`` update and the shape update

    w_vk     <- normalize_k( w_vk * sum_d x_vd h~_kd / (W h~)_vd ),
    beta_kd  <- alpha_k + h~_kd * sum_v x_vd w_vk / (W h~)_vd,

and the per-iteration reconstruction count is 1.  The Gamma variant keeps
its rate parameters pinned at ``b = 1 + a``, which is the stationary value
of the bound in ``b``; with a uniform rate vector its iterates coincide
with the Dirichlet ones because the two ``h~`` differ only by a
per-document constant that cancels everywhere.
"""

from __future__ import annotations

import time

import numpy as np

from .errors import DeadTopicError, InfiniteDivergenceError, MonotonicityError
from .objectives import (
    expected_log_h_dirichlet,
    expected_log_h_gamma,
    gap_elbo,
    lda_elbo,
)
from .types import (
    FitConfig,
    FitTrace,
    Priors,
    TermDocMatrix,
    VariationalState,
    VI_METHODS,
    normalize_columns,
    reconstruct_nonzeros,
    term_topic_sums,
    topic_doc_sums,
)
from .mu import DESCENT_SLACK, _floor_columns


def _vi_core(X, W, h_tilde, alpha, epsilon_floor, n_threads):
    recon = reconstruct_nonzeros(X, W, h_tilde)
    bad = recon <= 0.0
    if bad.any():
        e = int(np.argmax(bad))
        raise InfiniteDivergenceError(int(X.rows[e]), int(X.cols[e]))
    ratio = X.vals / recon
    raw = W * term_topic_sums(X, ratio, h_tilde, n_threads)
    sums = raw.sum(axis=0)
    if np.any(sums == 0):
        raise DeadTopicError(int(np.argmax(sums == 0)), "all update numerators vanished")
    W_new, _ = normalize_columns(_floor_columns(raw, epsilon_floor))
    beta_new = alpha[:, None] + h_tilde * topic_doc_sums(X, ratio, W, n_threads)
    return W_new, beta_new


def dp_vi_step(
    X: TermDocMatrix,
    W,
    priors: Priors,
    state: VariationalState,
    *,
    epsilon_floor: float = 1e-12,
    n_threads: int = 1,
) -> tuple[np.ndarray, VariationalState, int]:
    """One update of the Dirichlet-weight model; returns ``(W', state', recon_evals)``."""
    h_tilde = expected_log_h_dirichlet(state.beta)
    W_new, beta_new = _vi_core(X, np.asarray(W, dtype=float), h_tilde, priors.alpha, epsilon_floor, n_threads)
    return W_new, VariationalState(beta_new), 1


def gap_vi_step(
    X: TermDocMatrix,
    W,
    priors: Priors,
    state: VariationalState,
    *,
    epsilon_floor: float = 1e-12,
    n_threads: int = 1,
) -> tuple[np.ndarray, VariationalState, int]:
    """One update of the Gamma-weight model; the rates ``b`` stay fixed."""
    if state.b_rate is None:
        raise ValueError("gap_vi_step requires a state with b_rate (fixed at 1 + rate_a)")
    h_tilde = expected_log_h_gamma(state.beta, state.b_rate)
    W_new, beta_new = _vi_core(X, np.asarray(W, dtype=float), h_tilde, priors.alpha, epsilon_floor, n_threads)
    return W_new, VariationalState(beta_new, state.b_rate), 1


# ---------------------------------------------------------------------------
# Driver


def initialize_variational(
    X: TermDocMatrix,
    config: FitConfig,
    priors: Priors,
    perturb: bool = False,
) -> tuple[np.ndarray, VariationalState]:
    """Seeded start: Dirichlet columns for ``W``; ``beta = alpha + lambda_d / K``.

    With ``perturb`` the per-document mass ``lambda_d`` is split across
    topics at random instead of evenly.  The Gamma method also pins
    ``b = 1 + rate_a``.
    """
    if config.method not in VI_METHODS:
        raise ValueError(f"initialize_variational handles methods {VI_METHODS}")
    K = config.n_topics
    if priors.n_topics != K:
        raise ValueError(f"priors have {priors.n_topics} topics, config expects {K}")
    rng = np.random.default_rng(config.seed)
    W = rng.dirichlet(np.ones(X.n_terms), size=K).T
    if perturb:
        split = rng.gamma(1.0, 1.0, size=(K, X.n_docs))
        split = split / split.sum(axis=0, keepdims=True)
    else:
        split = np.full((K, X.n_docs), 1.0 / K)
    beta = priors.alpha[:, None] + X.col_sums[None, :] * split
    b_rate = None
    if config.method == "gap":
        if priors.rate_a is None:
            raise ValueError("the gap method requires priors with rate_a")
        b_rate = np.broadcast_to((1.0 + priors.rate_a)[:, None], beta.shape).copy()
    return W, VariationalState(beta, b_rate)


def fit_vi(
    X: TermDocMatrix,
    config: FitConfig,
    priors: Priors,
    w_init: np.ndarray | None = None,
    beta_init: np.ndarray | None = None,
) -> tuple[np.ndarray, VariationalState, FitTrace]:
    """Run the configured variational stepper until the bound stalls.

    The bound is evaluated after every iteration and recorded in the
    trace; it must not decrease by more than ``DESCENT_SLACK`` relative,
    otherwise ``MonotonicityError`` is raised.  Convergence is the same
    relative-change rule as the multiplicative driver.

    Returns ``(W, state, trace)``.
    """
    if config.method not in VI_METHODS:
        raise ValueError(f"fit_vi handles methods {VI_METHODS}; use fit for {config.method!r}")
    if w_init is None or beta_init is None:
        W_default, state_default = initialize_variational(X, config, priors)
        W = W_default if w_init is None else np.array(w_init, dtype=float)
        beta = state_default.beta if beta_init is None else np.array(beta_init, dtype=float)
    else:
        W = np.array(w_init, dtype=float)
        beta = np.array(beta_init, dtype=float)
    if W.shape != (X.n_terms, config.n_topics):
        raise ValueError(f"w_init has shape {W.shape}, expected {(X.n_terms, config.n_topics)}")
    if beta.shape != (config.n_topics, X.n_docs):
        raise ValueError(f"beta_init has shape {beta.shape}, expected {(config.n_topics, X.n_docs)}")
    if config.method == "gap":
        if priors.rate_a is None:
            raise ValueError("the gap method requires priors with rate_a")
        b_rate = np.broadcast_to((1.0 + priors.rate_a)[:, None], beta.shape).copy()
        state = VariationalState(beta, b_rate)
        step = lambda X, W, s: gap_vi_step(
            X, W, priors, s, epsilon_floor=config.epsilon_floor, n_threads=config.n_threads
        )
        bound = lambda W, s: gap_elbo(X, W, priors, s)
    else:
        state = VariationalState(beta)
        step = lambda X, W, s: dp_vi_step(
            X, W, priors, s, epsilon_floor=config.epsilon_floor, n_threads=config.n_threads
        )
        bound = lambda W, s: lda_elbo(X, W, priors, s)

    previous = bound(W, state)
    trace = FitTrace()
    for _ in range(config.max_iters):
        started = time.perf_counter()
        W, state, evals = step(X, W, state)
        value = bound(W, state)
        trace.append(value, evals, time.perf_counter() - started)
        scale = max(1.0, abs(previous))
        if value < previous - DESCENT_SLACK * scale:
            raise MonotonicityError(f"no progress: bound fell from {previous!r} to {value!r}")
        if abs(value - previous) / scale < config.rel_tolerance:
            break
        previous = value
    return W, state, trace
