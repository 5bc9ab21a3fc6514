"""Multiplicative-update solvers for KL-divergence factorization.

Four steppers share one skeleton: evaluate the reconstruction at the
nonzeros of ``X``, form count/reconstruction ratios, and rescale the
factors.  The alternating stepper recomputes the reconstruction after its
``W`` update (two evaluations per iteration); the constrained steppers
update both factors from the same reconstruction and renormalize via the
constraint, so they need only one.  ``StepOutcome.recon_evals`` counts
exactly these update-path evaluations; the objective value returned with
each step is monitoring on top and is not counted.

After every multiplicative update, entries are floored at
``epsilon_floor * (column max)`` before any normalization.  Multiplicative
updates cannot revive an exact zero, so the floor keeps topics alive
without disturbing healthy entries; because it is relative to the column
maximum it also commutes with the columnwise rescalings that relate the
constrained solvers to each other.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import DeadTopicError, InfiniteDivergenceError, MonotonicityError
from .objectives import kl_divergence, sparse_objective
from .types import (
    ConstraintMode,
    Factorization,
    FitConfig,
    FitTrace,
    METHOD_MODES,
    MU_METHODS,
    TermDocMatrix,
    normalize_columns,
    reconstruct_nonzeros,
    term_topic_sums,
    topic_doc_sums,
)

# relative slack on the guaranteed descent before a step is declared broken
DESCENT_SLACK = 1e-9


@dataclass(frozen=True)
class StepOutcome:
    """One solver step: the updated factors, the objective after the step,
    and the number of update-path reconstruction evaluations (1 or 2)."""

    factorization: Factorization
    objective: float
    recon_evals: int


def _checked_ratio(X: TermDocMatrix, W, H) -> np.ndarray:
    recon = reconstruct_nonzeros(X, W, H)
    bad = recon <= 0.0
    if bad.any():
        e = int(np.argmax(bad))
        raise InfiniteDivergenceError(int(X.rows[e]), int(X.cols[e]))
    return X.vals / recon


def _floor_columns(M: np.ndarray, epsilon_floor: float) -> np.ndarray:
    if M.size == 0:
        return M
    return np.maximum(M, epsilon_floor * M.max(axis=0, keepdims=True))


def _require_mode(f: Factorization, mode: ConstraintMode, who: str) -> None:
    if f.constraint_mode != mode:
        raise ValueError(f"{who} requires constraint mode {mode.tag!r}, got {f.constraint_mode.tag!r}")


def mu_step_alternating(
    X: TermDocMatrix,
    f: Factorization,
    *,
    epsilon_floor: float = 1e-12,
    n_threads: int = 1,
) -> StepOutcome:
    """One alternating update on an unconstrained factorization.

    ``W`` moves first against the current reconstruction,

        w_vk <- w_vk * [sum_d x_vd h_kd / (WH)_vd] / [sum_d h_kd],

    then the reconstruction is recomputed with the new ``W`` and

        h_kd <- h_kd * [sum_v x_vd w_vk / (WH)_vd] / [sum_v w_vk].
    """
    _require_mode(f, ConstraintMode.UNCONSTRAINED, "mu_step_alternating")
    W, H = f.W, f.H

    ratio = _checked_ratio(X, W, H)
    h_doc_sums = H.sum(axis=1)
    if np.any(h_doc_sums == 0):
        raise DeadTopicError(int(np.argmax(h_doc_sums == 0)), "zero row sum in H")
    W_new = W * term_topic_sums(X, ratio, H, n_threads) / h_doc_sums[None, :]
    W_new = _floor_columns(W_new, epsilon_floor)

    ratio = _checked_ratio(X, W_new, H)
    w_col_sums = W_new.sum(axis=0)
    if np.any(w_col_sums == 0):
        raise DeadTopicError(int(np.argmax(w_col_sums == 0)), "zero column sum in W")
    H_new = H * topic_doc_sums(X, ratio, W_new, n_threads) / w_col_sums[:, None]
    H_new = _floor_columns(H_new, epsilon_floor)

    updated = Factorization(W_new, H_new, ConstraintMode.UNCONSTRAINED)
    return StepOutcome(updated, kl_divergence(X, W_new, H_new), 2)


def _joint_w_update(X, f, ratio, epsilon_floor, n_threads) -> np.ndarray:
    raw = f.W * term_topic_sums(X, ratio, f.H, n_threads)
    sums = raw.sum(axis=0)
    if np.any(sums == 0):
        raise DeadTopicError(int(np.argmax(sums == 0)), "all update numerators vanished")
    W_new, _ = normalize_columns(_floor_columns(raw, epsilon_floor))
    return W_new


def mu_step_joint_wnorm(
    X: TermDocMatrix,
    f: Factorization,
    *,
    epsilon_floor: float = 1e-12,
    n_threads: int = 1,
) -> StepOutcome:
    """One joint update with the columns of ``W`` on the simplex.

    Both factors move against the same reconstruction:

        w_vk <- normalize_k( w_vk * sum_d x_vd h_kd / (WH)_vd ),
        h_kd <- h_kd * sum_v x_vd w_vk / (WH)_vd,

    where the ``h`` update uses the pre-update ``W``.  With ``W``
    normalized the denominator ``sum_v w_vk`` of the alternating update is
    one, which is what makes the joint move exact.
    """
    _require_mode(f, ConstraintMode.W_SIMPLEX, "mu_step_joint_wnorm")
    ratio = _checked_ratio(X, f.W, f.H)
    W_new = _joint_w_update(X, f, ratio, epsilon_floor, n_threads)
    H_new = _floor_columns(f.H * topic_doc_sums(X, ratio, f.W, n_threads), epsilon_floor)
    updated = Factorization(W_new, H_new, ConstraintMode.W_SIMPLEX)
    return StepOutcome(updated, kl_divergence(X, W_new, H_new), 1)


def mu_step_joint_bothnorm(
    X: TermDocMatrix,
    f: Factorization,
    *,
    epsilon_floor: float = 1e-12,
    n_threads: int = 1,
) -> StepOutcome:
    """One joint update with both factors columnwise on the simplex.

    Same shared reconstruction as :func:`mu_step_joint_wnorm`, but the
    ``h`` update is renormalized per document.  This is exactly the EM
    update of the word/document mixture model.
    """
    _require_mode(f, ConstraintMode.BOTH_SIMPLEX, "mu_step_joint_bothnorm")
    ratio = _checked_ratio(X, f.W, f.H)
    W_new = _joint_w_update(X, f, ratio, epsilon_floor, n_threads)
    raw = f.H * topic_doc_sums(X, ratio, f.W, n_threads)
    sums = raw.sum(axis=0)
    if np.any(sums == 0):
        raise DeadTopicError(int(np.argmax(sums == 0)), "document column collapsed")
    H_new, _ = normalize_columns(_floor_columns(raw, epsilon_floor))
    updated = Factorization(W_new, H_new, ConstraintMode.BOTH_SIMPLEX)
    return StepOutcome(updated, kl_divergence(X, W_new, H_new), 1)


def mu_step_sparse(
    X: TermDocMatrix,
    f: Factorization,
    lambda_sparsity: float,
    *,
    epsilon_floor: float = 1e-12,
    n_threads: int = 1,
) -> StepOutcome:
    """One joint update for the l1-penalized objective with ``W`` on the simplex.

    Identical to :func:`mu_step_joint_wnorm` except that the ``h`` update
    is scaled by ``1 / (1 + lambda)``; the reported objective includes the
    penalty ``lambda * ||H||_1``.
    """
    _require_mode(f, ConstraintMode.W_SIMPLEX, "mu_step_sparse")
    if lambda_sparsity < 0:
        raise ValueError("lambda_sparsity must be non-negative")
    ratio = _checked_ratio(X, f.W, f.H)
    W_new = _joint_w_update(X, f, ratio, epsilon_floor, n_threads)
    H_new = f.H * topic_doc_sums(X, ratio, f.W, n_threads) / (1.0 + lambda_sparsity)
    H_new = _floor_columns(H_new, epsilon_floor)
    updated = Factorization(W_new, H_new, ConstraintMode.W_SIMPLEX)
    return StepOutcome(updated, sparse_objective(X, W_new, H_new, lambda_sparsity), 1)


# ---------------------------------------------------------------------------
# Driver


def initialize_factorization(X: TermDocMatrix, config: FitConfig) -> Factorization:
    """Seeded random start matching the method's constraint mode.

    Columns of ``W`` are drawn from a flat Dirichlet; ``H`` entries from
    Gamma(1, 1), scaled per document so that ``sum_k h_kd`` matches the
    document total (or one, when ``H`` is constrained to the simplex).
    """
    if config.method not in MU_METHODS:
        raise ValueError(f"initialize_factorization handles methods {MU_METHODS}")
    mode = METHOD_MODES[config.method]
    rng = np.random.default_rng(config.seed)
    W = rng.dirichlet(np.ones(X.n_terms), size=config.n_topics).T
    H = rng.gamma(1.0, 1.0, size=(config.n_topics, X.n_docs))
    H = H / H.sum(axis=0, keepdims=True)
    if mode != ConstraintMode.BOTH_SIMPLEX:
        H = H * X.col_sums[None, :]
    return Factorization(W, H, mode)


def _dispatch(config: FitConfig):
    if config.method == "mu":
        return lambda X, f: mu_step_alternating(
            X, f, epsilon_floor=config.epsilon_floor, n_threads=config.n_threads
        )
    if config.method == "mu-joint":
        return lambda X, f: mu_step_joint_wnorm(
            X, f, epsilon_floor=config.epsilon_floor, n_threads=config.n_threads
        )
    if config.method == "plsa":
        return lambda X, f: mu_step_joint_bothnorm(
            X, f, epsilon_floor=config.epsilon_floor, n_threads=config.n_threads
        )
    if config.method == "sparse":
        return lambda X, f: mu_step_sparse(
            X, f, config.lambda_sparsity, epsilon_floor=config.epsilon_floor, n_threads=config.n_threads
        )
    raise ValueError(f"fit handles methods {MU_METHODS}; use fit_vi for {config.method!r}")


def _objective(X: TermDocMatrix, f: Factorization, config: FitConfig) -> float:
    if config.method == "sparse":
        return sparse_objective(X, f.W, f.H, config.lambda_sparsity)
    return kl_divergence(X, f.W, f.H)


def fit(
    X: TermDocMatrix,
    config: FitConfig,
    init: Factorization | None = None,
) -> tuple[Factorization, FitTrace]:
    """Run the configured stepper until the objective stalls or ``max_iters``.

    Stops when the relative objective change ``|f_n - f_{n-1}| /
    max(1, |f_{n-1}|)`` drops below ``config.rel_tolerance``.  A rise of
    more than ``DESCENT_SLACK`` relative is a broken invariant and raises
    ``MonotonicityError``.  The run is fully determined by ``(seed,
    config, init)``.

    Returns the final factorization together with the per-iteration trace.
    """
    step = _dispatch(config)
    f = init if init is not None else initialize_factorization(X, config)
    expected_mode = METHOD_MODES[config.method]
    if f.constraint_mode != expected_mode:
        raise ValueError(
            f"method {config.method!r} expects constraint mode {expected_mode.tag!r}, "
            f"got {f.constraint_mode.tag!r}"
        )
    if f.n_topics != config.n_topics:
        raise ValueError(f"init has {f.n_topics} topics, config expects {config.n_topics}")

    previous = _objective(X, f, config)
    trace = FitTrace()
    for _ in range(config.max_iters):
        started = time.perf_counter()
        outcome = step(X, f)
        trace.append(outcome.objective, outcome.recon_evals, time.perf_counter() - started)
        f = outcome.factorization
        scale = max(1.0, abs(previous))
        if outcome.objective > previous + DESCENT_SLACK * scale:
            raise MonotonicityError(
                f"no progress: objective rose from {previous!r} to {outcome.objective!r}"
            )
        if abs(outcome.objective - previous) / scale < config.rel_tolerance:
            break
        previous = outcome.objective
    return f, trace
