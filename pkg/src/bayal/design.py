"""Uncertainty screening plus Bayesian D-optimal selection, and the sequential loop."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .inference import (
    MAPConvergenceError,
    PriorSamplePool,
    PriorSpec,
    WeightDegeneracyError,
    importance_weights,
    map_estimate,
    phi1_for_candidates,
    prior_median,
    sample_prior,
)
from .model import (
    BetaVector,
    ClassifierRule,
    NotRepresentableError,
    ThetaParams,
    as_beta_array,
    augment,
    beta_to_theta,
    boundary_distance,
    predict_prob_beta,
    theta_to_beta,
)
from .pool import Pool

log = logging.getLogger(__name__)


class EmptyPoolError(ValueError):
    pass


class DesignDegenerateError(RuntimeError):
    """Every candidate has a rank-deficient design; ``records`` holds the stages run so far."""

    def __init__(self, message, records=None):
        super().__init__(message)
        self.records = list(records or [])


@dataclass
class EngineConfig:
    M_prior: int = 1000
    k_cap: Optional[int] = None  # None means 4p
    efficiency: float = 0.8
    fallback_tol: float = 1e-3
    stop_tol: float = 1e-9
    singular_rel_tol: float = kernels.SINGULAR_REL_TOL
    map_random_starts: int = 4
    map_max_iter: int = 500
    map_gtol: float = 1e-6

    def cap(self, p: int) -> int:
        return self.k_cap if self.k_cap is not None else 4 * p


@dataclass
class StageRecord:
    """One query. ``estimate`` selected the point; ``fitted`` includes its label."""

    stage: int
    chosen_idx: int
    label: int
    n_labeled: int
    estimate: BetaVector
    fitted: BetaVector
    criterion_value: float
    fallback_used: bool
    k_n: int
    augmented: bool = False

    @property
    def theta(self) -> Optional[ThetaParams]:
        try:
            return beta_to_theta(self.estimate)
        except NotRepresentableError:
            return None


@dataclass
class RunResult:
    records: list
    initial_estimate: BetaVector
    pool: Pool
    stopped_early: bool = False
    prior_pool: Optional[PriorSamplePool] = field(default=None, repr=False)

    @property
    def final_estimate(self) -> BetaVector:
        return self.records[-1].fitted if self.records else self.initial_estimate


def warm_start_indices(N: int, n0: int, seed) -> np.ndarray:
    """The ``n0`` warm-start points: a uniform draw without replacement."""
    if not 0 <= n0 <= N:
        raise ValueError(f"n0={n0} outside [0, {N}]")
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(3)[0])
    return np.sort(rng.permutation(N)[:n0])


def uncertainty_scores(beta, pool: Pool, omega: float):
    """``|F(x) - omega|`` for every unlabeled point; returns ``(indices, scores)``."""
    idx = pool.unlabeled_idx()
    return idx, np.abs(predict_prob_beta(beta, pool.features[idx]) - omega)


def _sorted_by(idx, keys):
    order = np.lexsort((idx, keys))
    return idx[order], keys[order]


def candidate_set(beta, pool: Pool, omega: float, k_cap: int, efficiency: float = 0.8):
    """Top uncertainty points, cut at the smallest size reaching the D-efficiency threshold.

    ``k_n`` is the smallest ``k`` in ``[p+1, k_cap]`` whose top-``k`` design
    has ``(det I_k / det I_cap)^(1/(p+1)) >= efficiency`` at ``beta``.
    Returns ``(candidates, k_n)`` with candidates ordered by score, then index.
    """
    idx, scores = uncertainty_scores(beta, pool, omega)
    if idx.size == 0:
        raise EmptyPoolError("no unlabeled points left")
    if k_cap < 1:
        raise ValueError("k_cap must be at least 1")
    idx, scores = _sorted_by(idx, scores)
    q = pool.p + 1
    if idx.size <= q:
        return idx, int(idx.size)
    kc = min(k_cap, idx.size)
    b = as_beta_array(beta)[None]
    Xt = augment(pool.features[idx[:kc]])
    ld_cap = kernels.logdet_info(b, Xt)[0]
    k_n = kc
    if np.isfinite(ld_cap):
        for k in range(q, kc):
            ld = kernels.logdet_info(b, Xt[:k])[0]
            if np.isfinite(ld) and np.exp((ld - ld_cap) / q) >= efficiency:
                k_n = k
                break
    return idx[:k_n], int(k_n)


def information_is_singular(beta, X, rel_tol: float = kernels.SINGULAR_REL_TOL) -> bool:
    b = as_beta_array(beta)
    if len(X) == 0:
        return True
    info = kernels.info_matrices(b[None], augment(X))[0]
    return bool(kernels.logdet(info, rel_tol) == -np.inf)


def select_next(pool: Pool, candidates, pool_samples: PriorSamplePool, beta_hat, rel_tol=kernels.SINGULAR_REL_TOL):
    """Pick the candidate maximizing the Bayesian D-criterion.

    With a nonsingular information matrix at ``beta_hat`` over the labeled
    points the base design is the labeled set; otherwise it is the labeled
    set plus every candidate. Returns ``(index, criterion, augmented)``.
    """
    candidates = np.asarray(candidates, dtype=int)
    if candidates.size == 0:
        raise ValueError("empty candidate set")
    X_lab = pool.features[np.asarray(pool.labeled_idx, dtype=int)].reshape(-1, pool.p)
    augmented = information_is_singular(beta_hat, X_lab, rel_tol)
    X_base = np.vstack([X_lab, pool.features[candidates]]) if augmented else X_lab
    values = phi1_for_candidates(pool_samples, X_base, pool.features[candidates])
    if candidates.size == 1:
        return int(candidates[0]), float(values[0]), augmented
    if np.all(np.isneginf(values)):
        raise DesignDegenerateError("design degenerate: every candidate gives a singular information matrix")
    # candidates arrive in (score, index) order, so the first maximum wins ties
    best = int(np.argmax(values))
    return int(candidates[best]), float(values[best]), augmented


def nearest_to_boundary(beta, pool: Pool, level: float) -> int:
    idx = pool.unlabeled_idx()
    d = boundary_distance(beta, level, pool.features[idx])
    idx, _ = _sorted_by(idx, d)
    return int(idx[0])


class _MapFitter:
    """MAP refits seeded per stage; prior median with no labels."""

    def __init__(self, prior: PriorSpec, config: EngineConfig, seed):
        self.prior = prior
        self.config = config
        self.seed = seed

    def __call__(self, data, init: Optional[ThetaParams], stage: int):
        if data.n == 0:
            return prior_median(self.prior), False
        seed = np.random.SeedSequence(self.seed).spawn(3)[2].generate_state(1)[0]
        try:
            theta = map_estimate(
                data,
                self.prior,
                init,
                seed=[int(seed), stage],
                n_random_starts=self.config.map_random_starts,
                max_iter=self.config.map_max_iter,
                gtol=self.config.map_gtol,
            )
            return theta, False
        except MAPConvergenceError as err:
            log.debug("stage %d: %s", stage, err)
            return err.best, True


def run_active_learning(
    pool: Pool,
    prior: PriorSpec,
    rule: ClassifierRule,
    budget: int,
    n0: int = 0,
    config: Optional[EngineConfig] = None,
    seed=None,
    prior_pool: Optional[PriorSamplePool] = None,
) -> RunResult:
    """Sequentially query ``budget`` points after an ``n0``-point warm start.

    Each stage refits the MAP estimate, stops when every unlabeled point is
    predicted as 0 or 1, falls back to the nearest-to-boundary point when
    the estimate is unusable, and otherwise screens by uncertainty and
    picks by the Bayesian D-criterion.
    """
    config = config or EngineConfig()
    if n0 < 0 or budget < 0 or n0 + budget > pool.N:
        raise ValueError("need n0 >= 0, budget >= 0 and n0 + budget <= N")
    pool = pool.warm_start(warm_start_indices(pool.N, n0, seed))
    if prior_pool is None:
        prior_pool = sample_prior(prior, config.M_prior, np.random.SeedSequence(seed).spawn(3)[1])
    fit = _MapFitter(prior, config, seed)
    k_cap = config.cap(pool.p)

    theta, map_failed = fit(pool.labeled_set(), None, 0)
    result = RunResult([], theta_to_beta(theta), pool, prior_pool=prior_pool)
    records = result.records
    for stage in range(1, budget + 1):
        unl = pool.unlabeled_idx()
        if unl.size == 0:
            break
        beta = theta_to_beta(theta)
        probs = predict_prob_beta(beta, pool.features[unl])
        tol = config.stop_tol
        if np.all((probs <= tol) | (probs >= 1 - tol)):
            result.stopped_early = True
            break
        try:
            weighted = importance_weights(prior_pool, pool.labeled_set())
            fallback = map_failed or probs.min() > 1 - config.fallback_tol or probs.max() < config.fallback_tol
            if fallback:
                idx = nearest_to_boundary(beta, pool, rule.omega)
                k_n, augmented = 1, False
                X_lab = pool.features[np.asarray(pool.labeled_idx, dtype=int)].reshape(-1, pool.p)
                crit = float(phi1_for_candidates(weighted, X_lab, pool.features[[idx]])[0])
            else:
                cands, k_n = candidate_set(beta, pool, rule.omega, k_cap, config.efficiency)
                idx, crit, augmented = select_next(pool, cands, weighted, beta, config.singular_rel_tol)
        except (DesignDegenerateError, WeightDegeneracyError) as err:
            err.records = list(records)
            raise
        label = pool.query(idx)
        new_theta, map_failed = fit(pool.labeled_set(), theta, stage)
        records.append(
            StageRecord(
                stage=stage,
                chosen_idx=idx,
                label=label,
                n_labeled=len(pool.labeled_idx),
                estimate=beta,
                fitted=theta_to_beta(new_theta),
                criterion_value=crit,
                fallback_used=bool(fallback),
                k_n=int(k_n),
                augmented=bool(augmented),
            )
        )
        theta = new_theta
    return result
