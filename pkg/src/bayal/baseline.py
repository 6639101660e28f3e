"""ADSL comparator: distance screening with a fixed candidate count, local D-optimal pick."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .design import (
    EmptyPoolError,
    RunResult,
    StageRecord,
    _MapFitter,
    _sorted_by,
    warm_start_indices,
)
from .inference import PriorSpec, mle_estimate
from .model import BetaVector, as_beta_array, augment, boundary_distance, theta_to_beta
from .pool import Pool

ESTIMATORS = ("mle-with-map-fallback", "map")


@dataclass(frozen=True)
class AdslConfig:
    """``omega`` is the boundary level used for screening, ``gamma`` the class cut.

    The original method ties both to one value; :meth:`coupled` builds that.
    """

    k0: int = 20
    estimator: str = "mle-with-map-fallback"
    omega: float = 0.5
    gamma: float = 0.5

    def __post_init__(self):
        if self.k0 < 1:
            raise ValueError("k0 must be at least 1")
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"estimator must be one of {ESTIMATORS}")
        for name in ("omega", "gamma"):
            if not 0 < getattr(self, name) < 1:
                raise ValueError(f"{name} must lie strictly inside (0, 1)")

    @classmethod
    def coupled(cls, alpha: float, **kw) -> "AdslConfig":
        return cls(omega=alpha, gamma=alpha, **kw)


def adsl_candidates(beta, pool: Pool, level: float, k0: int) -> np.ndarray:
    """The ``k0`` unlabeled points closest to the ``level`` boundary, ties by index."""
    idx = pool.unlabeled_idx()
    if idx.size == 0:
        raise EmptyPoolError("no unlabeled points left")
    d = boundary_distance(beta, level, pool.features[idx])
    idx, _ = _sorted_by(idx, d)
    return idx[:k0]


def adsl_select(beta, pool: Pool, candidates) -> tuple:
    """Candidate maximizing ``det I(beta; labeled + x)``; the nearest one if all are singular.

    ``candidates`` must be in distance order. Returns ``(index, log det)``.
    """
    candidates = np.asarray(candidates, dtype=int)
    if candidates.size == 0:
        raise ValueError("empty candidate set")
    b = as_beta_array(beta)
    X_lab = pool.features[np.asarray(pool.labeled_idx, dtype=int)].reshape(-1, pool.p)
    ld = kernels.phi1_scores(b[None], np.ones(1), augment(X_lab), augment(pool.features[candidates]))
    if np.all(np.isneginf(ld)):
        return int(candidates[0]), -np.inf
    best = int(np.argmax(ld))
    return int(candidates[best]), float(ld[best])


class _AdslFitter:
    def __init__(self, prior: PriorSpec, config: AdslConfig, map_fit: _MapFitter):
        self.prior = prior
        self.config = config
        self.map_fit = map_fit

    def __call__(self, data, init: Optional[BetaVector], stage: int) -> BetaVector:
        if self.config.estimator == "mle-with-map-fallback" and data.n >= data.p + 1:
            res = mle_estimate(data)
            if res.converged and not res.separated:
                return res.beta
        theta, _ = self.map_fit(data, None, stage)
        return theta_to_beta(theta)


def run_adsl(
    pool: Pool,
    config: AdslConfig,
    budget: int,
    n0: int = 0,
    seed=None,
    prior: Optional[PriorSpec] = None,
    engine=None,
) -> RunResult:
    """The comparator loop on the same pool, warm start and record format as the proposed one.

    There is no saturation stop: distance screening stays informative when
    every fitted probability is 0 or 1.
    """
    from .design import EngineConfig

    if n0 < 0 or budget < 0 or n0 + budget > pool.N:
        raise ValueError("need n0 >= 0, budget >= 0 and n0 + budget <= N")
    if prior is None:
        raise ValueError("a prior is needed for the MAP fallback")
    engine = engine or EngineConfig()
    pool = pool.warm_start(warm_start_indices(pool.N, n0, seed))
    fit = _AdslFitter(prior, config, _MapFitter(prior, engine, seed))

    beta = fit(pool.labeled_set(), None, 0)
    result = RunResult([], beta, pool)
    for stage in range(1, budget + 1):
        unl = pool.unlabeled_idx()
        if unl.size == 0:
            break
        cands = adsl_candidates(beta, pool, config.omega, config.k0)
        idx, crit = adsl_select(beta, pool, cands)
        label = pool.query(idx)
        new_beta = fit(pool.labeled_set(), beta, stage)
        result.records.append(
            StageRecord(
                stage=stage,
                chosen_idx=idx,
                label=label,
                n_labeled=len(pool.labeled_idx),
                estimate=BetaVector.from_array(as_beta_array(beta)),
                fitted=new_beta,
                criterion_value=crit,
                fallback_used=not np.isfinite(crit),
                k_n=int(cands.size),
            )
        )
        beta = new_beta
    return result
