"""Metrics, replication runner and learning-curve aggregation."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import logit

from .baseline import AdslConfig, run_adsl
from .design import DesignDegenerateError, EngineConfig, RunResult, run_active_learning
from .data import DegenerateDataError, SyntheticSpec, elicit_priors, generate_synthetic
from .inference import PriorSpec, WeightDegeneracyError
from .model import (
    ClassifierRule,
    DegenerateBoundaryError,
    ThetaParams,
    boundary_distance,
    classify,
    predict_prob_beta,
)
from .pool import Pool

log = logging.getLogger(__name__)

DEGENERACY_ERRORS = (DesignDegenerateError, WeightDegeneracyError, DegenerateDataError, DegenerateBoundaryError)

RECORD_COLUMNS = ("method", "replication", "stage", "n_labeled", "error", "dist", "k_n", "fallback_used")
CURVE_COLUMNS = ("method", "stage", "n_labeled", "mean_error", "mean_dist", "replications")


def misclassification_error(beta, rule: ClassifierRule, pool: Pool, unlabeled_only: bool = False) -> float:
    """``(gamma * FP + (1 - gamma) * FN) / N`` over the pool against its stored labels."""
    X, y = pool.features, pool.true_labels
    if unlabeled_only:
        idx = pool.unlabeled_idx()
        X, y = X[idx], y[idx]
    if len(y) == 0:
        raise ValueError("empty pool")
    pred = classify(predict_prob_beta(beta, X), rule)
    fp = np.count_nonzero((pred == 1) & (y == 0))
    fn = np.count_nonzero((pred == 0) & (y == 1))
    return float((rule.gamma * fp + (1 - rule.gamma) * fn) / len(y))


def true_boundary_points(theta_true: ThetaParams, level: float, grid_points: int = 61, lo: float = -3.0, hi: float = 3.0):
    """Points with ``x1`` evenly spaced on ``[lo, hi]`` lying on ``F(x; theta_true) = level``."""
    if theta_true.p != 2:
        raise ValueError("the boundary metric is defined for two features")
    w1, w2 = theta_true.weights
    x1 = np.linspace(lo, hi, grid_points)
    x2 = (theta_true.mu + theta_true.sigma * logit(level) - w1 * x1) / w2
    return np.column_stack([x1, x2])


def boundary_dist_metric(beta_hat, theta_true: ThetaParams, level: float = 0.5, grid_points: int = 61) -> float:
    """Sum of squared perpendicular distances from the true boundary grid to the estimated one."""
    T = true_boundary_points(theta_true, level, grid_points)
    d = boundary_distance(beta_hat, level, T)
    return float(np.sum(d * d))


@dataclass(frozen=True)
class CurvePoint:
    stage: int
    n_labeled: int
    mean_error: float
    mean_dist: Optional[float]
    replications: int


@dataclass
class LearningCurve:
    method: str
    stages: list = field(default_factory=list)

    def __post_init__(self):
        n = [s.n_labeled for s in self.stages]
        if any(b <= a for a, b in zip(n, n[1:])):
            raise ValueError("n_labeled must be strictly increasing")
        if len({s.replications for s in self.stages}) > 1:
            raise ValueError("replication count must be constant along a curve")

    def errors(self) -> np.ndarray:
        return np.array([s.mean_error for s in self.stages])

    def dists(self) -> np.ndarray:
        return np.array([np.nan if s.mean_dist is None else s.mean_dist for s in self.stages])

    def at_stage(self, stage: int) -> CurvePoint:
        for s in self.stages:
            if s.stage == stage:
                return s
        raise KeyError(stage)


@dataclass(frozen=True)
class MethodSpec:
    """One learner configuration inside a study.

    ``kind`` is ``"proposed"`` or ``"adsl"``; ``omega`` is the screening
    level (uncertainty center or boundary level), ``gamma`` the class cut.
    """

    name: str
    kind: str = "proposed"
    omega: float = 0.5
    gamma: float = 0.5
    n0: int = 0
    k0: int = 20
    estimator: str = "mle-with-map-fallback"

    def __post_init__(self):
        if self.kind not in ("proposed", "adsl"):
            raise ValueError(f"unknown method kind {self.kind!r}")
        ClassifierRule(self.omega, self.gamma)
        if self.n0 < 0:
            raise ValueError("n0 must be non-negative")


@dataclass
class Scenario:
    """What one replication builds and runs.

    ``make_pool(seed)`` returns the replication's pool; a fixed real pool
    ignores the seed (only the warm start is re-randomized). ``theta_true``
    enables the distance metric.
    """

    make_pool: Callable
    methods: Sequence[MethodSpec]
    budget: int
    engine: EngineConfig = field(default_factory=EngineConfig)
    theta_true: Optional[ThetaParams] = None
    grid_points: int = 61
    unlabeled_only: bool = False
    prior: Optional[Callable] = None  # pool -> PriorSpec; elicitation by default

    def __post_init__(self):
        if self.budget < 1:
            raise ValueError("budget must be at least 1")
        if not self.methods:
            raise ValueError("at least one method is needed")
        names = [m.name for m in self.methods]
        if len(set(names)) != len(names):
            raise ValueError("method names must be unique")


def synthetic_scenario(methods, budget=30, spec: Optional[SyntheticSpec] = None, engine=None, **kw) -> Scenario:
    spec = spec or SyntheticSpec()

    def make_pool(seed):
        return generate_synthetic(replace(spec, seed=data_seed(seed)))

    return Scenario(make_pool, list(methods), budget, engine or EngineConfig(), theta_true=spec.theta_true, **kw)


def fixed_pool_scenario(pool: Pool, methods, budget, engine=None, **kw) -> Scenario:
    return Scenario(lambda seed: pool.fresh(), list(methods), budget, engine or EngineConfig(), **kw)


def data_seed(seed) -> np.random.SeedSequence:
    # a stream disjoint from the three the learners spawn
    return np.random.SeedSequence(seed).spawn(4)[3]


def run_method(method: MethodSpec, pool: Pool, prior: PriorSpec, budget: int, engine: EngineConfig, seed) -> RunResult:
    if method.kind == "proposed":
        return run_active_learning(
            pool, prior, ClassifierRule(method.omega, method.gamma), budget, method.n0, engine, seed
        )
    cfg = AdslConfig(k0=method.k0, estimator=method.estimator, omega=method.omega, gamma=method.gamma)
    return run_adsl(pool, cfg, budget, method.n0, seed, prior, engine)


def trajectory(result: RunResult, method: MethodSpec, budget: int, scenario: Scenario, full_pool: Pool) -> list:
    """Per-stage rows for stages 0..budget; an early stop carries its last estimate forward."""
    rule = ClassifierRule(method.omega, method.gamma)
    estimates = [result.initial_estimate] + [r.fitted for r in result.records]
    rows = []
    for stage in range(budget + 1):
        beta = estimates[min(stage, len(estimates) - 1)]
        rec = result.records[stage - 1] if 1 <= stage <= len(result.records) else None
        eval_pool = result.pool if scenario.unlabeled_only else full_pool
        err = misclassification_error(beta, rule, eval_pool, scenario.unlabeled_only)
        dist = None
        if scenario.theta_true is not None:
            dist = boundary_dist_metric(beta, scenario.theta_true, method.gamma, scenario.grid_points)
        rows.append(
            {
                "method": method.name,
                "stage": stage,
                "n_labeled": method.n0 + stage,
                "error": err,
                "dist": dist,
                "k_n": rec.k_n if rec else 0,
                "fallback_used": bool(rec.fallback_used) if rec else False,
            }
        )
    return rows


@dataclass
class StudyResult:
    curves: dict
    records: list
    excluded: list
    seeds: list

    @property
    def n_excluded(self) -> int:
        return len(self.excluded)


def run_replications(scenario: Scenario, M: int, seeds: Optional[Sequence] = None, progress=None) -> StudyResult:
    """Run every method on ``M`` replications; degenerate replications are excluded and reported.

    Methods in one replication share the pool, the prior and (for equal
    ``n0``) the warm start. Curves are pointwise means in replication order.
    """
    if M < 1:
        raise ValueError("M must be at least 1")
    seeds = list(range(M)) if seeds is None else list(seeds)
    if len(seeds) != M:
        raise ValueError("need exactly one seed per replication")
    records, excluded = [], []
    for rep, seed in enumerate(seeds):
        try:
            pool = scenario.make_pool(seed)
            prior = scenario.prior(pool) if scenario.prior else elicit_priors(pool)
            rows = []
            for method in scenario.methods:
                res = run_method(method, pool, prior, scenario.budget, scenario.engine, seed)
                rows.extend(trajectory(res, method, scenario.budget, scenario, pool))
        except DEGENERACY_ERRORS as err:
            log.warning("replication %d (seed %s) excluded: %s", rep, seed, err)
            excluded.append((rep, seed, f"{type(err).__name__}: {err}"))
            continue
        for row in rows:
            row["replication"] = rep
        records.extend(rows)
        if progress:
            progress(rep)
    if excluded:
        log.warning("%d of %d replications excluded", len(excluded), M)
    return StudyResult(aggregate(records, [m.name for m in scenario.methods]), records, excluded, seeds)


def aggregate(records, methods) -> dict:
    curves = {}
    for name in methods:
        rows = [r for r in records if r["method"] == name]
        stages = sorted({r["stage"] for r in rows})
        points = []
        for s in stages:
            sub = [r for r in rows if r["stage"] == s]
            dists = [r["dist"] for r in sub]
            mean_dist = None if any(d is None for d in dists) else float(np.mean(dists))
            points.append(CurvePoint(s, sub[0]["n_labeled"], float(np.mean([r["error"] for r in sub])), mean_dist, len(sub)))
        curves[name] = LearningCurve(name, points)
    return curves


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.12g}"
    return str(v)


def write_records_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RECORD_COLUMNS)
        for r in records:
            w.writerow([_fmt(r[c]) for c in RECORD_COLUMNS])


def write_curves_csv(curves: dict, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CURVE_COLUMNS)
        for name, curve in curves.items():
            for s in curve.stages:
                w.writerow([name, s.stage, s.n_labeled, _fmt(s.mean_error), _fmt(s.mean_dist), s.replications])


def read_curves_csv(path) -> dict:
    curves: dict = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            dist = float(row["mean_dist"]) if row["mean_dist"] else None
            curves.setdefault(row["method"], []).append(
                CurvePoint(int(row["stage"]), int(row["n_labeled"]), float(row["mean_error"]), dist, int(row["replications"]))
            )
    return {k: LearningCurve(k, v) for k, v in curves.items()}


def read_records_csv(path) -> list:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(
                {
                    "method": row["method"],
                    "replication": int(row["replication"]),
                    "stage": int(row["stage"]),
                    "n_labeled": int(row["n_labeled"]),
                    "error": float(row["error"]),
                    "dist": float(row["dist"]) if row["dist"] else None,
                    "k_n": int(row["k_n"]),
                    "fallback_used": bool(int(row["fallback_used"])),
                }
            )
    return out
