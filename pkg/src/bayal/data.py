"""Synthetic pools, prior elicitation, and the BUPA / WDBC loaders."""
from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.special import logit

from .inference import PriorSpec
from .model import ThetaParams
from .pool import Pool

log = logging.getLogger(__name__)

PAPER_THETA = ThetaParams(0.5, 1.0, [0.7, 0.3])

# (N, p, positives) of the canonical UCI files as reported for the study
EXPECTED = {
    "bupa": (345, 6, 145),
    "wdbc": (569, 30, 212),
}

BUPA_COLUMNS = ("mcv", "alkphos", "sgpt", "sgot", "gammagt", "drinks")


class DatasetParseError(ValueError):
    pass


class DegenerateDataError(ValueError):
    pass


@dataclass
class SyntheticSpec:
    """Points placed on the iso-probability lines ``F(x) = alpha_j``.

    Level ``j`` (1-based) draws ``x1`` uniformly on
    ``[a0 + step*(j-1), b0 + step*(j-1)]``, solves ``x2`` so that the true
    model gives probability ``alpha_j``, and draws ``Y ~ Bernoulli(alpha_j)``.
    ``level_probs`` defaults to ``j / (levels + 1)`` and ``level_counts`` to
    ``points_per_level`` for every level.
    """

    theta_true: ThetaParams = PAPER_THETA
    points_per_level: int = 5
    levels: int = 19
    a0: float = -3.0
    b0: float = 0.0
    step: float = 0.15
    seed: Optional[int] = None
    level_probs: Optional[Sequence[float]] = None
    level_counts: Optional[Sequence[int]] = None

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("step must be positive")
        if self.levels < 1 or self.points_per_level < 0:
            raise ValueError("levels must be >= 1 and points_per_level >= 0")
        if self.level_probs is not None and len(self.level_probs) != self.levels:
            raise ValueError("level_probs needs one entry per level")
        if self.level_counts is not None and len(self.level_counts) != self.levels:
            raise ValueError("level_counts needs one entry per level")

    def probs(self) -> np.ndarray:
        if self.level_probs is not None:
            return np.asarray(self.level_probs, dtype=float)
        return np.arange(1, self.levels + 1) / (self.levels + 1)

    def counts(self) -> np.ndarray:
        if self.level_counts is not None:
            return np.asarray(self.level_counts, dtype=int)
        return np.full(self.levels, self.points_per_level)

    @property
    def N(self) -> int:
        return int(self.counts().sum())


# points per level for the 1:4 design; sum(c * alpha) / sum(c) = 0.2 exactly
UNEVEN_COUNTS = np.array([35, 22, 16, 12, 8, 6, 4, 3, 2, 2, 1, 1, 1, 1, 1, 1, 1, 1, 1])


def uneven_spec(seed=None, theta_true: ThetaParams = PAPER_THETA, scale: int = 2) -> SyntheticSpec:
    """Synthetic design with a 1:4 expected positive:negative ratio.

    Same level grid as the default design, but most points sit on the low
    levels so that the mean level probability is 0.2; ``scale`` multiplies
    every level count (N = 119 * scale).
    """
    return SyntheticSpec(theta_true=theta_true, seed=seed, level_counts=scale * UNEVEN_COUNTS)


def generate_synthetic(spec: SyntheticSpec) -> Pool:
    if spec.theta_true.p != 2:
        raise ValueError("the synthetic generator needs a two-feature model")
    mu, sigma = spec.theta_true.mu, spec.theta_true.sigma
    w1, w2 = spec.theta_true.weights
    if w2 == 0:
        raise DegenerateDataError("degenerate generator: w2 = 0")
    rng = np.random.default_rng(spec.seed)
    xs, ys = [], []
    for j, (a, n) in enumerate(zip(spec.probs(), spec.counts())):
        lo = spec.a0 + spec.step * j
        hi = spec.b0 + spec.step * j
        x1 = rng.uniform(lo, hi, n)
        x2 = (mu + sigma * logit(a) - w1 * x1) / w2
        xs.append(np.column_stack([x1, x2]))
        ys.append((rng.random(n) < a).astype(int))
    return Pool(np.vstack(xs), np.concatenate(ys))


def elicit_priors(pool, alpha_l: float = 0.05, alpha_u: float = 0.95, w0=None, concentration: float = 1.5) -> PriorSpec:
    """Prior hyperparameters from the spread of ``z = w0'x`` over the pool."""
    X = pool.features if isinstance(pool, Pool) else np.atleast_2d(np.asarray(pool, dtype=float))
    if X.shape[0] == 0:
        raise ValueError("empty pool")
    if not 0 < alpha_l < alpha_u < 1:
        raise ValueError("need 0 < alpha_l < alpha_u < 1")
    p = X.shape[1]
    w0 = np.full(p, 1.0 / p) if w0 is None else np.asarray(w0, dtype=float)
    z = X @ w0
    zl, zu = z.min(), z.max()
    if zu == zl:
        raise DegenerateDataError("degenerate elicitation: z is constant over the pool")
    sigma0 = (zu - zl) / (logit(alpha_u) - logit(alpha_l))
    return PriorSpec(
        mu0=(zl + zu) / 2,
        sigma_mu2=float(np.var(z, ddof=1)) if z.size > 1 else 1.0,
        sigma0=float(sigma0),
        alpha=(concentration,) * p,
    )


@dataclass
class DatasetMeta:
    name: str
    N: int
    p: int
    n_positive: int
    positive_fraction: float
    means: np.ndarray = field(repr=False)
    sds: np.ndarray = field(repr=False)
    correlations: np.ndarray = field(repr=False)
    warnings: list = field(default_factory=list)


def _read_rows(path, n_fields, name):
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != n_fields:
                raise DatasetParseError(f"{name} line {lineno}: expected {n_fields} fields, got {len(row)}")
            rows.append((lineno, [c.strip() for c in row]))
    return rows


def _to_float(value, lineno, name):
    try:
        return float(value)
    except ValueError:
        raise DatasetParseError(f"{name} line {lineno}: non-numeric field {value!r}") from None


def standardize(X):
    means = X.mean(axis=0)
    sds = X.std(axis=0, ddof=1)
    if np.any(sds <= 0):
        raise DegenerateDataError("a feature is constant and cannot be standardized")
    return (X - means) / sds, means, sds


def load_dataset(path, fmt: str):
    """Parse a BUPA or WDBC file into a standardized :class:`Pool` plus metadata.

    BUPA: 6 features and the selector column, selector 2 -> class 1.
    WDBC: id, diagnosis (M -> 1, B -> 0), then 30 features.
    """
    fmt = fmt.lower()
    path = Path(path)
    if fmt == "bupa":
        rows = _read_rows(path, 7, "bupa")
        X = np.array([[_to_float(v, ln, "bupa") for v in r[:6]] for ln, r in rows])
        sel = np.array([_to_float(r[6], ln, "bupa") for ln, r in rows])
        if np.any((sel != 1) & (sel != 2)):
            bad = rows[int(np.flatnonzero((sel != 1) & (sel != 2))[0])][0]
            raise DatasetParseError(f"bupa line {bad}: selector must be 1 or 2")
        y = (sel == 2).astype(int)
    elif fmt == "wdbc":
        rows = _read_rows(path, 32, "wdbc")
        diag = [r[1].upper() for _, r in rows]
        for (ln, _), d in zip(rows, diag):
            if d not in ("M", "B"):
                raise DatasetParseError(f"wdbc line {ln}: diagnosis must be M or B, got {d!r}")
        X = np.array([[_to_float(v, ln, "wdbc") for v in r[2:]] for ln, r in rows])
        y = np.array([d == "M" for d in diag], dtype=int)
    else:
        raise ValueError(f"unknown dataset format {fmt!r}")

    Xs, means, sds = standardize(X)
    corr = np.array([np.corrcoef(Xs[:, j], y)[0, 1] for j in range(Xs.shape[1])])
    meta = DatasetMeta(fmt, X.shape[0], X.shape[1], int(y.sum()), float(y.mean()), means, sds, corr)

    N_exp, p_exp, pos_exp = EXPECTED[fmt]
    if meta.N != N_exp:
        meta.warnings.append(f"expected N={N_exp}, found {meta.N}")
    if meta.n_positive != pos_exp:
        meta.warnings.append(f"expected {pos_exp} positives, found {meta.n_positive}")
    negative = np.flatnonzero(corr < 0)
    if negative.size:
        meta.warnings.append(f"features with negative label correlation: {negative.tolist()}")
    for msg in meta.warnings:
        warnings.warn(f"{fmt}: {msg}", stacklevel=2)
    return Pool(Xs, y), meta


def export_pool_csv(pool: Pool, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{j + 1}" for j in range(pool.p)] + ["y"])
        for x, label in zip(pool.features, pool.true_labels):
            writer.writerow([f"{v:.12g}" for v in x] + [int(label)])
