"""Constrained logistic model, its two parameterizations and boundary geometry.

The natural parameters ``(mu, sigma, w)`` describe
``F(x) = logistic((w'x - mu) / sigma)`` with ``w`` on the open simplex. The
same model as an ordinary logistic regression has coefficients
``beta = (-mu/sigma, w/sigma)`` acting on ``(1, x)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logit

from . import kernels

WEIGHT_SUM_TOL = 1e-10


class NotRepresentableError(ValueError):
    """Logistic coefficients that have no constrained (mu, sigma, w) form."""


class DegenerateBoundaryError(ValueError):
    """The coefficient vector is zero, so there is no decision hyperplane."""


@dataclass(frozen=True, eq=False)
class ThetaParams:
    mu: float
    sigma: float
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).ravel()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "mu", float(self.mu))
        object.__setattr__(self, "sigma", float(self.sigma))
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if w.size == 0:
            raise ValueError("weights must be nonempty")
        # a single feature carries the whole weight
        if w.size == 1:
            if abs(w[0] - 1.0) > WEIGHT_SUM_TOL:
                raise ValueError("with one feature the weight must be 1")
            return
        if np.any(w <= 0) or np.any(w >= 1):
            raise ValueError("each weight must lie strictly inside (0, 1)")
        if abs(w.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"weights must sum to 1, got {w.sum()!r}")

    @property
    def p(self) -> int:
        return self.weights.size

    def as_array(self) -> np.ndarray:
        return np.concatenate(([self.mu, self.sigma], self.weights))

    def __repr__(self):
        return f"ThetaParams(mu={self.mu:.6g}, sigma={self.sigma:.6g}, weights={np.round(self.weights, 6).tolist()})"


@dataclass(frozen=True, eq=False)
class BetaVector:
    intercept: float
    coefficients: np.ndarray

    def __post_init__(self):
        c = np.array(self.coefficients, dtype=float).ravel()
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)
        object.__setattr__(self, "intercept", float(self.intercept))

    @classmethod
    def from_array(cls, a) -> "BetaVector":
        a = np.asarray(a, dtype=float).ravel()
        return cls(a[0], a[1:])

    @property
    def p(self) -> int:
        return self.coefficients.size

    def as_array(self) -> np.ndarray:
        return np.concatenate(([self.intercept], self.coefficients))

    def __repr__(self):
        return f"BetaVector(intercept={self.intercept:.6g}, coefficients={np.round(self.coefficients, 6).tolist()})"


@dataclass(frozen=True)
class ClassifierRule:
    """Query-selection center ``omega`` and class cut ``gamma``, set independently."""

    omega: float = 0.5
    gamma: float = 0.5

    def __post_init__(self):
        for name in ("omega", "gamma"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must lie strictly inside (0, 1), got {v}")


def as_beta_array(beta) -> np.ndarray:
    if isinstance(beta, BetaVector):
        return beta.as_array()
    if isinstance(beta, ThetaParams):
        return theta_to_beta(beta).as_array()
    return np.asarray(beta, dtype=float).ravel()


def augment(X) -> np.ndarray:
    """Prepend the intercept column: rows ``x`` become ``(1, x)``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return np.hstack([np.ones((X.shape[0], 1)), X])


def _check_dim(x, p):
    if np.shape(x)[-1] != p:
        raise ValueError(f"feature dimension {np.shape(x)[-1]} does not match model dimension {p}")


def predict_prob(theta: ThetaParams, x):
    """P(Y=1 | x) for one feature vector or each row of a matrix."""
    x = np.asarray(x, dtype=float)
    _check_dim(x, theta.p)
    z = x @ theta.weights
    return expit((z - theta.mu) / theta.sigma)


def predict_prob_beta(beta, x):
    b = as_beta_array(beta)
    x = np.asarray(x, dtype=float)
    _check_dim(x, b.size - 1)
    return expit(b[0] + x @ b[1:])


def theta_to_beta(theta: ThetaParams) -> BetaVector:
    return BetaVector(-theta.mu / theta.sigma, theta.weights / theta.sigma)


def beta_to_theta(beta) -> ThetaParams:
    b = as_beta_array(beta)
    coef = b[1:]
    total = coef.sum()
    if not total > 0 or np.any(coef <= 0):
        raise NotRepresentableError("not representable in constrained form: coefficients must be positive")
    sigma = 1.0 / total
    w = coef * sigma
    # absorb rounding so the weights sum to one exactly enough
    w = w / w.sum()
    return ThetaParams(mu=-b[0] * sigma, sigma=sigma, weights=w)


def fisher_information(beta, X) -> np.ndarray:
    """``X' W X`` on the augmented rows of ``X`` with ``W = diag(F(1-F))``."""
    b = as_beta_array(beta)
    X = np.asarray(X, dtype=float)
    X = X.reshape(0, b.size - 1) if X.size == 0 else np.atleast_2d(X)
    _check_dim(X, b.size - 1)
    return kernels.info_matrices(b[None], augment(X))[0]


def classify(prob, rule: ClassifierRule):
    """1 where ``prob > gamma``; a tie goes to class 0."""
    out = (np.asarray(prob) > rule.gamma).astype(int)
    return int(out) if out.ndim == 0 else out


def boundary_distance(beta, level: float, x):
    """Perpendicular distance from ``x`` to the hyperplane ``F(x) = level``."""
    b = as_beta_array(beta)
    norm = np.linalg.norm(b[1:])
    if norm == 0:
        raise DegenerateBoundaryError("degenerate boundary: zero coefficient vector")
    x = np.asarray(x, dtype=float)
    _check_dim(x, b.size - 1)
    return np.abs(b[0] + x @ b[1:] - logit(level)) / norm
