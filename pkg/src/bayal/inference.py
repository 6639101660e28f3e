"""Priors, posterior, point estimates and the Monte-Carlo Bayesian D-criterion."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional

import numpy as np
from scipy import optimize, stats
from scipy.special import expit, log_softmax, softmax

from . import kernels
from .model import BetaVector, ThetaParams, augment

OUT_OF_SUPPORT = -np.inf

MAP_MAX_ITER = 500
MAP_GTOL = 1e-6
MAP_RANDOM_STARTS = 4


class MAPConvergenceError(RuntimeError):
    """The optimizer hit its iteration cap; ``best`` holds the best iterate."""

    def __init__(self, message, best: ThetaParams, grad_norm: float):
        super().__init__(message)
        self.best = best
        self.grad_norm = grad_norm


class WeightDegeneracyError(RuntimeError):
    pass


@dataclass(frozen=True)
class PriorSpec:
    """Normal on mu (variance ``sigma_mu2``), Exponential on sigma (mean ``sigma0``), Dirichlet on w."""

    mu0: float
    sigma_mu2: float
    sigma0: float
    alpha: tuple

    def __post_init__(self):
        object.__setattr__(self, "alpha", tuple(float(a) for a in np.ravel(self.alpha)))
        if not self.sigma_mu2 > 0:
            raise ValueError("sigma_mu2 must be positive")
        if not self.sigma0 > 0:
            raise ValueError("sigma0 must be positive")
        if not self.alpha or any(not a > 0 for a in self.alpha):
            raise ValueError("every Dirichlet concentration must be positive")

    @property
    def p(self) -> int:
        return len(self.alpha)


@dataclass
class LabeledSet:
    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.y = np.asarray(self.y, dtype=float).ravel()
        if self.X.shape[0] != self.y.size:
            raise ValueError("X and y disagree on the number of rows")
        if np.any((self.y != 0) & (self.y != 1)):
            raise ValueError("labels must be 0 or 1")

    @classmethod
    def empty(cls, p: int) -> "LabeledSet":
        return cls(np.zeros((0, p)), np.zeros(0))

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def append(self, x, label) -> "LabeledSet":
        return LabeledSet(np.vstack([self.X, np.reshape(x, (1, -1))]), np.append(self.y, label))


@dataclass
class PriorSamplePool:
    """Prior draws in both parameterizations plus normalized importance weights."""

    betas: np.ndarray  # (M, p+1)
    weights: np.ndarray  # (M,)
    mu: np.ndarray = field(repr=False)
    sigma: np.ndarray = field(repr=False)
    w: np.ndarray = field(repr=False)

    @property
    def M(self) -> int:
        return self.weights.size

    def with_weights(self, weights) -> "PriorSamplePool":
        return replace(self, weights=np.asarray(weights, dtype=float))

    def median_theta(self) -> ThetaParams:
        """Componentwise median of the draws, weights renormalized to the simplex."""
        w = np.median(self.w, axis=0)
        return ThetaParams(float(np.median(self.mu)), float(np.median(self.sigma)), w / w.sum())


# ---------------------------------------------------------------------------
# posterior


def _coerce_theta(theta):
    """Return (mu, sigma, w) or None when outside the support."""
    if isinstance(theta, ThetaParams):
        return theta.mu, theta.sigma, theta.weights
    mu, sigma, w = theta
    w = np.asarray(w, dtype=float).ravel()
    if not sigma > 0 or np.any(w <= 0) or abs(w.sum() - 1) > 1e-10:
        return None
    if w.size > 1 and np.any(w >= 1):
        return None
    return float(mu), float(sigma), w


def _log_prior(mu, sigma, w, prior: PriorSpec):
    alpha = np.asarray(prior.alpha)
    return (
        -((mu - prior.mu0) ** 2) / (2 * prior.sigma_mu2)
        - sigma / prior.sigma0
        + np.sum((alpha - 1) * np.log(w))
    )


def log_likelihood(theta: ThetaParams, data: LabeledSet) -> float:
    if data.n == 0:
        return 0.0
    eta = (data.X @ theta.weights - theta.mu) / theta.sigma
    return float(np.sum(data.y * eta - np.logaddexp(0.0, eta)))


def log_posterior(theta, data: LabeledSet, prior: PriorSpec) -> float:
    """Unnormalized log posterior of ``theta``; ``OUT_OF_SUPPORT`` outside the domain.

    Constants not depending on theta are dropped.
    """
    parts = _coerce_theta(theta)
    if parts is None:
        return OUT_OF_SUPPORT
    mu, sigma, w = parts
    if w.size != prior.p or (data.n and data.p != w.size):
        raise ValueError("dimension mismatch between theta, data and prior")
    eta = (data.X @ w - mu) / sigma if data.n else np.zeros(0)
    ll = np.sum(data.y * eta - np.logaddexp(0.0, eta))
    return float(ll + _log_prior(mu, sigma, w, prior))


# unconstrained coordinates: (mu, log sigma, v_1..v_{p-1}), w = softmax(v, 0)


def theta_to_unconstrained(theta: ThetaParams) -> np.ndarray:
    lw = np.log(theta.weights)
    return np.concatenate(([theta.mu, np.log(theta.sigma)], lw[:-1] - lw[-1]))


def unconstrained_to_theta(phi) -> ThetaParams:
    phi = np.asarray(phi, dtype=float)
    w = softmax(np.append(phi[2:], 0.0))
    return ThetaParams(phi[0], np.exp(phi[1]), w)


def log_posterior_unconstrained(phi, data: LabeledSet, prior: PriorSpec):
    """Log posterior density of the unconstrained coordinates, with gradient.

    This is ``log_posterior`` plus the log Jacobian ``log sigma + sum log w``
    of the map back to theta. The extra terms keep the mode finite when the
    labels are separable or absent (the Exponential prior alone peaks at
    sigma = 0).
    """
    phi = np.asarray(phi, dtype=float)
    mu, s = phi[0], phi[1]
    sigma = np.exp(s)
    logw = log_softmax(np.append(phi[2:], 0.0))
    w = np.exp(logw)
    alpha = np.asarray(prior.alpha)

    if data.n:
        eta = (data.X @ w - mu) / sigma
        ll = np.sum(data.y * eta - np.logaddexp(0.0, eta))
        g = data.y - expit(eta)
        d_mu = -g.sum() / sigma
        d_s = -(g @ eta)
        d_w = (data.X.T @ g) / sigma
    else:
        ll, d_mu, d_s, d_w = 0.0, 0.0, 0.0, np.zeros(w.size)

    lp = -((mu - prior.mu0) ** 2) / (2 * prior.sigma_mu2) - sigma / prior.sigma0 + np.sum(alpha * logw) + s
    d_mu -= (mu - prior.mu0) / prior.sigma_mu2
    d_s += 1.0 - sigma / prior.sigma0
    d_w = d_w + alpha / w
    # chain rule through the softmax with the last logit pinned at zero
    d_v = w[:-1] * (d_w[:-1] - w @ d_w)
    grad = np.concatenate(([d_mu, d_s], d_v))
    return float(ll + lp), grad


def prior_median(prior: PriorSpec) -> ThetaParams:
    """Componentwise prior median, with the Dirichlet marginals renormalized."""
    alpha = np.asarray(prior.alpha)
    if alpha.size == 1:
        w = np.ones(1)
    else:
        w = stats.beta.median(alpha, alpha.sum() - alpha)
        w = w / w.sum()
    return ThetaParams(prior.mu0, prior.sigma0 * np.log(2.0), w)


def _draw_theta(prior: PriorSpec, size: int, rng: np.random.Generator):
    mu = rng.normal(prior.mu0, np.sqrt(prior.sigma_mu2), size)
    sigma = rng.exponential(prior.sigma0, size)
    w = rng.dirichlet(np.asarray(prior.alpha), size)
    return mu, sigma, w


def _newton_polish(fun, x, gtol, max_iter=50):
    """Newton steps on a finite-difference Hessian of the analytic gradient."""
    f, g = fun(x)
    for _ in range(max_iter):
        if np.max(np.abs(g)) <= gtol:
            break
        h = 1e-6 * np.maximum(1.0, np.abs(x))
        H = np.empty((x.size, x.size))
        for j in range(x.size):
            e = np.zeros_like(x)
            e[j] = h[j]
            H[:, j] = (fun(x + e)[1] - fun(x - e)[1]) / (2 * h[j])
        H = 0.5 * (H + H.T)
        try:
            step = np.linalg.solve(H, -g)
        except np.linalg.LinAlgError:
            break
        t = 1.0
        while t > 1e-8:
            f_new, g_new = fun(x + t * step)
            if f_new <= f + 1e-12 * abs(f):
                break
            t *= 0.5
        else:
            break
        x, f, g = x + t * step, f_new, g_new
    return x, f, g


def map_estimate(
    data: LabeledSet,
    prior: PriorSpec,
    init: Optional[ThetaParams] = None,
    *,
    seed=0,
    n_random_starts: int = MAP_RANDOM_STARTS,
    max_iter: int = MAP_MAX_ITER,
    gtol: float = MAP_GTOL,
) -> ThetaParams:
    """Posterior mode by multi-start quasi-Newton ascent in unconstrained coordinates.

    Starts from the prior median, ``n_random_starts`` prior draws and ``init``
    when given, and keeps the best. Raises :class:`MAPConvergenceError`
    carrying the best iterate when the gradient test is not met.
    """
    if data.n and data.p != prior.p:
        raise ValueError("data and prior disagree on the number of features")
    rng = np.random.default_rng(seed)
    starts = [prior_median(prior)]
    if init is not None:
        starts.insert(0, init)
    if n_random_starts:
        mu, sigma, w = _draw_theta(prior, n_random_starts, rng)
        w = np.clip(w, 1e-6, None)
        starts += [ThetaParams(mu[i], sigma[i], w[i] / w[i].sum()) for i in range(n_random_starts)]

    def neg(phi):
        f, g = log_posterior_unconstrained(phi, data, prior)
        return -f, -g

    best_x, best_f, best_g = None, np.inf, None
    for start in starts:
        x0 = theta_to_unconstrained(start)
        res = optimize.minimize(neg, x0, jac=True, method="BFGS", options={"gtol": gtol, "maxiter": max_iter})
        x, f, g = res.x, res.fun, res.jac
        if np.max(np.abs(g)) > gtol and np.isfinite(f):
            x, f, g = _newton_polish(neg, x, gtol)
        if f < best_f:
            best_x, best_f, best_g = x, f, g

    best = unconstrained_to_theta(best_x)
    gnorm = float(np.max(np.abs(best_g)))
    if not gnorm <= gtol:
        raise MAPConvergenceError(f"MAP did not converge (gradient sup-norm {gnorm:.3g})", best, gnorm)
    return best


# ---------------------------------------------------------------------------
# maximum likelihood


class MLEResult(NamedTuple):
    beta: BetaVector
    converged: bool
    separated: bool
    n_iter: int
    grad_norm: float


def is_separated(data: LabeledSet) -> bool:
    """True when some nonzero beta puts every point on its own label's side (or on the boundary)."""
    if data.n == 0:
        return True
    Xt = augment(data.X)
    s = 2 * data.y - 1
    A = s[:, None] * Xt
    res = optimize.linprog(-A.sum(axis=0), A_ub=-A, b_ub=np.zeros(data.n), bounds=[(-1, 1)] * Xt.shape[1], method="highs")
    return bool(res.status == 0 and -res.fun > 1e-9)


def mle_estimate(data: LabeledSet, init: Optional[BetaVector] = None, *, max_iter=100, gtol=1e-6) -> MLEResult:
    """Unconstrained logistic MLE by damped Newton; flags separated data instead of diverging."""
    q = data.p + 1
    beta = np.zeros(q) if init is None else init.as_array().copy()
    if is_separated(data):
        return MLEResult(BetaVector.from_array(beta), False, True, 0, np.inf)
    Xt = augment(data.X)
    y = data.y

    def ll(b):
        eta = Xt @ b
        return np.sum(y * eta - np.logaddexp(0.0, eta))

    f = ll(beta)
    g = np.full(q, np.inf)
    for it in range(1, max_iter + 1):
        F = expit(Xt @ beta)
        g = Xt.T @ (y - F)
        if np.max(np.abs(g)) <= gtol:
            return MLEResult(BetaVector.from_array(beta), True, False, it - 1, float(np.max(np.abs(g))))
        H = kernels.info_matrices(beta[None], Xt)[0]
        if kernels.logdet(H) == -np.inf:
            return MLEResult(BetaVector.from_array(beta), False, True, it, float(np.max(np.abs(g))))
        step = np.linalg.solve(H, g)
        t = 1.0
        while t > 1e-10:
            f_new = ll(beta + t * step)
            if f_new >= f - 1e-12 * abs(f):
                break
            t *= 0.5
        beta, f = beta + t * step, f_new
    F = expit(Xt @ beta)
    g = Xt.T @ (y - F)
    gn = float(np.max(np.abs(g)))
    return MLEResult(BetaVector.from_array(beta), gn <= gtol, False, max_iter, gn)


# ---------------------------------------------------------------------------
# prior sample pool and the Bayesian D-criterion


def sample_prior(prior: PriorSpec, M: int, seed=None) -> PriorSamplePool:
    if M < 1:
        raise ValueError("M must be at least 1")
    rng = np.random.default_rng(seed)
    mu, sigma, w = _draw_theta(prior, M, rng)
    # Dirichlet draws can underflow to exactly zero for tiny concentrations
    w = np.clip(w, np.finfo(float).tiny, None)
    w = w / w.sum(axis=1, keepdims=True)
    betas = np.column_stack([-mu / sigma, w / sigma[:, None]])
    return PriorSamplePool(betas=betas, weights=np.full(M, 1.0 / M), mu=mu, sigma=sigma, w=w)


def importance_weights(pool: PriorSamplePool, data: LabeledSet) -> PriorSamplePool:
    """Reweight the prior draws by their likelihood on ``data``, normalized to sum 1."""
    if pool.M == 0:
        raise ValueError("empty prior pool")
    if data.n == 0:
        return pool.with_weights(np.full(pool.M, 1.0 / pool.M))
    ll = kernels.loglik(pool.betas, augment(data.X), data.y)
    return pool.with_weights(normalize_log_weights(ll))


def normalize_log_weights(logw) -> np.ndarray:
    logw = np.asarray(logw, dtype=float)
    top = np.max(logw)
    if not np.isfinite(top):
        raise WeightDegeneracyError("all likelihoods vanish; importance weights are undefined")
    r = np.exp(logw - top)
    total = r.sum()
    if not total > 0:
        raise WeightDegeneracyError("importance weights underflow to zero")
    return r / total


def bayes_d_criterion(pool: PriorSamplePool, X) -> float:
    """``sum_u r_u logdet I(beta_u; X)``; ``-inf`` when the design is rank deficient."""
    X = np.asarray(X, dtype=float)
    if X.size == 0:
        return -np.inf
    active = pool.weights > 0
    ld = kernels.logdet_info(pool.betas[active], augment(X))
    if np.isneginf(ld).any():
        return -np.inf
    return float(pool.weights[active] @ ld)


def phi1_for_candidates(pool: PriorSamplePool, X_base, candidates) -> np.ndarray:
    """Bayesian D-criterion of ``X_base`` plus each candidate row, one value per candidate."""
    q = pool.betas.shape[1]
    X_base = np.asarray(X_base, dtype=float).reshape(-1, q - 1)
    active = pool.weights > 0
    return kernels.phi1_scores(pool.betas[active], pool.weights[active], augment(X_base), augment(candidates))
