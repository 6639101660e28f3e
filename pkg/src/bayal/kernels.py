"""Hot numeric kernels with a numba path and a pure-numpy path.

All kernels work on an augmented design ``Xt`` whose rows are ``(1, x)``
and on stacks of logistic coefficient vectors ``betas`` of shape ``(M, q)``
with ``q = p + 1``.

Two notions of singularity are used:

* :func:`logdet` factors a formed matrix and reports ``-inf`` when a
  Cholesky pivot is at or below ``rel_tol * trace`` (numerical singularity).
* :func:`logdet_info` and :func:`phi1_scores` evaluate ``log det X'WX``
  for the logistic weights ``W = F(1-F) > 0``. Such a matrix is singular
  only when the augmented rows are rank deficient, so when the fast
  Cholesky path fails these kernels fall back to a log-domain evaluation
  (QR of weight-sorted scaled rows, or the dominant Cauchy-Binet term once
  the weights underflow) and return ``-inf`` only for rank-deficient
  designs.

The backend is chosen at import time (see :mod:`bayal._accel`) and can be
switched with :func:`set_backend`.
"""
from __future__ import annotations

import math

import numpy as np

from ._accel import NUMBA_AVAILABLE, njit

SINGULAR_REL_TOL = 1e-12
# fast Cholesky path of the log-det kernels; weaker pivots go to the QR route
FAST_PATH_REL_TOL = 1e-8
RANK_TOL = 1e-10
# below this a scaled QR diagonal is too close to underflow to trust
_QR_FLOOR = 1e-150

_backend = "numba" if NUMBA_AVAILABLE else "numpy"


def get_backend() -> str:
    return _backend


def set_backend(name: str) -> None:
    """Select ``"numba"`` or ``"numpy"`` kernels for subsequent calls."""
    global _backend
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not NUMBA_AVAILABLE:
        raise RuntimeError("numba backend requested but numba is disabled or missing")
    _backend = name


# ---------------------------------------------------------------------------
# numpy implementations


def _bernoulli_var_np(eta):
    # F(1-F) without overflow for large |eta|
    e = np.exp(-np.abs(eta))
    return e / (1.0 + e) ** 2


def _log_bernoulli_var_np(eta):
    a = np.abs(eta)
    return -a - 2.0 * np.log1p(np.exp(-a))


def _loglik_np(betas, Xt, y):
    if Xt.shape[0] == 0:
        return np.zeros(betas.shape[0])
    eta = betas @ Xt.T
    return (eta * y - np.logaddexp(0.0, eta)).sum(axis=1)


def _info_np(betas, Xt):
    M, q = betas.shape
    if Xt.shape[0] == 0:
        return np.zeros((M, q, q))
    W = _bernoulli_var_np(betas @ Xt.T)
    return np.einsum("mn,ni,nj->mij", W, Xt, Xt)


def _chol_np(A, rel_tol):
    """Batched Cholesky returning (L, logdet, ok); failed rows get logdet -inf."""
    M, q, _ = A.shape
    tr = np.trace(A, axis1=1, axis2=2)
    tol = rel_tol * tr
    L = np.zeros_like(A)
    logdet = np.zeros(M)
    ok = tr > 0
    for j in range(q):
        s = A[:, j, j] - np.einsum("mk,mk->m", L[:, j, :j], L[:, j, :j])
        ok &= s > tol
        s = np.where(ok, s, 1.0)
        d = np.sqrt(s)
        L[:, j, j] = d
        logdet += np.log(s)
        if j + 1 < q:
            off = A[:, j + 1 :, j] - np.einsum("mik,mk->mi", L[:, j + 1 :, :j], L[:, j, :j])
            L[:, j + 1 :, j] = off / d[:, None]
    logdet[~ok] = -np.inf
    return L, logdet, ok


def _logdet_np(A, rel_tol):
    return _chol_np(A, rel_tol)[1]


def _robust_logdet_np(Xt, ell):
    """log det of sum_i exp(ell_i) x_i x_i' without forming the matrix."""
    n, q = Xt.shape
    if n < q:
        return -np.inf
    order = np.argsort(-ell, kind="stable")
    ref = ell[order[0]]
    scaled = np.exp(0.5 * (ell[order] - ref))[:, None] * Xt[order]
    diag = np.abs(np.diag(np.linalg.qr(scaled, mode="r")))
    if np.all(diag > _QR_FLOOR):
        return q * ref + 2.0 * np.log(diag).sum()
    # dominant Cauchy-Binet term: greedy independent rows by weight
    basis = np.zeros((0, q))
    total = 0.0
    for i in order:
        v = Xt[i] - basis.T @ (basis @ Xt[i])
        nv = np.linalg.norm(v)
        if nv > RANK_TOL * max(np.linalg.norm(Xt[i]), 1.0):
            total += ell[i] + 2.0 * np.log(nv)
            basis = np.vstack([basis, v / nv])
            if basis.shape[0] == q:
                return total
    return -np.inf


def _logdet_info_np(betas, Xt, rel_tol):
    info = _info_np(betas, Xt)
    ld = _logdet_np(info, rel_tol)
    for u in np.flatnonzero(np.isneginf(ld)):
        ld[u] = _robust_logdet_np(Xt, _log_bernoulli_var_np(Xt @ betas[u]))
    return ld


def _phi1_np(betas, r, Xt_base, cand, rel_tol):
    K = cand.shape[0]
    active = r > 0
    betas, r = betas[active], r[active]
    out = np.zeros(K)
    if betas.shape[0] == 0:
        return out
    base = _info_np(betas, Xt_base)
    W = _bernoulli_var_np(betas @ cand.T)  # (M, K)
    L, ld, ok = _chol_np(base, rel_tol)
    if ok.any():
        v = np.linalg.solve(L[ok], np.broadcast_to(cand.T, (int(ok.sum()),) + cand.T.shape))
        quad = np.einsum("mqk,mqk->mk", v, v)
        out += r[ok] @ (ld[ok, None] + np.log1p(W[ok] * quad))
    bad = np.flatnonzero(~ok)
    if bad.size:
        singular = np.zeros(K, dtype=bool)
        for k in range(K):
            c = cand[k]
            A = base[bad] + W[bad, k][:, None, None] * np.outer(c, c)[None]
            ldk = _logdet_np(A, rel_tol)
            rows = np.vstack([Xt_base, c])
            for j in np.flatnonzero(np.isneginf(ldk)):
                ldk[j] = _robust_logdet_np(rows, _log_bernoulli_var_np(rows @ betas[bad[j]]))
            if np.isneginf(ldk).any():
                singular[k] = True
            else:
                out[k] += r[bad] @ ldk
        out[singular] = -np.inf
    return out


# ---------------------------------------------------------------------------
# numba implementations (plain loops; they also run as Python without numba)


@njit
def _bernoulli_var_nb(eta):
    e = math.exp(-abs(eta))
    return e / ((1.0 + e) * (1.0 + e))


@njit
def _log_bernoulli_var_nb(eta):
    a = abs(eta)
    return -a - 2.0 * math.log1p(math.exp(-a))


@njit
def _loglik_nb(betas, Xt, y):
    M, q = betas.shape
    n = Xt.shape[0]
    out = np.zeros(M)
    for u in range(M):
        acc = 0.0
        for i in range(n):
            eta = 0.0
            for j in range(q):
                eta += betas[u, j] * Xt[i, j]
            if eta > 0:
                sp = eta + math.log1p(math.exp(-eta))
            else:
                sp = math.log1p(math.exp(eta))
            acc += eta * y[i] - sp
        out[u] = acc
    return out


@njit
def _info_one_nb(beta, Xt, out):
    q = beta.shape[0]
    n = Xt.shape[0]
    out[:, :] = 0.0
    for i in range(n):
        eta = 0.0
        for j in range(q):
            eta += beta[j] * Xt[i, j]
        w = _bernoulli_var_nb(eta)
        for a in range(q):
            wa = w * Xt[i, a]
            for b in range(a, q):
                out[a, b] += wa * Xt[i, b]
    for a in range(q):
        for b in range(a + 1, q):
            out[b, a] = out[a, b]


@njit
def _info_nb(betas, Xt):
    M, q = betas.shape
    out = np.zeros((M, q, q))
    for u in range(M):
        _info_one_nb(betas[u], Xt, out[u])
    return out


@njit
def _chol_one_nb(A, L, rel_tol):
    """Factor A into L; return logdet, or -inf when a pivot fails."""
    q = A.shape[0]
    tr = 0.0
    for j in range(q):
        tr += A[j, j]
    if not tr > 0.0:
        return -np.inf
    tol = rel_tol * tr
    logdet = 0.0
    for j in range(q):
        s = A[j, j]
        for k in range(j):
            s -= L[j, k] * L[j, k]
        if not s > tol:
            return -np.inf
        d = math.sqrt(s)
        L[j, j] = d
        logdet += math.log(s)
        for i in range(j + 1, q):
            t = A[i, j]
            for k in range(j):
                t -= L[i, k] * L[j, k]
            L[i, j] = t / d
    return logdet


@njit
def _logdet_nb(A, rel_tol):
    M, q, _ = A.shape
    out = np.empty(M)
    L = np.zeros((q, q))
    for u in range(M):
        out[u] = _chol_one_nb(A[u], L, rel_tol)
    return out


@njit
def _robust_logdet_nb(Xt, ell):
    n, q = Xt.shape
    if n < q:
        return -np.inf
    order = np.argsort(-ell, kind="mergesort")
    ref = ell[order[0]]
    S = np.empty((n, q))
    for i in range(n):
        s = math.exp(0.5 * (ell[order[i]] - ref))
        for j in range(q):
            S[i, j] = s * Xt[order[i], j]
    # Householder QR, diagonal only
    total = 0.0
    good = True
    for j in range(q):
        norm = 0.0
        for i in range(j, n):
            norm += S[i, j] * S[i, j]
        norm = math.sqrt(norm)
        if not norm > _QR_FLOOR:
            good = False
            break
        total += 2.0 * math.log(norm)
        alpha = -norm if S[j, j] >= 0 else norm
        S[j, j] -= alpha
        vnorm2 = 0.0
        for i in range(j, n):
            vnorm2 += S[i, j] * S[i, j]
        if vnorm2 > 0.0:
            for c in range(j + 1, q):
                dot = 0.0
                for i in range(j, n):
                    dot += S[i, j] * S[i, c]
                f = 2.0 * dot / vnorm2
                for i in range(j, n):
                    S[i, c] -= f * S[i, j]
    if good:
        return q * ref + total
    # dominant Cauchy-Binet term: greedy independent rows by weight
    basis = np.zeros((q, q))
    v = np.empty(q)
    m = 0
    total = 0.0
    for t in range(n):
        i = order[t]
        for a in range(q):
            v[a] = Xt[i, a]
        rn = 0.0
        for a in range(q):
            rn += v[a] * v[a]
        rn = math.sqrt(rn)
        for b in range(m):
            dot = 0.0
            for a in range(q):
                dot += basis[b, a] * v[a]
            for a in range(q):
                v[a] -= dot * basis[b, a]
        nv = 0.0
        for a in range(q):
            nv += v[a] * v[a]
        nv = math.sqrt(nv)
        if nv > RANK_TOL * max(rn, 1.0):
            total += ell[i] + 2.0 * math.log(nv)
            for a in range(q):
                basis[m, a] = v[a] / nv
            m += 1
            if m == q:
                return total
    return -np.inf


@njit
def _log_weights_nb(beta, Xt):
    n, q = Xt.shape
    ell = np.empty(n)
    for i in range(n):
        eta = 0.0
        for j in range(q):
            eta += beta[j] * Xt[i, j]
        ell[i] = _log_bernoulli_var_nb(eta)
    return ell


@njit
def _logdet_info_nb(betas, Xt, rel_tol):
    M, q = betas.shape
    out = np.empty(M)
    A = np.zeros((q, q))
    L = np.zeros((q, q))
    for u in range(M):
        _info_one_nb(betas[u], Xt, A)
        ld = _chol_one_nb(A, L, rel_tol)
        if ld == -np.inf:
            ld = _robust_logdet_nb(Xt, _log_weights_nb(betas[u], Xt))
        out[u] = ld
    return out


@njit
def _phi1_nb(betas, r, Xt_base, cand, rel_tol):
    M, q = betas.shape
    K = cand.shape[0]
    nb = Xt_base.shape[0]
    out = np.zeros(K)
    singular = np.zeros(K, dtype=np.bool_)
    base = np.zeros((q, q))
    L = np.zeros((q, q))
    A = np.zeros((q, q))
    v = np.zeros(q)
    w = np.zeros(K)
    rows = np.empty((nb + 1, q))
    rows[:nb] = Xt_base
    for u in range(M):
        ru = r[u]
        if not ru > 0.0:
            continue
        for k in range(K):
            eta = 0.0
            for j in range(q):
                eta += betas[u, j] * cand[k, j]
            w[k] = _bernoulli_var_nb(eta)
        _info_one_nb(betas[u], Xt_base, base)
        ld = _chol_one_nb(base, L, rel_tol)
        if ld > -np.inf:
            # matrix determinant lemma on the factored base
            for k in range(K):
                quad = 0.0
                for i in range(q):
                    t = cand[k, i]
                    for j in range(i):
                        t -= L[i, j] * v[j]
                    v[i] = t / L[i, i]
                    quad += v[i] * v[i]
                out[k] += ru * (ld + math.log1p(w[k] * quad))
        else:
            for k in range(K):
                for a in range(q):
                    for b in range(q):
                        A[a, b] = base[a, b] + w[k] * cand[k, a] * cand[k, b]
                ldk = _chol_one_nb(A, L, rel_tol)
                if ldk == -np.inf:
                    rows[nb] = cand[k]
                    ldk = _robust_logdet_nb(rows, _log_weights_nb(betas[u], rows))
                if ldk > -np.inf:
                    out[k] += ru * ldk
                else:
                    singular[k] = True
    for k in range(K):
        if singular[k]:
            out[k] = -np.inf
    return out


# ---------------------------------------------------------------------------
# dispatch


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def _design(Xt, q):
    Xt = _f64(Xt)
    return Xt.reshape(-1, q)


def loglik(betas, Xt, y):
    """Bernoulli log-likelihood of each row of ``betas`` on ``(Xt, y)``; shape ``(M,)``."""
    betas = _f64(np.atleast_2d(betas))
    Xt, y = _design(Xt, betas.shape[1]), _f64(y)
    if _backend == "numba":
        return _loglik_nb(betas, Xt, y)
    return _loglik_np(betas, Xt, y)


def info_matrices(betas, Xt):
    """Fisher information ``Xt' W Xt`` for each row of ``betas``; shape ``(M, q, q)``."""
    betas = _f64(np.atleast_2d(betas))
    Xt = _design(Xt, betas.shape[1])
    if _backend == "numba":
        return _info_nb(betas, Xt)
    return _info_np(betas, Xt)


def logdet(A, rel_tol=SINGULAR_REL_TOL):
    """Cholesky log determinants of a stack of symmetric matrices, ``-inf`` on a failed pivot."""
    A = _f64(A)
    squeeze = A.ndim == 2
    if squeeze:
        A = A[None]
    out = _logdet_nb(A, rel_tol) if _backend == "numba" else _logdet_np(A, rel_tol)
    return out[0] if squeeze else out


def logdet_info(betas, Xt, rel_tol=FAST_PATH_REL_TOL):
    """``log det I(beta_u; Xt)`` per row of ``betas``; ``-inf`` only for rank-deficient designs."""
    betas = _f64(np.atleast_2d(betas))
    Xt = _design(Xt, betas.shape[1])
    if _backend == "numba":
        return _logdet_info_nb(betas, Xt, rel_tol)
    return _logdet_info_np(betas, Xt, rel_tol)


def phi1_scores(betas, r, Xt_base, cand, rel_tol=FAST_PATH_REL_TOL):
    """Weighted log-det criterion of the base design plus each candidate row.

    Returns ``sum_u r_u * log det I(beta_u; Xt_base + c)`` for every augmented
    candidate row ``c``. Samples with ``r_u == 0`` do not contribute; a
    rank-deficient design makes that candidate ``-inf``.
    """
    betas = _f64(np.atleast_2d(betas))
    q = betas.shape[1]
    r, Xt_base, cand = _f64(r), _design(Xt_base, q), _design(cand, q)
    if _backend == "numba":
        return _phi1_nb(betas, r, Xt_base, cand, rel_tol)
    return _phi1_np(betas, r, Xt_base, cand, rel_tol)
