"""Hot numeric kernels with numba-accelerated and pure-numpy paths.

The backend is chosen once at import time from the ``LAGONN_NUMBA``
environment variable: ``0`` forces the numpy path, ``1`` requires numba
(import fails if it is missing), and unset picks numba when available.
Both paths implement identical formulas; results agree to floating-point
round-off (summation order may differ in the last ulp).

Kernels
-------
- squared Euclidean distance matrix (explicit differences, so identical
  vectors give an exact 0.0)
- contrastive pair cosine loss and its gradient in the adapter matrix
- multinomial logistic-regression loss, gradient, and softmax probabilities
"""

from __future__ import annotations

import math
import os

import numpy as np

_DEGENERATE_MSG = "adapter projected an input to the zero vector"

_flag = os.environ.get("LAGONN_NUMBA", "").strip()
if _flag == "0":
    HAS_NUMBA = False
else:
    try:
        from numba import njit

        HAS_NUMBA = True
    except ImportError:
        if _flag == "1":
            raise ImportError("LAGONN_NUMBA=1 but numba is not installed")
        HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and _flag != "0"


# ---------------------------------------------------------------------------
# numpy reference path
# ---------------------------------------------------------------------------

def _sqdist_matrix_np(queries: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances, shape (q, n)."""
    q = queries.shape[0]
    out = np.empty((q, rows.shape[0]), dtype=np.float64)
    # chunk the broadcast so the (chunk, n, d) temporary stays small
    chunk = max(1, min(1024, int(4_000_000 // max(1, rows.shape[0] * rows.shape[1]))))
    for start in range(0, q, chunk):
        block = queries[start : start + chunk]
        diff = block[:, None, :] - rows[None, :, :]
        out[start : start + chunk] = np.einsum("qnd,qnd->qn", diff, diff)
    return out


def _pair_loss_np(W, X, idx_i, idx_j, targets) -> float:
    U = X[idx_i] @ W.T
    V = X[idx_j] @ W.T
    nu = np.linalg.norm(U, axis=1)
    nv = np.linalg.norm(V, axis=1)
    if np.any(nu == 0.0) or np.any(nv == 0.0):
        raise ValueError(_DEGENERATE_MSG)
    cos = np.einsum("pd,pd->p", U, V) / (nu * nv)
    err = cos - targets
    return float(np.mean(err * err))


def _pair_loss_grad_np(W, X, idx_i, idx_j, targets):
    Xi = X[idx_i]
    Xj = X[idx_j]
    U = Xi @ W.T
    V = Xj @ W.T
    nu = np.linalg.norm(U, axis=1)
    nv = np.linalg.norm(V, axis=1)
    if np.any(nu == 0.0) or np.any(nv == 0.0):
        raise ValueError(_DEGENERATE_MSG)
    inv = 1.0 / (nu * nv)
    cos = np.einsum("pd,pd->p", U, V) * inv
    err = cos - targets
    loss = float(np.mean(err * err))
    g = (2.0 / targets.shape[0]) * err
    dU = g[:, None] * (V * inv[:, None] - (cos / (nu * nu))[:, None] * U)
    dV = g[:, None] * (U * inv[:, None] - (cos / (nv * nv))[:, None] * V)
    grad = dU.T @ Xi + dV.T @ Xj
    return loss, grad


def _softmax_np(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _logreg_probs_np(W, b, X) -> np.ndarray:
    return _softmax_np(X @ W.T + b)


def _logreg_loss_np(W, b, X, y, lam) -> float:
    n = X.shape[0]
    scores = X @ W.T + b
    shifted = scores - scores.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    ce = float(np.mean(log_z - shifted[np.arange(n), y]))
    return ce + (lam / (2.0 * n)) * float(np.sum(W * W))


def _logreg_loss_grad_np(W, b, X, y, lam):
    n = X.shape[0]
    scores = X @ W.T + b
    shifted = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    z = e.sum(axis=1)
    probs = e / z[:, None]
    ce = float(np.mean(np.log(z) - shifted[np.arange(n), y]))
    loss = ce + (lam / (2.0 * n)) * float(np.sum(W * W))
    probs[np.arange(n), y] -= 1.0
    probs /= n
    grad_w = probs.T @ X + (lam / n) * W
    grad_b = probs.sum(axis=0)
    return loss, grad_w, grad_b


NUMPY_KERNELS = {
    "sqdist_matrix": _sqdist_matrix_np,
    "pair_loss": _pair_loss_np,
    "pair_loss_grad": _pair_loss_grad_np,
    "logreg_probs": _logreg_probs_np,
    "logreg_loss": _logreg_loss_np,
    "logreg_loss_grad": _logreg_loss_grad_np,
}


# ---------------------------------------------------------------------------
# numba path
# ---------------------------------------------------------------------------

NUMBA_KERNELS = None

if HAS_NUMBA:

    @njit(cache=True)
    def _sqdist_matrix_nb(queries, rows):
        q, d = queries.shape
        n = rows.shape[0]
        out = np.empty((q, n), dtype=np.float64)
        for i in range(q):
            for j in range(n):
                acc = 0.0
                for k in range(d):
                    t = queries[i, k] - rows[j, k]
                    acc += t * t
                out[i, j] = acc
        return out

    @njit(cache=True)
    def _pair_terms_nb(W, X, idx_i, idx_j, targets, grad, want_grad):
        n_rows = X.shape[0]
        d = W.shape[0]
        n_pairs = idx_i.shape[0]
        # project each referenced row once: rows typically own many pairs,
        # so this turns O(pairs * d^2) work into O(rows * d^2 + pairs * d)
        used = np.zeros(n_rows, dtype=np.uint8)
        for p in range(n_pairs):
            used[idx_i[p]] = 1
            used[idx_j[p]] = 1
        U = np.zeros((n_rows, d), dtype=np.float64)
        norms = np.zeros(n_rows, dtype=np.float64)
        for r in range(n_rows):
            if used[r]:
                sq = 0.0
                for a in range(d):
                    s = 0.0
                    for c in range(d):
                        s += W[a, c] * X[r, c]
                    U[r, a] = s
                    sq += s * s
                norms[r] = math.sqrt(sq)
                if norms[r] == 0.0:
                    raise ValueError("adapter projected an input to the zero vector")
        # accumulate d(loss)/dU per row, then fold through X in one pass
        A = np.zeros((n_rows, d), dtype=np.float64) if want_grad else U[:1]
        loss = 0.0
        for p in range(n_pairs):
            i = idx_i[p]
            j = idx_j[p]
            nu = norms[i]
            nv = norms[j]
            uv = 0.0
            for a in range(d):
                uv += U[i, a] * U[j, a]
            cos = uv / (nu * nv)
            err = cos - targets[p]
            loss += err * err
            if want_grad:
                g = 2.0 * err / n_pairs
                inv = 1.0 / (nu * nv)
                cu = cos / (nu * nu)
                cv = cos / (nv * nv)
                for a in range(d):
                    A[i, a] += g * (U[j, a] * inv - cu * U[i, a])
                    A[j, a] += g * (U[i, a] * inv - cv * U[j, a])
        if want_grad:
            for r in range(n_rows):
                if used[r]:
                    for a in range(d):
                        ar = A[r, a]
                        for c in range(d):
                            grad[a, c] += ar * X[r, c]
        return loss / n_pairs

    @njit(cache=True)
    def _logreg_core_nb(W, b, X, y, lam, grad_w, grad_b, want_grad):
        n, d = X.shape
        n_labels = W.shape[0]
        scores = np.empty(n_labels, dtype=np.float64)
        ce = 0.0
        for r in range(n):
            hi = -np.inf
            for l in range(n_labels):
                s = b[l]
                for c in range(d):
                    s += W[l, c] * X[r, c]
                scores[l] = s
                if s > hi:
                    hi = s
            z = 0.0
            for l in range(n_labels):
                scores[l] = math.exp(scores[l] - hi)
                z += scores[l]
            # per-row cross entropy: log-sum-exp minus the true-class score
            ce += math.log(z) + hi
            sy = b[y[r]]
            for c in range(d):
                sy += W[y[r], c] * X[r, c]
            ce -= sy
            if want_grad:
                for l in range(n_labels):
                    g = scores[l] / z
                    if l == y[r]:
                        g -= 1.0
                    g /= n
                    grad_b[l] += g
                    for c in range(d):
                        grad_w[l, c] += g * X[r, c]
        reg = 0.0
        for l in range(n_labels):
            for c in range(d):
                reg += W[l, c] * W[l, c]
                if want_grad:
                    grad_w[l, c] += (lam / n) * W[l, c]
        return ce / n + (lam / (2.0 * n)) * reg

    @njit(cache=True)
    def _logreg_probs_nb(W, b, X):
        n, d = X.shape
        n_labels = W.shape[0]
        out = np.empty((n, n_labels), dtype=np.float64)
        for r in range(n):
            hi = -np.inf
            for l in range(n_labels):
                s = b[l]
                for c in range(d):
                    s += W[l, c] * X[r, c]
                out[r, l] = s
                if s > hi:
                    hi = s
            z = 0.0
            for l in range(n_labels):
                out[r, l] = math.exp(out[r, l] - hi)
                z += out[r, l]
            for l in range(n_labels):
                out[r, l] /= z
        return out

    _EMPTY_GRAD = np.zeros((1, 1), dtype=np.float64)
    _EMPTY_VEC = np.zeros(1, dtype=np.float64)

    def _pair_loss_nb(W, X, idx_i, idx_j, targets):
        return float(_pair_terms_nb(W, X, idx_i, idx_j, targets, _EMPTY_GRAD, False))

    def _pair_loss_grad_nb(W, X, idx_i, idx_j, targets):
        grad = np.zeros_like(W)
        loss = _pair_terms_nb(W, X, idx_i, idx_j, targets, grad, True)
        return float(loss), grad

    def _logreg_loss_nb(W, b, X, y, lam):
        return float(_logreg_core_nb(W, b, X, y, lam, _EMPTY_GRAD, _EMPTY_VEC, False))

    def _logreg_loss_grad_nb(W, b, X, y, lam):
        grad_w = np.zeros_like(W)
        grad_b = np.zeros_like(b)
        loss = _logreg_core_nb(W, b, X, y, lam, grad_w, grad_b, True)
        return float(loss), grad_w, grad_b

    NUMBA_KERNELS = {
        "sqdist_matrix": _sqdist_matrix_nb,
        "pair_loss": _pair_loss_nb,
        "pair_loss_grad": _pair_loss_grad_nb,
        "logreg_probs": _logreg_probs_nb,
        "logreg_loss": _logreg_loss_nb,
        "logreg_loss_grad": _logreg_loss_grad_nb,
    }


def get_kernels(backend: str) -> dict:
    """Kernel table for an explicit backend name ('numpy' or 'numba')."""
    if backend == "numpy":
        return NUMPY_KERNELS
    if backend == "numba":
        if NUMBA_KERNELS is None:
            raise ValueError("numba backend unavailable (not installed or LAGONN_NUMBA=0)")
        return NUMBA_KERNELS
    raise ValueError(f"unknown backend {backend!r}")


BACKEND = "numba" if USE_NUMBA else "numpy"
_ACTIVE = NUMBA_KERNELS if USE_NUMBA else NUMPY_KERNELS

sqdist_matrix = _ACTIVE["sqdist_matrix"]
pair_loss = _ACTIVE["pair_loss"]
pair_loss_grad = _ACTIVE["pair_loss_grad"]
logreg_probs = _ACTIVE["logreg_probs"]
logreg_loss = _ACTIVE["logreg_loss"]
logreg_loss_grad = _ACTIVE["logreg_loss_grad"]
