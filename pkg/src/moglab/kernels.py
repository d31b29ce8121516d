"""Hot numeric kernels: batched Gaussian-mixture evaluation and Mahalanobis scans.

Every kernel has two implementations with identical signatures and semantics:
a numba ``@njit`` version (explicit loops, compiled) and a pure-numpy version
(vectorized, chunked to bound memory). The numba path is selected by default
when numba is importable; set ``MOGLAB_DISABLE_NUMBA=1`` to force the numpy
fallback. ``MOG_THREADS`` caps the numba thread pool.

``benchmarks/bench_kernels.py`` times the two paths against each other.

All kernels are per-point independent (no cross-point reductions), so results
do not depend on thread count or scheduling.
"""

import math
import os

import numpy as np

_LOG_2PI = math.log(2.0 * math.pi)


def _env_flag(name: str) -> bool:
    return os.environ.get(name, "").strip().lower() not in ("", "0", "false", "no")


NUMBA_DISABLED = _env_flag("MOGLAB_DISABLE_NUMBA")

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    NUMBA_DISABLED = True

if numba is not None and os.environ.get("MOG_THREADS"):
    _cap = max(1, int(os.environ["MOG_THREADS"]))
    numba.set_num_threads(min(_cap, numba.config.NUMBA_NUM_THREADS))

USING_NUMBA = not NUMBA_DISABLED

# Chunk size for the numpy fallbacks: bounds the (chunk, K, 2) temporaries.
_CHUNK = 4096


# ---------------------------------------------------------------------------
# numpy implementations
# ---------------------------------------------------------------------------


def _quad_forms(pts, means, inv_covs):
    """(n, K) array of (z - m_k)^T C_k^{-1} (z - m_k)."""
    diff = pts[:, None, :] - means[None, :, :]  # (n, K, 2)
    cdiff = np.einsum("kij,nkj->nki", inv_covs, diff)
    return np.einsum("nki,nki->nk", diff, cdiff), diff, cdiff


def gmm_logpdf_numpy(pts, log_weights, means, inv_covs, log_norms):
    pts = np.atleast_2d(pts)
    out = np.empty(pts.shape[0])
    for lo in range(0, pts.shape[0], _CHUNK):
        chunk = pts[lo : lo + _CHUNK]
        quad, _, _ = _quad_forms(chunk, means, inv_covs)
        lt = log_weights[None, :] + log_norms[None, :] - 0.5 * quad
        m = lt.max(axis=1)
        out[lo : lo + _CHUNK] = m + np.log(np.exp(lt - m[:, None]).sum(axis=1))
    return out


def gmm_neg_score_numpy(pts, log_weights, means, inv_covs, log_norms):
    """Sum_k r_k(z) C_k^{-1} (z - m_k), i.e. minus the mixture score."""
    pts = np.atleast_2d(pts)
    out = np.empty((pts.shape[0], 2))
    for lo in range(0, pts.shape[0], _CHUNK):
        chunk = pts[lo : lo + _CHUNK]
        quad, _, cdiff = _quad_forms(chunk, means, inv_covs)
        lt = log_weights[None, :] + log_norms[None, :] - 0.5 * quad
        m = lt.max(axis=1, keepdims=True)
        r = np.exp(lt - m)
        out[lo : lo + _CHUNK] = np.einsum("nk,nki->ni", r, cdiff) / r.sum(axis=1)[:, None]
    return out


def mahalanobis_minima_numpy(pts, means, inv_covs):
    """Per-point and per-component minima of squared Mahalanobis distance."""
    pts = np.atleast_2d(pts)
    point_min = np.full(pts.shape[0], np.inf)
    comp_min = np.full(means.shape[0], np.inf)
    for lo in range(0, pts.shape[0], _CHUNK):
        chunk = pts[lo : lo + _CHUNK]
        quad, _, _ = _quad_forms(chunk, means, inv_covs)
        point_min[lo : lo + _CHUNK] = quad.min(axis=1)
        comp_min = np.minimum(comp_min, quad.min(axis=0))
    return point_min, comp_min


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

if numba is not None:

    @numba.njit(cache=True)
    def _gmm_logpdf_numba(pts, log_weights, means, inv_covs, log_norms):
        n = pts.shape[0]
        k_count = log_weights.shape[0]
        out = np.empty(n)
        lt = np.empty(k_count)
        for i in range(n):
            m = -np.inf
            for k in range(k_count):
                dx = pts[i, 0] - means[k, 0]
                dy = pts[i, 1] - means[k, 1]
                quad = (
                    inv_covs[k, 0, 0] * dx * dx
                    + 2.0 * inv_covs[k, 0, 1] * dx * dy
                    + inv_covs[k, 1, 1] * dy * dy
                )
                v = log_weights[k] + log_norms[k] - 0.5 * quad
                lt[k] = v
                if v > m:
                    m = v
            total = 0.0
            for k in range(k_count):
                total += math.exp(lt[k] - m)
            out[i] = m + math.log(total)
        return out

    @numba.njit(cache=True)
    def _gmm_neg_score_numba(pts, log_weights, means, inv_covs, log_norms):
        n = pts.shape[0]
        k_count = log_weights.shape[0]
        out = np.empty((n, 2))
        lt = np.empty(k_count)
        for i in range(n):
            m = -np.inf
            for k in range(k_count):
                dx = pts[i, 0] - means[k, 0]
                dy = pts[i, 1] - means[k, 1]
                quad = (
                    inv_covs[k, 0, 0] * dx * dx
                    + 2.0 * inv_covs[k, 0, 1] * dx * dy
                    + inv_covs[k, 1, 1] * dy * dy
                )
                v = log_weights[k] + log_norms[k] - 0.5 * quad
                lt[k] = v
                if v > m:
                    m = v
            total = 0.0
            gx = 0.0
            gy = 0.0
            for k in range(k_count):
                r = math.exp(lt[k] - m)
                total += r
                dx = pts[i, 0] - means[k, 0]
                dy = pts[i, 1] - means[k, 1]
                gx += r * (inv_covs[k, 0, 0] * dx + inv_covs[k, 0, 1] * dy)
                gy += r * (inv_covs[k, 0, 1] * dx + inv_covs[k, 1, 1] * dy)
            out[i, 0] = gx / total
            out[i, 1] = gy / total
        return out

    @numba.njit(cache=True)
    def _mahalanobis_minima_numba(pts, means, inv_covs):
        n = pts.shape[0]
        k_count = means.shape[0]
        point_min = np.empty(n)
        comp_min = np.full(k_count, np.inf)
        for i in range(n):
            best = np.inf
            for k in range(k_count):
                dx = pts[i, 0] - means[k, 0]
                dy = pts[i, 1] - means[k, 1]
                quad = (
                    inv_covs[k, 0, 0] * dx * dx
                    + 2.0 * inv_covs[k, 0, 1] * dx * dy
                    + inv_covs[k, 1, 1] * dy * dy
                )
                if quad < best:
                    best = quad
                if quad < comp_min[k]:
                    comp_min[k] = quad
            point_min[i] = best
        return point_min, comp_min

    def gmm_logpdf_numba(pts, log_weights, means, inv_covs, log_norms):
        return _gmm_logpdf_numba(
            np.ascontiguousarray(np.atleast_2d(pts)), log_weights, means, inv_covs, log_norms
        )

    def gmm_neg_score_numba(pts, log_weights, means, inv_covs, log_norms):
        return _gmm_neg_score_numba(
            np.ascontiguousarray(np.atleast_2d(pts)), log_weights, means, inv_covs, log_norms
        )

    def mahalanobis_minima_numba(pts, means, inv_covs):
        return _mahalanobis_minima_numba(np.ascontiguousarray(np.atleast_2d(pts)), means, inv_covs)


if USING_NUMBA:
    gmm_logpdf = gmm_logpdf_numba
    gmm_neg_score = gmm_neg_score_numba
    mahalanobis_minima = mahalanobis_minima_numba
else:
    gmm_logpdf = gmm_logpdf_numpy
    gmm_neg_score = gmm_neg_score_numpy
    mahalanobis_minima = mahalanobis_minima_numpy
