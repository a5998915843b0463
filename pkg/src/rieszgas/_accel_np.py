"""Pure-numpy backend for the hot kernels.

Same contracts as the compiled module rieszgas._accel; used automatically
when the extension is unavailable (or when RIESZGAS_BACKEND=python).
Node batches are chunked to bound peak memory.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "python"

_CHUNK = 2048


def pair_energy(points: np.ndarray, s: float, log_kind: bool) -> float:
    """Sum of g(x_i - x_j) over unordered pairs i < j."""
    pts = np.ascontiguousarray(points, dtype=float)
    n = pts.shape[0]
    total = 0.0
    for i in range(n - 1):
        diff = pts[i + 1:] - pts[i]
        r2 = (diff * diff).sum(axis=1)
        if log_kind:
            total += -0.5 * np.log(r2).sum()
        else:
            total += (r2 ** (-0.5 * s)).sum()
    return float(total)


def pair_gradient(points: np.ndarray, s: float, log_kind: bool) -> np.ndarray:
    """Row i holds sum_{j != i} grad g(x_i - x_j) (interaction part only)."""
    pts = np.ascontiguousarray(points, dtype=float)
    n, d = pts.shape
    out = np.zeros((n, d))
    for i in range(n):
        diff = pts[i] - pts  # (n, d)
        r2 = (diff * diff).sum(axis=1)
        r2[i] = 1.0  # masked below
        if log_kind:
            coef = -1.0 / r2
        else:
            coef = -s * r2 ** (-0.5 * s - 1.0)
        coef[i] = 0.0
        out[i] = coef @ diff
    return out


def min_separation(points: np.ndarray) -> float:
    pts = np.ascontiguousarray(points, dtype=float)
    n = pts.shape[0]
    if n < 2:
        return np.inf
    best = np.inf
    for i in range(n - 1):
        diff = pts[i + 1:] - pts[i]
        r2 = (diff * diff).sum(axis=1)
        m = r2.min()
        if m < best:
            best = m
    return float(np.sqrt(best))


def field_sum_trunc(nodes: np.ndarray, charges: np.ndarray, eta: float,
                    s: float, log_kind: bool) -> np.ndarray:
    """Sum over charges of grad g_eta(X - (p, 0)) at each node.

    nodes: (M, d + k) with k in {0, 1}; charges: (n, d) embedded at y = 0.
    grad g_eta is grad g outside the ball of radius eta and 0 inside.
    eta = 0 gives the untruncated field.
    """
    nodes = np.ascontiguousarray(nodes, dtype=float)
    chg = np.ascontiguousarray(charges, dtype=float)
    m, dk = nodes.shape
    n, d = chg.shape
    out = np.zeros((m, dk))
    eta2 = eta * eta
    for start in range(0, m, _CHUNK):
        blk = nodes[start:start + _CHUNK]
        diff_x = blk[:, None, :d] - chg[None, :, :]  # (B, n, d)
        r2 = np.einsum("bnd,bnd->bn", diff_x, diff_x)
        if dk > d:
            y = blk[:, d:]
            r2 = r2 + (y * y).sum(axis=1)[:, None]
        if log_kind:
            coef = -1.0 / r2
        else:
            coef = -s * r2 ** (-0.5 * s - 1.0)
        if eta > 0:
            coef = np.where(r2 < eta2, 0.0, coef)
        out[start:start + _CHUNK, :d] = np.einsum("bn,bnd->bd", coef, diff_x)
        if dk > d:
            out[start:start + _CHUNK, d:] = coef.sum(axis=1)[:, None] * blk[:, d:]
    return out
