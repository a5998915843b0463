"""Shared quadrature helpers: Gauss-Legendre panels, tensor grids, refinement."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .errors import NumericError


@lru_cache(maxsize=64)
def _gl_unit(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


def gl_nodes(a: float, b: float, order: int):
    """Gauss-Legendre nodes/weights on [a, b]."""
    x, w = _gl_unit(order)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def gl_panels(a: float, b: float, panels: int, order: int):
    """Composite Gauss-Legendre rule on [a, b] with equal panels."""
    edges = np.linspace(a, b, panels + 1)
    xs, ws = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        x, w = gl_nodes(lo, hi, order)
        xs.append(x)
        ws.append(w)
    return np.concatenate(xs), np.concatenate(ws)


def midpoint_nodes(a: float, b: float, n: int):
    h = (b - a) / n
    return a + h * (np.arange(n) + 0.5), np.full(n, h)


def tensor_nodes(los, his, per_axis):
    """Tensor-product nodes/weights from per-axis 1D rules.

    per_axis: list of (nodes, weights) tuples, one per dimension.
    Returns (N, d) nodes and (N,) weights.
    """
    grids = np.meshgrid(*[p[0] for p in per_axis], indexing="ij")
    wgrids = np.meshgrid(*[p[1] for p in per_axis], indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    w = np.ones(pts.shape[0])
    for wg in wgrids:
        w = w * wg.ravel()
    return pts, w


def tensor_gl_box(lo, hi, order: int = 20, max_panel: float = 3.0):
    """Gauss-Legendre tensor rule over an axis-aligned box.

    Panels per axis scale with the side length so long boxes keep accuracy.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    rules = []
    for a, b in zip(lo, hi):
        panels = max(1, int(np.ceil((b - a) / max_panel)))
        rules.append(gl_panels(a, b, panels, order))
    return tensor_nodes(lo, hi, rules)


def integrate_box(fn, lo, hi, order: int = 20, max_panel: float = 3.0) -> float:
    pts, w = tensor_gl_box(lo, hi, order=order, max_panel=max_panel)
    vals = np.asarray(fn(pts), dtype=float)
    return float(np.dot(w, vals))


def geometric_panels(a: float, b: float, x0: float, order: int = 16,
                     levels: int = 44):
    """GL panels on [a, b] refined geometrically toward an interior point x0.

    Handles integrable singularities (log, |x|^-s with s < 1) at x0.  If x0
    lies outside (a, b), plain uniform panels are returned.
    """
    if x0 <= a or x0 >= b:
        return gl_panels(a, b, max(4, int((b - a) * 2) + 1), order)

    xs, ws = [], []

    def _toward(far, near):
        # edges marching geometrically from `far` toward the singular `near`
        edges = near + (far - near) * 0.5 ** np.arange(levels + 1)
        for p, q in zip(edges[1:], edges[:-1]):
            lo, hi = (p, q) if p < q else (q, p)
            x, w = gl_nodes(lo, hi, order)
            xs.append(x)
            ws.append(w)

    _toward(a, x0)
    _toward(b, x0)
    return np.concatenate(xs), np.concatenate(ws)


def refine_until(evaluate, start: int, tol: float, max_doublings: int = 8,
                 what: str = "quadrature"):
    """Double a resolution parameter until successive values agree.

    evaluate(n) -> float.  Convergence: |v2 - v1| <= tol * max(|v2|, 1e-12)
    treated as a relative tolerance with an absolute floor.
    """
    n = start
    prev = evaluate(n)
    for _ in range(max_doublings):
        n *= 2
        cur = evaluate(n)
        if not np.isfinite(cur):
            raise NumericError(f"{what} produced a non-finite value")
        if abs(cur - prev) <= tol * max(abs(cur), 1e-12):
            return cur
        prev = cur
    raise NumericError(f"{what} did not converge to tol={tol} "
                       f"(last change {abs(cur - prev):.3e})")
