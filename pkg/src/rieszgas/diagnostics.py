"""Statistical diagnostics on computed minimizers: discrepancy and its
scaling, windowed energy equidistribution, number variance, and lattice
vertical-decay fits.

Windows use the half-open convention [a - l/2, a + l/2)^d for counting, so
lattice examples are exact.  All fits are ordinary least squares on log-log
with the r^2 reported; assertions belong to callers and concern slopes only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ._quad import gl_panels, tensor_nodes
from .errors import DomainError, GeometryError, NormalizationError
from .field import FieldContext, QuadratureGrid, lattice_field, window_energy
from .geometry import Hyperrectangle, crenel_cube, crenel_r1_bound, min_separation
from .model import BLOWN_UP, Configuration, DensityField


def ols_loglog(x, y):
    """(slope, intercept, r2) of an OLS fit of log y against log x."""
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    slope, intercept = np.polyfit(lx, ly, 1)
    pred = slope * lx + intercept
    ss_res = float(((ly - pred) ** 2).sum())
    ss_tot = float(((ly - ly.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


@dataclass
class ScanRow:
    center: tuple
    ell: float
    w_eta: Optional[float] = None
    per_volume: Optional[float] = None
    count: Optional[int] = None
    discrepancy: Optional[float] = None

    def as_dict(self) -> dict:
        return {
            "center": list(self.center), "ell": self.ell, "w_eta": self.w_eta,
            "per_volume": self.per_volume, "count": self.count,
            "discrepancy": self.discrepancy,
        }


@dataclass
class ScanResult:
    rows: list = field(default_factory=list)
    mean: float = math.nan
    stdev: float = math.nan
    cv: float = math.nan
    fit: Optional[tuple] = None  # (slope, intercept, r2)

    def summarize(self, values) -> None:
        vals = np.asarray(values, dtype=float)
        self.mean = float(vals.mean())
        self.stdev = float(vals.std())
        self.cv = float(self.stdev / abs(self.mean)) if self.mean != 0 else math.inf

    def as_dict(self) -> dict:
        return {
            "rows": [r.as_dict() for r in self.rows],
            "summary": {"mean": self.mean, "stdev": self.stdev, "cv": self.cv},
            "fit": (None if self.fit is None else
                    {"slope": self.fit[0], "intercept": self.fit[1],
                     "r2": self.fit[2]}),
        }


# ---------------------------------------------------------------------------
# Discrepancy


def window_mass(mu: DensityField, K: Hyperrectangle, order: int = 12,
                panels: int = 8) -> float:
    """int_K m by tensor quadrature (K inside the support, so no edges)."""
    rules = [gl_panels(a, b, panels, order) for a, b in zip(K.lo, K.hi)]
    pts, w = tensor_nodes(K.lo, K.hi, rules)
    return float(np.dot(w, mu(pts)))


def discrepancy(config: Configuration, mu: DensityField,
                K: Hyperrectangle) -> float:
    """nu'_n(K) - int_K m'_V (half-open counting)."""
    corners = np.stack([K.lo, K.hi])
    if not np.all(mu.support.contains(corners)):
        raise GeometryError("window not inside the density support")
    count = int(K.contains(config.points, half_open=True).sum())
    if mu.profile in ("uniform-ball", "uniform-box"):
        expected = mu.profile_params["density"] * K.volume
    else:
        expected = window_mass(mu, K)
    return count - expected


def eligible_center_box(mu: DensityField, ell: float,
                        margin: float) -> Hyperrectangle:
    """Axis box of centers whose window K_ell stays `margin` inside the support.

    The interior-margin exponent of the asymptotic regime is deliberately a
    caller-chosen parameter.
    """
    d = mu.d
    half_diag = 0.5 * ell * math.sqrt(d)
    if mu.support.kind == "ball":
        r = mu.support.radius - margin - half_diag
        if r <= 0:
            raise GeometryError("no eligible centers: window too large for support")
        side = 2 * r / math.sqrt(d)
        return Hyperrectangle.cube(mu.support.center, side)
    box = mu.support.box
    h = [hl - margin - ell / 2 for hl in box.half_lengths]
    if min(h) <= 0:
        raise GeometryError("no eligible centers: window too large for support")
    return Hyperrectangle(box.center, tuple(h))


def discrepancy_scan(config: Configuration, mu: DensityField, a,
                     sizes: Sequence[float], centers_per_axis: int = 3,
                     margin: Optional[float] = None) -> ScanResult:
    """Max |discrepancy| over a center grid for each window size, with the
    log-log fit of max |D| against ell."""
    if config.scale != BLOWN_UP:
        raise DomainError("discrepancy_scan expects a blown-up configuration")
    a = np.asarray(a, dtype=float)
    sizes = sorted(float(v) for v in sizes)
    ell_max = sizes[-1]
    if margin is None:
        margin = ell_max / 2
    elig = eligible_center_box(mu, ell_max, margin)
    offsets = np.linspace(-1.0, 1.0, centers_per_axis) * ell_max / 2
    grids = np.meshgrid(*[offsets] * config.d, indexing="ij")
    centers = a + np.stack([g.ravel() for g in grids], axis=-1)
    centers = centers[elig.contains(centers)]
    if centers.shape[0] == 0:
        raise GeometryError("no eligible scan centers; shrink margin or sizes")

    result = ScanResult()
    maxima = []
    for ell in sizes:
        worst = 0.0
        for c in centers:
            K = Hyperrectangle.cube(c, ell)
            dval = discrepancy(config, mu, K)
            result.rows.append(ScanRow(center=tuple(c), ell=ell,
                                       count=int(K.contains(
                                           config.points, half_open=True).sum()),
                                       discrepancy=dval))
            worst = max(worst, abs(dval))
        maxima.append(max(worst, 1e-12))
    result.summarize(maxima)
    result.fit = ols_loglog(sizes, maxima)
    return result


# ---------------------------------------------------------------------------
# Equidistribution


def equidistribution_scan(ctx: FieldContext, centers, ell: float,
                          resolution_factor: float = 4.0,
                          crenel_r1: Optional[float] = None,
                          workers: int = 0) -> ScanResult:
    """Per-window W_eta per unit volume across crenel-adjusted windows.

    The theorem's absolute comparand (the minimal renormalized energy per
    density) is analytically unknown, so cross-window uniformity (the
    coefficient of variation) is the desk-scale surrogate; callers compare
    CVs across ell for the stabilization check.  workers > 1 evaluates
    windows concurrently; results merge in center order either way.
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    charges = ctx.charges
    r0 = min_separation(charges)
    if crenel_r1 is None:
        crenel_r1 = 0.5 * crenel_r1_bound(ctx.spec.d, min(r0, 1.0), ell)

    def one(c):
        window = crenel_cube(charges, Hyperrectangle.cube(c, ell), crenel_r1)
        grid = QuadratureGrid.for_window(window, ctx.eta, spec=ctx.spec,
                                         factor=resolution_factor)
        rep = window_energy(ctx, grid)
        disc = None
        if ctx.background is not None:
            try:
                disc = discrepancy(Configuration(charges, scale=BLOWN_UP),
                                   ctx.background, window)
            except GeometryError:
                pass  # window crosses the support edge; leave the column empty
        return window, rep, disc

    if workers and workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(one, centers))
    else:
        reports = [one(c) for c in centers]

    result = ScanResult()
    per_vol = []
    for c, (window, rep, disc) in zip(centers, reports):
        result.rows.append(ScanRow(center=tuple(c),
                                   ell=float(window.side_lengths[0]),
                                   w_eta=rep.w_eta, per_volume=rep.per_volume,
                                   count=rep.point_count, discrepancy=disc))
        per_vol.append(rep.per_volume)
    result.summarize(per_vol)
    return result


def disjoint_window_centers(mu: DensityField, ell: float, spacing: float,
                            margin: float, limit: Optional[int] = None) -> np.ndarray:
    """Deterministic grid of centers with pairwise disjoint K_ell windows."""
    elig = eligible_center_box(mu, ell, margin)
    d = mu.d
    per_axis = []
    for h in elig.half_lengths:
        n = int(2 * h // spacing) + 1
        per_axis.append(np.arange(n) * spacing - (n - 1) * spacing / 2)
    grids = np.meshgrid(*per_axis, indexing="ij")
    centers = np.asarray(elig.center) + np.stack([g.ravel() for g in grids], axis=-1)
    keep = elig.contains(centers)
    centers = centers[keep]
    order = np.lexsort(centers.T[::-1])
    centers = centers[order]
    return centers[:limit] if limit else centers


# ---------------------------------------------------------------------------
# Number variance


def number_variance(config: Configuration, mu: DensityField, ell: float,
                    num_centers: int, seed: int,
                    margin: Optional[float] = None):
    """Empirical variance of the window count over uniform random centers."""
    if margin is None:
        margin = ell / 2
    if mu.support.kind == "ball":
        d = mu.d
        r = mu.support.radius - margin - 0.5 * ell * math.sqrt(d)
        if r <= 0:
            raise GeometryError("eligible region empty for number_variance")
        rng = np.random.default_rng(seed)
        u = rng.standard_normal((num_centers, d))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        rad = r * rng.random(num_centers) ** (1.0 / d)
        centers = np.asarray(mu.support.center) + u * rad[:, None]
    else:
        elig = eligible_center_box(mu, ell, margin)
        rng = np.random.default_rng(seed)
        centers = elig.lo + rng.random((num_centers, mu.d)) * (elig.hi - elig.lo)
    counts = np.empty(num_centers)
    for i, c in enumerate(centers):
        K = Hyperrectangle.cube(c, ell)
        counts[i] = int(K.contains(config.points, half_open=True).sum())
    sigma2 = float(np.var(counts, ddof=1)) if num_centers > 1 else 0.0
    return sigma2, counts


# ---------------------------------------------------------------------------
# Lattice decay fits


@dataclass(frozen=True)
class LatticeDecayReport:
    exponent: float
    constant: float
    r2: float
    bound_exponent: float
    bound_ok: bool
    t_values: tuple
    c2_values: tuple


def lattice_c2(spec, basis, t_values: Sequence[float], radius: float = 100.0,
               x_per_axis: int = 16, n_y: int = 48,
               y_max_factor: float = 30.0, cell_order: int = 8) -> np.ndarray:
    """C2(E, t, [0,1)^d) for the unit-density lattice field by direct
    summation with background subtraction (sum minus continuum integral)."""
    basis = np.atleast_2d(np.asarray(basis, dtype=float))
    d = basis.shape[0]
    if abs(abs(np.linalg.det(basis)) - 1.0) > 1e-9:
        raise NormalizationError("lattice basis must have unit density")
    axes = [(np.arange(x_per_axis) + 0.5) / x_per_axis for _ in range(d)]
    grids = np.meshgrid(*axes, indexing="ij")
    frac = np.stack([g.ravel() for g in grids], axis=-1)
    x_nodes = frac @ basis
    gamma = spec.gamma
    out = []
    for t in t_values:
        ys = t * np.exp(np.linspace(0.0, math.log(y_max_factor), n_y))
        vals = np.empty(n_y)
        for i, y in enumerate(ys):
            E = lattice_field(spec, basis, x_nodes, float(y), radius=radius,
                              cell_order=cell_order)
            vals[i] = float((E * E).sum(axis=1).mean())
        f = vals * ys ** gamma
        out.append(2.0 * float(np.trapezoid(f, ys)))
    return np.asarray(out)


def lattice_decay_fit(basis, spec, t_values: Sequence[float],
                      radius: float = 100.0, x_per_axis: int = 16,
                      tolerance: float = 0.4) -> LatticeDecayReport:
    """Fit log C2 against log t; the decay lemma gives the upper bound
    exponent -(s - d + 2), so bound_ok checks fitted <= bound + tolerance
    (the lattice decay is in fact much faster)."""
    if spec.k != 1:
        raise DomainError("lattice decay requires an extended dimension (k=1)")
    ts = [float(t) for t in t_values]
    c2 = lattice_c2(spec, basis, ts, radius=radius, x_per_axis=x_per_axis)
    slope, intercept, r2 = ols_loglog(ts, c2)
    bound = -(spec.s - spec.d + 2.0)
    return LatticeDecayReport(
        exponent=slope, constant=math.exp(intercept), r2=r2,
        bound_exponent=bound, bound_ok=slope <= bound + tolerance,
        t_values=tuple(ts), c2_values=tuple(float(v) for v in c2))
