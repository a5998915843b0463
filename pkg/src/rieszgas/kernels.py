"""Interaction kernels, truncations, smeared charges, and the extension weight.

Kernel kinds: riesz (g(X) = |X|^-s), log1d and log2d (g(X) = -log|X| in
dimensions 1 and 2, with the convention s = 0).  The extension dimension k
and the weight exponent gamma = s - d + 2 - k follow the Coulomb/extension
dichotomy: k = 0 exactly for s = d-2 with d >= 3 and for log2d, else k = 1.

Normalization convention: -div(|y|^gamma grad g) = c_{s,d} delta_0 with
c_{s,d} > 0.  For k = 1 the constant is calibrated by quadrature of the
flux of |y|^gamma grad g through the unit sphere (g is weighted-harmonic
away from the origin, so the flux is radius-independent).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ._quad import gl_nodes
from .errors import DomainError, GeometryError
from .geometry import Hyperrectangle, unit_sphere_area

RIESZ = "riesz"
LOG1D = "log1d"
LOG2D = "log2d"


@dataclass(frozen=True)
class KernelSpec:
    """Immutable kernel description: kind, ambient dimension d, exponent s."""

    kind: str
    d: int
    s: float = 0.0

    def __post_init__(self):
        if self.kind not in (RIESZ, LOG1D, LOG2D):
            raise DomainError(f"unknown kernel kind {self.kind!r}")
        if self.d < 1:
            raise DomainError("dimension d must be >= 1")
        if self.kind == LOG1D:
            if self.d != 1 or self.s != 0.0:
                raise DomainError("log1d requires d=1 and s=0")
        elif self.kind == LOG2D:
            if self.d != 2 or self.s != 0.0:
                raise DomainError("log2d requires d=2 and s=0")
        else:
            lo = max(0.0, self.d - 2.0)
            if not (lo <= self.s < self.d) or self.s == 0.0:
                raise DomainError(
                    f"riesz exponent must satisfy max(0, d-2) <= s < d, s > 0 "
                    f"(got s={self.s}, d={self.d}); use the log kinds for s=0")
        if not (-1.0 < self.gamma < 1.0):
            raise DomainError(f"gamma={self.gamma} outside (-1, 1)")

    # -- constructors
    @classmethod
    def riesz(cls, d: int, s: float) -> "KernelSpec":
        return cls(RIESZ, d, float(s))

    @classmethod
    def log1d(cls) -> "KernelSpec":
        return cls(LOG1D, 1, 0.0)

    @classmethod
    def log2d(cls) -> "KernelSpec":
        return cls(LOG2D, 2, 0.0)

    # -- derived structure
    @property
    def is_log(self) -> bool:
        return self.kind in (LOG1D, LOG2D)

    @property
    def coulomb(self) -> bool:
        return self.kind == LOG2D or (self.kind == RIESZ and self.d >= 3
                                      and self.s == self.d - 2)

    @property
    def k(self) -> int:
        return 0 if self.coulomb else 1

    @property
    def gamma(self) -> float:
        return self.s - self.d + 2.0 - self.k

    @property
    def dk(self) -> int:
        """Dimension of the extended space R^{d+k}."""
        return self.d + self.k

    @property
    def csd(self) -> float:
        return csd_constant(self)

    def scale_exponent(self) -> float:
        """Exponent 1 + s/d of the next-order energy scale (s=0 for log)."""
        return 1.0 + self.s / self.d


def g_of_r(spec: KernelSpec, r):
    """Kernel value as a function of |X| (vectorized; r > 0)."""
    r = np.asarray(r, dtype=float)
    if spec.is_log:
        return -np.log(r)
    return r ** (-spec.s)


def g_prime_abs(spec: KernelSpec, r: float) -> float:
    """|g'(r)|; the smeared-charge sphere density carries this factor."""
    if spec.is_log:
        return 1.0 / r
    return spec.s * r ** (-spec.s - 1.0)


def g_eval(spec: KernelSpec, X) -> float:
    """g(X) for X in the extended space; singular at the origin."""
    X = np.asarray(X, dtype=float)
    r = float(np.linalg.norm(X, axis=-1)) if X.ndim == 1 else np.linalg.norm(X, axis=-1)
    if np.any(np.asarray(r) == 0.0):
        raise DomainError("kernel evaluated at the origin")
    out = g_of_r(spec, r)
    return float(out) if np.ndim(out) == 0 else out


def g_trunc(spec: KernelSpec, X, eta: float):
    """Truncated kernel g_eta = min(g, g(eta)); finite everywhere."""
    _check_eta(eta)
    X = np.asarray(X, dtype=float)
    r = np.linalg.norm(X, axis=-1)
    cap = float(g_of_r(spec, eta))
    # g is decreasing, so min(g, g(eta)) is g outside B(0, eta) and the cap inside
    out = np.where(r >= eta, g_of_r(spec, np.maximum(r, eta)), cap)
    return float(out) if np.ndim(out) == 0 else out


def f_eta(spec: KernelSpec, X, eta: float):
    """f_eta = (g - g(eta))_+; vanishes outside B(0, eta), +inf at 0."""
    _check_eta(eta)
    X = np.asarray(X, dtype=float)
    r = np.linalg.norm(X, axis=-1)
    cap = float(g_of_r(spec, eta))
    with np.errstate(divide="ignore"):
        vals = np.where(r > 0, g_of_r(spec, np.maximum(r, 1e-300)) - cap, np.inf)
    out = np.where(r >= eta, 0.0, vals)
    out = np.where(r == 0.0, np.inf, out)
    return float(out) if np.ndim(out) == 0 else out


def grad_g(spec: KernelSpec, X) -> np.ndarray:
    """Gradient of g at X (vectorized over leading axes)."""
    X = np.asarray(X, dtype=float)
    r2 = (X * X).sum(axis=-1, keepdims=True)
    if np.any(r2 == 0.0):
        raise DomainError("kernel gradient evaluated at the origin")
    if spec.is_log:
        return -X / r2
    return -spec.s * X * r2 ** (-0.5 * spec.s - 1.0)


def _check_eta(eta: float):
    if not (0.0 < eta < 1.0):
        raise DomainError(f"eta must lie in (0, 1), got {eta}")


# ---------------------------------------------------------------------------
# c_{s,d}


@lru_cache(maxsize=64)
def _csd_cached(kind: str, d: int, s: float) -> float:
    spec = KernelSpec(kind, d, s)
    if spec.k == 0:
        # fundamental solution of -Laplace in R^d
        if spec.is_log:
            return 2.0 * math.pi
        return (d - 2.0) * unit_sphere_area(d)
    gp = g_prime_abs(spec, 1.0)
    return gp * _weighted_sphere_area(d, spec.gamma)


def csd_constant(spec: KernelSpec) -> float:
    """Constant in -div(|y|^gamma grad g) = c_{s,d} delta_0 (cached)."""
    return _csd_cached(spec.kind, spec.d, spec.s)


def _weighted_sphere_area(d: int, gamma: float, tol: float = 1e-11) -> float:
    """integral of |y|^gamma over the unit sphere of R^{d+1}.

    Polar angle theta measured from the y-axis; the middle third of [0, pi]
    uses the substitution u = sign(y)|y|^{1+gamma}/(1+gamma) which absorbs
    the |cos theta|^gamma weight exactly; the outer thirds are smooth.
    Gauss-Legendre with node doubling until the value stabilizes.
    """

    def outer(theta):
        return np.abs(np.cos(theta)) ** gamma * np.sin(theta) ** (d - 1)

    def eval_at(n: int) -> float:
        total = 0.0
        for a, b in ((0.0, math.pi / 4), (3 * math.pi / 4, math.pi)):
            x, w = gl_nodes(a, b, n)
            total += float(np.dot(w, outer(x)))
        u_hi = math.cos(math.pi / 4) ** (1 + gamma) / (1 + gamma)
        x, w = gl_nodes(-u_hi, u_hi, n)
        c = np.sign(x) * (np.abs(x) * (1 + gamma)) ** (1.0 / (1 + gamma))
        total += float(np.dot(w, (1.0 - c * c) ** (0.5 * (d - 2))))
        return total

    n = 64
    prev = eval_at(n)
    for _ in range(6):
        n *= 2
        cur = eval_at(n)
        if abs(cur - prev) <= tol * abs(cur):
            break
        prev = cur
    return unit_sphere_area(d) * cur


# ---------------------------------------------------------------------------
# Smeared charges


def smeared_mass_in_window(spec: KernelSpec, p, eta: float,
                           K: Hyperrectangle, tol: float = 1e-9) -> float:
    """Mass of the smeared charge delta_p^(eta) inside K x R^k.

    The smeared charge is the probability measure on the sphere of radius
    eta around (p, 0) in R^{d+k}, weighted by |y|^gamma for k = 1.  Exact
    0/1 fast paths apply when the x-projection ball B(p, eta) misses or
    fits inside K.  Partial overlaps use exact angular-arc arithmetic in
    the x-projection (circles and point pairs) combined with the polar
    u-substitution that absorbs the |y|^gamma weight, so k=0 d<=2 and
    k=1 d=1 masses are exact up to roundoff; the remaining cases integrate
    a continuous profile by Gauss-Legendre with node doubling.
    """
    _check_eta(eta)
    p = np.asarray(p, dtype=float)
    if p.shape != (spec.d,):
        raise DomainError(f"charge location must have dimension {spec.d}")
    if K.d != spec.d:
        raise GeometryError("window dimension does not match the kernel")

    lo, hi = K.lo, K.hi
    # fast paths via the x-projection ball
    if np.all(p - eta >= lo) and np.all(p + eta <= hi):
        return 1.0
    gap = np.maximum(np.maximum(lo - p, p - hi), 0.0)
    if float((gap ** 2).sum()) > eta * eta:
        return 0.0

    if spec.k == 0:
        return _sphere_box_fraction(spec.d, p, eta, K)
    return _weighted_polar_fraction(spec, p, eta, K, tol)


def _sphere_box_fraction(d: int, c, rho: float, K: Hyperrectangle) -> float:
    """Uniform-measure fraction of the sphere S^{d-1}(c, rho) inside box K."""
    c = np.asarray(c, dtype=float)
    if rho <= 0.0:
        return 1.0 if bool(K.contains(c[None, :])[0]) else 0.0
    if d == 1:
        inside = K.contains(np.array([[c[0] - rho], [c[0] + rho]]))
        return 0.5 * float(inside.sum())
    if d == 2:
        return _circle_box_fraction(c, rho, K.lo, K.hi)
    # slice along the last axis: the u-marginal has density ~ (1-u^2)^((d-3)/2)
    u_lo = max(-1.0, (K.lo[d - 1] - c[d - 1]) / rho)
    u_hi = min(1.0, (K.hi[d - 1] - c[d - 1]) / rho)
    if u_hi <= u_lo:
        return 0.0
    sub_box = Hyperrectangle.from_bounds(K.lo[:d - 1], K.hi[:d - 1])

    def integrand(u):
        vals = np.empty_like(u)
        for i, ui in enumerate(u):
            r_sub = rho * math.sqrt(max(1.0 - ui * ui, 0.0))
            vals[i] = _sphere_box_fraction(d - 1, c[:d - 1], r_sub, sub_box)
        return (1.0 - u * u) ** (0.5 * (d - 3)) * vals

    from ._quad import gl_panels
    num = 0.0
    x, w = gl_panels(u_lo, u_hi, 24, 10)
    num = float(np.dot(w, integrand(x)))
    x, w = gl_panels(-1.0, 1.0, 24, 10)
    den = float(np.dot(w, (1.0 - x * x) ** (0.5 * (d - 3))))
    return min(max(num / den, 0.0), 1.0)


def _circle_box_fraction(c, rho: float, lo, hi) -> float:
    """Exact fraction of the circle of radius rho around c inside [lo, hi].

    The membership indicator along the circle is piecewise constant with
    breakpoints where a coordinate crosses a box edge; arcs are measured
    exactly by testing midpoints between sorted breakpoints.
    """
    breaks = [0.0, 2.0 * math.pi]
    for axis, trig in ((0, "cos"), (1, "sin")):
        for edge in (lo[axis], hi[axis]):
            t = (edge - c[axis]) / rho
            if -1.0 < t < 1.0:
                if trig == "cos":
                    a = math.acos(t)
                    breaks.extend([a, 2.0 * math.pi - a])
                else:
                    a = math.asin(t)
                    breaks.extend([a % (2 * math.pi),
                                   (math.pi - a) % (2 * math.pi)])
    breaks = sorted(set(breaks))
    total = 0.0
    for a, b in zip(breaks[:-1], breaks[1:]):
        mid = 0.5 * (a + b)
        x = c[0] + rho * math.cos(mid)
        y = c[1] + rho * math.sin(mid)
        if lo[0] <= x <= hi[0] and lo[1] <= y <= hi[1]:
            total += b - a
    return total / (2.0 * math.pi)


def _weighted_polar_fraction(spec: KernelSpec, p, eta: float,
                             K: Hyperrectangle, tol: float) -> float:
    """k=1 smeared mass: integrate the x-projection fraction over the polar angle.

    Polar angle theta from the y-axis; the x-projection is the sphere
    S^{d-1}(p, eta*sin(theta)) and the polar measure is
    |cos theta|^gamma sin^{d-1}(theta) dtheta.  By the theta <-> pi-theta
    symmetry only sin(theta) enters, so theta in [0, pi/2] suffices.  d=1
    is exact (piecewise-constant indicator, incomplete-Beta piece masses);
    d=2 is exact in the polar direction via the substitution
    u = sign(y)|y|^(1+gamma)/(1+gamma); d>=3 integrates a continuous
    profile by Gauss-Legendre with node doubling.
    """
    d, gamma = spec.d, spec.gamma
    u_max = 1.0 / (1.0 + gamma)

    if d == 1:
        from scipy.special import betainc

        # point pair p +- eta*sin(theta): breakpoints where it crosses an edge
        sines = [0.0, 1.0]
        for edge in (K.lo[0], K.hi[0]):
            for sgn in (1.0, -1.0):
                t = sgn * (edge - p[0]) / eta
                if 0.0 < t < 1.0:
                    sines.append(t)
        sines = sorted(set(sines))

        def cdf(sin_t: float) -> float:
            # weighted measure of {theta in [0, arcsin(sin_t)]}, normalized:
            # int_0^theta cos^gamma = (1/2) B(sin^2; 1/2, (gamma+1)/2)
            return float(betainc(0.5, 0.5 * (gamma + 1.0), sin_t * sin_t))

        total = 0.0
        for a, b in zip(sines[:-1], sines[1:]):
            mid = 0.5 * (a + b)
            frac = 0.5 * (float(K.contains(np.array([[p[0] - eta * mid]])).item())
                          + float(K.contains(np.array([[p[0] + eta * mid]])).item()))
            total += frac * (cdf(b) - cdf(a))
        return min(max(total, 0.0), 1.0)

    def fraction(n: int) -> float:
        x, w = gl_nodes(0.0, u_max, n)
        cos_t = ((1.0 + gamma) * x) ** (1.0 / (1.0 + gamma))
        sin_t = np.sqrt(np.maximum(1.0 - cos_t * cos_t, 0.0))
        vals = np.empty(n)
        for i in range(n):
            vals[i] = _sphere_box_fraction(d, p, eta * float(sin_t[i]), K)
        den_w = np.ones(n) if d == 2 else sin_t ** (d - 2)
        num = float(np.dot(w, den_w * vals))
        den = float(np.dot(w, den_w))
        return num / den

    n = 64
    prev = fraction(n)
    for _ in range(5):
        n *= 2
        cur = fraction(n)
        if abs(cur - prev) <= tol:
            break
        prev = cur
    return min(max(cur, 0.0), 1.0)
