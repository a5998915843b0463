"""Gas models: confining potentials, the analytic equilibrium-measure
catalogue, mean-field energy, effective potential zeta, and blow-up.

The catalogue covers the quadratic-potential cases with known equilibrium
measures: the 1D log gas (scaled semicircle) and the Coulomb cases k=0
(uniform ball).  There is no general obstacle-problem solver; anything else
must be supplied as an explicit DensityField by the caller.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import backend
from ._quad import geometric_panels, gl_panels, gl_nodes
from .errors import DomainError, NumericError, UnsupportedModelError
from .geometry import Hyperrectangle, unit_ball_volume, unit_sphere_area
from .kernels import KernelSpec, g_of_r, csd_constant

MACROSCOPIC = "macroscopic"
BLOWN_UP = "blown_up"


# ---------------------------------------------------------------------------
# Potentials


@dataclass(frozen=True)
class QuadraticPotential:
    """V(x) = a |x|^2; satisfies the growth assumptions for every a > 0."""

    a: float = 1.0

    def __post_init__(self):
        if self.a <= 0:
            raise DomainError("quadratic potential needs a > 0")

    name = "quadratic"

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.a * (x * x).sum(axis=-1)

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        return 2.0 * self.a * x


@dataclass(frozen=True)
class CustomPotential:
    """User-supplied V with gradient; growth assumptions asserted by the user."""

    fn: Callable
    grad_fn: Callable
    name: str = "custom"

    def __call__(self, x):
        return np.asarray(self.fn(np.asarray(x, dtype=float)), dtype=float)

    def gradient(self, x):
        return np.asarray(self.grad_fn(np.asarray(x, dtype=float)), dtype=float)


@dataclass(frozen=True)
class GasModel:
    kernel: KernelSpec
    potential: object
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise DomainError("particle number n must be >= 1")


# ---------------------------------------------------------------------------
# Supports and configurations


@dataclass(frozen=True)
class Support:
    """Support geometry of a density: a ball or a box."""

    kind: str  # "ball" | "box"
    center: tuple
    radius: float = 0.0
    box: Optional[Hyperrectangle] = None

    @classmethod
    def ball(cls, center, radius: float) -> "Support":
        return cls("ball", tuple(float(v) for v in center), float(radius))

    @classmethod
    def interval(cls, lo: float, hi: float) -> "Support":
        return cls.ball(((lo + hi) / 2,), (hi - lo) / 2)

    @property
    def d(self) -> int:
        return len(self.center)

    def contains(self, x) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        if self.kind == "ball":
            r2 = ((pts - np.asarray(self.center)) ** 2).sum(axis=1)
            out = r2 <= self.radius ** 2 * (1 + 1e-14)
        else:
            out = self.box.contains(pts)
        return out if np.ndim(x) > 1 else bool(out[0])

    def bounding_box(self) -> Hyperrectangle:
        if self.kind == "ball":
            return Hyperrectangle(self.center, (self.radius,) * self.d)
        return self.box

    def scaled(self, factor: float) -> "Support":
        if self.kind == "ball":
            return Support.ball([factor * c for c in self.center],
                                factor * self.radius)
        return Support("box", tuple(factor * c for c in self.center),
                       box=self.box.scaled(factor))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """i.i.d. uniform points from the support (ball via polar radius)."""
        if self.kind == "ball":
            d = self.d
            u = rng.standard_normal((size, d))
            u /= np.linalg.norm(u, axis=1, keepdims=True)
            r = self.radius * rng.random(size) ** (1.0 / d)
            return np.asarray(self.center) + u * r[:, None]
        lo, hi = self.box.lo, self.box.hi
        return lo + rng.random((size, self.d)) * (hi - lo)

    def boundary_distance(self, x) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        if self.kind == "ball":
            r = np.linalg.norm(pts - np.asarray(self.center), axis=1)
            out = np.abs(self.radius - r)
        else:
            out = self.box.boundary_distance(pts)
        return out if np.ndim(x) > 1 else float(out[0])


@dataclass(frozen=True)
class Configuration:
    """n labelled points with a scale tag; points are pairwise distinct."""

    points: np.ndarray
    scale: str = MACROSCOPIC

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.ndim != 2:
            raise DomainError("points must be an (n, d) array")
        if self.scale not in (MACROSCOPIC, BLOWN_UP):
            raise DomainError(f"unknown scale tag {self.scale!r}")
        if pts.shape[0] >= 2 and backend.min_separation(pts) == 0.0:
            raise DomainError("configuration has coincident points")
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


# ---------------------------------------------------------------------------
# Density fields


@dataclass(frozen=True)
class DensityField:
    """Equilibrium density (or its blow-up) with support geometry and bounds.

    profile tags the analytic catalogue entries ("semicircle", "uniform-ball",
    or "custom"); catalogue entries carry closed-form potential/energy data
    used as fast paths and cross-checked against quadrature in the tests.
    """

    fn: Callable
    support: Support
    holder_alpha: float
    m_lower: float
    m_upper: float
    blowup_scale: float = 1.0
    holder_norm: Optional[float] = None
    profile: str = "custom"
    profile_params: dict = field(default_factory=dict)
    exact: dict = field(default_factory=dict)  # I, c, h(x), mean_V2 ...

    def __call__(self, x):
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        vals = np.where(self.support.contains(pts),
                        np.asarray(self.fn(pts), dtype=float), 0.0)
        return vals if np.ndim(x) > 1 else float(vals[0])

    @property
    def d(self) -> int:
        return self.support.d

    @property
    def total_mass(self) -> float:
        """1 at macroscopic scale, n after blow-up (by the change of variables)."""
        return self.blowup_scale ** self.d


def semicircle_density(radius: float) -> Callable:
    def fn(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))[:, 0]
        val = radius ** 2 - x ** 2
        return (2.0 / (math.pi * radius ** 2)) * np.sqrt(np.maximum(val, 0.0))
    return fn


def equilibrium_measure(model: GasModel) -> DensityField:
    """Analytic catalogue lookup; raises UnsupportedModelError otherwise.

    * d=1 log gas, V = a x^2: semicircle of radius R = sqrt(2/a).
    * Coulomb cases (k=0), V = a|x|^2: uniform ball of density a*d/c_{s,d}.
    """
    spec = model.kernel
    pot = model.potential
    if not isinstance(pot, QuadraticPotential):
        raise UnsupportedModelError(
            "equilibrium catalogue covers quadratic potentials only; supply a "
            "DensityField for custom models")
    a = pot.a

    if spec.kind == "log1d":
        R = math.sqrt(2.0 / a)
        # I(mu) = 3/4 - log(R/2); c = 1/2 - log(R/2); h closed form both sides
        logR2 = math.log(R / 2.0)

        def h_exact(x):
            x = np.atleast_2d(np.asarray(x, dtype=float))[:, 0]
            inside = 0.5 - logR2 - x ** 2 / R ** 2
            ax = np.abs(x)
            root = np.sqrt(np.maximum(ax ** 2 - R ** 2, 0.0))
            # -U with U the exterior semicircle log-potential; the log argument
            # is clamped because the outside branch is discarded for ax <= R
            outside = -(-0.5 + (ax / R) ** 2 - ax * root / R ** 2
                        + np.log(np.maximum((ax + root) / 2.0, 1e-300)))
            return np.where(ax <= R, inside, outside)

        return DensityField(
            fn=semicircle_density(R),
            support=Support.interval(-R, R),
            holder_alpha=0.5,
            m_lower=0.0,
            m_upper=2.0 / (math.pi * R),
            holder_norm=(2.0 / (math.pi * R ** 2)) * math.sqrt(2.0 * R),
            profile="semicircle",
            profile_params={"radius": R, "a": a},
            exact={"I": 0.75 - logR2, "c": 0.5 - logR2, "h": h_exact,
                   "mean_V": a * R ** 2 / 4.0},
        )

    if spec.coulomb:
        d = spec.d
        csd = csd_constant(spec)
        m = a * d / csd
        R = (csd / (a * d * unit_ball_volume(d))) ** (1.0 / d)
        gR = float(g_of_r(spec, R))
        mean_r2 = R ** 2 * d / (d + 2.0)
        I_exact = gR + 0.5 * a * (R ** 2 - mean_r2) + a * mean_r2
        c_exact = I_exact - 0.5 * a * mean_r2

        def h_exact(x):
            x = np.atleast_2d(np.asarray(x, dtype=float))
            r = np.linalg.norm(x, axis=1)
            inside = gR + 0.5 * a * (R ** 2 - r ** 2)
            outside = g_of_r(spec, np.maximum(r, R))
            return np.where(r <= R, inside, outside)

        return DensityField(
            fn=lambda x: np.full(np.atleast_2d(x).shape[0], m),
            support=Support.ball((0.0,) * d, R),
            holder_alpha=1.0,
            m_lower=m,
            m_upper=m,
            holder_norm=0.0,
            profile="uniform-ball",
            profile_params={"radius": R, "density": m, "a": a},
            exact={"I": I_exact, "c": c_exact, "h": h_exact,
                   "mean_V": a * mean_r2},
        )

    raise UnsupportedModelError(
        f"no catalogue equilibrium measure for kind={spec.kind}, d={spec.d}, "
        f"s={spec.s} (k={spec.k}); supply a DensityField explicitly")


DENSITY_CATALOGUE = ("semicircle", "uniform-ball")


# ---------------------------------------------------------------------------
# Potentials of densities (h^mu) by quadrature


def potential_of_density(spec: KernelSpec, mu: DensityField, x) -> np.ndarray:
    """h^mu(x) = int g(x - y) dmu(y) by quadrature.

    Radial uniform-ball densities in the Coulomb cases reduce by Newton's
    theorem to a 1D shell integral; d=1 densities use panels refined toward
    the kernel singularity; d=2 densities integrate in polar coordinates
    around the singular point.
    """
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    if mu.profile == "uniform-ball" and spec.coulomb:
        out = _h_uniform_ball_newton(spec, mu, pts)
    elif mu.d == 1:
        out = _h_1d(spec, mu, pts)
    elif mu.d == 2:
        out = _h_2d_polar(spec, mu, pts)
    else:
        raise NumericError("h^mu quadrature implemented for d <= 2 "
                           "(catalogue models use closed forms)")
    if not np.all(np.isfinite(out)):
        raise NumericError("h^mu quadrature produced non-finite values")
    return out if np.ndim(x) > 1 else float(out[0])


def _h_uniform_ball_newton(spec: KernelSpec, mu: DensityField,
                           pts: np.ndarray) -> np.ndarray:
    """Newton's theorem: a shell of radius rho acts like g(max(r, rho))."""
    R = mu.profile_params["radius"]
    m = mu.profile_params["density"]
    center = np.asarray(mu.support.center)
    r = np.linalg.norm(pts - center, axis=1)
    d = spec.d
    area = unit_sphere_area(d)
    rho, w = gl_panels(0.0, R, 32, 12)
    shell = m * area * rho ** (d - 1)
    rr = np.maximum(r[:, None], rho[None, :])
    vals = g_of_r(spec, rr)
    return vals @ (w * shell)


def _h_1d(spec: KernelSpec, mu: DensityField, pts: np.ndarray) -> np.ndarray:
    out = np.empty(pts.shape[0])
    if mu.support.kind == "ball":
        # y = c + R sin t regularizes sqrt-vanishing densities at the edges;
        # the kernel singularity is handled by panels refined toward t0
        c = mu.support.center[0]
        R = mu.support.radius
        for i, x0 in enumerate(pts[:, 0]):
            u = (x0 - c) / R
            t0 = math.asin(min(max(u, -1.0), 1.0)) if abs(u) <= 1 else math.copysign(2.0, u)
            t, w = geometric_panels(-math.pi / 2, math.pi / 2, t0, order=16)
            y = c + R * np.sin(t)
            diff = np.abs(x0 - y)
            vals = g_of_r(spec, np.maximum(diff, 1e-300)) * mu(y[:, None])
            out[i] = float(np.dot(w * R * np.cos(t), vals))
        return out
    box = mu.support.bounding_box()
    lo, hi = float(box.lo[0]), float(box.hi[0])
    for i, x0 in enumerate(pts[:, 0]):
        nodes, w = geometric_panels(lo, hi, x0, order=16)
        diff = np.abs(x0 - nodes)
        vals = g_of_r(spec, np.maximum(diff, 1e-300)) * mu(nodes[:, None])
        out[i] = float(np.dot(w, vals))
    return out


def _h_2d_polar(spec: KernelSpec, mu: DensityField, pts: np.ndarray,
                n_theta: int = 64, r_panels: int = 32, r_order: int = 8,
                chunk: int = 128) -> np.ndarray:
    """Polar integration around each evaluation point; r*g(r) is integrable."""
    box = mu.support.bounding_box()
    out = np.empty(pts.shape[0])
    theta = (np.arange(n_theta) + 0.5) * (2 * math.pi / n_theta)
    dirs = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    for start in range(0, pts.shape[0], chunk):
        blk = pts[start:start + chunk]
        # farthest box corner from each point bounds the radial range
        far = np.maximum(np.abs(box.hi - blk), np.abs(blk - box.lo))
        rmax = float(np.sqrt((far ** 2).sum(axis=1)).max())
        rr, w = gl_panels(0.0, rmax, r_panels, r_order)
        nodes = (blk[:, None, None, :]
                 + rr[None, :, None, None] * dirs[None, None, :, :])
        dens = mu(nodes.reshape(-1, 2)).reshape(blk.shape[0], rr.size, n_theta)
        ang_mean = dens.mean(axis=2)
        radial = rr * g_of_r(spec, np.maximum(rr, 1e-300))
        out[start:start + chunk] = 2 * math.pi * (ang_mean * radial) @ w
    return out


def density_mass(mu: DensityField, order: int = 24) -> float:
    """Total mass by quadrature (1 macroscopic, n^d/... after blow-up).

    Ball supports in d=1 use the sine substitution (edge-vanishing densities
    become smooth); uniform balls are exact; generic supports use tensor GL.
    """
    if mu.profile == "uniform-ball":
        R = mu.profile_params["radius"]
        return mu.profile_params["density"] * unit_ball_volume(mu.d) * R ** mu.d
    box = mu.support.bounding_box()
    if mu.d == 1:
        if mu.support.kind == "ball":
            c, R = mu.support.center[0], mu.support.radius
            t, w = gl_panels(-math.pi / 2, math.pi / 2, 32, order)
            y = c + R * np.sin(t)
            return float(np.dot(w * R * np.cos(t), mu(y[:, None])))
        x, w = gl_panels(float(box.lo[0]), float(box.hi[0]), 64, order)
        return float(np.dot(w, mu(x[:, None])))
    rules = [gl_panels(a, b, 48, 12) for a, b in zip(box.lo, box.hi)]
    from ._quad import tensor_nodes
    pts, w = tensor_nodes(box.lo, box.hi, rules)
    return float(np.dot(w, mu(pts)))


def mean_potential(model: GasModel, mu: DensityField) -> float:
    """int V dmu (closed form for catalogue entries, quadrature otherwise)."""
    if "mean_V" in mu.exact and isinstance(model.potential, QuadraticPotential):
        return mu.exact["mean_V"]
    box = mu.support.bounding_box()
    if mu.d == 1:
        if mu.support.kind == "ball":
            c, R = mu.support.center[0], mu.support.radius
            t, w = gl_panels(-math.pi / 2, math.pi / 2, 32, 20)
            x = c + R * np.sin(t)
            return float(np.dot(w * R * np.cos(t),
                                model.potential(x[:, None]) * mu(x[:, None])))
        x, w = gl_panels(float(box.lo[0]), float(box.hi[0]), 64, 20)
        return float(np.dot(w, model.potential(x[:, None]) * mu(x[:, None])))
    rules = [gl_panels(a, b, 48, 10) for a, b in zip(box.lo, box.hi)]
    from ._quad import tensor_nodes
    pts, w = tensor_nodes(box.lo, box.hi, rules)
    return float(np.dot(w, model.potential(pts) * mu(pts)))


def meanfield_energy(model: GasModel, mu: DensityField,
                     force_quadrature: bool = False) -> float:
    """I(mu) = int int g d(mu x mu) + int V dmu.

    Catalogue entries return the closed-form value; custom densities pair
    the h^mu quadrature with an outer integral (target tolerance 1e-5).
    """
    if mu.blowup_scale != 1.0:
        raise DomainError("meanfield_energy expects a macroscopic density")
    if not force_quadrature and "I" in mu.exact:
        return mu.exact["I"]
    spec = model.kernel
    box = mu.support.bounding_box()
    if mu.d == 1:
        x, w = gl_panels(float(box.lo[0]), float(box.hi[0]), 48, 12)
        hvals = potential_of_density(spec, mu, x[:, None])
        pair = float(np.dot(w, hvals * mu(x[:, None])))
    elif mu.d == 2:
        rules = [gl_panels(a, b, 10, 6) for a, b in zip(box.lo, box.hi)]
        from ._quad import tensor_nodes
        pts, w = tensor_nodes(box.lo, box.hi, rules)
        dens = mu(pts)
        live = dens > 0
        hvals = np.zeros(pts.shape[0])
        hvals[live] = potential_of_density(spec, mu, pts[live])
        pair = float(np.dot(w, hvals * dens))
    else:
        raise NumericError("meanfield quadrature implemented for d <= 2")
    return pair + mean_potential(model, mu)


def robin_constant(model: GasModel, mu: DensityField) -> float:
    """c = I(mu_V) - int (V/2) dmu_V."""
    if "c" in mu.exact:
        return mu.exact["c"]
    return meanfield_energy(model, mu) - 0.5 * mean_potential(model, mu)


def zeta(model: GasModel, mu: DensityField, x, clamp: float = 1e-8):
    """Effective potential zeta = h^mu + V/2 - c; >= 0, zero on the support.

    Tiny negatives (> -1e-8) on the support are clamped to 0.
    """
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    if "h" in mu.exact:
        h = np.asarray(mu.exact["h"](pts), dtype=float)
    else:
        h = np.asarray(potential_of_density(model.kernel, mu, pts), dtype=float)
    c = robin_constant(model, mu)
    vals = h + 0.5 * model.potential(pts) - c
    on_support = mu.support.contains(pts)
    fix = on_support & (vals < 0) & (vals > -clamp)
    vals = np.where(fix, 0.0, vals)
    return vals if np.ndim(x) > 1 else float(vals[0])


# ---------------------------------------------------------------------------
# Blow-up


def blow_up(config: Configuration, mu_V: DensityField):
    """Microscopic rescaling x' = n^(1/d) x with m'_V(x') = m_V(x).

    Returns the blown-up configuration and density; the Hoelder seminorm
    rescales by n^(-alpha/d) and the support dilates by n^(1/d).
    """
    if config.scale != MACROSCOPIC or mu_V.blowup_scale != 1.0:
        raise DomainError("blow_up expects macroscopic inputs")
    n, d = config.n, config.d
    lam = n ** (1.0 / d)
    fn = mu_V.fn
    new = DensityField(
        fn=lambda x: np.asarray(fn(np.asarray(x, dtype=float) / lam), dtype=float),
        support=mu_V.support.scaled(lam),
        holder_alpha=mu_V.holder_alpha,
        m_lower=mu_V.m_lower,
        m_upper=mu_V.m_upper,
        blowup_scale=lam,
        holder_norm=(None if mu_V.holder_norm is None
                     else mu_V.holder_norm / lam ** mu_V.holder_alpha),
        profile=mu_V.profile,
        profile_params=_scaled_params(mu_V, lam),
    )
    return Configuration(config.points * lam, scale=BLOWN_UP), new


def blow_down(config: Configuration, mu_V: DensityField):
    """Inverse of blow_up (bijectivity is a tested invariant)."""
    if config.scale != BLOWN_UP:
        raise DomainError("blow_down expects a blown-up configuration")
    n, d = config.n, config.d
    lam = n ** (1.0 / d)
    fn = mu_V.fn
    new = DensityField(
        fn=lambda x: np.asarray(fn(np.asarray(x, dtype=float) * lam), dtype=float),
        support=mu_V.support.scaled(1.0 / lam),
        holder_alpha=mu_V.holder_alpha,
        m_lower=mu_V.m_lower,
        m_upper=mu_V.m_upper,
        blowup_scale=1.0,
        holder_norm=(None if mu_V.holder_norm is None
                     else mu_V.holder_norm * lam ** mu_V.holder_alpha),
        profile=mu_V.profile,
        profile_params=_scaled_params(mu_V, 1.0 / lam, from_blown=True),
    )
    return Configuration(config.points / lam, scale=MACROSCOPIC), new


def _scaled_params(mu: DensityField, lam: float, from_blown: bool = False) -> dict:
    params = dict(mu.profile_params)
    if "radius" in params:
        params["radius"] = params["radius"] * lam
    return params
