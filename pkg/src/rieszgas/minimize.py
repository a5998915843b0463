"""Hamiltonian evaluation, gradient descent with Armijo backtracking,
separation checks, and the next-order energy extraction via the splitting
identity.

The Hamiltonian is H_n = sum_{i != j} g(x_i - x_j) + n sum_i V(x_i) with the
interaction summed over ordered pairs (each unordered pair twice).  Descent
yields local minimizers; everything downstream reports results for the
best-found local minimizer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import backend
from .errors import DomainError
from .kernels import KernelSpec
from .model import (BLOWN_UP, Configuration, DensityField, GasModel,
                    equilibrium_measure, meanfield_energy, zeta)


@dataclass(frozen=True)
class MinimizeOptions:
    max_iters: int = 2000
    grad_tol: float = 1e-6
    step0: float = 1e-3
    shrink: float = 0.5
    armijo_c: float = 1e-4
    restarts: int = 1
    seed: int = 0
    max_halvings: int = 60
    collision_guard: float = 1e-12
    gauss_seidel: bool = False  # per-particle sweep when the line search stalls
    gs_sweeps: int = 20

    def __post_init__(self):
        if self.grad_tol <= 0:
            raise DomainError("grad_tol must be positive")
        if not (0.0 < self.shrink < 1.0):
            raise DomainError("shrink factor must lie in (0, 1)")


@dataclass
class MinimizeTrace:
    energies: list = field(default_factory=list)
    grad_norms: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    status: str = "running"

    @property
    def iterations(self) -> int:
        return len(self.energies)

    @property
    def final_energy(self) -> float:
        return self.energies[-1] if self.energies else math.nan


def hamiltonian(model: GasModel, config: Configuration) -> float:
    pts = config.points
    if pts.shape[0] >= 2 and backend.min_separation(pts) == 0.0:
        raise DomainError("coincident points")
    spec = model.kernel
    pair = backend.pair_energy(pts, spec.s, spec.is_log) if pts.shape[0] >= 2 else 0.0
    ext = float(np.sum(model.potential(pts)))
    return 2.0 * pair + model.n * ext


def hamiltonian_gradient(model: GasModel, config: Configuration) -> np.ndarray:
    pts = config.points
    if pts.shape[0] >= 2 and backend.min_separation(pts) == 0.0:
        raise DomainError("coincident points")
    spec = model.kernel
    grad = model.n * model.potential.gradient(pts)
    if pts.shape[0] >= 2:
        grad = grad + 2.0 * backend.pair_gradient(pts, spec.s, spec.is_log)
    return grad


def _raw_energy(model: GasModel, pts: np.ndarray) -> float:
    spec = model.kernel
    pair = backend.pair_energy(pts, spec.s, spec.is_log) if pts.shape[0] >= 2 else 0.0
    return 2.0 * pair + model.n * float(np.sum(model.potential(pts)))


def _particle_interaction(spec: KernelSpec, pts: np.ndarray, i: int,
                          xi: np.ndarray) -> float:
    """sum_{j != i} g(xi - x_j) with particle i placed at xi (O(n))."""
    diff = xi - pts
    r2 = (diff * diff).sum(axis=1)
    r2[i] = 1.0
    vals = -0.5 * np.log(r2) if spec.is_log else r2 ** (-0.5 * spec.s)
    vals[i] = 0.0
    return float(vals.sum())


def _gauss_seidel_sweep(model: GasModel, pts: np.ndarray,
                        opts: MinimizeOptions) -> tuple:
    """One pass of per-particle Armijo moves; returns (points, improved).

    Directions come from the sweep-start gradient (stale after earlier
    moves), but every acceptance re-tests the exact local energy decrease,
    so the total energy stays monotone regardless.
    """
    spec = model.kernel
    improved = False
    grad = model.n * model.potential.gradient(pts)
    if pts.shape[0] >= 2:
        grad = grad + 2.0 * backend.pair_gradient(pts, spec.s, spec.is_log)
    for i in range(pts.shape[0]):
        gi = grad[i]
        g2 = float((gi * gi).sum())
        if g2 == 0.0:
            continue
        base = (2.0 * _particle_interaction(spec, pts, i, pts[i])
                + model.n * float(model.potential(pts[i][None, :])[0]))
        step = opts.step0
        for _ in range(opts.max_halvings):
            cand = pts[i] - step * gi
            diff = cand - pts
            diff[i] = 1.0
            if pts.shape[0] >= 2 and float((diff * diff).sum(axis=1).min()) \
                    < opts.collision_guard ** 2:
                step *= 0.5
                continue
            trial = (2.0 * _particle_interaction(spec, pts, i, cand)
                     + model.n * float(model.potential(cand[None, :])[0]))
            if trial <= base - opts.armijo_c * step * g2:
                pts = pts.copy()
                pts[i] = cand
                improved = True
                break
            step *= opts.shrink
    return pts, improved


def _descent(model: GasModel, pts0: np.ndarray,
             opts: MinimizeOptions) -> tuple:
    pts = pts0.copy()
    trace = MinimizeTrace()
    energy = _raw_energy(model, pts)
    step = opts.step0
    spec = model.kernel
    sweeps_left = opts.gs_sweeps if opts.gauss_seidel else 0

    for _ in range(opts.max_iters):
        grad = model.n * model.potential.gradient(pts)
        if pts.shape[0] >= 2:
            grad = grad + 2.0 * backend.pair_gradient(pts, spec.s, spec.is_log)
        gmax = float(np.abs(grad).max())
        trace.energies.append(energy)
        trace.grad_norms.append(gmax)
        if gmax <= opts.grad_tol:
            trace.steps.append(0.0)
            trace.status = "converged"
            return pts, trace
        g2 = float((grad * grad).sum())
        step = min(step * 2.0, 1e6)  # warm-started backtracking
        accepted = False
        for _h in range(opts.max_halvings):
            cand = pts - step * grad
            if (cand.shape[0] >= 2
                    and backend.min_separation(cand) < opts.collision_guard):
                step *= 0.5
                continue
            cand_energy = _raw_energy(model, cand)
            if cand_energy <= energy - opts.armijo_c * step * g2:
                pts = cand
                energy = cand_energy
                accepted = True
                break
            step *= opts.shrink
        trace.steps.append(step if accepted else 0.0)
        if not accepted:
            if sweeps_left > 0:
                sweeps_left -= 1
                pts, improved = _gauss_seidel_sweep(model, pts, opts)
                if improved:
                    energy = _raw_energy(model, pts)
                    step = opts.step0
                    continue
            trace.status = "stalled"
            return pts, trace

    trace.status = "max_iters"
    return pts, trace


def initial_configuration(model: GasModel, seed: int,
                          support=None) -> Configuration:
    """i.i.d. uniform start from the equilibrium support, seeded."""
    if support is None:
        support = equilibrium_measure(model).support
    rng = np.random.default_rng(seed)
    return Configuration(support.sample(rng, model.n))


def local_minimize(model: GasModel, config0: Configuration,
                   opts: MinimizeOptions, support=None):
    """Gradient descent with Armijo backtracking; best of `restarts` runs.

    Run 0 starts from config0; further runs draw fresh uniform starts from
    the equilibrium support (or a seeded jitter of config0 when the model
    has no catalogue measure).  Deterministic given opts.seed.
    """
    starts = [config0.points]
    if opts.restarts > 1:
        if support is None:
            try:
                support = equilibrium_measure(model).support
            except Exception:
                support = None
        for r in range(1, opts.restarts):
            rng = np.random.default_rng(np.random.SeedSequence((opts.seed, r)))
            if support is not None:
                starts.append(support.sample(rng, model.n))
            else:
                scale = max(1e-3, float(np.abs(config0.points).max()))
                starts.append(config0.points
                              + 0.05 * scale * rng.standard_normal(config0.points.shape))

    best_pts, best_trace, best_energy = None, None, math.inf
    for pts0 in starts:
        pts, trace = _descent(model, pts0, opts)
        if trace.final_energy < best_energy:
            best_pts, best_trace, best_energy = pts, trace, trace.final_energy
    return Configuration(best_pts, scale=config0.scale), best_trace


def separation_check(model: GasModel, config: Configuration,
                     mu_V: DensityField) -> tuple:
    """(min pair distance, min_dist * (n * max m_V)^(1/d)).

    The normalized value is O(1) for macroscopic minimizers; callers compare
    it across n.
    """
    if config.n < 2:
        raise DomainError("separation_check needs n >= 2")
    min_dist = backend.min_separation(config.points)
    normalized = min_dist * (model.n * mu_V.m_upper) ** (1.0 / config.d)
    return min_dist, normalized


@dataclass(frozen=True)
class SplitReport:
    """Two-scale decomposition H_n = leading + zeta_term - log_correction
    + scale * w_n, with scale = n^(1+s/d) (riesz) or n (log kinds)."""

    H_n: float
    leading: float
    zeta_term: float
    log_correction: float
    w_n: float
    scale: float

    def reconstructed(self) -> float:
        return (self.leading + self.zeta_term - self.log_correction
                + self.scale * self.w_n)


def split_energy(model: GasModel, config: Configuration,
                 mu_V: DensityField) -> SplitReport:
    """Solve the splitting identity for the next-order energy w_n.

    The identity holds exactly by construction; the scientific content is
    that w_n stays O(1) across n for minimizers.
    """
    spec = model.kernel
    n = model.n
    H = hamiltonian(model, config)
    leading = n * n * meanfield_energy(model, mu_V)
    zvals = zeta(model, mu_V, config.points)
    zeta_term = 2.0 * n * float(np.sum(zvals))
    log_corr = (n / spec.d) * math.log(n) if spec.is_log else 0.0
    scale = float(n) if spec.is_log else float(n) ** spec.scale_exponent()
    w_n = (H - leading - zeta_term + log_corr) / scale
    return SplitReport(H_n=H, leading=leading, zeta_term=zeta_term,
                       log_correction=log_corr, w_n=w_n, scale=scale)
