"""Constructive geometry: hyperrectangles, density-balanced subdivision,
good-boundary/vertical slice selection, crenel boundaries, and the
screening-parameter arithmetic.

All operations are pure and deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from ._quad import gl_nodes, gl_panels
from .errors import GeometryError, InfeasibleError


def unit_ball_volume(d: int) -> float:
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


def unit_sphere_area(d: int) -> float:
    """Surface area of S^{d-1} in R^d (d >= 1; |S^0| = 2)."""
    return 2 * math.pi ** (d / 2) / math.gamma(d / 2)


# ---------------------------------------------------------------------------
# Hyperrectangle


@dataclass(frozen=True)
class Hyperrectangle:
    """Axis-aligned box; the cube K_l(a) is centered at a with side l."""

    center: tuple
    half_lengths: tuple

    def __post_init__(self):
        c = tuple(float(v) for v in self.center)
        h = tuple(float(v) for v in self.half_lengths)
        if len(c) != len(h):
            raise GeometryError("center and half_lengths dimension mismatch")
        if any(v <= 0 for v in h):
            raise GeometryError("half_lengths must be positive")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "half_lengths", h)

    # -- constructors
    @classmethod
    def cube(cls, center: Sequence[float], side: float) -> "Hyperrectangle":
        center = tuple(float(v) for v in center)
        return cls(center, tuple(side / 2 for _ in center))

    @classmethod
    def from_bounds(cls, lo: Sequence[float], hi: Sequence[float]) -> "Hyperrectangle":
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        return cls(tuple((lo + hi) / 2), tuple((hi - lo) / 2))

    # -- basic geometry
    @property
    def d(self) -> int:
        return len(self.center)

    @property
    def lo(self) -> np.ndarray:
        return np.asarray(self.center) - np.asarray(self.half_lengths)

    @property
    def hi(self) -> np.ndarray:
        return np.asarray(self.center) + np.asarray(self.half_lengths)

    @property
    def side_lengths(self) -> np.ndarray:
        return 2 * np.asarray(self.half_lengths)

    @property
    def volume(self) -> float:
        return float(np.prod(self.side_lengths))

    def is_cube(self, tol: float = 1e-12) -> bool:
        h = self.half_lengths
        return max(h) - min(h) <= tol * max(h)

    def contains(self, points, half_open: bool = False) -> np.ndarray:
        """Membership mask; half_open uses [lo, hi) so lattice counts are exact."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        lo, hi = self.lo, self.hi
        if half_open:
            mask = np.all((pts >= lo) & (pts < hi), axis=1)
        else:
            mask = np.all((pts >= lo) & (pts <= hi), axis=1)
        return mask if np.ndim(points) > 1 else bool(mask[0])

    def boundary_distance(self, points) -> np.ndarray:
        """Euclidean distance to the boundary (valid inside and outside)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        lo, hi = self.lo, self.hi
        below = lo - pts
        above = pts - hi
        outside = np.maximum(np.maximum(below, above), 0.0)
        dist_out = np.sqrt((outside ** 2).sum(axis=1))
        inside_gap = np.minimum(pts - lo, hi - pts).min(axis=1)
        res = np.where(dist_out > 0, dist_out, inside_gap)
        return res if np.ndim(points) > 1 else float(res[0])

    def dilate(self, r: float) -> "Hyperrectangle":
        return Hyperrectangle(self.center, tuple(h + r for h in self.half_lengths))

    def shrink_sides(self, delta: float) -> "Hyperrectangle":
        """Concentric box with every side length reduced by delta."""
        return Hyperrectangle(self.center,
                              tuple(h - delta / 2 for h in self.half_lengths))

    def translated(self, vec) -> "Hyperrectangle":
        c = tuple(a + b for a, b in zip(self.center, vec))
        return Hyperrectangle(c, self.half_lengths)

    def scaled(self, factor: float) -> "Hyperrectangle":
        return Hyperrectangle(tuple(factor * v for v in self.center),
                              tuple(factor * h for h in self.half_lengths))

    def intersection_volume(self, other: "Hyperrectangle") -> float:
        lo = np.maximum(self.lo, other.lo)
        hi = np.minimum(self.hi, other.hi)
        return float(np.prod(np.maximum(hi - lo, 0.0)))

    def key(self) -> tuple:
        return (self.center, self.half_lengths)


# ---------------------------------------------------------------------------
# Subdivision of a hyperrectangle into unit rho-mass cells


def _face_axis_side(face, d: int):
    """Normalize a face index: int in [0, 2d) maps to (axis, side)."""
    if isinstance(face, tuple):
        axis, side = face
    else:
        axis, side = int(face) // 2, ("low", "high")[int(face) % 2]
    if not (0 <= axis < d) or side not in ("low", "high"):
        raise GeometryError(f"invalid face index {face!r} for dimension {d}")
    return axis, side


class _Marginal:
    """Density on the live axes of a box after integrating out some axes.

    Collapsed axes carry fixed 1D quadrature rules; evaluation expands the
    tensor grid, evaluates the original density, and contracts the weights.
    """

    def __init__(self, rho: Callable, d: int, collapsed=None):
        self.rho = rho
        self.d = d
        self.collapsed = dict(collapsed or {})  # axis -> (nodes, weights)

    @property
    def live_axes(self):
        return [a for a in range(self.d) if a not in self.collapsed]

    def collapse(self, axis: int, lo: float, hi: float,
                 order: int = 24) -> "_Marginal":
        panels = max(1, int(math.ceil((hi - lo) / 2.0)))
        nodes, weights = gl_panels(lo, hi, panels, order)
        merged = dict(self.collapsed)
        merged[axis] = (nodes, weights)
        return _Marginal(self.rho, self.d, merged)

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        live = self.live_axes
        if len(live) != pts.shape[1]:
            raise GeometryError("marginal evaluated with wrong dimension")
        caxes = sorted(self.collapsed)
        shape = [pts.shape[0]] + [len(self.collapsed[a][0]) for a in caxes]
        full = np.empty(tuple(shape) + (self.d,))
        for i, a in enumerate(live):
            sl = pts[:, i].reshape([-1] + [1] * len(caxes))
            full[..., a] = sl
        for j, a in enumerate(caxes):
            sh = [1] * (len(caxes) + 1)
            sh[j + 1] = len(self.collapsed[a][0])
            full[..., a] = self.collapsed[a][0].reshape(sh)
        vals = np.asarray(self.rho(full.reshape(-1, self.d)), dtype=float)
        vals = vals.reshape(shape)
        for j, a in enumerate(reversed(caxes)):
            vals = np.tensordot(vals, self.collapsed[a][1], axes=([vals.ndim - 1], [0]))
        return vals


def _cut_points(line_density: Callable[[np.ndarray], np.ndarray],
                lo: float, hi: float, targets: Sequence[float],
                total: float) -> list:
    """Find tau_k with cumulative mass(lo..tau_k) = targets[k] (increasing).

    Newton iterations with bisection safeguard; the density is the exact
    derivative of the cumulative mass.
    """
    order = 24
    panels = max(2, int(math.ceil((hi - lo) / 1.5)))
    base_x, base_w = gl_panels(lo, hi, panels, order)
    base_vals = np.asarray(line_density(base_x[:, None]), dtype=float)
    if np.any(base_vals <= 0):
        raise GeometryError("density must be strictly positive on the box")
    edges = np.linspace(lo, hi, panels + 1)
    per_panel = base_vals.reshape(panels, order) * base_w.reshape(panels, order)
    prefix = np.concatenate([[0.0], np.cumsum(per_panel.sum(axis=1))])

    def cumulative(tau: float) -> float:
        idx = min(int((tau - lo) / (hi - lo) * panels), panels - 1)
        idx = max(idx, 0)
        x, w = gl_nodes(edges[idx], tau, order)
        return prefix[idx] + float(np.dot(w, line_density(x[:, None])))

    cuts = []
    lo_b = lo
    for tgt in targets:
        a_b, b_b = lo_b, hi
        tau = lo_b + (hi - lo_b) * tgt / total  # initial guess
        for _ in range(80):
            f = cumulative(tau) - tgt
            if abs(f) <= 1e-13 * max(total, 1.0):
                break
            if f > 0:
                b_b = tau
            else:
                a_b = tau
            dens = float(np.asarray(line_density(np.array([[tau]]))).reshape(-1)[0])
            step = f / dens
            tau_new = tau - step
            if not (a_b < tau_new < b_b):
                tau_new = 0.5 * (a_b + b_b)
            tau = tau_new
        cuts.append(tau)
        lo_b = tau
    return cuts


def _subdivide_rec(box_lo, box_hi, marg: _Marginal, mass: int,
                   face_axis: int, face_side: str, rho_lo: float,
                   rho_hi: float) -> list:
    """Recursive body of the subdivision lemma; returns (lo, hi) cell bounds
    in the live-axis coordinates of `marg`."""
    m = len(box_lo)
    live = marg.live_axes
    axis = face_axis  # strip axis is perpendicular to the special face
    a_lo, a_hi = box_lo[axis], box_hi[axis]

    if m == 1:
        cuts = _cut_points(marg, a_lo, a_hi, list(range(1, mass)), mass)
        edges = [a_lo] + cuts + [a_hi]
        return [(np.array([p]), np.array([q])) for p, q in zip(edges[:-1], edges[1:])]

    length = a_hi - a_lo
    b = math.floor(mass / length)
    if b < 1:
        raise GeometryError(
            "subdivision hypothesis violated: strip mass floor(rho_tilde*|F|) < 1 "
            "(sidelengths must satisfy l_i >= 2/rho_lower)")
    # remainder strip carries mass in [b, 2b): with mass = q*b + r it is b + r
    n_full = mass // b - 1
    rem = mass - n_full * b
    assert b <= rem < 2 * b, (mass, b, rem)

    line = _make_line_density(marg, axis, box_lo, box_hi)
    if face_side == "low":
        targets = [b * (k + 1) for k in range(n_full)]
        strip_masses = [b] * n_full + [rem]
    else:
        # mirror: full strips adjacent to the high face, remainder at the low end
        targets = [rem + b * k for k in range(n_full)]
        strip_masses = [rem] + [b] * n_full
    cuts = _cut_points(line, a_lo, a_hi, targets, mass)
    edges = [a_lo] + cuts + [a_hi]

    live_axis = live[axis]
    cells = []
    sub_axes = [i for i in range(m) if i != axis]
    for (s_lo, s_hi), s_mass in zip(zip(edges[:-1], edges[1:]), strip_masses):
        sub_marg = marg.collapse(live_axis, s_lo, s_hi)
        sub_lo = [box_lo[i] for i in sub_axes]
        sub_hi = [box_hi[i] for i in sub_axes]
        sub_cells = _subdivide_rec(sub_lo, sub_hi, sub_marg, s_mass,
                                   0, "low", rho_lo * (s_hi - s_lo),
                                   rho_hi * (s_hi - s_lo))
        for c_lo, c_hi in sub_cells:
            full_lo = np.empty(m)
            full_hi = np.empty(m)
            full_lo[sub_axes] = c_lo
            full_hi[sub_axes] = c_hi
            full_lo[axis] = s_lo
            full_hi[axis] = s_hi
            cells.append((full_lo, full_hi))
    return cells


def _make_line_density(marg: _Marginal, axis: int, box_lo, box_hi):
    """1D density along `axis` with every other live axis integrated out."""
    live = marg.live_axes
    collapsed = marg
    for i, a in enumerate(live):
        if i != axis:
            collapsed = collapsed.collapse(a, box_lo[i], box_hi[i])

    def line(t):
        return collapsed(np.asarray(t, dtype=float).reshape(-1, 1))

    return line


def subdivide(box: Hyperrectangle, rho: Callable, face) -> list:
    """Partition `box` into unit rho-mass subrectangles.

    The total rho-mass of the box must be a positive integer (to 1e-9) with
    rho bounded on the box and every side at least 2/rho_lower.  All cells
    touching the special face share the same thickness perpendicular to it,
    and the remainder strip is placed farthest from that face.
    Returns a list of Hyperrectangle cells.
    """
    d = box.d
    axis, side = _face_axis_side(face, d)
    lo, hi = box.lo, box.hi
    total = _box_mass(rho, lo, hi)
    mass = round(total)
    if mass < 1 or abs(total - mass) > 1e-9 * max(1.0, mass):
        raise GeometryError(
            f"subdivision hypothesis violated: box rho-mass {total!r} is not a "
            "positive integer (within 1e-9)")

    probe, _ = _probe_density(rho, lo, hi)
    rho_lo, rho_hi = float(probe.min()), float(probe.max())
    if rho_lo <= 0:
        raise GeometryError("subdivision hypothesis violated: rho not bounded "
                            "below by a positive constant")
    sides = box.side_lengths
    if np.any(sides < 2.0 / rho_lo - 1e-12):
        raise GeometryError(
            "subdivision hypothesis violated: a sidelength is below 2/rho_lower")

    # reorder live axes so the strip axis is first in recursion coordinates
    perm = [axis] + [i for i in range(d) if i != axis]
    rho_perm = rho if perm == list(range(d)) else _PermutedDensity(rho, perm)
    marg = _Marginal(rho_perm, d)
    lo_p = [lo[a] for a in perm]
    hi_p = [hi[a] for a in perm]
    cells = _subdivide_rec(lo_p, hi_p, marg, mass, 0, side, rho_lo, rho_hi)

    inv = np.argsort(perm)
    result = []
    for c_lo, c_hi in cells:
        result.append(Hyperrectangle.from_bounds(c_lo[inv], c_hi[inv]))
    return result


class _PermutedDensity:
    def __init__(self, rho, perm):
        self.rho = rho
        self.inv = np.argsort(perm)

    def __call__(self, pts):
        return self.rho(np.asarray(pts)[:, self.inv])


def _probe_density(rho, lo, hi, n: int = 9):
    axes = [np.linspace(a, b, n) for a, b in zip(lo, hi)]
    grids = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    return np.asarray(rho(pts), dtype=float), pts


def _box_mass(rho, lo, hi, order: int = 24) -> float:
    rules = []
    for a, b in zip(lo, hi):
        panels = max(1, int(math.ceil((b - a) / 2.0)))
        rules.append(gl_panels(a, b, panels, order))
    grids = np.meshgrid(*[r[0] for r in rules], indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    w = np.ones(pts.shape[0])
    wgrids = np.meshgrid(*[r[1] for r in rules], indexing="ij")
    for wg in wgrids:
        w = w * wg.ravel()
    return float(np.dot(w, np.asarray(rho(pts), dtype=float)))


def cell_mass(rho, cell: Hyperrectangle, order: int = 24) -> float:
    """rho-mass of a cell (used by callers to verify partitions)."""
    return _box_mass(rho, cell.lo, cell.hi, order=order)


# ---------------------------------------------------------------------------
# Good slices


def good_boundary_slice(energy_profile: Callable[[float], float],
                        K_L: Hyperrectangle, l: float,
                        samples: int = 32) -> Hyperrectangle:
    """Concentric rectangle whose boundary shell carries little energy.

    Scans the shrink parameter tau over [L-2l, L-l) (L = min side) with a
    uniform grid of at least 32 samples and returns the concentric rectangle
    with every side reduced by L - tau*.  The minimizer of a scan is at most
    the scan average, which is the mean-value guarantee callers rely on.
    """
    L = float(np.min(K_L.side_lengths))
    if not (0 < l <= L / 3):
        raise GeometryError("good_boundary_slice requires l in (0, L/3]")
    samples = max(32, int(samples))
    taus = np.linspace(L - 2 * l, L - l, samples, endpoint=False)
    values = np.array([float(energy_profile(t)) for t in taus])
    tau_star = float(taus[int(np.argmin(values))])
    return K_L.shrink_sides(L - tau_star)


def good_vertical_slice(tail_profile: Callable[[float], float], t: float,
                        samples: int = 33) -> float:
    """Height t' in [t/2, t] minimizing a scanned horizontal-slab energy."""
    if t <= 0:
        raise GeometryError("good_vertical_slice requires t > 0")
    samples = max(33, int(samples))
    ts = np.linspace(t / 2, t, samples)
    values = np.array([float(tail_profile(v)) for v in ts])
    return float(ts[int(np.argmin(values))])


# ---------------------------------------------------------------------------
# Crenel boundaries


def crenel_r1_bound(d: int, r0: float, ell: float) -> float:
    """Admissible r1 threshold from the packing volume comparison."""
    if r0 <= 0 or ell <= 1:
        raise GeometryError("crenel bound needs r0 > 0 and ell > 1")
    shell = (ell + 1) ** d - (ell - 1) ** d
    return unit_ball_volume(d) * (r0 / 2) ** d / shell


def crenel_cube(points, K_l: Hyperrectangle, r1: float,
                r0: Optional[float] = None,
                enforce_packing_bound: bool = True) -> Hyperrectangle:
    """Concentric cube K_{l+tau} whose boundary clears every ball B(p, r1).

    tau is scanned over [-1, 1] with step <= r1/4, ordered by increasing |tau|
    with positive offsets first; the first feasible cube is returned.  The
    packing precondition r1 < C r0^d l^{1-d} guarantees a feasible tau
    exists; enforce_packing_bound=False lets callers attempt larger
    clearances and handle InfeasibleError themselves.
    """
    if not K_l.is_cube():
        raise GeometryError("crenel_cube expects a cube window")
    pts = np.asarray(points, dtype=float).reshape(-1, K_l.d)
    ell = float(K_l.side_lengths[0])
    if pts.shape[0] == 0:
        return K_l
    if r0 is None:
        r0 = min_separation(pts) if pts.shape[0] >= 2 else math.inf
    bound = crenel_r1_bound(K_l.d, min(r0, 1.0), ell) if math.isfinite(r0) else math.inf
    if enforce_packing_bound and r1 >= bound:
        raise GeometryError(
            f"crenel precondition violated: r1={r1:.3g} >= packing bound {bound:.3g}")

    # only points near the scanned boundary band can obstruct
    band = K_l.dilate(1.0 + r1)
    inner = ell / 2 - 1.0 - r1
    near = pts[band.contains(pts)]
    if inner > 0:
        core = Hyperrectangle.cube(K_l.center, 2 * inner)
        near = near[~core.contains(near)]

    step = r1 / 4
    n_steps = int(math.ceil(1.0 / step))
    offsets = [0.0]
    for k in range(1, n_steps + 1):
        tau = min(k * step, 1.0)
        offsets.extend([tau, -tau])
    for tau in offsets:
        side = ell + tau
        if side <= 0:
            continue
        cand = Hyperrectangle.cube(K_l.center, side)
        if near.shape[0] == 0 or np.all(cand.boundary_distance(near) >= r1):
            return cand
    raise InfeasibleError(
        "no feasible crenel offset found; reduce r1 (packing margin too tight)")


@dataclass(frozen=True)
class CrenelDomain:
    """Union of a core cube with bump cubes around boundary-straddling charges."""

    core: Hyperrectangle
    bumps: tuple = field(default_factory=tuple)

    @property
    def boxes(self):
        return (self.core,) + tuple(self.bumps)

    def contains(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        mask = np.zeros(pts.shape[0], dtype=bool)
        for b in self.boxes:
            mask |= b.contains(pts)
        return mask if np.ndim(points) > 1 else bool(mask[0])

    @property
    def volume(self) -> float:
        v = self.core.volume
        for b in self.bumps:
            v += b.volume - b.intersection_volume(self.core)
        return v

    def boundary_distance(self, point) -> float:
        """Exact distance from an interior point to the boundary of the union.

        The nearest boundary point lies on some box face, restricted to the
        part not covered by the interiors of the other boxes (d <= 3).
        """
        q = np.asarray(point, dtype=float)
        boxes = self.boxes
        best = math.inf
        for i, box in enumerate(boxes):
            others = [b for j, b in enumerate(boxes) if j != i]
            for axis in range(box.d):
                for side_val in (box.lo[axis], box.hi[axis]):
                    dist = _face_min_distance(q, box, axis, side_val, others)
                    best = min(best, dist)
        return best


def _strictly_inside(box: Hyperrectangle, pt: np.ndarray, tol: float = 1e-12) -> bool:
    return bool(np.all(pt > box.lo + tol) & np.all(pt < box.hi - tol))


def _face_min_distance(q, box, axis, plane, others) -> float:
    """Distance from q to the portion of one box face outside the other boxes."""
    d = box.d
    free = [a for a in range(d) if a != axis]
    lo = box.lo[free]
    hi = box.hi[free]
    qf = q[free]
    dz = q[axis] - plane

    def lift(pt_free):
        full = np.empty(d)
        full[free] = pt_free
        full[axis] = plane
        return full

    covering = []
    for o in others:
        if o.lo[axis] < plane - 1e-12 and o.hi[axis] > plane + 1e-12:
            covering.append((o.lo[free], o.hi[free]))

    clamped = np.clip(qf, lo, hi)
    if not any(np.all(clamped > clo + 1e-12) and np.all(clamped < chi - 1e-12)
               for clo, chi in covering):
        return math.hypot(float(np.linalg.norm(clamped - qf)), dz)

    if d == 2:
        # face is a segment: subtract open covered intervals, clamp into the rest
        segs = [(lo[0], hi[0])]
        for clo, chi in covering:
            new = []
            for a, b in segs:
                if chi[0] <= a or clo[0] >= b:
                    new.append((a, b))
                    continue
                if clo[0] > a:
                    new.append((a, clo[0]))
                if chi[0] < b:
                    new.append((chi[0], b))
            segs = new
        best = math.inf
        for a, b in segs:
            t = min(max(qf[0], a), b)
            best = min(best, math.hypot(t - qf[0], dz))
        return best

    if d == 3:
        # candidates: clipped edges of covering rects and of the face itself
        best = math.inf
        edge_sets = [(lo, hi)] + covering
        for elo, ehi in edge_sets:
            for ax2 in range(2):
                other_ax = 1 - ax2
                for val in (elo[ax2], ehi[ax2]):
                    if not (lo[ax2] - 1e-12 <= val <= hi[ax2] + 1e-12):
                        continue
                    a = max(elo[other_ax], lo[other_ax])
                    b = min(ehi[other_ax], hi[other_ax])
                    if b < a:
                        continue
                    # 1D: subtract other covering rects' strict interiors
                    segs = [(a, b)]
                    for clo, chi in covering:
                        if not (clo[ax2] < val < chi[ax2]):
                            continue
                        new = []
                        for p, r in segs:
                            if chi[other_ax] <= p or clo[other_ax] >= r:
                                new.append((p, r))
                                continue
                            if clo[other_ax] > p:
                                new.append((p, clo[other_ax]))
                            if chi[other_ax] < r:
                                new.append((chi[other_ax], r))
                        segs = new
                    for p, r in segs:
                        t = min(max(qf[other_ax], p), r)
                        pt = np.empty(2)
                        pt[ax2] = val
                        pt[other_ax] = t
                        best = min(best, math.hypot(float(np.linalg.norm(pt - qf)), dz))
        return best

    raise GeometryError("exact crenel boundary distance implemented for d <= 3")


def crenel_domain(points, K_l: Hyperrectangle, r0: float) -> CrenelDomain:
    """K_l enlarged by bump cubes K_{r0/2}(p) around boundary-straddling p.

    Every charge of the input set lying in the result is then at distance at
    least r0/8 from the boundary; K_{l-1} <= Gamma <= K_{l+1}.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, K_l.d)
    if pts.shape[0] >= 2:
        sep = min_separation(pts)
        if sep < r0 - 1e-12:
            raise GeometryError(
                f"crenel_domain requires min separation >= r0 (got {sep:.3g} < {r0:.3g})")
    bumps = []
    for p in pts:
        bump = Hyperrectangle.cube(p, r0 / 2)
        touches_closure = np.all(bump.hi >= K_l.lo) and np.all(bump.lo <= K_l.hi)
        inside_interior = np.all(bump.lo >= K_l.lo) and np.all(bump.hi <= K_l.hi)
        if touches_closure and not inside_interior:
            bumps.append(bump)
    return CrenelDomain(core=K_l, bumps=tuple(bumps))


def min_separation(points) -> float:
    pts = np.asarray(points, dtype=float)
    n = pts.shape[0]
    if n < 2:
        return math.inf
    best = math.inf
    # chunked O(n^2); n stays at desk scale
    for i in range(n - 1):
        diff = pts[i + 1:] - pts[i]
        d2 = (diff ** 2).sum(axis=1)
        best = min(best, float(d2.min()))
    return math.sqrt(best)


# ---------------------------------------------------------------------------
# Screening-parameter arithmetic


@dataclass(frozen=True)
class ScreeningRegime:
    """Parameter bundle for the screening-regime arithmetic (k = 0 or 1)."""

    d: int
    k: int
    b: Optional[float] = None
    delta: Optional[float] = None
    theta: Optional[float] = None
    eps1: Optional[float] = None
    eps2: Optional[float] = None
    L: Optional[float] = None
    gamma: Optional[float] = None
    c0: float = 1.0


@dataclass
class RegimeReport:
    conditions: list  # (name, ok, detail)
    theta_interval: Optional[tuple] = None

    @property
    def ok(self) -> bool:
        return all(c[1] for c in self.conditions)

    def as_dict(self) -> dict:
        return {
            "ok": self.ok,
            "conditions": [
                {"name": n, "ok": bool(o), "detail": det}
                for n, o, det in self.conditions
            ],
            "theta_interval": list(self.theta_interval) if self.theta_interval else None,
        }


def screening_regime_check(reg: ScreeningRegime) -> RegimeReport:
    """Validity report for the screening parameter choices.

    k=0 checks, in order: b > d/(d+2); 1 < delta < 1 + (b(d+2)-d)/(d(d+2));
    theta inside [(delta*d - b)/(d+1), b + (1-delta)*d).  k=1 checks the
    separation-of-scales condition eps1 >= 10*eps2^(1/4) and the lower bound
    on L.
    """
    d = reg.d
    conds = []
    if reg.k == 0:
        if reg.b is None or reg.delta is None:
            raise GeometryError("k=0 regime check needs b and delta")
        b, delta = reg.b, reg.delta
        b_min = d / (d + 2)
        conds.append(("b > d/(d+2)", b > b_min, f"b={b}, d/(d+2)={b_min}"))
        delta_hi = 1 + (b * (d + 2) - d) / (d * (d + 2))
        conds.append(("1 < delta < 1 + (b(d+2)-d)/(d(d+2))",
                      1 < delta < delta_hi,
                      f"delta={delta}, admissible (1, {delta_hi})"))
        theta_lo = (delta * d - b) / (d + 1)
        theta_hi = b + (1 - delta) * d
        interval = (theta_lo, theta_hi)
        conds.append(("theta interval nonempty", theta_lo < theta_hi,
                      f"[{theta_lo}, {theta_hi})"))
        if reg.theta is not None:
            conds.append(("theta in [(delta*d-b)/(d+1), b+(1-delta)d)",
                          theta_lo <= reg.theta < theta_hi,
                          f"theta={reg.theta}"))
        return RegimeReport(conditions=conds, theta_interval=interval)

    if reg.k == 1:
        if reg.eps1 is None or reg.eps2 is None or reg.L is None or reg.gamma is None:
            raise GeometryError("k=1 regime check needs eps1, eps2, L, gamma")
        eps1, eps2, L, gamma, c0 = reg.eps1, reg.eps2, reg.L, reg.gamma, reg.c0
        sep = 10.0 * eps2 ** 0.25
        conds.append(("eps1 >> eps2^(1/4) (factor-10 margin)",
                      eps1 >= sep and eps1 <= 1.0,
                      f"eps1={eps1}, 10*eps2^(1/4)={sep}"))
        L_min = c0 ** (-2.0 / (1 - gamma)) * eps2 ** (-(d - gamma + 1) / (2 * (1 - gamma)))
        conds.append(("L >= c0^(-2/(1-gamma)) * eps2^(-(d-gamma+1)/(2(1-gamma)))",
                      L >= L_min, f"L={L}, L_min={L_min}"))
        return RegimeReport(conditions=conds)

    raise GeometryError(f"k must be 0 or 1, got {reg.k}")
