import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rieszgas.errors import DomainError, UnsupportedModelError
from rieszgas.geometry import Hyperrectangle
from rieszgas.kernels import KernelSpec
from rieszgas.model import (Configuration, CustomPotential, DensityField,
                            GasModel, QuadraticPotential, Support, blow_down,
                            blow_up, density_mass, equilibrium_measure,
                            mean_potential, meanfield_energy,
                            potential_of_density, zeta)


def zero_potential():
    return CustomPotential(
        fn=lambda x: np.zeros(np.atleast_2d(x).shape[0]),
        grad_fn=lambda x: np.zeros_like(np.atleast_2d(x)), name="zero")


# ---------------------------------------------------------------------------
# Catalogue


def test_semicircle_catalogue(semicircle_model, semicircle_measure):
    mu = semicircle_measure
    assert mu.profile == "semicircle"
    assert mu.profile_params["radius"] == pytest.approx(2.0)
    # density matches (1/2pi) sqrt(4 - x^2)
    xs = np.linspace(-1.9, 1.9, 11)[:, None]
    expect = np.sqrt(4 - xs[:, 0] ** 2) / (2 * math.pi)
    assert np.allclose(mu(xs), expect)
    assert density_mass(mu) == pytest.approx(1.0, abs=1e-8)


def test_uniform_disk_catalogue(disk_model, disk_measure):
    mu = disk_measure
    assert mu.profile == "uniform-ball"
    assert mu.profile_params["radius"] == pytest.approx(1.0)
    assert mu.profile_params["density"] == pytest.approx(1 / math.pi)
    assert density_mass(mu) == pytest.approx(1.0, abs=1e-12)


def test_coulomb_d3_catalogue():
    model = GasModel(KernelSpec.riesz(3, 1.0), QuadraticPotential(1.0), 10)
    mu = equilibrium_measure(model)
    assert mu.profile_params["radius"] == pytest.approx(1.0)
    assert mu.profile_params["density"] == pytest.approx(3 / (4 * math.pi))


def test_uncatalogued_model_raises():
    model = GasModel(KernelSpec.riesz(1, 0.5), zero_potential(), 10)
    with pytest.raises(UnsupportedModelError):
        equilibrium_measure(model)


# ---------------------------------------------------------------------------
# Mean-field energy


def test_disk_pair_energy_quarter(disk_model, disk_measure):
    # iint -log|x-y| dmu dmu = 1/4 for the uniform unit disk; subtract int V
    I = meanfield_energy(disk_model, disk_measure, force_quadrature=True)
    pair = I - mean_potential(disk_model, disk_measure)
    assert pair == pytest.approx(0.25, abs=1e-5)
    # catalogue closed form agrees
    assert meanfield_energy(disk_model, disk_measure) == pytest.approx(0.75)


def test_semicircle_meanfield(semicircle_model, semicircle_measure):
    I_exact = meanfield_energy(semicircle_model, semicircle_measure)
    assert I_exact == pytest.approx(0.75)
    I_quad = meanfield_energy(semicircle_model, semicircle_measure,
                              force_quadrature=True)
    assert I_quad == pytest.approx(I_exact, abs=1e-5)


def test_meanfield_constant_shift(semicircle_measure):
    # adding c to V increases I by exactly c (total mass one)
    c = 0.37
    base = GasModel(KernelSpec.log1d(), zero_potential(), 4)
    shifted = GasModel(KernelSpec.log1d(), CustomPotential(
        fn=lambda x: np.full(np.atleast_2d(x).shape[0], c),
        grad_fn=lambda x: np.zeros_like(np.atleast_2d(x))), 4)
    I0 = meanfield_energy(base, semicircle_measure, force_quadrature=True)
    I1 = meanfield_energy(shifted, semicircle_measure, force_quadrature=True)
    assert I1 - I0 == pytest.approx(c, abs=1e-9)


def test_custom_radial_density_2d_against_closed_form():
    # m(x) = (2/pi)(1 - |x|^2) on the unit disk: Newton's theorem gives
    # h(r) = 3/4 - r^2 + r^4/4 inside and the pair energy 11/24 exactly
    def fn(x):
        x = np.atleast_2d(x)
        r2 = (x * x).sum(axis=1)
        return (2.0 / math.pi) * np.maximum(1.0 - r2, 0.0)

    mu = DensityField(fn=fn, support=Support.ball((0.0, 0.0), 1.0),
                      holder_alpha=1.0, m_lower=0.0, m_upper=2.0 / math.pi)
    spec = KernelSpec.log2d()
    pts = np.array([[0.0, 0.0], [0.3, 0.4], [0.6, 0.0]])
    h = potential_of_density(spec, mu, pts)
    r2 = (pts * pts).sum(axis=1)
    exact = 0.75 - r2 + r2 ** 2 / 4
    assert np.allclose(h, exact, atol=5e-6)

    model = GasModel(spec, zero_potential(), 4)
    I = meanfield_energy(model, mu)
    assert I == pytest.approx(11.0 / 24.0, abs=1e-5)


def test_meanfield_custom_density_vs_monte_carlo():
    # symmetric two-bump density on [-1, 1], V = 0: quadrature vs seeded MC
    box = Hyperrectangle.from_bounds([-1], [1])
    norm = 1.0 / (2.0 + 0.0)  # base density 1 + cos(pi x) integrates to 2

    def fn(x):
        x = np.atleast_2d(x)[:, 0]
        return norm * (1.0 + np.cos(math.pi * x))

    mu = DensityField(fn=fn, support=Support("box", (0.0,), box=box),
                      holder_alpha=1.0, m_lower=0.0, m_upper=2 * norm)
    model = GasModel(KernelSpec.log1d(), zero_potential(), 4)
    I = meanfield_energy(model, mu)

    rng = np.random.default_rng(42)
    N = 400_000
    # rejection sampling from the density
    samples = []
    while len(samples) < 2 * N:
        cand = rng.uniform(-1, 1, 100_000)
        keep = rng.uniform(0, 2 * norm, 100_000) < fn(cand[:, None])
        samples.extend(cand[keep].tolist())
    xs = np.array(samples[:2 * N])
    vals = -np.log(np.abs(xs[:N] - xs[N:]))
    mc = float(vals.mean())
    sem = float(vals.std(ddof=1) / math.sqrt(N))
    assert abs(I - mc) < 4 * sem + 1e-5


# ---------------------------------------------------------------------------
# zeta


def test_zeta_zero_on_support(semicircle_model, semicircle_measure):
    xs = np.linspace(-1.8, 1.8, 9)[:, None]
    vals = zeta(semicircle_model, semicircle_measure, xs)
    assert np.all(vals >= -1e-8)
    assert np.all(vals <= 1e-6)
    # nonnegative on a grid crossing the support boundary as well
    grid = np.linspace(-4.0, 4.0, 33)[:, None]
    assert np.all(zeta(semicircle_model, semicircle_measure, grid) >= -1e-8)


def test_zeta_outside_value_vs_quadrature_oracle(semicircle_model,
                                                 semicircle_measure):
    # zeta(3) = int -log|3-y| dmu + V(3)/2 - c with the integral by an
    # independent high-resolution rule
    val = zeta(semicircle_model, semicircle_measure, [[3.0]])
    ys = np.linspace(-2, 2, 2_000_001)
    dens = semicircle_measure(ys[:, None])
    h3 = float(np.trapezoid(-np.log(np.abs(3.0 - ys)) * dens, ys))
    oracle = h3 + 0.5 * 0.5 * 9.0 - 0.5
    assert val == pytest.approx(oracle, abs=1e-6)
    assert val > 0


def test_zeta_disk_inside(disk_model, disk_measure):
    pts = np.array([[0.0, 0.0], [0.5, 0.2], [0.9, -0.3], [0.0, 0.99]])
    vals = zeta(disk_model, disk_measure, pts)
    assert np.all(np.abs(vals) <= 1e-6)
    out = zeta(disk_model, disk_measure, [[2.0, 0.0]])
    assert out == pytest.approx(-math.log(2.0) + 2.0 - 0.5)


def test_h_quadrature_matches_closed_form(semicircle_model, semicircle_measure):
    xs = np.array([[0.0], [1.0], [1.95], [2.5], [4.0]])
    hq = potential_of_density(semicircle_model.kernel, semicircle_measure, xs)
    hx = semicircle_measure.exact["h"](xs)
    assert np.allclose(hq, hx, atol=1e-9)


def test_h_newton_matches_closed_form(disk_model, disk_measure):
    xs = np.array([[0.0, 0.0], [0.5, 0.0], [0.3, 0.4], [2.0, 0.0]])
    hq = potential_of_density(disk_model.kernel, disk_measure, xs)
    hx = disk_measure.exact["h"](xs)
    assert np.allclose(hq, hx, atol=1e-8)


# ---------------------------------------------------------------------------
# Blow-up


def test_blow_up_examples(disk_measure):
    pts = np.concatenate([[[0.5, 0.0]],
                          np.random.default_rng(0).uniform(-0.4, 0.4, (15, 2))])
    config = Configuration(pts)
    big, mu_b = blow_up(config, disk_measure)
    assert np.allclose(big.points[0], [2.0, 0.0])  # 16^(1/2) * 0.5
    # density value preserved at corresponding points
    assert mu_b(big.points[:1]) == pytest.approx(disk_measure(pts[:1]))
    # support mass scales by n
    assert mu_b.total_mass == pytest.approx(16.0)
    assert density_mass(mu_b) == pytest.approx(16.0, abs=1e-10)
    # Hoelder norm rescales by n^{-alpha/d}
    assert mu_b.holder_norm == pytest.approx(
        disk_measure.holder_norm / 16 ** (1.0 / 2) ** 1.0)


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 40), st.integers(0, 2 ** 31 - 1))
def test_blow_up_roundtrip(n, seed):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-1, 1, (n, 1))
    if np.unique(pts[:, 0]).size < n:
        return
    model = GasModel(KernelSpec.log1d(), QuadraticPotential(0.5), n)
    mu = equilibrium_measure(model)
    config = Configuration(pts)
    big, mu_b = blow_up(config, mu)
    back, mu_0 = blow_down(big, mu_b)
    assert np.allclose(back.points, pts, atol=1e-14)
    assert mu_0.blowup_scale == 1.0
    xs = rng.uniform(-1.5, 1.5, (5, 1))
    assert np.allclose(mu_0(xs), mu(xs), atol=1e-12)


def test_blow_up_requires_macroscopic(disk_measure):
    config = Configuration(np.array([[0.1, 0.2], [0.3, -0.1]]), scale="blown_up")
    with pytest.raises(DomainError):
        blow_up(config, disk_measure)


def test_configuration_rejects_coincident():
    with pytest.raises(DomainError):
        Configuration(np.array([[0.0, 0.0], [0.0, 0.0]]))
