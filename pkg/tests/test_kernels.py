import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import gammaln

from rieszgas.errors import DomainError
from rieszgas.geometry import Hyperrectangle, unit_sphere_area
from rieszgas.kernels import (KernelSpec, csd_constant, f_eta, g_eval,
                              g_trunc, grad_g, smeared_mass_in_window)


def test_kind_invariants():
    assert KernelSpec.log1d().k == 1
    assert KernelSpec.log1d().gamma == 0.0
    assert KernelSpec.log2d().k == 0
    assert KernelSpec.riesz(3, 1.0).k == 0  # Coulomb d>=3
    assert KernelSpec.riesz(1, 0.5).gamma == pytest.approx(0.5)
    # s = d-1 gives the harmonic extension gamma = 0
    assert KernelSpec.riesz(2, 1.0).gamma == pytest.approx(0.0)
    with pytest.raises(DomainError):
        KernelSpec.riesz(1, 1.5)  # s >= d
    with pytest.raises(DomainError):
        KernelSpec.riesz(2, 0.0)  # s = 0 must use the log kinds
    with pytest.raises(DomainError):
        KernelSpec("log1d", 2, 0.0)


def test_g_eval_examples():
    assert g_eval(KernelSpec.riesz(2, 1.0), [2.0, 0.0]) == pytest.approx(0.5)
    assert g_eval(KernelSpec.log2d(), [1.0, 0.0]) == pytest.approx(0.0)
    assert g_eval(KernelSpec.riesz(1, 0.5), [4.0, 0.0]) == pytest.approx(0.5)
    with pytest.raises(DomainError):
        g_eval(KernelSpec.log2d(), [0.0, 0.0])


def test_g_trunc_examples():
    spec = KernelSpec.riesz(2, 1.0)
    assert g_trunc(spec, [0.1, 0.0], 0.5) == pytest.approx(2.0)
    # truncation inactive beyond eta
    assert g_trunc(spec, [0.7, 0.0], 0.5) == pytest.approx(1 / 0.7)
    assert g_trunc(KernelSpec.log2d(), [0.0, 0.0], 0.1) == pytest.approx(
        -math.log(0.1))


def test_f_eta_examples():
    spec = KernelSpec.riesz(2, 1.0)
    assert f_eta(spec, [0.5, 0.0], 0.2) == 0.0
    assert f_eta(spec, [0.1, 0.0], 0.2) == pytest.approx(10.0 - 5.0)
    assert f_eta(KernelSpec.log1d(), [math.exp(-2.0)], math.exp(-1.0)) \
        == pytest.approx(1.0)
    assert f_eta(spec, [0.0, 0.0], 0.2) == math.inf


@settings(max_examples=60, deadline=None)
@given(st.floats(0.02, 0.95), st.floats(-3, 3), st.floats(-3, 3),
       st.sampled_from(["log2d", "riesz"]))
def test_truncation_identity(eta, x, y, kind):
    # g_trunc + f_eta == g everywhere off the origin
    spec = KernelSpec.log2d() if kind == "log2d" else KernelSpec.riesz(2, 1.3)
    X = np.array([x, y])
    if np.linalg.norm(X) < 1e-9:
        return
    assert g_trunc(spec, X, eta) + f_eta(spec, X, eta) == pytest.approx(
        g_eval(spec, X), rel=1e-12, abs=1e-12)
    assert f_eta(spec, X, eta) >= 0.0
    if np.linalg.norm(X) > eta:
        assert f_eta(spec, X, eta) == 0.0


def test_grad_g_matches_finite_differences():
    spec = KernelSpec.riesz(1, 0.5)
    X = np.array([0.7, 0.4])
    g = grad_g(spec, X)
    eps = 1e-6
    for c in range(2):
        Xp, Xm = X.copy(), X.copy()
        Xp[c] += eps
        Xm[c] -= eps
        fd = (g_eval(spec, Xp) - g_eval(spec, Xm)) / (2 * eps)
        assert g[c] == pytest.approx(fd, rel=1e-6)


# ---------------------------------------------------------------------------
# c_{s,d}


def _csd_closed_form(spec: KernelSpec) -> float:
    # independent oracle: |g'(1)| * |S^{d-1}| * B((gamma+1)/2, d/2)
    gam, d = spec.gamma, spec.d
    gp = 1.0 if spec.is_log else spec.s
    beta = math.exp(gammaln((gam + 1) / 2) + gammaln(d / 2)
                    - gammaln((gam + d + 1) / 2))
    return gp * unit_sphere_area(d) * beta


def test_csd_coulomb_values():
    assert csd_constant(KernelSpec.log2d()) == pytest.approx(2 * math.pi)
    assert csd_constant(KernelSpec.riesz(3, 1.0)) == pytest.approx(4 * math.pi)
    assert csd_constant(KernelSpec.riesz(4, 2.0)) == pytest.approx(
        2 * unit_sphere_area(4))


@pytest.mark.parametrize("spec", [
    KernelSpec.log1d(), KernelSpec.riesz(1, 0.5), KernelSpec.riesz(1, 0.75),
    KernelSpec.riesz(2, 0.5), KernelSpec.riesz(2, 1.5), KernelSpec.riesz(3, 2.1),
])
def test_csd_flux_calibration_matches_closed_form(spec):
    assert csd_constant(spec) == pytest.approx(_csd_closed_form(spec), rel=1e-8)


def test_csd_log1d_is_two_pi():
    # harmonic extension of the 1D log kernel
    assert csd_constant(KernelSpec.log1d()) == pytest.approx(2 * math.pi, rel=1e-10)


# ---------------------------------------------------------------------------
# Smeared masses


def test_smeared_mass_fast_paths():
    spec = KernelSpec.log2d()
    K = Hyperrectangle.from_bounds([0, 0], [4, 4])
    assert smeared_mass_in_window(spec, [2, 2], 0.5, K) == 1.0
    assert smeared_mass_in_window(spec, [9, 9], 0.5, K) == 0.0


@pytest.mark.parametrize("spec,p,K", [
    (KernelSpec.log2d(), [0.0, 2.0], Hyperrectangle.from_bounds([0, 0], [4, 4])),
    (KernelSpec.riesz(1, 0.5), [0.0], Hyperrectangle.from_bounds([0], [2])),
    (KernelSpec.riesz(2, 0.5), [0.0, 2.0], Hyperrectangle.from_bounds([0, 0], [4, 4])),
    (KernelSpec.riesz(3, 1.0), [0.0, 2.0, 2.0],
     Hyperrectangle.from_bounds([0, 0, 0], [4, 4, 4])),
])
def test_smeared_mass_face_bisection(spec, p, K):
    # reflection symmetry of the weighted sphere measure across the face
    assert smeared_mass_in_window(spec, p, 0.5, K) == pytest.approx(0.5, abs=1e-9)


def test_smeared_mass_corner_quarter():
    spec = KernelSpec.log2d()
    K = Hyperrectangle.from_bounds([0, 0], [4, 4])
    assert smeared_mass_in_window(spec, [0.0, 0.0], 0.5, K) == pytest.approx(
        0.25, abs=1e-12)


def test_smeared_mass_d1_partial_against_direct_oracle():
    spec = KernelSpec.riesz(1, 0.5)
    K = Hyperrectangle.from_bounds([0], [2])
    got = smeared_mass_in_window(spec, [0.1], 0.3, K)
    # oracle: brute-force weighted angular average on the circle; the
    # midpoint rule's own error at this node count is ~1e-6
    phi = (np.arange(2_000_000) + 0.5) * (2 * math.pi / 2_000_000)
    w = np.abs(np.sin(phi)) ** spec.gamma
    x = 0.1 + 0.3 * np.cos(phi)
    oracle = float((w * ((x >= 0) & (x <= 2))).sum() / w.sum())
    assert got == pytest.approx(oracle, abs=2e-6)


def test_smeared_mass_monotone_and_additive():
    spec = KernelSpec.riesz(1, 0.5)
    p, eta = [0.1], 0.3
    K_small = Hyperrectangle.from_bounds([0], [0.15])
    K_rest = Hyperrectangle.from_bounds([0.15], [2])
    K_full = Hyperrectangle.from_bounds([0], [2])
    m_small = smeared_mass_in_window(spec, p, eta, K_small)
    m_rest = smeared_mass_in_window(spec, p, eta, K_rest)
    m_full = smeared_mass_in_window(spec, p, eta, K_full)
    assert m_small <= m_full
    assert abs(m_small + m_rest - m_full) < 1e-6

    spec2 = KernelSpec.log2d()
    p2, eta2 = [2.0, 2.0], 0.4
    Ka = Hyperrectangle.from_bounds([0, 0], [1.8, 4])
    Kb = Hyperrectangle.from_bounds([1.8, 0], [4, 4])
    Ku = Hyperrectangle.from_bounds([0, 0], [4, 4])
    total = (smeared_mass_in_window(spec2, p2, eta2, Ka)
             + smeared_mass_in_window(spec2, p2, eta2, Kb))
    assert abs(total - smeared_mass_in_window(spec2, p2, eta2, Ku)) < 1e-6


def test_gamma_in_open_interval():
    for spec in (KernelSpec.log1d(), KernelSpec.log2d(),
                 KernelSpec.riesz(1, 0.5), KernelSpec.riesz(3, 2.5)):
        assert -1.0 < spec.gamma < 1.0
