import numpy as np
import pytest

from rieszgas.geometry import Hyperrectangle
from rieszgas.kernels import KernelSpec
from rieszgas.model import (Configuration, DensityField, GasModel,
                            QuadraticPotential, Support, blow_up,
                            equilibrium_measure)


@pytest.fixture(scope="session")
def disk_model():
    return GasModel(KernelSpec.log2d(), QuadraticPotential(1.0), 64)


@pytest.fixture(scope="session")
def disk_measure(disk_model):
    return equilibrium_measure(disk_model)


@pytest.fixture(scope="session")
def semicircle_model():
    return GasModel(KernelSpec.log1d(), QuadraticPotential(0.5), 64)


@pytest.fixture(scope="session")
def semicircle_measure(semicircle_model):
    return equilibrium_measure(semicircle_model)


@pytest.fixture(scope="session")
def small_disk_minimizer(disk_model, disk_measure):
    """A converged n=64 disk minimizer shared by field/diagnostic tests."""
    from rieszgas.minimize import MinimizeOptions, initial_configuration, local_minimize

    opts = MinimizeOptions(max_iters=4000, grad_tol=5e-4, step0=1e-4,
                           restarts=2, seed=17)
    best, trace = local_minimize(disk_model, initial_configuration(disk_model, 17),
                                 opts)
    return best, trace


@pytest.fixture(scope="session")
def blown_disk(small_disk_minimizer, disk_measure):
    best, _ = small_disk_minimizer
    return blow_up(best, disk_measure)


def uniform_box_density(box: Hyperrectangle, m: float) -> DensityField:
    return DensityField(
        fn=lambda x: np.full(np.atleast_2d(x).shape[0], m),
        support=Support("box", tuple(box.center), box=box),
        holder_alpha=1.0, m_lower=m, m_upper=m,
        profile="uniform-box", profile_params={"density": m})


@pytest.fixture
def unit_box_bg():
    return uniform_box_density
