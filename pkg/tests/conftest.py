"""Pytest configuration and shared fixtures."""

import numpy as np
import pytest

from reduction_engine.dynamics import ReducedState
from reduction_engine.models import (
    AbelianDiskParams,
    FlatProductParams,
    SO3CoupledParams,
    instantiate,
)


@pytest.fixture(scope="session")
def abelian():
    """SO(2) rotating the punctured plane and a planar fiber."""
    return instantiate("abelian_disk", AbelianDiskParams(k=1.0))


@pytest.fixture(scope="session")
def so3():
    """Default coupled rigid body (lam = 0.3)."""
    return instantiate("so3_coupled", SO3CoupledParams())


@pytest.fixture(scope="session")
def flat():
    return instantiate("flat_product", FlatProductParams(k=1.0))


@pytest.fixture(scope="session")
def flat_bare():
    """Flat product without a fiber (n_V = 0)."""
    return instantiate("flat_product", {"fiber": False})


@pytest.fixture(scope="session")
def twisted():
    """Abelian disk whose section spirals out as r (cos 0.4 r^2, sin 0.4 r^2)."""
    return instantiate("abelian_disk", AbelianDiskParams(k=1.0, twist=0.4))


MODEL_CASES = {
    "abelian_disk": ("abelian_disk", None),
    "abelian_twisted": ("abelian_disk", {"twist": 0.4}),
    "so3_coupled": ("so3_coupled", None),
    "flat_product": ("flat_product", None),
}


@pytest.fixture(scope="session", params=sorted(MODEL_CASES))
def any_model(request):
    return instantiate(*MODEL_CASES[request.param])


@pytest.fixture
def rng():
    return np.random.default_rng(20240115)


def random_state(model, rng, speed=0.3):
    """Reduced state at a sampled point with random velocities and momenta."""
    x, f_tilde = model.sampler(rng)
    return ReducedState.build(
        model,
        x=x,
        f_tilde=f_tilde,
        xdot=speed * rng.uniform(-1.0, 1.0, model.n_x),
        fdot=speed * rng.uniform(-1.0, 1.0, model.n_V),
        p=speed * rng.uniform(-1.0, 1.0, model.n_G),
    )


@pytest.fixture
def sample_states(any_model, rng):
    """Three random reduced states for the parametrised model."""
    return [random_state(any_model, rng) for _ in range(3)]


@pytest.fixture
def output_dir(tmp_path):
    path = tmp_path / "out"
    path.mkdir()
    return path


@pytest.fixture
def state_factory(rng):
    """Callable drawing a random reduced state for a given model."""
    return lambda model, speed=0.3: random_state(model, rng, speed)
