import numpy as np
import pytest

from finslerlab.flow import IntegratorConfig
from finslerlab.metrics import ALPHA_GOLDEN, RotationalDualMetric, build_katok_family, reversibilize
from finslerlab.profiles import RoundSphereProfile, make_cutoffs, make_spliced_profile

# cutoff triple used across the suite; the ratio band (f0(a1), f0(a0)) is wide
# enough that the default perturbation strength keeps fiber convexity
A0, A1, B = 0.3, 1.3, 1.6
TORUS_L, TORUS_EPS = 4.0, 0.25


@pytest.fixture(scope="session")
def sphere_profile():
    return RoundSphereProfile()


@pytest.fixture(scope="session")
def spliced_profile():
    return make_spliced_profile(TORUS_L, TORUS_EPS)


@pytest.fixture(scope="session")
def cutoffs():
    return make_cutoffs(A0, A1, B)


@pytest.fixture(scope="session")
def h0_sphere(sphere_profile):
    return RotationalDualMetric(sphere_profile)


@pytest.fixture(scope="session")
def h0_torus(spliced_profile):
    return RotationalDualMetric(spliced_profile)


@pytest.fixture(scope="session")
def katok_sphere(sphere_profile, cutoffs):
    return build_katok_family(sphere_profile, cutoffs, ALPHA_GOLDEN)


@pytest.fixture(scope="session")
def katok_torus(spliced_profile, cutoffs):
    return build_katok_family(spliced_profile, cutoffs, ALPHA_GOLDEN)


@pytest.fixture(scope="session")
def katok_torus_reversible(katok_torus):
    return reversibilize(katok_torus)


@pytest.fixture(scope="session")
def tight_config():
    return IntegratorConfig(method="DOP853", rel_tol=1e-12, abs_tol=1e-12)


@pytest.fixture(scope="session")
def fast_config():
    return IntegratorConfig(method="DOP853", rel_tol=1e-9, abs_tol=1e-9)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
