import numpy as np
import pytest

from rigidity_lab import billiards, geometry

LADDER = (8, 16, 32, 64)


@pytest.fixture(scope="session")
def circle_frame():
    return geometry.build_frame(geometry.unit_circle_profile(), 512)


@pytest.fixture(scope="session")
def perturbed_frame():
    """The a_2 = 0.01 workhorse domain."""
    return geometry.build_frame(geometry.build_profile([0.0, 0.0, 0.01]), 512)


@pytest.fixture(scope="session")
def circle_orbits(circle_frame):
    qs = sorted(set(range(2, 17)) | set(LADDER))
    return billiards.compute_orbits(circle_frame, qs)


@pytest.fixture(scope="session")
def perturbed_orbits(perturbed_frame):
    qs = sorted(set(range(2, 17)) | set(LADDER))
    return billiards.compute_orbits(perturbed_frame, qs)


@pytest.fixture(scope="session")
def perturbed_fit(perturbed_frame, perturbed_orbits):
    ladder = {q: perturbed_orbits[q] for q in LADDER}
    return billiards.fit_alpha_beta(perturbed_frame.chart, ladder)


@pytest.fixture(scope="session")
def circle_fit(circle_frame, circle_orbits):
    ladder = {q: circle_orbits[q] for q in LADDER}
    return billiards.fit_alpha_beta(circle_frame.chart, ladder)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240809)
