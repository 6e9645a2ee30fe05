import pytest

from hwave.pipeline import build_bundle
from hwave.space import FIXTURES, generate_space


@pytest.fixture(scope="session")
def fix_a():
    return generate_space(FIXTURES["FIX-A"])


@pytest.fixture(scope="session")
def fix_b():
    return generate_space(FIXTURES["FIX-B"])


@pytest.fixture(scope="session")
def bundle_a():
    return build_bundle(generate_space(FIXTURES["FIX-A"]), 0.25)


@pytest.fixture(scope="session")
def bundle_b():
    return build_bundle(generate_space(FIXTURES["FIX-B"]), 0.25)


@pytest.fixture(scope="session")
def bundle_c32():
    return build_bundle(generate_space("cycle(32, weights=uniform)"), 0.25)


@pytest.fixture(scope="session")
def bundle_c64():
    return build_bundle(generate_space("cycle(64, weights=uniform)"), 0.25)


@pytest.fixture(scope="session")
def bundle_random():
    """Unscaled 16-cycle at delta = 0.2: the capture window [delta^{k+1},
    delta^k/4) contains the unit distance, so the cubes genuinely vary with
    the sampled coordinates."""
    return build_bundle(generate_space("cycle(16, scale=1, weights=uniform)"), 0.2)


@pytest.fixture(scope="session")
def constants_a(bundle_a):
    return bundle_a.constants


@pytest.fixture(scope="session")
def constants_b(bundle_b):
    return bundle_b.constants
