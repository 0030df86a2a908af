import pytest

from nlslab.groundstate import compute_ground_state


@pytest.fixture(scope="session")
def gs():
    """Production-resolution ground-state bundle, shared across the suite."""
    return compute_ground_state()
