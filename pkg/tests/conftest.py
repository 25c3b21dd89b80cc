import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile(
    "deterministic",
    derandomize=True,
    max_examples=60,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("deterministic")


@pytest.fixture(scope="session")
def blobs3():
    """Well-separated 3-class benchmark used across modules."""
    import activemetric as am

    return am.make_synthetic_gaussians(3, 40, 6, 2, 4.0, seed=7)


@pytest.fixture(scope="session")
def blobs2_amplified():
    """2-class data separable on dim 0 only, noise dims scaled 5x."""
    import activemetric as am

    ds = am.make_synthetic_gaussians(2, 20, 4, 1, 6.0, seed=3)
    feats = ds.features.copy()
    feats[:, 1:] *= 5.0
    return am.Dataset(features=feats, ids=ds.ids, labels=ds.labels, num_classes=2)
