import numpy as np
import pytest

from ssgcn.synth import synthetic_citations


@pytest.fixture(scope="session")
def synth_ds():
    """Medium synthetic citation graph used by training-scheme tests."""
    return synthetic_citations(seed=0)


@pytest.fixture(scope="session")
def small_ds():
    """Small, fast dataset for trajectory and degeneracy checks."""
    return synthetic_citations(
        num_nodes=90,
        num_classes=3,
        feature_dim=24,
        labels_per_class=5,
        val_size=15,
        test_size=45,
        seed=1,
        name="synth-small",
    )


def params_equal(a, b):
    if not np.array_equal(a.w0, b.w0):
        return False
    if not np.array_equal(a.head_target, b.head_target):
        return False
    return True
