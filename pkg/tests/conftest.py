import numpy as np
import pytest

from pusmi.data import ClassPrior, GaussianMixtureSpec


@pytest.fixture
def toy_spec() -> GaussianMixtureSpec:
    """The two-dimensional study spec: separated means, tall covariance."""
    return GaussianMixtureSpec(
        mean_pos=(1.0, 0.0),
        mean_neg=(-1.0, 0.0),
        cov_diag=(0.5, 3.5),
        prior=ClassPrior(0.5),
    )


@pytest.fixture
def null_spec() -> GaussianMixtureSpec:
    """Equal means, so labels carry no information about the input."""
    return GaussianMixtureSpec(
        mean_pos=(0.0, 0.0),
        mean_neg=(0.0, 0.0),
        cov_diag=(0.5, 3.5),
        prior=ClassPrior(0.5),
    )


def keyed(root_entropy: int, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=root_entropy, spawn_key=key)
