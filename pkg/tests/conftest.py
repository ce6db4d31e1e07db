import numpy as np
import pytest


def random_hermitian_psd(rng, d, rank=None):
    r = d if rank is None else rank
    X = rng.standard_normal((d, r)) + 1j * rng.standard_normal((d, r))
    return X @ X.conj().T / d


def random_sectorial(rng, d, skew=0.5):
    """Positive-definite real part plus a bounded skew part."""
    H = random_hermitian_psd(rng, d) + np.eye(d)
    S = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    S = (S - S.conj().T) / 2
    return H + skew * S / np.linalg.norm(S, 2)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
