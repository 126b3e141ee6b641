import numpy as np
import pytest
from hypothesis import settings

from urnn_equiv.rnn import RnnParams

settings.register_profile("ci", derandomize=True, max_examples=40, deadline=None)
settings.load_profile("ci")


def random_contractive_relu(seed, n=None, m=None, p=None, rho_max=0.95):
    """Seeded contractive relu system with ||W|| uniform in (0.1, rho_max)."""
    rng = np.random.default_rng([seed, 777])
    n = n if n is not None else int(rng.integers(1, 9))
    m = m if m is not None else int(rng.integers(1, 4))
    p = p if p is not None else int(rng.integers(1, 4))
    w = rng.standard_normal((n, n))
    target = rng.uniform(0.1, rho_max)
    w *= target / np.linalg.svd(w, compute_uv=False)[0]
    return RnnParams(
        w=w,
        f=rng.standard_normal((n, m)),
        b=rng.standard_normal(n),
        c=rng.standard_normal((p, n)),
        h_init=np.zeros(n),
        activation="relu",
    )


@pytest.fixture
def rng():
    return np.random.default_rng(0)
