import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from liyau.presets import build_preset

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@st.composite
def random_graphs(draw, max_n: int = 8):
    """A connected random graph from the ``random(n, seed)`` preset."""
    n = draw(st.integers(2, max_n))
    seed = draw(st.integers(0, 10_000))
    return build_preset(f"random({n},{seed})").graph


@st.composite
def graph_and_positive(draw, max_n: int = 8, lo: float = 1e-3, hi: float = 1e3):
    """A random graph with a positive function, log-uniform in ``[lo, hi]``."""
    g = draw(random_graphs(max_n))
    seed = draw(st.integers(0, 2**31 - 1))
    u = np.exp(np.random.default_rng(seed).uniform(np.log(lo), np.log(hi), g.n))
    return g, u


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
