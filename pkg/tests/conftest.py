import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

settings.register_profile("ci", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ci")


def ppwave_names(dim):
    return ("v", "u") + tuple(f"x{i}" for i in range(3, dim + 1))


def random_polynomial(rng, names, degree=3, terms=6, coef=2.0):
    """Random polynomial text over ``names`` with coefficients in [-coef, coef]."""
    parts = []
    for _ in range(terms):
        c = rng.uniform(-coef, coef)
        factors = [f"{c!r}"]
        for _ in range(rng.integers(0, degree + 1)):
            factors.append(names[rng.integers(len(names))])
        parts.append("*".join(factors))
    return " + ".join(parts)


def random_profile(rng, dim, degree=3, terms=6):
    """Polynomial H in (u, x3, ..., xn); never references v."""
    return random_polynomial(rng, ppwave_names(dim)[1:], degree, terms)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


finite = st.floats(-2.0, 2.0, allow_nan=False, allow_infinity=False)
seeds = st.integers(0, 2**32 - 1)
