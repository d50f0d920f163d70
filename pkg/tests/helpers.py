import numpy as np
from hypothesis import strategies as st

from behavior import decompose
from system_model import lift, random_system, validate

seeds = st.integers(min_value=0, max_value=2**32 - 1)
small_dims = st.fixed_dictionaries(
    {
        "n_x": st.integers(min_value=1, max_value=4),
        "n_u": st.integers(min_value=1, max_value=2),
        "n_y": st.integers(min_value=1, max_value=2),
        "T": st.integers(min_value=1, max_value=8),
    }
)


def static_gain(d, x0=0.0, T=1):
    """Memoryless system y(t) = d u(t) with a decoupled unit state."""
    return validate({"T": T, "A": [[0.0]], "B": [[0.0]], "C": [[0.0]], "D": [[d]], "x0": [x0]})


def free_state(x0, T=1):
    """y(t) = x(t) = x0 with no input path, so G = 0 and L = 1."""
    return validate({"T": T, "A": [[1.0]], "B": [[0.0]], "C": [[1.0]], "D": [[0.0]], "x0": [x0]})


def scalar_integrator(T=2, x0=0.0):
    return validate({"T": T, "A": [[1.0]], "B": [[1.0]], "C": [[1.0]], "D": [[0.0]], "x0": [x0]})


def decomposition(system, pivoting=False):
    return decompose(lift(system), system.x0, pivoting=pivoting)


def random_pair(seed, dims):
    rng = np.random.default_rng(seed)
    return rng, random_system(rng, name="host", **dims), random_system(rng, name="guest", **dims)


def random_orthogonal(rng, n):
    Q, R = np.linalg.qr(rng.standard_normal((n, n)))
    return Q * np.sign(np.diag(R))
