import numpy as np
import pytest

import consensuskit as ck


@pytest.fixture(scope="session")
def target():
    """The standard third-order target with poles at -1 and -2."""
    return ck.design_companion([-1.0, -2.0])


@pytest.fixture(scope="session")
def unit_gain(target):
    return ck.rank_one_gain(target, mu=1.0, q1=1.0, r_hat=1.0)


@pytest.fixture(scope="session")
def five_agents():
    return [ck.builtin(f"agent{i}") for i in (1, 2, 3, 4, 5)]


@pytest.fixture(scope="session")
def five_cycle():
    return ck.directed_cycle(5)


def rand_stable_matrix(rng, n, margin=0.5):
    """A random strictly stable matrix (shifted past its spectral abscissa)."""
    m = rng.standard_normal((n, n))
    shift = max(0.0, np.linalg.eigvals(m).real.max())
    return m - (shift + margin) * np.eye(n)


def rand_spd(rng, n, floor=0.1):
    m = rng.standard_normal((n, n))
    return m @ m.T + floor * np.eye(n)
