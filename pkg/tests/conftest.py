import numpy as np
import pytest


@pytest.fixture()
def rng():
    return np.random.default_rng(987654321)


def random_step_difference(rng, lam_positive=True, span=4.0, max_atoms=8):
    """A random element of the weighted cadlag space: difference of two
    random CDFs with equal mass (so both tails vanish)."""
    from qhdboot.stepfun import StepFunction

    k1 = int(rng.integers(1, max_atoms))
    k2 = int(rng.integers(1, max_atoms))
    a = StepFunction.from_atoms(rng.uniform(-span, span, k1), rng.dirichlet(np.ones(k1)))
    b = StepFunction.from_atoms(rng.uniform(-span, span, k2), rng.dirichlet(np.ones(k2)))
    scale = float(rng.uniform(0.2, 2.0))
    return (a - b).scale(scale)


def random_cdf(rng, span=(0.0, 1.0), max_atoms=8):
    from qhdboot.stepfun import StepFunction

    k = int(rng.integers(1, max_atoms))
    return StepFunction.from_atoms(rng.uniform(span[0], span[1], k),
                                   rng.dirichlet(np.ones(k)))
