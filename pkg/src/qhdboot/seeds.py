"""Deterministic seed derivation.

All randomness in the package flows from a single root seed. Child streams
are derived by the rule

    child(root, *path) = numpy.random.SeedSequence(root, spawn_key=path)

where ``path`` is a tuple of small non-negative integers: a purpose code
(one of the STREAM_* constants below) followed by any identifying indices
(sample size, omega index, ...). Distinct paths yield statistically
independent streams, and the mapping is stable across platforms and numpy
versions, so parallel consumers can draw from disjoint streams without
coordination.
"""
from __future__ import annotations

import numpy as np

STREAM_OMEGA = 1          # the outer sample omega, per (n, omega_index)
STREAM_BOOTSTRAP = 2      # bootstrap weights, per (n, omega_index)
STREAM_SAMPLING = 3       # sampling-distribution replicates, per n
STREAM_LIMIT_PATHS = 4    # Gaussian limit paths
STREAM_COV_PATH = 5       # the long path for mixing covariance estimation
STREAM_WEIGHTS_AUDIT = 6  # weight draws for audits / MC oracles
STREAM_DERIVATIVE = 7     # random directions in derivative checks


def child_sequence(root_seed: int, *path: int) -> np.random.SeedSequence:
    """SeedSequence for the stream identified by ``path`` under ``root_seed``."""
    return np.random.SeedSequence(int(root_seed), spawn_key=tuple(int(p) for p in path))


def child_rng(root_seed: int, *path: int) -> np.random.Generator:
    """Generator seeded by :func:`child_sequence`."""
    return np.random.default_rng(child_sequence(root_seed, *path))
