"""Gaussian limit processes on a grid and samples of the limit law.

The i.i.d. empirical-process limit is the F-Brownian bridge with covariance
F(s ^ t) * (1 - F(s v t)). The beta-mixing limit adds the long-run
correction sum over lags k >= 2 of cov(1{X_1 <= s}, 1{X_k <= t}) in both
argument orders; the bridge part uses the model's exact stationary
distribution while the lag covariances are estimated from one long simulated
path (via joint bin counts, so one pass per lag). The estimated matrix is
symmetrized and regularized to positive semidefinite by clipping negative
eigenvalues; path sampling factorizes with escalating jitter.

Scalar limit-law samples dH(B_F) exploit linearity of the derivative: the
derivative is evaluated once per grid basis function and each simulated path
reduces to a dot product. Grid paths are interpreted as step functions that
vanish outside the grid window (the limit process is pinned near zero
there).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from . import _kernels
from .errors import FactorizationFailed, PathTooShort
from .models import Ar1Model, ContinuousModel, sample_ar1
from .stepfun import StepFunction

_MAX_JITTER = 1e-6


@dataclass(frozen=True)
class GaussianLimit:
    """Grid covariance of the limit process plus regularization book-keeping."""

    grid: np.ndarray
    cov: np.ndarray
    kind: str
    lag_truncation: int | None = None
    min_eig_raw: float = 0.0
    regularization: float = 0.0

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=np.float64)
        cov = np.asarray(self.cov, dtype=np.float64)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "cov", cov)
        if np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        if cov.shape != (grid.size, grid.size):
            raise ValueError("covariance shape does not match grid")
        if not np.allclose(cov, cov.T, atol=1e-12):
            raise ValueError("covariance must be symmetric")


def quantile_grid(model: ContinuousModel, size: int = 200,
                  p_lo: float = 0.001, p_hi: float = 0.999) -> np.ndarray:
    """Equally spaced quantiles of the model; resolution concentrates where
    the limit process varies."""
    return np.asarray(model.quantile(np.linspace(p_lo, p_hi, size)))


def covariance_iid(model: ContinuousModel, grid) -> GaussianLimit:
    """Bridge covariance F(s ^ t) * (1 - F(s v t)) on the grid."""
    grid = np.asarray(grid, dtype=np.float64)
    u = np.asarray(model.cdf(grid))
    cov = np.minimum.outer(u, u) * (1.0 - np.maximum.outer(u, u))
    return GaussianLimit(grid, cov, "iid_bridge")


def covariance_mixing(model: Ar1Model, grid, lag_truncation: int = 50,
                      mc_len: int = 1_000_000, seed=0) -> GaussianLimit:
    """Long-run covariance: exact stationary bridge plus estimated lag terms.

    Lag covariances for k = 2 .. lag_truncation + 1 come from one simulated
    stationary path of length mc_len: per lag, the joint distribution of
    (X_s, X_{s+lag}) over the grid is a cumulated 2-D bin count, and the
    covariance uses the matching segment marginals. The truncated, estimated
    matrix is clipped to positive semidefinite (clip magnitude recorded;
    Monte Carlo noise makes small negative eigenvalues unavoidable).
    """
    grid = np.asarray(grid, dtype=np.float64)
    if lag_truncation < 1:
        raise ValueError("lag_truncation must be >= 1")
    if mc_len < 100 * lag_truncation:
        raise PathTooShort(f"mc_len {mc_len} too short for {lag_truncation} lags")
    stationary = model.stationary_model()
    bridge = covariance_iid(stationary, grid).cov

    path = sample_ar1(model, mc_len, seed)
    m = grid.size
    # bin b means: X <= grid[a] iff b <= a; bin m collects X above the grid
    bins = np.searchsorted(grid, path, side="left")
    correction = np.zeros((m, m))
    tail_mag = 0.0
    for lag in range(1, lag_truncation + 1):
        counts = _kernels.lag_pair_counts(bins, m + 1, lag)
        denom = mc_len - lag
        joint = np.cumsum(np.cumsum(counts, axis=0), axis=1)[:m, :m] / denom
        p_lo = np.cumsum(counts.sum(axis=1))[:m] / denom
        p_hi = np.cumsum(counts.sum(axis=0))[:m] / denom
        c = joint - np.outer(p_lo, p_hi)
        correction += c + c.T
        if lag == lag_truncation:
            tail_mag = float(np.max(np.abs(c)))
    cov = bridge + correction
    cov = 0.5 * (cov + cov.T)

    eigvals, eigvecs = np.linalg.eigh(cov)
    min_eig = float(eigvals[0])
    clip = max(0.0, -min_eig)
    if clip > 0.0:
        cov = (eigvecs * np.clip(eigvals, 0.0, None)) @ eigvecs.T
        cov = 0.5 * (cov + cov.T)

    if tail_mag > 1e-4:
        warnings.warn(
            f"lag covariance at truncation {lag_truncation} still {tail_mag:.2e}; "
            "consider a larger lag_truncation", stacklevel=2)
    return GaussianLimit(grid, cov, "mixing_longrun", lag_truncation,
                         min_eig_raw=min_eig, regularization=clip)


class LimitPaths(NamedTuple):
    paths: np.ndarray
    jitter: float


def sample_limit_paths(gl: GaussianLimit, n_paths: int, seed) -> LimitPaths:
    """Centered Gaussian vectors with covariance gl.cov.

    Cholesky factorization with jitter escalating from 1e-10 to 1e-6;
    :class:`FactorizationFailed` beyond that. The jitter actually used is
    returned alongside the (n_paths, grid size) matrix.
    """
    root = None
    used = 0.0
    for jitter in [0.0] + [1e-10 * 10 ** j for j in range(5)]:
        try:
            root = np.linalg.cholesky(gl.cov + jitter * np.eye(gl.grid.size))
            used = jitter
            break
        except np.linalg.LinAlgError:
            continue
    if root is None:
        raise FactorizationFailed(
            f"covariance not factorizable with jitter up to {_MAX_JITTER}")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n_paths, gl.grid.size))
    return LimitPaths(z @ root.T, used)


def grid_path_to_step(grid, values) -> StepFunction:
    """A grid path as a step function vanishing outside the grid window.

    Values hold on [t_j, t_{j+1}); the value beyond the last grid point is
    forced to zero so the function lies in the weighted cadlag space (the
    limit process is pinned near zero there anyway).
    """
    grid = np.asarray(grid, dtype=np.float64)
    vals = np.concatenate((np.asarray(values, dtype=np.float64)[: grid.size - 1], [0.0]))
    return StepFunction(grid, vals)


def basis_weights(gl: GaussianLimit, dot: Callable[[StepFunction], float]) -> np.ndarray:
    """dot evaluated on the grid interval indicators (derivative linearity
    turns path evaluation into a dot product)."""
    m = gl.grid.size
    w = np.zeros(m)
    for j in range(m - 1):
        e = StepFunction(np.array([gl.grid[j], gl.grid[j + 1]]), np.array([1.0, 0.0]))
        w[j] = dot(e)
    return w


def limit_law_samples(gl: GaussianLimit, dot: Callable[[StepFunction], float],
                      n_paths: int, seed) -> np.ndarray:
    """n_paths samples of the scalar limit law dH(B_F) (dH linear)."""
    w = basis_weights(gl, dot)
    paths, _ = sample_limit_paths(gl, n_paths, seed)
    return paths @ w


def limit_law_samples_map(gl: GaussianLimit, path_fn: Callable[[StepFunction], float],
                          n_paths: int, seed) -> np.ndarray:
    """General (non-linear) per-path evaluation, e.g. norms of dC(B_F)."""
    paths, _ = sample_limit_paths(gl, n_paths, seed)
    out = np.empty(n_paths)
    for i in range(n_paths):
        out[i] = path_fn(grid_path_to_step(gl.grid, paths[i]))
    return out
