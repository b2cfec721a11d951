"""Empirical CDFs, exchangeable bootstrap weights, and the blockwise bootstrap.

The exchangeable schemes are Efron's multinomial bootstrap, the Bayesian
bootstrap (exponential weights normalized to mean one), and the wild
bootstrap (unnormalized exponential(1) weights: non-negative, unit variance).
The blockwise scheme covers the sample with k_n - 1 blocks of length ell_n
plus one block of length n - (k_n - 1) * ell_n, start indices uniform on
{1, ..., n - ell_n + 1}; the weight of index i counts the blocks containing
it. ``blockwise_expected_weights`` evaluates the closed five-case formula for
w_ni = E'[W_ni], which is the centering measure of the blockwise scheme.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import BlockLengthInvalid, EmptySample, LengthMismatch
from .stepfun import StepFunction

SCHEMES = ("efron", "bayesian", "wild", "blockwise")


@dataclass(frozen=True)
class BootstrapWeights:
    """A weight vector (W_n1, ..., W_nn) plus scheme metadata."""

    scheme: str
    weights: np.ndarray
    mean_weight: float
    block_length: int | None = None
    block_count: int | None = None
    block_starts: np.ndarray | None = None  # 1-based, blockwise only

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        w = np.asarray(self.weights, dtype=np.float64)
        if np.any(w < 0):
            raise ValueError("weights must be non-negative")
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.weights.size

    def to_csv(self, expected: np.ndarray | None = None) -> str:
        """Audit CSV with columns (i, W_ni, w_ni); w_ni blank unless given."""
        buf = io.StringIO()
        buf.write("i,W_ni,w_ni\n")
        for i, w in enumerate(self.weights, start=1):
            e = "" if expected is None else repr(float(expected[i - 1]))
            buf.write(f"{i},{float(w)!r},{e}\n")
        return buf.getvalue()


def empirical_cdf(sample) -> StepFunction:
    """F_hat_n = (1/n) sum_i 1_{[X_i, inf)}; ties merge into one knot."""
    sample = np.asarray(sample, dtype=np.float64)
    if sample.size == 0:
        raise EmptySample("empirical_cdf needs a non-empty sample")
    uniq, counts = np.unique(sample, return_counts=True)
    return StepFunction(uniq, np.cumsum(counts) / sample.size, 0.0, is_cdf=True)


def exchangeable_weights(scheme: str, n: int, seed) -> BootstrapWeights:
    """Draw one exchangeable weight vector.

    efron: multinomial(n; 1/n, ..., 1/n). bayesian: exponential(1) variables
    normalized so the sum is exactly n. wild: raw exponential(1) variables
    (mean weight generally != 1).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if scheme not in ("efron", "bayesian", "wild"):
        raise ValueError(f"not an exchangeable scheme: {scheme!r}")
    rng = np.random.default_rng(seed)
    if scheme == "efron":
        w = rng.multinomial(n, np.full(n, 1.0 / n)).astype(np.float64)
        mean = 1.0
    elif scheme == "bayesian":
        y = rng.exponential(1.0, size=n)
        w = y * (n / y.sum())
        mean = 1.0
    else:
        w = rng.exponential(1.0, size=n)
        mean = float(w.mean())
    return BootstrapWeights(scheme, w, mean)


def _block_geometry(n: int, ell: int):
    if not 1 <= ell < n:
        raise BlockLengthInvalid(f"block length {ell} outside [1, {n})")
    k = math.ceil(n / ell)
    last_len = n - (k - 1) * ell
    return k, last_len


def blockwise_weights(n: int, ell: int, seed) -> BootstrapWeights:
    """One blockwise weight draw; sum of weights is n by construction."""
    k, last_len = _block_geometry(n, ell)
    rng = np.random.default_rng(seed)
    starts = rng.integers(0, n - ell + 1, size=(1, k))  # 0-based form of {1,..,n-ell+1}
    w = _kernels.block_weights(starts, n, ell, last_len)[0]
    return BootstrapWeights("blockwise", w, float(w.mean()),
                            block_length=ell, block_count=k,
                            block_starts=starts[0] + 1)


def blockwise_weights_batch(n: int, ell: int, size: int, seed) -> np.ndarray:
    """``size`` independent blockwise weight rows (used by the harness)."""
    k, last_len = _block_geometry(n, ell)
    rng = np.random.default_rng(seed)
    starts = rng.integers(0, n - ell + 1, size=(size, k))
    return _kernels.block_weights(starts, n, ell, last_len)


def blockwise_expected_weights(n: int, ell: int) -> np.ndarray:
    """The closed-form expected weights (w_n1, ..., w_nn).

    Five index ranges, with s := n - ell + 1, k := ceil(n/ell),
    r := n - (k-1) * ell and d := k * ell - n:

        1. i in [1, r]              k * i / s
        2. i in [r+1, ell]          (k-1) * i / s + r / s
        3. i in [ell+1, n-ell]      n / s
        4. i in [n-ell+1, n-d]      (k-1) * (n-i+1) / s + (n-d-i+1) / s
        5. i in [n-d+1, n]          (k-1) * (n-i+1) / s

    Boundary degeneracies (ell divides n, or r = ell) make individual ranges
    empty; ranges are then interpreted so that the earlier case wins. When the
    ranges fail to tile {1, ..., n} (possible for ell > n/2) the formula does
    not apply and BlockLengthInvalid is raised.
    """
    k, r = _block_geometry(n, ell)
    s = n - ell + 1
    d = k * ell - n
    bounds = [(1, r), (r + 1, ell), (ell + 1, n - ell), (n - ell + 1, n - d), (n - d + 1, n)]
    case = np.zeros(n + 1, dtype=np.int64)
    for c, (lo, hi) in enumerate(bounds, start=1):
        for i in range(max(lo, 1), min(hi, n) + 1):
            if case[i] == 0:
                case[i] = c
            elif case[i] != c:
                raise BlockLengthInvalid(
                    f"w_ni case ranges overlap at i={i} for (n={n}, ell={ell})")
    if np.any(case[1:] == 0):
        raise BlockLengthInvalid(
            f"w_ni case ranges do not cover all indices for (n={n}, ell={ell})")
    i = np.arange(1, n + 1, dtype=np.float64)
    c = case[1:]
    w = np.empty(n)
    w[c == 1] = k * i[c == 1] / s
    w[c == 2] = (k - 1) * i[c == 2] / s + r / s
    w[c == 3] = n / s
    w[c == 4] = (k - 1) * (n - i[c == 4] + 1) / s + (n - d - i[c == 4] + 1) / s
    w[c == 5] = (k - 1) * (n - i[c == 5] + 1) / s
    return w


def bootstrap_cdf(sample, w: BootstrapWeights) -> StepFunction:
    """F_hat*_n = (1/n) sum_i W_ni 1_{[X_i, inf)}; total mass is W_bar_n.

    Every sample point stays a knot even with zero weight, so a bootstrap CDF
    and its centering share the same knot set (exact differences downstream).
    """
    sample = np.asarray(sample, dtype=np.float64)
    if sample.size != w.n:
        raise LengthMismatch(f"sample size {sample.size} != weights size {w.n}")
    # cumulate raw weights first so integer schemes stay exact (mass n/n = 1)
    return StepFunction.from_atoms(sample, w.weights).scale(1.0 / sample.size)


def centering(sample, w: BootstrapWeights) -> StepFunction:
    """The scheme-appropriate centering C_hat_n.

    Exchangeable schemes: W_bar_n * F_hat_n (which is F_hat_n itself for
    efron and bayesian where W_bar_n = 1). Blockwise: the exact conditional
    expectation (1/n) sum_i w_ni 1_{[X_i, inf)} with the closed-form w_ni.
    """
    sample = np.asarray(sample, dtype=np.float64)
    if sample.size != w.n:
        raise LengthMismatch(f"sample size {sample.size} != weights size {w.n}")
    if w.scheme == "blockwise":
        wn = blockwise_expected_weights(w.n, w.block_length)
        return StepFunction.from_atoms(sample, wn).scale(1.0 / sample.size)
    return StepFunction.from_atoms(sample, np.full(sample.size, w.mean_weight)).scale(1.0 / sample.size)
