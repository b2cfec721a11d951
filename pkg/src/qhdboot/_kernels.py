"""Hot numeric kernels, each with a numba ``@njit`` and a pure-numpy path.

The two implementations of every kernel compute the same quantity (tested to
1e-12 relative; the integer-valued ones match exactly). Selection happens
once at import time: the numpy path is used when numba is unavailable or
when the environment variable ``QHD_BOOT_NO_NUMBA`` is set to anything other
than "" or "0". ``benchmarks/bench_kernels.py`` times both paths.

Kernels:

- ``avar_rows``          tail-mean functional of many weighted step CDFs
                         sharing one sorted atom vector
- ``block_weights``      blockwise bootstrap weight rows from block starts
- ``ar1_paths``          first-order autoregressive recursion over rows
- ``lag_pair_counts``    joint bin counts of (X_s, X_{s+lag}) pairs
"""
from __future__ import annotations

import os

import numpy as np
from scipy.signal import lfilter

_flag = os.environ.get("QHD_BOOT_NO_NUMBA", "")
NUMBA_REQUESTED = not (_flag and _flag != "0")

try:
    if NUMBA_REQUESTED:
        from numba import njit, set_num_threads  # noqa: F401

        NUMBA_ACTIVE = True
    else:
        NUMBA_ACTIVE = False
except ImportError:  # pragma: no cover - exercised via QHD_BOOT_NO_NUMBA instead
    NUMBA_ACTIVE = False


def set_thread_budget(n: int) -> None:
    """Cap numba's internal thread pool; a no-op on the numpy path."""
    if NUMBA_ACTIVE and n >= 1:
        try:
            set_num_threads(int(n))
        except ValueError:
            pass


# ---------------------------------------------------------------------------
# avar_rows: R_b = xs[-1] - sum_i g(C[b, i]) * (xs[i+1] - xs[i])
# with g(t) = max(t - kink, 0) / (1 - alpha). C[b, i] is the CDF value of
# replicate b on [xs[i], xs[i+1]); the formula is the exact tail-mean of a
# step CDF whose plateau satisfies g(C[b, n-1]) = 1 (and the truncated-at-
# last-knot surrogate otherwise, see functionals.py).
# ---------------------------------------------------------------------------

def _avar_rows_np(xs, cum_rows, alpha, kink):
    g = np.maximum(cum_rows[:, :-1] - kink, 0.0) / (1.0 - alpha)
    return xs[-1] - g @ np.diff(xs)


def _make_avar_rows_nb(njit_):
    @njit_(cache=True)
    def _avar_rows_nb(xs, cum_rows, alpha, kink):
        n_rows, n = cum_rows.shape
        inv = 1.0 / (1.0 - alpha)
        out = np.empty(n_rows)
        for b in range(n_rows):
            acc = 0.0
            for i in range(n - 1):
                c = cum_rows[b, i] - kink
                if c > 0.0:
                    acc += c * inv * (xs[i + 1] - xs[i])
            out[b] = xs[n - 1] - acc
        return out

    return _avar_rows_nb


# ---------------------------------------------------------------------------
# block_weights: starts is an integer matrix (n_rows, k_n) of 0-based block
# start indices in [0, n - ell]. Row b gets k_n - 1 covering blocks of
# length ell plus one last block of length last_len; output counts how many
# blocks cover each index.
# ---------------------------------------------------------------------------

def _block_weights_np(starts, n, ell, last_len):
    n_rows, k = starts.shape
    diff = np.zeros((n_rows, n + 1))
    if k > 1:
        rows = np.repeat(np.arange(n_rows), k - 1)
        full = starts[:, :-1].ravel()
        np.add.at(diff, (rows, full), 1.0)
        np.add.at(diff, (rows, full + ell), -1.0)
    last = starts[:, -1]
    np.add.at(diff, (np.arange(n_rows), last), 1.0)
    np.add.at(diff, (np.arange(n_rows), last + last_len), -1.0)
    return np.cumsum(diff[:, :-1], axis=1)


def _make_block_weights_nb(njit_):
    @njit_(cache=True)
    def _block_weights_nb(starts, n, ell, last_len):
        n_rows, k = starts.shape
        out = np.zeros((n_rows, n))
        for b in range(n_rows):
            for j in range(k - 1):
                s = starts[b, j]
                for i in range(s, s + ell):
                    out[b, i] += 1.0
            s = starts[b, k - 1]
            for i in range(s, s + last_len):
                out[b, i] += 1.0
        return out

    return _block_weights_nb


# ---------------------------------------------------------------------------
# ar1_paths: rows of eps are innovation sequences; row b becomes
# y[0] = eps[0] + rho * x0[b], y[t] = eps[t] + rho * y[t-1].
# ---------------------------------------------------------------------------

def _ar1_paths_np(eps, rho, x0):
    zi = (rho * x0)[:, None]
    out, _ = lfilter([1.0], [1.0, -rho], eps, axis=1, zi=zi)
    return out


def _make_ar1_paths_nb(njit_):
    @njit_(cache=True)
    def _ar1_paths_nb(eps, rho, x0):
        n_rows, n = eps.shape
        out = np.empty((n_rows, n))
        for b in range(n_rows):
            prev = x0[b]
            for t in range(n):
                prev = eps[b, t] + rho * prev
                out[b, t] = prev
        return out

    return _ar1_paths_nb


# ---------------------------------------------------------------------------
# lag_pair_counts: bins is an int64 vector of grid-cell indices in
# [0, nbins); returns the (nbins, nbins) joint count matrix of pairs
# (bins[s], bins[s + lag]).
# ---------------------------------------------------------------------------

def _lag_pair_counts_np(bins, nbins, lag):
    idx = bins[:-lag] * nbins + bins[lag:]
    counts = np.bincount(idx, minlength=nbins * nbins)
    return counts.reshape(nbins, nbins).astype(np.float64)


def _make_lag_pair_counts_nb(njit_):
    @njit_(cache=True)
    def _lag_pair_counts_nb(bins, nbins, lag):
        counts = np.zeros((nbins, nbins))
        for s in range(bins.size - lag):
            counts[bins[s], bins[s + lag]] += 1.0
        return counts

    return _lag_pair_counts_nb


_NUMPY_IMPLS = {
    "avar_rows": _avar_rows_np,
    "block_weights": _block_weights_np,
    "ar1_paths": _ar1_paths_np,
    "lag_pair_counts": _lag_pair_counts_np,
}

if NUMBA_ACTIVE:
    _NUMBA_IMPLS = {
        "avar_rows": _make_avar_rows_nb(njit),
        "block_weights": _make_block_weights_nb(njit),
        "ar1_paths": _make_ar1_paths_nb(njit),
        "lag_pair_counts": _make_lag_pair_counts_nb(njit),
    }
else:
    _NUMBA_IMPLS = {}

ACTIVE_IMPLS = _NUMBA_IMPLS if NUMBA_ACTIVE else _NUMPY_IMPLS


def avar_rows(xs, cum_rows, alpha, kink):
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    cum_rows = np.ascontiguousarray(cum_rows, dtype=np.float64)
    return ACTIVE_IMPLS["avar_rows"](xs, cum_rows, float(alpha), float(kink))


def block_weights(starts, n, ell, last_len):
    starts = np.ascontiguousarray(starts, dtype=np.int64)
    return ACTIVE_IMPLS["block_weights"](starts, int(n), int(ell), int(last_len))


def ar1_paths(eps, rho, x0):
    eps = np.ascontiguousarray(eps, dtype=np.float64)
    x0 = np.ascontiguousarray(x0, dtype=np.float64)
    return ACTIVE_IMPLS["ar1_paths"](eps, float(rho), x0)


def lag_pair_counts(bins, nbins, lag):
    bins = np.ascontiguousarray(bins, dtype=np.int64)
    return ACTIVE_IMPLS["lag_pair_counts"](bins, int(nbins), int(lag))
