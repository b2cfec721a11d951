"""Parametric ground-truth distributions, count models, and samplers.

Continuous models provide exact CDFs, quantiles and closed-form tail means;
they play the role of the true distribution function in the Monte Carlo
experiments. The AR(1) model is the beta-mixing data generator (geometric
mixing rate, stationary normal marginal known in closed form). Count models
parameterize the compound functional.

Samplers are pure given (seed, n); parallel callers derive disjoint streams
via :mod:`qhdboot.seeds`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special, stats

from . import _kernels
from .errors import LevelOutOfRange
from .stepfun import WeightFunction

_KINDS = ("normal", "exponential", "uniform", "pareto")


@dataclass(frozen=True)
class ContinuousModel:
    """One of normal(mu, sigma), exponential(rate), uniform(a, b),
    pareto(scale, tail_index). Pareto exists to probe integrability limits:
    its phi-moments diverge once the weight exponent reaches the tail index.
    """

    kind: str
    mu: float = 0.0
    sigma: float = 1.0
    rate: float = 1.0
    a: float = 0.0
    b: float = 1.0
    scale: float = 1.0
    tail_index: float = 2.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.kind == "normal" and self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.kind == "exponential" and self.rate <= 0:
            raise ValueError("rate must be positive")
        if self.kind == "uniform" and not self.a < self.b:
            raise ValueError("uniform needs a < b")
        if self.kind == "pareto" and (self.scale <= 0 or self.tail_index <= 0):
            raise ValueError("pareto needs positive scale and tail index")

    # -- exact distribution functions ---------------------------------------

    def cdf(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "normal":
            out = special.ndtr((x - self.mu) / self.sigma)
        elif self.kind == "exponential":
            out = np.where(x < 0, 0.0, -np.expm1(-self.rate * np.maximum(x, 0.0)))
        elif self.kind == "uniform":
            out = np.clip((x - self.a) / (self.b - self.a), 0.0, 1.0)
        else:
            xr = np.maximum(x, self.scale)
            out = np.where(x < self.scale, 0.0, 1.0 - (self.scale / xr) ** self.tail_index)
        return float(out) if out.ndim == 0 else out

    def pdf(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "normal":
            z = (x - self.mu) / self.sigma
            out = np.exp(-0.5 * z * z) / (self.sigma * math.sqrt(2 * math.pi))
        elif self.kind == "exponential":
            out = np.where(x < 0, 0.0, self.rate * np.exp(-self.rate * np.maximum(x, 0.0)))
        elif self.kind == "uniform":
            out = np.where((x >= self.a) & (x <= self.b), 1.0 / (self.b - self.a), 0.0)
        else:
            out = np.where(x < self.scale, 0.0,
                           self.tail_index * self.scale ** self.tail_index
                           / np.maximum(x, self.scale) ** (self.tail_index + 1))
        return float(out) if out.ndim == 0 else out

    def quantile(self, s):
        s_arr = np.asarray(s, dtype=np.float64)
        if np.any(s_arr <= 0.0) or np.any(s_arr >= 1.0):
            raise LevelOutOfRange("quantile level must lie in (0, 1)")
        if self.kind == "normal":
            out = self.mu + self.sigma * special.ndtri(s_arr)
        elif self.kind == "exponential":
            out = -np.log1p(-s_arr) / self.rate
        elif self.kind == "uniform":
            out = self.a + (self.b - self.a) * s_arr
        else:
            out = self.scale * (1.0 - s_arr) ** (-1.0 / self.tail_index)
        return float(out) if out.ndim == 0 else out

    def mean(self) -> float:
        if self.kind == "normal":
            return self.mu
        if self.kind == "exponential":
            return 1.0 / self.rate
        if self.kind == "uniform":
            return 0.5 * (self.a + self.b)
        if self.tail_index <= 1:
            return math.inf
        return self.tail_index * self.scale / (self.tail_index - 1.0)

    def support(self):
        if self.kind == "normal":
            return (-math.inf, math.inf)
        if self.kind == "exponential":
            return (0.0, math.inf)
        if self.kind == "uniform":
            return (self.a, self.b)
        return (self.scale, math.inf)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if n < 1:
            raise ValueError("n must be >= 1")
        if self.kind == "normal":
            return self.mu + self.sigma * rng.standard_normal(n)
        if self.kind == "exponential":
            return rng.exponential(1.0 / self.rate, size=n)
        if self.kind == "uniform":
            return rng.uniform(self.a, self.b, size=n)
        return self.scale * (1.0 - rng.random(n)) ** (-1.0 / self.tail_index)


def sample_iid(model: ContinuousModel, n: int, seed) -> np.ndarray:
    """n i.i.d. draws, reproducible per seed (int or SeedSequence)."""
    return model.sample(n, np.random.default_rng(seed))


def phi_moment(model: ContinuousModel, phi: WeightFunction, p: float):
    """integral of phi(x)**p dF(x), or inf when the tail diverges.

    Divergence is decided analytically from the model's tail exponent
    (quadrature cannot certify divergence): for pareto the integrand behaves
    like x**(lam*p - tail_index - 1), so the integral is finite iff
    lam * p < tail_index. The other models have sub-polynomial tails. Finite
    values are computed by adaptive quadrature to <= 1e-6 relative error.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    if model.kind == "pareto" and phi.lam * p >= model.tail_index:
        return math.inf
    lo, hi = model.support()
    val, _ = integrate.quad(lambda x: phi(x) ** p * model.pdf(x),
                            lo, hi, epsrel=1e-9, limit=200)
    return float(val)


# ---------------------------------------------------------------------------
# AR(1)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Ar1Model:
    """X_t = rho * X_{t-1} + eps_t with normal(0, innovation_sd^2) innovations.

    |rho| < 1 gives geometric beta-mixing; the stationary marginal is
    normal(0, innovation_sd^2 / (1 - rho^2)), so the true distribution
    function is available exactly.
    """

    rho: float
    innovation_sd: float = 1.0

    def __post_init__(self):
        if not abs(self.rho) < 1:
            raise ValueError("|rho| must be < 1")
        if self.innovation_sd <= 0:
            raise ValueError("innovation_sd must be positive")

    def stationary_sd(self) -> float:
        return self.innovation_sd / math.sqrt(1.0 - self.rho * self.rho)

    def stationary_model(self) -> ContinuousModel:
        return ContinuousModel("normal", mu=0.0, sigma=self.stationary_sd())


def sample_ar1(model: Ar1Model, n: int, seed, burn_in: int = 0) -> np.ndarray:
    """One stationary path of length n.

    X_0 is drawn from the stationary marginal, so the path is stationary even
    with burn_in = 0; burn_in > 0 advances the recursion before recording.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if burn_in < 0:
        raise ValueError("burn_in must be >= 0")
    rng = np.random.default_rng(seed)
    x0 = model.stationary_sd() * rng.standard_normal(1)
    eps = model.innovation_sd * rng.standard_normal((1, burn_in + n))
    path = _kernels.ar1_paths(eps, model.rho, x0)[0]
    return path[burn_in:]


def sample_ar1_batch(model: Ar1Model, shape: tuple[int, int], seed) -> np.ndarray:
    """Independent stationary paths as rows of a (replicates, n) matrix."""
    rows, n = shape
    rng = np.random.default_rng(seed)
    x0 = model.stationary_sd() * rng.standard_normal(rows)
    eps = model.innovation_sd * rng.standard_normal((rows, n))
    return _kernels.ar1_paths(eps, model.rho, x0)


# ---------------------------------------------------------------------------
# count models
# ---------------------------------------------------------------------------

_COUNT_KINDS = ("poisson", "geometric", "binomial", "deterministic")


@dataclass(frozen=True)
class CountModel:
    """Distribution of the count variable in the compound functional.

    kinds: poisson(lam), geometric(q) with pmf q * (1-q)^k on k = 0, 1, ...,
    binomial(m, q), deterministic(m).
    """

    kind: str
    lam: float = 1.0
    q: float = 0.5
    m: int = 1

    def __post_init__(self):
        if self.kind not in _COUNT_KINDS:
            raise ValueError(f"unknown count kind {self.kind!r}")
        if self.kind == "poisson" and self.lam <= 0:
            raise ValueError("lam must be positive")
        if self.kind in ("geometric", "binomial") and not 0 < self.q < 1:
            raise ValueError("q must lie in (0, 1)")
        if self.kind in ("binomial", "deterministic") and self.m < 0:
            raise ValueError("m must be >= 0")

    def pmf_vector(self, K: int) -> np.ndarray:
        """(p_0, ..., p_K)."""
        k = np.arange(K + 1)
        if self.kind == "poisson":
            return stats.poisson.pmf(k, self.lam)
        if self.kind == "geometric":
            return self.q * (1.0 - self.q) ** k
        if self.kind == "binomial":
            return stats.binom.pmf(k, self.m, self.q)
        out = np.zeros(K + 1)
        if self.m <= K:
            out[self.m] = 1.0
        return out

    def truncation_K(self, tail_eps: float = 1e-10) -> int:
        """Smallest K with tail mass below tail_eps (closed-form bounds for
        the geometric, cumulative scan otherwise)."""
        if self.kind == "deterministic":
            return self.m
        if self.kind == "binomial":
            return self.m
        if self.kind == "geometric":
            # tail beyond K is (1-q)^(K+1)
            K = int(math.ceil(math.log(tail_eps) / math.log1p(-self.q))) - 1
            return max(K, 0)
        K = max(int(self.lam), 1)
        while stats.poisson.sf(K, self.lam) > tail_eps:
            K += max(1, K // 4)
            if K > 10_000_000:  # pragma: no cover - absurd parameter guard
                raise ValueError("poisson truncation did not converge")
        while K > 0 and stats.poisson.sf(K - 1, self.lam) <= tail_eps:
            K -= 1
        return K

    def mean(self) -> float:
        if self.kind == "poisson":
            return self.lam
        if self.kind == "geometric":
            return (1.0 - self.q) / self.q
        if self.kind == "binomial":
            return self.m * self.q
        return float(self.m)

    def moment(self, r: float, K: int | None = None) -> float:
        """sum_k p_k * k**r up to the truncation point."""
        K = self.truncation_K() if K is None else K
        p = self.pmf_vector(K)
        return float(p @ np.arange(K + 1, dtype=np.float64) ** r)
