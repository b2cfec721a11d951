"""The tail-mean (Average Value at Risk) functional, the compound
distribution functional via lattice convolution, and their composition.

The tail-mean functional at level alpha is

    R_alpha(F) = -int_{-inf}^0 g(F(x)) dx + int_0^inf (1 - g(F(x))) dx,
    g(t) = max(t - kink, 0) / (1 - alpha),

with kink = alpha by default, in which case R_alpha equals the classical
expected shortfall (1/(1-alpha)) * int_alpha^1 quantile(s) ds. For a step CDF
the integrand is piecewise constant and the value collapses to the exact sum

    R_alpha(G) = x_last - sum_i g(G(x_i)) * (x_{i+1} - x_i),

valid whenever the plateau satisfies g(total mass) = 1 (otherwise the tail
integrand does not vanish and the functional diverges; see
:func:`avar_difference` for the finite difference of two such expressions).

The compound functional is C_p(F) = sum_k p_k F^{*k} with F^{*0} the point
mass at zero; powers are computed by direct mass convolution on a shared
uniform lattice, which is exact on the lattice.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .errors import LatticeMismatch, NonIntegrable, RangeTooSmall
from .models import ContinuousModel, CountModel
from .stepfun import GridPmf, StepFunction, discretize

_TAIL_TOL = 1e-8


@dataclass(frozen=True)
class AvarParams:
    """Level alpha plus the bend point of the distortion g.

    g(t) = max(t - kink, 0) / (1 - alpha) is non-decreasing, convex, and
    vanishes at the kink. kink defaults to alpha (g(1) = 1, the expected-
    shortfall case); kink = 1 - alpha is the rival reading of the derivative
    indicator and is kept expressible so the convergence checker can
    discriminate between the two (see derivatives.kink_resolution).
    """

    alpha: float
    kink: float | None = None

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.kink is None:
            object.__setattr__(self, "kink", self.alpha)
        if not 0 < self.kink < 1:
            raise ValueError("kink must lie in (0, 1)")

    def g(self, t):
        return np.maximum(np.asarray(t, dtype=np.float64) - self.kink, 0.0) / (1.0 - self.alpha)


def _avar_step_truncated(G: StepFunction, params: AvarParams) -> float:
    """x_last - int_{-inf}^{x_last} g(G); equals R_alpha(G) when g(mass) = 1."""
    if not G.is_cdf:
        raise ValueError("avar needs a CDF")
    if G.knots.size == 1:
        return float(G.knots[0])
    g = params.g(G.values[:-1])
    return float(G.knots[-1] - g @ np.diff(G.knots))


def avar(F, params: AvarParams) -> float:
    """R_alpha of a step CDF (exact) or of a continuous model (closed form).

    Raises :class:`NonIntegrable` when the tail integrand cannot vanish:
    total mass and kink must satisfy g(mass) = 1 (mass 1 and kink = alpha in
    the standard case), and a model must have a finite first moment.
    """
    if isinstance(F, ContinuousModel):
        return _avar_model(F, params)
    if abs(params.g(F.total_mass) - 1.0) > _TAIL_TOL:
        raise NonIntegrable(
            f"tail integrand does not vanish: g(total mass {F.total_mass}) != 1; "
            "use avar_difference for bootstrap statistics with mean weight != 1")
    return _avar_step_truncated(F, params)


def _avar_model(model: ContinuousModel, params: AvarParams) -> float:
    if params.kink != params.alpha:
        raise NonIntegrable("a continuous model with kink != alpha has a "
                            "non-vanishing tail integrand")
    a = params.alpha
    if model.kind == "uniform":
        return model.a + (model.b - model.a) * (1.0 + a) / 2.0
    if model.kind == "exponential":
        return (1.0 - math.log1p(-a)) / model.rate
    if model.kind == "normal":
        z = special.ndtri(a)
        return model.mu + model.sigma * math.exp(-0.5 * z * z) / math.sqrt(2 * math.pi) / (1.0 - a)
    if model.tail_index <= 1.0:
        raise NonIntegrable("pareto with tail index <= 1 has infinite mean")
    ti = model.tail_index
    return model.scale * ti / (ti - 1.0) * (1.0 - a) ** (-1.0 / ti)


def avar_difference(G1: StepFunction, G2: StepFunction, params: AvarParams) -> float:
    """R_alpha(G1) - R_alpha(G2) evaluated as one exact integral.

    Computed as int (g(G2) - g(G1)) dx on the union of knots. The integrand
    vanishes beyond the larger last knot iff both plateaus map to the same
    g-value, which holds whenever the total masses agree (e.g. a bootstrap
    CDF against its centering, mean weight W_bar on both sides); this keeps
    the difference finite even when each side alone diverges (wild scheme).
    """
    if not (G1.is_cdf and G2.is_cdf):
        raise ValueError("avar_difference needs CDFs")
    g_tail = params.g(G1.total_mass) - params.g(G2.total_mass)
    if abs(g_tail) > _TAIL_TOL:
        raise NonIntegrable(
            f"difference diverges: plateau g-values differ by {g_tail}")
    knots = np.union1d(G1.knots, G2.knots)
    if knots.size == 1:
        return 0.0
    d = params.g(np.asarray(G2(knots[:-1]))) - params.g(np.asarray(G1(knots[:-1])))
    return float(d @ np.diff(knots))


def avar_quantile_form(F, params: AvarParams) -> float:
    """(1/(1-alpha)) * int_alpha^1 F^{<-}(s) ds, the quantile representation.

    Exact for step CDFs of total mass one, adaptive quadrature for models.
    Serves as the independent oracle tying the distortion form of R_alpha to
    the classical expected shortfall.
    """
    a = params.alpha
    if isinstance(F, ContinuousModel):
        val, _ = integrate.quad(F.quantile, a, 1.0, epsrel=1e-10, limit=200)
        return val / (1.0 - a)
    if abs(F.total_mass - 1.0) > _TAIL_TOL:
        raise NonIntegrable("quantile form needs a probability CDF")
    cum = F.values
    prev = np.concatenate(([0.0], cum[:-1]))
    seg = np.clip(np.minimum(cum, 1.0) - np.maximum(prev, a), 0.0, None)
    return float(F.knots @ seg) / (1.0 - a)


# ---------------------------------------------------------------------------
# lattice convolution
# ---------------------------------------------------------------------------

def _check_lattice(a: GridPmf, b: GridPmf) -> float:
    h = a.step
    if abs(a.step - b.step) > 1e-9 * h:
        raise LatticeMismatch(f"steps differ: {a.step} vs {b.step}")
    for g in (a, b):
        if abs(g.origin / h - round(g.origin / h)) > 1e-9:
            raise LatticeMismatch(f"origin {g.origin} not commensurate with step {h}")
    return h


def convolve_pmf(a: GridPmf, b: GridPmf) -> GridPmf:
    """Mass vector of the sum distribution, by direct convolution (exact on
    the lattice, no periodization)."""
    h = _check_lattice(a, b)
    return GridPmf(a.origin + b.origin, h, np.convolve(a.masses, b.masses))


def k_fold(a: GridPmf, k: int) -> GridPmf:
    """k-fold convolution power by binary exponentiation; k = 0 is the point
    mass at zero."""
    if k < 0:
        raise ValueError("k must be >= 0")
    result = GridPmf(0.0, a.step, np.array([1.0]))
    base = a
    while k:
        if k & 1:
            result = convolve_pmf(result, base)
        k >>= 1
        if k:
            base = convolve_pmf(base, base)
    return result


def _power_mixture(base: GridPmf, coeffs: np.ndarray) -> GridPmf:
    """sum_k coeffs[k] * base^{*k} accumulated on one lattice.

    Consecutive powers are built iteratively (each new power is one
    convolution with ``base``), which is cheaper than separate binary
    exponentiation when all powers up to K are needed.
    """
    h = base.step
    if abs(base.origin / h - round(base.origin / h)) > 1e-9:
        raise LatticeMismatch(f"origin {base.origin} not commensurate with step {h}")
    K = coeffs.size - 1
    pieces = []
    power = GridPmf(0.0, h, np.array([1.0]))
    for k in range(K + 1):
        if k > 0:
            power = convolve_pmf(power, base)
        if coeffs[k] != 0.0:
            pieces.append((power.origin, coeffs[k] * power.masses))
    if not pieces:
        return GridPmf(0.0, h, np.array([0.0]))
    lo = min(o for o, _ in pieces)
    hi = max(o + h * (m.size - 1) for o, m in pieces)
    size = int(round((hi - lo) / h)) + 1
    acc = np.zeros(size)
    for o, m in pieces:
        off = int(round((o - lo) / h))
        acc[off:off + m.size] += m
    return GridPmf(lo, h, acc)


@dataclass(frozen=True)
class CompoundParams:
    """Count model, lattice geometry and series truncation for C_p."""

    count: CountModel
    step: float
    lo: float
    hi: float
    truncation: int | None = None
    tail_eps: float = 1e-10

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError("step must be positive")
        if not self.lo < self.hi:
            raise ValueError("lo must be < hi")

    def resolve_K(self) -> int:
        return self.truncation if self.truncation is not None else self.count.truncation_K(self.tail_eps)


@dataclass(frozen=True)
class CompoundResult:
    pmf: GridPmf
    cdf: StepFunction
    truncation_deficit: float
    K: int


def _severity_grid(F, params: CompoundParams) -> GridPmf:
    if isinstance(F, ContinuousModel):
        return model_to_grid(F, params.step, params.lo, params.hi)
    return discretize(F, params.step, params.lo, params.hi)


def model_to_grid(model: ContinuousModel, h: float, lo: float, hi: float) -> GridPmf:
    """Midpoint discretization of a continuous model: cell i gets the mass
    F(x_i + h/2) - F(x_i - h/2), with the two extreme cells absorbing the
    tails so the total is exactly one."""
    slo, shi = model.support()
    if slo < lo - h / 2 and np.isfinite(slo):
        raise RangeTooSmall(f"support starts at {slo} below lattice start {lo}")
    n_points = int(np.ceil((hi - lo) / h - 1e-12)) + 1
    xs = lo + h * np.arange(n_points)
    edges = np.concatenate(([-np.inf], xs[:-1] + h / 2, [np.inf]))
    cdf_vals = np.concatenate(([0.0], np.asarray(model.cdf(edges[1:-1])), [1.0]))
    return GridPmf(lo, h, np.diff(cdf_vals))


def compound_cdf(F, params: CompoundParams) -> CompoundResult:
    """C_p(F) = sum_{k<=K} p_k F^{*k} on the lattice.

    F may be a step CDF of total mass one (atoms are rounded to the lattice)
    or a continuous model (midpoint discretization). The truncation deficit
    sum_{k>K} p_k is reported in the result; the returned total mass is
    1 - deficit.
    """
    base = _severity_grid(F, params)
    if abs(base.total_mass - 1.0) > _TAIL_TOL:
        raise NonIntegrable(f"severity mass {base.total_mass} is not a probability")
    K = params.resolve_K()
    p = params.count.pmf_vector(K)
    deficit = max(0.0, 1.0 - float(p.sum()))
    out = _power_mixture(base, p)
    return CompoundResult(out, out.cdf_step(), deficit, K)


def h_measure(F, params: CompoundParams) -> GridPmf:
    """The finite measure H_{p,F} = sum_{k>=1} k p_k F^{*(k-1)} (total mass
    close to E[N]); the kernel of the compound functional's derivative."""
    base = _severity_grid(F, params)
    K = params.resolve_K()
    p = params.count.pmf_vector(K)
    coeffs = np.concatenate((np.arange(1, K + 1) * p[1:], [0.0]))  # index k-1
    return _power_mixture(base, coeffs)


def composition(F, avar_params: AvarParams, comp_params: CompoundParams) -> float:
    """T_{alpha,p}(F) = R_alpha(C_p(F)).

    A deterministic count of 1 makes C_p the identity, in which case the
    lattice is bypassed and the value equals avar(F) exactly.
    """
    count = comp_params.count
    if count.kind == "deterministic" and count.m == 1:
        return avar(F, avar_params)
    return avar(compound_cdf(F, comp_params).cdf, avar_params)
