"""Closed-form derivatives of the tail-mean and compound functionals, their
chain-rule composition, and a numeric checker for the defining limit of
uniform quasi-Hadamard differentiability.

The tail-mean derivative at base F in direction v is

    dR(v) = -(1/(1-alpha)) * int_{F(x) > kink} v(x) dx,

the compound derivative is the convolution v * H with the finite measure
H = sum_k k p_k F^{*(k-1)}, and the composition derivative is literally the
chain rule dR at base C_p(F) applied to v * H. Both candidate bend points
{alpha, 1-alpha} for the indicator threshold are expressible through
``AvarParams.kink``; :func:`kink_resolution` discriminates them empirically
with the convergence checker.

The checker evaluates, along a ladder of indices n,

    e_n = || (H(theta_n + eps_n v_n) - H(theta_n)) / eps_n - dH(v) ||

for a configured base sequence theta_n, direction v, perturbed directions
v_n -> v, and scales eps_n -> 0; it passes when e_n is non-increasing over
the last three ladder points and ends below tolerance. Directions are kept
inside the functional's domain by using differences of CDFs: theta + eps * v
with v = G - theta is the mixture (1 - eps) * theta + eps * G.
"""
from __future__ import annotations

import io
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import MomentDiverges, NonIntegrableDirection, NormInfinite
from .functionals import AvarParams, CompoundParams, avar, compound_cdf, h_measure
from .models import ContinuousModel
from .stepfun import StepFunction, WeightFunction, weighted_sup_norm

_ZERO_TAIL_TOL = 1e-9


def _integrate_step_from(v: StepFunction, q: float) -> float:
    """int_q^inf v(x) dx, exact; requires the right tail of v to vanish."""
    if abs(v.values[-1]) > _ZERO_TAIL_TOL:
        raise NonIntegrableDirection(
            f"direction has non-vanishing right tail {v.values[-1]}")
    knots = v.knots
    if knots.size > 1:
        seg = np.clip(knots[1:] - np.maximum(knots[:-1], q), 0.0, None)
        total = float(v.values[:-1] @ seg)
    else:
        total = 0.0
    head = knots[0] - q
    if head > 0:
        total += v.value_at_minus_inf * head
    return total


def _kink_threshold(F, params: AvarParams):
    """Left edge of the region {x : F(x) > kink}, or None when it is empty."""
    if isinstance(F, ContinuousModel):
        return F.quantile(params.kink)
    idx = int(np.searchsorted(F.values, params.kink, side="right"))
    if idx >= F.knots.size:
        return None
    plateau = F.values == params.kink
    if np.any(plateau[:-1]):
        i = int(np.argmax(plateau))
        warnings.warn(
            f"base CDF sits exactly at the kink level {params.kink} on "
            f"[{F.knots[i]}, {F.knots[i + 1]}); the derivative formula "
            "assumes the level is taken only once", stacklevel=3)
    return float(F.knots[idx])


def avar_derivative(F, params: AvarParams, v: StepFunction,
                    phi: WeightFunction | None = None) -> float:
    """dR_{alpha;F}(v) = -(1/(1-alpha)) * int_{F > kink} v(x) dx, exact.

    F may be a step CDF or a continuous model. When ``phi`` is supplied the
    direction is additionally required to lie in the weighted cadlag space
    and phi must have a finite inverse integral (lambda > 1 for the
    polynomial family), the continuity budget of the derivative.
    """
    if phi is not None:
        if not np.isfinite(phi.integral_of_inverse()):
            raise NonIntegrableDirection(
                "int 1/phi diverges for this weight (need lambda > 1)")
        try:
            weighted_sup_norm(v, phi)
        except NormInfinite as exc:
            raise NonIntegrableDirection(str(exc)) from exc
    q = _kink_threshold(F, params)
    if q is None:
        return 0.0
    return -_integrate_step_from(v, q) / (1.0 - params.alpha)


def make_avar_dot(F, params: AvarParams) -> Callable[[StepFunction], float]:
    """Closure form of :func:`avar_derivative` with the threshold cached."""
    q = _kink_threshold(F, params)
    inv = 1.0 / (1.0 - params.alpha)

    def dot(v: StepFunction) -> float:
        if q is None:
            return 0.0
        return -inv * _integrate_step_from(v, q)

    return dot


_SHIFT_GUARD = 4_000_000


def compound_derivative(F, comp: CompoundParams, v: StepFunction,
                        phi: WeightFunction | None = None) -> StepFunction:
    """dC_{p;F}(v) = v * H_{p,F}, exact as a step function.

    The convolution of a step function with the discrete lattice measure H is
    the mass-weighted sum of shifted copies of v, a step function whose knots
    are the pairwise sums of v-knots and H-atoms.
    """
    H = h_measure(F, comp)
    if phi is not None:
        _check_count_moment(comp, phi)
    return convolve_step_with_measure(v, H)


def convolve_step_with_measure(v: StepFunction, H) -> StepFunction:
    """x -> int v(x - y) dH(y) for a lattice measure H (exact)."""
    mask = H.masses > 0
    ys = H.x_values()[mask]
    hs = H.masses[mask]
    if ys.size == 0:
        return StepFunction(np.array([0.0]), np.array([0.0]))
    if v.knots.size * ys.size > _SHIFT_GUARD:
        raise ValueError(
            f"shifted knot set would have {v.knots.size * ys.size} candidates; "
            "coarsen the lattice or the direction")
    knots = np.unique((v.knots[None, :] + ys[:, None]).ravel())
    vals = np.zeros(knots.size)
    for y, hmass in zip(ys, hs):
        vals += hmass * np.asarray(v(knots - y))
    return StepFunction(knots, vals, float(v.value_at_minus_inf * hs.sum()))


def _check_count_moment(comp: CompoundParams, phi: WeightFunction) -> None:
    """Numeric convergence guard for sum_k p_k k^((1+lambda) v 2)."""
    r = max(2.0, 1.0 + phi.lam)
    K = comp.resolve_K()
    partial = comp.count.moment(r, K)
    extended = comp.count.moment(r, 2 * K + 8)
    if extended - partial > 1e-6 * max(1.0, partial):
        raise MomentDiverges(
            f"count moment of order {r} has not converged by K={K}")


def composition_derivative(F, avar_params: AvarParams, comp: CompoundParams,
                           v: StepFunction, phi: WeightFunction | None = None) -> float:
    """Chain rule: dT = dR at base C_p(F), applied to dC(v) = v * H_{p,F}."""
    base = compound_cdf(F, comp).cdf
    w = compound_derivative(F, comp, v, phi=phi)
    return avar_derivative(base, avar_params, w)


def make_composition_dot(F, avar_params: AvarParams,
                         comp: CompoundParams) -> Callable[[StepFunction], float]:
    """Closure form of :func:`composition_derivative` with C_p(F) and H cached."""
    base = compound_cdf(F, comp).cdf
    H = h_measure(F, comp)
    inner_dot = make_avar_dot(base, avar_params)

    def dot(v: StepFunction) -> float:
        return inner_dot(convolve_step_with_measure(v, H))

    return dot


# ---------------------------------------------------------------------------
# numeric convergence checker
# ---------------------------------------------------------------------------

@dataclass
class QhdCheckConfig:
    """Quadruple generator for the differentiability limit.

    ``base_sequence(n)`` yields theta_n (constant, norm-convergent or
    pointwise-convergent, per the sequence set the caller claims);
    ``scales(n)`` yields eps_n; ``perturbed_directions(n)`` yields v_n and
    defaults to the constant direction. theta_n + eps_n * v_n must stay a
    valid CDF; rungs violating this are reported infeasible, not skipped.
    """

    base_sequence: Callable[[int], StepFunction]
    direction: StepFunction
    scales: Callable[[int], float]
    n_ladder: Sequence[int]
    perturbed_directions: Callable[[int], StepFunction] | None = None
    tol: float = 5e-3


@dataclass
class ConvergenceRow:
    n: int
    epsilon: float
    error: float
    feasible: bool


@dataclass
class ConvergenceTable:
    rows: list[ConvergenceRow] = field(default_factory=list)
    verdict: bool = False
    tol: float = 5e-3

    def errors(self) -> list[float]:
        return [r.error for r in self.rows if r.feasible]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("n,epsilon,error,feasible\n")
        for r in self.rows:
            buf.write(f"{r.n},{r.epsilon!r},{r.error!r},{int(r.feasible)}\n")
        return buf.getvalue()


def _try_cdf(f: StepFunction) -> StepFunction | None:
    if f.value_at_minus_inf != 0.0:
        return None
    vals = f.values
    if np.any(vals < -1e-12) or np.any(np.diff(vals) < -1e-12):
        return None
    vals = np.maximum.accumulate(np.clip(vals, 0.0, None))
    if not vals[-1] > 0:
        return None
    return StepFunction(f.knots, vals, 0.0, is_cdf=True)


def qhd_convergence_check(H: Callable, dot_value, cfg: QhdCheckConfig,
                          error_norm: WeightFunction | None = None) -> ConvergenceTable:
    """Evaluate e_n = ||(H(theta_n + eps_n v_n) - H(theta_n)) / eps_n - dH(v)||
    along the ladder.

    ``dot_value`` is the precomputed dH(v) (a float for scalar functionals, a
    step function otherwise; in the latter case ``error_norm`` supplies the
    weighted norm). PASS requires the error to be non-increasing over the
    last three feasible rungs and below tolerance at the end.
    """
    table = ConvergenceTable(tol=cfg.tol)
    for n in cfg.n_ladder:
        theta = cfg.base_sequence(n)
        eps = float(cfg.scales(n))
        vn = cfg.direction if cfg.perturbed_directions is None else cfg.perturbed_directions(n)
        perturbed = _try_cdf(theta + vn.scale(eps))
        if perturbed is None:
            table.rows.append(ConvergenceRow(n, eps, float("nan"), False))
            continue
        quotient_hi = H(perturbed)
        quotient_lo = H(theta)
        if isinstance(quotient_hi, StepFunction):
            if error_norm is None:
                raise ValueError("error_norm is required for function-valued H")
            diff = (quotient_hi - quotient_lo).scale(1.0 / eps) - dot_value
            err = weighted_sup_norm(diff, error_norm)
        else:
            err = abs((quotient_hi - quotient_lo) / eps - dot_value)
        table.rows.append(ConvergenceRow(n, eps, float(err), True))
    es = table.errors()
    if len(es) >= 3:
        tail = es[-3:]
        monotone = all(tail[i + 1] <= tail[i] + 1e-12 for i in range(2))
        table.verdict = monotone and tail[-1] < cfg.tol
    return table


# ---------------------------------------------------------------------------
# kink-convention resolution
# ---------------------------------------------------------------------------

def model_step_approx(model: ContinuousModel, m: int) -> StepFunction:
    """Step CDF placing mass 1/m at the quantiles of levels (i - 1/2)/m."""
    levels = (np.arange(m) + 0.5) / m
    return StepFunction(np.asarray(model.quantile(levels)),
                        (np.arange(m) + 1.0) / m, 0.0, is_cdf=True)


@dataclass
class KinkResolution:
    winner: str | None
    table_alpha: ConvergenceTable
    table_one_minus_alpha: ConvergenceTable


def kink_resolution(alpha: float = 0.9, rungs: int = 12, tol: float = 5e-3,
                    direction_atom: float = 0.3) -> KinkResolution:
    """Discriminate the two candidate indicator thresholds for dR.

    The functional is the canonical tail mean on (a fine step approximation
    of) the uniform(0, 1) distribution; the two derivative candidates place
    the indicator threshold at alpha and at 1 - alpha. The base sequence
    refines with the ladder, the scale halves each rung, and the direction is
    the difference between a point-mass CDF inside (1 - alpha, alpha) and the
    base, so exactly one candidate's error can vanish.
    """
    model = ContinuousModel("uniform", a=0.0, b=1.0)
    eps_of = lambda n: 0.25 * 2.0 ** (-(n - 1))  # noqa: E731
    m_of = lambda n: min(int(np.ceil(8.0 / eps_of(n))), int(np.ceil(8.0 / eps_of(rungs))))  # noqa: E731
    m_final = m_of(rungs)
    base_final = model_step_approx(model, m_final)
    g_cdf = StepFunction.indicator(direction_atom)
    v = g_cdf - base_final
    params = AvarParams(alpha)  # canonical functional, bend at alpha
    h_fun = lambda G: avar(G, params)  # noqa: E731

    cfg = QhdCheckConfig(
        base_sequence=lambda n: base_final if m_of(n) == m_final else model_step_approx(model, m_of(n)),
        direction=v,
        scales=eps_of,
        n_ladder=list(range(1, rungs + 1)),
        perturbed_directions=lambda n: g_cdf - (base_final if m_of(n) == m_final
                                                else model_step_approx(model, m_of(n))),
        tol=tol,
    )
    dot_alpha = avar_derivative(base_final, AvarParams(alpha, kink=alpha), v)
    dot_other = avar_derivative(base_final, AvarParams(alpha, kink=1.0 - alpha), v)
    table_a = qhd_convergence_check(h_fun, dot_alpha, cfg)
    table_b = qhd_convergence_check(h_fun, dot_other, cfg)
    if table_a.verdict and not table_b.verdict:
        winner = "alpha"
    elif table_b.verdict and not table_a.verdict:
        winner = "one_minus_alpha"
    else:
        winner = None
    return KinkResolution(winner, table_a, table_b)
