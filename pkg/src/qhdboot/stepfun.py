"""Exact algebra for cadlag step functions with weighted sup-norms.

A :class:`StepFunction` is right-continuous, piecewise constant with finitely
many knots, and carries its value on the open left tail explicitly. It houses
distribution functions (empirical, bootstrapped, centered), lattice CDFs, and
differences of such functions. A :class:`WeightFunction` is the polynomial
weight ``phi_lambda(x) = (1 + |x|)**lambda``; the weighted sup-norm
``sup_x |f(x)| * phi(x)`` of a step function is computed exactly over the
finite candidate set of knots and knot left-limits, because on each constancy
interval ``|f| * phi`` attains its supremum at an interval endpoint (phi is
unimodal with minimum at 0). A :class:`GridPmf` is a mass vector on a uniform
lattice.

All types are immutable after construction and all operations are pure.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .errors import IoError, LevelOutOfRange, NormInfinite, RangeTooSmall

_MASS_RTOL = 1e-12


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class WeightFunction:
    """The weight ``phi_lambda(x) = (1 + |x|)**lambda`` with ``lambda >= 0``.

    phi is continuous, >= 1 everywhere, non-increasing on (-inf, 0] and
    non-decreasing on [0, inf), with phi(0) = 1.
    """

    lam: float
    kind: str = "polynomial"

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.kind != "polynomial":
            raise ValueError("only the polynomial weight family is supported")

    def __call__(self, x):
        return (1.0 + np.abs(x)) ** self.lam

    @property
    def unbounded(self) -> bool:
        return self.lam > 0

    def integral_of_inverse(self) -> float:
        """integral of 1/phi over the real line; finite iff lambda > 1."""
        if self.lam > 1.0:
            return 2.0 / (self.lam - 1.0)
        return np.inf


@dataclass(frozen=True)
class StepFunction:
    """Right-continuous step function on the real line.

    ``values[i]`` is the function value on ``[knots[i], knots[i+1])`` and
    ``value_at_minus_inf`` the value on ``(-inf, knots[0])``. Evaluation at a
    knot returns the post-jump value. A function flagged ``is_cdf`` must
    additionally satisfy ``value_at_minus_inf == 0``, non-decreasing values
    and a positive final value; the final value (the total mass) need not be
    1, which accommodates weighted empirical CDFs.
    """

    knots: np.ndarray
    values: np.ndarray
    value_at_minus_inf: float = 0.0
    is_cdf: bool = False

    def __post_init__(self):
        knots = _readonly(self.knots)
        values = _readonly(self.values)
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "values", values)
        if knots.ndim != 1 or values.ndim != 1 or knots.size != values.size:
            raise ValueError("knots and values must be 1-D arrays of equal length")
        if knots.size == 0:
            raise ValueError("a step function needs at least one knot")
        if np.any(np.diff(knots) <= 0):
            raise ValueError("knots must be strictly increasing")
        if not np.all(np.isfinite(knots)) or not np.all(np.isfinite(values)):
            raise ValueError("knots and values must be finite")
        if self.is_cdf:
            if self.value_at_minus_inf != 0.0:
                raise ValueError("a CDF must vanish at -inf")
            if np.any(np.diff(values) < 0):
                raise ValueError("CDF values must be non-decreasing")
            if not values[-1] > 0:
                raise ValueError("a CDF must have positive total mass")

    # -- constructors -------------------------------------------------------

    @staticmethod
    def indicator(c: float) -> "StepFunction":
        """The unit step 1_{[c, inf)}, i.e. the CDF of a point mass at c."""
        return StepFunction(np.array([c]), np.array([1.0]), 0.0, is_cdf=True)

    @staticmethod
    def from_atoms(xs, masses, is_cdf: bool = True) -> "StepFunction":
        """CDF of the discrete measure placing ``masses`` on points ``xs``.

        Repeated points are merged with accumulated mass; zero-mass points
        are kept as (jump-free) knots so unions of atom sets stay aligned.
        """
        xs = np.asarray(xs, dtype=np.float64)
        masses = np.asarray(masses, dtype=np.float64)
        if xs.size != masses.size:
            raise ValueError("xs and masses must have equal length")
        order = np.argsort(xs, kind="stable")
        xs = xs[order]
        masses = masses[order]
        uniq, inverse = np.unique(xs, return_inverse=True)
        accum = np.zeros(uniq.size)
        np.add.at(accum, inverse, masses)
        return StepFunction(uniq, np.cumsum(accum), 0.0, is_cdf=is_cdf)

    # -- evaluation ---------------------------------------------------------

    def __call__(self, x, side: str = "right"):
        """Evaluate at ``x``; ``side='left'`` gives the left limit f(x-)."""
        x = np.asarray(x, dtype=np.float64)
        if side == "right":
            idx = np.searchsorted(self.knots, x, side="right") - 1
        elif side == "left":
            idx = np.searchsorted(self.knots, x, side="left") - 1
        else:
            raise ValueError("side must be 'right' or 'left'")
        out = np.where(idx >= 0, self.values[np.clip(idx, 0, None)], self.value_at_minus_inf)
        return float(out) if out.ndim == 0 else out

    @property
    def total_mass(self) -> float:
        return float(self.values[-1])

    def jumps(self) -> np.ndarray:
        """Jump sizes at each knot (first jump measured from the left tail)."""
        prev = np.concatenate(([self.value_at_minus_inf], self.values[:-1]))
        return self.values - prev

    # -- algebra ------------------------------------------------------------

    def scale(self, c: float) -> "StepFunction":
        return StepFunction(self.knots, c * self.values, c * self.value_at_minus_inf,
                            is_cdf=self.is_cdf and c > 0)

    def shift(self, c: float) -> "StepFunction":
        """The function x -> f(x - c)."""
        return StepFunction(self.knots + c, self.values, self.value_at_minus_inf,
                            is_cdf=self.is_cdf)

    def __mul__(self, c: float) -> "StepFunction":
        return self.scale(float(c))

    __rmul__ = __mul__

    def __neg__(self) -> "StepFunction":
        return self.scale(-1.0)

    def __add__(self, other: "StepFunction") -> "StepFunction":
        knots, fv, gv = _merged_values(self, other)
        return StepFunction(knots, fv + gv,
                            self.value_at_minus_inf + other.value_at_minus_inf)

    def __sub__(self, other: "StepFunction") -> "StepFunction":
        knots, fv, gv = _merged_values(self, other)
        return StepFunction(knots, fv - gv,
                            self.value_at_minus_inf - other.value_at_minus_inf)

    def as_cdf(self) -> "StepFunction":
        """Reinterpret (and validate) this function as a CDF."""
        return StepFunction(self.knots, self.values, self.value_at_minus_inf, is_cdf=True)

    # -- serialization ------------------------------------------------------

    def to_csv(self) -> str:
        """CSV with columns (knot, value); the header carries the left-tail value."""
        buf = io.StringIO()
        buf.write(f"knot,value,value_at_minus_inf={float(self.value_at_minus_inf)!r}\n")
        for k, v in zip(self.knots, self.values):
            buf.write(f"{float(k)!r},{float(v)!r}\n")
        return buf.getvalue()

    @staticmethod
    def from_csv(text: str, is_cdf: bool = False) -> "StepFunction":
        lines = [ln for ln in text.strip().splitlines() if ln]
        header = lines[0].split(",")
        if len(header) != 3 or not header[2].startswith("value_at_minus_inf="):
            raise IoError("malformed StepFunction CSV header")
        vminf = float(header[2].split("=", 1)[1])
        rows = [ln.split(",") for ln in lines[1:]]
        knots = np.array([float(r[0]) for r in rows])
        values = np.array([float(r[1]) for r in rows])
        return StepFunction(knots, values, vminf, is_cdf=is_cdf)


def _merged_values(f: StepFunction, g: StepFunction):
    knots = np.union1d(f.knots, g.knots)
    return knots, np.asarray(f(knots)), np.asarray(g(knots))


# ---------------------------------------------------------------------------
# weighted sup-norm
# ---------------------------------------------------------------------------

_TAIL_DUST = 1e-12


def weighted_sup_norm(f: StepFunction, phi: WeightFunction) -> float:
    """sup_x |f(x)| * phi(x), exact.

    On the constancy interval [a, b) the supremum of |f| * phi is
    |f| * max(phi(a), phi(b)) because phi is continuous and unimodal with its
    minimum at 0; the candidate set {knots, knot left-limits, 0, tail limits}
    therefore determines the supremum exactly. Raises :class:`NormInfinite`
    when a tail value is nonzero while phi is unbounded (f is then outside
    the weighted cadlag space); tail values within 1e-12 of zero count as
    zero, since differences of floating-point CDFs carry that much dust.
    """
    scale = max(1.0, float(np.max(np.abs(f.values))))
    if phi.unbounded and (abs(f.value_at_minus_inf) > _TAIL_DUST * scale
                          or abs(f.values[-1]) > _TAIL_DUST * scale):
        raise NormInfinite(
            "function does not vanish at +/-inf under an unbounded weight")
    pk = phi(f.knots)
    # interval [knots[i], knots[i+1]) with value values[i]
    interior = np.abs(f.values[:-1]) * np.maximum(pk[:-1], pk[1:]) if f.knots.size > 1 else np.array([0.0])
    last = abs(f.values[-1]) * pk[-1]  # phi == 1 case: tail sup equals phi(last knot) = 1 <= ...
    head = abs(f.value_at_minus_inf) * pk[0]
    best = max(float(np.max(interior)) if interior.size else 0.0, last, head)
    if not phi.unbounded:
        # phi identically 1: tails contribute their plain absolute values
        best = max(best, abs(f.value_at_minus_inf), abs(f.values[-1]))
    return best


def left_continuous_inverse(F: StepFunction, s: float) -> float:
    """Generalized inverse ``inf{x : F(x) >= s}`` of a step CDF."""
    if not F.is_cdf:
        raise ValueError("left_continuous_inverse needs a CDF")
    if not (0.0 < s <= F.total_mass):
        raise LevelOutOfRange(f"level {s} outside (0, {F.total_mass}]")
    idx = int(np.searchsorted(F.values, s, side="left"))
    return float(F.knots[idx])


# ---------------------------------------------------------------------------
# lattice discretization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridPmf:
    """Non-negative mass vector on the uniform lattice ``origin + i * step``."""

    origin: float
    step: float
    masses: np.ndarray
    total_mass: float = field(init=False)

    def __post_init__(self):
        masses = _readonly(self.masses)
        object.__setattr__(self, "masses", masses)
        if self.step <= 0:
            raise ValueError("step must be positive")
        if masses.ndim != 1 or masses.size == 0:
            raise ValueError("masses must be a non-empty 1-D array")
        if np.any(masses < 0):
            raise ValueError("masses must be non-negative")
        object.__setattr__(self, "total_mass", float(masses.sum()))

    def x_values(self) -> np.ndarray:
        return self.origin + self.step * np.arange(self.masses.size)

    def mean(self) -> float:
        return float(self.x_values() @ self.masses)

    def abs_moment(self, r: float) -> float:
        return float(np.abs(self.x_values()) ** r @ self.masses)

    def cdf_step(self) -> StepFunction:
        """The CDF of this measure as a step function on the lattice."""
        return StepFunction(self.x_values(), np.cumsum(self.masses), 0.0, is_cdf=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("index,lattice_x,mass\n")
        xs = self.x_values()
        for i, (x, m) in enumerate(zip(xs, self.masses)):
            buf.write(f"{i},{float(x)!r},{float(m)!r}\n")
        return buf.getvalue()

    @staticmethod
    def from_csv(text: str) -> "GridPmf":
        lines = [ln for ln in text.strip().splitlines() if ln]
        rows = [ln.split(",") for ln in lines[1:]]
        xs = np.array([float(r[1]) for r in rows])
        masses = np.array([float(r[2]) for r in rows])
        if xs.size == 1:
            return GridPmf(float(xs[0]), 1.0, masses)
        steps = np.diff(xs)
        return GridPmf(float(xs[0]), float(steps[0]), masses)


def discretize(F: StepFunction, h: float, lo: float, hi: float) -> GridPmf:
    """Round the atoms of a step CDF onto the lattice ``lo + i * h``.

    Each atom goes to the nearest lattice point; exact midpoints go to the
    lower point. Total mass is preserved and no atom moves by more than h/2.
    """
    if not F.is_cdf:
        raise ValueError("discretize needs a CDF")
    if h <= 0:
        raise ValueError("h must be positive")
    if F.knots[0] < lo or F.knots[-1] > hi:
        raise RangeTooSmall(
            f"knots span [{F.knots[0]}, {F.knots[-1]}] outside [{lo}, {hi}]")
    jumps = F.jumps()
    keep = jumps > 0
    xs = F.knots[keep]
    ms = jumps[keep]
    n_points = int(np.ceil((hi - lo) / h - 1e-12)) + 1
    q = (xs - lo) / h
    idx = np.ceil(q - 0.5).astype(np.int64)  # nearest, exact ties to the lower point
    idx = np.clip(idx, 0, n_points - 1)
    masses = np.zeros(n_points)
    np.add.at(masses, idx, ms)
    return GridPmf(lo, h, masses)


# ---------------------------------------------------------------------------
# numeric norm against a smooth reference (diagnostics)
# ---------------------------------------------------------------------------

def weighted_norm_vs_curve(f: StepFunction, curve, phi: WeightFunction,
                           refine: int = 24) -> float:
    """sup_x |f(x) - curve(x)| * phi(x) for a continuous monotone ``curve``.

    Unlike :func:`weighted_sup_norm` this is numeric: per constancy interval
    of f the maximum of |const - curve| * phi can sit in the interior, so
    interval endpoints are complemented with a golden-section refinement on
    the ``refine`` most promising intervals. Used for diagnostics such as
    ||F_hat_n - F||_phi against a parametric model; accuracy is ample for
    monotone-decrease checks. Tail suprema are attained at the extreme knots
    whenever |f - curve| * phi -> 0 in both tails, which the caller must
    ensure (CDF-minus-CDF differences with phi-integrable models qualify).
    """
    knots = f.knots
    vals_right = np.asarray(f(knots))
    vals_left = np.asarray(f(knots, side="left"))
    c = np.asarray(curve(knots))
    cand = np.maximum(np.abs(vals_right - c), np.abs(vals_left - c)) * phi(knots)

    # interior of [knots[i], knots[i+1]) with f == values[i]
    if knots.size > 1:
        a, b = knots[:-1], knots[1:]
        fa = vals_right[:-1]
        mids = 0.5 * (a + b)
        mid_score = np.abs(fa - np.asarray(curve(mids))) * phi(mids)
        interval_best = np.maximum.reduce([
            mid_score,
            np.abs(fa - c[:-1]) * phi(a),
            np.abs(fa - np.asarray(curve(b))) * phi(b),
        ])
        top = np.argsort(interval_best)[-refine:]
        golden = (np.sqrt(5.0) - 1.0) / 2.0
        refined = []
        for i in top:
            lo_x, hi_x, fv = a[i], b[i], fa[i]

            def score(x, fv=fv):
                return abs(fv - float(curve(x))) * float(phi(x))

            x1 = hi_x - golden * (hi_x - lo_x)
            x2 = lo_x + golden * (hi_x - lo_x)
            f1, f2 = score(x1), score(x2)
            for _ in range(40):
                if f1 < f2:
                    lo_x, x1, f1 = x1, x2, f2
                    x2 = lo_x + golden * (hi_x - lo_x)
                    f2 = score(x2)
                else:
                    hi_x, x2, f2 = x2, x1, f1
                    x1 = hi_x - golden * (hi_x - lo_x)
                    f1 = score(x1)
            refined.append(max(f1, f2, score(lo_x), score(hi_x)))
        interior = max(float(np.max(interval_best)), max(refined))
    else:
        interior = 0.0
    return max(float(np.max(cand)), interior)
