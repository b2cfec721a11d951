"""Monte Carlo harness: sampling law vs bootstrap law vs limit law.

For a configured model, functional and bootstrap scheme, the harness draws

- the sampling distribution: R independent replicates of
  sqrt(n) * (H(F_hat_n) - H(F)), with H(F) evaluated at the exact model;
- the bootstrap distribution: B replicates of
  sqrt(n) * (H(F*_n) - H(C_hat_n)) on ONE fixed outer sample per n
  (the consistency statement is per-omega; a robustness mode repeats this
  over several omegas and reports them separately, never pooled);
- the limit law: samples of dH(B_F) from the grid Gaussian limit.

Distances between the three laws are the exact two-sample Kolmogorov-Smirnov
statistic and Wasserstein-1, computable surrogates for the bounded-Lipschitz
metric that the asymptotic statements are phrased in. The verdict of a run is
PASS when KS(bootstrap, sampling) is non-increasing along the sample-size
ladder and ends below the configured tolerance.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels, seeds
from .derivatives import (convolve_step_with_measure, make_avar_dot,
                          make_composition_dot)
from .errors import EmptySample
from .functionals import (AvarParams, CompoundParams, avar, avar_difference,
                          compound_cdf, composition, h_measure)
from .limits import (GaussianLimit, covariance_iid, covariance_mixing,
                     limit_law_samples, limit_law_samples_map, quantile_grid)
from .models import Ar1Model, ContinuousModel, sample_ar1_batch
from .resampling import (BootstrapWeights, blockwise_expected_weights,
                         bootstrap_cdf, centering, empirical_cdf)
from .stepfun import (StepFunction, WeightFunction, weighted_norm_vs_curve,
                      weighted_sup_norm)


# ---------------------------------------------------------------------------
# distances
# ---------------------------------------------------------------------------

def ks_distance(a, b) -> float:
    """Exact sup-distance of the two empirical CDFs."""
    a = np.sort(np.asarray(a, dtype=np.float64))
    b = np.sort(np.asarray(b, dtype=np.float64))
    if a.size == 0 or b.size == 0:
        raise EmptySample("ks_distance needs non-empty samples")
    pts = np.concatenate((a, b))
    fa = np.searchsorted(a, pts, side="right") / a.size
    fb = np.searchsorted(b, pts, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def wasserstein1(a, b) -> float:
    """W1 distance: order-statistics pairing for equal lengths, integral of
    |CDF difference| otherwise (the two agree where both apply)."""
    a = np.sort(np.asarray(a, dtype=np.float64))
    b = np.sort(np.asarray(b, dtype=np.float64))
    if a.size == 0 or b.size == 0:
        raise EmptySample("wasserstein1 needs non-empty samples")
    if a.size == b.size:
        return float(np.mean(np.abs(a - b)))
    grid = np.unique(np.concatenate((a, b)))
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    return float(np.abs(fa - fb)[:-1] @ np.diff(grid))


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LimitConfig:
    grid_size: int = 200
    n_paths: int = 20_000
    lag_truncation: int = 50
    mc_len: int = 1_000_000
    p_lo: float = 0.001
    p_hi: float = 0.999


@dataclass(frozen=True)
class ExperimentConfig:
    model: ContinuousModel | Ar1Model
    functional: str                       # "avar" | "compound" | "composition"
    avar_params: AvarParams | None
    comp_params: CompoundParams | None
    scheme: str
    n_ladder: tuple[int, ...]
    sampling_replications: int
    bootstrap_replications: int
    seed: int
    phi: WeightFunction = WeightFunction(1.0)
    gamma: float = 0.4                    # block exponent, blockwise only
    ks_tolerance: float = 0.10
    omega_mode: str = "fixed"             # "fixed" | "robustness"
    n_omegas: int = 10                    # robustness mode only
    limit: LimitConfig = LimitConfig()

    def __post_init__(self):
        if self.functional not in ("avar", "compound", "composition"):
            raise ValueError(f"unknown functional {self.functional!r}")
        if self.sampling_replications < 100 or self.bootstrap_replications < 100:
            raise ValueError("replication counts must be >= 100")
        if list(self.n_ladder) != sorted(set(self.n_ladder)):
            raise ValueError("n_ladder must be strictly increasing")
        if not 0.0 < self.gamma < 0.5:
            raise ValueError("gamma must lie in (0, 1/2)")

    def block_length(self, n: int) -> int:
        return max(1, min(n - 1, math.ceil(n ** self.gamma)))

    def true_model(self) -> ContinuousModel:
        if isinstance(self.model, Ar1Model):
            return self.model.stationary_model()
        return self.model


# ---------------------------------------------------------------------------
# data and statistic evaluation
# ---------------------------------------------------------------------------

def _draw_samples(cfg: ExperimentConfig, rows: int, n: int, seed_seq) -> np.ndarray:
    if isinstance(cfg.model, Ar1Model):
        return sample_ar1_batch(cfg.model, (rows, n), seed_seq)
    return cfg.model.sample(rows * n, np.random.default_rng(seed_seq)).reshape(rows, n)


def _true_value(cfg: ExperimentConfig):
    model = cfg.true_model()
    if cfg.functional == "avar":
        return avar(model, cfg.avar_params)
    if cfg.functional == "composition":
        count = cfg.comp_params.count
        if count.kind == "deterministic" and count.m == 1:
            return avar(model, cfg.avar_params)
        return avar(compound_cdf(model, cfg.comp_params).cdf, cfg.avar_params)
    return compound_cdf(model, cfg.comp_params)  # compound: a CompoundResult


def _functional_value(cfg: ExperimentConfig, F: StepFunction) -> float:
    if cfg.functional == "avar":
        return avar(F, cfg.avar_params)
    return composition(F, cfg.avar_params, cfg.comp_params)


def sampling_distribution(cfg: ExperimentConfig, n: int) -> np.ndarray:
    """R draws of sqrt(n) * (H(F_hat_n) - H(F))."""
    R = cfg.sampling_replications
    data = _draw_samples(cfg, R, n, seeds.child_sequence(cfg.seed, seeds.STREAM_SAMPLING, n))
    root_n = math.sqrt(n)
    if cfg.functional == "avar":
        xs = np.sort(data, axis=1)
        gvec = cfg.avar_params.g(np.arange(1, n) / n)
        vals = xs[:, -1] - np.diff(xs, axis=1) @ gvec
        return root_n * (vals - _true_value(cfg))
    if cfg.functional == "composition":
        true = _true_value(cfg)
        out = np.empty(R)
        for r in range(R):
            out[r] = composition(empirical_cdf(data[r]), cfg.avar_params, cfg.comp_params)
        return root_n * (out - true)
    # compound: scalar statistic = sqrt(n) * || C_p(F_hat_n) - C_p(F) ||_phi
    true_cdf = _true_value(cfg).cdf
    out = np.empty(R)
    for r in range(R):
        boot = compound_cdf(empirical_cdf(data[r]), cfg.comp_params).cdf
        out[r] = weighted_sup_norm(boot - true_cdf, cfg.phi)
    return root_n * out


def draw_omega(cfg: ExperimentConfig, n: int, omega_index: int = 0) -> np.ndarray:
    """The outer sample for the almost-sure-mode bootstrap at size n."""
    seq = seeds.child_sequence(cfg.seed, seeds.STREAM_OMEGA, n, omega_index)
    return _draw_samples(cfg, 1, n, seq)[0]


def _weight_matrix(cfg: ExperimentConfig, n: int, seed_seq) -> np.ndarray:
    B = cfg.bootstrap_replications
    rng = np.random.default_rng(seed_seq)
    if cfg.scheme == "efron":
        return rng.multinomial(n, np.full(n, 1.0 / n), size=B).astype(np.float64)
    if cfg.scheme == "bayesian":
        y = rng.exponential(1.0, size=(B, n))
        return y * (n / y.sum(axis=1))[:, None]
    if cfg.scheme == "wild":
        return rng.exponential(1.0, size=(B, n))
    ell = cfg.block_length(n)
    k = math.ceil(n / ell)
    last_len = n - (k - 1) * ell
    starts = rng.integers(0, n - ell + 1, size=(B, k))
    return _kernels.block_weights(starts, n, ell, last_len)


def bootstrap_distribution(cfg: ExperimentConfig, n: int, omega: np.ndarray,
                           omega_index: int = 0) -> np.ndarray:
    """B draws of sqrt(n) * (H(F*_n) - H(C_hat_n)) on the fixed sample omega.

    The bootstrap CDF and its centering share the atom set of omega, so for
    the tail-mean functional the statistic is evaluated as one exact
    difference integral; this stays finite for the wild scheme, whose
    individual CDFs have total mass != 1.
    """
    n = int(n)
    if omega.size != n:
        raise ValueError("omega length does not match n")
    W = _weight_matrix(cfg, n, seeds.child_sequence(cfg.seed, seeds.STREAM_BOOTSTRAP, n, omega_index))
    root_n = math.sqrt(n)
    if cfg.functional == "avar":
        return root_n * _avar_bootstrap_stats(cfg, n, omega, W)
    return root_n * _generic_bootstrap_stats(cfg, n, omega, W)


def _avar_bootstrap_stats(cfg, n, omega, W) -> np.ndarray:
    order = np.argsort(omega, kind="stable")
    xs = omega[order]
    cum_boot = np.cumsum(W[:, order], axis=1) / n
    stat_boot = _kernels.avar_rows(xs, cum_boot, cfg.avar_params.alpha, cfg.avar_params.kink)
    if cfg.scheme == "blockwise":
        wn = blockwise_expected_weights(n, cfg.block_length(n))
        cum_cent = np.cumsum(wn[order])[None, :] / n
        stat_cent = _kernels.avar_rows(xs, cum_cent, cfg.avar_params.alpha, cfg.avar_params.kink)
        return stat_boot - stat_cent[0]
    mean_w = W.mean(axis=1)
    base = np.arange(1, n + 1) / n
    cum_cent = mean_w[:, None] * base[None, :]
    stat_cent = _kernels.avar_rows(xs, cum_cent, cfg.avar_params.alpha, cfg.avar_params.kink)
    return stat_boot - stat_cent


def _generic_bootstrap_stats(cfg, n, omega, W) -> np.ndarray:
    B = W.shape[0]
    out = np.empty(B)
    if cfg.scheme == "blockwise":
        wn = blockwise_expected_weights(n, cfg.block_length(n))
    for b in range(B):
        if cfg.scheme == "blockwise":
            bw = BootstrapWeights("blockwise", W[b], float(W[b].mean()),
                                  block_length=cfg.block_length(n),
                                  block_count=math.ceil(n / cfg.block_length(n)))
            cent = StepFunction.from_atoms(omega, wn / n)
        else:
            bw = BootstrapWeights(cfg.scheme, W[b], float(W[b].mean()))
            cent = centering(omega, bw)
        star = bootstrap_cdf(omega, bw)
        if cfg.functional == "composition":
            c_star = compound_cdf(star, cfg.comp_params).cdf
            c_cent = compound_cdf(cent, cfg.comp_params).cdf
            out[b] = avar_difference(c_star, c_cent, cfg.avar_params)
        else:  # compound: norm statistic
            c_star = compound_cdf(star, cfg.comp_params).cdf
            c_cent = compound_cdf(cent, cfg.comp_params).cdf
            out[b] = weighted_sup_norm(c_star - c_cent, cfg.phi)
    return out


# ---------------------------------------------------------------------------
# limit law
# ---------------------------------------------------------------------------

def build_limit(cfg: ExperimentConfig) -> GaussianLimit:
    model = cfg.true_model()
    grid = quantile_grid(model, cfg.limit.grid_size, cfg.limit.p_lo, cfg.limit.p_hi)
    if isinstance(cfg.model, Ar1Model):
        return covariance_mixing(cfg.model, grid, cfg.limit.lag_truncation,
                                 cfg.limit.mc_len,
                                 seeds.child_sequence(cfg.seed, seeds.STREAM_COV_PATH))
    return covariance_iid(cfg.model, grid)


def limit_distribution(cfg: ExperimentConfig, gl: GaussianLimit) -> np.ndarray:
    seq = seeds.child_sequence(cfg.seed, seeds.STREAM_LIMIT_PATHS)
    model = cfg.true_model()
    if cfg.functional == "avar":
        dot = make_avar_dot(model, cfg.avar_params)
        return limit_law_samples(gl, dot, cfg.limit.n_paths, seq)
    if cfg.functional == "composition":
        count = cfg.comp_params.count
        if count.kind == "deterministic" and count.m == 1:
            dot = make_avar_dot(model, cfg.avar_params)
        else:
            dot = make_composition_dot(model, cfg.avar_params, cfg.comp_params)
        return limit_law_samples(gl, dot, cfg.limit.n_paths, seq)
    # compound: || dC(B) ||_phi per path
    H = h_measure(model, cfg.comp_params)

    def path_norm(v: StepFunction) -> float:
        return weighted_sup_norm(convolve_step_with_measure(v, H), cfg.phi)

    return limit_law_samples_map(gl, path_norm, cfg.limit.n_paths, seq)


# ---------------------------------------------------------------------------
# the report
# ---------------------------------------------------------------------------

REPORT_COLUMNS = (
    "n", "omega_index", "ks_boot_sampling", "ks_sampling_limit", "ks_boot_limit",
    "w1_boot_sampling", "w1_sampling_limit", "w1_boot_limit",
    "norm_empirical_vs_true", "norm_centering_vs_true",
)


@dataclass
class ReportRow:
    n: int
    omega_index: int
    ks_boot_sampling: float
    ks_sampling_limit: float
    ks_boot_limit: float
    w1_boot_sampling: float
    w1_sampling_limit: float
    w1_boot_limit: float
    norm_empirical_vs_true: float
    norm_centering_vs_true: float
    runtime_s: float

    def csv_cells(self) -> list[str]:
        vals = [self.n, self.omega_index, self.ks_boot_sampling, self.ks_sampling_limit,
                self.ks_boot_limit, self.w1_boot_sampling, self.w1_sampling_limit,
                self.w1_boot_limit, self.norm_empirical_vs_true, self.norm_centering_vs_true]
        return [_fmt(v) for v in vals]


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if math.isnan(v):
        return "nan"
    return repr(v)


@dataclass
class ConsistencyReport:
    rows: list[ReportRow] = field(default_factory=list)
    verdict: bool = False
    ks_tolerance: float = 0.10
    runtimes: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        """Scientific columns only; runtimes live in the JSON/manifest so the
        CSV is byte-identical across reruns of the same config and seed."""
        lines = [",".join(REPORT_COLUMNS)]
        for r in self.rows:
            lines.append(",".join(r.csv_cells()))
        return "\n".join(lines) + "\n"

    def to_jsonable(self) -> dict:
        return {
            "verdict": "PASS" if self.verdict else "FAIL",
            "ks_tolerance": self.ks_tolerance,
            "rows": [dict(zip(REPORT_COLUMNS, r.csv_cells())) | {"runtime_s": r.runtime_s}
                     for r in self.rows],
            "runtimes": self.runtimes,
        }


def _norm_diagnostics(cfg: ExperimentConfig, omega: np.ndarray, n: int):
    model = cfg.true_model()
    emp = empirical_cdf(omega)
    norm_emp = weighted_norm_vs_curve(emp, model.cdf, cfg.phi)
    if cfg.scheme == "blockwise":
        wn = blockwise_expected_weights(n, cfg.block_length(n))
        cent = StepFunction.from_atoms(omega, wn / n)
        norm_cent = weighted_norm_vs_curve(cent, model.cdf, cfg.phi)
    elif cfg.scheme == "wild":
        norm_cent = math.inf if cfg.phi.unbounded else norm_emp
    else:
        norm_cent = norm_emp  # efron/bayesian: C_hat_n = F_hat_n
    return norm_emp, norm_cent


def consistency_report(cfg: ExperimentConfig) -> ConsistencyReport:
    """Full experiment over the sample-size ladder, one row per (n, omega)."""
    t0 = time.perf_counter()
    gl = build_limit(cfg)
    limit_vec = limit_distribution(cfg, gl)
    t_limit = time.perf_counter() - t0
    report = ConsistencyReport(ks_tolerance=cfg.ks_tolerance)
    report.runtimes["limit_s"] = t_limit
    n_omegas = 1 if cfg.omega_mode == "fixed" else cfg.n_omegas
    ladder_ks: dict[int, list[float]] = {}
    for n in cfg.n_ladder:
        t_n = time.perf_counter()
        sampling = sampling_distribution(cfg, n)
        for widx in range(n_omegas):
            omega = draw_omega(cfg, n, widx)
            boot = bootstrap_distribution(cfg, n, omega, widx)
            norm_emp, norm_cent = _norm_diagnostics(cfg, omega, n)
            row = ReportRow(
                n=n, omega_index=widx,
                ks_boot_sampling=ks_distance(boot, sampling),
                ks_sampling_limit=ks_distance(sampling, limit_vec),
                ks_boot_limit=ks_distance(boot, limit_vec),
                w1_boot_sampling=wasserstein1(boot, sampling),
                w1_sampling_limit=wasserstein1(sampling, limit_vec),
                w1_boot_limit=wasserstein1(boot, limit_vec),
                norm_empirical_vs_true=norm_emp,
                norm_centering_vs_true=norm_cent,
                runtime_s=time.perf_counter() - t_n,
            )
            report.rows.append(row)
            ladder_ks.setdefault(widx, []).append(row.ks_boot_sampling)
        report.runtimes[f"n_{n}_s"] = time.perf_counter() - t_n
    # verdict per omega: non-increasing KS(bootstrap, sampling) ending below
    # tolerance; overall verdict is the median omega in robustness mode
    per_omega = []
    for widx, series in ladder_ks.items():
        mono = all(series[i + 1] <= series[i] + 1e-12 for i in range(len(series) - 1))
        per_omega.append(mono and series[-1] <= cfg.ks_tolerance)
    if cfg.omega_mode == "fixed":
        report.verdict = bool(per_omega[0])
    else:
        report.verdict = sum(per_omega) * 2 >= len(per_omega)
    report.runtimes["total_s"] = time.perf_counter() - t0
    return report


# ---------------------------------------------------------------------------
# centering-norm ladder (the blockwise centering convergence check)
# ---------------------------------------------------------------------------

@dataclass
class CenteringRow:
    n: int
    norm: float
    retry_n: int | None = None
    retry_norm: float | None = None


def centering_norm_ladder(cfg: ExperimentConfig, allow_retry: bool = True) -> tuple[list[CenteringRow], bool]:
    """||C_hat_n - F||_phi along the ladder for the configured scheme.

    The decrease is a stochastic claim: when a rung fails to decrease, one
    retry at doubled n is drawn and reported alongside (both values kept);
    the verdict uses the retry when present.
    """
    model = cfg.true_model()
    rows: list[CenteringRow] = []
    effective: list[float] = []
    for n in cfg.n_ladder:
        omega = draw_omega(cfg, n)
        if cfg.scheme == "blockwise":
            wn = blockwise_expected_weights(n, cfg.block_length(n))
            cent = StepFunction.from_atoms(omega, wn / n)
        else:
            cent = empirical_cdf(omega)
        norm = weighted_norm_vs_curve(cent, model.cdf, cfg.phi)
        row = CenteringRow(n, norm)
        if effective and norm > effective[-1] and allow_retry:
            n2 = 2 * n
            omega2 = draw_omega(cfg, n2)
            if cfg.scheme == "blockwise":
                wn2 = blockwise_expected_weights(n2, cfg.block_length(n2))
                cent2 = StepFunction.from_atoms(omega2, wn2 / n2)
            else:
                cent2 = empirical_cdf(omega2)
            row.retry_n = n2
            row.retry_norm = weighted_norm_vs_curve(cent2, model.cdf, cfg.phi)
        rows.append(row)
        effective.append(row.retry_norm if row.retry_norm is not None else norm)
    decreasing = all(effective[i + 1] <= effective[i] for i in range(len(effective) - 1))
    return rows, decreasing
