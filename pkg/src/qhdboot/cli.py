"""Command-line interface: configuration, orchestration, reproducible output.

Subcommands map onto the experiment modules:

- ``consistency``      the Monte Carlo bootstrap-consistency report (harness)
- ``derivative-check`` finite-difference derivative checks plus the
                       kink-convention resolution (derivatives)
- ``weights-audit``    bootstrap weight draws and closed-form expectations
                       (resampling)
- ``limit-sample``     samples of the limit law dH(B_F) (limits)
- ``validate``         schema and cross-field config validation, no side
                       effects

Every run writes the requested report files plus a ``manifest.json`` carrying
the canonical config hash, the seed actually used, the package version,
per-stage timings and the emitted file list. Exit status: 0 when all
scientific verdicts pass, 2 when a verdict fails, 1 on configuration or I/O
errors.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, _kernels, seeds
from .config import (build_experiment, build_functional, build_model,
                     canonical_hash, load_config, require_valid, validate_config)
from .derivatives import (QhdCheckConfig, kink_resolution, make_avar_dot,
                          model_step_approx, qhd_convergence_check)
from .errors import ConfigInvalid, IoError, QhdbootError
from .functionals import AvarParams, avar, avar_derivative
from .harness import consistency_report
from .limits import covariance_iid, covariance_mixing, limit_law_samples, quantile_grid
from .models import Ar1Model
from .resampling import (blockwise_expected_weights, blockwise_weights,
                         blockwise_weights_batch, exchangeable_weights)
from .stepfun import StepFunction


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        if math.isnan(f):
            return "nan"
        return f
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj]
    return obj


def _dump_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


class _Run:
    """Collects outputs and timings for the manifest."""

    def __init__(self, cfg: dict, seed: int, out_dir: Path):
        self.cfg = cfg
        self.seed = seed
        self.out_dir = out_dir
        self.outputs: list[str] = []
        self.timings: dict[str, float] = {}
        self._t0 = time.perf_counter()

    def write_text(self, name: str, text: str) -> None:
        path = self.out_dir / name
        path.write_text(text, encoding="utf-8")
        self.outputs.append(name)

    def write_json(self, name: str, payload: dict) -> None:
        _dump_json(self.out_dir / name, payload)
        self.outputs.append(name)

    def stamp(self, stage: str) -> None:
        self.timings[stage] = time.perf_counter() - self._t0

    def finish(self) -> None:
        self.timings["total_s"] = time.perf_counter() - self._t0
        manifest = {
            "config_hash": canonical_hash(self.cfg),
            "seed": self.seed,
            "artifact_version": __version__,
            "timings_s": self.timings,
            "outputs": sorted(self.outputs),
        }
        _dump_json(self.out_dir / "manifest.json", manifest)
        missing = [f for f in self.outputs if not (self.out_dir / f).exists()]
        if missing:  # pragma: no cover - write_text would have raised first
            raise IoError(f"output files missing after run: {missing}")


# ---------------------------------------------------------------------------
# subcommand bodies (return process exit status)
# ---------------------------------------------------------------------------

def _run_consistency(cfg: dict, run: _Run, fmt: str) -> int:
    exp = build_experiment(cfg, seed_override=run.seed)
    report = consistency_report(exp)
    run.stamp("experiment_s")
    if fmt in ("csv", "both"):
        run.write_text("report.csv", report.to_csv())
    if fmt in ("json", "both"):
        payload = report.to_jsonable()
        payload["config"] = cfg
        payload["seed"] = run.seed
        run.write_json("report.json", payload)
    return 0 if report.verdict else 2


def _fd_direction_table(base: StepFunction, direction: StepFunction,
                        params: AvarParams, epsilons, tol: float):
    """Finite-difference vs closed-form derivative for one direction."""
    dot = avar_derivative(base, params, direction)
    cfg = QhdCheckConfig(
        base_sequence=lambda i: base,
        direction=direction,
        scales=lambda i: float(epsilons[i]),
        n_ladder=list(range(len(epsilons))),
        tol=tol * (1.0 + abs(dot)),
    )
    table = qhd_convergence_check(lambda G: avar(G, params), dot, cfg)
    return dot, table


def _random_direction(base: StepFunction, rng: np.random.Generator) -> StepFunction:
    """v = G - base for a random step CDF G: base + eps*v is the mixture
    (1-eps)*base + eps*G, a CDF for every eps in (0, 1]."""
    n_atoms = int(rng.integers(2, 9))
    atoms = np.sort(rng.uniform(0.0, 1.0, size=n_atoms))
    masses = rng.dirichlet(np.ones(n_atoms))
    g = StepFunction.from_atoms(atoms, masses)
    return g - base


def _run_derivative_check(cfg: dict, run: _Run, fmt: str) -> int:
    alpha = float(cfg["alpha"])
    tol = float(cfg.get("fd_tolerance", 5e-3))
    epsilons = [float(e) for e in cfg["epsilons"]]
    resolution = int(cfg.get("base_resolution", 100_001))
    params = AvarParams(alpha)
    from .models import ContinuousModel

    base = model_step_approx(ContinuousModel("uniform", a=0.0, b=1.0), resolution)
    rng = seeds.child_rng(run.seed, seeds.STREAM_DERIVATIVE)
    fd_rows = []
    fd_pass = True
    for d in range(int(cfg["directions"])):
        v = _random_direction(base, rng)
        dot, table = _fd_direction_table(base, v, params, epsilons, tol)
        errs = table.errors()
        monotone = all(errs[i + 1] <= errs[i] + 1e-12 for i in range(len(errs) - 1))
        ok = monotone and errs[-1] <= tol * (1.0 + abs(dot))
        fd_pass &= ok
        for row, eps in zip(table.rows, epsilons):
            fd_rows.append((d, eps, row.error, int(row.feasible)))
    run.stamp("fd_s")

    resolution_result = kink_resolution(alpha=alpha, tol=float(cfg.get("kink_tolerance", 5e-3)))
    run.stamp("kink_s")

    if fmt in ("csv", "both"):
        lines = ["direction,epsilon,error,feasible"]
        lines += [f"{d},{e!r},{err!r},{feas}" for d, e, err, feas in fd_rows]
        run.write_text("fd_check.csv", "\n".join(lines) + "\n")
        run.write_text("kink_alpha.csv", resolution_result.table_alpha.to_csv())
        run.write_text("kink_one_minus_alpha.csv",
                       resolution_result.table_one_minus_alpha.to_csv())
    winner_ok = resolution_result.winner is not None
    if fmt in ("json", "both"):
        run.write_json("report.json", {
            "config": cfg,
            "seed": run.seed,
            "fd_verdict": "PASS" if fd_pass else "FAIL",
            "kink_winner": resolution_result.winner,
            "kink_verdict": "PASS" if winner_ok else "FAIL",
            "kink_errors_alpha": resolution_result.table_alpha.errors(),
            "kink_errors_one_minus_alpha": resolution_result.table_one_minus_alpha.errors(),
        })
    return 0 if (fd_pass and winner_ok) else 2


_SCHEME_STREAM = {"efron": 0, "bayesian": 1, "wild": 2, "blockwise": 3}


def _run_weights_audit(cfg: dict, run: _Run, fmt: str) -> int:
    n = int(cfg["n"])
    ell = int(cfg["block_length"])
    mc = int(cfg.get("mc_draws", 20_000))
    schemes = cfg.get("schemes", ["efron", "bayesian", "wild", "blockwise"])
    checks = {}
    ok = True
    for scheme in schemes:
        sid = _SCHEME_STREAM[scheme]
        seq = seeds.child_sequence(run.seed, seeds.STREAM_WEIGHTS_AUDIT, sid)
        if scheme == "blockwise":
            w = blockwise_weights(n, ell, seq)
            expected = blockwise_expected_weights(n, ell)
            draws = blockwise_weights_batch(
                n, ell, mc, seeds.child_sequence(run.seed, seeds.STREAM_WEIGHTS_AUDIT, sid, 1))
            se = draws.std(axis=0, ddof=1) / math.sqrt(mc)
            z = np.abs(draws.mean(axis=0) - expected) / np.where(se > 0, se, 1.0)
            checks[scheme] = {
                "sum_weights": float(w.weights.sum()),
                "sum_expected": float(expected.sum()),
                "max_mc_z": float(z.max()),
                "ok": bool(abs(w.weights.sum() - n) < 1e-9
                           and abs(expected.sum() - n) < 1e-9 and z.max() < 5.0),
            }
            if fmt in ("csv", "both"):
                run.write_text(f"weights_{scheme}.csv", w.to_csv(expected))
        else:
            w = exchangeable_weights(scheme, n, seq)
            entry = {"sum_weights": float(w.weights.sum()), "mean_weight": w.mean_weight}
            if scheme == "efron":
                entry["ok"] = bool(np.all(w.weights == np.round(w.weights))
                                   and abs(w.weights.sum() - n) < 1e-9)
            elif scheme == "bayesian":
                entry["ok"] = bool(abs(w.weights.sum() - n) < 1e-9)
            else:
                entry["ok"] = bool(np.all(w.weights >= 0))
            checks[scheme] = entry
            if fmt in ("csv", "both"):
                run.write_text(f"weights_{scheme}.csv", w.to_csv())
        ok &= checks[scheme]["ok"]
    run.stamp("audit_s")
    if fmt in ("json", "both"):
        run.write_json("report.json", {"config": cfg, "seed": run.seed,
                                       "checks": checks,
                                       "verdict": "PASS" if ok else "FAIL"})
    return 0 if ok else 2


def _run_limit_sample(cfg: dict, run: _Run, fmt: str) -> int:
    model = build_model(cfg["model"])
    fn_kind, avar_params, comp_params = build_functional(cfg["functional"])
    lim = cfg.get("limit", {})
    grid_size = int(lim.get("grid_size", 200))
    if isinstance(model, Ar1Model):
        grid = quantile_grid(model.stationary_model(), grid_size)
        gl = covariance_mixing(model, grid, int(lim.get("lag_truncation", 50)),
                               int(lim.get("mc_len", 1_000_000)),
                               seeds.child_sequence(run.seed, seeds.STREAM_COV_PATH))
        base_model = model.stationary_model()
    else:
        grid = quantile_grid(model, grid_size)
        gl = covariance_iid(model, grid)
        base_model = model
    if fn_kind == "avar":
        dot = make_avar_dot(base_model, avar_params)
    elif fn_kind == "composition":
        from .derivatives import make_composition_dot

        dot = make_composition_dot(base_model, avar_params, comp_params)
    else:
        raise ConfigInvalid("key 'functional.kind': limit-sample emits scalar "
                            "laws; use avar or composition")
    samples = limit_law_samples(gl, dot, int(cfg["n_paths"]),
                                seeds.child_sequence(run.seed, seeds.STREAM_LIMIT_PATHS))
    run.stamp("sampling_s")
    if fmt in ("csv", "both"):
        run.write_text("limit_samples.csv",
                       "sample\n" + "\n".join(repr(float(s)) for s in samples) + "\n")
    if fmt in ("json", "both"):
        run.write_json("report.json", {
            "config": cfg, "seed": run.seed,
            "n_paths": int(cfg["n_paths"]),
            "mean": float(samples.mean()),
            "sd": float(samples.std(ddof=1)),
            "covariance_regularization": gl.regularization,
            "covariance_min_eig_raw": gl.min_eig_raw,
        })
    return 0


_RUNNERS = {
    "consistency": _run_consistency,
    "derivative-check": _run_derivative_check,
    "weights-audit": _run_weights_audit,
    "limit-sample": _run_limit_sample,
}


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qhdboot",
        description="Bootstrap consistency experiments for tail-mean and "
                    "compound functionals")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in (*_RUNNERS, "validate"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to the JSON config")
        if name != "validate":
            p.add_argument("--out", required=True, help="output directory")
            p.add_argument("--seed", type=int, default=None,
                           help="override the config seed")
            p.add_argument("--threads", type=int, default=None,
                           help="thread budget (QHD_BOOT_THREADS as fallback)")
            p.add_argument("--format", choices=("csv", "json", "both"),
                           default="both")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 1

    if args.command == "validate":
        errors, warnings_ = validate_config(cfg)
        for w in warnings_:
            print(f"warning: {w}")
        for e in errors:
            print(f"error: {e}", file=sys.stderr)
        if not errors and not warnings_:
            print("ok: no diagnostics")
        return 1 if errors else 0

    try:
        warnings_ = require_valid(cfg)
        if cfg.get("task") != args.command:
            raise ConfigInvalid(
                f"key 'task' is {cfg.get('task')!r} but the subcommand is {args.command!r}")
        for w in warnings_:
            print(f"warning: {w}", file=sys.stderr)
        threads = args.threads
        if threads is None and os.environ.get("QHD_BOOT_THREADS"):
            threads = int(os.environ["QHD_BOOT_THREADS"])
        if threads:
            _kernels.set_thread_budget(threads)
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        seed = int(args.seed if args.seed is not None else cfg["seed"])
        run = _Run(cfg, seed, out_dir)
        status = _RUNNERS[args.command](cfg, run, args.format)
        run.finish()
        return status
    except ConfigInvalid as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return 1
    except (OSError, IoError) as exc:
        print(f"error: i/o failure: {exc}", file=sys.stderr)
        return 1
    except QhdbootError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
