"""JSON experiment configuration: schema validation and object builders.

Configs are plain JSON with a ``schema_version`` and a ``task`` key naming
the subcommand they drive. Validation returns (errors, warnings) with every
message naming the offending key; :func:`require_valid` raises
:class:`ConfigInvalid` on the first error list. Hashing canonicalizes the
JSON (sorted keys, compact separators) so the hash is stable under key
reordering.
"""
from __future__ import annotations

import hashlib
import json
from importlib import resources

from .errors import ConfigInvalid
from .functionals import AvarParams, CompoundParams
from .harness import ExperimentConfig, LimitConfig
from .models import Ar1Model, ContinuousModel, CountModel
from .stepfun import WeightFunction

SCHEMA_VERSION = 1
TASKS = ("consistency", "derivative-check", "weights-audit", "limit-sample")

_MODEL_PARAMS = {
    "normal": ("mu", "sigma"),
    "exponential": ("rate",),
    "uniform": ("a", "b"),
    "pareto": ("scale", "tail_index"),
    "ar1": ("rho", "innovation_sd"),
}
_COUNT_PARAMS = {
    "poisson": ("lam",),
    "geometric": ("q",),
    "binomial": ("m", "q"),
    "deterministic": ("m",),
}


def load_config(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def bundled_config_path(name: str):
    """Path of a config shipped with the package (e.g. avar_uniform_efron.json)."""
    return resources.files("qhdboot") / "configs" / name


def canonical_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def _check_number(cfg, key, errors, lo=None, hi=None, integer=False,
                  lo_strict=False, hi_strict=False, required=True):
    if key not in cfg:
        if required:
            errors.append(f"missing key {key!r}")
        return None
    v = cfg[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        errors.append(f"key {key!r} must be a number")
        return None
    if integer and int(v) != v:
        errors.append(f"key {key!r} must be an integer")
        return None
    if lo is not None and (v <= lo if lo_strict else v < lo):
        errors.append(f"key {key!r} out of range: {v}")
        return None
    if hi is not None and (v >= hi if hi_strict else v > hi):
        errors.append(f"key {key!r} out of range: {v}")
        return None
    return v


def _validate_model(cfg, errors):
    model = cfg.get("model")
    if not isinstance(model, dict):
        errors.append("missing or non-object key 'model'")
        return None
    kind = model.get("kind")
    if kind not in _MODEL_PARAMS:
        errors.append(f"key 'model.kind' must be one of {sorted(_MODEL_PARAMS)}")
        return None
    for p in _MODEL_PARAMS[kind]:
        if p in model and not isinstance(model[p], (int, float)):
            errors.append(f"key 'model.{p}' must be a number")
    return kind


def _validate_count(count, errors, prefix="functional.count"):
    if not isinstance(count, dict):
        errors.append(f"missing or non-object key {prefix!r}")
        return None
    kind = count.get("kind")
    if kind not in _COUNT_PARAMS:
        errors.append(f"key '{prefix}.kind' must be one of {sorted(_COUNT_PARAMS)}")
        return None
    return kind


def _validate_functional(cfg, errors, warnings_):
    fn = cfg.get("functional")
    if not isinstance(fn, dict):
        errors.append("missing or non-object key 'functional'")
        return None
    kind = fn.get("kind")
    if kind not in ("avar", "compound", "composition"):
        errors.append("key 'functional.kind' must be avar, compound or composition")
        return None
    if kind in ("avar", "composition"):
        alpha = _check_number(fn, "alpha", errors, lo=0, hi=1, lo_strict=True, hi_strict=True)
        if alpha is not None and "kink" in fn:
            kink = _check_number(fn, "kink", errors, lo=0, hi=1, lo_strict=True, hi_strict=True)
            if kink is not None and kink != alpha:
                warnings_.append("key 'functional.kink' differs from alpha: the tail-mean "
                                 "functional itself is only defined for kink = alpha")
    if kind in ("compound", "composition"):
        _validate_count(fn.get("count"), errors)
        lattice = fn.get("lattice")
        if not isinstance(lattice, dict):
            errors.append("missing or non-object key 'functional.lattice'")
        else:
            _check_number(lattice, "step", errors, lo=0, lo_strict=True)
            _check_number(lattice, "lo", errors)
            _check_number(lattice, "hi", errors)
            if isinstance(lattice.get("lo"), (int, float)) and isinstance(lattice.get("hi"), (int, float)) \
                    and not lattice["lo"] < lattice["hi"]:
                errors.append("key 'functional.lattice.lo' must be < 'functional.lattice.hi'")
    return kind


def _validate_consistency(cfg, errors, warnings_):
    model_kind = _validate_model(cfg, errors)
    fn_kind = _validate_functional(cfg, errors, warnings_)
    scheme = cfg.get("scheme")
    if scheme not in ("efron", "bayesian", "wild", "blockwise"):
        errors.append("key 'scheme' must be efron, bayesian, wild or blockwise")
        scheme = None
    ladder = cfg.get("n_ladder")
    if not (isinstance(ladder, list) and ladder and all(isinstance(n, int) and n >= 2 for n in ladder)):
        errors.append("key 'n_ladder' must be a non-empty list of integers >= 2")
    elif ladder != sorted(set(ladder)):
        errors.append("key 'n_ladder' must be strictly increasing")
    _check_number(cfg, "sampling_replications", errors, lo=100, integer=True)
    _check_number(cfg, "bootstrap_replications", errors, lo=100, integer=True)
    _check_number(cfg, "phi_lambda", errors, lo=0, required=False)
    _check_number(cfg, "ks_tolerance", errors, lo=0, hi=1, lo_strict=True, required=False)
    if scheme == "blockwise":
        _check_number(cfg, "gamma", errors, lo=0, hi=0.5, lo_strict=True, hi_strict=True)
    elif "gamma" in cfg:
        _check_number(cfg, "gamma", errors, lo=0, hi=0.5, lo_strict=True, hi_strict=True)
    mode = cfg.get("omega_mode", "fixed")
    if mode not in ("fixed", "robustness"):
        errors.append("key 'omega_mode' must be 'fixed' or 'robustness'")
    if isinstance(cfg.get("limit"), dict):
        lim = cfg["limit"]
        _check_number(lim, "grid_size", errors, lo=2, integer=True, required=False)
        _check_number(lim, "n_paths", errors, lo=100, integer=True, required=False)
        _check_number(lim, "lag_truncation", errors, lo=1, integer=True, required=False)
        _check_number(lim, "mc_len", errors, lo=1000, integer=True, required=False)
    # cross-field rules
    override = bool(cfg.get("override_scheme_model_mismatch", False))
    if scheme == "blockwise" and model_kind is not None and model_kind != "ar1" and not override:
        errors.append("key 'scheme': blockwise requires an ar1 model "
                      "(or 'override_scheme_model_mismatch': true)")
    if scheme in ("efron", "bayesian", "wild") and model_kind == "ar1" and not override:
        warnings_.append("key 'scheme': exchangeable schemes assume i.i.d. data "
                         "but the model is ar1")
    if scheme == "wild" and fn_kind in ("compound", "composition"):
        errors.append("key 'scheme': wild weights have mean != 1, outside the "
                      "compound functional's domain; use efron, bayesian or blockwise")


def _validate_derivative_check(cfg, errors, warnings_):
    _check_number(cfg, "alpha", errors, lo=0, hi=1, lo_strict=True, hi_strict=True)
    _check_number(cfg, "directions", errors, lo=1, integer=True)
    eps = cfg.get("epsilons")
    if not (isinstance(eps, list) and eps and all(isinstance(e, (int, float)) and 0 < e < 1 for e in eps)):
        errors.append("key 'epsilons' must be a non-empty list of scales in (0, 1)")
    elif sorted(eps, reverse=True) != eps:
        errors.append("key 'epsilons' must be decreasing")
    _check_number(cfg, "fd_tolerance", errors, lo=0, lo_strict=True, required=False)
    _check_number(cfg, "base_resolution", errors, lo=100, integer=True, required=False)


def _validate_weights_audit(cfg, errors, warnings_):
    n = _check_number(cfg, "n", errors, lo=2, integer=True)
    ell = _check_number(cfg, "block_length", errors, lo=1, integer=True)
    if n is not None and ell is not None and not ell < n:
        errors.append("key 'block_length' must be < n")
    _check_number(cfg, "mc_draws", errors, lo=100, integer=True, required=False)
    schemes = cfg.get("schemes", ["efron", "bayesian", "wild", "blockwise"])
    if not (isinstance(schemes, list) and schemes
            and all(s in ("efron", "bayesian", "wild", "blockwise") for s in schemes)):
        errors.append("key 'schemes' must list bootstrap schemes")


def _validate_limit_sample(cfg, errors, warnings_):
    _validate_model(cfg, errors)
    _validate_functional(cfg, errors, warnings_)
    _check_number(cfg, "n_paths", errors, lo=100, integer=True)
    if isinstance(cfg.get("limit"), dict):
        lim = cfg["limit"]
        _check_number(lim, "grid_size", errors, lo=2, integer=True, required=False)
        _check_number(lim, "lag_truncation", errors, lo=1, integer=True, required=False)
        _check_number(lim, "mc_len", errors, lo=1000, integer=True, required=False)


_TASK_VALIDATORS = {
    "consistency": _validate_consistency,
    "derivative-check": _validate_derivative_check,
    "weights-audit": _validate_weights_audit,
    "limit-sample": _validate_limit_sample,
}


def validate_config(cfg: dict) -> tuple[list[str], list[str]]:
    """Schema plus cross-field validation; returns (errors, warnings)."""
    errors: list[str] = []
    warnings_: list[str] = []
    if not isinstance(cfg, dict):
        return (["config must be a JSON object"], [])
    if cfg.get("schema_version") != SCHEMA_VERSION:
        errors.append(f"key 'schema_version' must be {SCHEMA_VERSION}")
    task = cfg.get("task")
    if task not in TASKS:
        errors.append(f"key 'task' must be one of {list(TASKS)}")
        return (errors, warnings_)
    _check_number(cfg, "seed", errors, lo=0, integer=True)
    _TASK_VALIDATORS[task](cfg, errors, warnings_)
    return (errors, warnings_)


def require_valid(cfg: dict) -> list[str]:
    """Raise ConfigInvalid on errors; return the warnings."""
    errors, warnings_ = validate_config(cfg)
    if errors:
        raise ConfigInvalid("; ".join(errors))
    return warnings_


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------

def build_model(spec: dict):
    kind = spec["kind"]
    if kind == "ar1":
        return Ar1Model(rho=spec["rho"], innovation_sd=spec.get("innovation_sd", 1.0))
    defaults = {"normal": dict(mu=0.0, sigma=1.0), "exponential": dict(rate=1.0),
                "uniform": dict(a=0.0, b=1.0), "pareto": dict(scale=1.0, tail_index=2.0)}
    params = defaults[kind] | {k: spec[k] for k in _MODEL_PARAMS[kind] if k in spec}
    return ContinuousModel(kind, **params)


def build_count(spec: dict) -> CountModel:
    kind = spec["kind"]
    kwargs = {k: spec[k] for k in _COUNT_PARAMS[kind] if k in spec}
    return CountModel(kind, **kwargs)


def build_functional(spec: dict):
    """(kind, AvarParams | None, CompoundParams | None)."""
    kind = spec["kind"]
    avar_params = None
    comp_params = None
    if kind in ("avar", "composition"):
        avar_params = AvarParams(alpha=spec["alpha"], kink=spec.get("kink"))
    if kind in ("compound", "composition"):
        lattice = spec["lattice"]
        comp_params = CompoundParams(
            count=build_count(spec["count"]),
            step=lattice["step"], lo=lattice["lo"], hi=lattice["hi"],
            truncation=spec.get("truncation"),
            tail_eps=spec.get("tail_eps", 1e-10),
        )
    return kind, avar_params, comp_params


def build_experiment(cfg: dict, seed_override: int | None = None) -> ExperimentConfig:
    fn_kind, avar_params, comp_params = build_functional(cfg["functional"])
    limit_spec = cfg.get("limit", {})
    return ExperimentConfig(
        model=build_model(cfg["model"]),
        functional=fn_kind,
        avar_params=avar_params,
        comp_params=comp_params,
        scheme=cfg["scheme"],
        n_ladder=tuple(cfg["n_ladder"]),
        sampling_replications=int(cfg["sampling_replications"]),
        bootstrap_replications=int(cfg["bootstrap_replications"]),
        seed=int(seed_override if seed_override is not None else cfg["seed"]),
        phi=WeightFunction(float(cfg.get("phi_lambda", 1.0))),
        gamma=float(cfg.get("gamma", 0.4)),
        ks_tolerance=float(cfg.get("ks_tolerance", 0.10)),
        omega_mode=cfg.get("omega_mode", "fixed"),
        n_omegas=int(cfg.get("n_omegas", 10)),
        limit=LimitConfig(
            grid_size=int(limit_spec.get("grid_size", 200)),
            n_paths=int(limit_spec.get("n_paths", 20_000)),
            lag_truncation=int(limit_spec.get("lag_truncation", 50)),
            mc_len=int(limit_spec.get("mc_len", 1_000_000)),
        ),
    )
