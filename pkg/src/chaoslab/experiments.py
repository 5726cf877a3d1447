"""Experiment orchestration: configs, studies, and report emission.

A study is described by a flat YAML config (see DEFAULTS for the schema
and `docs` in README for field meanings); CLI flags override seed, worker
count, and output directory. All randomness flows from the single master
seed through named RngPlan children, so reruns with the same config are
byte-identical regardless of the worker pool size.

Every CSV starts with a metadata header (config hash over the scientific
fields, master seed, artifact version). Execution-only fields (workers,
out) are excluded from the hash and echoed in run_meta.json instead, so
worker-count changes cannot perturb the deliverable files.
"""
from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .concentration import (
    check_bounded_difference,
    check_carlen_kree,
    check_condition_c,
    check_exp_martingale_moment,
    check_subgaussian_moments,
    mean_function,
    minimize_theorem_constant,
    rademacher_sampler,
    tanh_integrand,
    uniform_sampler,
    unit_integrand,
    windowed_deviation_integrals,
)
from .engine import BlockEmpiricalMeasure, simulate_paths
from .girsanov import entropy_quadratic
from .grids import TimeGrid
from .kernels import TanhDifferenceKernel
from .metrics import fit_rate, tv_bound_pinsker, tv_bound_theorem, tv_histogram
from .models import (
    beta_of,
    constant_drift_model,
    kinetic_tanh_model,
    make_bounded_kernel_spec,
    make_control_spec,
    make_kinetic_spec,
    normal_init,
    tanh_model,
)
from .parallel import resolve_workers
from .reference import build_reference_law, load_reference_law, save_reference_law
from .rng import RngPlan
from .storage import write_report

__all__ = [
    "ExperimentConfig",
    "ConfigurationError",
    "StudyResult",
    "load_config",
    "run_study",
    "run_rate_study",
    "run_condition_c_study",
    "run_inequalities",
    "run_tv_direct",
    "run_prop31",
    "run_reference_law",
    "STUDIES",
]

log = logging.getLogger("chaoslab")


class ConfigurationError(ValueError):
    pass


class StudyFailure(RuntimeError):
    pass


DEFAULTS = dict(
    study="rate",
    model="tanh",          # tanh | kinetic | constant | zero
    kappa=1.0,             # interaction strength
    sigma=1.0,             # diffusion scalar
    drift_value=(1.0,),    # constant-kernel model only
    init_scale=1.0,
    t_end=1.0,
    n_steps=200,
    n_list=(32, 64, 128, 256, 512),
    n_ref=8192,
    n_picard=3,
    picard_tol=None,
    n_replications=200,
    t0=0.2,
    delta=0.1,
    orders=(1, 2, 3),
    ck_orders=(2, 4, 8),
    moment_power=2.0,      # exponent of the windowed exponential moment
    tail_grid=(0.1, 0.2, 0.3),
    sample_size=100,
    bins=64,
    bins2d=16,
    theorem_c=None,
    reference_path=None,
    seed=20260810,
    workers=1,
    out="out",
)

_EXECUTION_FIELDS = ("workers", "out")


@dataclass(frozen=True)
class ExperimentConfig:
    study: str
    model: str
    kappa: float
    sigma: float
    drift_value: tuple
    init_scale: float
    t_end: float
    n_steps: int
    n_list: tuple
    n_ref: int
    n_picard: int
    picard_tol: float | None
    n_replications: int
    t0: float
    delta: float
    orders: tuple
    ck_orders: tuple
    moment_power: float
    tail_grid: tuple
    sample_size: int
    bins: int
    bins2d: int
    theorem_c: float | None
    reference_path: str | None
    seed: int
    workers: int
    out: str

    @classmethod
    def from_mapping(cls, mapping: dict) -> "ExperimentConfig":
        unknown = set(mapping) - set(DEFAULTS)
        if unknown:
            raise ConfigurationError(
                f"unknown config fields: {sorted(unknown)}; "
                f"known fields: {sorted(DEFAULTS)}"
            )
        merged = {**DEFAULTS, **mapping}
        for key in ("n_list", "orders", "ck_orders", "tail_grid", "drift_value"):
            merged[key] = tuple(merged[key])
        return cls(**merged)

    def with_overrides(self, seed=None, workers=None, out=None) -> "ExperimentConfig":
        updates = {}
        if seed is not None:
            updates["seed"] = int(seed)
        updates["workers"] = resolve_workers(workers, self.workers)
        if out is not None:
            updates["out"] = out
        return replace(self, **updates)

    def scientific_dict(self) -> dict:
        d = asdict(self)
        for key in _EXECUTION_FIELDS:
            d.pop(key)
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.scientific_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path}: config must be a flat mapping")
    return ExperimentConfig.from_mapping(data)


@dataclass
class StudyResult:
    study: str
    all_passed: bool
    summary: dict
    files: list = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        return 0 if self.all_passed else 1


# ---------------------------------------------------------------------------
# shared setup
# ---------------------------------------------------------------------------

def _build_model(cfg: ExperimentConfig):
    """Returns (spec, model_object, beta)."""
    if cfg.model == "tanh":
        model = tanh_model(cfg.kappa, cfg.sigma)
        return make_bounded_kernel_spec(model), model, beta_of(model)
    if cfg.model == "kinetic":
        model = kinetic_tanh_model(cfg.kappa, cfg.sigma)
        return make_kinetic_spec(model), model, beta_of(model)
    if cfg.model == "constant":
        model = constant_drift_model(np.asarray(cfg.drift_value), cfg.sigma)
        return make_bounded_kernel_spec(model), model, beta_of(model)
    if cfg.model == "zero":
        spec = make_control_spec(d=1, sigma=cfg.sigma)
        return spec, None, 0.0
    raise ConfigurationError(
        f"unknown model {cfg.model!r}; expected tanh | kinetic | constant | zero"
    )


@dataclass
class _Setup:
    cfg: ExperimentConfig
    spec: object
    model: object
    beta: float
    grid: TimeGrid
    init: object
    plan: RngPlan
    out: Path

    def meta(self) -> dict:
        return {
            "config_hash": self.cfg.config_hash(),
            "master_seed": self.cfg.seed,
            "artifact_version": __version__,
        }


def _setup(cfg: ExperimentConfig) -> _Setup:
    spec, model, beta = _build_model(cfg)
    grid = TimeGrid(0.0, cfg.t_end, cfg.n_steps)
    init = normal_init(spec.d, cfg.init_scale)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return _Setup(cfg, spec, model, beta, grid, init, RngPlan(cfg.seed), out)


def _get_reference(s: _Setup, min_ref: int | None = None):
    cfg = s.cfg
    if cfg.reference_path:
        law = load_reference_law(cfg.reference_path)
        law.ensemble.grid.refinement_stride(s.grid)  # compatibility check
        if law.meta.get("model_id") != s.spec.model_id:
            log.warning(
                "reference law model %r differs from study model %r",
                law.meta.get("model_id"), s.spec.model_id,
            )
        return law
    if min_ref is not None and cfg.n_ref < min_ref:
        raise ConfigurationError(
            f"n_ref={cfg.n_ref} too small: rate studies require "
            f"n_ref >= 16*max(N) = {min_ref}"
        )
    log.info("building reference law: n_ref=%d, n_picard=%d", cfg.n_ref, cfg.n_picard)
    return build_reference_law(
        s.spec, cfg.n_ref, cfg.n_picard, s.grid, s.init,
        s.plan.child("reference"), tol=cfg.picard_tol,
    )


def _write_run_meta(s: _Setup, result: StudyResult) -> None:
    path = s.out / "run_meta.json"
    payload = {
        "config": asdict(s.cfg),
        "config_hash": s.cfg.config_hash(),
        "artifact_version": __version__,
        "study": result.study,
        "all_passed": result.all_passed,
        "summary": result.summary,
        "files": [str(f) for f in result.files],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=str)
    result.files.append(path)


_ENTROPY_COLUMNS = (
    "model_id", "N", "N_ref", "T", "h", "estimator",
    "h_hat", "std_err", "n_rep", "exclusions",
)
_RATE_COLUMNS = (
    "model_id", "N", "k", "h_hat", "h_se",
    "pinsker_bound", "theorem_bound", "direct_tv",
)
_CHECK_COLUMNS = ("check", "order", "empirical", "std_err", "bound", "pass")


def _entropy_row(s: _Setup, n, n_ref, est) -> dict:
    return {
        "model_id": s.spec.model_id,
        "N": n,
        "N_ref": n_ref,
        "T": s.grid.t_end,
        "h": s.grid.h,
        "estimator": est.estimator_kind,
        "h_hat": est.h_hat,
        "std_err": est.std_err,
        "n_rep": est.n_replications,
        "exclusions": est.exclusions,
    }


def _check_rows(report) -> list[dict]:
    return [
        {
            "check": report.check,
            "order": r.order,
            "empirical": r.empirical,
            "std_err": r.std_err,
            "bound": r.bound,
            "pass": r.passed,
        }
        for r in report.rows
    ]


def _theorem_c(cfg: ExperimentConfig) -> float:
    if cfg.theorem_c is not None:
        return float(cfg.theorem_c)
    value, _, _ = minimize_theorem_constant()
    return value


# ---------------------------------------------------------------------------
# studies
# ---------------------------------------------------------------------------

def run_rate_study(cfg: ExperimentConfig) -> StudyResult:
    """Entropy per N, Pinsker bounds, and the log-log rate fit."""
    s = _setup(cfg)
    law = _get_reference(s, min_ref=16 * max(cfg.n_list))
    measure = law.frozen_measure(s.grid)
    c_const = _theorem_c(cfg)

    entropy_rows, rate_rows, points = [], [], []
    for n in cfg.n_list:
        est = entropy_quadratic(
            s.spec, measure, n, s.grid, cfg.n_replications, s.init,
            s.plan.child(f"entropy-N{n}"), workers=cfg.workers,
        )
        log.info("N=%d: h_hat=%.6g (se %.2g)", n, est.h_hat, est.std_err)
        entropy_rows.append(_entropy_row(s, n, law.n_ref, est))
        bound, b_se = tv_bound_pinsker(est, 1, n)
        theorem = tv_bound_theorem(s.beta, s.grid.t_end, 1, n, c_const)
        rate_rows.append({
            "model_id": s.spec.model_id, "N": n, "k": 1,
            "h_hat": est.h_hat, "h_se": est.std_err,
            "pinsker_bound": bound, "theorem_bound": min(theorem, 1.0),
            "direct_tv": "",
        })
        points.append((n, bound))

    summary: dict = {
        "theorem_constant": c_const,
        "reference_drift_changes": law.drift_changes,
        "n_ref": law.n_ref,
    }
    if all(v <= 0 for _, v in points):
        summary["notice"] = "degenerate zero series: all entropy estimates are 0; rate fit refused"
        log.info(summary["notice"])
    else:
        fit = fit_rate(points)
        half = 2 * fit.slope_stderr
        summary["fit"] = {
            "slope": fit.slope,
            "slope_ci": [fit.slope - half, fit.slope + half],
            "intercept": fit.intercept,
            "r_squared": fit.r_squared,
            "points": fit.points,
        }

    files = []
    meta = s.meta()
    write_report(s.out / "entropy.csv", _ENTROPY_COLUMNS, entropy_rows, meta)
    write_report(s.out / "rate.csv", _RATE_COLUMNS, rate_rows, meta)
    files += [s.out / "entropy.csv", s.out / "rate.csv"]
    with open(s.out / "rate_summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    files.append(s.out / "rate_summary.json")

    result = StudyResult("rate", True, summary, files)
    _write_run_meta(s, result)
    return result


def run_condition_c_study(cfg: ExperimentConfig) -> StudyResult:
    """Windowed drift-deviation moment ladder along McKean copies."""
    s = _setup(cfg)
    law = _get_reference(s)
    measure = law.frozen_measure(s.grid)
    rows, reports = [], []
    for n in cfg.n_list:
        w = windowed_deviation_integrals(
            s.spec, measure, n, s.grid, cfg.t0, cfg.delta,
            cfg.n_replications, s.init, s.plan.child(f"condition-c-N{n}"),
            workers=cfg.workers,
        )
        report = check_condition_c(w, s.beta, cfg.t0, cfg.delta, n, cfg.orders)
        report.check = f"condition-c[N={n}]"
        reports.append(report)
        rows += _check_rows(report)

    passed = all(r.all_passed for r in reports)
    write_report(s.out / "condition_c.csv", _CHECK_COLUMNS, rows, s.meta())
    summary = {
        "beta": s.beta,
        "window": [cfg.t0, cfg.delta],
        "per_N": {
            str(r.meta["N"]): {"all_passed": r.all_passed} for r in reports
        },
    }
    result = StudyResult(
        "condition-c", passed, summary, [s.out / "condition_c.csv"]
    )
    _write_run_meta(s, result)
    return result


def run_inequalities(cfg: ExperimentConfig) -> StudyResult:
    """Martingale-moment, sub-Gaussian, and bounded-difference checks."""
    s = _setup(cfg)
    plan = s.plan
    n_rep = cfg.n_replications
    reports = []

    for name, integrand in (("brownian", unit_integrand), ("tanh", tanh_integrand)):
        reports.append(
            check_carlen_kree(
                integrand, s.grid, cfg.ck_orders, n_rep,
                plan.child(f"carlen-kree-{name}"), name=name,
            )
        )

    n = cfg.sample_size
    for sampler in (rademacher_sampler(), uniform_sampler()):
        reports.append(
            check_subgaussian_moments(
                sampler, sampler.abs_bound, n, cfg.orders, n_rep,
                plan.child(f"subgaussian-{sampler.name}"),
            )
        )

    f, coeffs = mean_function(n, value_range=2.0)
    reports.append(
        check_bounded_difference(
            f, coeffs, rademacher_sampler(), n, cfg.tail_grid, n_rep,
            plan.child("bounded-difference"),
            moment_orders=cfg.orders, exact_mean=0.0,
        )
    )

    rows = []
    for r in reports:
        rows += _check_rows(r)
    passed = all(r.all_passed for r in reports)
    write_report(s.out / "inequalities.csv", _CHECK_COLUMNS, rows, s.meta())
    summary = {r.check: r.all_passed for r in reports}
    result = StudyResult(
        "inequalities", passed, summary, [s.out / "inequalities.csv"]
    )
    _write_run_meta(s, result)
    return result


def _pooled_final_states(s: _Setup, law_measure, n, n_reps, plan, interacting):
    """Final-time marginal samples pooled over replications.

    Returns (samples (R*N,), pair_samples (R*N//2, 2)); interacting runs
    keep particles grouped per replication so pairs stay within blocks.
    """
    spec = s.spec
    coord = 0
    per_rep = n * (s.grid.n_steps + 1) * spec.d
    chunk = max(1, 4_000_000 // per_rep)
    samples = []

    def run_chunk(r0, r1):
        keys = [(r, p) for r in range(r0, r1) for p in range(n)]
        if interacting:
            factory = lambda values: BlockEmpiricalMeasure(values, n)
        else:
            factory = law_measure
        ens = simulate_paths(spec, s.grid, keys, s.init, plan, factory)
        return ens.values[:, -1, coord].copy()

    from .parallel import map_chunked

    parts = map_chunked(run_chunk, n_reps, chunk, s.cfg.workers)
    flat = np.concatenate(parts)
    n2 = (flat.shape[0] // 2) * 2
    return flat, flat[:n2].reshape(-1, 2)


def run_tv_direct(cfg: ExperimentConfig) -> StudyResult:
    """Direct marginal TV vs the entropy route, k = 1 and k = 2."""
    s = _setup(cfg)
    law = _get_reference(s)
    measure = law.frozen_measure(s.grid)
    rows = []
    passed = True
    summary: dict = {}
    for n in cfg.n_list:
        est = entropy_quadratic(
            s.spec, measure, n, s.grid, cfg.n_replications, s.init,
            s.plan.child(f"entropy-N{n}"), workers=cfg.workers,
        )
        int_flat, int_pairs = _pooled_final_states(
            s, measure, n, cfg.n_replications, s.plan.child(f"tv-int-N{n}"), True
        )
        ind_flat, ind_pairs = _pooled_final_states(
            s, measure, n, cfg.n_replications, s.plan.child(f"tv-ind-N{n}"), False
        )
        for k, bins, a, b in (
            (1, cfg.bins, int_flat[:, None], ind_flat[:, None]),
            (2, cfg.bins2d, int_pairs, ind_pairs),
        ):
            direct = tv_histogram(a, b, bins=bins)
            d_se = _group_split_se(a, b, bins)
            bound, b_se = tv_bound_pinsker(est, k, n)
            ok = direct <= bound + 3 * float(np.hypot(b_se, d_se))
            passed = passed and ok
            rows.append({
                "model_id": s.spec.model_id, "N": n, "k": k,
                "h_hat": est.h_hat, "h_se": est.std_err,
                "pinsker_bound": bound,
                "theorem_bound": min(
                    tv_bound_theorem(s.beta, s.grid.t_end, k, n, _theorem_c(cfg)), 1.0
                ),
                "direct_tv": direct,
            })
            summary[f"N={n},k={k}"] = {
                "direct_tv": direct, "pinsker_bound": bound, "passed": ok,
            }
    write_report(s.out / "tv_direct.csv", _RATE_COLUMNS, rows, s.meta())
    result = StudyResult("tv-direct", passed, summary, [s.out / "tv_direct.csv"])
    _write_run_meta(s, result)
    return result


def _group_split_se(a, b, bins, groups: int = 8) -> float:
    """Spread of group-wise TV estimates as a conservative SE proxy."""
    n = a.shape[0]
    if n < groups * 2:
        return 0.0
    size = n // groups
    vals = [
        tv_histogram(a[g * size : (g + 1) * size], b, bins=bins)
        for g in range(groups)
    ]
    return float(np.std(vals, ddof=1) / np.sqrt(groups))


def run_prop31(cfg: ExperimentConfig) -> StudyResult:
    """Windowed exponential-martingale moment vs its explicit bound."""
    s = _setup(cfg)
    law = _get_reference(s)
    measure = law.frozen_measure(s.grid)
    n = cfg.n_list[0]
    report = check_exp_martingale_moment(
        s.spec, measure, n, s.grid, cfg.t0, cfg.delta, cfg.moment_power,
        s.beta, cfg.n_replications, s.init, s.plan.child("prop31"),
        workers=cfg.workers,
    )
    write_report(s.out / "prop31.csv", _CHECK_COLUMNS, _check_rows(report), s.meta())
    summary = {
        "bound": report.rows[0].bound,
        "empirical": report.rows[0].empirical,
        "threshold": report.meta["threshold"],
    }
    result = StudyResult(
        "prop31", report.all_passed, summary, [s.out / "prop31.csv"]
    )
    _write_run_meta(s, result)
    return result


def run_reference_law(cfg: ExperimentConfig) -> StudyResult:
    """Build the frozen reference law and persist it with its sidecar."""
    s = _setup(cfg)
    law = build_reference_law(
        s.spec, cfg.n_ref, cfg.n_picard, s.grid, s.init,
        s.plan.child("reference"), tol=cfg.picard_tol,
    )
    path = s.out / "reference_law.bin"
    save_reference_law(law, str(path))
    summary = {
        "n_ref": law.n_ref,
        "n_picard": law.n_picard,
        "drift_changes": law.drift_changes,
    }
    result = StudyResult(
        "reference-law", True, summary,
        [path, Path(str(path) + ".meta.json")],
    )
    _write_run_meta(s, result)
    return result


STUDIES = {
    "rate": run_rate_study,
    "condition-c": run_condition_c_study,
    "inequalities": run_inequalities,
    "tv-direct": run_tv_direct,
    "prop31": run_prop31,
    "reference-law": run_reference_law,
}


def run_study(cfg: ExperimentConfig) -> StudyResult:
    try:
        runner = STUDIES[cfg.study]
    except KeyError:
        raise ConfigurationError(
            f"unknown study kind {cfg.study!r}; expected one of {sorted(STUDIES)}"
        ) from None
    return runner(cfg)
