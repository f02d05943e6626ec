"""Run configuration, CSV emission and the analytic-vs-simulation drivers.

A run is described by one flat JSON document.  Missing keys take the model
defaults; unknown keys are rejected so typos surface immediately.  Every file
is written from the coordinating process after all workers have returned, so
outputs are a pure function of the configuration.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .analytic import (
    INVERSION_SPEC,
    META_MOMENT_SPEC,
    MetaCurve,
    NetworkParams,
    SirThresholds,
    family_moments,
    jcas_meta_distribution,
    jcas_moment,
    marginal_meta_distribution,
)
from .montecarlo import EmpiricalCurve, EmpiricalMeta, EstimatorMode, SimConfig, empirical_meta
from .propagation import ChannelParams, db_to_linear
from .quadrature import DEFAULT_SPEC, QuadratureError, QuadratureSpec

log = logging.getLogger(__name__)

SIG_DIGITS = 12
FAMILIES = ("comm", "sensing", "jcas")

# acceptance thresholds checked by `compare`
SUP_GAP_SLACK = 0.03
MOMENT_REL_TOL = 0.02
MOMENT_SE_MULT = 3.0

META_COLUMNS = ["family", "theta_c_db", "theta_s_db", "lambda_u", "lambda_s", "x", "f_value", "method", "errors"]
COVERAGE_COLUMNS = ["theta_db", "m1_comm", "m1_sens", "m1_jcas"]
EMPIRICAL_COLUMNS = ["family", "theta_c_db", "theta_s_db", "x", "fraction", "ci_low", "ci_high", "n_realizations"]
SAMPLES_COLUMNS = ["theta_c_db", "theta_s_db", "realization_index", "seed", "p_c", "p_s", "p_jcas", "error"]
COMPARISON_COLUMNS = ["family", "theta_c_db", "theta_s_db", "x", "analytic", "empirical", "ci_low", "ci_high", "gap"]
MOMENT_COLUMNS = ["family", "theta_c_db", "theta_s_db", "order_re", "order_im", "value_re", "value_im", "converged"]

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_ACCEPTANCE = 0, 1, 2, 3


class ConfigError(ValueError):
    """Invalid run configuration; the message names the offending key."""


_QUAD_KEYS = {"rel_tol", "abs_tol", "max_subdivisions", "tail_epsilon"}
_KEYS = {
    "lambda_b", "lambda_u", "lambda_s", "beta", "alpha_los", "alpha_nlos", "k_los_db", "k_nlos_db",
    "theta_c_db", "theta_s_db", "x_grid", "n_realizations", "n_fading_draws", "estimator_mode",
    "base_seed", "bs_window_half_width_m", "eval_window_half_width_m", "quadrature", "inversion",
    "families", "theta_grid_db", "density_ratios", "orders", "jcas_method", "outputs",
}


def default_x_grid() -> np.ndarray:
    return np.round(np.arange(1, 100) * 0.01, 2)


@dataclass
class RunConfig:
    params: NetworkParams = field(default_factory=NetworkParams)
    thresholds: list[SirThresholds] = field(default_factory=lambda: [SirThresholds.from_db(-10.0, -10.0)])
    sim: SimConfig = field(default_factory=SimConfig)
    x_grid: np.ndarray = field(default_factory=default_x_grid)
    # both come from the 'quadrature' key; curves tolerate a looser default
    quad: QuadratureSpec = META_MOMENT_SPEC
    moment_quad: QuadratureSpec = DEFAULT_SPEC
    inversion: QuadratureSpec = INVERSION_SPEC
    outputs: Path = Path("out")
    families: tuple[str, ...] = FAMILIES
    theta_grid_db: np.ndarray = field(default_factory=lambda: np.arange(-20.0, 20.5, 2.5))
    density_ratios: tuple[float, ...] = ()
    orders: tuple[complex, ...] = (0.0, 1.0, 2.0, 1j)
    jcas_method: str = "auto"


def _number(raw: dict, key: str, default, kind=float):
    if key not in raw:
        return default
    v = raw[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{key}: expected a number, got {v!r}")
    if kind is int and not float(v).is_integer():
        raise ConfigError(f"{key}: expected an integer, got {v!r}")
    return kind(v)


def _number_list(raw: dict, key: str, default) -> list[float]:
    if key not in raw:
        return list(default)
    v = raw[key]
    vals = v if isinstance(v, list) else [v]
    if not vals or any(isinstance(a, bool) or not isinstance(a, (int, float)) for a in vals):
        raise ConfigError(f"{key}: expected a number or a non-empty list of numbers")
    return [float(a) for a in vals]


def _spec(raw: dict, key: str, default: QuadratureSpec) -> QuadratureSpec:
    if key not in raw:
        return default
    block = raw[key]
    if not isinstance(block, dict):
        raise ConfigError(f"{key}: expected an object with keys {sorted(_QUAD_KEYS)}")
    bad = set(block) - _QUAD_KEYS
    if bad:
        raise ConfigError(f"{key}.{sorted(bad)[0]}: unknown key")
    vals = {}
    for k in _QUAD_KEYS & set(block):
        vals[k] = _number(block, k, None, int if k == "max_subdivisions" else float)
    try:
        return dataclasses.replace(default, **vals)
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from exc


def _orders(raw: dict, default) -> tuple[complex, ...]:
    if "orders" not in raw:
        return tuple(default)
    out = []
    for v in raw["orders"] if isinstance(raw["orders"], list) else [raw["orders"]]:
        if isinstance(v, (int, float)) and not isinstance(v, bool):
            out.append(complex(v))
        elif isinstance(v, list) and len(v) == 2 and all(isinstance(a, (int, float)) for a in v):
            out.append(complex(v[0], v[1]))
        else:
            raise ConfigError(f"orders: entries must be numbers or [re, im] pairs, got {v!r}")
    return tuple(out)


def config_from_dict(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config: top level must be a JSON object")
    unknown = sorted(set(raw) - _KEYS)
    if unknown:
        raise ConfigError(f"{unknown[0]}: unknown key")
    d = RunConfig()
    dch = ChannelParams()

    def positive(key, v):
        if not v > 0:
            raise ConfigError(f"{key}: must be positive, got {v}")
        return v

    def nonneg(key, v):
        if v < 0:
            raise ConfigError(f"{key}: must be non-negative, got {v}")
        return v

    lam_b = positive("lambda_b", _number(raw, "lambda_b", d.params.lambda_b))
    lam_u = nonneg("lambda_u", _number(raw, "lambda_u", d.params.lambda_u))
    lam_s = nonneg("lambda_s", _number(raw, "lambda_s", d.params.lambda_s))
    if lam_u + lam_s <= 0:
        raise ConfigError("lambda_u: lambda_u + lambda_s must be positive")
    beta = positive("beta", _number(raw, "beta", dch.beta))
    a_l = positive("alpha_los", _number(raw, "alpha_los", dch.alpha_los))
    a_n = positive("alpha_nlos", _number(raw, "alpha_nlos", dch.alpha_nlos))
    if a_n < a_l:
        raise ConfigError("alpha_nlos: must be >= alpha_los")
    k_l_db, k_n_db = _number(raw, "k_los_db", None), _number(raw, "k_nlos_db", None)
    k_l = dch.k_los if k_l_db is None else db_to_linear(k_l_db)
    k_n = dch.k_nlos if k_n_db is None else db_to_linear(k_n_db)
    params = NetworkParams(lam_b, lam_u, lam_s, ChannelParams(k_l, k_n, a_l, a_n, beta))

    tc = _number_list(raw, "theta_c_db", [-10.0])
    ts = _number_list(raw, "theta_s_db", [-10.0])
    if len(tc) != len(ts) and 1 not in (len(tc), len(ts)):
        raise ConfigError("theta_s_db: list length must match theta_c_db or be 1")
    n = max(len(tc), len(ts))
    tc, ts = (tc * n if len(tc) == 1 else tc), (ts * n if len(ts) == 1 else ts)
    thresholds = [SirThresholds.from_db(a, b) for a, b in zip(tc, ts)]

    x = np.asarray(_number_list(raw, "x_grid", d.x_grid), dtype=float)
    if np.any((x <= 0) | (x >= 1)) or np.any(np.diff(x) <= 0):
        raise ConfigError("x_grid: must be strictly increasing inside (0, 1)")

    mode = raw.get("estimator_mode", d.sim.estimator_mode.value)
    try:
        mode = EstimatorMode(mode)
    except ValueError:
        raise ConfigError(f"estimator_mode: must be one of {[m.value for m in EstimatorMode]}") from None
    seed = _number(raw, "base_seed", d.sim.base_seed, int)
    try:
        sim = SimConfig(
            params=params,
            bs_window_half_width=_number(raw, "bs_window_half_width_m", d.sim.bs_window_half_width),
            eval_window_half_width=_number(raw, "eval_window_half_width_m", d.sim.eval_window_half_width),
            n_realizations=_number(raw, "n_realizations", d.sim.n_realizations, int),
            n_fading_draws=_number(raw, "n_fading_draws", d.sim.n_fading_draws, int),
            estimator_mode=mode,
            base_seed=seed,
        )
    except ValueError as exc:
        key = next((k for k in ("n_realizations", "n_fading_draws", "base_seed") if k in str(exc)), "bs_window_half_width_m")
        raise ConfigError(f"{key}: {exc}") from exc

    families = raw.get("families", list(d.families))
    if not isinstance(families, list) or not families or any(f not in FAMILIES for f in families):
        raise ConfigError(f"families: must be a non-empty list drawn from {list(FAMILIES)}")
    ratios = _number_list(raw, "density_ratios", d.density_ratios) if "density_ratios" in raw else []
    if any(r <= 0 for r in ratios):
        raise ConfigError("density_ratios: ratios lambda_u / lambda_s must be positive")
    method = raw.get("jcas_method", d.jcas_method)
    if method not in ("auto", "series", "mixture"):
        raise ConfigError("jcas_method: must be 'auto', 'series' or 'mixture'")
    outputs = raw.get("outputs", str(d.outputs))
    if not isinstance(outputs, str):
        raise ConfigError("outputs: expected a directory path string")

    return RunConfig(
        params=params,
        thresholds=thresholds,
        sim=sim,
        x_grid=x,
        quad=_spec(raw, "quadrature", d.quad),
        moment_quad=_spec(raw, "quadrature", d.moment_quad),
        inversion=_spec(raw, "inversion", d.inversion),
        outputs=Path(outputs),
        families=tuple(families),
        theta_grid_db=np.asarray(_number_list(raw, "theta_grid_db", d.theta_grid_db)),
        density_ratios=tuple(ratios),
        orders=_orders(raw, d.orders),
        jcas_method=method,
    )


def parse_config(path) -> RunConfig:
    """Load and validate a JSON run configuration; ``None`` or an empty file gives the defaults."""
    if path is None:
        return config_from_dict({})
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"config: cannot read {p}: {exc.strerror}") from exc
    if not text.strip():
        return config_from_dict({})
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    return config_from_dict(raw)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), f".{SIG_DIGITS}g")
    return str(v)


def write_csv(path: Path, columns: list[str], rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in columns])
    return path


def read_csv(path: Path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


# ---------------------------------------------------------------- analytic


@dataclass(frozen=True)
class _CurveJob:
    family: str
    th: SirThresholds
    params: NetworkParams
    x: tuple
    quad: QuadratureSpec
    inversion: QuadratureSpec
    method: str


def _curve(job: _CurveJob) -> MetaCurve:
    x = np.asarray(job.x)
    try:
        if job.family == "jcas":
            return jcas_meta_distribution(job.th, job.params, x, job.quad, job.inversion, job.method)
        return marginal_meta_distribution(job.family, job.th, job.params, x, job.quad, job.inversion)
    except (QuadratureError, ArithmeticError, ValueError) as exc:
        nan = np.full(x.size, np.nan)
        return MetaCurve(job.family, job.th.theta_c_db, job.th.theta_s_db, x, nan, "failed", [str(exc)] * x.size)


def _map(fn, jobs, threads: int):
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, jobs))
    return [fn(j) for j in jobs]


def _ratio_params(params: NetworkParams, ratio: float) -> NetworkParams:
    total = params.lambda_u + params.lambda_s
    return dataclasses.replace(params, lambda_u=total * ratio / (1.0 + ratio), lambda_s=total / (1.0 + ratio))


def analytic_curves(cfg: RunConfig, threads: int = 1) -> list[tuple[MetaCurve, NetworkParams]]:
    jobs = []
    x = tuple(cfg.x_grid.tolist())
    for th in cfg.thresholds:
        for fam in cfg.families:
            if fam == "jcas" and cfg.density_ratios:
                for r in cfg.density_ratios:
                    jobs.append(_CurveJob(fam, th, _ratio_params(cfg.params, r), x, cfg.quad, cfg.inversion, cfg.jcas_method))
            else:
                jobs.append(_CurveJob(fam, th, cfg.params, x, cfg.quad, cfg.inversion, cfg.jcas_method))
    curves = _map(_curve, jobs, threads)
    return [(c, j.params) for c, j in zip(curves, jobs)]


def _meta_rows(curves):
    for c, p in curves:
        for i, (xv, fv) in enumerate(zip(c.x, c.f_value)):
            yield {
                "family": c.family,
                "theta_c_db": c.theta_c_db,
                "theta_s_db": c.theta_s_db,
                "lambda_u": p.lambda_u,
                "lambda_s": p.lambda_s,
                "x": xv,
                "f_value": fv,
                "method": c.method,
                "errors": (c.errors[i] if i < len(c.errors) else None) or "",
            }


def _curves_clean(curves) -> bool:
    return all(not any(c.errors) and np.all(np.isfinite(c.f_value)) for c, _ in curves)


def cmd_meta(cfg: RunConfig, threads: int = 1) -> tuple[list[Path], bool]:
    """Write ``meta_analytic.csv``; returns the files and whether every point converged."""
    curves = analytic_curves(cfg, threads)
    path = write_csv(cfg.outputs / "meta_analytic.csv", META_COLUMNS, _meta_rows(curves))
    return [path], _curves_clean(curves)


def _coverage_row(args):
    theta_db, params, spec = args
    th = SirThresholds.from_db(theta_db, theta_db)
    mc, ok_c = family_moments("comm", [1.0], th, params, spec)
    ms, ok_s = family_moments("sensing", [1.0], th, params, spec)
    return float(mc[0].real), float(ms[0].real), ok_c and ok_s


def coverage_table(params: NetworkParams, theta_grid_db, spec: QuadratureSpec | None = None, threads: int = 1) -> list[dict]:
    """First moments per threshold with the joint column from the density-weighted identity."""
    spec = spec or DEFAULT_SPEC
    w_u, w_s = params.weights
    res = _map(_coverage_row, [(float(t), params, spec) for t in theta_grid_db], threads)
    rows = []
    for t, (m1c, m1s, ok) in zip(theta_grid_db, res):
        rows.append({"theta_db": float(t), "m1_comm": m1c, "m1_sens": m1s, "m1_jcas": w_u * m1c + w_s * m1s, "converged": ok})
    return rows


def cmd_coverage(cfg: RunConfig, theta_grid_db=None, threads: int = 1) -> tuple[list[Path], bool]:
    grid = cfg.theta_grid_db if theta_grid_db is None else np.asarray(theta_grid_db, dtype=float)
    rows = coverage_table(cfg.params, grid, cfg.moment_quad, threads)
    path = write_csv(cfg.outputs / "coverage.csv", COVERAGE_COLUMNS, rows)
    return [path], all(r["converged"] for r in rows)


def cmd_moments(cfg: RunConfig) -> tuple[list[Path], bool]:
    """Dump raw moments per family, threshold and order to ``moments.csv``."""
    rows = []
    clean = True
    for th in cfg.thresholds:
        for fam in cfg.families:
            for b in cfg.orders:
                try:
                    if fam == "jcas":
                        m = jcas_moment(b, th, cfg.params, cfg.moment_quad)
                        val, ok = m.value, m.quadrature_converged
                    else:
                        v, ok = family_moments(fam, [b], th, cfg.params, cfg.moment_quad)
                        val = complex(v[0])
                except (QuadratureError, ArithmeticError, ValueError) as exc:
                    log.warning("moment %s b=%s failed: %s", fam, b, exc)
                    val, ok = complex(math.nan, math.nan), False
                clean = clean and ok
                rows.append({
                    "family": fam, "theta_c_db": th.theta_c_db, "theta_s_db": th.theta_s_db,
                    "order_re": b.real, "order_im": b.imag, "value_re": val.real, "value_im": val.imag,
                    "converged": ok,
                })
    return [write_csv(cfg.outputs / "moments.csv", MOMENT_COLUMNS, rows)], clean


# -------------------------------------------------------------- simulation


def simulations(cfg: RunConfig, threads: int = 1) -> list[tuple[SirThresholds, EmpiricalMeta]]:
    return [(th, empirical_meta(cfg.sim, th, cfg.x_grid, threads)) for th in cfg.thresholds]


def _write_simulation(cfg: RunConfig, sims) -> list[Path]:
    meta_rows, sample_rows = [], []
    for th, em in sims:
        for fam in cfg.families:
            c = em.curves[fam]
            for i in range(c.x.size):
                meta_rows.append({
                    "family": fam, "theta_c_db": th.theta_c_db, "theta_s_db": th.theta_s_db, "x": c.x[i],
                    "fraction": c.fraction[i], "ci_low": c.ci_low[i], "ci_high": c.ci_high[i],
                    "n_realizations": cfg.sim.n_realizations,
                })
        w_u, w_s = cfg.params.weights
        for o in em.outcomes:
            sample_rows.append({
                "theta_c_db": th.theta_c_db, "theta_s_db": th.theta_s_db, "realization_index": o.index,
                "seed": o.seed, "p_c": o.p_c, "p_s": o.p_s, "p_jcas": w_u * o.p_c + w_s * o.p_s,
                "error": o.error or "",
            })
    return [
        write_csv(cfg.outputs / "meta_empirical.csv", EMPIRICAL_COLUMNS, meta_rows),
        write_csv(cfg.outputs / "samples.csv", SAMPLES_COLUMNS, sample_rows),
    ]


def cmd_simulate(cfg: RunConfig, threads: int = 1) -> tuple[list[Path], bool]:
    sims = simulations(cfg, threads)
    return _write_simulation(cfg, sims), all(not em.failures for _, em in sims)


# -------------------------------------------------------------- comparison


@dataclass
class ComparisonReport:
    family: str
    th: SirThresholds
    analytic: MetaCurve | None
    empirical: EmpiricalCurve | None
    sup_norm_gap: float = math.nan
    mean_ci_half_width: float = math.nan
    moment_gaps: dict = field(default_factory=dict)
    passed: dict = field(default_factory=dict)

    def as_json(self) -> dict:
        return {
            "family": self.family,
            "theta_c_db": self.th.theta_c_db,
            "theta_s_db": self.th.theta_s_db,
            "sup_norm_gap": self.sup_norm_gap,
            "mean_ci_half_width": self.mean_ci_half_width,
            "moment_gaps": self.moment_gaps,
            "pass": self.passed,
        }


def analytic_moments(family: str, th: SirThresholds, params: NetworkParams) -> tuple[float, float]:
    if family == "jcas":
        return (float(jcas_moment(1, th, params).value.real), float(jcas_moment(2, th, params).value.real))
    v, _ = family_moments(family, [1.0, 2.0], th, params, DEFAULT_SPEC)
    return float(v[0].real), float(v[1].real)


def moment_gap(analytic: float, samples: np.ndarray, order: int) -> dict:
    s = np.asarray(samples, dtype=float) ** order
    mean = float(s.mean())
    se = float(s.std(ddof=1) / math.sqrt(s.size)) if s.size > 1 else math.inf
    rel = abs(mean - analytic) / abs(analytic) if analytic else math.inf
    allowed = max(MOMENT_REL_TOL * abs(analytic), MOMENT_SE_MULT * se)
    return {"analytic": analytic, "empirical": mean, "std_error": se, "relative_gap": rel,
            "pass": bool(abs(mean - analytic) <= allowed)}


def compare(
    cfg: RunConfig, threads: int = 1, analytic: bool = True, simulate: bool = True
) -> tuple[list[ComparisonReport], list[Path]]:
    curves = analytic_curves(dataclasses.replace(cfg, density_ratios=()), threads) if analytic else []
    sims = simulations(cfg, threads) if simulate else []
    files = []
    if curves:
        files.append(write_csv(cfg.outputs / "meta_analytic.csv", META_COLUMNS, _meta_rows(curves)))
    if sims:
        files.extend(_write_simulation(cfg, sims))
    reports, rows = [], []
    for th in cfg.thresholds:
        em = next((e for t, e in sims if t == th), None)
        for fam in cfg.families:
            a = next((c for c, _ in curves if c.family == fam and _same(c, th)), None)
            e = em.curves[fam] if em else None
            rep = ComparisonReport(fam, th, a, e)
            if a is not None and e is not None:
                gap = np.abs(a.f_value - e.fraction)
                rep.sup_norm_gap = float(np.max(gap))
                rep.mean_ci_half_width = float(np.mean(e.half_width))
                rep.passed["sup_norm_gap"] = bool(rep.sup_norm_gap <= SUP_GAP_SLACK + rep.mean_ci_half_width)
                for i in range(gap.size):
                    rows.append({"family": fam, "theta_c_db": th.theta_c_db, "theta_s_db": th.theta_s_db,
                                 "x": e.x[i], "analytic": a.f_value[i], "empirical": e.fraction[i],
                                 "ci_low": e.ci_low[i], "ci_high": e.ci_high[i], "gap": gap[i]})
            if analytic and em is not None:
                m1, m2 = analytic_moments(fam, th, cfg.params)
                rep.moment_gaps = {"m1": moment_gap(m1, em.samples[fam], 1), "m2": moment_gap(m2, em.samples[fam], 2)}
                rep.passed["m1"] = rep.moment_gaps["m1"]["pass"]
                rep.passed["m2"] = rep.moment_gaps["m2"]["pass"]
            reports.append(rep)
    if rows:
        files.append(write_csv(cfg.outputs / "comparison.csv", COMPARISON_COLUMNS, rows))
    report_path = cfg.outputs / "report.json"
    report_path.parent.mkdir(parents=True, exist_ok=True)
    report_path.write_text(json.dumps({
        "pass": all(all(r.passed.values()) for r in reports),
        "comparisons": [r.as_json() for r in reports],
    }, indent=2, sort_keys=True) + "\n")
    files.append(report_path)
    return reports, files


def _same(c: MetaCurve, th: SirThresholds) -> bool:
    def close(a, b):
        return a is None or math.isclose(a, b, abs_tol=1e-9)
    return close(c.theta_c_db, th.theta_c_db) and close(c.theta_s_db, th.theta_s_db)


def cmd_compare(cfg: RunConfig, threads: int = 1, analytic: bool = True, simulate: bool = True):
    """Run both pipelines; returns ``(reports, files, converged)``."""
    reports, files = compare(cfg, threads, analytic, simulate)
    converged = all(
        r.analytic is None or (not any(r.analytic.errors) and np.all(np.isfinite(r.analytic.f_value)))
        for r in reports
    )
    return reports, files, converged
