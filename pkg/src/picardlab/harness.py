"""Monte Carlo experiment runner for randomized Picard iterates.

Pipeline per sample: derive the sign draw from (base_seed, sample_index),
randomize the fixed datum, run the iterate chain to n_max, record the three
tracked norms.  Samples are independent and merged by sample index, so the
report is a pure function of (config, base_seed) regardless of worker count
(set PICARDLAB_WORKERS to parallelize; default serial).

The moment verdicts compare the empirical L^p_omega norm of
||du^(n)||_{L^2_t L^4_x} (plug-in estimator, bootstrap upper confidence bound
with 200 resamples) against the growth bound

    C_cal * p^(2^n / 2) * ||phi0||_{H^1} * T^(1/2) * (2^n)!

C_cal is calibrated once per run from the n = 0 moments (the leading term of
the expansion): 1.05 times the worst observed ratio against sqrt(p) ||phi0||
sqrt(T).  Verdicts are relative to this frozen calibration and the report says
so.  The small-interval regime requires C_cal * ||phi0||_{H^1} * T < 1/2.

The interval scaling study fits log(median norm) against log T over a
geometric ladder of halved intervals; the tail study compares the empirical
survival function of ||du^(n)|| against the sub-Weibull bound obtained by
feeding the calibrated moment growth (k = 2^n, alpha = 1) through
tail_from_moments.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from functools import lru_cache
from pathlib import Path

import numpy as np

from .grid import Field, load_field, make_grid, sobolev_norm
from .moments import MomentBound, tail_from_moments
from .picard import BlowUpError, TimeGrid, iterate_from_previous, picard_chain
from .randomization import (
    active_blocks,
    band_limited_field,
    draw_rademacher,
    gaussian_bump,
    randomize,
    support_radius,
)

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "SampleRow",
    "MomentVerdict",
    "ExperimentReport",
    "ScalingResult",
    "TailStudyResult",
    "load_config",
    "run_experiment",
    "interval_scaling_study",
    "tail_study",
    "emit_report",
    "emit_scaling",
    "emit_tail",
]

BOOTSTRAP_RESAMPLES = 200
BOOTSTRAP_QUANTILE = 0.95
CALIBRATION_MARGIN = 1.05
SMALL_REGIME_LIMIT = 0.5
WORKERS_ENV = "PICARDLAB_WORKERS"

DATA_FAMILIES = ("band_limited", "gaussian", "file", "zero")


class ConfigError(ValueError):
    """Configuration violates a run invariant."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of one Monte Carlo run; hashable and picklable."""

    n_points: int = 64
    box_length: float = 16.0 * math.pi
    t_final: float = 0.2
    n_steps: int = 64
    n_max: int = 2
    samples: int = 16
    base_seed: int = 2026
    d_choice: str = "x1"
    family: str = "band_limited"
    band: float = 2.0
    h1_norm: float = 1.0
    sigma: float = 2.0
    amplitude: float = 1.0
    data_seed: int = 7
    data_path: str = ""
    p_list: tuple[int, ...] = (4, 6, 8)
    interval_list: tuple[float, ...] = ()
    require_small_regime: bool = True

    def __post_init__(self) -> None:
        if self.family not in DATA_FAMILIES:
            raise ConfigError(f"unknown data family {self.family!r}")
        if self.samples < 1:
            raise ConfigError("samples must be >= 1; empty experiments are rejected")
        if self.n_max < 0:
            raise ConfigError(f"n_max must be >= 0, got {self.n_max}")
        if any(p < 2 or p % 2 for p in self.p_list):
            raise ConfigError(f"p_list must contain even integers >= 2: {self.p_list}")
        object.__setattr__(self, "p_list", tuple(int(p) for p in self.p_list))
        object.__setattr__(self, "interval_list",
                           tuple(float(t) for t in self.interval_list))

    @property
    def config_hash(self) -> str:
        payload = json.dumps(asdict(self), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:12]


@dataclass(frozen=True)
class SampleRow:
    sample_index: int
    n: int
    finite: bool
    linf_h1_u: float
    linf_l2_dudt: float
    l2t_l4_du: float


@dataclass(frozen=True)
class MomentVerdict:
    n: int
    p: int
    empirical: float
    upper_ci: float
    bound: float
    ratio: float
    passed: bool


@dataclass(frozen=True)
class ExperimentReport:
    config: ExperimentConfig
    phi0_h1: float
    c_cal: float
    rows: tuple[SampleRow, ...]
    moment_verdicts: tuple[MomentVerdict, ...]
    level_stats: dict
    finite_fraction: float
    verdicts: dict

    @property
    def all_pass(self) -> bool:
        return all(self.verdicts.values())


@dataclass(frozen=True)
class ScalingResult:
    t_values: tuple[float, ...]
    medians: dict
    slopes: dict
    samples: int

    def slope_ok(self, n: int, lo: float = 0.4, hi: float = 0.6) -> bool:
        return lo <= self.slopes[n] <= hi


@dataclass(frozen=True)
class TailStudyResult:
    n: int
    c_cal: float
    lam: tuple[float, ...]
    empirical: tuple[float, ...]
    bound: tuple[float, ...]
    checked: tuple[bool, ...]
    passed: bool
    finite_fraction: float


# ---------------------------------------------------------------------------
# Data preparation (cached per process)
# ---------------------------------------------------------------------------

def _build_phi0(config: ExperimentConfig, grid) -> Field:
    if config.family == "band_limited":
        return band_limited_field(grid, band=config.band, seed=config.data_seed,
                                  h1_norm=config.h1_norm)
    if config.family == "gaussian":
        return gaussian_bump(grid, sigma=config.sigma, amplitude=config.amplitude)
    if config.family == "file":
        if not config.data_path:
            raise ConfigError("family 'file' needs data_path")
        return load_field(config.data_path)
    return Field(grid=grid, values=np.zeros((grid.n_points, grid.n_points)),
                 representation="physical")


@lru_cache(maxsize=4)
def _prepared(config: ExperimentConfig):
    try:
        grid = make_grid(config.n_points, config.box_length)
        phi0 = _build_phi0(config, grid)
        tg = TimeGrid(t_final=config.t_final, n_steps=config.n_steps)
    except ConfigError:
        raise
    except ValueError as exc:
        # grid/band/time constructor rejections are configuration mistakes
        raise ConfigError(str(exc)) from exc
    phi0_h1 = sobolev_norm(phi0, 1.0)
    blocks = active_blocks(phi0) if phi0_h1 > 0 else ()
    if config.family == "gaussian" and phi0_h1 > 0:
        # compactly supported (to rounding) datum: solution must not wrap
        margin = grid.box_length / 2.0 - support_radius(phi0) - config.t_final
        if margin <= 0:
            raise ConfigError(
                f"t_final {config.t_final} reaches the box boundary "
                f"(support margin {margin:.3g}); shrink T or enlarge the box")
    return grid, phi0, tg, phi0_h1, blocks


def _zero_rows(config: ExperimentConfig, idx: int) -> list[SampleRow]:
    return [SampleRow(idx, n, True, 0.0, 0.0, 0.0) for n in range(config.n_max + 1)]


def _run_one(config: ExperimentConfig, idx: int) -> list[SampleRow]:
    _, phi0, tg, phi0_h1, blocks = _prepared(config)
    if not blocks:
        return _zero_rows(config, idx)
    draw = draw_rademacher(config.base_seed, blocks, sample_index=idx)
    data = randomize(phi0, None, draw)
    rows: list[SampleRow] = []
    rec = None
    for n in range(config.n_max + 1):
        try:
            if rec is None:
                rec = picard_chain(0, data, tg, d_choice=config.d_choice,
                                   config_hash=config.config_hash)[-1]
            else:
                rec = iterate_from_previous(rec, data, tg, d_choice=config.d_choice)
        except BlowUpError:
            rows.extend(SampleRow(idx, m, False, math.inf, math.inf, math.inf)
                        for m in range(n, config.n_max + 1))
            break
        rows.append(SampleRow(idx, n, True,
                              rec.norms["linf_h1_u"],
                              rec.norms["linf_l2_dudt"],
                              rec.norms["l2t_l4_du"]))
    return rows


def _worker(payload):
    config, idx = payload
    return idx, _run_one(config, idx)


def _sample_rows(config: ExperimentConfig) -> tuple[SampleRow, ...]:
    """All per-sample rows, sorted by (sample_index, n); schedule-independent."""
    workers = int(os.environ.get(WORKERS_ENV, "1"))
    payloads = [(config, idx) for idx in range(config.samples)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = dict(pool.map(_worker, payloads))
    else:
        results = dict(map(_worker, payloads))
    rows: list[SampleRow] = []
    for idx in range(config.samples):
        rows.extend(results[idx])
    return tuple(rows)


# ---------------------------------------------------------------------------
# Moment verdicts and calibration
# ---------------------------------------------------------------------------

def _norms_by_level(rows, n_max: int) -> dict:
    out = {}
    for n in range(n_max + 1):
        out[n] = np.array([r.l2t_l4_du for r in rows if r.n == n])
    return out


def _plugin_moment(x: np.ndarray, p: int) -> float:
    return float(np.mean(x ** float(p)) ** (1.0 / p))


def _bootstrap_upper(x: np.ndarray, p: int, boot_idx: np.ndarray) -> float:
    boots = np.mean(x[boot_idx] ** float(p), axis=1) ** (1.0 / p)
    return max(float(np.quantile(boots, BOOTSTRAP_QUANTILE)), _plugin_moment(x, p))


def _moment_bound(c_cal: float, n: int, p: int, phi0_h1: float, t_final: float) -> float:
    return (c_cal * p ** (2**n / 2.0) * phi0_h1 * math.sqrt(t_final)
            * math.factorial(2**n))


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    """Monte Carlo over sign draws: norms, moment verdicts, regime bookkeeping."""
    _, _, _, phi0_h1, _ = _prepared(config)
    rows = _sample_rows(config)
    by_level = _norms_by_level(rows, config.n_max)
    finite = np.array([r.finite for r in rows])
    finite_fraction = float(np.mean(finite))

    rng = np.random.Generator(np.random.Philox(
        seed=np.random.SeedSequence((config.base_seed, 0xB007))))
    boot_idx = rng.integers(0, config.samples,
                            size=(BOOTSTRAP_RESAMPLES, config.samples))

    root_t = math.sqrt(config.t_final)
    if phi0_h1 > 0:
        x0 = by_level[0]
        if np.all(np.isfinite(x0)):
            c_cal = CALIBRATION_MARGIN * max(
                _bootstrap_upper(x0, p, boot_idx) / (math.sqrt(p) * phi0_h1 * root_t)
                for p in config.p_list)
        else:
            c_cal = math.inf
    else:
        c_cal = 0.0

    verdicts_list = []
    for n in range(config.n_max + 1):
        x = by_level[n]
        ok_samples = np.all(np.isfinite(x))
        for p in config.p_list:
            bound = _moment_bound(c_cal, n, p, phi0_h1, config.t_final)
            if ok_samples:
                emp = _plugin_moment(x, p)
                upper = _bootstrap_upper(x, p, boot_idx)
            else:
                emp = upper = math.inf
            if bound == 0.0:
                ratio = 0.0 if upper == 0.0 else math.inf
            else:
                ratio = upper / bound
            verdicts_list.append(MomentVerdict(
                n=n, p=p, empirical=emp, upper_ci=upper, bound=bound,
                ratio=ratio, passed=ratio <= 1.0))

    level_stats = {}
    for n in range(config.n_max + 1):
        x = by_level[n]
        xf = x[np.isfinite(x)]
        if xf.size:
            level_stats[n] = {
                "mean": float(np.mean(xf)),
                "median": float(np.median(xf)),
                "q05": float(np.quantile(xf, 0.05)),
                "q95": float(np.quantile(xf, 0.95)),
                "max": float(np.max(xf)),
                "finite_fraction": float(xf.size / x.size),
            }
        else:
            level_stats[n] = {"mean": math.inf, "median": math.inf,
                              "q05": math.inf, "q95": math.inf, "max": math.inf,
                              "finite_fraction": 0.0}

    small_regime_value = c_cal * phi0_h1 * config.t_final
    verdicts = {
        "all_samples_finite": finite_fraction == 1.0,
        "moment_ratios": all(v.passed for v in verdicts_list),
        "small_regime": small_regime_value < SMALL_REGIME_LIMIT,
    }
    if config.require_small_regime and not verdicts["small_regime"]:
        raise ConfigError(
            f"small-interval regime violated: C_cal*||phi0||*T = "
            f"{small_regime_value:.4g} >= {SMALL_REGIME_LIMIT}")

    return ExperimentReport(
        config=config, phi0_h1=phi0_h1, c_cal=c_cal, rows=rows,
        moment_verdicts=tuple(verdicts_list), level_stats=level_stats,
        finite_fraction=finite_fraction, verdicts=verdicts)


# ---------------------------------------------------------------------------
# Interval scaling and tail studies
# ---------------------------------------------------------------------------

def interval_scaling_study(config: ExperimentConfig) -> ScalingResult:
    """Slope of log(median ||du^(n)||) vs log T over a halving ladder of T."""
    ts = tuple(sorted(config.interval_list, reverse=True))
    if len(ts) < 4:
        raise ConfigError(f"need >= 4 interval values, got {len(ts)}")
    for a, b in zip(ts, ts[1:]):
        if abs(b / a - 0.5) > 1e-6:
            raise ConfigError(f"intervals must halve: {a} -> {b}")
    medians: dict = {n: [] for n in range(config.n_max + 1)}
    for t in ts:
        rows = _sample_rows(replace(config, t_final=t, interval_list=()))
        by_level = _norms_by_level(rows, config.n_max)
        for n in range(config.n_max + 1):
            x = by_level[n]
            xf = x[np.isfinite(x)]
            medians[n].append(float(np.median(xf)) if xf.size else math.inf)
    slopes = {}
    for n, meds in medians.items():
        good = [(t, m) for t, m in zip(ts, meds) if math.isfinite(m) and m > 0]
        if len(good) < 3:
            raise ConfigError(f"degenerate fit at n={n}: "
                              f"{len(good)} finite medians (need >= 3)")
        log_t = np.log([t for t, _ in good])
        log_m = np.log([m for _, m in good])
        slopes[n] = float(np.polyfit(log_t, log_m, 1)[0])
    return ScalingResult(t_values=ts,
                         medians={n: tuple(m) for n, m in medians.items()},
                         slopes=slopes, samples=config.samples)


def tail_study(config: ExperimentConfig, n: int,
               lam_grid=None) -> TailStudyResult:
    """Empirical P(||du^(n)|| > lam) against the calibrated sub-Weibull bound.

    The moment growth C_cal p^(2^n/2) ||phi0|| sqrt(T) (2^n)! is rewritten as
    c * n_scale^(-1) * p^(k/2) with k = 2^n and n_scale = 1/(2^n ||phi0||
    sqrt(T)), then converted by tail_from_moments.  The domination check runs
    at grid points where the bound is nonvacuous (<= 1); vacuous points are
    recorded but not judged.
    """
    if config.samples < 512:
        raise ConfigError(f"tail study needs >= 512 samples, got {config.samples}")
    if not 0 <= n <= 2:
        raise ConfigError(f"tail study supports 0 <= n <= 2, got {n}")
    report = run_experiment(replace(config, n_max=n))
    if report.phi0_h1 == 0:
        raise ConfigError("tail study needs nonzero data")
    x = np.array([r.l2t_l4_du for r in report.rows if r.n == n])
    xf = x[np.isfinite(x)]
    if xf.size == 0:
        raise ConfigError("tail study has no finite samples")
    k = 2**n
    scale = k * report.phi0_h1 * math.sqrt(config.t_final)
    mb = MomentBound(c=report.c_cal * math.factorial(k) / k, alpha=1.0,
                     n_scale=1.0 / scale, k=float(k), p0=2.0)
    if lam_grid is None:
        # cover the vacuous region (bound > 1, recorded only) AND a decade of
        # the nonvacuous region; lam_vac is where the bound crosses 1
        lam_vac = math.e * mb.c * scale * mb.p0 ** (k / 2.0)
        hi = max(4.0 * float(np.max(xf)), 8.0 * lam_vac)
        lam_grid = np.geomspace(0.5 * float(np.median(xf)), hi, 33)
    lam = tuple(float(v) for v in lam_grid)
    empirical = tuple(float(np.mean(x > v)) for v in lam)
    bound = tuple(tail_from_moments(mb, v) for v in lam)
    checked = tuple(b <= 1.0 for b in bound)
    passed = all(e <= b for e, b, c in zip(empirical, bound, checked) if c)
    return TailStudyResult(n=n, c_cal=report.c_cal, lam=lam, empirical=empirical,
                           bound=bound, checked=checked, passed=passed,
                           finite_fraction=float(xf.size / x.size))


# ---------------------------------------------------------------------------
# Report emission (deterministic bytes)
# ---------------------------------------------------------------------------

def _write_text(path: Path, text: str) -> Path:
    try:
        path.write_text(text, newline="\n")
    except OSError as exc:
        raise OSError(f"failed writing report file {path}: {exc}") from exc
    return path


def _rows_csv(report: ExperimentReport) -> str:
    lines = [f"# picardlab rows v1 config={report.config.config_hash} "
             f"seed={report.config.base_seed}",
             "sample_index,n,finite,linf_h1_u,linf_l2_dudt,l2t_l4_du"]
    for r in report.rows:
        lines.append(f"{r.sample_index},{r.n},{int(r.finite)},"
                     f"{r.linf_h1_u!r},{r.linf_l2_dudt!r},{r.l2t_l4_du!r}")
    return "\n".join(lines) + "\n"


def _two_column_csv(header: str, pairs) -> str:
    lines = [header] + [f"{a!r},{b!r}" for a, b in pairs]
    return "\n".join(lines) + "\n"


def _summary_payload(report: ExperimentReport, scaling, tail) -> dict:
    payload = {
        "version": _package_version(),
        "config": asdict(report.config),
        "config_hash": report.config.config_hash,
        "base_seed": report.config.base_seed,
        "phi0_h1": report.phi0_h1,
        "c_cal": report.c_cal,
        "calibration_note": (
            "C_cal frozen from the n=0 moments of this run "
            f"(x{CALIBRATION_MARGIN} margin over the bootstrap upper CI); "
            "verdicts are relative to this calibration"),
        "finite_fraction": report.finite_fraction,
        "level_stats": {str(n): s for n, s in report.level_stats.items()},
        "moments": [asdict(v) for v in report.moment_verdicts],
        "verdicts": dict(report.verdicts),
        "all_pass": report.all_pass,
    }
    if scaling is not None:
        payload["scaling"] = {
            "t_values": list(scaling.t_values),
            "medians": {str(n): list(m) for n, m in scaling.medians.items()},
            "slopes": {str(n): s for n, s in scaling.slopes.items()},
            "samples": scaling.samples,
        }
    if tail is not None:
        payload["tail"] = {
            "n": tail.n, "c_cal": tail.c_cal, "lam": list(tail.lam),
            "empirical": list(tail.empirical), "bound": list(tail.bound),
            "checked": list(tail.checked), "passed": tail.passed,
            "finite_fraction": tail.finite_fraction,
        }
    return payload


def _package_version() -> str:
    from . import __version__
    return __version__


def emit_scaling(scaling: ScalingResult, out_dir) -> tuple[Path, ...]:
    """Two-column plot data per level: log10 T vs log10 median norm."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for n, meds in sorted(scaling.medians.items()):
        pairs = [(math.log10(t), math.log10(m))
                 for t, m in zip(scaling.t_values, meds)
                 if math.isfinite(m) and m > 0]
        written.append(_write_text(out / f"scaling_n{n}.csv",
                                   _two_column_csv("log10_t,log10_median", pairs)))
    return tuple(written)


def emit_tail(tail: TailStudyResult, out_dir) -> tuple[Path, ...]:
    """Two-column plot data: lambda vs empirical tail, lambda vs bound."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return (
        _write_text(out / f"tail_n{tail.n}_empirical.csv",
                    _two_column_csv("lambda,tail", zip(tail.lam, tail.empirical))),
        _write_text(out / f"tail_n{tail.n}_bound.csv",
                    _two_column_csv("lambda,bound", zip(tail.lam, tail.bound))),
    )


def emit_report(report: ExperimentReport, out_dir, formats=("csv", "json"),
                scaling: "ScalingResult | None" = None,
                tail: "TailStudyResult | None" = None) -> tuple[Path, ...]:
    """Write rows.csv / summary.json (+ plot-data CSVs for attached studies)."""
    if not report.rows:
        raise ValueError("refusing to emit an empty report")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if "csv" in formats:
        written.append(_write_text(out / "rows.csv", _rows_csv(report)))
        if scaling is not None:
            written.extend(emit_scaling(scaling, out))
        if tail is not None:
            written.extend(emit_tail(tail, out))
    if "json" in formats:
        payload = _summary_payload(report, scaling, tail)
        written.append(_write_text(
            out / "summary.json", json.dumps(payload, sort_keys=True, indent=2) + "\n"))
    return tuple(written)


# ---------------------------------------------------------------------------
# Declarative config files (INI: one section per concern, key = value lines)
# ---------------------------------------------------------------------------

_INI_SCHEMA = {
    ("grid", "n_points"): ("n_points", int),
    ("grid", "box_length"): ("box_length", float),
    ("time", "t_final"): ("t_final", float),
    ("time", "n_steps"): ("n_steps", int),
    ("experiment", "n_max"): ("n_max", int),
    ("experiment", "samples"): ("samples", int),
    ("experiment", "base_seed"): ("base_seed", int),
    ("experiment", "d_choice"): ("d_choice", str),
    ("experiment", "p_list"): ("p_list", lambda s: tuple(int(v) for v in s.split())),
    ("experiment", "interval_list"):
        ("interval_list", lambda s: tuple(float(v) for v in s.split())),
    ("experiment", "require_small_regime"):
        ("require_small_regime", lambda s: s.strip().lower() in ("1", "true", "yes")),
    ("data", "family"): ("family", str),
    ("data", "band"): ("band", float),
    ("data", "h1_norm"): ("h1_norm", float),
    ("data", "sigma"): ("sigma", float),
    ("data", "amplitude"): ("amplitude", float),
    ("data", "data_seed"): ("data_seed", int),
    ("data", "data_path"): ("data_path", str),
}


def load_config(path, **overrides) -> ExperimentConfig:
    """Read an INI config file; keyword overrides win over file values."""
    import configparser

    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"config file not found: {path}")
    kwargs = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            try:
                field, conv = _INI_SCHEMA[(section, key)]
            except KeyError:
                raise ConfigError(f"unknown config entry [{section}] {key}") from None
            kwargs[field] = conv(raw)
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**kwargs)
