"""
Replicated determinant experiments, their summaries, plot data and the
selection-time benchmark.

A replicate draws one full data set and runs every configured method on
it, so methods are compared on identical data. Replicate ``v`` at the
``i``-th sample size uses ``RngStream(seed, (i << 32) | v)``.
"""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .distributions import FAMILIES, NORMAL, STUDENT_T, EllipticalModel, RngStream, sample_covariates
from .errors import ConfigError, EmptyInput, MissingSeries, OptsubError
from .estimation import slope_covariance
from .linalg import CovSpec
from .subsamplers import DOPT, DOPT_S, FULL, IBOSS, UNIFORM, select_iboss, select_known, select_top_k_mahalanobis, select_top_k_simplified
from .theory import second_moment_normal, slope_cov_approx, uniform_efficiency

METHOD_ORDER = (FULL, DOPT, DOPT_S, IBOSS, UNIFORM)
DISPLAY_NAMES = {FULL: "FULL", DOPT: "D-OPT", DOPT_S: "D-OPT-s", IBOSS: "IBOSS", UNIFORM: "UNIF"}
SUMMARY_COLUMNS = ("method", "n", "V", "mean_det", "std_det", "mean_ms", "median_ms")
RECORD_COLUMNS = (
    "method",
    "n",
    "replicate_id",
    "standardized_det",
    "trace",
    "elapsed_ms_select",
    "elapsed_ms_total",
    "status",
    "message",
)


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


# =============================================================================
# Configuration
# =============================================================================


@dataclass
class ExperimentConfig:
    """
    Scenario grid for the determinant experiment.

    ``record_timings=False`` writes zero elapsed times so that outputs are
    byte-identical across runs. ``workers > 1`` spreads replicates over a
    process pool; results do not depend on it.
    """

    family: str = NORMAL
    nu: Optional[float] = None
    d: int = 50
    rho: float = 0.0
    k: int = 1000
    n_list: List[int] = field(default_factory=lambda: [1_000, 10_000, 100_000, 1_000_000])
    methods: List[str] = field(default_factory=lambda: list(METHOD_ORDER))
    V: int = 200
    seed: int = 1
    sigma_eps: float = 1.0
    record_timings: bool = True
    workers: int = 1

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"family must be one of {FAMILIES}, got {self.family!r}")
        if self.family == STUDENT_T:
            if self.nu is None:
                self.nu = 3.0
            if not self.nu > 2:
                raise ConfigError(f"nu must exceed 2, got {self.nu}")
        if self.d < 1:
            raise ConfigError(f"d must be positive, got {self.d}")
        if not self.n_list:
            raise ConfigError("n_list is empty")
        self.n_list = [int(n) for n in self.n_list]
        if self.k < self.d + 1:
            raise ConfigError(f"k={self.k} leaves the slope covariance singular for d={self.d}")
        if self.k > min(self.n_list):
            raise ConfigError(f"k={self.k} exceeds the smallest n={min(self.n_list)}")
        if self.V < 1:
            raise ConfigError(f"V must be at least 1, got {self.V}")
        if self.d > 1 and not (-1.0 / (self.d - 1) < self.rho < 1.0):
            raise ConfigError(f"rho={self.rho} gives a singular or indefinite compound symmetry")
        unknown = [m for m in self.methods if m not in METHOD_ORDER]
        if unknown or not self.methods:
            raise ConfigError(f"methods must be a nonempty subset of {METHOD_ORDER}, got {self.methods}")
        if IBOSS in self.methods and self.k < 2 * self.d:
            raise ConfigError(f"IBOSS needs k >= 2d = {2 * self.d}")
        if not self.sigma_eps > 0:
            raise ConfigError(f"sigma_eps must be positive, got {self.sigma_eps}")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")

    def cov(self) -> CovSpec:
        if self.rho == 0.0:
            return CovSpec.identity(self.d)
        return CovSpec.compound_symmetry(self.d, self.rho)

    def model(self) -> EllipticalModel:
        return EllipticalModel(self.family, self.cov(), self.nu)

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        """
        Parse flat ``key = value`` lines; ``#`` starts a comment and lists
        are comma separated.
        """
        types = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in types:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            if key in kwargs:
                raise ConfigError(f"line {lineno}: duplicate key {key!r}")
            try:
                kwargs[key] = _parse_value(key, value)
            except ValueError as exc:
                raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from exc
        try:
            return cls(**kwargs)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_text(text)

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if value is None:
                continue
            if isinstance(value, list):
                value = ",".join(str(v) for v in value)
            elif isinstance(value, bool):
                value = str(value).lower()
            lines.append(f"{f.name} = {value}")
        return "\n".join(lines) + "\n"


def _parse_int(text: str) -> int:
    # accepts 1e6 style sizes as long as they are integral
    x = float(text)
    if not x.is_integer():
        raise ValueError(f"{text!r} is not an integer")
    return int(x)


def _parse_bool(text: str) -> bool:
    low = text.lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ValueError(f"{text!r} is not a boolean")


def _parse_value(key: str, value: str):
    if key in ("family",):
        return value
    if key == "methods":
        return [m.strip() for m in value.split(",") if m.strip()]
    if key == "n_list":
        return [_parse_int(v) for v in value.split(",") if v.strip()]
    if key in ("d", "k", "V", "seed", "workers"):
        return _parse_int(value)
    if key == "record_timings":
        return _parse_bool(value)
    return float(value)


# =============================================================================
# Running
# =============================================================================


@dataclass
class ExperimentRecord:
    method: str
    n: int
    replicate_id: int
    standardized_det: float
    trace: float
    elapsed_ms_select: float
    elapsed_ms_total: float
    status: str = "ok"
    message: str = ""

    def row(self) -> List[str]:
        return [_fmt(getattr(self, c)) for c in RECORD_COLUMNS]


@dataclass
class ExperimentResult:
    """
    Records sorted by (method, n, replicate_id) plus the summed slope
    covariance matrices needed for the determinant of the mean matrix.
    """

    config: ExperimentConfig
    records: List[ExperimentRecord]
    matrix_sums: Dict[Tuple[str, int], np.ndarray]
    matrix_counts: Dict[Tuple[str, int], int]

    def det_of_mean(self, method: str, n: int) -> float:
        """det(mean_v C^{(v)})^{1/d}."""
        key = (method, n)
        if key not in self.matrix_sums:
            raise MissingSeries(f"no replicates for method={method}, n={n}")
        mean = self.matrix_sums[key] / self.matrix_counts[key]
        sign, logdet = np.linalg.slogdet(mean)
        return math.exp(logdet / mean.shape[0]) if sign > 0 else float("nan")

    def records_for(self, method: str, n: int, limit: Optional[int] = None) -> List[ExperimentRecord]:
        out = [r for r in self.records if r.method == method and r.n == n and r.status == "ok"]
        if limit is not None:
            out = [r for r in out if r.replicate_id < limit]
        return out


class ExperimentAborted(OptsubError, RuntimeError):
    """A replicate failed; ``partial`` holds everything finished before it."""

    def __init__(self, message: str, partial: ExperimentResult):
        super().__init__(message)
        self.partial = partial


def _run_replicate(config: ExperimentConfig, n_index: int, v: int, buffer=None):
    n = config.n_list[n_index]
    model = config.model()
    stream = RngStream(config.seed, (n_index << 32) | v)
    if buffer is None:
        buffer = np.empty((n, config.d))
    X = sample_covariates(model, n, stream, out=buffer)
    # uniform draws come from a separate counter block so they do not
    # depend on which other methods ran first
    unif_stream = stream.jumped()
    out = []
    for method in config.methods:
        start = time.perf_counter()
        sel = select_known(method, X, config.k, model.cov, unif_stream if method == UNIFORM else None)
        C = slope_covariance(X.values[sel.indices])
        total = time.perf_counter() - start
        if config.record_timings:
            ms_sel, ms_tot = 1000.0 * sel.elapsed, 1000.0 * total
        else:
            ms_sel = ms_tot = 0.0
        rec = ExperimentRecord(method, n, v, C.standardized_det, float(np.trace(C.matrix)), ms_sel, ms_tot)
        out.append((rec, C.matrix))
    return out


def _run_replicate_task(args):
    config, n_index, v = args
    return _run_replicate(config, n_index, v)


def _method_rank(method: str) -> int:
    return METHOD_ORDER.index(method) if method in METHOD_ORDER else len(METHOD_ORDER)


def _finish(config, pairs) -> ExperimentResult:
    sums: Dict[Tuple[str, int], np.ndarray] = {}
    counts: Dict[Tuple[str, int], int] = {}
    records = []
    # sum in replicate order so the floating-point result is reproducible
    pairs = sorted(pairs, key=lambda p: (_method_rank(p[0].method), p[0].n, p[0].replicate_id))
    for rec, C in pairs:
        records.append(rec)
        if C is None:
            continue
        key = (rec.method, rec.n)
        if key in sums:
            sums[key] += C
            counts[key] += 1
        else:
            sums[key] = C.copy()
            counts[key] = 1
    return ExperimentResult(config, records, sums, counts)


def run_experiment(config: ExperimentConfig, progress=None) -> ExperimentResult:
    """
    Run every (n, replicate, method) cell of ``config``.

    ``progress``, if given, is called as ``progress(n, v)`` after each
    replicate. On a numerical failure an :class:`ExperimentAborted` is
    raised carrying the finished records plus one failure record.
    """
    pairs = []
    for i, n in enumerate(config.n_list):
        tasks = [(config, i, v) for v in range(config.V)]
        try:
            if config.workers > 1:
                with ProcessPoolExecutor(max_workers=config.workers) as pool:
                    for v, chunk in enumerate(pool.map(_run_replicate_task, tasks)):
                        pairs.extend(chunk)
                        if progress:
                            progress(n, v)
            else:
                buffer = np.empty((n, config.d))
                for v in range(config.V):
                    pairs.extend(_run_replicate(config, i, v, buffer))
                    if progress:
                        progress(n, v)
        except (OptsubError, np.linalg.LinAlgError, FloatingPointError) as exc:
            done = {(r.n, r.replicate_id) for r, _ in pairs}
            v_fail = next(v for v in range(config.V) if (n, v) not in done)
            fail = ExperimentRecord("-", n, v_fail, float("nan"), float("nan"), 0.0, 0.0, "failed", str(exc))
            pairs.append((fail, None))
            raise ExperimentAborted(str(exc), _finish(config, pairs)) from exc
    return _finish(config, pairs)


def write_records(path, records: Sequence[ExperimentRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RECORD_COLUMNS)
        for r in records:
            w.writerow(r.row())


# =============================================================================
# Summaries and plot data
# =============================================================================


@dataclass
class SummaryRow:
    method: str
    n: int
    V: int
    mean_det: float
    std_det: float
    mean_ms: float
    median_ms: float

    def row(self) -> List[str]:
        return [_fmt(getattr(self, c)) for c in SUMMARY_COLUMNS]


def summarize(records: Sequence[ExperimentRecord]) -> List[SummaryRow]:
    """
    Mean and standard deviation (ddof 1; zero for a single replicate) of
    the per-replicate standardized determinants, grouped by (method, n).
    """
    ok = [r for r in records if r.status == "ok"]
    if not ok:
        raise EmptyInput("no successful records to summarize")
    groups: Dict[Tuple[str, int], List[ExperimentRecord]] = {}
    for r in ok:
        groups.setdefault((r.method, r.n), []).append(r)
    rows = []
    for (method, n), recs in sorted(groups.items(), key=lambda kv: (_method_rank(kv[0][0]), kv[0][1])):
        dets = np.array([r.standardized_det for r in recs])
        ms = np.array([r.elapsed_ms_select for r in recs])
        std = float(dets.std(ddof=1)) if dets.shape[0] > 1 else 0.0
        rows.append(
            SummaryRow(method, n, len(recs), float(dets.mean()), std, float(ms.mean()), float(np.median(ms)))
        )
    return rows


def write_summary(path, rows: Sequence[SummaryRow]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for r in rows:
            w.writerow(r.row())


# figure id -> (columns, x axis, y axis, series column, title)
FIGURES = {
    1: (("alpha", "m2", "d"), "alpha", "m2", "d", "second moment of the optimal design"),
    3: (("n", "approx_mse", "sim_mse", "d"), "n", "sim_mse", "d", "approximate and simulated slope MSE per coordinate"),
    4: (("n", "method", "det"), "n", "det", "method", "standardized determinant, normal covariates"),
    5: (("n", "method", "det"), "n", "det", "method", "standardized determinant, t covariates"),
    6: (("n", "method", "det"), "n", "det", "method", "standardized determinant, simplified selection"),
    7: (("alpha", "efficiency", "d"), "alpha", "efficiency", "d", "efficiency of uniform subsampling"),
}
DEFAULT_THEORY_D = (1, 2, 5, 10, 50)


def default_alpha_grid() -> np.ndarray:
    return np.round(np.linspace(0.01, 0.99, 99), 10)


def _figure_rows(figure_id, result: Optional[ExperimentResult], d_list, alpha_grid):
    if figure_id in (1, 7):
        rows = []
        for d in d_list:
            for a in alpha_grid:
                a = float(a)
                if figure_id == 1:
                    rows.append((a, second_moment_normal(d, a), d))
                else:
                    rows.append((a, uniform_efficiency(NORMAL, d, a), d))
        return rows
    if result is None or not result.records:
        raise MissingSeries(f"figure {figure_id} needs simulation results")
    cfg = result.config
    keys = sorted(result.matrix_sums, key=lambda k: (k[1], _method_rank(k[0])))
    if figure_id == 3:
        series = [key for key in keys if key[0] == DOPT]
        if not series:
            raise MissingSeries("figure 3 needs the dopt series")
        rows = []
        for method, n in series:
            traces = [r.trace for r in result.records_for(method, n)]
            sim = cfg.sigma_eps**2 * float(np.mean(traces)) / cfg.d
            approx = slope_cov_approx(cfg.family, cfg.d, n, cfg.k, cfg.cov(), cfg.nu, cfg.sigma_eps)
            rows.append((n, float(np.trace(approx.matrix)) / cfg.d, sim, cfg.d))
        return rows
    if not keys:
        raise MissingSeries(f"figure {figure_id} has no determinant series")
    return [(n, method, result.det_of_mean(method, n)) for method, n in keys]


def _plot_script(figure_id: int, data_file: str) -> str:
    columns, x, y, series, title = FIGURES[figure_id]
    log_x = "log" if x == "n" else "linear"
    log_y = "log" if y in ("det", "sim_mse") else "linear"
    lines = [
        f"figure {figure_id}",
        f"  title {title}",
        f"  data {data_file}",
        f"  x {x} {log_x}",
        f"  y {y} {log_y}",
        f"  series {series}",
    ]
    if figure_id == 3:
        lines.append("  overlay approx_mse line")
    return "\n".join(lines) + "\n"


def emit_plot_data(
    result: Optional[ExperimentResult],
    figure_id: int,
    out_dir,
    d_list: Sequence[int] = DEFAULT_THEORY_D,
    alpha_grid: Optional[Sequence[float]] = None,
) -> Tuple[Path, str]:
    """
    Write ``fig<id>.csv`` into ``out_dir`` and return its path together
    with a declarative plotting stanza.

    Figures 1 and 7 are pure theory; 3 to 6 come from ``result``, with
    figures 4 to 6 using the determinant of the replicate-averaged matrix.
    """
    if figure_id not in FIGURES:
        raise MissingSeries(f"unknown figure id {figure_id}; known ids are {sorted(FIGURES)}")
    if alpha_grid is None:
        alpha_grid = default_alpha_grid()
    rows = _figure_rows(figure_id, result, d_list, alpha_grid)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"fig{figure_id}.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FIGURES[figure_id][0])
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path, _plot_script(figure_id, path.name)


def simulation_figures(config: ExperimentConfig) -> List[int]:
    """Figure ids a simulation run can feed."""
    ids = [3] if DOPT in config.methods else []
    if config.family == STUDENT_T:
        ids.append(5)
    elif DOPT_S in config.methods and config.rho != 0.0:
        ids += [4, 6]
    else:
        ids.append(4)
    return sorted(ids)


def write_outputs(result: ExperimentResult, out_dir) -> List[Path]:
    """records.csv, summary.csv, fig*.csv and plotscript.txt for a run."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = [out_dir / "records.csv"]
    write_records(written[0], result.records)
    ok = [r for r in result.records if r.status == "ok"]
    if not ok:
        return written
    write_summary(out_dir / "summary.csv", summarize(ok))
    written.append(out_dir / "summary.csv")
    scripts = []
    for fid in simulation_figures(result.config):
        path, script = emit_plot_data(result, fid, out_dir)
        written.append(path)
        scripts.append(script)
    (out_dir / "plotscript.txt").write_text("\n".join(scripts))
    written.append(out_dir / "plotscript.txt")
    return written


# =============================================================================
# Selection-time benchmark
# =============================================================================


@dataclass
class BenchConfig:
    """Selection timing grid; D-OPT runs on a dense (general) dispersion."""

    n_list: List[int] = field(default_factory=lambda: [100_000, 200_000, 400_000, 800_000])
    d: int = 50
    k: int = 1000
    rho: float = 0.5
    repeats: int = 7
    seed: int = 11

    def __post_init__(self):
        if len(self.n_list) < 3:
            raise ConfigError("bench needs at least three sample sizes")
        if self.k > min(self.n_list):
            raise ConfigError(f"k={self.k} exceeds the smallest n")
        if self.repeats < 1:
            raise ConfigError("repeats must be at least 1")


@dataclass
class BenchResult:
    """
    Median selection milliseconds per (method, n), the fitted log-log
    slope per method, and whether D-OPT-s beat D-OPT at each n.
    """

    median_ms: Dict[Tuple[str, int], float]
    slopes: Dict[str, float]
    simplified_faster: Dict[int, bool]
    config: BenchConfig

    def rows(self):
        for (method, n), ms in sorted(self.median_ms.items(), key=lambda kv: (_method_rank(kv[0][0]), kv[0][1])):
            yield method, n, ms


def loglog_slope(ns: Sequence[float], times: Sequence[float]) -> float:
    """Least-squares slope of log(time) on log(n)."""
    slope, _ = np.polyfit(np.log(ns), np.log(times), 1)
    return float(slope)


def bench_complexity(config: BenchConfig) -> BenchResult:
    """Median-of-``repeats`` selection time for D-OPT, D-OPT-s and IBOSS."""
    cov = CovSpec.compound_symmetry(config.d, config.rho)
    dense = cov.as_general()
    model = EllipticalModel.normal(cov)
    runners = {
        DOPT: lambda X: select_top_k_mahalanobis(X, dense, config.k, keep_distances=False),
        DOPT_S: lambda X: select_top_k_simplified(X, cov.mean, cov.variances, config.k, keep_distances=False),
        IBOSS: lambda X: select_iboss(X, config.k),
    }
    medians: Dict[Tuple[str, int], float] = {}
    for i, n in enumerate(config.n_list):
        X = sample_covariates(model, n, RngStream(config.seed, i))
        for method, run in runners.items():
            times = [run(X).elapsed for _ in range(config.repeats)]
            medians[(method, n)] = 1000.0 * float(np.median(times))
        del X
    slopes = {m: loglog_slope(config.n_list, [medians[(m, n)] for n in config.n_list]) for m in runners}
    faster = {n: medians[(DOPT_S, n)] < medians[(DOPT, n)] for n in config.n_list}
    return BenchResult(medians, slopes, faster, config)


def write_bench(path, result: BenchResult) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("method", "n", "median_ms", "loglog_slope"))
        for method, n, ms in result.rows():
            w.writerow((method, n, _fmt(ms), _fmt(result.slopes[method])))
