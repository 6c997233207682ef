"""Experiment families reproducing the noisy-CG findings, with CSV persistence.

Four families are provided: long trajectory runs that estimate the plateau
the method settles on (and check that no error accumulates), sweeps of the
noise magnitude delta, sweeps of the solution size R, and a CG-vs-Nesterov
comparison on identical problems and noise streams.

The plateau value f(x*_noisy) is estimated as the arithmetic mean of the
true objective over a trailing fraction of the iterations; accumulation is
measured on the running (Cesaro) means of the scaled suboptimality, which
stay bounded exactly when no error builds up.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .linops import (DiagonalOperator, Operator, QuadraticProblem,
                     SpectrumSpec, make_dense_spd, make_problem, make_spectrum)
from .noise import (AdversarialVectorNoise, CombinedNoise, ExactOracle,
                    FIXED_PER_RUN, MatrixNoise, NoiseModel,
                    StochasticVectorNoise)
from .solvers import SolverTrace, cg_solve, nesterov_solve

NOISE_KINDS = ("exact", "adversarial_b", "stochastic_b", "matrix",
               "combined_adversarial", "combined_stochastic")
FAMILIES = ("trajectory", "sweep-delta", "sweep-r", "compare")

FIT_LINEAR_ORIGIN = "linear_origin"
FIT_AFFINE = "affine"
FIT_QUADRATIC = "quadratic"
FIT_LOGLOG = "loglog"

TRAJECTORY_HEADER = ("run_id", "seed", "noise_kind", "n", "delta_a", "delta_b",
                     "r", "iter", "f_true", "f_scaled", "residual_norm",
                     "arg_error")
SWEEP_HEADER = ("family", "noise_kind", "n", "grid_param_name", "grid_value",
                "seed", "plateau_error_f", "final_error_x", "status")
FITS_HEADER = ("family", "model", "coef0", "coef1", "coef2", "r_squared",
               "loglog_slope")
COMPARE_HEADER = ("solver", "seed", "iter", "f_scaled")


# ---------------------------------------------------------------------------
# plateau estimation


def cesaro_mean(values) -> np.ndarray:
    """Running arithmetic means s_k = (v_0 + ... + v_k) / (k + 1)."""
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("need a nonempty 1-D sequence")
    return np.cumsum(v) / np.arange(1, v.size + 1)


def trailing_mean(values, window: int) -> np.ndarray:
    """Mean over the trailing `window` entries (shorter at the start)."""
    v = np.asarray(values, dtype=float)
    if window < 1:
        raise ValueError("window must be >= 1")
    csum = np.concatenate([[0.0], np.cumsum(v)])
    idx = np.arange(1, v.size + 1)
    lo = np.maximum(0, idx - window)
    return (csum[idx] - csum[lo]) / (idx - lo)


def estimate_asymptote(trace, tail_fraction: float = 0.2,
                       min_records: int = 10) -> float:
    """Arithmetic mean of f over the trailing `tail_fraction` of the records.

    Estimates the Cesaro-sense limit f(x*_noisy) of the true objective along
    the noisy iterate sequence. Traces shorter than `min_records` are refused.
    """
    values = trace.f_true if isinstance(trace, SolverTrace) else np.asarray(trace, float)
    if not 0 < tail_fraction < 1:
        raise ValueError("tail_fraction must lie in (0, 1)")
    m = len(values)
    if m < min_records:
        raise ValueError(f"trace too short: {m} records < {min_records}")
    count = max(1, int(m * tail_fraction))
    return float(np.mean(values[m - count:]))


def accumulation_ratio(scaled_suboptimality) -> float:
    """Quarter-based boundedness check on the Cesaro means.

    Returns max(smoothed values over the final quarter) / min(smoothed values
    over the second quarter). Values near or below 1 mean the smoothed error
    is not growing; accumulation drives the ratio up without bound.
    """
    s = cesaro_mean(scaled_suboptimality)
    m = s.size
    if m < 8:
        raise ValueError("need at least 8 records for the quarter ratio")
    lo = float(s[m // 4: m // 2].min())
    hi = float(s[(3 * m) // 4:].max())
    if lo <= 0.0:
        return 1.0 if hi <= 0.0 else float("inf")
    return hi / lo


def plateau_ratio(f_true, tail_fraction: float = 0.2) -> float:
    """Tail max of the window-smoothed objective over the plateau estimate.

    Near 1 when the trajectory has settled on its asymptote; a trajectory
    still moving in the final quarter pushes the ratio away from 1.
    """
    values = np.asarray(f_true, dtype=float)
    plateau = estimate_asymptote(values, tail_fraction)
    window = max(1, int(values.size * tail_fraction))
    s = trailing_mean(values, window)
    hi = float(s[(3 * s.size) // 4:].max())
    if plateau == 0.0:
        return 1.0 if hi == 0.0 else float("inf")
    return hi / plateau


# ---------------------------------------------------------------------------
# least-squares fits


@dataclass(frozen=True)
class FitReport:
    """OLS fit summary; coefficients are in the model's natural order.

    linear_origin: (slope,); affine: (intercept, slope);
    quadratic: (c0, c1, c2); loglog: (amplitude, exponent) for y = a * x**p,
    fitted and scored in log space.
    """

    model: str
    coefficients: tuple
    r_squared: float
    loglog_slope: float | None = None
    status: str = "ok"
    label: str = ""

    def predict(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        c = self.coefficients
        if self.model == FIT_LINEAR_ORIGIN:
            return c[0] * xs
        if self.model == FIT_AFFINE:
            return c[0] + c[1] * xs
        if self.model == FIT_QUADRATIC:
            return c[0] + c[1] * xs + c[2] * xs ** 2
        if self.model == FIT_LOGLOG:
            return c[0] * xs ** c[1]
        raise ValueError(f"unknown fit model {self.model!r}")


def _r_squared(y, y_hat) -> float:
    ss_res = float(np.sum((y - y_hat) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    if ss_tot == 0.0:
        return 1.0 if ss_res <= 1e-30 else 0.0
    return 1.0 - ss_res / ss_tot


def fit_least_squares(xs, ys, model: str, label: str = "") -> FitReport:
    """Ordinary least squares for the chosen model with r^2 = 1 - SSres/SStot.

    A zero-spread grid is flagged "insufficient_spread" and rank-deficient
    normal equations "degenerate"; both carry NaN coefficients rather than
    raising, so sweep results can still be reported.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise ValueError("xs and ys must be 1-D arrays of equal length")
    n_coef = {FIT_LINEAR_ORIGIN: 1, FIT_AFFINE: 2, FIT_QUADRATIC: 3,
              FIT_LOGLOG: 2}[model]
    if xs.size < max(2, n_coef):
        raise ValueError(f"{model} fit needs at least {max(2, n_coef)} points")

    def _flagged(status):
        coefs = tuple(float("nan") for _ in range(n_coef))
        slope = float("nan") if model == FIT_LOGLOG else None
        return FitReport(model=model, coefficients=coefs,
                         r_squared=float("nan"), loglog_slope=slope,
                         status=status, label=label)

    if float(np.ptp(xs)) == 0.0:
        return _flagged("insufficient_spread")

    if model == FIT_LOGLOG:
        if np.any(xs <= 0) or np.any(ys <= 0):
            raise ValueError("log-log fit requires strictly positive data")
        lx, ly = np.log(xs), np.log(ys)
        design = np.column_stack([np.ones_like(lx), lx])
        coef, _, rank, _ = np.linalg.lstsq(design, ly, rcond=None)
        if rank < 2:
            return _flagged("degenerate")
        r2 = _r_squared(ly, design @ coef)
        return FitReport(model=model,
                         coefficients=(float(np.exp(coef[0])), float(coef[1])),
                         r_squared=r2, loglog_slope=float(coef[1]), label=label)

    if model == FIT_LINEAR_ORIGIN:
        design = xs.reshape(-1, 1)
    elif model == FIT_AFFINE:
        design = np.column_stack([np.ones_like(xs), xs])
    else:
        design = np.column_stack([np.ones_like(xs), xs, xs ** 2])
    coef, _, rank, _ = np.linalg.lstsq(design, ys, rcond=None)
    if rank < design.shape[1]:
        return _flagged("degenerate")
    r2 = _r_squared(ys, design @ coef)
    return FitReport(model=model, coefficients=tuple(float(c) for c in coef),
                     r_squared=r2, label=label)


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved description of one experiment run."""

    family: str
    n: int
    spectrum: SpectrumSpec
    representation: str = "diagonal"
    noise_kind: str = "exact"
    r_values: tuple = (1.0,)
    delta_a_values: tuple = (0.0,)
    delta_b_values: tuple = (0.0,)
    budget: float = 5.0
    seeds: tuple = (1, 2, 3, 4, 5)
    tail_fraction: float = 0.2
    matrix_resample: str = FIXED_PER_RUN
    redraw_magnitudes: bool = True
    operator_seed: int = 7
    workers: int | None = None
    output: str | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.noise_kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.noise_kind!r}")
        if self.representation not in ("diagonal", "dense"):
            raise ValueError(f"unknown representation {self.representation!r}")
        for name in ("r_values", "delta_a_values", "delta_b_values", "seeds"):
            vals = tuple(getattr(self, name))
            object.__setattr__(self, name, vals)
            if len(vals) == 0:
                raise ValueError(f"{name} must be nonempty")
            if name != "seeds" and any(v < 0 for v in vals):
                raise ValueError(f"{name} must be nonnegative")
        if not self.budget > 0:
            raise ValueError("budget must be > 0")
        if not 0 < self.tail_fraction < 1:
            raise ValueError("tail_fraction must lie in (0, 1)")

    @property
    def iteration_budget(self) -> int:
        return max(1, int(round(self.budget * self.n)))


def build_operator(config: ExperimentConfig) -> Operator:
    eigs = make_spectrum(config.spectrum)
    if config.representation == "dense":
        return make_dense_spd(eigs, seed=config.operator_seed)
    return DiagonalOperator(eigs)


def make_noise_model(kind: str, delta_a: float, delta_b: float, seed: int,
                     resample: str = FIXED_PER_RUN,
                     redraw_magnitudes: bool = True) -> NoiseModel:
    if kind == "exact":
        return ExactOracle(seed=seed)
    if kind == "adversarial_b":
        return AdversarialVectorNoise(delta_b=delta_b, seed=seed,
                                      redraw_magnitudes=redraw_magnitudes)
    if kind == "stochastic_b":
        return StochasticVectorNoise(delta_b=delta_b, seed=seed,
                                     redraw_magnitudes=redraw_magnitudes)
    if kind == "matrix":
        return MatrixNoise(delta_a=delta_a, seed=seed, resample=resample)
    if kind in ("combined_adversarial", "combined_stochastic"):
        vector_cls = (AdversarialVectorNoise if kind == "combined_adversarial"
                      else StochasticVectorNoise)
        return CombinedNoise(
            matrix=MatrixNoise(delta_a=delta_a, seed=seed, resample=resample),
            vector=vector_cls(delta_b=delta_b, seed=seed,
                              redraw_magnitudes=redraw_magnitudes))
    raise ValueError(f"unknown noise kind {kind!r}")


def _delta_pairs(config: ExperimentConfig) -> list[tuple[float, float]]:
    """(delta_a, delta_b) combinations implied by the noise kind."""
    kind = config.noise_kind
    if kind == "exact":
        return [(0.0, 0.0)]
    if kind in ("adversarial_b", "stochastic_b"):
        return [(0.0, db) for db in config.delta_b_values]
    if kind == "matrix":
        return [(da, 0.0) for da in config.delta_a_values]
    return [(da, db) for da in config.delta_a_values
            for db in config.delta_b_values]


def resolve_workers(config: ExperimentConfig) -> int:
    if config.workers is not None:
        return max(1, config.workers)
    env = os.environ.get("NOISY_CG_WORKERS", "").strip()
    if env:
        return max(1, int(env))
    return 1


def _run_pool(fn, tasks, workers: int) -> list:
    """Apply fn to tasks, preserving task order in the result list."""
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


# ---------------------------------------------------------------------------
# trajectory family


@dataclass(frozen=True)
class TrajectoryRun:
    run_id: str
    seed: int
    delta_a: float
    delta_b: float
    r: float
    status: str
    plateau: float
    plateau_error: float
    plateau_ratio: float
    accumulation_ratio: float
    final_x_error: float
    trace: SolverTrace


@dataclass(frozen=True)
class TrajectoryResult:
    config: ExperimentConfig
    runs: tuple

    def csv_rows(self):
        cfg = self.config
        for run in self.runs:
            t = run.trace
            for j in range(len(t.k)):
                yield (run.run_id, run.seed, cfg.noise_kind, cfg.n,
                       run.delta_a, run.delta_b, run.r, int(t.k[j]),
                       float(t.f_true[j]), float(t.f_scaled[j]),
                       float(t.residual_norm[j]), float(t.arg_error[j]))

    def summary_lines(self):
        for run in self.runs:
            yield (f"{run.run_id}: status={run.status} plateau={run.plateau:.6g} "
                   f"plateau_error={run.plateau_error:.6g} "
                   f"accumulation_ratio={run.accumulation_ratio:.4g}")


def _run_id(kind, delta_a, delta_b, r, seed):
    return f"{kind}-da{delta_a:g}-db{delta_b:g}-r{r:g}-s{seed}"


def run_trajectory(config: ExperimentConfig) -> TrajectoryResult:
    """Full-budget runs (no early stopping) with plateau and ratio report."""
    operator = build_operator(config)
    n_iter = config.iteration_budget
    tasks = [(da, db, r, seed) for (da, db) in _delta_pairs(config)
             for r in config.r_values for seed in config.seeds]

    def one(task):
        da, db, r, seed = task
        problem = make_problem(operator, r, seed)
        model = make_noise_model(config.noise_kind, da, db, seed,
                                 config.matrix_resample,
                                 config.redraw_magnitudes)
        trace = cg_solve(problem, model, stop=None, n_max=n_iter)
        plateau = estimate_asymptote(trace, config.tail_fraction)
        return TrajectoryRun(
            run_id=_run_id(config.noise_kind, da, db, r, seed),
            seed=seed, delta_a=da, delta_b=db, r=r, status=trace.status,
            plateau=plateau,
            plateau_error=abs(plateau - problem.f_star),
            plateau_ratio=plateau_ratio(trace.f_true, config.tail_fraction),
            accumulation_ratio=accumulation_ratio(trace.f_scaled),
            final_x_error=trace.final_x_error,
            trace=trace)

    runs = _run_pool(one, tasks, resolve_workers(config))
    return TrajectoryResult(config=config, runs=tuple(runs))


# ---------------------------------------------------------------------------
# sweep families


@dataclass(frozen=True)
class SweepResult:
    """Measured plateau errors over one grid, with per-seed detail and fits."""

    family: str
    noise_kind: str
    n: int
    grid_param: str
    grid: tuple
    error_mean: tuple
    error_std: tuple
    arg_error_mean: tuple
    arg_error_std: tuple
    fits: tuple
    label: str
    cells: tuple  # (grid_value, seed, plateau_error_f, final_error_x, status)

    def csv_rows(self):
        for cell in self.cells:
            grid_value, seed, err_f, err_x, status = cell
            yield (self.family, self.noise_kind, self.n, self.grid_param,
                   grid_value, seed, err_f, err_x, status)

    def fit_rows(self):
        for fit in self.fits:
            coefs = list(fit.coefficients)[:3]
            coefs += [""] * (3 - len(coefs))
            yield (f"{self.label}:{fit.label}", fit.model, *coefs,
                   fit.r_squared,
                   "" if fit.loglog_slope is None else fit.loglog_slope)

    def summary_lines(self):
        for fit in self.fits:
            slope = ("" if fit.loglog_slope is None
                     else f" loglog_slope={fit.loglog_slope:.4g}")
            yield (f"{self.label}:{fit.label} model={fit.model} "
                   f"coefficients={tuple(round(c, 8) if isinstance(c, float) else c for c in fit.coefficients)} "
                   f"r2={fit.r_squared:.6g}{slope} status={fit.status}")


def _measure_plateau(problem: QuadraticProblem, model: NoiseModel,
                     n_iter: int, tail_fraction: float):
    trace = cg_solve(problem, model, stop=None, n_max=n_iter)
    plateau = estimate_asymptote(trace, tail_fraction)
    return (abs(plateau - problem.f_star), trace.final_x_error, trace.status)


def _aggregate(values_by_point):
    means = tuple(float(np.mean(v)) for v in values_by_point)
    stds = tuple(float(np.std(v)) for v in values_by_point)
    return means, stds


def sweep_delta(config: ExperimentConfig) -> list[SweepResult]:
    """Plateau error versus noise magnitude; one SweepResult per solution size."""
    if config.noise_kind == "matrix":
        grid = tuple(config.delta_a_values)
        grid_param = "delta_a"
    else:
        grid = tuple(config.delta_b_values)
        grid_param = "delta_b"
    if len(grid) < 2:
        raise ValueError("delta sweep needs a grid of at least 2 points")
    operator = build_operator(config)
    n_iter = config.iteration_budget
    workers = resolve_workers(config)

    results = []
    for r in config.r_values:
        problems = {seed: make_problem(operator, r, seed) for seed in config.seeds}
        tasks = [(delta, seed) for delta in grid for seed in config.seeds]

        def one(task):
            delta, seed = task
            da, db = (delta, 0.0) if grid_param == "delta_a" else (0.0, delta)
            if config.noise_kind.startswith("combined"):
                da = config.delta_a_values[0]
            model = make_noise_model(config.noise_kind, da, db, seed,
                                     config.matrix_resample,
                                     config.redraw_magnitudes)
            return _measure_plateau(problems[seed], model, n_iter,
                                    config.tail_fraction)

        measured = _run_pool(one, tasks, workers)
        cells = tuple((delta, seed, *m) for (delta, seed), m in zip(tasks, measured))
        err_by_point = [[m[0] for (d, s), m in zip(tasks, measured) if d == delta]
                        for delta in grid]
        arg_by_point = [[m[1] for (d, s), m in zip(tasks, measured) if d == delta]
                        for delta in grid]
        error_mean, error_std = _aggregate(err_by_point)
        arg_mean, arg_std = _aggregate(arg_by_point)
        fits = (
            fit_least_squares(grid, error_mean, FIT_AFFINE, label="f_error"),
            fit_least_squares(grid, arg_mean, FIT_AFFINE, label="x_error"),
        )
        label = f"delta:{config.noise_kind}:n={config.n}:r={r:g}"
        results.append(SweepResult(
            family="delta", noise_kind=config.noise_kind, n=config.n,
            grid_param=grid_param, grid=grid,
            error_mean=error_mean, error_std=error_std,
            arg_error_mean=arg_mean, arg_error_std=arg_std,
            fits=fits, label=label, cells=cells))
    return results


def sweep_r(config: ExperimentConfig) -> list[SweepResult]:
    """Plateau error versus solution size; one SweepResult per delta pair.

    R = 0 grid points are run and reported but excluded from the power-law
    fit, which needs strictly positive data.
    """
    grid = tuple(config.r_values)
    if len(grid) < 2:
        raise ValueError("R sweep needs a grid of at least 2 points")
    operator = build_operator(config)
    n_iter = config.iteration_budget
    workers = resolve_workers(config)

    results = []
    for da, db in _delta_pairs(config):
        tasks = [(r, seed) for r in grid for seed in config.seeds]

        def one(task):
            r, seed = task
            problem = make_problem(operator, r, seed)
            model = make_noise_model(config.noise_kind, da, db, seed,
                                     config.matrix_resample,
                                     config.redraw_magnitudes)
            return _measure_plateau(problem, model, n_iter,
                                    config.tail_fraction)

        measured = _run_pool(one, tasks, workers)
        cells = tuple((r, seed, *m) for (r, seed), m in zip(tasks, measured))
        err_by_point = [[m[0] for (r, s), m in zip(tasks, measured) if r == rv]
                        for rv in grid]
        arg_by_point = [[m[1] for (r, s), m in zip(tasks, measured) if r == rv]
                        for rv in grid]
        error_mean, error_std = _aggregate(err_by_point)
        arg_mean, arg_std = _aggregate(arg_by_point)

        fits = [
            fit_least_squares(grid, error_mean, FIT_QUADRATIC, label="f_error"),
            fit_least_squares(grid, error_mean, FIT_AFFINE, label="f_error"),
        ]
        positive = [(rv, e) for rv, e in zip(grid, error_mean) if rv > 0 and e > 0]
        if len(set(rv for rv, _ in positive)) >= 2:
            xs = np.array([rv for rv, _ in positive])
            ys = np.array([e for _, e in positive])
            fits.append(fit_least_squares(xs, ys, FIT_LOGLOG, label="f_error"))
        else:
            fits.append(FitReport(model=FIT_LOGLOG,
                                  coefficients=(float("nan"), float("nan")),
                                  r_squared=float("nan"),
                                  loglog_slope=float("nan"),
                                  status="insufficient_spread",
                                  label="f_error"))
        label = f"r:{config.noise_kind}:n={config.n}:da={da:g}:db={db:g}"
        results.append(SweepResult(
            family="r", noise_kind=config.noise_kind, n=config.n,
            grid_param="r", grid=grid,
            error_mean=error_mean, error_std=error_std,
            arg_error_mean=arg_mean, arg_error_std=arg_std,
            fits=tuple(fits), label=label, cells=cells))
    return results


# ---------------------------------------------------------------------------
# CG vs Nesterov


@dataclass(frozen=True)
class CompareRun:
    seed: int
    cg_plateau_scaled: float
    cg_entry_iteration: int
    nesterov_entry_iteration: int
    nesterov_entered: bool
    cg_trace: SolverTrace
    nesterov_trace: SolverTrace


@dataclass(frozen=True)
class CompareResult:
    config: ExperimentConfig
    runs: tuple

    def csv_rows(self):
        for run in self.runs:
            for solver, trace in (("cg", run.cg_trace),
                                  ("nesterov", run.nesterov_trace)):
                for j in range(len(trace.k)):
                    yield (solver, run.seed, int(trace.k[j]),
                           float(trace.f_scaled[j]))

    def summary_lines(self):
        for run in self.runs:
            suffix = "" if run.nesterov_entered else " (censored at budget)"
            yield (f"seed={run.seed}: cg_entry={run.cg_entry_iteration} "
                   f"nesterov_entry={run.nesterov_entry_iteration}{suffix} "
                   f"cg_plateau_scaled={run.cg_plateau_scaled:.6g}")


def entry_iteration(f_scaled, level: float, window: int = 1) -> tuple[int, bool]:
    """Iteration from which the smoothed trajectory settles in the plateau band.

    The band is read on the log axis the trajectory plots use: settled means
    the trailing-window mean of the scaled suboptimality stays at or below
    level**0.9 (at least 90% of the log-depth down to the plateau) for the
    rest of the run. Returns (iteration, entered); runs that never settle are
    censored at the final iteration, a lower bound on the true entry.
    """
    p = max(float(level), 1e-16)
    threshold = p ** 0.9 if p < 1.0 else 1.1 * p
    smoothed = trailing_mean(f_scaled, window)
    above = np.nonzero(smoothed > threshold)[0]
    if above.size == 0:
        return 0, True
    k = int(above[-1]) + 1
    if k >= smoothed.size:
        return smoothed.size - 1, False
    return k, True


def compare_nesterov(config: ExperimentConfig) -> CompareResult:
    """CG and Nesterov on identical problems and noise streams per seed."""
    operator = build_operator(config)
    n_iter = config.iteration_budget
    da, db = _delta_pairs(config)[0]
    r = config.r_values[0]

    def one(seed):
        problem = make_problem(operator, r, seed)
        cg_trace = cg_solve(
            problem,
            make_noise_model(config.noise_kind, da, db, seed,
                             config.matrix_resample, config.redraw_magnitudes),
            stop=None, n_max=n_iter)
        nes_trace = nesterov_solve(
            problem,
            make_noise_model(config.noise_kind, da, db, seed,
                             config.matrix_resample, config.redraw_magnitudes),
            n_max=n_iter)
        plateau_scaled = estimate_asymptote(cg_trace.f_scaled,
                                            config.tail_fraction,
                                            min_records=2)
        window = max(1, n_iter // 20)
        cg_entry, _ = entry_iteration(cg_trace.f_scaled, plateau_scaled, window)
        nes_entry, nes_entered = entry_iteration(nes_trace.f_scaled,
                                                 plateau_scaled, window)
        return CompareRun(seed=seed, cg_plateau_scaled=plateau_scaled,
                          cg_entry_iteration=cg_entry,
                          nesterov_entry_iteration=nes_entry,
                          nesterov_entered=nes_entered,
                          cg_trace=cg_trace, nesterov_trace=nes_trace)

    runs = _run_pool(one, list(config.seeds), resolve_workers(config))
    return CompareResult(config=config, runs=tuple(runs))


# ---------------------------------------------------------------------------
# CSV persistence


def _format_cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_format_cell(v) for v in row) + "\n")


def run_experiment(config: ExperimentConfig):
    """Dispatch on the family; returns the family's result object."""
    if config.family == "trajectory":
        return run_trajectory(config)
    if config.family == "sweep-delta":
        return sweep_delta(config)
    if config.family == "sweep-r":
        return sweep_r(config)
    return compare_nesterov(config)


def write_outputs(result, out_dir: str) -> list[str]:
    """Write the CSV artifacts for any family's result; returns filenames."""
    os.makedirs(out_dir, exist_ok=True)
    written = []

    def emit(name, header, rows):
        write_csv(os.path.join(out_dir, name), header, rows)
        written.append(name)

    if isinstance(result, TrajectoryResult):
        emit("trajectory.csv", TRAJECTORY_HEADER, result.csv_rows())
    elif isinstance(result, CompareResult):
        emit("compare.csv", COMPARE_HEADER, result.csv_rows())
    elif isinstance(result, list) and all(isinstance(s, SweepResult) for s in result):
        sweep_rows = [row for sweep in result for row in sweep.csv_rows()]
        fit_rows = [row for sweep in result for row in sweep.fit_rows()]
        emit("sweep.csv", SWEEP_HEADER, sweep_rows)
        emit("fits.csv", FITS_HEADER, fit_rows)
    else:
        raise TypeError(f"unknown result object {type(result)!r}")
    return written


def summary_lines(result) -> list[str]:
    if isinstance(result, (TrajectoryResult, CompareResult)):
        return list(result.summary_lines())
    return [line for sweep in result for line in sweep.summary_lines()]
