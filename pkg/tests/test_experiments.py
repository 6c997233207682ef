import os

import numpy as np
import pytest

from noisycg.experiments import (ExperimentConfig, FIT_AFFINE, FIT_LINEAR_ORIGIN,
                                 FIT_LOGLOG, FIT_QUADRATIC, accumulation_ratio,
                                 cesaro_mean, compare_nesterov, entry_iteration,
                                 estimate_asymptote, fit_least_squares,
                                 plateau_ratio, run_experiment, run_trajectory,
                                 summary_lines, sweep_delta, sweep_r,
                                 trailing_mean, write_outputs)
from noisycg.linops import (DiagonalOperator, SpectrumSpec, make_problem,
                            make_spectrum)
from noisycg.noise import ExactOracle
from noisycg.solvers import cg_solve


def ols_affine_by_hand(xs, ys):
    """Closed-form simple regression; independent of the library fit."""
    xs = np.asarray(xs, float)
    ys = np.asarray(ys, float)
    n = xs.size
    sx, sy = xs.sum(), ys.sum()
    sxx, sxy = (xs * xs).sum(), (xs * ys).sum()
    slope = (n * sxy - sx * sy) / (n * sxx - sx * sx)
    intercept = (sy - slope * sx) / n
    y_hat = intercept + slope * xs
    ss_res = float(((ys - y_hat) ** 2).sum())
    ss_tot = float(((ys - ys.mean()) ** 2).sum())
    return intercept, slope, 1.0 - ss_res / ss_tot


def fast_spectrum(n=80):
    return make_spectrum(SpectrumSpec(n=n, lambda_max=1.0, decay="geometric",
                                      ratio=0.5, floor=1e-6))


def small_config(**overrides):
    base = dict(
        family="trajectory", n=80,
        spectrum=SpectrumSpec(n=80, lambda_max=1.0, decay="geometric",
                              ratio=0.5, floor=1e-6),
        representation="diagonal", noise_kind="stochastic_b",
        r_values=(50.0,), delta_b_values=(0.05,), budget=3.0,
        seeds=(1, 2))
    base.update(overrides)
    return ExperimentConfig(**base)


class TestAsymptote:
    def test_constant_trace(self):
        assert estimate_asymptote(np.full(20, 3.25)) == 3.25

    def test_tail_mean_example(self):
        values = [1.0, 1.0, 1.0, 1.0, 3.0, 5.0]
        assert estimate_asymptote(values, tail_fraction=1/3,
                                  min_records=6) == pytest.approx(4.0)

    def test_short_trace_rejected(self):
        with pytest.raises(ValueError, match="too short"):
            estimate_asymptote(np.ones(5))

    def test_converged_trace_matches_f_star(self):
        problem = make_problem(DiagonalOperator(fast_spectrum()), 10.0, seed=3)
        trace = cg_solve(problem, ExactOracle(), stop=None, n_max=240)
        est = estimate_asymptote(trace)
        assert est == pytest.approx(problem.f_star,
                                    abs=1e-8 * abs(problem.f_star))

    def test_invalid_tail_fraction(self):
        with pytest.raises(ValueError):
            estimate_asymptote(np.ones(20), tail_fraction=1.0)


class TestSmoothing:
    def test_cesaro_running_means(self):
        np.testing.assert_allclose(cesaro_mean([2.0, 4.0, 6.0]),
                                   [2.0, 3.0, 4.0])

    def test_trailing_mean_window(self):
        out = trailing_mean([1.0, 2.0, 3.0, 4.0], 2)
        np.testing.assert_allclose(out, [1.0, 1.5, 2.5, 3.5])

    def test_accumulation_ratio_flat(self):
        values = np.concatenate([[1.0], np.zeros(99)])
        assert accumulation_ratio(values) < 1.0

    def test_accumulation_ratio_detects_growth(self):
        values = np.linspace(0.0, 10.0, 200)  # error growing linearly
        assert accumulation_ratio(values) > 2.0

    def test_accumulation_ratio_all_zero(self):
        assert accumulation_ratio(np.zeros(40)) == 1.0

    def test_plateau_ratio_converged(self):
        values = np.concatenate([np.linspace(0.0, -99.9, 50),
                                 np.full(350, -100.0)])
        assert plateau_ratio(values) == pytest.approx(1.0, abs=1e-3)

    def test_entry_iteration_settles(self):
        values = np.concatenate([np.linspace(1.0, 0.011, 40),
                                 np.full(160, 0.01)])
        k, entered = entry_iteration(values, 0.01, window=1)
        assert entered and 0 < k <= 41

    def test_entry_iteration_censored(self):
        values = np.full(50, 0.5)
        k, entered = entry_iteration(values, 1e-6, window=1)
        assert not entered and k == 49


class TestFits:
    def test_exact_linear(self):
        xs = np.array([1.0, 2.0, 3.0, 4.0])
        fit = fit_least_squares(xs, 3.0 * xs, FIT_LINEAR_ORIGIN)
        assert fit.coefficients[0] == pytest.approx(3.0, abs=1e-12)
        assert fit.r_squared == pytest.approx(1.0, abs=1e-12)

    def test_exact_power_law(self):
        xs = np.array([1.0, 2.0, 3.0, 4.0])
        fit = fit_least_squares(xs, xs ** 2, FIT_LOGLOG)
        assert fit.loglog_slope == pytest.approx(2.0, abs=1e-10)
        assert fit.r_squared == pytest.approx(1.0, abs=1e-10)

    def test_noisy_linear_matches_hand_formulas(self):
        rng = np.random.default_rng(17)
        xs = np.linspace(0.5, 10.0, 20)
        ys = 2.0 * xs
        ys = ys + rng.uniform(-0.01, 0.01, size=20) * ys.max()
        fit = fit_least_squares(xs, ys, FIT_AFFINE)
        intercept, slope, r2 = ols_affine_by_hand(xs, ys)
        assert 1.9 <= fit.coefficients[1] <= 2.1
        assert fit.r_squared >= 0.99
        assert fit.coefficients[0] == pytest.approx(intercept, abs=1e-10)
        assert fit.coefficients[1] == pytest.approx(slope, abs=1e-12)
        assert fit.r_squared == pytest.approx(r2, abs=1e-12)

    def test_exact_quadratic_r2(self):
        xs = np.linspace(1.0, 5.0, 7)
        fit = fit_least_squares(xs, 1.5 - 2.0 * xs + 0.5 * xs ** 2,
                                FIT_QUADRATIC)
        assert fit.r_squared == pytest.approx(1.0, abs=1e-10)
        np.testing.assert_allclose(fit.coefficients, (1.5, -2.0, 0.5),
                                   atol=1e-9)

    def test_zero_spread_flagged(self):
        fit = fit_least_squares([2.0, 2.0, 2.0], [1.0, 2.0, 3.0], FIT_AFFINE)
        assert fit.status == "insufficient_spread"
        assert np.isnan(fit.r_squared)

    def test_loglog_rejects_nonpositive(self):
        with pytest.raises(ValueError, match="positive"):
            fit_least_squares([0.0, 1.0], [1.0, 2.0], FIT_LOGLOG)

    def test_predict_roundtrip(self):
        xs = np.array([1.0, 2.0, 4.0])
        fit = fit_least_squares(xs, 5.0 * xs ** 1.5, FIT_LOGLOG)
        np.testing.assert_allclose(fit.predict(xs), 5.0 * xs ** 1.5,
                                   rtol=1e-8)


class TestTrajectoryFamily:
    def test_exact_plateau_and_ratios(self):
        config = small_config(noise_kind="exact", delta_b_values=(0.0,))
        result = run_trajectory(config)
        assert len(result.runs) == 2
        for run in result.runs:
            assert run.plateau_error <= 1e-8 * max(1.0, abs(run.plateau))
            assert run.plateau_ratio == pytest.approx(1.0, abs=1e-3)
            assert run.accumulation_ratio <= 2.0

    def test_noisy_runs_bounded(self):
        result = run_trajectory(small_config())
        for run in result.runs:
            assert run.accumulation_ratio <= 2.0
            assert run.plateau_error >= 0.0

    def test_csv_rows_schema(self):
        result = run_trajectory(small_config(seeds=(1,)))
        rows = list(result.csv_rows())
        budget = small_config().iteration_budget
        assert len(rows) == len(result.runs[0].trace.k)
        assert rows[0][7] == 0 and rows[-1][7] <= budget


class TestSweepFamilies:
    def test_all_zero_grid(self):
        config = small_config(family="sweep-delta",
                              delta_b_values=(0.0, 0.0, 0.0, 0.0, 0.0))
        result = sweep_delta(config)[0]
        problem = make_problem(DiagonalOperator(fast_spectrum()), 50.0, seed=1)
        tol = 1e-8 * max(1.0, abs(problem.f_star))
        assert all(e <= tol for e in result.error_mean)
        # a spreadless grid cannot support a slope estimate; it is flagged
        # rather than reported as an arbitrary number
        assert result.fits[0].status == "insufficient_spread"

    def test_zero_noise_baseline(self):
        config = small_config(
            family="sweep-delta", noise_kind="stochastic_b",
            delta_b_values=(0.0, 0.005, 0.01, 0.015, 0.02))
        result = sweep_delta(config)[0]
        problem = make_problem(DiagonalOperator(fast_spectrum()), 50.0, seed=1)
        assert result.grid[0] == 0.0
        assert result.error_mean[0] <= 1e-8 * max(1.0, abs(problem.f_star))

    def test_monotone_sensitivity(self):
        # statistical: mean plateau error nondecreasing in delta, allowing
        # one inversion per 10 grid points
        config = small_config(
            family="sweep-delta", noise_kind="stochastic_b",
            delta_b_values=(0.0, 0.01, 0.02, 0.04, 0.08),
            seeds=(1, 2, 3, 4, 5))
        result = sweep_delta(config)[0]
        diffs = np.diff(result.error_mean)
        assert np.sum(diffs < 0) <= 1

    def test_delta_sweep_shapes_and_fit(self):
        config = small_config(
            family="sweep-delta",
            delta_b_values=(0.0, 0.01, 0.02, 0.03, 0.04))
        result = sweep_delta(config)[0]
        assert len(result.grid) == 5
        assert len(result.error_mean) == 5
        assert len(result.cells) == 10
        assert {fit.label for fit in result.fits} == {"f_error", "x_error"}

    def test_r_sweep_degenerate_grid_flagged(self):
        config = small_config(family="sweep-r", r_values=(5.0, 5.0, 5.0))
        result = sweep_r(config)[0]
        loglog = [f for f in result.fits if f.model == FIT_LOGLOG][0]
        assert loglog.status == "insufficient_spread"
        assert all(e >= 0 for e in result.error_mean)

    def test_r_sweep_zero_rows_kept_out_of_power_fit(self):
        config = small_config(family="sweep-r",
                              r_values=(0.0, 2.0, 4.0, 8.0, 16.0),
                              seeds=(1,))
        result = sweep_r(config)[0]
        assert result.grid[0] == 0.0
        loglog = [f for f in result.fits if f.model == FIT_LOGLOG][0]
        assert loglog.status == "ok"


class TestCompareFamily:
    def test_identity_comparison_well_defined(self):
        config = ExperimentConfig(
            family="compare", n=12,
            spectrum=SpectrumSpec(n=12, lambda_max=1.0, decay="geometric",
                                  ratio=0.999999, floor=0.999998),
            representation="diagonal", noise_kind="exact",
            r_values=(3.0,), budget=4.0, seeds=(1, 2))
        result = compare_nesterov(config)
        for run in result.runs:
            assert run.cg_entry_iteration <= 5
            assert run.nesterov_entry_iteration <= 10

    def test_csv_rows_cover_both_solvers(self):
        config = small_config(family="compare", seeds=(3,))
        result = compare_nesterov(config)
        solvers = {row[0] for row in result.csv_rows()}
        assert solvers == {"cg", "nesterov"}


class TestOutputs:
    def test_write_outputs_and_determinism(self, tmp_path):
        config = small_config(seeds=(1,))
        result = run_experiment(config)
        out1 = tmp_path / "a"
        out2 = tmp_path / "b"
        files1 = write_outputs(result, str(out1))
        files2 = write_outputs(run_experiment(config), str(out2))
        assert files1 == files2 == ["trajectory.csv"]
        b1 = (out1 / "trajectory.csv").read_bytes()
        b2 = (out2 / "trajectory.csv").read_bytes()
        assert b1 == b2
        header = b1.decode().splitlines()[0]
        assert header == ("run_id,seed,noise_kind,n,delta_a,delta_b,r,iter,"
                          "f_true,f_scaled,residual_norm,arg_error")

    def test_sweep_outputs_files(self, tmp_path):
        config = small_config(family="sweep-delta",
                              delta_b_values=(0.0, 0.01, 0.02, 0.03, 0.04),
                              seeds=(1,))
        files = write_outputs(run_experiment(config), str(tmp_path))
        assert files == ["sweep.csv", "fits.csv"]
        fits_header = (tmp_path / "fits.csv").read_text().splitlines()[0]
        assert fits_header == "family,model,coef0,coef1,coef2,r_squared,loglog_slope"

    def test_summary_lines_nonempty(self):
        result = run_experiment(small_config(seeds=(1,)))
        lines = summary_lines(result)
        assert lines and all(isinstance(line, str) for line in lines)
