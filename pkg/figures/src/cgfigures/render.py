"""Render figures from noisy-CG experiment CSV files.

Four figure kinds are supported, matching the experiment CSV schemas:

- trajectory: scaled suboptimality vs iteration, one curve per run_id
  (trajectory.csv)
- delta_fit:  plateau error vs noise magnitude with the fitted line
  overlaid exactly as recorded in fits.csv (sweep.csv + fits.csv)
- r_fit:      plateau error vs solution size with the fitted curve
  overlaid exactly as recorded in fits.csv (sweep.csv + fits.csv)
- compare:    CG and Nesterov scaled trajectories side by side (compare.csv)

Figures are regenerated from the CSV files only; nothing is recomputed, and
fit overlays use the coefficients exactly as read from fits.csv.
"""

from __future__ import annotations

import csv
import os
import sys
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

KINDS = ("trajectory", "delta_fit", "r_fit", "compare")

REQUIRED_COLUMNS = {
    "trajectory": ("run_id", "iter", "f_scaled"),
    "delta_fit": ("noise_kind", "grid_param_name", "grid_value", "seed",
                  "plateau_error_f"),
    "r_fit": ("noise_kind", "grid_param_name", "grid_value", "seed",
              "plateau_error_f"),
    "compare": ("solver", "seed", "iter", "f_scaled"),
}
FITS_COLUMNS = ("family", "model", "coef0", "coef1", "coef2", "r_squared",
                "loglog_slope")


class FigureError(RuntimeError):
    """Bad figure spec or CSV input; the message names the problem."""


class MissingInputError(FigureError):
    """The CSVs for this figure kind are not part of the given csv dir."""


@dataclass(frozen=True)
class FigureSpec:
    """One figure to render: kind, inputs, output name, axis scaling."""

    kind: str
    input: str
    output: str
    fits: str | None = None
    fit_family: str | None = None
    fit_model: str | None = None
    xscale: str = "log"
    yscale: str = "log"
    title: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise FigureError(f"unknown figure kind {self.kind!r}")
        if self.kind in ("delta_fit", "r_fit") and not self.fits:
            raise FigureError(f"{self.kind} needs a `fits` CSV")


@dataclass
class RenderResult:
    """What was drawn: output path, fit overlay as read, plotted series."""

    path: str
    overlay: dict = field(default_factory=dict)
    series: dict = field(default_factory=dict)


def load_spec(path: str) -> FigureSpec:
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise FigureError(f"{path}:{lineno}: expected key = value")
            key, _, raw = line.partition("=")
            values[key.strip()] = raw.strip()
    try:
        return FigureSpec(**values)
    except TypeError as exc:
        raise FigureError(f"{path}: {exc}") from None


def read_csv(path: str, required) -> list[dict]:
    if not os.path.exists(path):
        raise MissingInputError(f"input CSV not found: {path}")
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            columns = reader.fieldnames or []
            missing = [name for name in required if name not in columns]
            if missing:
                raise FigureError(
                    f"{os.path.basename(path)} is missing columns: "
                    f"{', '.join(missing)}")
            return list(reader)
    except OSError as exc:
        raise FigureError(str(exc)) from None


def _floats(rows, column):
    return np.array([float(row[column]) for row in rows])


def select_fit(fits_rows, spec: FigureSpec) -> dict:
    """The fits.csv row the overlay uses, coefficients exactly as read."""
    for row in fits_rows:
        if spec.fit_family and row["family"] != spec.fit_family:
            continue
        if spec.fit_model and row["model"] != spec.fit_model:
            continue
        coefficients = tuple(float(row[name]) for name in
                             ("coef0", "coef1", "coef2") if row[name] != "")
        return {"family": row["family"], "model": row["model"],
                "coefficients": coefficients,
                "r_squared": float(row["r_squared"]),
                "loglog_slope": (float(row["loglog_slope"])
                                 if row["loglog_slope"] != "" else None)}
    # a fits.csv without any row of the requested model belongs to a
    # different sweep family; batch rendering treats that as absent input
    raise MissingInputError(
        f"no fits.csv row matches family={spec.fit_family!r} "
        f"model={spec.fit_model!r}")


def predict(model: str, coefficients, xs: np.ndarray) -> np.ndarray:
    if model == "linear_origin":
        return coefficients[0] * xs
    if model == "affine":
        return coefficients[0] + coefficients[1] * xs
    if model == "quadratic":
        return coefficients[0] + coefficients[1] * xs + coefficients[2] * xs ** 2
    if model == "loglog":
        return coefficients[0] * xs ** coefficients[1]
    raise FigureError(f"unknown fit model {model!r}")


def _new_axes(spec: FigureSpec):
    fig, ax = plt.subplots(figsize=(7.0, 4.6))
    if spec.title:
        ax.set_title(spec.title)
    return fig, ax


def _finish(fig, ax, spec: FigureSpec, out_dir: str,
            result: RenderResult) -> RenderResult:
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(loc="best", fontsize=8)
    path = os.path.join(out_dir, spec.output)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    result.path = path
    return result


def _render_trajectory(spec, csv_dir, out_dir):
    rows = read_csv(os.path.join(csv_dir, spec.input),
                    REQUIRED_COLUMNS["trajectory"])
    result = RenderResult(path="")
    fig, ax = _new_axes(spec)
    by_run: dict[str, list] = {}
    for row in rows:
        by_run.setdefault(row["run_id"], []).append(row)
    for run_id, run_rows in by_run.items():
        iters = _floats(run_rows, "iter")
        values = _floats(run_rows, "f_scaled")
        keep = iters >= 1 if spec.xscale == "log" else np.ones_like(iters, bool)
        ax.plot(iters[keep], np.maximum(values[keep], 1e-300),
                lw=0.9, label=run_id)
        result.series[run_id] = (iters[keep], values[keep])
    ax.set_xscale(spec.xscale)
    ax.set_yscale(spec.yscale)
    ax.set_xlabel("iteration")
    ax.set_ylabel("scaled suboptimality")
    return _finish(fig, ax, spec, out_dir, result)


def _render_sweep_fit(spec, csv_dir, out_dir):
    rows = read_csv(os.path.join(csv_dir, spec.input),
                    REQUIRED_COLUMNS[spec.kind])
    fits_rows = read_csv(os.path.join(csv_dir, spec.fits), FITS_COLUMNS)
    overlay = select_fit(fits_rows, spec)
    result = RenderResult(path="", overlay=overlay)

    fig, ax = _new_axes(spec)
    xs = _floats(rows, "grid_value")
    ys = _floats(rows, "plateau_error_f")
    ax.scatter(xs, ys, s=12, alpha=0.7, label="measured")
    result.series["measured"] = (xs, ys)

    positive = xs[xs > 0]
    lo = positive.min() if positive.size else 1.0
    line_x = np.linspace(xs.min(), xs.max(), 200)
    if overlay["model"] == "loglog":
        line_x = np.geomspace(lo, xs.max(), 200)
    line_y = predict(overlay["model"], overlay["coefficients"], line_x)
    label = (f"{overlay['model']} fit, r^2 = {overlay['r_squared']:.3f}")
    ax.plot(line_x, line_y, color="tab:red", lw=1.5, label=label)
    result.series["fit"] = (line_x, line_y)

    grid_name = rows[0]["grid_param_name"] if rows else "grid"
    ax.set_xlabel(grid_name)
    ax.set_ylabel("plateau error |f - f*|")
    if spec.kind == "r_fit":
        ax.set_xscale(spec.xscale)
        ax.set_yscale(spec.yscale)
    else:
        ax.set_xscale("linear")
        ax.set_yscale("linear")
    return _finish(fig, ax, spec, out_dir, result)


def _render_compare(spec, csv_dir, out_dir):
    rows = read_csv(os.path.join(csv_dir, spec.input),
                    REQUIRED_COLUMNS["compare"])
    result = RenderResult(path="")
    fig, ax = _new_axes(spec)
    for solver, color in (("cg", "tab:blue"), ("nesterov", "tab:orange")):
        solver_rows = [row for row in rows if row["solver"] == solver]
        by_seed: dict[str, list] = {}
        for row in solver_rows:
            by_seed.setdefault(row["seed"], []).append(row)
        for index, (seed, seed_rows) in enumerate(sorted(by_seed.items())):
            iters = _floats(seed_rows, "iter")
            values = _floats(seed_rows, "f_scaled")
            keep = iters >= 1 if spec.xscale == "log" else np.ones_like(iters, bool)
            ax.plot(iters[keep], np.maximum(values[keep], 1e-300), color=color,
                    lw=0.9, alpha=0.8,
                    label=solver if index == 0 else None)
            result.series[f"{solver}:{seed}"] = (iters[keep], values[keep])
    ax.set_xscale(spec.xscale)
    ax.set_yscale(spec.yscale)
    ax.set_xlabel("iteration")
    ax.set_ylabel("scaled suboptimality")
    return _finish(fig, ax, spec, out_dir, result)


def render(spec: FigureSpec, csv_dir: str, out_dir: str) -> RenderResult:
    """Produce the figure for `spec`; returns the path and overlay used."""
    os.makedirs(out_dir, exist_ok=True)
    if spec.kind == "trajectory":
        return _render_trajectory(spec, csv_dir, out_dir)
    if spec.kind in ("delta_fit", "r_fit"):
        return _render_sweep_fit(spec, csv_dir, out_dir)
    return _render_compare(spec, csv_dir, out_dir)


def render_dir(spec_dir: str, csv_dir: str, out_dir: str) -> list[RenderResult]:
    """Render every spec in `spec_dir` whose input CSVs are present.

    Specs whose inputs are not part of `csv_dir` (a csv dir usually holds a
    single experiment family) are skipped with a notice on stderr; at least
    one figure must render.
    """
    names = sorted(name for name in os.listdir(spec_dir)
                   if name.endswith(".cfg"))
    if not names:
        raise FigureError(f"no .cfg figure specs in {spec_dir}")
    results = []
    for name in names:
        spec = load_spec(os.path.join(spec_dir, name))
        try:
            results.append(render(spec, csv_dir, out_dir))
        except MissingInputError as exc:
            print(f"render_figures: skipping {name}: {exc}", file=sys.stderr)
    if not results:
        raise FigureError(f"no spec in {spec_dir} matched the CSVs in {csv_dir}")
    return results


def main() -> None:
    if len(sys.argv) != 4:
        print("usage: render_figures <spec-dir> <csv-dir> <out-dir>",
              file=sys.stderr)
        sys.exit(2)
    try:
        results = render_dir(sys.argv[1], sys.argv[2], sys.argv[3])
    except FigureError as exc:
        print(f"render_figures: {exc}", file=sys.stderr)
        sys.exit(1)
    for result in results:
        print(result.path)
