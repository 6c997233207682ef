"""Conjugate gradient and accelerated-gradient solvers driven by a noisy oracle.

The CG recursion consumes one OracleView per iteration: gradients, step
lengths and direction updates all use the perturbed pair (A~, b~), while the
trace records diagnostics (f, residual, argument error) computed with the
true problem data only.

The direction-update coefficient defaults to the exact-conjugacy form
beta = g_{i+1}^T A~ d_i / d_i^T A~ d_i; a classical Fletcher-Reeves ratio is
available behind the `beta` switch for comparison runs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linops import QuadraticProblem
from .noise import (ExactOracle, FIXED_PER_RUN, NoiseModel, matrix_part,
                    oracle_view)

MAX_ITER = "max_iter"
TOLERANCE_REACHED = "tolerance_reached"
NEMIROVSKY_STOP = "nemirovsky_stop"
BREAKDOWN_DETECTED = "breakdown_detected"

BETA_EXACT_CONJUGACY = "exact_conjugacy"
BETA_FLETCHER_REEVES = "fletcher_reeves"

# d^T A~ d below this multiple of ||d||^2 counts as curvature breakdown.
CURVATURE_TOL = 1e-14
# With matrix noise, curvature below this fraction of delta_a is noise
# garbage: the exact line minimizer along such a direction is a huge step
# that throws the iterate far off the plateau. Healthy directions measure
# two orders above delta_a * this factor.
NOISE_CURVATURE_FACTOR = 0.1

# Running products A x and M x are recomputed directly at this cadence to
# keep roundoff drift out of long traces.
_REFRESH_EVERY = 50


class NonFiniteIterateError(RuntimeError):
    """A solver produced a non-finite quantity; carries the iteration index."""

    def __init__(self, iteration: int, what: str):
        super().__init__(f"non-finite {what} at iteration {iteration}")
        self.iteration = iteration


@dataclass(frozen=True)
class GradNorm:
    """Fires when the search-direction norm drops below eps (Alg. loop guard)."""

    eps: float

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be > 0")


@dataclass(frozen=True)
class MaxIterRule:
    n_max: int

    def __post_init__(self):
        if self.n_max < 1:
            raise ValueError("n_max must be >= 1")


@dataclass(frozen=True)
class Nemirovsky:
    """Fires when ||A~ x - b~|| <= 2 (delta_a ||x|| + delta_b)."""

    delta_a: float
    delta_b: float

    def __post_init__(self):
        if self.delta_a < 0 or self.delta_b < 0:
            raise ValueError("deltas must be >= 0")


@dataclass(frozen=True)
class Composite:
    rules: tuple

    def __post_init__(self):
        object.__setattr__(self, "rules", tuple(self.rules))


StopRule = GradNorm | MaxIterRule | Nemirovsky | Composite


@dataclass(frozen=True)
class StopState:
    """Solver state visible to stop rules at one iteration."""

    x_norm: float
    d_norm: float
    noisy_residual_norm: float
    iteration: int


def check_stop(rule: StopRule, state: StopState) -> bool:
    """True iff the rule fires in this state; Composite fires if any member does."""
    return _first_fired(rule, state) is not None


def _first_fired(rule, state):
    if isinstance(rule, Composite):
        for member in rule.rules:
            fired = _first_fired(member, state)
            if fired is not None:
                return fired
        return None
    if isinstance(rule, GradNorm):
        return rule if state.d_norm < rule.eps else None
    if isinstance(rule, MaxIterRule):
        return rule if state.iteration >= rule.n_max else None
    if isinstance(rule, Nemirovsky):
        threshold = 2.0 * (rule.delta_a * state.x_norm + rule.delta_b)
        return rule if state.noisy_residual_norm <= threshold else None
    raise TypeError(f"unknown stop rule {rule!r}")


def _status_for(rule) -> str:
    if isinstance(rule, GradNorm):
        return TOLERANCE_REACHED
    if isinstance(rule, Nemirovsky):
        return NEMIROVSKY_STOP
    return MAX_ITER


@dataclass(frozen=True)
class SolverTrace:
    """Per-iteration diagnostics computed with the true problem data.

    Record k describes iterate x_k; step_alpha[k] is the step taken from x_k
    (NaN on the final record). f_scaled is (f(x_k) - f*) / (f(x_0) - f*).
    """

    k: np.ndarray
    f_true: np.ndarray
    f_scaled: np.ndarray
    residual_norm: np.ndarray
    arg_error: np.ndarray
    step_alpha: np.ndarray
    status: str
    restarts: int = 0
    x_final: np.ndarray | None = None

    @property
    def iterations(self) -> int:
        return len(self.k) - 1

    @property
    def final_x_error(self) -> float:
        return float(self.arg_error[-1])


class _TraceBuilder:
    def __init__(self, problem: QuadraticProblem):
        self.problem = problem
        self.f_true = []
        self.residual = []
        self.arg_error = []
        self.alpha = []
        self.x_last = None

    def record(self, x, ax, iteration: int):
        self.x_last = x
        p = self.problem
        f = 0.5 * float(x @ ax) - float(p.b @ x)
        if not np.isfinite(f):
            raise NonFiniteIterateError(iteration, "objective value")
        self.f_true.append(f)
        self.residual.append(float(np.linalg.norm(ax - p.b)))
        self.arg_error.append(float(np.linalg.norm(x - p.x_star)))
        self.alpha.append(float("nan"))

    def set_alpha(self, alpha: float):
        self.alpha[-1] = alpha

    def build(self, status: str, restarts: int = 0) -> SolverTrace:
        f_true = np.asarray(self.f_true)
        f_star = self.problem.f_star
        denom = f_true[0] - f_star
        if denom > 0:
            f_scaled = (f_true - f_star) / denom
        else:
            f_scaled = np.zeros_like(f_true)
        return SolverTrace(
            k=np.arange(len(f_true)),
            f_true=f_true,
            f_scaled=f_scaled,
            residual_norm=np.asarray(self.residual),
            arg_error=np.asarray(self.arg_error),
            step_alpha=np.asarray(self.alpha),
            status=status,
            restarts=restarts,
            x_final=None if self.x_last is None else np.array(self.x_last),
        )


class _TrackedProducts:
    """Maintains A x (and M x for a run-fixed noise matrix) across updates.

    Linear updates keep the products in sync without fresh matvecs; a direct
    recomputation every _REFRESH_EVERY steps bounds roundoff drift.
    """

    def __init__(self, problem: QuadraticProblem, model: NoiseModel, x):
        self.A = problem.A
        mpart = matrix_part(model)
        self.fixed_m = None
        if mpart is not None and mpart.resample == FIXED_PER_RUN and mpart.delta_a > 0:
            self.fixed_m = mpart.matrix_for(problem.n, 0).matrix
        self._steps = 0
        self.refresh(x)

    def refresh(self, x):
        self.ax = self.A.apply(x)
        self.mx = self.fixed_m @ x if self.fixed_m is not None else None
        self._steps = 0

    def step(self, x, alpha, ad, md):
        self._steps += 1
        if self._steps >= _REFRESH_EVERY:
            self.refresh(x)
            return
        self.ax = self.ax + alpha * ad
        if self.fixed_m is not None:
            self.mx = self.mx + alpha * md

    def noisy_gradient(self, problem, view, x):
        """A~ x - b~ for the current view, reusing tracked products."""
        gx = self.ax
        if view.noise_matrix is not None and view.matrix_sign != 0.0:
            mx = self.mx if self.fixed_m is not None else view.noise_matrix.apply(x)
            gx = gx + view.matrix_sign * mx
        return gx - view.b_tilde

    def noisy_dir_product(self, view, d, ad):
        """(A~ d, M d) for the current view; M d is None without matrix noise."""
        if view.noise_matrix is None or view.matrix_sign == 0.0:
            return ad, None
        md = view.noise_matrix.apply(d)
        return ad + view.matrix_sign * md, md


def cg_solve(problem: QuadraticProblem, model: NoiseModel = ExactOracle(),
             stop: StopRule | None = None, n_max: int = 1000,
             beta: str = BETA_EXACT_CONJUGACY) -> SolverTrace:
    """Conjugate gradient iterations fed by per-iteration oracle views.

    Each iteration i uses its view's (A~, b~) for the gradient, the step
    alpha_i = -d^T g~ / d^T A~ d and the direction coefficient; the next
    iteration's view supplies g~_{i+1}. On a curvature breakdown
    (d^T A~ d <= max(1e-14, 0.1 delta_a) ||d||^2) the direction restarts at
    -g~ once; an immediate repeat stops the run with status
    "breakdown_detected".
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    if beta not in (BETA_EXACT_CONJUGACY, BETA_FLETCHER_REEVES):
        raise ValueError(f"unknown beta formula {beta!r}")

    x = problem.x0.astype(float).copy()
    tracked = _TrackedProducts(problem, model, x)
    trace = _TraceBuilder(problem)
    restarts = 0
    curvature_floor = max(CURVATURE_TOL, NOISE_CURVATURE_FACTOR * model.delta_a)

    view = oracle_view(model, problem, x, 0, true_gradient=tracked.ax - problem.b)
    g = tracked.noisy_gradient(problem, view, x)
    d = -g

    trace.record(x, tracked.ax, 0)
    if stop is not None:
        state = StopState(x_norm=float(np.linalg.norm(x)),
                          d_norm=float(np.linalg.norm(d)),
                          noisy_residual_norm=float(np.linalg.norm(g)),
                          iteration=0)
        fired = _first_fired(stop, state)
        if fired is not None:
            return trace.build(_status_for(fired))

    i = 0
    while True:
        if i >= n_max:
            return trace.build(MAX_ITER, restarts)

        dd = float(d @ d)
        if dd == 0.0:
            # exactly stationary for the current noisy problem
            return trace.build(TOLERANCE_REACHED, restarts)

        ad = problem.A.apply(d)
        atd, md = tracked.noisy_dir_product(view, d, ad)
        curv = float(d @ atd)
        if curv <= curvature_floor * dd:
            restarts += 1
            d = -g
            dd = float(d @ d)
            if dd == 0.0:
                return trace.build(TOLERANCE_REACHED, restarts)
            ad = problem.A.apply(d)
            atd, md = tracked.noisy_dir_product(view, d, ad)
            curv = float(d @ atd)
            if curv <= curvature_floor * dd:
                return trace.build(BREAKDOWN_DETECTED, restarts)

        alpha = -float(d @ g) / curv
        if not np.isfinite(alpha):
            raise NonFiniteIterateError(i, "step length")
        trace.set_alpha(alpha)

        x = x + alpha * d
        tracked.step(x, alpha, ad, md)
        k = i + 1
        view = oracle_view(model, problem, x, k,
                           true_gradient=tracked.ax - problem.b)
        g_next = tracked.noisy_gradient(problem, view, x)

        if beta == BETA_FLETCHER_REEVES:
            g_norm2 = float(g @ g)
            coeff = float(g_next @ g_next) / g_norm2 if g_norm2 > 0 else 0.0
        else:
            coeff = float(g_next @ atd) / curv
        d = -g_next + coeff * d
        g = g_next

        trace.record(x, tracked.ax, k)
        if stop is not None:
            state = StopState(x_norm=float(np.linalg.norm(x)),
                              d_norm=float(np.linalg.norm(d)),
                              noisy_residual_norm=float(np.linalg.norm(g)),
                              iteration=k)
            fired = _first_fired(stop, state)
            if fired is not None:
                return trace.build(_status_for(fired), restarts)
        i = k


def nesterov_solve(problem: QuadraticProblem, model: NoiseModel = ExactOracle(),
                   n_max: int = 1000) -> SolverTrace:
    """Accelerated gradient baseline: momentum (k-1)/(k+2), constant step 1/L.

    The gradient at the extrapolated point uses the iteration's noisy
    (A~, b~); L is the true operator's largest eigenvalue. Products are
    computed directly every iteration: momentum extrapolation amplifies any
    stale-product inconsistency, so the running-update shortcut used in
    cg_solve is not safe here.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    inv_l = 1.0 / problem.L

    x = problem.x0.astype(float).copy()
    x_prev = x
    trace = _TraceBuilder(problem)
    trace.record(x, problem.A.apply(x), 0)

    for k in range(n_max):
        mom = (k - 1.0) / (k + 2.0)
        y = x + mom * (x - x_prev)
        ay = problem.A.apply(y)
        view = oracle_view(model, problem, y, k, true_gradient=ay - problem.b)
        g = ay - view.b_tilde
        if view.noise_matrix is not None and view.matrix_sign != 0.0:
            g = g + view.matrix_sign * view.noise_matrix.apply(y)
        if not np.all(np.isfinite(g)):
            raise NonFiniteIterateError(k, "gradient")

        x_prev, x = x, y - inv_l * g
        trace.set_alpha(inv_l)
        trace.record(x, problem.A.apply(x), k + 1)

    return trace.build(MAX_ITER)
