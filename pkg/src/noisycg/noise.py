"""Per-iteration oracle perturbations with exactly normalized magnitudes.

Vector noise perturbs b with a magnitude vector whose 2-norm equals delta_b
exactly; the adversarial flavor signs each component against the current
gradient, the stochastic flavor adds or subtracts the whole vector with a
fair coin. Matrix noise adds a random-sign nonnegative matrix with Frobenius
norm exactly delta_a, which also bounds its spectral norm.

All randomness is keyed by (seed, stream, iteration), so an oracle view for a
given iteration is reproducible regardless of query order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linops import DENSE_DIM_CAP, Operator, QuadraticProblem, as_vector

# Stream ids for keyed RNG derivation; never reuse across purposes.
_STREAM_MAGNITUDES = 1
_STREAM_MAGNITUDES_FIXED = 2
_STREAM_COIN = 3
_STREAM_MATRIX_SIGN = 4
_STREAM_MATRIX_ENTRIES = 5
_STREAM_MATRIX_FIXED = 6

FIXED_PER_RUN = "fixed"
RESAMPLE_EACH_ITERATION = "per_iteration"


def _rng(seed: int, stream: int, k: int = 0) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(stream), int(k)])


def sample_noise_magnitudes(n: int, delta: float, seed) -> np.ndarray:
    """Nonnegative magnitudes m with ||m||_2 == delta.

    Draws n standard normals xi and returns sqrt(xi_j^2 * delta^2 / sum xi^2),
    i.e. |xi_j| * delta / ||xi||. `seed` is any RNG seed material.
    """
    if delta < 0:
        raise ValueError("delta must be >= 0")
    if n < 1:
        raise ValueError("n must be >= 1")
    if delta == 0:
        return np.zeros(n)
    rng = np.random.default_rng(seed)
    xi = rng.standard_normal(n)
    norm = np.linalg.norm(xi)
    while norm == 0.0:
        xi = rng.standard_normal(n)
        norm = np.linalg.norm(xi)
    return np.abs(xi) * (delta / norm)


def adversarial_b(b, magnitudes, gradient) -> np.ndarray:
    """b with each component pushed along the sign of the gradient component.

    sign(0) == 0, so converged components are left untouched and the
    perturbation norm never exceeds ||magnitudes||.
    """
    b = as_vector(b)
    mags = as_vector(magnitudes, b.size)
    grad = as_vector(gradient, b.size)
    if np.any(mags < 0):
        raise ValueError("magnitudes must be componentwise >= 0")
    return b + mags * np.sign(grad)


def stochastic_b(b, magnitudes, plus: bool) -> np.ndarray:
    """b + magnitudes or b - magnitudes, one sign for the whole vector."""
    b = as_vector(b)
    mags = as_vector(magnitudes, b.size)
    if np.any(mags < 0):
        raise ValueError("magnitudes must be componentwise >= 0")
    return b + mags if plus else b - mags


@dataclass(frozen=True)
class NoiseMatrix:
    """Nonnegative matrix with ||M||_F exactly delta_a (so ||M||_2 <= delta_a)."""

    matrix: np.ndarray
    frobenius_norm: float

    def apply(self, x) -> np.ndarray:
        return self.matrix @ x


def make_noise_matrix(n: int, delta_a: float, seed,
                      dim_cap: int = DENSE_DIM_CAP) -> NoiseMatrix:
    """Row-major normalization of n*n squared normals to Frobenius norm delta_a."""
    if delta_a < 0:
        raise ValueError("delta_a must be >= 0")
    if n < 1:
        raise ValueError("n must be >= 1")
    if n > dim_cap:
        raise ValueError(f"n={n} exceeds dense cap {dim_cap}")
    if delta_a == 0:
        return NoiseMatrix(np.zeros((n, n)), 0.0)
    rng = np.random.default_rng(seed)
    xi = rng.standard_normal(n * n)
    norm = np.linalg.norm(xi)
    while norm == 0.0:
        xi = rng.standard_normal(n * n)
        norm = np.linalg.norm(xi)
    entries = np.abs(xi) * (delta_a / norm)
    mat = entries.reshape(n, n)  # row-major: entry (p, k) uses draw (p-1)*n + k
    mat.flags.writeable = False
    return NoiseMatrix(mat, float(np.linalg.norm(entries)))


@dataclass(frozen=True)
class ExactOracle:
    """No perturbation; the solver sees the true (A, b)."""

    seed: int = 0

    delta_a = 0.0
    delta_b = 0.0


@dataclass(frozen=True)
class AdversarialVectorNoise:
    """||b~ - b|| <= delta_b with signs tracking the current true gradient."""

    delta_b: float
    seed: int = 0
    redraw_magnitudes: bool = True

    delta_a = 0.0

    def __post_init__(self):
        if self.delta_b < 0:
            raise ValueError("delta_b must be >= 0")


@dataclass(frozen=True)
class StochasticVectorNoise:
    """b~ = b +/- magnitudes, fair coin per iteration."""

    delta_b: float
    seed: int = 0
    redraw_magnitudes: bool = True

    delta_a = 0.0

    def __post_init__(self):
        if self.delta_b < 0:
            raise ValueError("delta_b must be >= 0")


@dataclass(frozen=True)
class MatrixNoise:
    """A~ = A +/- M with a fair sign per iteration; ||M||_F == delta_a.

    With the default "fixed" policy M is generated once per run and only its
    sign flips; "per_iteration" regenerates M every iteration.
    """

    delta_a: float
    seed: int = 0
    resample: str = FIXED_PER_RUN

    delta_b = 0.0

    # lazy per-run cache of the fixed M, keyed by dimension
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.delta_a < 0:
            raise ValueError("delta_a must be >= 0")
        if self.resample not in (FIXED_PER_RUN, RESAMPLE_EACH_ITERATION):
            raise ValueError(f"unknown resample policy {self.resample!r}")

    def matrix_for(self, n: int, k: int) -> NoiseMatrix:
        if self.resample == RESAMPLE_EACH_ITERATION:
            return make_noise_matrix(n, self.delta_a,
                                     [self.seed, _STREAM_MATRIX_ENTRIES, k])
        if n not in self._cache:
            self._cache[n] = make_noise_matrix(n, self.delta_a,
                                               [self.seed, _STREAM_MATRIX_FIXED, 0])
        return self._cache[n]


@dataclass(frozen=True)
class CombinedNoise:
    """Independent matrix and vector perturbations applied together."""

    matrix: MatrixNoise
    vector: AdversarialVectorNoise | StochasticVectorNoise

    @property
    def delta_a(self) -> float:
        return self.matrix.delta_a

    @property
    def delta_b(self) -> float:
        return self.vector.delta_b


NoiseModel = (ExactOracle | AdversarialVectorNoise | StochasticVectorNoise
              | MatrixNoise | CombinedNoise)


@dataclass(frozen=True)
class OracleView:
    """The perturbed pair (A~, b~) seen by the solver at one iteration.

    `base`, `noise_matrix` and `matrix_sign` expose the additive structure
    A~ = A + s*M so callers can reuse partial products; apply_A_tilde is the
    definition they must agree with.
    """

    b_tilde: np.ndarray
    iteration: int
    base: Operator
    noise_matrix: NoiseMatrix | None = None
    matrix_sign: float = 0.0

    def apply_A_tilde(self, x) -> np.ndarray:
        y = self.base.apply(x)
        if self.noise_matrix is not None and self.matrix_sign != 0.0:
            y = y + self.matrix_sign * self.noise_matrix.apply(x)
        return y


def _vector_magnitudes(model, n: int, k: int) -> np.ndarray:
    if model.redraw_magnitudes:
        seed_material = [model.seed, _STREAM_MAGNITUDES, k]
    else:
        seed_material = [model.seed, _STREAM_MAGNITUDES_FIXED, 0]
    return sample_noise_magnitudes(n, model.delta_b, seed_material)


def _vector_b_tilde(model, problem: QuadraticProblem, x_k, k: int,
                    true_gradient=None) -> np.ndarray:
    n = problem.n
    mags = _vector_magnitudes(model, n, k)
    if isinstance(model, AdversarialVectorNoise):
        grad = true_gradient if true_gradient is not None else problem.gradient(x_k)
        return adversarial_b(problem.b, mags, grad)
    coin = bool(_rng(model.seed, _STREAM_COIN, k).integers(0, 2))
    return stochastic_b(problem.b, mags, coin)


def _matrix_parts(model: MatrixNoise, n: int, k: int):
    if n > DENSE_DIM_CAP:
        raise ValueError(
            f"matrix noise needs dense n x n storage; n={n} exceeds cap {DENSE_DIM_CAP}")
    noise = model.matrix_for(n, k)
    sign = 1.0 if _rng(model.seed, _STREAM_MATRIX_SIGN, k).integers(0, 2) else -1.0
    return noise, sign


def oracle_view(model: NoiseModel, problem: QuadraticProblem, x_k, k: int,
                true_gradient=None) -> OracleView:
    """The iteration-k perturbed oracle (A~, b~) for the given model.

    `true_gradient` optionally supplies A x_k - b (already computed by the
    solver) so adversarial sign selection avoids a redundant matvec; it must
    equal problem.gradient(x_k) up to roundoff.
    """
    if k < 0:
        raise ValueError("iteration index must be >= 0")
    if isinstance(model, ExactOracle):
        return OracleView(b_tilde=problem.b, iteration=k, base=problem.A)
    if isinstance(model, (AdversarialVectorNoise, StochasticVectorNoise)):
        b_tilde = _vector_b_tilde(model, problem, x_k, k, true_gradient)
        return OracleView(b_tilde=b_tilde, iteration=k, base=problem.A)
    if isinstance(model, MatrixNoise):
        noise, sign = _matrix_parts(model, problem.n, k)
        return OracleView(b_tilde=problem.b, iteration=k, base=problem.A,
                          noise_matrix=noise, matrix_sign=sign)
    if isinstance(model, CombinedNoise):
        noise, sign = _matrix_parts(model.matrix, problem.n, k)
        b_tilde = _vector_b_tilde(model.vector, problem, x_k, k, true_gradient)
        return OracleView(b_tilde=b_tilde, iteration=k, base=problem.A,
                          noise_matrix=noise, matrix_sign=sign)
    raise TypeError(f"unknown noise model {model!r}")


def matrix_part(model: NoiseModel) -> MatrixNoise | None:
    """The MatrixNoise component of a model, if any."""
    if isinstance(model, MatrixNoise):
        return model
    if isinstance(model, CombinedNoise):
        return model.matrix
    return None


def exact_equivalent(model: NoiseModel) -> bool:
    """True when the model perturbs nothing (all deltas zero)."""
    return model.delta_a == 0.0 and model.delta_b == 0.0
