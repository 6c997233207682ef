"""Symmetric PSD operators with prescribed degenerate spectra and quadratic test problems.

The operators here represent A in f(x) = 1/2 <Ax, x> - <b, x>. Two storage
forms are supported: a diagonal spectrum (cheap, used for large vector-noise
runs) and an explicit dense symmetric matrix (required when the quadratic
term itself is perturbed). Both are immutable after construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Dense storage above this dimension is refused (n x n float64 buffers).
DENSE_DIM_CAP = 4000

_SYMMETRY_RTOL = 1e-12
_RESIDUAL_RTOL = 1e-10
_RADIUS_RTOL = 1e-12


def as_vector(x, n: int | None = None) -> np.ndarray:
    """Validate and return a finite 1-D float array, optionally of dimension n."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1 or arr.size < 1:
        raise ValueError(f"expected a 1-D vector, got shape {arr.shape}")
    if n is not None and arr.size != n:
        raise ValueError(f"dimension mismatch: expected {n}, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("vector has non-finite entries")
    return arr


class DiagonalOperator:
    """A = diag(eigenvalues), eigenvalues >= 0."""

    __slots__ = ("diag", "n")

    def __init__(self, eigenvalues):
        diag = as_vector(eigenvalues)
        if np.any(diag < 0):
            raise ValueError("diagonal operator requires nonnegative eigenvalues")
        diag = diag.copy()
        diag.flags.writeable = False
        self.diag = diag
        self.n = diag.size

    def apply(self, x) -> np.ndarray:
        x = as_vector(x, self.n)
        return self.diag * x

    @property
    def lipschitz(self) -> float:
        return float(self.diag.max())

    def spectrum(self) -> np.ndarray:
        return np.sort(self.diag)[::-1].copy()

    def dense_matrix(self) -> np.ndarray:
        if self.n > DENSE_DIM_CAP:
            raise ValueError(f"n={self.n} exceeds dense cap {DENSE_DIM_CAP}")
        return np.diag(self.diag)

    def __repr__(self):
        return f"DiagonalOperator(n={self.n})"


class DenseSymmetricOperator:
    """Explicit symmetric PSD matrix; symmetry checked to 1e-12 relative."""

    __slots__ = ("matrix", "n", "_eigs")

    def __init__(self, matrix, eigenvalues=None, dim_cap: int = DENSE_DIM_CAP):
        mat = np.asarray(matrix, dtype=float)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {mat.shape}")
        n = mat.shape[0]
        if n > dim_cap:
            raise ValueError(f"n={n} exceeds dense cap {dim_cap}")
        if not np.all(np.isfinite(mat)):
            raise ValueError("matrix has non-finite entries")
        scale = np.abs(mat).max() or 1.0
        if np.abs(mat - mat.T).max() > _SYMMETRY_RTOL * scale:
            raise ValueError("matrix is not symmetric to 1e-12 relative tolerance")
        mat = 0.5 * (mat + mat.T)  # remove the sub-tolerance skew exactly
        mat.flags.writeable = False
        self.matrix = mat
        self.n = n
        if eigenvalues is not None:
            eigs = np.sort(as_vector(eigenvalues, n))[::-1].copy()
            eigs.flags.writeable = False
            self._eigs = eigs
        else:
            self._eigs = None

    def apply(self, x) -> np.ndarray:
        x = as_vector(x, self.n)
        return self.matrix @ x

    @property
    def lipschitz(self) -> float:
        return float(self.spectrum()[0])

    def spectrum(self) -> np.ndarray:
        if self._eigs is None:
            eigs = np.sort(np.linalg.eigvalsh(self.matrix))[::-1]
            eigs.flags.writeable = False
            self._eigs = eigs
        return self._eigs.copy()

    def dense_matrix(self) -> np.ndarray:
        return self.matrix

    def __repr__(self):
        return f"DenseSymmetricOperator(n={self.n})"


Operator = DiagonalOperator | DenseSymmetricOperator


@dataclass(frozen=True)
class SpectrumSpec:
    """Recipe for a descending eigenvalue array.

    decay "geometric" uses lambda_i = lambda_max * ratio**(i-1); decay "power"
    uses lambda_i = lambda_max * i**(-exponent). Both are clipped from below
    at `floor`.
    """

    n: int
    lambda_max: float
    decay: str
    ratio: float | None = None
    exponent: float | None = None
    floor: float = 0.0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("spectrum dimension must be >= 1")
        if not self.lambda_max > 0:
            raise ValueError("lambda_max must be > 0")
        if self.floor < 0:
            raise ValueError("floor must be >= 0")
        if self.decay == "geometric":
            if self.ratio is None or not (0 < self.ratio < 1):
                raise ValueError("geometric decay requires ratio in (0, 1)")
        elif self.decay == "power":
            if self.exponent is None or not self.exponent > 0:
                raise ValueError("power decay requires exponent > 0")
        else:
            raise ValueError(f"unknown decay kind {self.decay!r}")


def make_spectrum(spec: SpectrumSpec) -> np.ndarray:
    """Descending eigenvalues per the spec's decay law, clipped at the floor."""
    i = np.arange(1, spec.n + 1, dtype=float)
    if spec.decay == "geometric":
        lam = spec.lambda_max * spec.ratio ** (i - 1.0)
    else:
        lam = spec.lambda_max * i ** (-spec.exponent)
    return np.maximum(lam, spec.floor)


def degenerate_spectrum(n: int, condition: float, lambda_max: float = 1.0,
                        floor: float = 0.0) -> SpectrumSpec:
    """Geometric spectrum whose generated condition number is >= `condition`.

    Degenerate test problems want L/mu well above n^2; callers typically pass
    condition = 10 * n**2 or larger.
    """
    if n < 2:
        raise ValueError("need n >= 2 to prescribe a condition number")
    if not condition > 1:
        raise ValueError("condition must be > 1")
    # Tiny inflation so rounding in ratio**(n-1) cannot land below the target.
    ratio = float((condition * (1 + 1e-9)) ** (-1.0 / (n - 1)))
    return SpectrumSpec(n=n, lambda_max=lambda_max, decay="geometric",
                        ratio=ratio, floor=floor)


def condition_number(eigenvalues) -> float:
    """lambda_1 / lambda_n of a descending spectrum; inf when lambda_n == 0."""
    eigs = as_vector(eigenvalues)
    lo = float(eigs[-1])
    if lo == 0.0:
        return float("inf")
    return float(eigs[0]) / lo


def make_dense_spd(eigenvalues, seed: int, dim_cap: int = DENSE_DIM_CAP) -> DenseSymmetricOperator:
    """A = Q diag(eigenvalues) Q^T with Q a seeded random orthogonal matrix.

    Q comes from the QR factorization of a standard Gaussian matrix with the
    sign convention fixed (positive diagonal of R), so the result is a
    deterministic function of (eigenvalues, seed).
    """
    eigs = as_vector(eigenvalues)
    if np.any(eigs < 0):
        raise ValueError("eigenvalues must be nonnegative")
    n = eigs.size
    if n > dim_cap:
        raise ValueError(f"n={n} exceeds dense cap {dim_cap}")
    rng = np.random.default_rng(seed)
    gauss = rng.standard_normal((n, n))
    q, r = np.linalg.qr(gauss)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    q = q * signs
    mat = (q * eigs) @ q.T
    mat = 0.5 * (mat + mat.T)
    return DenseSymmetricOperator(mat, eigenvalues=eigs, dim_cap=dim_cap)


@dataclass(frozen=True)
class QuadraticProblem:
    """f(x) = 1/2 <Ax, x> - <b, x> with a known minimizer x_star.

    R is the solution size ||x_star - x0||_2 and L the largest eigenvalue
    of A. b always equals A x_star, so gradient(x_star) == 0.
    """

    A: Operator
    b: np.ndarray
    x_star: np.ndarray
    x0: np.ndarray
    R: float
    L: float

    def __post_init__(self):
        n = self.A.n
        as_vector(self.b, n)
        as_vector(self.x_star, n)
        as_vector(self.x0, n)
        for name in ("b", "x_star", "x0"):
            arr = getattr(self, name)
            if arr.flags.writeable:
                arr = arr.copy()
                arr.flags.writeable = False
                object.__setattr__(self, name, arr)
        bnorm = float(np.linalg.norm(self.b))
        residual = float(np.linalg.norm(self.A.apply(self.x_star) - self.b))
        if residual > _RESIDUAL_RTOL * max(bnorm, 1.0):
            raise ValueError(f"A x_star != b: residual {residual:.3e}")
        radius = float(np.linalg.norm(self.x_star - self.x0))
        if abs(radius - self.R) > _RADIUS_RTOL * max(radius, 1.0):
            raise ValueError(f"R={self.R} inconsistent with ||x_star - x0||={radius}")
        if not self.L > 0:
            raise ValueError("L must be > 0")

    @property
    def n(self) -> int:
        return self.A.n

    def f_value(self, x) -> float:
        x = as_vector(x, self.n)
        return 0.5 * float(x @ self.A.apply(x)) - float(self.b @ x)

    def gradient(self, x) -> np.ndarray:
        x = as_vector(x, self.n)
        return self.A.apply(x) - self.b

    @property
    def f_star(self) -> float:
        # f(x_star) = -1/2 <b, x_star> since A x_star = b
        return -0.5 * float(self.b @ self.x_star)


def make_problem(A: Operator, R: float, seed: int, x0=None) -> QuadraticProblem:
    """Quadratic problem with x_star = R * u for a seeded random unit vector u.

    b is defined as A x_star, so the minimizer is known exactly. x0 defaults
    to the origin, which makes R the distance to the solution.
    """
    if R < 0:
        raise ValueError("R must be >= 0")
    n = A.n
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(n)
    norm = np.linalg.norm(u)
    while norm == 0.0:  # probability zero, but keep the contract total
        u = rng.standard_normal(n)
        norm = np.linalg.norm(u)
    x_star = (R / norm) * u if R > 0 else np.zeros(n)
    b = A.apply(x_star)
    x0 = np.zeros(n) if x0 is None else as_vector(x0, n).copy()
    radius = float(np.linalg.norm(x_star - x0))
    return QuadraticProblem(A=A, b=b, x_star=x_star, x0=x0, R=radius,
                            L=A.lipschitz)
