import numpy as np
import pytest

from noisycg.linops import (DENSE_DIM_CAP, DenseSymmetricOperator,
                            DiagonalOperator, QuadraticProblem, SpectrumSpec,
                            condition_number, degenerate_spectrum,
                            make_dense_spd, make_problem, make_spectrum)


def jacobi_eigenvalues(matrix, sweeps=30, tol=1e-12):
    """Cyclic Jacobi rotations; independent of numpy's eigensolver."""
    a = np.array(matrix, dtype=float)
    n = a.shape[0]
    for _ in range(sweeps):
        off = np.sqrt(max(0.0, np.sum(a ** 2) - np.sum(np.diag(a) ** 2)))
        if off < tol * np.linalg.norm(np.diag(a)):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(a[p, q]) < 1e-30:
                    continue
                theta = 0.5 * np.arctan2(2 * a[p, q], a[q, q] - a[p, p])
                c, s = np.cos(theta), np.sin(theta)
                rot = np.eye(n)
                rot[p, p] = c
                rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
    return np.sort(np.diag(a))[::-1]


class TestApply:
    def test_diagonal_action(self):
        a = DiagonalOperator([1.0, 2.0, 3.0])
        np.testing.assert_array_equal(a.apply([1.0, 1.0, 1.0]), [1.0, 2.0, 3.0])

    def test_identity(self):
        a = DiagonalOperator(np.ones(5))
        x = np.arange(5.0)
        np.testing.assert_array_equal(a.apply(x), x)

    def test_dense_matches_triple_product(self):
        rng = np.random.default_rng(5)
        gauss = rng.standard_normal((4, 4))
        q, _ = np.linalg.qr(gauss)
        lam = np.array([4.0, 2.0, 1.0, 0.5])
        a = DenseSymmetricOperator((q * lam) @ q.T)
        x = rng.standard_normal(4)
        expected = q @ (lam * (q.T @ x))
        np.testing.assert_allclose(a.apply(x), expected, atol=1e-12)

    def test_dimension_mismatch(self):
        a = DiagonalOperator([1.0, 2.0])
        with pytest.raises(ValueError, match="dimension"):
            a.apply([1.0, 2.0, 3.0])

    def test_asymmetric_rejected(self):
        mat = np.array([[1.0, 0.5], [0.2, 1.0]])
        with pytest.raises(ValueError, match="symmetric"):
            DenseSymmetricOperator(mat)


class TestMakeSpectrum:
    def test_geometric_formula(self):
        spec = SpectrumSpec(n=3, lambda_max=1.0, decay="geometric", ratio=0.1)
        np.testing.assert_allclose(make_spectrum(spec), [1.0, 0.1, 0.01])

    def test_power_formula(self):
        spec = SpectrumSpec(n=4, lambda_max=8.0, decay="power", exponent=1.0)
        np.testing.assert_allclose(make_spectrum(spec), [8.0, 4.0, 8.0 / 3.0, 2.0])

    def test_degenerate_condition_target(self):
        # condition at least 10 * n^2 for the n=1000 degeneracy check
        eigs = make_spectrum(degenerate_spectrum(1000, 1e7))
        assert condition_number(eigs) >= 1e7
        assert eigs[0] == 1.0
        assert np.all(np.diff(eigs) <= 0)

    def test_floor_applied(self):
        spec = SpectrumSpec(n=100, lambda_max=1.0, decay="geometric",
                            ratio=0.5, floor=1e-6)
        eigs = make_spectrum(spec)
        assert eigs.min() == 1e-6
        assert condition_number(eigs) == 1e6

    def test_invalid_specs(self):
        with pytest.raises(ValueError):
            SpectrumSpec(n=3, lambda_max=1.0, decay="geometric", ratio=1.5)
        with pytest.raises(ValueError):
            SpectrumSpec(n=3, lambda_max=0.0, decay="power", exponent=1.0)
        with pytest.raises(ValueError):
            SpectrumSpec(n=3, lambda_max=1.0, decay="unknown")


class TestMakeDenseSpd:
    def test_identity_from_unit_eigenvalues(self):
        a = make_dense_spd(np.ones(3), seed=0)
        np.testing.assert_allclose(a.matrix, np.eye(3), atol=1e-12)

    def test_similarity_invariants(self):
        a = make_dense_spd([2.0, 1.0], seed=7)
        assert np.trace(a.matrix) == pytest.approx(3.0, abs=1e-10)
        assert np.linalg.det(a.matrix) == pytest.approx(2.0, abs=1e-10)

    def test_spectrum_recovered_by_jacobi(self):
        eigs = make_spectrum(SpectrumSpec(n=50, lambda_max=1.0,
                                          decay="geometric", ratio=0.8))
        a = make_dense_spd(eigs, seed=3)
        recovered = jacobi_eigenvalues(a.matrix)
        np.testing.assert_allclose(recovered, eigs, rtol=1e-8)

    def test_dense_cap(self):
        with pytest.raises(ValueError, match="cap"):
            make_dense_spd(np.ones(DENSE_DIM_CAP + 1), seed=0)

    def test_deterministic(self):
        a = make_dense_spd([3.0, 1.0, 0.5], seed=11)
        b = make_dense_spd([3.0, 1.0, 0.5], seed=11)
        np.testing.assert_array_equal(a.matrix, b.matrix)


class TestMakeProblem:
    def test_zero_radius(self):
        p = make_problem(DiagonalOperator([1.0, 2.0]), 0.0, seed=1)
        assert np.all(p.x_star == 0.0)
        assert np.all(p.b == 0.0)
        assert p.f_value(p.x_star) == 0.0

    def test_solution_norm_matches_radius(self):
        # Table-scale check: R = 2000 at n = 1000
        eigs = make_spectrum(degenerate_spectrum(1000, 1e7))
        p = make_problem(DiagonalOperator(eigs), 2000.0, seed=4)
        assert abs(np.linalg.norm(p.x_star) - 2000.0) <= 1e-9

    def test_b_is_definitional(self):
        p = make_problem(DiagonalOperator([2.0, 1.0, 0.5]), 3.0, seed=9)
        assert np.linalg.norm(p.A.apply(p.x_star) - p.b) == 0.0

    def test_determinism_bitwise(self):
        a = DiagonalOperator([2.0, 1.0, 0.5, 0.25])
        p1 = make_problem(a, 5.0, seed=123)
        p2 = make_problem(a, 5.0, seed=123)
        assert np.array_equal(p1.x_star, p2.x_star)
        assert np.array_equal(p1.b, p2.b)
        assert p1.R == p2.R and p1.L == p2.L

    def test_inconsistent_problem_rejected(self):
        a = DiagonalOperator([1.0, 1.0])
        with pytest.raises(ValueError, match="x_star"):
            QuadraticProblem(A=a, b=np.array([1.0, 0.0]),
                             x_star=np.array([0.0, 1.0]),
                             x0=np.zeros(2), R=1.0, L=1.0)


class TestObjective:
    def test_gradient_zero_at_solution(self):
        eigs = make_spectrum(SpectrumSpec(n=30, lambda_max=2.0,
                                          decay="geometric", ratio=0.7))
        p = make_problem(DiagonalOperator(eigs), 4.0, seed=2)
        g = p.gradient(p.x_star)
        assert np.linalg.norm(g) <= 1e-10 * np.linalg.norm(p.b)

    def test_hand_computed_value(self):
        a = DiagonalOperator(np.ones(2))
        p = QuadraticProblem(A=a, b=np.zeros(2), x_star=np.zeros(2),
                             x0=np.zeros(2), R=0.0, L=1.0)
        x = np.array([3.0, 4.0])
        assert p.f_value(x) == pytest.approx(12.5)
        np.testing.assert_array_equal(p.gradient(x), x)

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(8)
        a = make_dense_spd([3.0, 2.0, 1.5, 1.0, 0.5, 0.25], seed=5)
        p = make_problem(a, 2.0, seed=6)
        x = rng.standard_normal(6)
        g = p.gradient(x)
        h = 1e-6
        for j in range(6):
            e = np.zeros(6)
            e[j] = h
            fd = (p.f_value(x + e) - p.f_value(x - e)) / (2 * h)
            assert fd == pytest.approx(g[j], rel=1e-5, abs=1e-8)
        # directional second check on f itself
        d = rng.standard_normal(6)
        fd_dir = (p.f_value(x + h * d) - p.f_value(x - h * d)) / (2 * h)
        assert fd_dir == pytest.approx(float(g @ d), rel=1e-5)


class TestPsdProperty:
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_quadratic_form_nonnegative(self, seed):
        rng = np.random.default_rng(seed)
        eigs = make_spectrum(SpectrumSpec(n=40, lambda_max=1.0,
                                          decay="power", exponent=2.0))
        ops = [DiagonalOperator(eigs), make_dense_spd(eigs, seed=seed)]
        for op in ops:
            for _ in range(100):
                x = rng.standard_normal(40)
                val = float(x @ op.apply(x))
                assert val >= -1e-10 * float(x @ x)
