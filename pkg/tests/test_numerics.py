import numpy as np
import pytest
from scipy.linalg import expm

from dogforge.errors import PreconditionError
from dogforge.numerics import (
    cumulative_integral,
    fd_derivative,
    linear_fit_r2,
    loglog_slope,
    ordered_prefix,
    ordered_product,
    patch_samples,
    pauli_vector,
    rigid_align,
    rodrigues,
    segmented_derivative,
    su2_steps,
    wrap_to_pi,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
)


class TestFiniteDifferences:
    def test_exact_on_quartic(self):
        x = np.linspace(0.0, 2.0, 31)
        h = x[1] - x[0]
        f = x**4 - 3 * x**3 + x**2 - 5 * x + 2
        refs = {1: 4 * x**3 - 9 * x**2 + 2 * x - 5,
                2: 12 * x**2 - 18 * x + 2,
                3: 24 * x - 18}
        for order, ref in refs.items():
            got = fd_derivative(f, h, order)
            assert np.max(np.abs(got - ref)) < 1e-8 * max(1, np.max(np.abs(ref)))

    def test_fourth_order_convergence(self):
        errs = []
        for n in (101, 201):
            x = np.linspace(0.0, 1.0, n)
            got = fd_derivative(np.sin(3 * x), x[1] - x[0], 1)
            errs.append(np.max(np.abs(got - 3 * np.cos(3 * x))))
        assert errs[0] / errs[1] > 12  # ~16 for 4th order

    def test_vector_matches_scalar(self):
        x = np.linspace(0.0, 1.0, 64)
        h = x[1] - x[0]
        f = np.stack([np.sin(x), np.cos(2 * x), x**3], axis=1)
        got = fd_derivative(f, h, 2)
        for k, col in enumerate(f.T):
            assert np.allclose(got[:, k], fd_derivative(col, h, 2), atol=1e-12)

    def test_too_few_samples(self):
        with pytest.raises(PreconditionError):
            fd_derivative(np.zeros(4), 0.1, 3)

    def test_segmented_respects_breaks(self):
        # piecewise function with a value jump at index 50
        x = np.linspace(0.0, 1.0, 101)
        h = x[1] - x[0]
        f = np.where(np.arange(101) < 50, x, 5.0 + 2 * x)
        got = segmented_derivative(f, h, 1, [50])
        ref = np.where(np.arange(101) < 50, 1.0, 2.0)
        assert np.max(np.abs(got - ref)) < 1e-9


class TestCumulativeIntegral:
    def test_exact_on_cubic(self):
        x = np.linspace(0.0, 2.0, 21)
        h = x[1] - x[0]
        f = 4 * x**3 - 2 * x + 1
        exact = x**4 - x**2 + x
        got = cumulative_integral(f, h)
        assert np.max(np.abs(got - exact)) < 1e-12

    def test_fourth_order(self):
        errs = []
        for n in (101, 201):
            x = np.linspace(0.0, np.pi, n)
            got = cumulative_integral(np.sin(x), x[1] - x[0])
            errs.append(np.max(np.abs(got - (1 - np.cos(x)))))
        assert errs[0] / errs[1] > 12

    def test_vector_input(self):
        x = np.linspace(0.0, 1.0, 41)
        f = np.stack([x, x**2], axis=1)
        got = cumulative_integral(f, x[1] - x[0])
        assert np.allclose(got[:, 0], x**2 / 2, atol=1e-12)
        assert np.allclose(got[:, 1], x**3 / 3, atol=1e-12)


class TestSU2:
    def test_steps_match_expm(self):
        rng = np.random.default_rng(7)
        a = rng.normal(size=(5, 3))
        dt = 0.013
        got = su2_steps(a[:, 0], a[:, 1], a[:, 2], dt)
        for i in range(5):
            h = a[i, 0] * SIGMA_X + a[i, 1] * SIGMA_Y + a[i, 2] * SIGMA_Z
            ref = expm(-1j * dt * h)
            assert np.max(np.abs(got[i] - ref)) < 1e-12

    def test_zero_field_is_identity(self):
        got = su2_steps(np.zeros(3), np.zeros(3), np.zeros(3), 0.1)
        assert np.allclose(got, np.eye(2), atol=1e-15)

    def test_ordered_product_matches_loop(self):
        rng = np.random.default_rng(3)
        a = rng.normal(size=(11, 3))
        mats = su2_steps(a[:, 0], a[:, 1], a[:, 2], 0.05)
        ref = np.eye(2, dtype=complex)
        for m in mats:
            ref = m @ ref
        assert np.max(np.abs(ordered_product(mats) - ref)) < 1e-13

    def test_ordered_prefix_matches_loop(self):
        rng = np.random.default_rng(4)
        a = rng.normal(size=(9, 3))
        mats = su2_steps(a[:, 0], a[:, 1], a[:, 2], 0.08)
        pref = ordered_prefix(mats)
        ref = np.eye(2, dtype=complex)
        for i, m in enumerate(mats):
            ref = m @ ref
            assert np.max(np.abs(pref[i] - ref)) < 1e-13

    def test_pauli_vector(self):
        n = np.array([0.3, -0.5, np.sqrt(1 - 0.34)])
        m = n[0] * SIGMA_X + n[1] * SIGMA_Y + n[2] * SIGMA_Z
        assert np.allclose(pauli_vector(m[None])[0], n, atol=1e-14)


class TestRodrigues:
    def test_matches_expm(self):
        rng = np.random.default_rng(11)
        w = rng.normal(size=(6, 3))
        got = rodrigues(w)
        for i in range(6):
            k = np.array([[0, -w[i, 2], w[i, 1]],
                          [w[i, 2], 0, -w[i, 0]],
                          [-w[i, 1], w[i, 0], 0]])
            assert np.max(np.abs(got[i] - expm(k))) < 1e-12

    def test_zero_rotation(self):
        assert np.allclose(rodrigues(np.zeros((2, 3))), np.eye(3))


class TestPatching:
    def test_patch_restores_smooth_values(self):
        x = np.linspace(0, 1, 101)
        f = np.sin(2 * x) + x**2
        bad = np.zeros(101, bool)
        bad[40:44] = True
        corrupted = np.array(f)
        corrupted[40:44] = 1e6
        fixed = patch_samples(corrupted, bad)
        # quadratic-fit limit: cubic truncation over the fit window
        assert np.max(np.abs(fixed[40:44] - f[40:44])) < 5e-4

    def test_patch_endpoint_run(self):
        x = np.linspace(0, 1, 101)
        f = x**2
        bad = np.zeros(101, bool)
        bad[:3] = True
        corrupted = np.array(f)
        corrupted[:3] = np.nan
        fixed = patch_samples(corrupted, bad)
        assert np.max(np.abs(fixed[:3] - f[:3])) < 1e-10


class TestMisc:
    def test_rigid_align_recovers_rotation(self):
        rng = np.random.default_rng(2)
        pts = rng.normal(size=(40, 3))
        rot = rodrigues(np.array([[0.3, -0.2, 0.9]]))[0]
        moved = pts @ rot.T + np.array([1.0, -2.0, 0.5])
        aligned, _, _ = rigid_align(pts, moved)
        assert np.max(np.abs(aligned - moved)) < 1e-10

    def test_loglog_slope(self):
        x = np.geomspace(1e-3, 1e-1, 9)
        assert abs(loglog_slope(x, 5 * x**4) - 4.0) < 1e-10

    def test_linear_fit_r2(self):
        x = np.linspace(0, 1, 20)
        slope, intercept, r2 = linear_fit_r2(x, 3 * x - 1)
        assert abs(slope - 3) < 1e-12 and abs(intercept + 1) < 1e-12
        assert r2 == pytest.approx(1.0)

    def test_wrap_to_pi(self):
        assert wrap_to_pi(np.pi) == pytest.approx(np.pi)
        assert wrap_to_pi(-np.pi) == pytest.approx(np.pi)
        assert wrap_to_pi(3 * np.pi / 2) == pytest.approx(-np.pi / 2)
