import numpy as np
import pytest
from scipy.linalg import expm

from dogforge import (
    ControlFields,
    EvolutionRecord,
    JumpMarker,
    NoiseModel,
    Unitary2,
    error_curve,
    final_unitaries,
    frenet,
    gate_fidelity,
    interaction_frame_transform,
    magnus_a1,
    omega_bar,
    propagate,
)
from dogforge.errors import NumericalError, PreconditionError
from dogforge.numerics import SIGMA_X, SIGMA_Y, SIGMA_Z, segmented_derivative

SX, SY, SZ = SIGMA_X, SIGMA_Y, SIGMA_Z


def constant_fields(omega=1.0, phi=0.0, delta=0.0, duration=np.pi, n=4001):
    t = np.linspace(0.0, duration, n)
    return ControlFields(t=t, omega=np.full(n, omega), phi=np.full(n, phi),
                         delta=np.full(n, delta))


def smooth_fields(n=20001, duration=6.0, seed=5):
    """Band-limited random fields with the amplitude bounded away from zero."""
    rng = np.random.default_rng(seed)
    t = np.linspace(0.0, duration, n)
    def series(scale, floor=0.0):
        coef = rng.normal(size=4) * scale
        phase = rng.uniform(0, 2 * np.pi, size=4)
        out = np.zeros(n)
        for k, (c, p) in enumerate(zip(coef, phase), start=1):
            out += c * np.cos(2 * np.pi * k * t / duration + p)
        return out + floor
    omega = np.abs(series(0.18, 1.0)) + 0.35
    phi = series(0.8)
    delta = series(0.25)
    return ControlFields(t=t, omega=omega, phi=phi, delta=delta)


class TestPropagate:
    def test_zero_fields_identity(self):
        f = constant_fields(omega=0.0, duration=3.0)
        rec = propagate(f)
        assert np.max(np.abs(rec.us[-1] - np.eye(2))) < 1e-14

    def test_square_pi_pulse(self):
        f = constant_fields(omega=1.0, duration=np.pi)
        u = propagate(f).us[-1]
        assert np.max(np.abs(u - (-1j) * SX)) < 1e-12

    def test_orange_slice_gate_closed_form(self):
        # two pole-to-pole rotations: the exact product is -exp(-i phi0 sz)
        from dogforge.bench import standard_orange_slice
        for phi0 in (np.pi / 4, np.pi / 2, 2.0):
            f = standard_orange_slice(phi0)
            u = propagate(f).us[-1]
            ref = expm(-1j * 0.5 * np.pi * (np.cos(phi0) * SX + np.sin(phi0) * SY)) \
                @ expm(-1j * 0.5 * np.pi * SX)
            assert np.max(np.abs(u - ref)) < 1e-10
            beta = np.angle(u[0, 0])
            want = np.mod(np.pi - phi0 + np.pi, 2 * np.pi) - np.pi
            assert beta == pytest.approx(want, abs=1e-10)

    def test_unitarity_everywhere(self):
        rec = propagate(smooth_fields(n=2001))
        dev = np.einsum("nij,nik->njk", rec.us.conj(), rec.us) - np.eye(2)
        assert float(np.max(np.abs(dev))) < 1e-12

    def test_detuning_noise_enters_as_sigma_z(self):
        f = constant_fields(omega=0.0, duration=2.0, n=801)
        dz = 0.03
        u = propagate(f, NoiseModel(delta_z=dz)).us[-1]
        ref = expm(-1j * 2.0 * dz * SZ)
        assert np.max(np.abs(u - ref)) < 1e-12

    def test_amplitude_noise_scales_omega(self):
        f = constant_fields(omega=1.0, duration=np.pi)
        u = propagate(f, NoiseModel(amplitude_error=0.1)).us[-1]
        ref = expm(-1j * 0.5 * np.pi * 1.1 * SX)
        assert np.max(np.abs(u - ref)) < 1e-12

    def test_step_size_guard(self):
        t = np.linspace(0, 1.0, 11)
        f = ControlFields(t=t, omega=np.full(11, 5.0), phi=np.zeros(11),
                          delta=np.zeros(11))
        with pytest.raises(PreconditionError):
            propagate(f)

    def test_nonfinite_rejected(self):
        t = np.linspace(0, 1.0, 11)
        om = np.ones(11)
        om[3] = np.nan
        with pytest.raises(PreconditionError):
            ControlFields(t=t, omega=om, phi=np.zeros(11), delta=np.zeros(11))

    def test_batch_matches_single(self):
        f = smooth_fields(n=2001)
        noises = [NoiseModel(delta_z=0.01), NoiseModel(amplitude_error=0.05)]
        batch = final_unitaries(f, noises)
        for nm, u in zip(noises, batch):
            ref = propagate(f, nm).us[-1]
            assert np.max(np.abs(u.matrix - ref)) < 1e-12


class TestErrorCurve:
    def test_square_pulse_semicircle(self):
        f = constant_fields(omega=1.0, duration=np.pi)
        curve = error_curve(f)
        # constant curvature 1: a semicircle of radius 1, endpoint 2 away
        assert np.linalg.norm(curve.points[-1]) == pytest.approx(2.0, abs=1e-9)
        fr = frenet(curve)
        assert np.max(np.abs(fr.kappa[5:-5] - 1.0)) < 1e-8

    def test_sech_pulse_open_curve_with_straight_tails(self):
        n = 8001
        t = np.linspace(0.0, 20.0, n)
        f = ControlFields(t=t, omega=1 / np.cosh(t - 10), phi=np.zeros(n),
                          delta=np.zeros(n))
        curve = error_curve(f)
        rep_gap = np.linalg.norm(curve.points[-1] - curve.points[0])
        assert rep_gap > 0.1 * curve.length  # wide open
        d1 = curve.d1
        assert abs(d1[0] @ [0, 0, 1] - 1) < 1e-8
        assert d1[-1] @ [0, 0, 1] < -1 + 1e-6

    def test_curvature_torsion_identity_smooth_fields(self):
        for seed in (5, 6, 7):
            f = smooth_fields(seed=seed)
            curve = error_curve(f)
            fr = frenet(curve)
            om = np.abs(f.omega)
            ok = fr.defined.copy()
            ok[:5] = ok[-5:] = False
            rel = (fr.kappa[ok] - om[ok]) / om[ok]
            assert np.sqrt(np.mean(rel**2)) < 1e-4
            phid = segmented_derivative(f.phi, f.grid_spacing, 1)
            target = phid - f.delta
            assert np.sqrt(np.mean((fr.tau[ok] - target[ok]) ** 2)) < 1e-3

    def test_magnus_a1_identity_fields(self):
        f = constant_fields(omega=0.0, duration=3.0)
        assert np.allclose(magnus_a1(f), [0, 0, 3.0], atol=1e-12)

    def test_magnus_a1_closed_orange_slice(self):
        from dogforge.bench import standard_orange_slice
        a1 = magnus_a1(standard_orange_slice(0.0))
        assert np.linalg.norm(a1) < 1e-8


class TestGateFidelity:
    def test_self_fidelity(self):
        u = Unitary2(expm(-1j * 0.3 * SX))
        assert gate_fidelity(u, u) == pytest.approx(1.0, abs=1e-14)

    def test_identity_vs_x(self):
        assert gate_fidelity(np.eye(2), 1j * SX) == pytest.approx(1 / 3, abs=1e-14)

    def test_small_z_phase_series(self):
        # exact: F = (2 + cos(delta)) / 3 = 1 - delta^2/6 + O(delta^4)
        for delta in (1e-2, 3e-2, 1e-1):
            f = gate_fidelity(np.eye(2), expm(-1j * 0.5 * delta * SZ))
            assert f == pytest.approx((2 + np.cos(delta)) / 3, abs=1e-14)
            assert abs(f - (1 - delta**2 / 6)) < delta**4


class TestInteractionFrame:
    def test_zero_detuning_is_identity(self):
        f = smooth_fields(n=2001)
        f0 = ControlFields(t=f.t, omega=f.omega, phi=f.phi,
                           delta=np.zeros_like(f.delta))
        out = interaction_frame_transform(f0)
        assert np.array_equal(out.phi, f0.phi)
        assert np.array_equal(out.omega, f0.omega)

    def test_constant_detuning_linear_phase(self):
        f = constant_fields(omega=0.5, delta=0.7, duration=2.0, n=2001)
        out = interaction_frame_transform(f)
        assert np.max(np.abs(out.phi - (-0.7 * f.t))) < 1e-10
        assert np.max(np.abs(out.delta)) == 0.0

    def test_error_curves_agree(self):
        # fine grid over a short window so the integrator resolves below 1e-8
        f = smooth_fields(n=40001, duration=2.0, seed=9)
        c1 = error_curve(f)
        c2 = error_curve(interaction_frame_transform(f))
        rms = np.sqrt(np.mean(np.sum((c1.points - c2.points) ** 2, axis=1)))
        assert rms < 1e-8
        assert np.max(np.abs(c1.points - c2.points)) < 1e-8


class TestMisc:
    def test_omega_bar(self):
        f = constant_fields(omega=0.8, duration=2.0)
        assert omega_bar(f) == pytest.approx(0.8, abs=1e-12)

    def test_record_requires_identity_start(self):
        t = np.linspace(0, 1, 5)
        us = np.stack([expm(-1j * 0.1 * SX)] * 5)
        with pytest.raises(PreconditionError):
            EvolutionRecord(t=t, us=us)

    def test_unitary2_validation(self):
        with pytest.raises(NumericalError):
            Unitary2(np.array([[1.0, 0.1], [0.0, 1.0]]))

    def test_unitary2_flat8_roundtrip(self):
        u = Unitary2(expm(-1j * (0.3 * SX + 0.2 * SZ)))
        back = Unitary2.from_flat8(u.flat8())
        assert np.array_equal(back.matrix, u.matrix)

    def test_jump_marker_propagation(self):
        # a declared jump must reproduce the exact two-segment product
        n = 2001
        t = np.linspace(0.0, 2.0, n)
        om = np.full(n, 0.5)
        phi = np.zeros(n)
        phi[n // 2:] = 1.0
        f = ControlFields(t=t, omega=om, phi=phi, delta=np.zeros(n),
                          jumps=(JumpMarker(n // 2, 0.5, 0.0, 0.0),))
        u = propagate(f).us[-1]
        h1 = 0.25 * SX
        h2 = 0.25 * (np.cos(1.0) * SX + np.sin(1.0) * SY)
        ref = expm(-1j * h2) @ expm(-1j * h1)
        assert np.max(np.abs(u - ref)) < 1e-12
