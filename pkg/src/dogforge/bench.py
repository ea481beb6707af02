"""Robustness benchmarking: noise sweeps and closed-form toy comparisons."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np
from scipy.optimize import brentq

from . import tolerances
from .dynamics import (
    ControlFields,
    JumpMarker,
    NoiseModel,
    Unitary2,
    final_unitaries,
    gate_fidelity,
    omega_bar,
    propagate,
)
from .errors import PreconditionError
from .numerics import SIGMA_X, SIGMA_Y, SIGMA_Z, loglog_slope, su2_steps
from .synthesis import DogDesign

THREADS_ENV = "DOGFORGE_THREADS"


@dataclass(frozen=True)
class FidelitySweep:
    """Gate fidelities of one or more designs along a shared noise axis."""

    axis_kind: str                       # "detuning_rate" or "amplitude_rate"
    axis: np.ndarray
    series: tuple[tuple[str, np.ndarray], ...]
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        axis = np.asarray(self.axis, dtype=float)
        if np.any(np.diff(axis) <= 0):
            raise PreconditionError("sweep axis must be strictly increasing")
        clean = []
        for label, vals in self.series:
            v = np.asarray(vals, dtype=float)
            if v.shape != axis.shape:
                raise PreconditionError("all series must share the axis")
            if np.any(v < -1e-12) or np.any(v > 1.0 + 1e-12):
                raise PreconditionError("fidelities must lie in [0, 1]")
            v = np.clip(v, 0.0, 1.0)
            v.setflags(write=False)
            clean.append((str(label), v))
        axis.setflags(write=False)
        object.__setattr__(self, "axis", axis)
        object.__setattr__(self, "series", tuple(clean))

    def fidelities(self, label: str) -> np.ndarray:
        for name, vals in self.series:
            if name == label:
                return vals
        raise KeyError(label)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": "fidelity_sweep", "axis_kind": self.axis_kind,
                "axis": self.axis.tolist(),
                "series": [[label, vals.tolist()] for label, vals in self.series],
                "metadata": dict(self.metadata)}


def default_rates(lo: float = 1e-3, hi: float = 1e-1,
                  per_decade: int = 41) -> np.ndarray:
    """Logarithmic noise-rate grid; ``per_decade`` points for each decade."""
    decades = np.log10(hi / lo)
    count = max(2, int(round(per_decade * decades)) + 1)
    return np.geomspace(lo, hi, count)


DesignLike = DogDesign | ControlFields | tuple[str, ControlFields]


def _as_labeled_fields(design: DesignLike, fallback: str) -> tuple[str, ControlFields]:
    if isinstance(design, DogDesign):
        label = design.family
        for key in ("xi", "phi0"):
            if key in design.parameters:
                label += f"[{key}={design.parameters[key]:.6g}]"
        return label, design.fields
    if isinstance(design, ControlFields):
        label = str(design.metadata.get("family", fallback))
        return label, design
    label, fields = design
    return str(label), fields


def _sweep(designs: Sequence[DesignLike], rates: Iterable[float],
           axis_kind: str) -> FidelitySweep:
    rates = np.asarray(list(rates), dtype=float)
    if rates.size == 0:
        raise PreconditionError("empty rate axis")
    labeled = [_as_labeled_fields(d, f"design{i}") for i, d in enumerate(designs)]
    if not labeled:
        raise PreconditionError("no designs to sweep")

    def one(item: tuple[str, ControlFields]) -> tuple[str, np.ndarray]:
        label, fields = item
        ideal = propagate(fields).final
        if axis_kind == "detuning_rate":
            scale = omega_bar(fields)
            noises = [NoiseModel(delta_z=float(r) * scale) for r in rates]
        else:
            noises = [NoiseModel(amplitude_error=float(r)) for r in rates]
        nonzero = [i for i, r in enumerate(rates) if r != 0.0]
        finals = final_unitaries(fields, [noises[i] for i in nonzero])
        vals = np.ones(len(rates))
        for k, i in enumerate(nonzero):
            vals[i] = gate_fidelity(ideal, finals[k])
        return label, vals

    workers = int(os.environ.get(THREADS_ENV, "1") or "1")
    if workers > 1 and len(labeled) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            series = list(pool.map(one, labeled))
    else:
        series = [one(item) for item in labeled]
    return FidelitySweep(axis_kind=axis_kind, axis=rates, series=tuple(series),
                         metadata={"designs": [label for label, _ in labeled]})


def detuning_sweep(designs: Sequence[DesignLike],
                   rates: Iterable[float]) -> FidelitySweep:
    """Fidelity against the detuning error rate delta_z / mean |Omega|."""
    return _sweep(designs, rates, "detuning_rate")


def amplitude_sweep(designs: Sequence[DesignLike],
                    rates: Iterable[float]) -> FidelitySweep:
    """Fidelity against the fractional pulse-amplitude error."""
    return _sweep(designs, rates, "amplitude_rate")


def infidelity_slope(sweep: FidelitySweep, label: str) -> float:
    """Log-log slope of 1 - F along the sweep axis for one series."""
    f = sweep.fidelities(label)
    infid = np.maximum(1.0 - f, 1e-300)
    return loglog_slope(sweep.axis, infid)


# ---------------------------------------------------------------------------
# standard (single-pulse) orange slice baseline
# ---------------------------------------------------------------------------

# truncation half-span of the sech pulse variant, in inverse-amplitude units
SECH_HALF_SPAN = 10.0


def standard_orange_slice(phi0: float, pulse_shape: str = "square",
                          omega0: float = 1.0,
                          n: int = tolerances.GRID_POINTS) -> ControlFields:
    """Two pole-to-pole pi pulses with the drive phase stepping to phi0.

    ``square`` gives constant-amplitude geodesic pulses; ``sech`` replaces
    them with truncated sech pulses (the loop on the sphere still closes, the
    noise-response curve still does not for phi0 != 0).
    """
    if not -np.pi < phi0 <= np.pi:
        raise PreconditionError("phi0 must lie in (-pi, pi]")
    if n % 2 == 0:
        raise PreconditionError("need an odd sample count so the switch is on-grid")
    half = n // 2
    if pulse_shape == "square":
        duration = 2.0 * np.pi / omega0
        t = np.linspace(0.0, duration, n)
        omega = np.full(n, omega0)
        left_omega = omega0
    elif pulse_shape == "sech":
        width = 2.0 * SECH_HALF_SPAN / omega0
        t = np.linspace(0.0, 2.0 * width, n)
        centers = np.where(np.arange(n) < half, 0.5 * width, 1.5 * width)
        omega = omega0 / np.cosh(omega0 * (t - centers))
        # renormalize each pulse to exact area pi so the loop closes on-grid
        area = float(np.trapezoid(omega[:half + 1], dx=t[1] - t[0]))
        omega *= np.pi / area
        left_omega = float(omega[half])
    else:
        raise PreconditionError(f"unknown pulse shape {pulse_shape!r}")
    phi = np.zeros(n)
    phi[half:] = float(phi0)
    marker = JumpMarker(index=half, omega_left=left_omega, phi_left=0.0,
                        delta_left=0.0)
    return ControlFields(t=t, omega=omega, phi=phi, delta=np.zeros(n),
                         jumps=(marker,),
                         metadata={"family": f"standard_orange_slice_{pulse_shape}",
                                   "phi0": float(phi0)})


def orange_slice_gap_exact(phi0: float, omega0: float = 1.0) -> float:
    """Endpoint gap of the square-pulse slice's noise-response curve.

    Two semicircles of radius 1/omega0 in planes opened by phi0 leave the
    endpoint displaced by (4/omega0) |sin(phi0/2)|.
    """
    return 4.0 / omega0 * abs(np.sin(0.5 * phi0))


# ---------------------------------------------------------------------------
# closed-form toy models (square-pulse gates with appended perturbations)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ToyModelResult:
    scenario: str          # "parallel" | "perpendicular" | "omega"
    gate_kind: str         # "HG" | "NHG"
    phi: float
    eps: float
    f_closed_form: float
    f_simulated: float
    is_approximation: bool

    def to_dict(self) -> dict[str, Any]:
        return {"kind": "toy_model_result", "scenario": self.scenario,
                "gate_kind": self.gate_kind, "phi": self.phi, "eps": self.eps,
                "f_closed_form": self.f_closed_form,
                "f_simulated": self.f_simulated,
                "is_approximation": self.is_approximation}


def _segment_unitary(coeff: np.ndarray, duration: float) -> np.ndarray:
    return su2_steps(np.array([coeff[0]]), np.array([coeff[1]]),
                     np.array([coeff[2]]), duration)[0]


def _toy_segments(scenario: str, gate_kind: str, phi: float,
                  eps: float) -> list[tuple[np.ndarray, float]]:
    """Piecewise-constant Hamiltonians (Pauli coefficients, duration), Omega=1."""
    cphi, sphi = np.cos(phi), np.sin(phi)
    if gate_kind == "HG":
        seg1 = (np.array([0.5, 0.0, 0.0]), np.pi)
        seg2 = (0.5 * np.array([cphi, sphi, 0.0]), np.pi)
        if scenario == "parallel":
            return [seg1, ((1.0 + eps) * seg2[0], seg2[1])]
        if scenario == "perpendicular":
            return [seg1, seg2, (np.array([0.0, 0.0, eps / np.pi]), np.pi)]
        if scenario == "omega":
            return [((1.0 + eps) * seg1[0], seg1[1]),
                    ((1.0 + eps) * seg2[0], seg2[1])]
    elif gate_kind == "NHG":
        seg = (np.array([0.0, 0.0, 0.5]), 2.0 * phi)
        if scenario == "parallel" or scenario == "omega":
            return [((1.0 + eps) * seg[0], seg[1])]
        if scenario == "perpendicular":
            return [seg, (np.array([eps / np.pi, 0.0, 0.0]), np.pi)]
    raise PreconditionError(f"unknown toy scenario {scenario!r}/{gate_kind!r}")


def _toy_gate(scenario: str, gate_kind: str, phi: float, eps: float) -> np.ndarray:
    u = np.eye(2, dtype=complex)
    for coeff, duration in _toy_segments(scenario, gate_kind, phi, eps):
        u = _segment_unitary(coeff, duration) @ u
    return u


def toy_closed_form(scenario: str, gate_kind: str, phi: float,
                    eps: float) -> tuple[float, bool]:
    """Published closed-form fidelity; flag marks the O(eps^2) approximations."""
    if scenario == "parallel":
        if gate_kind == "HG":
            return (2.0 + np.cos(np.pi * eps)) / 3.0, False
        return (2.0 + np.cos(2.0 * phi * eps)) / 3.0, False
    if scenario == "perpendicular":
        return (2.0 + np.cos(2.0 * eps)) / 3.0, False
    if scenario == "omega":
        if gate_kind == "HG":
            return (3.0 - np.pi**2 * eps**2 * (1.0 + np.cos(phi))) / 3.0, True
        return 1.0 - (2.0 / 3.0) * phi**2 * eps**2, True
    raise PreconditionError(f"unknown toy scenario {scenario!r}")


def toy_model_fidelities(phi: float, eps: float, scenario: str,
                         gate_kind: str) -> ToyModelResult:
    """Closed-form toy fidelity cross-checked by exact segment propagation."""
    if abs(eps) > 0.5:
        raise PreconditionError("toy models are stated for |eps| <= 0.5")
    f_cf, approx = toy_closed_form(scenario, gate_kind, phi, eps)
    ideal = _toy_gate(scenario, gate_kind, phi, 0.0)
    real = _toy_gate(scenario, gate_kind, phi, eps)
    f_sim = gate_fidelity(ideal, real)
    return ToyModelResult(scenario=scenario, gate_kind=gate_kind, phi=float(phi),
                          eps=float(eps), f_closed_form=float(f_cf),
                          f_simulated=float(f_sim), is_approximation=approx)


def omega_noise_crossover() -> float:
    """Gate angle where the two omega-noise toy fidelities coincide.

    Root of pi^2 (1 + cos phi) = 2 phi^2; the holonomic variant wins beyond it.
    """
    return float(brentq(lambda p: np.pi**2 * (1.0 + np.cos(p)) - 2.0 * p * p,
                        1.0, 3.0, xtol=1e-14))
