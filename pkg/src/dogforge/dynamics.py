"""Qubit dynamics under the three-field control Hamiltonian.

H(t) = (Omega/2)(cos Phi sx + sin Phi sy) + (Delta/2) sz + delta_z sz, with a
quasistatic detuning offset delta_z and a fractional amplitude error applied
as Omega -> Omega (1 + eps). Propagation uses exact per-step 2x2 exponentials
of the midpoint-sampled Hamiltonian; declared field jumps switch Hamiltonians
between steps instead of being sampled as step functions.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Sequence

import numpy as np

from .curves import SpaceCurve
from .errors import NumericalError, PreconditionError
from .numerics import (
    SIGMA_Z,
    cumulative_integral,
    ordered_prefix,
    ordered_product,
    pauli_vector,
    su2_steps,
)

# step-size safety bound: h * max field rate must stay below this
_STEP_BOUND = 0.1


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class JumpMarker:
    """Declared field discontinuity at a sample index.

    The stored field arrays hold the right (post-jump) values at ``index``;
    the marker carries the left limits so the propagator can finish the
    preceding step with the correct Hamiltonian.
    """

    index: int
    omega_left: float
    phi_left: float
    delta_left: float

    def to_dict(self) -> dict[str, Any]:
        return {"index": self.index, "omega_left": self.omega_left,
                "phi_left": self.phi_left, "delta_left": self.delta_left}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "JumpMarker":
        return cls(int(d["index"]), float(d["omega_left"]),
                   float(d["phi_left"]), float(d["delta_left"]))


@dataclass(frozen=True)
class ControlFields:
    """Sampled drive triple Omega(t), Phi(t), Delta(t) on a uniform grid."""

    t: np.ndarray
    omega: np.ndarray
    phi: np.ndarray
    delta: np.ndarray
    jumps: tuple[JumpMarker, ...] = ()
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        arrays = {}
        for name in ("omega", "phi", "delta"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != t.shape:
                raise PreconditionError(f"{name} must share the time grid")
            if not np.all(np.isfinite(arr)):
                raise PreconditionError(f"non-finite {name} sample")
            arrays[name] = arr
        steps = np.diff(t)
        if len(t) < 2 or steps[0] <= 0 or np.any(np.abs(steps - steps[0]) > 1e-9 * steps[0]):
            raise PreconditionError("time grid must be uniform and increasing")
        object.__setattr__(self, "t", _freeze(t))
        for name, arr in arrays.items():
            object.__setattr__(self, name, _freeze(arr))
        markers = tuple(sorted(self.jumps, key=lambda m: m.index))
        for m in markers:
            if not 0 < m.index < len(t):
                raise PreconditionError("jump marker index out of range")
        object.__setattr__(self, "jumps", markers)

    @property
    def grid_spacing(self) -> float:
        return float(self.t[1] - self.t[0])

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0])

    @property
    def jump_indices(self) -> list[int]:
        return [m.index for m in self.jumps]

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": "control_fields",
            "metadata": dict(self.metadata),
            "t": self.t.tolist(),
            "omega": self.omega.tolist(),
            "phi": self.phi.tolist(),
            "delta": self.delta.tolist(),
            "jumps": [m.to_dict() for m in self.jumps],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ControlFields":
        return cls(
            t=np.asarray(data["t"], float),
            omega=np.asarray(data["omega"], float),
            phi=np.asarray(data["phi"], float),
            delta=np.asarray(data["delta"], float),
            jumps=tuple(JumpMarker.from_dict(j) for j in data.get("jumps", [])),
            metadata=dict(data.get("metadata", {})),
        )


@dataclass(frozen=True)
class NoiseModel:
    """Quasistatic noise: constant detuning offset and fractional amplitude error."""

    delta_z: float = 0.0
    amplitude_error: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.delta_z) and np.isfinite(self.amplitude_error)):
            raise PreconditionError("noise parameters must be finite")


@dataclass(frozen=True)
class Unitary2:
    """A validated 2x2 unitary."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (2, 2):
            raise PreconditionError("Unitary2 needs a 2x2 matrix")
        if np.max(np.abs(m.conj().T @ m - np.eye(2))) > 1e-10:
            raise NumericalError("matrix is not unitary to 1e-10")
        if abs(abs(np.linalg.det(m)) - 1.0) > 1e-10:
            raise NumericalError("determinant modulus deviates from 1")
        object.__setattr__(self, "matrix", _freeze(m))

    @classmethod
    def identity(cls) -> "Unitary2":
        return cls(np.eye(2, dtype=complex))

    def flat8(self) -> list[float]:
        """Re/Im of the four entries, row-major."""
        m = self.matrix
        out: list[float] = []
        for i in range(2):
            for j in range(2):
                out.extend([float(m[i, j].real), float(m[i, j].imag)])
        return out

    @classmethod
    def from_flat8(cls, vals: Sequence[float]) -> "Unitary2":
        v = np.asarray(vals, dtype=float)
        m = (v[0::2] + 1j * v[1::2]).reshape(2, 2)
        return cls(m)


@dataclass(frozen=True)
class EvolutionRecord:
    """Propagator samples U(t) with U(0) = identity."""

    t: np.ndarray
    us: np.ndarray
    jumps: tuple[int, ...] = ()

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        us = np.asarray(self.us, dtype=complex)
        if us.shape != (len(t), 2, 2):
            raise PreconditionError("record needs us with shape (n, 2, 2)")
        if np.max(np.abs(us[0] - np.eye(2))) > 1e-12:
            raise PreconditionError("record must start at the identity")
        dev = np.abs(np.einsum("nij,nik->njk", us.conj(), us) - np.eye(2))
        if float(dev.max()) > 1e-10:
            raise NumericalError("record contains non-unitary samples")
        object.__setattr__(self, "t", _freeze(t))
        us.setflags(write=False)
        object.__setattr__(self, "us", us)
        object.__setattr__(self, "jumps", tuple(int(j) for j in self.jumps))

    @property
    def grid_spacing(self) -> float:
        return float(self.t[1] - self.t[0])

    @property
    def final(self) -> Unitary2:
        return Unitary2(self.us[-1])


def _midpoint_coefficients(fields: ControlFields, noise: NoiseModel):
    """Per-step Hamiltonian coefficients (ax, ay, az) at step midpoints."""
    right_o, right_p, right_d = fields.omega, fields.phi, fields.delta
    left_o = np.array(right_o)
    left_p = np.array(right_p)
    left_d = np.array(right_d)
    for m in fields.jumps:
        left_o[m.index] = m.omega_left
        left_p[m.index] = m.phi_left
        left_d[m.index] = m.delta_left
    om = 0.5 * (right_o[:-1] + left_o[1:]) * (1.0 + noise.amplitude_error)
    pm = 0.5 * (right_p[:-1] + left_p[1:])
    dm = 0.5 * (right_d[:-1] + left_d[1:])
    ax = 0.5 * om * np.cos(pm)
    ay = 0.5 * om * np.sin(pm)
    az = 0.5 * dm + noise.delta_z
    return ax, ay, az


def _check_step_size(fields: ControlFields, noise: NoiseModel):
    h = fields.grid_spacing
    rate = max(
        float(np.max(np.abs(fields.omega))) * (1.0 + abs(noise.amplitude_error)),
        float(np.max(np.abs(fields.delta))) + 2.0 * abs(noise.delta_z),
    )
    if h * rate >= _STEP_BOUND:
        raise PreconditionError(
            f"step size too large: h*max_rate = {h * rate:.3g} >= {_STEP_BOUND}"
        )


def propagate(fields: ControlFields, noise: NoiseModel | None = None) -> EvolutionRecord:
    """Time-ordered evolution under the (optionally noisy) control fields."""
    noise = noise or NoiseModel()
    _check_step_size(fields, noise)
    ax, ay, az = _midpoint_coefficients(fields, noise)
    steps = su2_steps(ax, ay, az, fields.grid_spacing)
    prefixes = ordered_prefix(steps)
    us = np.concatenate([np.eye(2, dtype=complex)[None], prefixes], axis=0)
    return EvolutionRecord(t=fields.t, us=us, jumps=tuple(fields.jump_indices))


def final_unitaries(fields: ControlFields,
                    noises: Iterable[NoiseModel]) -> list[Unitary2]:
    """Final propagators for a batch of noise values (vectorized over noise)."""
    noise_list = list(noises)
    out: list[Unitary2] = []
    chunk = 64
    for start in range(0, len(noise_list), chunk):
        part = noise_list[start:start + chunk]
        for nm in part:
            _check_step_size(fields, nm)
        coeffs = [_midpoint_coefficients(fields, nm) for nm in part]
        ax = np.stack([c[0] for c in coeffs])
        ay = np.stack([c[1] for c in coeffs])
        az = np.stack([c[2] for c in coeffs])
        steps = su2_steps(ax, ay, az, fields.grid_spacing)
        finals = ordered_product(steps)
        out.extend(Unitary2(finals[i]) for i in range(len(part)))
    return out


def error_curve(fields: ControlFields) -> SpaceCurve:
    """First-order noise response curve r(t) of the control fields.

    r(t) is the Pauli vector of the running integral of U^dag sz U along the
    ideal evolution; its derivative is a unit vector, so the output is
    arc-length parameterized by construction (asserted).
    """
    rec = propagate(fields)
    conj = np.einsum("nji,jk,nkl->nil", rec.us.conj(), SIGMA_Z, rec.us)
    tangent = pauli_vector(conj)
    norms = np.linalg.norm(tangent, axis=1)
    if float(np.max(np.abs(norms - 1.0))) > 1e-10:
        raise NumericalError("error-curve tangent lost unit norm")
    points = cumulative_integral(tangent, fields.grid_spacing)
    meta = {"source": "error_curve", "jumps": fields.jump_indices}
    meta.update({k: v for k, v in fields.metadata.items() if k != "jumps"})
    return SpaceCurve(t=fields.t, points=points, metadata=meta, d1=tangent)


def magnus_a1(fields: ControlFields) -> np.ndarray:
    """Endpoint of the error curve: the leading noise-error integral."""
    return np.array(error_curve(fields).points[-1])


def gate_fidelity(ideal: Unitary2 | np.ndarray, real: Unitary2 | np.ndarray) -> float:
    """Two-level average gate fidelity.

    F = (1/6) Tr(Ur^dag Ur) + (1/6) |Tr(Ui^dag Ur)|^2; equals 1 iff the gates
    agree up to global phase (for unitary inputs).
    """
    ui = ideal.matrix if isinstance(ideal, Unitary2) else np.asarray(ideal, complex)
    ur = real.matrix if isinstance(real, Unitary2) else np.asarray(real, complex)
    term1 = float(np.trace(ur.conj().T @ ur).real) / 6.0
    term2 = abs(np.trace(ui.conj().T @ ur)) ** 2 / 6.0
    return term1 + term2


def interaction_frame_transform(fields: ControlFields) -> ControlFields:
    """Absorb the detuning into the phase field.

    Returns the two-field Hamiltonian with Delta = 0 and
    Phi_new = Phi - cumulative integral of Delta, which generates the same
    first-order noise response curve.
    """
    psi = cumulative_integral(fields.delta, fields.grid_spacing)
    new_phi = fields.phi - psi
    new_jumps = tuple(
        JumpMarker(m.index, m.omega_left, m.phi_left - float(psi[m.index]), 0.0)
        for m in fields.jumps
    )
    meta = dict(fields.metadata)
    meta["frame"] = "detuning_rotating"
    return ControlFields(t=fields.t, omega=fields.omega, phi=new_phi,
                         delta=np.zeros_like(fields.delta), jumps=new_jumps,
                         metadata=meta)


def omega_bar(fields: ControlFields) -> float:
    """Time-averaged driving strength (1/T) integral |Omega| dt."""
    return float(cumulative_integral(np.abs(fields.omega),
                                     fields.grid_spacing)[-1] / fields.duration)
