"""Bloch-sphere holonomy: path/field mapping and phase bookkeeping.

A holonomic path (theta, phi) with the parallel-transport phase alpha maps
one-to-one onto the three control fields; both directions live here, along
with the cyclic-evolution geometric phase and the frame-dependent dynamical
phase split.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import tolerances
from .dynamics import ControlFields, EvolutionRecord, JumpMarker
from .errors import PreconditionError
from .numerics import (
    cumulative_integral,
    segmented_derivative,
    wrap_to_pi,
)

# amplitude floor below which a state component makes the azimuth undefined
_POLE_AMP_EPS = 1e-9
# polar-angle margin used when flagging under-resolved pole transits
_TRANSIT_THETA_EPS = 1e-2
# polar-angle margin inside which azimuth derivatives are not trusted
_POLE_PROXIMITY_ANGLE = 3e-3


def pole_conditioning_flags(theta: np.ndarray) -> np.ndarray:
    """Samples too close to a pole for azimuth differencing to be trusted.

    The azimuth turns at a rate of order theta'/theta near a pole, so finite
    differences need the pole distance to exceed several grid steps of polar
    motion; below that (or below a fixed floor) the sample is flagged.
    """
    theta = np.asarray(theta, dtype=float)
    dist = np.minimum(theta, np.pi - theta)
    step = np.empty_like(theta)
    step[1:-1] = 0.5 * np.abs(theta[2:] - theta[:-2])
    step[0] = np.abs(theta[1] - theta[0])
    step[-1] = np.abs(theta[-1] - theta[-2])
    return dist < np.maximum(_POLE_PROXIMITY_ANGLE, 12.0 * step)


@dataclass(frozen=True)
class BlochPath:
    """Trajectory (theta, phi) with accumulated phase alpha of the k=0 state.

    ``flags`` marks samples where phi was continued by interpolation (exact
    pole samples) or is otherwise unreliable; ``jumps`` is a tuple of
    (index, dphi) azimuth discontinuities located at pole transits: the
    stored phi is continuous and the jumps carry the removed steps.
    """

    t: np.ndarray
    theta: np.ndarray
    phi: np.ndarray
    alpha: np.ndarray
    flags: np.ndarray | None = None
    jumps: tuple[tuple[int, float], ...] = ()
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        for name in ("theta", "phi", "alpha"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != t.shape:
                raise PreconditionError(f"{name} must share the grid")
            arr = np.ascontiguousarray(arr)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        t = np.ascontiguousarray(t)
        t.setflags(write=False)
        object.__setattr__(self, "t", t)
        if self.flags is None:
            object.__setattr__(self, "flags", np.zeros(len(t), dtype=bool))
        else:
            fl = np.ascontiguousarray(np.asarray(self.flags, dtype=bool))
            fl.setflags(write=False)
            object.__setattr__(self, "flags", fl)
        object.__setattr__(self, "jumps",
                           tuple((int(i), float(d)) for i, d in self.jumps))

    @property
    def grid_spacing(self) -> float:
        return float(self.t[1] - self.t[0])

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0])

    def is_cyclic(self, tol: float | None = None) -> bool:
        tol = tolerances.ANGLE_TOL if tol is None else tol
        if abs(self.theta[-1] - self.theta[0]) > tol:
            return False
        if np.sin(self.theta[0]) > tol:  # azimuth condition is vacuous at poles
            dphi = self.phi[-1] - self.phi[0] + sum(d for _, d in self.jumps)
            if abs(dphi - 2.0 * np.pi * round(dphi / (2.0 * np.pi))) > tol:
                return False
        return True

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": "bloch_path",
            "metadata": dict(self.metadata),
            "t": self.t.tolist(),
            "theta": self.theta.tolist(),
            "phi": self.phi.tolist(),
            "alpha": self.alpha.tolist(),
            "flags": np.asarray(self.flags).astype(int).tolist(),
            "jumps": [[i, d] for i, d in self.jumps],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "BlochPath":
        return cls(
            t=np.asarray(data["t"], float),
            theta=np.asarray(data["theta"], float),
            phi=np.asarray(data["phi"], float),
            alpha=np.asarray(data["alpha"], float),
            flags=np.asarray(data.get("flags", []), dtype=bool)
            if data.get("flags") is not None and len(data.get("flags", [])) else None,
            jumps=tuple((int(i), float(d)) for i, d in data.get("jumps", [])),
            metadata=dict(data.get("metadata", {})),
        )


@dataclass(frozen=True)
class PhaseReport:
    """Total/dynamical/geometric phase split in a stated frame."""

    beta_total: float
    beta_dynamical: float
    beta_geometric: float
    frame: str

    def __post_init__(self):
        resid = wrap_to_pi(self.beta_geometric - (self.beta_total - self.beta_dynamical))
        if abs(float(resid)) > 1e-8:
            raise PreconditionError("phase split is inconsistent")

    def to_dict(self) -> dict[str, Any]:
        return {"kind": "phase_report", "frame": self.frame,
                "beta_total": self.beta_total,
                "beta_dynamical": self.beta_dynamical,
                "beta_geometric": self.beta_geometric}


def pt_residual(path: BlochPath) -> np.ndarray:
    """Parallel-transport residual alpha' + (1 - cos theta) phi' / 2 per sample.

    Flagged samples and small windows around azimuth jumps are returned as 0
    (they carry no meaningful finite-difference information).
    """
    h = path.grid_spacing
    breaks = [i for i, _ in path.jumps]
    alpha_dot = segmented_derivative(path.alpha, h, 1, breaks)
    phi_dot = segmented_derivative(path.phi, h, 1, breaks)
    resid = alpha_dot + 0.5 * (1.0 - np.cos(path.theta)) * phi_dot
    mask = np.asarray(path.flags).copy()
    for i, _ in path.jumps:
        mask[max(0, i - 4):i + 4] = True
    resid[mask] = 0.0
    return resid


def fields_from_path(path: BlochPath, pt_tol: float | None = None) -> ControlFields:
    """Control fields generating a given holonomic trajectory.

    Requires the parallel-transport condition; raises otherwise. The drive
    amplitude comes out nonnegative; azimuth discontinuities of the path
    become declared field jumps (placed at the sample after a pole transit).
    """
    pt_tol = tolerances.PT_TOL if pt_tol is None else pt_tol
    resid = pt_residual(path)
    worst = float(np.max(np.abs(resid)))
    if worst > pt_tol:
        raise PreconditionError(
            f"path violates parallel transport (residual {worst:.3e} > {pt_tol:.1e})"
        )
    h = path.grid_spacing
    breaks = [i for i, _ in path.jumps]
    th, ph = path.theta, physical_phi(path)
    th_dot = segmented_derivative(th, h, 1, breaks)
    ph_dot = segmented_derivative(path.phi, h, 1, breaks)
    sin_th, cos_th = np.sin(th), np.cos(th)
    omega = np.sqrt(th_dot**2 + (sin_th * cos_th * ph_dot) ** 2)
    re = -(th_dot * np.sin(ph) + ph_dot * sin_th * cos_th * np.cos(ph))
    im = th_dot * np.cos(ph) - ph_dot * sin_th * cos_th * np.sin(ph)
    raw_phi_field = np.arctan2(im, re)
    # unwrap segment-wise; drive phase is defined only where omega > 0
    segs = [0] + [i for i, _ in path.jumps] + [len(th)]
    phi_field = np.array(raw_phi_field)
    for a, b in zip(segs[:-1], segs[1:]):
        phi_field[a:b] = np.unwrap(raw_phi_field[a:b])
    delta = sin_th**2 * ph_dot
    markers = []
    for i, _ in path.jumps:
        markers.append(JumpMarker(index=i, omega_left=float(omega[i - 1]),
                                  phi_left=float(phi_field[i - 1]),
                                  delta_left=float(delta[i - 1])))
    meta = dict(path.metadata)
    meta["source"] = "fields_from_path"
    return ControlFields(t=path.t, omega=omega, phi=phi_field, delta=delta,
                         jumps=tuple(markers), metadata=meta)


def bloch_path_from_evolution(rec: EvolutionRecord) -> BlochPath:
    """Read (theta, phi, alpha) off the first column of the propagator.

    phi is unwrapped continuously; at exact poles it is continued by
    interpolation and flagged. Field jumps recorded on the evolution, as well
    as detected under-resolved pole transits, are turned into azimuth jump
    markers so downstream integrals can weight them explicitly.
    """
    c0 = rec.us[:, 0, 0]
    c1 = rec.us[:, 1, 0]
    theta = 2.0 * np.arctan2(np.abs(c1), np.abs(c0))
    alpha = np.unwrap(np.angle(c0))
    exact_pole = (np.abs(c0) < _POLE_AMP_EPS) | (np.abs(c1) < _POLE_AMP_EPS)
    raw_phi = np.angle(c1 * np.conj(c0))
    if exact_pole.any():
        good = ~exact_pole
        raw_phi = np.array(raw_phi)
        if not good.any():
            raw_phi[:] = 0.0  # the path never leaves a pole; any azimuth works
        else:
            idx = np.arange(len(raw_phi), dtype=float)
            raw_phi[exact_pole] = np.interp(idx[exact_pole], idx[good], raw_phi[good])
    # flag the broader pole-proximity zone: azimuths there are ill-conditioned
    # for finite differencing even when formally defined
    flags = exact_pole | pole_conditioning_flags(theta)

    # candidate jump locations: declared field switches, plus any step whose
    # raw azimuth moves by more than pi/2 while hugging a pole (under-resolved
    # transit; the swing happens inside one step)
    jump_at = set(int(j) for j in rec.jumps)
    step = np.abs(wrap_to_pi(np.diff(raw_phi)))
    near_pole = np.minimum(theta, np.pi - theta) < _TRANSIT_THETA_EPS
    for i in np.flatnonzero((step > 0.5 * np.pi) & near_pole[:-1]):
        jump_at.add(int(i) + 1)

    # stored phi is continuous: each segment is unwrapped and glued to the
    # previous one; the removed steps are recorded as (index, dphi) markers
    jump_list = sorted(j for j in jump_at if 0 < j < len(raw_phi))
    phi = np.array(raw_phi)
    jumps: list[tuple[int, float]] = []
    segs = [0] + jump_list + [len(phi)]
    prev_end_raw = 0.0
    prev_end_stored = 0.0
    for a, b in zip(segs[:-1], segs[1:]):
        seg = np.unwrap(raw_phi[a:b])
        if a == 0:
            offset = 0.0
        else:
            d = float(wrap_to_pi(seg[0] - prev_end_raw))
            jumps.append((a, d))
            offset = prev_end_stored - seg[0]  # glue continuously, drop the jump
        phi[a:b] = seg + offset
        prev_end_raw = seg[-1]
        prev_end_stored = phi[b - 1]
    meta = {"source": "bloch_path_from_evolution"}
    return BlochPath(t=rec.t, theta=theta, phi=phi, alpha=alpha,
                     flags=flags, jumps=tuple(jumps), metadata=meta)


def physical_phi(path: BlochPath) -> np.ndarray:
    """Azimuth samples with the recorded pole-transit jumps re-added.

    The stored phi is continuous (jumps removed); absolute-azimuth consumers
    such as the field map need the physical values.
    """
    phi = np.array(path.phi)
    for i, d in path.jumps:
        phi[i:] += d
    return phi


def aa_geometric_phase(path: BlochPath, require_cyclic: bool = True) -> float:
    """Cyclic-evolution geometric phase -1/2 int (1 - cos theta) dphi.

    Trapezoid rule on the stored continuous phi; azimuth jump markers add
    -1/2 (1 - cos theta) dphi evaluated at the pre-transit sample, which
    reduces to -dphi for transits through the south pole.
    """
    if require_cyclic and not path.is_cyclic():
        raise PreconditionError("path is not cyclic; geometric phase undefined")
    w = 1.0 - np.cos(path.theta)
    dphi = np.diff(path.phi)
    beta = -0.5 * float(np.sum(0.5 * (w[:-1] + w[1:]) * dphi))
    for i, d in path.jumps:
        beta += -0.5 * w[i - 1] * d
    return beta


def _segmented_time_integral(values: np.ndarray, spacing: float,
                             breaks: list[int]) -> float:
    """Integral of sampled data whose derivative may jump at ``breaks``."""
    n = len(values)
    bounds = [0] + sorted(set(b for b in breaks if 0 < b < n)) + [n]
    total = 0.0
    for a, b in zip(bounds[:-1], bounds[1:]):
        seg = values[a:b]
        if len(seg) >= 4:
            total += float(cumulative_integral(seg, spacing)[-1])
        elif len(seg) >= 2:
            total += float(np.trapezoid(seg, dx=spacing))
    # each internal boundary step [b-1, b] is not covered above; trapezoid it
    for b in bounds[1:-1]:
        total += 0.5 * spacing * (values[b - 1] + values[b])
    return total


def _hc_expectation(rec: EvolutionRecord, fields: ControlFields) -> np.ndarray:
    """<psi_0(t)| H_c(t) |psi_0(t)> along the evolution."""
    c0 = rec.us[:, 0, 0]
    c1 = rec.us[:, 1, 0]
    cross = np.conj(c0) * c1
    sx = 2.0 * cross.real
    sy = 2.0 * cross.imag
    sz = np.abs(c0) ** 2 - np.abs(c1) ** 2
    hx = 0.5 * fields.omega * np.cos(fields.phi)
    hy = 0.5 * fields.omega * np.sin(fields.phi)
    hz = 0.5 * fields.delta
    return hx * sx + hy * sy + hz * sz


def frame_shift_integral(rec: EvolutionRecord, fields: ControlFields) -> float:
    """int (Delta/2)(1 - 2 sin^2(theta/2)) dt: the dynamical-phase frame shift."""
    c0 = rec.us[:, 0, 0]
    c1 = rec.us[:, 1, 0]
    cos_theta = np.abs(c0) ** 2 - np.abs(c1) ** 2
    vals = 0.5 * fields.delta * cos_theta
    return _segmented_time_integral(vals, fields.grid_spacing,
                                    list(fields.jump_indices))


def dynamical_phase(rec: EvolutionRecord, fields: ControlFields,
                    frame: str = "lab") -> PhaseReport:
    """Phase split beta_total = beta_dynamical + beta_geometric in a frame.

    In the lab frame beta_d = -int <psi|H_c|psi> dt and beta_total is the
    accumulated phase of the k=0 state. In the frame rotating with the
    detuning, the generator is H_eff = R^dag H_c R - (Delta/2) sz, which
    shifts beta_d by the frame-shift integral. The geometric part is the
    phase of the physical projective path and carries no frame label: the
    frame choice only moves weight between the total and dynamical parts,
    so the reported beta_total in the rotating frame is beta_g plus the
    shifted beta_d.
    """
    if frame not in ("lab", "detuning_rotating"):
        raise PreconditionError(f"unknown frame {frame!r}")
    h = fields.grid_spacing
    c0 = rec.us[:, 0, 0]
    alpha = np.unwrap(np.angle(c0))
    beta_total = float(alpha[-1] - alpha[0])
    hc = _hc_expectation(rec, fields)
    beta_d = -_segmented_time_integral(hc, h, list(fields.jump_indices))
    beta_g = beta_total - beta_d
    if frame == "detuning_rotating":
        beta_d += frame_shift_integral(rec, fields)
        beta_total = beta_g + beta_d
    return PhaseReport(beta_total=beta_total, beta_dynamical=beta_d,
                       beta_geometric=beta_g, frame=frame)


@dataclass(frozen=True)
class ToyTwoLevel:
    """Static two-level model |psi> = a e^{-i En t}|n> + b e^{-i Em t}|m>.

    Cyclic at T = 2 pi / (En - Em). A perturbation of strength eps rescales
    both energies to (1 - eps) E, so the splitting shrinks by the factor
    (1 - eps) while the state composition is untouched.
    """

    e_upper: float = 1.0
    e_lower: float = -1.0
    amp_upper: complex = complex(np.sqrt(0.5))
    amp_lower: complex = complex(np.sqrt(0.5))

    def __post_init__(self):
        if self.e_upper <= self.e_lower:
            raise PreconditionError("need e_upper > e_lower")
        norm = abs(self.amp_upper) ** 2 + abs(self.amp_lower) ** 2
        if abs(norm - 1.0) > 1e-12:
            raise PreconditionError("state amplitudes must be normalized")


def aa_phase_robustness(model: ToyTwoLevel, eps: float) -> tuple[float, float, float]:
    """Closed-form (beta_g, beta_total, beta_d) of the perturbed static model.

    The geometric phase equals -2 pi |b|^2 up to a cubic remainder
    proportional to b^2 (1 - b^2)(1 - 2 b^2) (2 pi eps)^3 / 6, while the
    dynamical phase moves linearly in eps.
    """
    if abs(eps) >= 0.3:
        raise PreconditionError("perturbation must satisfy |eps| < 0.3")
    de = model.e_upper - model.e_lower
    a2 = abs(model.amp_upper) ** 2
    b2 = abs(model.amp_lower) ** 2
    en_p = (1.0 - eps) * model.e_upper
    em_p = (1.0 - eps) * model.e_lower
    beta_total = -2.0 * np.pi * en_p / de + np.arctan2(
        b2 * np.sin((1.0 - eps) * 2.0 * np.pi),
        b2 * np.cos((1.0 - eps) * 2.0 * np.pi) + a2,
    )
    beta_d = -(2.0 * np.pi / de) * (a2 * en_p + b2 * em_p)
    beta_g = beta_total - beta_d
    return float(beta_g), float(beta_total), float(beta_d)
