"""Doubly geometric gate synthesis.

Turns a smooth closed error curve into the control fields whose evolution is
holonomic and whose first-order noise-response curve is the designed curve
itself, and provides the two concrete gate families built that way: the
twisted-curve family (fully three-dimensional, all three fields active) and
the eight-pulse extended orange-slice family (piecewise planar).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from . import tolerances
from .curves import (
    SpaceCurve,
    arc_length_reparameterize,
    closure_report,
    derivatives,
    frenet,
    integrate_frenet,
    require_closed,
    twist,
    validate_arclength,
)
from .dynamics import (
    ControlFields,
    JumpMarker,
    Unitary2,
    error_curve,
    propagate,
)
from .errors import NumericalError, PreconditionError
from .holonomy import (
    BlochPath,
    aa_geometric_phase,
    bloch_path_from_evolution,
    pole_conditioning_flags,
)
from .numerics import (
    cumulative_integral,
    integral,
    linear_fit_r2,
    patch_samples,
    rodrigues,
    wrap_to_pi,
)

# twist window: each generating pulse spans this many inverse-amplitude units
# on either side of its center
SECH_WINDOW = 10.0

# outer-pulse center of the eight-sech sequence. The printed one-decimal
# value (20.6) leaves the per-half loop visibly open; the closure condition
# (zero net transverse displacement per half) pins the center to this root,
# which rounds to the printed value.
OUTER_SECH_CENTER = 20.550448215673295
INNER_SECH_CENTER = 10.6
SEGMENT_BOUNDARY = 15.6
HALF_WINDOW = 25.6

# largest twist constant the family is validated for
MAX_TWIST = np.pi / 500.0

_ZDOT_FLOOR = 1e-7          # |z'| below this flags an equator-crossing sample
_POLE_FLOOR = 1e-10         # |1 - z'^2| below this flags a pole sample
_EQUATOR_PAD = 4            # minimum samples patched beside an equator crossing
_EQUATOR_PAD_TIME = 0.005   # pole-influence half-width in curve-time units


@dataclass(frozen=True)
class DogDesign:
    """A synthesized doubly geometric gate.

    Carries the designed error curve, the control fields that realize it,
    the holonomic Bloch path, and the geometric phase obtained both from the
    synthesis integral (``beta_g``, unwrapped) and from propagating the
    fields (``beta_g_propagated``, principal branch).
    """

    error_curve: SpaceCurve
    fields: ControlFields
    path: BlochPath
    beta_g: float
    beta_g_propagated: float
    gate: Unitary2
    family: str = "custom"
    parameters: dict[str, Any] = field(default_factory=dict)
    metadata: dict[str, Any] = field(default_factory=dict)

    @property
    def beta_discrepancy(self) -> float:
        """|beta_g(integral) - beta_g(propagated)| modulo 2 pi."""
        return abs(float(wrap_to_pi(self.beta_g - self.beta_g_propagated)))

    @property
    def gate_offdiagonal(self) -> float:
        m = self.gate.matrix
        return float(max(abs(m[0, 1]), abs(m[1, 0])))

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": "dog_design",
            "family": self.family,
            "parameters": dict(self.parameters),
            "metadata": dict(self.metadata),
            "beta_g": self.beta_g,
            "beta_g_propagated": self.beta_g_propagated,
            "gate": self.gate.flat8(),
            "curve": self.error_curve.to_dict(),
            "fields": self.fields.to_dict(),
            "path": self.path.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "DogDesign":
        return cls(
            error_curve=SpaceCurve.from_dict(data["curve"]),
            fields=ControlFields.from_dict(data["fields"]),
            path=BlochPath.from_dict(data["path"]),
            beta_g=float(data["beta_g"]),
            beta_g_propagated=float(data["beta_g_propagated"]),
            gate=Unitary2.from_flat8(data["gate"]),
            family=str(data.get("family", "custom")),
            parameters=dict(data.get("parameters", {})),
            metadata=dict(data.get("metadata", {})),
        )


# ---------------------------------------------------------------------------
# step 2-4: fields, path and phase from a closed curve
# ---------------------------------------------------------------------------

def _alignment_rotation(tangent0: np.ndarray) -> np.ndarray | None:
    """Rotation taking the initial tangent onto +z, or None if aligned."""
    t0 = tangent0 / np.linalg.norm(tangent0)
    zhat = np.array([0.0, 0.0, 1.0])
    cross = np.cross(t0, zhat)
    s = np.linalg.norm(cross)
    c = float(t0 @ zhat)
    if s < 1e-13 and c > 0:
        return None
    if s < 1e-13:  # anti-parallel: rotate about x
        return rodrigues(np.array([[np.pi, 0.0, 0.0]]))[0]
    axis = cross / s
    angle = np.arctan2(s, c)
    return rodrigues((axis * angle)[None, :])[0]


def _pole_patched(values: np.ndarray, denominator: np.ndarray,
                  zdot: np.ndarray, floor: float,
                  pad: int = _EQUATOR_PAD) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate a 0/0 integrand, patching degenerate and equator samples.

    The integrand is smooth through the degeneracies; flagged samples are
    replaced by local polynomial fits of their healthy neighbors, which is
    the finite limit for smooth curves.
    """
    bad = np.abs(denominator) < floor * max(float(np.max(np.abs(denominator))), 1e-30)
    sign_change = np.flatnonzero(np.sign(zdot[:-1]) * np.sign(zdot[1:]) < 0)
    for i in sign_change:
        bad[max(0, i - pad):i + pad + 2] = True
    bad |= np.abs(zdot) < _ZDOT_FLOOR
    patched = patch_samples(values, bad, fit_points=max(8, pad)) if bad.any() else values
    return patched, bad


def synthesize(curve: SpaceCurve, family: str = "custom",
               parameters: dict[str, Any] | None = None) -> DogDesign:
    """Build the doubly geometric design generated by a closed error curve.

    The curve must be smooth, arc-length parameterized, closed within the
    closure tolerance, and start with tangent +z (curves with other initial
    tangents are rigidly rotated first and the rotation recorded). The drive
    amplitude is the curvature; the detuning and drive phase come from the
    step-2 quotients with pole and equator samples evaluated by local limits;
    the geometric phase is the step-4 integral. The fields are then
    propagated to cross-validate the phase and to record the actual gate.
    """
    meta: dict[str, Any] = {}
    rep = closure_report(curve)
    tol = tolerances.closure_tol(curve.length)
    require_closed(curve, tol)
    validate_arclength(curve)
    if len(curve.t) < 7:
        raise PreconditionError("curve too coarsely sampled for synthesis")

    d1 = derivatives(curve, 1)
    rot = _alignment_rotation(d1[0])
    if rot is not None:
        if rep.tangent_vs_zhat > tol:
            meta["pre_rotation"] = rot.tolist()
        curve = curve.rotated(rot)
        d1 = derivatives(curve, 1)
    if float(np.linalg.norm(curve.points[0])) > 0.0:
        meta["pre_translation"] = (-curve.points[0]).tolist()
        curve = curve.translated(-curve.points[0])

    h = curve.grid_spacing
    jumps = curve.jumps
    d1 = derivatives(curve, 1)
    d2 = derivatives(curve, 2)
    d3 = derivatives(curve, 3)
    zdot = np.clip(d1[:, 2], -1.0, 1.0)
    numer = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]

    omega = np.linalg.norm(d2, axis=1)
    cross = np.cross(d1, d2)
    cross2 = np.einsum("ij,ij->i", cross, cross)
    tau_defined = np.sqrt(cross2) > tolerances.KAPPA_FLOOR
    tau = np.zeros_like(omega)
    np.divide(np.einsum("ij,ij->i", cross, d3), cross2, out=tau, where=tau_defined)
    if not tau_defined.all():
        meta["torsion_zeroed_samples"] = int((~tau_defined).sum())

    with np.errstate(divide="ignore", invalid="ignore"):
        delta_raw = numer / zdot
        phidot_raw = numer / (zdot * (1.0 - zdot**2))
        bg_raw = numer / (zdot * (1.0 + zdot))
    pad = max(_EQUATOR_PAD, int(round(_EQUATOR_PAD_TIME / h)))
    delta, bad_delta = _pole_patched(delta_raw, zdot, zdot, 1e-9, pad)
    den_phi = zdot * (1.0 - zdot**2)
    phidot, bad_phi = _pole_patched(phidot_raw, den_phi, zdot, _POLE_FLOOR, pad)
    # endpoints of a z-basis curve always sit at the pole: force the limit
    end_bad = np.zeros(len(zdot), bool)
    end_bad[[0, -1]] = np.abs(1.0 - zdot[[0, -1]] ** 2) < 1e-6
    if end_bad.any():
        phidot = patch_samples(phidot, end_bad)
    den_bg = zdot * (1.0 + zdot)
    bg_integrand, bad_bg = _pole_patched(-0.5 * bg_raw, den_bg, zdot, _POLE_FLOOR, pad)

    # at a declared jump the acceleration direction is discontinuous (sign
    # corners flip it by pi; an inter-plane switch rotates it by the opening
    # angle); the drive phase must step by the signed angle between the two
    # directions about the shared tangent
    phase_steps: dict[int, float] = {}
    for j in jumps:
        if omega[j - 1] > 10 * tolerances.KAPPA_FLOOR and omega[j] > 10 * tolerances.KAPPA_FLOOR:
            a, b = d2[j - 1], d2[j]
            t_axis = d1[j]
            ang = float(np.arctan2(np.cross(a, b) @ t_axis, a @ b))
            if abs(ang) > 1e-6:
                phase_steps[j] = ang

    kappa0 = omega[0]
    phi0_drive = 0.0
    if kappa0 > 10 * tolerances.KAPPA_FLOOR:
        phi0_drive = float(np.arctan2(-d2[0, 0], d2[0, 1]))
    phi_field = phi0_drive + cumulative_integral(tau + delta, h)
    for j, ang in phase_steps.items():
        phi_field[j:] += ang

    theta = np.arccos(zdot)
    phi_path = cumulative_integral(phidot, h)
    alpha = cumulative_integral(-0.5 * (1.0 - np.cos(theta)) * phidot, h)
    beta_g = integral(bg_integrand, h)

    markers = tuple(
        JumpMarker(index=j, omega_left=float(omega[j - 1]),
                   phi_left=float(phi_field[j - 1]),
                   delta_left=float(delta[j - 1]))
        for j in jumps
    )
    fields = ControlFields(
        t=curve.t, omega=omega, phi=phi_field, delta=delta, jumps=markers,
        metadata={"source": "synthesize", "family": family},
    )
    # pole-proximity zones: the azimuth is ill-conditioned and the frame
    # swings rapidly wherever the tantrix hugs a pole, so flag those samples
    # for consumers that difference the path; dilate so patch-boundary kinks
    # are covered as well
    flags = bad_delta | bad_phi | bad_bg | pole_conditioning_flags(theta)
    flags = np.convolve(flags.astype(int), np.ones(11, dtype=int), mode="same") > 0
    path = BlochPath(t=curve.t, theta=theta, phi=phi_path, alpha=alpha,
                     flags=flags, metadata={"source": "synthesize"})

    rec = propagate(fields)
    gate = rec.final
    beta_prop = float(np.angle(gate.matrix[0, 0]))
    meta.update({
        "closure_endpoint_gap": rep.endpoint_gap,
        "closure_tangent_gap": rep.tangent_gap,
        "closure_tol": tol,
        "patched_samples": int(flags.sum()),
        "phase_steps": {str(j): ang for j, ang in phase_steps.items()},
    })
    return DogDesign(
        error_curve=curve, fields=fields, path=path, beta_g=float(beta_g),
        beta_g_propagated=beta_prop, gate=gate, family=family,
        parameters=dict(parameters or {}), metadata=meta,
    )


# ---------------------------------------------------------------------------
# family 1: twisted three-dimensional curves
# ---------------------------------------------------------------------------

def double_sech_curvature(n: int) -> tuple[np.ndarray, float]:
    """Two sequential unit-amplitude sech pulses on [0, 4 W]; returns (kappa, h)."""
    span = 4.0 * SECH_WINDOW
    t = np.linspace(0.0, span, n)
    centers = np.where(t <= 2.0 * SECH_WINDOW, SECH_WINDOW, 3.0 * SECH_WINDOW)
    kappa = 1.0 / np.cosh(t - centers)
    return kappa, float(t[1] - t[0])


def untwisted_planar_curve(n: int = tolerances.GRID_POINTS) -> SpaceCurve:
    """The closed planar double-sech error curve in the yz-plane."""
    kappa, h = double_sech_curvature(n)
    return integrate_frenet(kappa, 0.0, h, metadata={"family": "twisted_3d",
                                                     "stage": "planar"})


def _rescale_design(design: DogDesign, omega0: float) -> DogDesign:
    """Rescale a unit-amplitude design: time stretches by 1/omega0."""
    if omega0 == 1.0:
        return design
    if omega0 <= 0:
        raise PreconditionError("omega0 must be positive")
    c = design.error_curve
    curve = SpaceCurve(
        t=c.t / omega0, points=c.points / omega0, metadata=dict(c.metadata),
        d1=c.d1, d2=None if c.d2 is None else c.d2 * omega0,
        d3=None if c.d3 is None else c.d3 * omega0**2,
    )
    f = design.fields
    fields = ControlFields(
        t=f.t / omega0, omega=f.omega * omega0, phi=f.phi,
        delta=f.delta * omega0,
        jumps=tuple(JumpMarker(m.index, m.omega_left * omega0, m.phi_left,
                               m.delta_left * omega0) for m in f.jumps),
        metadata=dict(f.metadata),
    )
    p = design.path
    path = BlochPath(t=p.t / omega0, theta=p.theta, phi=p.phi, alpha=p.alpha,
                     flags=p.flags, jumps=p.jumps, metadata=dict(p.metadata))
    return DogDesign(
        error_curve=curve, fields=fields, path=path, beta_g=design.beta_g,
        beta_g_propagated=design.beta_g_propagated, gate=design.gate,
        family=design.family, parameters=dict(design.parameters),
        metadata=dict(design.metadata),
    )


def twisted_3d(xi: float, omega0: float = 1.0,
               n: int = tolerances.GRID_POINTS) -> DogDesign:
    """Doubly geometric gate from a twisted double-sech error curve.

    Builds the planar curve by Frenet integration, twists it about the
    vertical bisector, restores the arc-length parameterization, and runs the
    synthesis. ``omega0`` rescales amplitude and duration after the fact; the
    twist constant parameterizes the unit-amplitude family.
    """
    if abs(xi) > MAX_TWIST:
        raise PreconditionError(f"|xi| <= pi/500 required, got {xi:.3e}")
    planar = untwisted_planar_curve(n)
    curve = twist(planar, xi) if xi != 0.0 else planar
    if xi != 0.0:
        curve = arc_length_reparameterize(curve)
    curve = curve.translated(-curve.points[0])
    design = synthesize(curve, family="twisted_3d",
                        parameters={"xi": float(xi), "omega0": float(omega0),
                                    "window": SECH_WINDOW, "grid_points": int(n)})
    return _rescale_design(design, omega0)


def phase_vs_twist(xi_values: Sequence[float], omega0: float = 1.0,
                   n: int = tolerances.GRID_POINTS) -> list[tuple[float, float]]:
    """Table of (xi, geometric phase) for the twisted family."""
    return [(float(xi), twisted_3d(xi, omega0, n).beta_g) for xi in xi_values]


def twist_for_phase(target_beta: float, table: Sequence[tuple[float, float]]) -> float:
    """Invert a phase table by its linear fit (mild extrapolation allowed)."""
    xs = np.array([row[0] for row in table])
    bs = np.array([row[1] for row in table])
    slope, intercept, r2 = linear_fit_r2(xs, bs)
    if r2 < 0.99:
        raise NumericalError(f"phase-twist table is not linear enough (R^2={r2:.4f})")
    xi = (target_beta - intercept) / slope
    lo, hi = xs.min(), xs.max()
    span = hi - lo
    if not (lo - 0.25 * span <= xi <= hi + 0.25 * span):
        raise PreconditionError("target phase far outside the tabulated range")
    return float(xi)


# ---------------------------------------------------------------------------
# family 2: extended orange slice (eight sech pulses)
# ---------------------------------------------------------------------------

_HALF_SEGMENTS = (
    # (local window start, pulse function) for u in [-25.6, 25.6]
    (-HALF_WINDOW, lambda u: -0.5 / np.cosh(u + OUTER_SECH_CENTER)),
    (-SEGMENT_BOUNDARY, lambda u: 1.0 / np.cosh(u + INNER_SECH_CENTER)),
    (0.0, lambda u: 1.0 / np.cosh(INNER_SECH_CENTER - u)),
    (SEGMENT_BOUNDARY, lambda u: -0.5 / np.cosh(OUTER_SECH_CENTER - u)),
)


def _half_sequence_amplitude(u: np.ndarray) -> tuple[np.ndarray, list[tuple[int, float]]]:
    """Four-pulse drive of one half-sequence, built segment by segment.

    Segments are assigned by index so each boundary sample holds the
    right-limit value exactly; returns (omega, [(boundary index, left limit)]).
    """
    h = float(u[1] - u[0])
    bounds = [int(round((edge - u[0]) / h)) for edge, _ in _HALF_SEGMENTS[1:]]
    omega = np.empty_like(u)
    edges: list[tuple[int, float]] = []
    starts = [0] + bounds
    stops = bounds + [len(u)]
    for (a, b), (_, func) in zip(zip(starts, stops), _HALF_SEGMENTS):
        omega[a:b] = func(u[a:b])
    for idx, (edge, _), (_, left_func) in zip(bounds, _HALF_SEGMENTS[1:], _HALF_SEGMENTS[:-1]):
        edges.append((idx, float(left_func(np.asarray([u[idx]]))[0])))
    return omega, edges


def orange_slice_2d(phi0: float, omega0: float = 1.0, n: int = 20481,
                    renormalize_area: bool = False) -> DogDesign:
    """Doubly geometric gate from two four-sech pole-to-pole half-sequences.

    Each half drives a net pi rotation along one geodesic and traces a closed
    planar loop of the noise-response curve; the drive phase steps to
    ``phi0`` between the halves. The default grid places every pulse-segment
    boundary exactly on a sample (the windows are multiples of 0.4).
    """
    if not -np.pi < phi0 <= np.pi:
        raise PreconditionError("phi0 must lie in (-pi, pi]")
    if (n - 1) % 256:
        raise PreconditionError("need n = 256 k + 1 so segment edges lie on the grid")
    span = 4.0 * HALF_WINDOW
    u = np.linspace(0.0, span, n)
    h = float(u[1] - u[0])
    half = n // 2
    u1 = u[:half + 1] - HALF_WINDOW
    omega_half, edges = _half_sequence_amplitude(u1)
    area = integral(omega_half, h)
    if abs(area - np.pi) > tolerances.AREA_TOL:
        raise NumericalError(
            f"half-sequence rotation off pi by {area - np.pi:.2e} (> area tolerance)"
        )
    scale = float(np.pi / area) if renormalize_area else 1.0
    omega_half = omega_half * scale
    omega = np.concatenate([omega_half, omega_half[1:]])
    phi = np.zeros_like(u)
    phi[half:] = float(phi0)  # the jump sample holds the post-step value
    delta = np.zeros_like(u)

    # markers: three amplitude corners per half plus the phase step between
    # the halves (amplitude is continuous there, sech being even)
    markers = []
    for idx, left_val in edges:
        markers.append(JumpMarker(index=idx, omega_left=left_val * scale,
                                  phi_left=0.0, delta_left=0.0))
    markers.append(JumpMarker(index=half, omega_left=float(omega[half]),
                              phi_left=0.0, delta_left=0.0))
    for idx, left_val in edges:
        markers.append(JumpMarker(index=half + idx, omega_left=left_val * scale,
                                  phi_left=float(phi0), delta_left=0.0))

    fields = ControlFields(t=u, omega=omega, phi=phi, delta=delta,
                           jumps=tuple(markers),
                           metadata={"family": "orange_slice_2d",
                                     "phi0": float(phi0)})
    curve = error_curve(fields)
    rec = propagate(fields)
    path = bloch_path_from_evolution(rec)
    gate = rec.final
    beta_geo = aa_geometric_phase(path, require_cyclic=False)
    design = DogDesign(
        error_curve=curve, fields=fields, path=path,
        beta_g=float(beta_geo), beta_g_propagated=float(np.angle(gate.matrix[0, 0])),
        gate=gate, family="orange_slice_2d",
        parameters={"phi0": float(phi0), "omega0": float(omega0),
                    "grid_points": int(n),
                    "renormalize_area": bool(renormalize_area)},
        metadata={"half_area": float(area)},
    )
    return _rescale_design(design, omega0)


def half_sequence_fields(omega0: float = 1.0, n: int = 10241) -> ControlFields:
    """One four-sech half-sequence alone (its noise curve is one planar lobe)."""
    if (n - 1) % 128:
        raise PreconditionError("need n = 128 k + 1 so segment edges lie on the grid")
    u = np.linspace(-HALF_WINDOW, HALF_WINDOW, n)
    omega, edges = _half_sequence_amplitude(u)
    markers = [JumpMarker(index=idx, omega_left=left_val, phi_left=0.0,
                          delta_left=0.0) for idx, left_val in edges]
    fields = ControlFields(t=u + HALF_WINDOW, omega=omega, phi=np.zeros_like(u),
                           delta=np.zeros_like(u), jumps=tuple(markers),
                           metadata={"family": "orange_slice_2d",
                                     "stage": "half_sequence"})
    if omega0 != 1.0:
        fields = ControlFields(t=fields.t / omega0, omega=fields.omega * omega0,
                               phi=fields.phi, delta=fields.delta,
                               jumps=tuple(JumpMarker(m.index, m.omega_left * omega0,
                                                      m.phi_left, 0.0)
                                           for m in fields.jumps),
                               metadata=dict(fields.metadata))
    return fields


# ---------------------------------------------------------------------------
# start-point rebasing
# ---------------------------------------------------------------------------

def rebase_start_point(design: DogDesign, new_start_index: int,
                       require_zero_initial_amplitude: bool = False) -> DogDesign:
    """Re-synthesize a design with the start/end point moved along the curve.

    The closed curve is cyclically re-indexed at the requested sample, the
    residual closure gap is spread uniformly so the seam is smooth, the new
    start tangent is rotated onto +z, and the synthesis is rerun. Only smooth
    (jump-free) designs can be rebased.
    """
    curve = design.error_curve
    if curve.jumps:
        raise PreconditionError("cannot rebase a design with field jumps")
    n = len(curve.t)
    k = int(new_start_index) % (n - 1)
    if k == 0:
        return design
    kappa = np.linalg.norm(derivatives(curve, 2), axis=1)
    if require_zero_initial_amplitude and kappa[k] > 1e-3 * float(np.max(kappa)):
        raise PreconditionError(
            "requested start point has nonzero curvature; zero initial "
            "amplitude demands a straight point"
        )
    h = curve.grid_spacing
    gap = curve.points[-1] - curve.points[0]
    frac = (curve.t - curve.t[0]) / curve.length
    pts = curve.points - frac[:, None] * gap[None, :]
    # periodic re-indexing (drop the duplicated endpoint, re-append the seam)
    core = pts[:-1]
    rolled = np.roll(core, -k, axis=0)
    new_pts = np.concatenate([rolled, rolled[:1]], axis=0)
    new_pts = new_pts - new_pts[0]
    base = SpaceCurve(t=np.arange(n) * h, points=new_pts,
                      metadata={"rebased_from": design.family,
                                "rebase_index": k})
    base = arc_length_reparameterize(base)
    base = base.translated(-base.points[0])
    params = dict(design.parameters)
    params["rebase_index"] = k
    return synthesize(base, family=design.family, parameters=params)
