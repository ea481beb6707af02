"""Differential geometry of sampled 3D space curves.

Curves are stored as uniformly sampled points with optional cached derivative
samples. Constructors that know exact derivatives (Frenet integration, the
analytic twist map, arc-length resampling) attach them; otherwise finite
differences on the sample grid are used. All operations are pure functions of
immutable inputs.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np
from scipy.interpolate import CubicSpline, PchipInterpolator

from . import tolerances
from .errors import ClosureError, NumericalError, PreconditionError
from .numerics import (
    cumulative_integral,
    fd_derivative,
    ordered_prefix,
    rigid_align,
    rodrigues,
    segmented_derivative,
)

_GAUSS_OFFSETS = (0.5 - np.sqrt(3.0) / 6.0, 0.5 + np.sqrt(3.0) / 6.0)


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SpaceCurve:
    """A sampled 3D curve r(t) on a uniform parameter grid.

    ``points`` has shape (n, 3). ``d1``/``d2``/``d3`` optionally cache the
    first three parameter derivatives at the samples. ``metadata`` carries
    free-form labels plus optional ``jumps``: sample indices at which the
    curve's derivatives are discontinuous (finite differences never cross
    them).
    """

    t: np.ndarray
    points: np.ndarray
    metadata: dict[str, Any] = field(default_factory=dict)
    d1: np.ndarray | None = None
    d2: np.ndarray | None = None
    d3: np.ndarray | None = None

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        pts = np.asarray(self.points, dtype=float)
        if t.ndim != 1 or pts.shape != (len(t), 3):
            raise PreconditionError("curve needs t (n,) and points (n, 3)")
        if len(t) < 2:
            raise PreconditionError("curve needs at least two samples")
        steps = np.diff(t)
        h = steps[0]
        if h <= 0 or np.any(np.abs(steps - h) > 1e-9 * max(abs(h), 1e-30)):
            raise PreconditionError("curve grid must be uniform and increasing")
        object.__setattr__(self, "t", _freeze(t))
        object.__setattr__(self, "points", _freeze(pts))
        for name in ("d1", "d2", "d3"):
            val = getattr(self, name)
            if val is not None:
                val = np.asarray(val, dtype=float)
                if val.shape != pts.shape:
                    raise PreconditionError(f"cached {name} has wrong shape")
                object.__setattr__(self, name, _freeze(val))

    @property
    def grid_spacing(self) -> float:
        return float(self.t[1] - self.t[0])

    @property
    def length(self) -> float:
        """Total parameter span (equals arc length for unit-speed curves)."""
        return float(self.t[-1] - self.t[0])

    @property
    def jumps(self) -> list[int]:
        return list(self.metadata.get("jumps", []))

    def translated(self, offset: np.ndarray) -> "SpaceCurve":
        """Rigid translation (derivative caches are unaffected)."""
        return replace(self, points=self.points + np.asarray(offset, float))

    def rotated(self, rot: np.ndarray) -> "SpaceCurve":
        """Rigid rotation about the origin, applied to points and caches."""
        rot = np.asarray(rot, dtype=float)
        if rot.shape != (3, 3) or np.max(np.abs(rot @ rot.T - np.eye(3))) > 1e-10:
            raise PreconditionError("rotation matrix must be orthogonal")
        kw = {}
        for name in ("d1", "d2", "d3"):
            val = getattr(self, name)
            kw[name] = None if val is None else val @ rot.T
        return replace(self, points=self.points @ rot.T, **kw)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "kind": "space_curve",
            "metadata": dict(self.metadata),
            "t": self.t.tolist(),
            "points": self.points.tolist(),
        }
        for name in ("d1", "d2", "d3"):
            val = getattr(self, name)
            if val is not None:
                out[name] = val.tolist()
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SpaceCurve":
        return cls(
            t=np.asarray(data["t"], dtype=float),
            points=np.asarray(data["points"], dtype=float),
            metadata=dict(data.get("metadata", {})),
            d1=None if "d1" not in data else np.asarray(data["d1"], float),
            d2=None if "d2" not in data else np.asarray(data["d2"], float),
            d3=None if "d3" not in data else np.asarray(data["d3"], float),
        )


@dataclass(frozen=True)
class Tantrix:
    """Unit tangent samples of an arc-length-parameterized curve."""

    t: np.ndarray
    vectors: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "t", _freeze(np.asarray(self.t, float)))
        object.__setattr__(self, "vectors", _freeze(np.asarray(self.vectors, float)))
        norms = np.linalg.norm(self.vectors, axis=1)
        err = float(np.max(np.abs(norms - 1.0)))
        if err > tolerances.TANTRIX_TOL:
            raise NumericalError(f"tantrix is not unit speed (max deviation {err:.3e})")


@dataclass(frozen=True)
class FrenetData:
    """Curvature/torsion samples; ``defined`` flags where torsion is meaningful."""

    t: np.ndarray
    kappa: np.ndarray
    tau: np.ndarray
    defined: np.ndarray

    def __post_init__(self):
        for name in ("t", "kappa", "tau", "defined"):
            object.__setattr__(self, name, _freeze(np.asarray(getattr(self, name))))
        if np.any(self.kappa < 0):
            raise NumericalError("curvature must be nonnegative")


@dataclass(frozen=True)
class ClosureReport:
    """Gap metrics for curve closure."""

    endpoint_gap: float
    tangent_gap: float
    tangent_vs_zhat: float
    length: float

    def is_closed(self, tol: float | None = None) -> bool:
        tol = tolerances.closure_tol(self.length) if tol is None else tol
        return self.endpoint_gap < tol and self.tangent_gap < tol


# ---------------------------------------------------------------------------
# derivatives
# ---------------------------------------------------------------------------

def derivatives(curve: SpaceCurve, order: int) -> np.ndarray:
    """Derivative samples of the requested order (1..3).

    Cached derivatives win. When only the tangent is cached, higher orders
    difference the tangent rather than the positions: one differentiation
    order fewer, which matters for torsion on large curves. Jump indices in
    the metadata split the stencils so discontinuities never smear.
    """
    if order not in (1, 2, 3):
        raise PreconditionError("derivative order must be 1, 2 or 3")
    n = len(curve.t)
    if n < 7:
        raise PreconditionError("need at least 7 samples for curve derivatives")
    cached = getattr(curve, f"d{order}")
    if cached is not None:
        return cached
    h = curve.grid_spacing
    jumps = curve.jumps
    if curve.d1 is not None and order >= 2:
        return segmented_derivative(curve.d1, h, order - 1, jumps)
    return segmented_derivative(curve.points, h, order, jumps)


def tantrix(curve: SpaceCurve) -> Tantrix:
    """Unit tangent curve; raises if the curve is not arc-length sampled."""
    return Tantrix(t=curve.t, vectors=derivatives(curve, 1))


def validate_arclength(curve: SpaceCurve, tol: float | None = None) -> float:
    """Max deviation of |dr/dt| from 1; raises beyond ``tol``."""
    tol = tolerances.TANTRIX_TOL if tol is None else tol
    speed = np.linalg.norm(derivatives(curve, 1), axis=1)
    err = float(np.max(np.abs(speed - 1.0)))
    if err > tol:
        raise PreconditionError(
            f"curve is not arc-length parameterized (speed off by {err:.3e})"
        )
    return err


# ---------------------------------------------------------------------------
# Frenet data
# ---------------------------------------------------------------------------

def frenet(curve: SpaceCurve, strict: bool = False) -> FrenetData:
    """Curvature and torsion of an arc-length-parameterized curve.

    kappa = |r''|; tau = ((r' x r'') . r''') / |r' x r''|^2 where the cross
    norm exceeds the curvature floor. Below the floor torsion is flagged
    undefined rather than propagating junk. With ``strict=True`` an undefined
    run longer than ``STRAIGHT_RUN_MAX`` raises.
    """
    validate_arclength(curve)
    d1 = derivatives(curve, 1)
    d2 = derivatives(curve, 2)
    d3 = derivatives(curve, 3)
    kappa = np.linalg.norm(d2, axis=1)
    cross = np.cross(d1, d2)
    cross2 = np.einsum("ij,ij->i", cross, cross)
    defined = np.sqrt(cross2) > tolerances.KAPPA_FLOOR
    tau = np.zeros_like(kappa)
    np.divide(np.einsum("ij,ij->i", cross, d3), cross2, out=tau, where=defined)
    if strict and not defined.all():
        runs = np.diff(np.flatnonzero(np.diff(np.concatenate(
            [[False], ~defined, [False]]).astype(int))).reshape(-1, 2), axis=1)
        if runs.size and int(runs.max()) > tolerances.STRAIGHT_RUN_MAX:
            raise NumericalError(
                f"straight segment of {int(runs.max())} samples: torsion undefined"
            )
    return FrenetData(t=curve.t, kappa=kappa, tau=tau, defined=defined)


# ---------------------------------------------------------------------------
# Frenet-Serret integration
# ---------------------------------------------------------------------------

def _cell_interp(values: np.ndarray, offset: float) -> np.ndarray:
    """Cubic interpolation of uniform samples at fractional ``offset`` in each cell.

    Returns one value per cell (n-1 of them) using nodes i-1..i+2, shifted
    windows at the ends. Exact for cubics.
    """
    v = np.asarray(values, dtype=float)
    n = len(v)
    if n < 4:
        raise PreconditionError("need at least 4 samples")
    x = offset

    def lagrange(nodes, xi):
        w = []
        for i, ni in enumerate(nodes):
            num, den = 1.0, 1.0
            for j, nj in enumerate(nodes):
                if i != j:
                    num *= xi - nj
                    den *= ni - nj
            w.append(num / den)
        return np.array(w)

    w_mid = lagrange([-1.0, 0.0, 1.0, 2.0], x)
    w_first = lagrange([0.0, 1.0, 2.0, 3.0], x)
    w_last = lagrange([0.0, 1.0, 2.0, 3.0], x + 2.0)
    out = np.empty(n - 1)
    stack = np.stack([v[:-3], v[1:-2], v[2:-1], v[3:]])
    out[1:-1] = w_mid @ stack[:, :]
    out[0] = w_first @ v[:4]
    out[-1] = w_last @ v[-4:]
    return out


def integrate_frenet(kappa: np.ndarray, tau: np.ndarray | float, spacing: float,
                     initial_frame: np.ndarray | None = None,
                     metadata: dict | None = None) -> SpaceCurve:
    """Generate the curve with prescribed curvature and torsion samples.

    Solves the Frenet-Serret frame equations with a 4th-order commutator-free
    rotation integrator (two Gauss nodes per step), so the frame remains
    exactly orthonormal at every step. The curve starts at the origin with
    the tangent given by ``initial_frame`` (columns T, N, B; defaults to
    T = z, N = y, B = -x).
    """
    kappa = np.asarray(kappa, dtype=float)
    n = len(kappa)
    tau_arr = np.full(n, float(tau)) if np.isscalar(tau) else np.asarray(tau, float)
    if tau_arr.shape != kappa.shape:
        raise PreconditionError("kappa and tau must share the grid")
    if n < 4:
        raise PreconditionError("need at least 4 samples")
    h = float(spacing)
    if initial_frame is None:
        frame0 = np.array([[0.0, 0.0, -1.0],
                           [0.0, 1.0, 0.0],
                           [1.0, 0.0, 0.0]])  # columns: T=z, N=y, B=-x
    else:
        frame0 = np.asarray(initial_frame, dtype=float)
        if frame0.shape != (3, 3) or np.max(np.abs(frame0.T @ frame0 - np.eye(3))) > 1e-9:
            raise PreconditionError("initial frame must be orthonormal (columns T, N, B)")

    # Darboux vector in frame coordinates is (tau, 0, kappa); two Gauss nodes
    # per step give a 4th-order single-exponential (commutator-corrected) update.
    c1, c2 = _GAUSS_OFFSETS
    k1, k2 = _cell_interp(kappa, c1), _cell_interp(kappa, c2)
    t1, t2 = _cell_interp(tau_arr, c1), _cell_interp(tau_arr, c2)
    w1 = np.stack([t1, np.zeros_like(t1), k1], axis=1)
    w2 = np.stack([t2, np.zeros_like(t2), k2], axis=1)
    step_vec = 0.5 * h * (w1 + w2) + (np.sqrt(3.0) * h * h / 12.0) * np.cross(w2, w1)
    rots = rodrigues(step_vec)
    # frame recursion F_{k+1} = F_k R_k: right-cumulative via transposed scan
    prefixes = np.swapaxes(ordered_prefix(np.swapaxes(rots, -1, -2)), -1, -2)
    frames = np.concatenate([frame0[None, :, :], frame0 @ prefixes], axis=0)
    tangents = frames[:, :, 0]
    normals = frames[:, :, 1]
    binormals = frames[:, :, 2]
    points = cumulative_integral(tangents, h)
    kdot = fd_derivative(kappa, h, 1)
    d2 = kappa[:, None] * normals
    d3 = (-kappa**2)[:, None] * tangents + kdot[:, None] * normals \
        + (kappa * tau_arr)[:, None] * binormals
    t = np.arange(n) * h
    return SpaceCurve(t=t, points=points, metadata=dict(metadata or {}),
                      d1=tangents, d2=d2, d3=d3)


# ---------------------------------------------------------------------------
# twisting
# ---------------------------------------------------------------------------

def twist(planar: SpaceCurve, xi: float, plan_tol: float = 1e-6) -> SpaceCurve:
    """Twist a yz-plane curve about the vertical line through y = pi/2.

    Maps (0, y, z) to (-(y - pi/2) sin(xi z^3), (y - pi/2) cos(xi z^3), z),
    sampled in the original parameter. The output is generally not unit
    speed; reparameterize before using arc-length-only operations. Cached
    derivatives, when present, are transformed analytically.
    """
    pts = planar.points
    scale = max(float(np.max(np.linalg.norm(pts, axis=1))), 1e-30)
    if float(np.max(np.abs(pts[:, 0]))) > plan_tol * scale:
        raise PreconditionError("twist input must lie in the yz-plane")
    y, z = pts[:, 1], pts[:, 2]
    p = y - 0.5 * np.pi
    g = xi * z**3
    phase = np.exp(-1j * g)
    zeta = p * phase  # Re = y-component, Im = x-component
    new_pts = np.stack([zeta.imag, zeta.real, z], axis=1)

    kw: dict[str, Any] = {"d1": None, "d2": None, "d3": None}
    if planar.d1 is not None:
        yp, zp = planar.d1[:, 1], planar.d1[:, 2]
        gp = 3.0 * xi * z**2 * zp
        h1 = -1j * gp
        zeta1 = (yp + p * h1) * phase
        kw["d1"] = np.stack([zeta1.imag, zeta1.real, zp], axis=1)
        if planar.d2 is not None:
            ypp, zpp = planar.d2[:, 1], planar.d2[:, 2]
            gpp = xi * (6.0 * z * zp**2 + 3.0 * z**2 * zpp)
            h2 = -1j * gpp - gp**2
            zeta2 = (ypp + 2.0 * yp * h1 + p * h2) * phase
            kw["d2"] = np.stack([zeta2.imag, zeta2.real, zpp], axis=1)
            if planar.d3 is not None:
                yppp, zppp = planar.d3[:, 1], planar.d3[:, 2]
                gppp = xi * (6.0 * zp**3 + 18.0 * z * zp * zpp + 3.0 * z**2 * zppp)
                h3 = -1j * gppp - 3.0 * gp * gpp + 1j * gp**3
                zeta3 = (yppp + 3.0 * ypp * h1 + 3.0 * yp * h2 + p * h3) * phase
                kw["d3"] = np.stack([zeta3.imag, zeta3.real, zppp], axis=1)
    meta = dict(planar.metadata)
    meta["twist_xi"] = float(xi)
    return SpaceCurve(t=planar.t, points=new_pts, metadata=meta, **kw)


# ---------------------------------------------------------------------------
# arc-length reparameterization
# ---------------------------------------------------------------------------

def arc_length_reparameterize(curve: SpaceCurve, n_out: int | None = None) -> SpaceCurve:
    """Resample a regular curve by arc length onto a uniform grid.

    Accumulates arc length with 4th-order quadrature of the speed, inverts
    the monotone map with a shape-preserving (PCHIP) interpolant, and
    resamples. The first three arc-length derivatives are computed on the
    source grid by chain rule and carried over as cached samples, so
    downstream curvature/torsion does not have to difference interpolated
    positions.
    """
    if curve.jumps:
        raise PreconditionError("cannot reparameterize across derivative jumps")
    w = curve.t
    hw = curve.grid_spacing
    r1 = derivatives(curve, 1)
    r2 = derivatives(curve, 2)
    r3 = derivatives(curve, 3)
    speed = np.linalg.norm(r1, axis=1)
    if np.min(speed) <= 0.0 or np.min(speed) < 1e-12 * np.max(speed):
        raise PreconditionError("zero-speed point: arc length is not invertible")
    t_of_w = cumulative_integral(speed, hw)
    total = float(t_of_w[-1])
    n = len(w) if n_out is None else int(n_out)

    # chain rule to arc-length derivatives on the source grid
    sp = np.einsum("ij,ij->i", r1, r2) / speed
    spp = (np.einsum("ij,ij->i", r2, r2) + np.einsum("ij,ij->i", r1, r3)) / speed \
        - sp**2 / speed
    d1 = r1 / speed[:, None]
    d2 = (r2 * speed[:, None] - r1 * sp[:, None]) / speed[:, None] ** 3
    d3 = (r3 * speed[:, None] ** 2 - 3.0 * r2 * (speed * sp)[:, None]
          + r1 * (3.0 * sp**2 - speed * spp)[:, None]) / speed[:, None] ** 5

    t_new = np.linspace(0.0, total, n)
    w_of_t = PchipInterpolator(t_of_w, w)
    w_new = np.clip(w_of_t(t_new), w[0], w[-1])
    pts_new = np.stack([CubicSpline(w, curve.points[:, k])(w_new) for k in range(3)],
                       axis=1)

    def resample(mat):
        return np.stack([PchipInterpolator(w, mat[:, k])(w_new) for k in range(3)],
                        axis=1)

    meta = dict(curve.metadata)
    meta["reparameterized"] = True
    return SpaceCurve(t=t_new, points=pts_new, metadata=meta,
                      d1=resample(d1), d2=resample(d2), d3=resample(d3))


# ---------------------------------------------------------------------------
# closure
# ---------------------------------------------------------------------------

def closure_report(curve: SpaceCurve) -> ClosureReport:
    """Endpoint gap, tangent gap and initial-tangent-vs-z angle."""
    d1 = derivatives(curve, 1)
    gap = float(np.linalg.norm(curve.points[-1] - curve.points[0]))
    tgap = float(np.linalg.norm(d1[-1] - d1[0]))
    t0 = d1[0] / np.linalg.norm(d1[0])
    angle = float(np.arctan2(np.hypot(t0[0], t0[1]), t0[2]))
    return ClosureReport(endpoint_gap=gap, tangent_gap=tgap,
                         tangent_vs_zhat=angle, length=curve.length)


def require_closed(curve: SpaceCurve, tol: float | None = None) -> ClosureReport:
    rep = closure_report(curve)
    tol = tolerances.closure_tol(curve.length) if tol is None else tol
    if not rep.is_closed(tol):
        raise ClosureError(
            f"curve is open: endpoint gap {rep.endpoint_gap:.3e}, "
            f"tangent gap {rep.tangent_gap:.3e}, tolerance {tol:.3e}"
        )
    return rep


def align_curves(moving: SpaceCurve, target: SpaceCurve) -> tuple[SpaceCurve, float]:
    """Best rigid alignment of one curve onto another; returns (curve, RMS)."""
    aligned, rot, tvec = rigid_align(moving.points, target.points)
    rms = float(np.sqrt(np.mean(np.sum((aligned - target.points) ** 2, axis=1))))
    out = moving.rotated(rot).translated(tvec)
    return out, rms
