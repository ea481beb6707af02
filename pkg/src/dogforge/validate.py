"""Re-checkable invariants of a stored design bundle."""
from __future__ import annotations

from typing import Any

import numpy as np

from . import tolerances
from .curves import closure_report, derivatives, frenet
from .holonomy import pt_residual
from .numerics import segmented_derivative
from .synthesis import DogDesign


def _excluded_window(n: int, jumps: list[int], pad: int = 5) -> np.ndarray:
    mask = np.zeros(n, dtype=bool)
    mask[:pad] = True
    mask[-pad:] = True
    for j in jumps:
        mask[max(0, j - pad):j + pad + 1] = True
    return mask


# fraction of the peak amplitude below which a stretch counts as near-straight
NEAR_STRAIGHT_FRAC = 3e-3


def eq10_residuals(design: DogDesign, pad: int = 5) -> tuple[float, float]:
    """(RMS relative curvature error, RMS torsion error) against the fields.

    Curvature reconstructed from the stored curve is compared with |Omega|;
    torsion with dPhi/dt - Delta. Excluded from the comparison: samples near
    declared jumps, the first and last few samples, flagged path samples, and
    near-straight stretches (where the frame swings through a tantrix pole
    and torsion spikes are only marginally resolved).
    """
    curve = design.error_curve
    fields = design.fields
    fr = frenet(curve)
    jumps = fields.jump_indices
    excluded = _excluded_window(len(curve.t), jumps, pad)
    if design.path.flags is not None and len(design.path.flags) == len(curve.t):
        excluded |= np.asarray(design.path.flags, dtype=bool)
    omega_abs = np.abs(fields.omega)
    ok = ~excluded & (omega_abs > 1e-8 * float(np.max(omega_abs)))
    kappa_rel = (fr.kappa[ok] - omega_abs[ok]) / omega_abs[ok]
    rms_kappa = float(np.sqrt(np.mean(kappa_rel**2)))
    phidot = segmented_derivative(fields.phi, fields.grid_spacing, 1, jumps)
    target = phidot - fields.delta
    ok_tau = ok & fr.defined \
        & (omega_abs > NEAR_STRAIGHT_FRAC * float(np.max(omega_abs)))
    tau_err = fr.tau[ok_tau] - target[ok_tau]
    rms_tau = float(np.sqrt(np.mean(tau_err**2)))
    return rms_kappa, rms_tau


def validate_design(design: DogDesign) -> dict[str, dict[str, Any]]:
    """Run every designed-in invariant; returns {check: {passed, ...values}}."""
    out: dict[str, dict[str, Any]] = {}
    curve = design.error_curve
    tol = tolerances.closure_tol(curve.length)
    rep = closure_report(curve)
    out["closure"] = {
        "passed": bool(rep.endpoint_gap < tol and rep.tangent_gap < tol),
        "endpoint_gap": rep.endpoint_gap,
        "tangent_gap": rep.tangent_gap,
        "tolerance": tol,
    }
    speed = np.linalg.norm(derivatives(curve, 1), axis=1)
    dev = float(np.max(np.abs(speed - 1.0)))
    out["tantrix"] = {"passed": bool(dev < tolerances.TANTRIX_TOL),
                      "max_speed_deviation": dev}
    resid = pt_residual(design.path)
    worst = float(np.max(np.abs(resid)))
    # paths extracted from a discrete evolution inherit the integrator's own
    # second-order error; the residual check cannot be tighter than that
    h = design.fields.grid_spacing
    rate = max(float(np.max(np.abs(design.fields.omega))),
               float(np.max(np.abs(design.fields.delta))))
    pt_tol = max(tolerances.PT_TOL, 2.0 * h * h * rate**3)
    out["parallel_transport"] = {"passed": bool(worst < pt_tol),
                                 "max_residual": worst, "tolerance": pt_tol}
    rms_kappa, rms_tau = eq10_residuals(design)
    out["curvature_identity"] = {"passed": bool(rms_kappa < 1e-4),
                                 "rms_relative": rms_kappa}
    out["torsion_identity"] = {"passed": bool(rms_tau < 1e-3), "rms": rms_tau}
    offdiag = design.gate_offdiagonal
    out["gate_diagonal"] = {"passed": bool(offdiag < 1e-3), "offdiagonal": offdiag}
    disc = design.beta_discrepancy
    out["phase_consistency"] = {"passed": bool(disc < 5e-3),
                                "discrepancy_mod_2pi": disc}
    return out
