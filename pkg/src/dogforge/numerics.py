"""Shared numerical kernels: finite differences, quadrature, SU(2)/SO(3) flows.

Everything here operates on plain numpy arrays over uniform grids and is
deterministic: no RNG, no iteration-order dependence, fixed reduction trees.
"""
from __future__ import annotations

import numpy as np

from .errors import PreconditionError

_I2 = np.eye(2, dtype=complex)

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)


def fornberg_weights(nodes: np.ndarray, x0: float, order: int) -> np.ndarray:
    """Finite-difference weights for the ``order``-th derivative at ``x0``.

    Classic recursion for arbitrary node locations; exact for polynomials up
    to degree ``len(nodes) - 1``.
    """
    nodes = np.asarray(nodes, dtype=float)
    n = len(nodes)
    if order >= n:
        raise PreconditionError("need more nodes than derivative order")
    c = np.zeros((n, order + 1))
    c[0, 0] = 1.0
    c1 = 1.0
    c4 = nodes[0] - x0
    for i in range(1, n):
        mn = min(i, order)
        c2 = 1.0
        c5 = c4
        c4 = nodes[i] - x0
        for j in range(i):
            c3 = nodes[i] - nodes[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, order]


def _stencil_rows(n: int, order: int) -> tuple[np.ndarray, np.ndarray, int]:
    """Interior stencil plus one-sided edge stencils, all 4th-order accurate.

    Returns (interior weights, edge weight matrix, half-width). The edge
    matrix row ``r`` differentiates at position ``r`` using the first
    ``order + 4`` nodes; right-edge rows use the mirror image.
    """
    width = order + 4 + (order % 2)  # odd orders need symmetric widening
    if order == 1:
        interior = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
        half = 2
    elif order == 2:
        interior = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0
        half = 2
    elif order == 3:
        interior = np.array([1.0, -8.0, 13.0, 0.0, -13.0, 8.0, -1.0]) / 8.0
        half = 3
    else:
        raise PreconditionError(f"unsupported derivative order {order}")
    m = order + 4
    if n < m:
        raise PreconditionError(
            f"need at least {m} samples for order-{order} derivatives, got {n}"
        )
    edge = np.stack([fornberg_weights(np.arange(m, dtype=float), float(r), order)
                     for r in range(half)])
    return interior, edge, half


def fd_derivative(values: np.ndarray, spacing: float, order: int) -> np.ndarray:
    """Differentiate uniformly sampled data to 4th-order accuracy.

    Centered stencils in the interior, one-sided stencils of matching order
    at the boundaries. ``values`` may be (n,) or (n, d); differentiation runs
    along axis 0.
    """
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    interior, edge, half = _stencil_rows(n, order)
    m = edge.shape[1]
    out = np.empty_like(values)
    # interior via correlation (np.correlate applies the window unreversed)
    win = len(interior)
    if values.ndim == 1:
        out[half:n - half] = np.correlate(values, interior, mode="valid")
    else:
        from numpy.lib.stride_tricks import sliding_window_view
        sw = sliding_window_view(values, win, axis=0)          # (n-win+1, d, win)
        out[half:n - half] = np.einsum("ndw,w->nd", sw, interior)
    out[:half] = edge @ values[:m]
    # mirrored coordinates at the right edge flip odd-order derivatives
    out[n - half:] = ((-1.0) ** order) * (edge @ values[n - m:][::-1])[::-1]
    return out / spacing**order


def segmented_derivative(values: np.ndarray, spacing: float, order: int,
                         breaks: list[int] | None = None) -> np.ndarray:
    """Like :func:`fd_derivative` but never differentiating across ``breaks``.

    ``breaks`` are sample indices at which the underlying function (or one of
    its derivatives) jumps; each segment [b_k, b_{k+1}) is differenced
    independently with one-sided stencils at its ends, so jump discontinuities
    do not smear into neighboring samples.
    """
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    if not breaks:
        return fd_derivative(values, spacing, order)
    bounds = [0] + sorted(set(int(b) for b in breaks if 0 < b < n)) + [n]
    out = np.empty_like(values)
    for a, b in zip(bounds[:-1], bounds[1:]):
        if b - a >= order + 4:
            out[a:b] = fd_derivative(values[a:b], spacing, order)
        elif order == 1 and b - a >= 2:
            out[a:b] = np.gradient(values[a:b], spacing, axis=0)
        else:
            # segment too short to difference; callers mask jump neighborhoods
            out[a:b] = 0.0
    return out


def cumulative_integral(values: np.ndarray, spacing: float) -> np.ndarray:
    """Cumulative integral of uniformly sampled data, 4th-order accurate.

    Each interval is integrated with the cubic through its four surrounding
    nodes (three-eighths-style weights at the two end intervals).
    """
    f = np.asarray(values, dtype=float)
    n = f.shape[0]
    if n < 4:
        raise PreconditionError("need at least 4 samples to integrate")
    h = float(spacing)
    if f.ndim == 1:
        seg = np.empty(n - 1)
        seg[1:-1] = (-f[:-3] + 13.0 * f[1:-2] + 13.0 * f[2:-1] - f[3:]) * (h / 24.0)
        seg[0] = (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3]) * (h / 24.0)
        seg[-1] = (9.0 * f[-1] + 19.0 * f[-2] - 5.0 * f[-3] + f[-4]) * (h / 24.0)
        out = np.empty(n)
        out[0] = 0.0
        np.cumsum(seg, out=out[1:])
    else:
        seg = np.empty((n - 1,) + f.shape[1:])
        seg[1:-1] = (-f[:-3] + 13.0 * f[1:-2] + 13.0 * f[2:-1] - f[3:]) * (h / 24.0)
        seg[0] = (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3]) * (h / 24.0)
        seg[-1] = (9.0 * f[-1] + 19.0 * f[-2] - 5.0 * f[-3] + f[-4]) * (h / 24.0)
        out = np.empty_like(f)
        out[0] = 0.0
        np.cumsum(seg, axis=0, out=out[1:])
    return out


def integral(values: np.ndarray, spacing: float) -> float:
    """Definite integral over the whole grid (same rule as the cumulative form)."""
    return float(cumulative_integral(values, spacing)[-1])


def patch_samples(values: np.ndarray, bad: np.ndarray, fit_points: int = 8,
                  degree: int = 2) -> np.ndarray:
    """Replace flagged samples by local polynomial fits of their neighbors.

    Used to evaluate 0/0 integrands at isolated degenerate samples: the
    integrand is smooth through the degeneracy, so a low-degree fit of the
    healthy flanking samples is the L'Hopital-style limit. Runs of flagged
    samples are patched together; endpoint runs are extrapolated.
    """
    values = np.asarray(values, dtype=float).copy()
    bad = np.asarray(bad, dtype=bool)
    n = len(values)
    if not bad.any():
        return values
    if bad.all():
        raise PreconditionError("cannot patch: every sample is flagged")
    idx = np.flatnonzero(bad)
    runs = np.split(idx, np.flatnonzero(np.diff(idx) > 1) + 1)
    good = ~bad
    for run in runs:
        lo, hi = run[0], run[-1]
        left = np.flatnonzero(good[:lo])[-fit_points:]
        right_all = np.flatnonzero(good[hi + 1:])
        right = right_all[:fit_points] + hi + 1
        support = np.concatenate([left, right])
        if len(support) <= degree:
            raise PreconditionError("cannot patch: not enough healthy neighbors")
        coeff = np.polyfit(support.astype(float), values[support], degree)
        values[run] = np.polyval(coeff, run.astype(float))
    return values


# ---------------------------------------------------------------------------
# SU(2) step construction and ordered products
# ---------------------------------------------------------------------------

def su2_steps(ax: np.ndarray, ay: np.ndarray, az: np.ndarray,
              dt: float) -> np.ndarray:
    """Per-step propagators exp(-i dt (ax sx + ay sy + az sz)) as (n, 2, 2).

    Exact 2x2 exponentials, so each factor is unitary to rounding.
    """
    ax = np.asarray(ax, dtype=float)
    ay = np.asarray(ay, dtype=float)
    az = np.asarray(az, dtype=float)
    nrm = np.sqrt(ax * ax + ay * ay + az * az)
    ang = nrm * dt
    c = np.cos(ang)
    safe = np.where(nrm > 0.0, nrm, 1.0)
    s = np.where(nrm > 0.0, np.sin(ang) / safe, dt)
    u = np.empty(ax.shape + (2, 2), dtype=complex)
    u[..., 0, 0] = c - 1j * s * az
    u[..., 0, 1] = -1j * s * (ax - 1j * ay)
    u[..., 1, 0] = -1j * s * (ax + 1j * ay)
    u[..., 1, 1] = c + 1j * s * az
    return u


def ordered_product(mats: np.ndarray) -> np.ndarray:
    """Time-ordered product M[n-1] @ ... @ M[0] by pairwise tree reduction.

    Works on (..., n, 2, 2); reduces along axis -3. The fixed reduction tree
    keeps results bit-deterministic.
    """
    cur = np.asarray(mats)
    while cur.shape[-3] > 1:
        m = cur.shape[-3] // 2
        nxt = np.matmul(cur[..., 1:2 * m:2, :, :], cur[..., 0:2 * m:2, :, :])
        if cur.shape[-3] % 2:
            nxt = np.concatenate([nxt, cur[..., -1:, :, :]], axis=-3)
        cur = nxt
    return cur[..., 0, :, :]


def ordered_prefix(mats: np.ndarray) -> np.ndarray:
    """All time-ordered prefixes P[k] = M[k] @ ... @ M[0], shape (n, 2, 2).

    Log-depth inclusive scan (Hillis-Steele); each pass is one batched matmul.
    """
    out = np.array(mats, copy=True)
    n = out.shape[0]
    step = 1
    while step < n:
        np.matmul(out[step:], out[:-step], out=out[step:])
        step *= 2
    return out


def rodrigues(omega: np.ndarray) -> np.ndarray:
    """Rotation matrices exp([w]_x) for a batch of rotation vectors (n, 3)."""
    omega = np.asarray(omega, dtype=float)
    theta = np.linalg.norm(omega, axis=-1, keepdims=True)
    safe = np.where(theta > 0.0, theta, 1.0)
    axis = omega / safe
    th = theta[..., 0]
    c, s = np.cos(th), np.sin(th)
    n = omega.shape[0]
    k = np.zeros((n, 3, 3))
    k[:, 0, 1], k[:, 0, 2] = -axis[:, 2], axis[:, 1]
    k[:, 1, 0], k[:, 1, 2] = axis[:, 2], -axis[:, 0]
    k[:, 2, 0], k[:, 2, 1] = -axis[:, 1], axis[:, 0]
    eye = np.broadcast_to(np.eye(3), (n, 3, 3))
    out = eye + s[:, None, None] * k + (1.0 - c)[:, None, None] * (k @ k)
    # zero-angle rows: exact identity
    zero = th == 0.0
    if zero.any():
        out[zero] = np.eye(3)
    return out


def pauli_vector(u_dag_sz_u: np.ndarray) -> np.ndarray:
    """Pauli coefficients of a batch of traceless Hermitian 2x2 matrices."""
    m = np.asarray(u_dag_sz_u)
    x = m[..., 0, 1].real + m[..., 1, 0].real
    y = m[..., 1, 0].imag - m[..., 0, 1].imag
    z = m[..., 0, 0].real - m[..., 1, 1].real
    return 0.5 * np.stack([x, y, z], axis=-1)


def unwrap_angles(raw: np.ndarray) -> np.ndarray:
    """Continuous unwrap of sampled angles (thin wrapper, kept for clarity)."""
    return np.unwrap(np.asarray(raw, dtype=float))


def principal_branch(angle: float) -> float:
    """Map an angle into (-2*pi, 2*pi] keeping its sign when possible."""
    a = float(angle)
    two_pi = 2.0 * np.pi
    a = np.remainder(a, 2.0 * two_pi)
    if a > two_pi:
        a -= 2.0 * two_pi
    elif a <= -two_pi:
        a += 2.0 * two_pi
    return float(a)


def wrap_to_pi(angle: float | np.ndarray) -> float | np.ndarray:
    """Map angles into (-pi, pi]."""
    return -(np.remainder(np.pi - np.asarray(angle), 2.0 * np.pi) - np.pi)


def rigid_align(moving: np.ndarray, target: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Optimal rigid alignment (rotation + translation) of point sets.

    Kabsch algorithm; returns (aligned points, rotation, translation) such
    that ``aligned = moving @ R.T + t`` minimizes the RMS distance to target.
    """
    p = np.asarray(moving, dtype=float)
    q = np.asarray(target, dtype=float)
    pc, qc = p.mean(axis=0), q.mean(axis=0)
    h = (p - pc).T @ (q - qc)
    u, _, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    corr = np.diag([1.0, 1.0, d])
    rot = vt.T @ corr @ u.T
    t = qc - pc @ rot.T
    return p @ rot.T + t, rot, t


def loglog_slope(x: np.ndarray, y: np.ndarray) -> float:
    """Least-squares slope of log(y) against log(x)."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    return float(np.polyfit(lx, ly, 1)[0])


def linear_fit_r2(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    """Linear fit returning (slope, intercept, R^2)."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return float(slope), float(intercept), r2
