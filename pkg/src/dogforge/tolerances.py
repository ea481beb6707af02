"""Default numerical tolerances and grid parameters.

These values are calibrated for the default grid density below; they are
deliberately centralized so the CLI can override them in one place.
"""

# relative tolerance on the unit-speed (tantrix) invariant of arc-length curves
TANTRIX_TOL = 1e-6

# closure tolerance per unit curve length: a curve of length L is "closed"
# when its endpoint gap is below CLOSURE_TOL_PER_LENGTH * L
CLOSURE_TOL_PER_LENGTH = 1e-4

# curvature floor (grid units) below which torsion is flagged undefined
KAPPA_FLOOR = 1e-9

# parallel-transport residual tolerance, rad per unit time
PT_TOL = 1e-6

# angle comparison tolerance for cyclicity checks, rad
ANGLE_TOL = 1e-6

# allowed deviation of each half-sequence rotation from pi, rad
AREA_TOL = 1e-3

# default number of samples per curve / field table
GRID_POINTS = 20001

# maximum number of consecutive below-floor curvature samples tolerated when
# torsion is requested strictly
STRAIGHT_RUN_MAX = 2000


def closure_tol(length: float) -> float:
    """Closure tolerance for a curve of the given total length."""
    return CLOSURE_TOL_PER_LENGTH * float(length)
