"""dogforge: doubly geometric single-qubit pulse design and benchmarking."""

from .curves import (
    ClosureReport,
    FrenetData,
    SpaceCurve,
    Tantrix,
    arc_length_reparameterize,
    closure_report,
    derivatives,
    frenet,
    integrate_frenet,
    tantrix,
    twist,
)
from .dynamics import (
    ControlFields,
    EvolutionRecord,
    JumpMarker,
    NoiseModel,
    Unitary2,
    error_curve,
    final_unitaries,
    gate_fidelity,
    interaction_frame_transform,
    magnus_a1,
    omega_bar,
    propagate,
)
from .errors import ClosureError, DogforgeError, NumericalError, PreconditionError
from .holonomy import (
    BlochPath,
    PhaseReport,
    ToyTwoLevel,
    aa_geometric_phase,
    aa_phase_robustness,
    bloch_path_from_evolution,
    dynamical_phase,
    fields_from_path,
    frame_shift_integral,
    physical_phi,
    pt_residual,
)
from .synthesis import (
    DogDesign,
    orange_slice_2d,
    phase_vs_twist,
    rebase_start_point,
    synthesize,
    twist_for_phase,
    twisted_3d,
)
from .bench import (
    FidelitySweep,
    ToyModelResult,
    amplitude_sweep,
    detuning_sweep,
    infidelity_slope,
    omega_noise_crossover,
    orange_slice_gap_exact,
    standard_orange_slice,
    toy_model_fidelities,
)
from .validate import validate_design

__version__ = "0.1.0"
