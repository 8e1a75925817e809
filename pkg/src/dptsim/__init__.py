"""dptsim: dynamical phase transitions of an all-to-all coupled qubit array.

Numerical simulator and measurement emulator for quench dynamics of a
transverse-field collective-spin model on up to 20 qubits: exact state
evolution, Loschmidt-echo and order-parameter diagnostics, Q-function and
spin-squeezing analysis, shot sampling with a readout-error channel, and
XY-crosstalk drive correction.
"""

from .calib import (
    CrosstalkMatrix,
    UniformityReport,
    correct_drive,
    effective_drive,
    random_crosstalk,
    uniformity_check,
)
from .engine import (
    EvolutionPlan,
    StateVector,
    expm_apply,
    initial_state,
    load_state,
    loschmidt_echo,
    propagate,
    propagate_all,
    rate_function,
    save_state,
    symmetric_to_full,
)
from .errors import (
    CapacityError,
    ConfigError,
    DptsimError,
    NumericalFailure,
    ParameterError,
)
from .measure import (
    PartitionPlan,
    RotationSetting,
    ShotBatch,
    apply_rotations,
    correct_readout,
    corrected_z_moments,
    estimate_anticommutator,
    estimate_xi2_from_shots,
    random_partitions,
    sample_shots,
)
from .model import (
    CriticalPoint,
    DeviceSpec,
    HamiltonianModel,
    LmgModel,
    build_coupling_matrix,
    build_full_hamiltonian,
    build_lmg_hamiltonian,
    default_device,
    lmg_from_model,
    mhz_to_radns,
    model_from_device,
    predict_critical_field,
    radns_to_mhz,
)
from .observables import (
    DegenerateDirectionError,
    LoschmidtDiagnostics,
    SqueezingFrame,
    TrajectoryRecord,
    bloch_vector,
    czz,
    loschmidt_diagnostics,
    magnetization,
    mean_spin_direction,
    order_parameter,
    perimeter_law_fit,
    q_function,
    spherical_mesh,
    spin_moments,
    squeezing_parameter,
    xi2_series,
)
from .pipeline import ScenarioSpec, SweepResult, compute_sweep, run_quench, run_sweep

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
