"""Min-entropy criteria for private state transfer, quantum masking and catalytic dephasing."""

__version__ = "0.1.0"

from .dephasing import (
    DephasingPlan,
    check_min_entropy_nondecrease,
    collapse_to_standard,
    naive_dephasing_unitary,
    optimal_dephasing_unitary,
    plan_catalytic_dephasing,
    recover_catalyst,
    run_dephasing,
)
from .entropy import (
    feasibility,
    majorizes,
    masking_power,
    min_entropy,
    pst_power,
    renyi_entropy,
    schur_horn_unitary,
    uniform_subset_decompose,
    von_neumann_entropy,
)
from .errors import (
    CapacityExceeded,
    InfeasiblePad,
    InfeasibleSOR,
    InfeasibleSpectrum,
    InsufficientCatalyst,
    InvalidState,
    MinEntropyError,
    NotMajorized,
    UnsupportedOrder,
)
from .instrument import NielsenInstrument, apply_instrument, build_instrument, verify_instrument
from .masking import MaskingScheme, build_mols, build_scheme, mask_state, mask_via_double_dephasing
from .pst import PstProtocol, plan_pst, pst_encode, pst_recover, verify_pst
from .qstate import (
    BipartitePureState,
    DensityMatrix,
    Spectrum,
    partial_trace,
    random_state,
    schmidt_decompose,
)
from .tolerances import Tolerances, get_tolerances, use_tolerances
from .transition import TransitionPlan, catalyst_requirement, execute_transition, plan_transition, transition_feasible
