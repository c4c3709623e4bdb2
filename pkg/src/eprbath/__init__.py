"""Dissipative two-mode-squeezed entanglement between spin ensembles.

Subpackages by concern:

* :mod:`eprbath.gaussian`       - Gaussian states and primitive channels
* :mod:`eprbath.dynamics`       - two-ensemble dynamics and steady states
* :mod:`eprbath.lindblad`       - exact few-atom master-equation oracle
* :mod:`eprbath.rates`          - multi-level population rate model
* :mod:`eprbath.reconstruction` - homodyne records and state reconstruction
* :mod:`eprbath.cli`            - scenario runner (``eprbath`` entry point)
"""

from . import _kernels
from .gaussian import (
    ATOMIC_C, ATOMIC_S, LIGHT_C, LIGHT_S,
    GaussianState, SqueezeParams,
    apply_affine_channel, beam_splitter_loss, condition_on_homodyne,
    epr_xi, new_vacuum,
)
from .dynamics import (
    DerivedCouplings, DynamicsParams,
    coupling_kappa, evolve_conditional, evolve_unconditional,
    evolve_with_detuning, steady_state_xi, steady_state_xi_cond,
    step_io, step_io_noisy,
)
from .lindblad import (
    DensityOperator, LindbladSystem,
    build_jump_ops, css_state, integrate_master, steady_state, witness_xi,
    witness_xi_pn,
)
from .rates import (
    RateModelParams,
    effective_rates, evolve_populations, xi2_adiabatic, xi2_steady,
)
from .reconstruction import (
    HomodyneRecord, ModeFunction, ReconstructionInput, SimulatedRecords,
    calibrate_kappa, conditional_variance_estimate, project_record,
    reconstruct_variance, run_kappa_calibration, simulate_records,
)

__version__ = "0.1.0"
KERNEL_BACKEND = _kernels.BACKEND
