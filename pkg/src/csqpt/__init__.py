"""Coherent-state quantum process tomography of single-mode optical channels."""

from .errors import ConvergenceWarning, CsqptError, NumericalContractError, TruncationError, ValidationError
from .fock import (
    coherent_state,
    displace,
    fidelity,
    fock_state,
    mean_amplitude,
    phase_shift,
    quadrature_variance,
    squeezed_thermal_state,
)
from .oracles import ChannelSpec, eom_process, loss_channel, theoretical_superoperator
from .phasespace import GridSpec, PhaseSpaceField, regularized_p, state_from_p, wigner
from .proctensor import (
    InterpolatedResponse,
    ProbeRecord,
    Superoperator,
    apply_superoperator,
    center_and_fit,
    predict_output_direct,
    reconstruct_superoperator,
)

__version__ = "0.1.0"
