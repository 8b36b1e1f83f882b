"""Coherence and discord as Fisher information under dephasing channels."""

from decometry.channels import (
    DephasingChannel,
    Isotropic,
    KrausChannel,
    Semiclassical,
    SIOSpec,
    apply_dephasing,
    apply_kraus,
    apply_local,
    choi_matrix,
    dephase,
    ecpo_to_channel,
    is_cptp,
    measure_ensemble,
    random_commuting_bipartite_sio,
    random_sio,
    sio_to_kraus,
)
from decometry.coherence import (
    MeasureResult,
    c0_is_finite,
    coherence,
    coherence_qubit_closed_form,
    crb_bound,
    max_coherence,
    p_from_time,
    qfi_dephasing,
    qfi_fd_oracle,
)
from decometry.discord import (
    DiscordResult,
    OptimizerConfig,
    conversion_check,
    discord,
    discord_qubitA_grid,
)
from decometry.errors import ConvergenceError, DivergenceError, ValidationError
from decometry.estimation import EstimationRun, simulate_estimation
from decometry.qstate import (
    BipartiteState,
    BlochVector,
    SpectralDecomposition,
    bloch_from_qubit,
    cq_state,
    fidelity,
    maximally_coherent,
    maximally_entangled,
    partial_trace,
    qubit_from_bloch,
    random_density,
    random_pure,
    random_unitary,
    spectral_decomposition,
    tensor,
)

__version__ = "0.1.0"
