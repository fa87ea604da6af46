"""Two-mode cavity quantum optics: Raman pump channel, quantum beam splitter,
broadcasting of coherent-state mixtures and unambiguous discrimination of the
attenuated outputs."""

from .beamsplitter import (
    BeamSplitter,
    Tuning,
    apply,
    attenuation_amplitude,
    beam_splitter_for,
    build_beam_splitter,
    conversion_fractions,
    tuning_to_lambda,
)
from .broadcast import BroadcastReport, is_clone_case, prepare_for_broadcast
from .cavity import (
    RamanChannel,
    RamanHamiltonianConfig,
    SteadyStateSpec,
    analytic_steady_state,
    apply_channel,
    build_channel,
    iterate_to_steady,
)
from .discrimination import (
    MomentSummary,
    PovmTriple,
    QubitState,
    attenuate_exact,
    attenuate_two_level,
    build_povm,
    diagonal_term,
    moments,
    phi_state,
    purity_condition,
    run_discrimination_experiment,
)
from .fock import (
    CoherentMixture,
    FockCutoff,
    SingleModeState,
    TwoModeState,
    coherent_vector,
    fidelity_pure,
    mixture_state,
    overlap,
    partial_trace,
    product_state,
    trace_distance,
)

__version__ = "0.1.0"
