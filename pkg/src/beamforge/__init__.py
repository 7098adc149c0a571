"""Hybrid analog-digital training-beam design for compressive channel estimation."""

from .channel import (
    AngularDictionary,
    ChannelRealization,
    build_dictionary,
    invec,
    sample_channel,
    steering_vector,
    vec,
)
from .designer_inf import (
    InfDesignOptions,
    PsdBlockVariable,
    design_hybrid_inf,
    extract_digital,
    solve_digital_psd,
)
from .designer_low import (
    GammaWorkspace,
    GdOptions,
    LowDesignOptions,
    design_hybrid_low,
    digital_gradient,
    gd_digital_block,
    residual_target,
    stepsize_derivative,
)
from .estimator import (
    EstimateReport,
    MeasurementSet,
    estimate_channel,
    nmse,
    omp_recover,
    reconstruct_channel,
    spectral_efficiency,
    synthesize_measurements,
)
from .harness import (
    ExperimentConfig,
    SweepRecord,
    derive_rng,
    parse_config,
    random_baseline,
    run_convergence_trace,
    run_histogram,
    run_sweep,
)
from .hybrid import INFINITE_PHASES, HybridSensingMatrix, PhaseSet, quantize_phases
from .manifold_opt import CgOptions, cg_minimize, polak_ribiere, project_tangent, retract, transport
from .metrics import (
    GramSummary,
    equivalent_dictionary,
    gram_objective,
    mutual_coherence,
    offdiag_histogram,
    scaled_identity_objective,
    summarize_gram,
)

__all__ = [name for name in dir() if not name.startswith("_")]

__version__ = "0.1.0"
