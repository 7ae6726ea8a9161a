"""Omnidirectional Golay codebooks and GLRT synchronization for slot-based
massive MIMO downlink, with analytic detection-error laws and deterministic
Monte Carlo experiments."""

from .analysis import (
    AsymptoticMD,
    EffectiveCovariance,
    GeneralizedFRatio,
    asymptotic_md,
    build_R_general,
    build_R_iid,
    build_R_single_path,
    chi_moment,
    covariance_from_eigenvalues,
    fa_closed_form,
    fa_closed_form_log,
    hermitian_eigenvalues,
    lemma1_cdf,
)
from .channel import (
    ChannelConfig,
    ChannelRealization,
    PathSet,
    TemporalCorrelation,
    bessel_j0,
    correlation_matrix,
    iid_channel,
    realize_channel,
    sample_paths,
    steering,
    uniform_gains,
)
from .codebook import (
    AngleGrid,
    Codebook,
    CodebookReport,
    GolayHadamardMatrix,
    GolayPair,
    ScheduleReport,
    SlotSchedule,
    aperiodic_autocorrelation,
    basis_codebook,
    beam_pattern,
    build_approach_codebook,
    build_omni_codebook,
    codebook_from_json,
    codebook_to_json,
    dft_sweep_codebook,
    golay_hadamard,
    golay_pair,
    random_phase_codebook,
    section6_schedule,
    verify_codebook,
    verify_schedule,
    write_pattern_csv,
    zc_precoder,
)
from .detector import (
    DetectorOutput,
    SyncFrame,
    SyncSignal,
    UndefinedStatisticError,
    glrt_statistic,
    make_sync_signal,
    synthesize,
    threshold_from_fa,
)
from .montecarlo import (
    ExperimentConfig,
    ResultRow,
    derive_seed,
    estimate_fa,
    estimate_slope,
    experiment_codebook,
    results_to_csv,
    run_md_full,
    run_md_reduced,
    sweep,
    write_results_csv,
)

__version__ = "0.1.0"

__all__ = [
    "AngleGrid",
    "AsymptoticMD",
    "ChannelConfig",
    "ChannelRealization",
    "Codebook",
    "CodebookReport",
    "DetectorOutput",
    "EffectiveCovariance",
    "ExperimentConfig",
    "GeneralizedFRatio",
    "GolayHadamardMatrix",
    "GolayPair",
    "PathSet",
    "ResultRow",
    "ScheduleReport",
    "SlotSchedule",
    "SyncFrame",
    "SyncSignal",
    "TemporalCorrelation",
    "UndefinedStatisticError",
    "aperiodic_autocorrelation",
    "asymptotic_md",
    "basis_codebook",
    "beam_pattern",
    "bessel_j0",
    "build_R_general",
    "build_R_iid",
    "build_R_single_path",
    "build_approach_codebook",
    "build_omni_codebook",
    "chi_moment",
    "codebook_from_json",
    "codebook_to_json",
    "correlation_matrix",
    "covariance_from_eigenvalues",
    "derive_seed",
    "dft_sweep_codebook",
    "estimate_fa",
    "estimate_slope",
    "experiment_codebook",
    "fa_closed_form",
    "fa_closed_form_log",
    "glrt_statistic",
    "golay_hadamard",
    "golay_pair",
    "hermitian_eigenvalues",
    "iid_channel",
    "lemma1_cdf",
    "make_sync_signal",
    "random_phase_codebook",
    "realize_channel",
    "results_to_csv",
    "run_md_full",
    "run_md_reduced",
    "sample_paths",
    "section6_schedule",
    "steering",
    "sweep",
    "synthesize",
    "threshold_from_fa",
    "uniform_gains",
    "verify_codebook",
    "verify_schedule",
    "write_pattern_csv",
    "write_results_csv",
    "zc_precoder",
]
